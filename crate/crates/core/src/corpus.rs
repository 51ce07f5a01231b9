//! Ground-truth and dataset bookkeeping: the `ddd-dd-dd` sample identifier
//! scheme, the positional-token alphabet with its reserved CTC blank,
//! transcription encoding, writer-level splits, and manifest statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Literal first line of every alphabet file; the reserved blank token.
pub const BLANK_TOKEN: &str = "<blank>";

#[derive(Debug, Clone, PartialEq)]
pub enum CorpusError {
    /// Not a canonical 9-character `ddd-dd-dd` identifier.
    MalformedId(String),
    /// Transcription token absent from the alphabet; position is 1-based.
    UnknownToken { token: String, position: usize },
    /// Empty transcription cannot be a training target.
    EmptyTarget,
    /// Split fractions must be non-negative and sum to 1.
    BadFractions,
    /// Writer-level splitting needs at least three writers.
    TooFewWriters { got: usize },
    /// A writer id appeared in more than one split.
    WriterStraddlesSplits { writer: u16 },
    /// Duplicate sample id in a manifest.
    DuplicateSample(SampleId),
    /// Malformed alphabet file body.
    MalformedAlphabet(String),
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::MalformedId(s) => write!(f, "malformed sample id {s:?}"),
            CorpusError::UnknownToken { token, position } => {
                write!(f, "unknown token {token:?} at position {position}")
            }
            CorpusError::EmptyTarget => write!(f, "empty target transcription"),
            CorpusError::BadFractions => write!(f, "split fractions must sum to 1"),
            CorpusError::TooFewWriters { got } => {
                write!(f, "need at least 3 writers, got {got}")
            }
            CorpusError::WriterStraddlesSplits { writer } => {
                write!(f, "writer {writer:03} assigned to more than one split")
            }
            CorpusError::DuplicateSample(id) => write!(f, "duplicate sample id {id}"),
            CorpusError::MalformedAlphabet(msg) => write!(f, "malformed alphabet: {msg}"),
        }
    }
}

/// `writer-page-line` identity of one text line, canonical form `ddd-dd-dd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampleId {
    pub writer: u16,
    pub page: u8,
    pub line: u8,
}

impl SampleId {
    pub fn new(writer: u16, page: u8, line: u8) -> Option<Self> {
        (writer <= 999 && page <= 99 && line <= 99).then_some(SampleId { writer, page, line })
    }

    /// Parse the strict 9-character zero-padded form.
    pub fn parse(name: &str) -> Result<Self, CorpusError> {
        let bytes = name.as_bytes();
        let malformed = || CorpusError::MalformedId(name.to_string());
        if bytes.len() != 9 || bytes[3] != b'-' || bytes[6] != b'-' {
            return Err(malformed());
        }
        let digits = |range: core::ops::Range<usize>| -> Result<u16, CorpusError> {
            let mut v = 0u16;
            for &b in &bytes[range.clone()] {
                if !b.is_ascii_digit() {
                    return Err(CorpusError::MalformedId(name.to_string()));
                }
                v = v * 10 + (b - b'0') as u16;
            }
            Ok(v)
        };
        Ok(SampleId {
            writer: digits(0..3)?,
            page: digits(4..6)? as u8,
            line: digits(7..9)? as u8,
        })
    }

    /// Page-level prefix `ddd-dd`.
    pub fn page_stem(&self) -> String {
        alloc::format!("{:03}-{:02}", self.writer, self.page)
    }
}

impl fmt::Display for SampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:03}-{:02}-{:02}", self.writer, self.page, self.line)
    }
}

/// Dataset partition a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered label tokens with the CTC blank fixed at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Optional token -> rendered text mapping (positional tokens are not
    /// codepoints themselves).
    render: BTreeMap<String, String>,
}

impl Alphabet {
    /// Build from the union of tokens over transcriptions: sorted
    /// lexicographically with the blank prepended at index 0.
    pub fn from_transcriptions<'a, I>(lines: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut set: BTreeSet<String> = BTreeSet::new();
        for line in lines {
            for token in line.split_whitespace() {
                set.insert(token.to_string());
            }
        }
        Self::from_sorted_tokens(set.into_iter().collect())
    }

    fn from_sorted_tokens(sorted: Vec<String>) -> Self {
        let mut tokens = Vec::with_capacity(sorted.len() + 1);
        tokens.push(BLANK_TOKEN.to_string());
        tokens.extend(sorted);
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Alphabet {
            tokens,
            index,
            render: BTreeMap::new(),
        }
    }

    /// Reconstruct from alphabet-file lines: line 1 must be the blank.
    pub fn from_file_lines<'a, I>(lines: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut tokens = Vec::new();
        for (i, line) in lines.into_iter().enumerate() {
            let token = line.trim();
            if token.is_empty() {
                continue;
            }
            if i == 0 && token != BLANK_TOKEN {
                return Err(CorpusError::MalformedAlphabet(alloc::format!(
                    "line 1 must be {BLANK_TOKEN}, got {token:?}"
                )));
            }
            tokens.push(token.to_string());
        }
        if tokens.is_empty() {
            return Err(CorpusError::MalformedAlphabet(String::from("empty file")));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(CorpusError::MalformedAlphabet(alloc::format!(
                    "duplicate token {t:?}"
                )));
            }
        }
        Ok(Alphabet {
            tokens,
            index,
            render: BTreeMap::new(),
        })
    }

    /// Canonical file body: one token per line, blank first, trailing newline.
    pub fn file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in &self.tokens {
            out.extend_from_slice(t.as_bytes());
            out.push(b'\n');
        }
        out
    }

    /// FNV-1a 64-bit hash of the canonical file bytes; embedded in
    /// checkpoints to guard against alphabet drift.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(&self.file_bytes())
    }

    /// Total classes including the blank.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the blank is always present
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn set_render(&mut self, token: &str, rendered: &str) {
        self.render.insert(token.to_string(), rendered.to_string());
    }

    pub fn rendered(&self, token: &str) -> Option<&str> {
        self.render.get(token).map(String::as_str)
    }
}

/// Ordered alphabet indices; never contains the blank.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelSequence {
    indices: Vec<usize>,
}

impl LabelSequence {
    /// Wrap raw indices; callers guarantee none is the blank (0).
    pub fn from_indices(indices: Vec<usize>) -> Option<Self> {
        indices
            .iter()
            .all(|&i| i != 0)
            .then_some(LabelSequence { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Map back to tokens; `None` if any index is out of range.
    pub fn decode<'a>(&self, alphabet: &'a Alphabet) -> Option<Vec<&'a str>> {
        self.indices.iter().map(|&i| alphabet.token(i)).collect()
    }
}

/// Encode a whitespace-separated token line against a closed alphabet.
pub fn encode_transcription(gt: &str, alphabet: &Alphabet) -> Result<LabelSequence, CorpusError> {
    let mut indices = Vec::new();
    for (pos, token) in gt.split_whitespace().enumerate() {
        match alphabet.index_of(token) {
            Some(0) | None => {
                return Err(CorpusError::UnknownToken {
                    token: token.to_string(),
                    position: pos + 1,
                })
            }
            Some(i) => indices.push(i),
        }
    }
    if indices.is_empty() {
        return Err(CorpusError::EmptyTarget);
    }
    Ok(LabelSequence { indices })
}

/// One manifest line: image, ground truth, identity, split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub image_path: String,
    pub gt_path: String,
    pub id: SampleId,
    pub split: Split,
}

/// An ordered set of manifest records with unique sample ids and
/// writer-consistent splits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        let mut writer_split: BTreeMap<u16, Split> = BTreeMap::new();
        for r in &records {
            if !seen.insert(r.id) {
                return Err(CorpusError::DuplicateSample(r.id));
            }
            match writer_split.get(&r.id.writer) {
                Some(&s) if s != r.split => {
                    return Err(CorpusError::WriterStraddlesSplits {
                        writer: r.id.writer,
                    })
                }
                _ => {
                    writer_split.insert(r.id.writer, r.split);
                }
            }
        }
        Ok(Manifest { records })
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn split_records(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }
}

/// Shuffle writers with a seeded permutation, then cut at cumulative
/// fractions of the writer count. Every line of a writer inherits its split.
pub fn split_by_writer(
    writers: &[u16],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<BTreeMap<u16, Split>, CorpusError> {
    let (ft, fv, fe) = fractions;
    if ft < 0.0 || fv < 0.0 || fe < 0.0 || libm::fabs(ft + fv + fe - 1.0) > 1e-9 {
        return Err(CorpusError::BadFractions);
    }
    let mut unique: Vec<u16> = writers.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() < 3 {
        return Err(CorpusError::TooFewWriters { got: unique.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    unique.shuffle(&mut rng);

    let n = unique.len() as f64;
    let cut_train = libm::round(n * ft) as usize;
    let cut_val = libm::round(n * (ft + fv)) as usize;
    let mut assignment = BTreeMap::new();
    for (i, w) in unique.into_iter().enumerate() {
        let split = if i < cut_train {
            Split::Train
        } else if i < cut_val {
            Split::Val
        } else {
            Split::Test
        };
        assignment.insert(w, split);
    }
    Ok(assignment)
}

/// Aggregate manifest counts; token counts come from the transcriptions,
/// supplied in record order by the IO layer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ManifestStats {
    pub lines: usize,
    pub tokens: usize,
    pub distinct_tokens: usize,
    pub writers_per_split: BTreeMap<Split, usize>,
    pub lines_per_split: BTreeMap<Split, usize>,
}

pub fn manifest_stats(manifest: &Manifest, transcriptions: &[String]) -> ManifestStats {
    let mut distinct = BTreeSet::new();
    let mut tokens = 0usize;
    for line in transcriptions {
        for t in line.split_whitespace() {
            tokens += 1;
            distinct.insert(t.to_string());
        }
    }
    let mut writers: BTreeMap<Split, BTreeSet<u16>> = BTreeMap::new();
    let mut lines_per_split: BTreeMap<Split, usize> = BTreeMap::new();
    for r in manifest.records() {
        writers.entry(r.split).or_default().insert(r.id.writer);
        *lines_per_split.entry(r.split).or_default() += 1;
    }
    ManifestStats {
        lines: manifest.records().len(),
        tokens,
        distinct_tokens: distinct.len(),
        writers_per_split: writers.into_iter().map(|(s, w)| (s, w.len())).collect(),
        lines_per_split,
    }
}

/// FNV-1a 64-bit over raw bytes; stable across platforms and runs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
