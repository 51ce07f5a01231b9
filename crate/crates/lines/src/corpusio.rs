//! Manifest, ground-truth, and alphabet files, plus dataset loading into
//! ready-to-train samples.
//!
//! Manifest format: UTF-8, one record per line,
//! `<image-path><TAB><gt-path><TAB><split>`, paths relative to the manifest
//! file's directory; the sample id comes from the image filename stem.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Component, Path, PathBuf};

use nastaliq_core::corpus::{
    encode_transcription, split_by_writer, Alphabet, Manifest, ManifestRecord, SampleId, Split,
};
use nastaliq_core::segment::{extract_frames, normalize_height, FrameDirection};
use nastaliq_core::train::TrainSample;

use crate::error::{CliError, Result};
use crate::io::load_gray;

/// A manifest together with the directory its paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub base_dir: PathBuf,
}

impl LoadedManifest {
    pub fn image_path(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.image_path)
    }

    pub fn gt_path(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.gt_path)
    }
}

pub fn read_manifest(path: &Path) -> Result<LoadedManifest> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (image, gt, split) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(i), Some(g), Some(s), None) => (i, g, s),
            _ => {
                return Err(CliError::data(format!(
                    "{}:{}: expected 3 tab-separated fields",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        let split = Split::parse(split).ok_or_else(|| {
            CliError::data(format!(
                "{}:{}: unknown split {split:?}",
                path.display(),
                lineno + 1
            ))
        })?;
        let stem = Path::new(image)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default();
        let id = SampleId::parse(stem).map_err(|e| {
            CliError::data(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        records.push(ManifestRecord {
            image_path: image.to_string(),
            gt_path: gt.to_string(),
            id,
            split,
        });
    }
    let manifest = Manifest::new(records)?;
    Ok(LoadedManifest { manifest, base_dir })
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("{}\t{}\t{}\n", r.image_path, r.gt_path, r.split));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_alphabet(path: &Path) -> Result<Alphabet> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(Alphabet::from_file_lines(text.lines())?)
}

pub fn write_alphabet(path: &Path, alphabet: &Alphabet) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, alphabet.file_bytes())?;
    Ok(())
}

/// Read every record's transcription, in record order.
pub fn read_transcriptions(loaded: &LoadedManifest) -> Result<Vec<String>> {
    loaded
        .manifest
        .records()
        .iter()
        .map(|r| {
            let p = loaded.gt_path(r);
            let text = fs::read_to_string(&p)
                .map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            Ok(text.trim().to_string())
        })
        .collect()
}

/// Union alphabet over every transcription in the manifest.
pub fn build_alphabet(loaded: &LoadedManifest) -> Result<Alphabet> {
    let transcriptions = read_transcriptions(loaded)?;
    Ok(Alphabet::from_transcriptions(
        transcriptions.iter().map(String::as_str),
    ))
}

/// Load one split as training samples: image -> height-normalized frames,
/// transcription -> label sequence.
pub fn load_split(
    loaded: &LoadedManifest,
    split: Split,
    alphabet: &Alphabet,
) -> Result<Vec<TrainSample>> {
    let mut samples = Vec::new();
    for record in loaded.manifest.split_records(split) {
        let image = load_gray(&loaded.image_path(record))?;
        let frames = extract_frames(&normalize_height(&image), FrameDirection::RightToLeft);
        let gt_path = loaded.gt_path(record);
        let text = fs::read_to_string(&gt_path)
            .map_err(|e| CliError::data(format!("{}: {e}", gt_path.display())))?;
        let target = encode_transcription(text.trim(), alphabet)
            .map_err(|e| CliError::data(format!("{}: {e}", record.id)))?;
        samples.push(TrainSample {
            id: record.id,
            frames,
            target,
        });
    }
    Ok(samples)
}

/// Relative path from `base` to `target`, with `..` segments as needed.
/// Both are made absolute against the current directory first.
pub fn relative_path(base: &Path, target: &Path) -> PathBuf {
    let absolutize = |p: &Path| -> PathBuf {
        let joined = if p.is_absolute() {
            p.to_path_buf()
        } else {
            std::env::current_dir().unwrap_or_default().join(p)
        };
        // Normalize out `.` and `..` components lexically.
        let mut parts: Vec<std::ffi::OsString> = Vec::new();
        for c in joined.components() {
            match c {
                Component::CurDir => {}
                Component::ParentDir => {
                    parts.pop();
                }
                other => parts.push(other.as_os_str().to_os_string()),
            }
        }
        parts.iter().collect()
    };
    let base = absolutize(base);
    let target = absolutize(target);
    let base_parts: Vec<_> = base.components().collect();
    let target_parts: Vec<_> = target.components().collect();
    let common = base_parts
        .iter()
        .zip(&target_parts)
        .take_while(|(a, b)| a == b)
        .count();
    let mut rel = PathBuf::new();
    for _ in common..base_parts.len() {
        rel.push("..");
    }
    for part in &target_parts[common..] {
        rel.push(part);
    }
    if rel.as_os_str().is_empty() {
        rel.push(".");
    }
    rel
}

/// Scan `root` for line images named `ddd-dd-dd.pgm`, pair each with its
/// sidecar ground truth, and assign writer-level splits.
pub fn scan_and_split(
    root: &Path,
    fractions: (f64, f64, f64),
    seed: u64,
    manifest_path: &Path,
) -> Result<Vec<ManifestRecord>> {
    let mut images: Vec<(SampleId, PathBuf)> = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries =
            fs::read_dir(&dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let entry = entry?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().and_then(|e| e.to_str()) == Some("pgm") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    if let Ok(id) = SampleId::parse(stem) {
                        images.push((id, path));
                    }
                }
            }
        }
    }
    if images.is_empty() {
        return Err(CliError::data(format!(
            "{}: no ddd-dd-dd.pgm line images found",
            root.display()
        )));
    }
    images.sort_by_key(|(id, _)| *id);

    let gt_dir = root.join("gt");
    let locate_gt = |id: &SampleId, image: &Path| -> Result<PathBuf> {
        let name = format!("{id}.gt.txt");
        let sibling = image.with_file_name(&name);
        if sibling.is_file() {
            return Ok(sibling);
        }
        let in_gt = gt_dir.join(&name);
        if in_gt.is_file() {
            return Ok(in_gt);
        }
        Err(CliError::data(format!("missing ground truth for {id}")))
    };

    let writers: Vec<u16> = images
        .iter()
        .map(|(id, _)| id.writer)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let assignment = split_by_writer(&writers, fractions, seed)?;

    let manifest_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut records = Vec::with_capacity(images.len());
    for (id, image) in images {
        let gt = locate_gt(&id, &image)?;
        records.push(ManifestRecord {
            image_path: relative_path(manifest_dir, &image)
                .to_string_lossy()
                .into_owned(),
            gt_path: relative_path(manifest_dir, &gt).to_string_lossy().into_owned(),
            id,
            split: assignment[&id.writer],
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::save_pgm;
    use nastaliq_core::raster::GrayImage;

    fn write_line_fixture(dir: &Path, id: &str, tokens: &str) {
        let img = GrayImage::new(4, 6, vec![0.5; 24]).unwrap();
        save_pgm(&dir.join(format!("{id}.pgm")), &img).unwrap();
        fs::write(dir.join(format!("{id}.gt.txt")), format!("{tokens}\n")).unwrap();
    }

    #[test]
    fn scan_build_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (w, tokens) in [(1u16, "a_i b_f"), (2, "b_f"), (3, "a_i a_i"), (4, "c_m b_f")] {
            write_line_fixture(dir.path(), &format!("{w:03}-01-01"), tokens);
        }
        let manifest_path = dir.path().join("manifest.tsv");
        let records =
            scan_and_split(dir.path(), (0.5, 0.25, 0.25), 3, &manifest_path).unwrap();
        assert_eq!(records.len(), 4);
        write_manifest(&manifest_path, &records).unwrap();

        let loaded = read_manifest(&manifest_path).unwrap();
        assert_eq!(loaded.manifest.records().len(), 4);
        let alphabet = build_alphabet(&loaded).unwrap();
        assert_eq!(alphabet.len(), 4); // blank + a_i, b_f, c_m

        // Every record loads into a sample under its split.
        let mut total = 0;
        for split in [Split::Train, Split::Val, Split::Test] {
            total += load_split(&loaded, split, &alphabet).unwrap_or_default().len();
        }
        assert_eq!(total, 4);
    }

    #[test]
    fn missing_gt_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        for w in 1..=3u16 {
            write_line_fixture(dir.path(), &format!("{w:03}-01-01"), "a_i");
        }
        let img = GrayImage::new(4, 6, vec![0.5; 24]).unwrap();
        save_pgm(&dir.path().join("004-01-01.pgm"), &img).unwrap();
        let err = scan_and_split(
            dir.path(),
            (0.5, 0.25, 0.25),
            3,
            &dir.path().join("manifest.tsv"),
        )
        .unwrap_err();
        assert!(format!("{err}").contains("004-01-01"));
    }

    #[test]
    fn malformed_manifest_lines_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.tsv");
        fs::write(&path, "just-one-field\n").unwrap();
        assert!(read_manifest(&path).is_err());
        fs::write(&path, "001-01-01.pgm\t001-01-01.gt.txt\tnope\n").unwrap();
        assert!(read_manifest(&path).is_err());
        fs::write(&path, "bad-stem.pgm\tx.gt.txt\ttrain\n").unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn relative_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("work");
        let target = dir.path().join("data/lines/001-01-01.pgm");
        let rel = relative_path(&base, &target);
        assert_eq!(rel, PathBuf::from("../data/lines/001-01-01.pgm"));
        let same = relative_path(dir.path(), dir.path());
        assert_eq!(same, PathBuf::from("."));
    }
}
