//! Synthetic corpus emission: pages, clean line crops, ground-truth files,
//! alphabet, truth ledger, and a writer-split manifest.

use std::fs;
use std::path::Path;

use nastaliq_core::corpus::{split_by_writer, ManifestRecord, SampleId};
use nastaliq_core::synth::{generate_page, SynthConfig, SynthPage};

use crate::corpusio::write_manifest;
use crate::error::{CliError, Result};
use crate::io::save_pgm;
use crate::par::parallel_map;

/// Output layout under `outdir`:
/// `pages/<ddd-dd>.pgm`, `lines/<ddd-dd-dd>.pgm`, `gt/<ddd-dd-dd>.gt.txt`,
/// `alphabet.txt`, `truth.tsv`, `manifest.tsv`. One writer per page.
pub fn emit_corpus(
    cfg: &SynthConfig,
    pages: usize,
    fractions: (f64, f64, f64),
    outdir: &Path,
    threads: usize,
) -> Result<usize> {
    cfg.validate()?;
    if pages == 0 {
        return Err(CliError::usage("pages must be >= 1"));
    }
    if pages > 999 {
        return Err(CliError::usage("at most 999 pages (one writer each)"));
    }
    fs::create_dir_all(outdir)
        .map_err(|e| CliError::data(format!("{}: {e}", outdir.display())))?;

    let writer_ids: Vec<u16> = (1..=pages as u16).collect();
    let rendered: Vec<(u16, SynthPage)> = parallel_map(writer_ids.clone(), threads, |writer| {
        let page = generate_page(cfg, writer, 1).expect("validated config");
        (writer, page)
    });

    let mut truth = String::from("pageid\ttrue_skew\tband_list\n");
    let mut line_count = 0usize;
    for (writer, page) in &rendered {
        let page_id = format!("{writer:03}-01");
        save_pgm(&outdir.join(format!("pages/{page_id}.pgm")), &page.image)?;
        let bands: Vec<String> = page
            .true_bands
            .iter()
            .map(|b| format!("{}:{}", b.top, b.height))
            .collect();
        truth.push_str(&format!(
            "{page_id}\t{}\t{}\n",
            page.true_skew,
            bands.join(";")
        ));
        for (i, tokens) in page.lines.iter().enumerate() {
            let id = SampleId::new(*writer, 1, (i + 1) as u8)
                .ok_or_else(|| CliError::usage("too many lines per page for the id scheme"))?;
            let crop = page
                .line_crop(i)
                .ok_or_else(|| CliError::Internal(format!("missing band for {id}")))?;
            save_pgm(&outdir.join(format!("lines/{id}.pgm")), &crop)?;
            fs::write(
                outdir.join(format!("gt/{id}.gt.txt")),
                format!("{}\n", tokens.join(" ")),
            )?;
            line_count += 1;
        }
    }
    fs::write(outdir.join("truth.tsv"), truth)?;

    let alphabet = cfg.alphabet();
    fs::write(outdir.join("alphabet.txt"), alphabet.file_bytes())?;

    let assignment = split_by_writer(&writer_ids, fractions, cfg.seed)?;
    let mut records = Vec::with_capacity(line_count);
    for (writer, page) in &rendered {
        for i in 0..page.lines.len() {
            let id = SampleId::new(*writer, 1, (i + 1) as u8).expect("checked above");
            records.push(ManifestRecord {
                image_path: format!("lines/{id}.pgm"),
                gt_path: format!("gt/{id}.gt.txt"),
                id,
                split: assignment[writer],
            });
        }
    }
    write_manifest(&outdir.join("manifest.tsv"), &records)?;
    Ok(line_count)
}

/// Parsed `truth.tsv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub page_id: String,
    pub true_skew: f64,
    pub bands: Vec<(usize, usize)>,
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(CliError::data(format!(
                "{}:{}: expected 3 fields",
                path.display(),
                lineno + 1
            )));
        }
        let true_skew: f64 = fields[1]
            .parse()
            .map_err(|_| CliError::data(format!("bad skew {:?}", fields[1])))?;
        let mut bands = Vec::new();
        for part in fields[2].split(';').filter(|p| !p.is_empty()) {
            let (top, height) = part
                .split_once(':')
                .ok_or_else(|| CliError::data(format!("bad band {part:?}")))?;
            bands.push((
                top.parse().map_err(|_| CliError::data("bad band top"))?,
                height.parse().map_err(|_| CliError::data("bad band height"))?,
            ));
        }
        rows.push(TruthRow {
            page_id: fields[0].to_string(),
            true_skew,
            bands,
        });
    }
    Ok(rows)
}
