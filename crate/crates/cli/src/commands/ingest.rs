use std::path::{Path, PathBuf};

use anyhow::{ensure, Result};

use sdq_core::corpus::{save_corpus, Corpus};
use sdq_core::harmonize::citations::fetch_citation_counts;
use sdq_core::harmonize::{ingest_export, IngestSummary, VenueTable};
use sdq_core::metrics::text_table;

use super::{out_path, write_json, StageExt};
use crate::config::RunConfig;

pub fn summary_text(s: &IngestSummary) -> String {
    let rows: Vec<Vec<String>> = s
        .per_venue
        .iter()
        .map(|(v, c)| vec![v.clone(), c.submissions.to_string(), c.reviews.to_string()])
        .collect();
    let mut out = text_table(&["venue", "submissions", "reviews"], &rows);
    out.push_str(&format!(
        "total: {} submissions, {} reviews from {} files\n",
        s.submissions, s.reviews, s.files
    ));
    for (venue, fields) in &s.unmapped_fields {
        for (field, n) in fields {
            out.push_str(&format!("unmapped field {venue} / {field}: {n}\n"));
        }
    }
    if !s.skipped.is_empty() {
        out.push_str(&format!("skipped {} malformed records\n", s.skipped.len()));
    }
    out
}

pub fn run(
    cfg: &RunConfig,
    export: &Path,
    mapping: &Path,
    output: Option<PathBuf>,
    skip_bad: bool,
    citations: bool,
) -> Result<()> {
    let venues = VenueTable::load(mapping).stage("load mapping")?;
    ensure!(
        export.is_dir(),
        "stage read export: {} is not a directory",
        export.display()
    );
    let (mut records, summary) = ingest_export(export, &venues, skip_bad).stage("harmonize")?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    for s in &summary.skipped {
        eprintln!("skipped {s}");
    }
    if citations && !records.is_empty() {
        let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
        let counts = fetch_citation_counts(&ids, &cfg.citations).stage("citations")?;
        for r in &mut records {
            if let Some(c) = counts.get(&r.id) {
                r.citation_count = Some(c.citations);
                r.influential_citation_count = Some(c.influential_citations);
            }
        }
        eprintln!(
            "citation counts found for {} of {} papers",
            counts.len(),
            ids.len()
        );
    }
    let corpus = Corpus::from_records(records).stage("validate corpus")?;
    let path = output
        .or_else(|| cfg.corpus.clone())
        .unwrap_or_else(|| out_path(cfg, "corpus.jsonl"));
    save_corpus(&corpus, &path).stage("write corpus")?;
    write_json(&out_path(cfg, "ingest_summary.json"), &summary)?;
    print!("{}", summary_text(&summary));
    Ok(())
}
