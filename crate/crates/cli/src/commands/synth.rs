use std::path::PathBuf;

use anyhow::Result;
use serde::Serialize;

use sdq_core::corpus::{save_corpus, Corpus, SectionType};
use sdq_core::sections::{RawPaper, RawSection, SynonymTable};
use sdq_core::synth::{planted_corpus, PlantedCorpusSpec};
use sdq_core::util::write_atomic;

use super::{out_path, write_json, write_text, StageExt};
use crate::config::RunConfig;
use crate::provider::build_provider;

#[derive(Serialize)]
struct SynthReport {
    provider: String,
    papers: usize,
    topics: usize,
    reviews_per_paper: usize,
    noise: f64,
    seed: u64,
    topic_sizes: Vec<usize>,
}

/// Writes the planted corpus, its latent topics, and the same papers as
/// headed raw sections for the section classifier.
pub fn run(
    cfg: &RunConfig,
    papers: usize,
    topics: usize,
    reviews: usize,
    noise: f64,
    output: Option<PathBuf>,
) -> Result<()> {
    let provider = build_provider(&cfg.provider).stage("provider")?;
    let spec = PlantedCorpusSpec {
        papers,
        topics,
        reviews_per_paper: reviews,
        noise,
        snapshot: cfg.snapshot,
        seed: cfg.seeds[0],
        ..Default::default()
    };
    let (records, labels) = planted_corpus(provider.as_dyn(), &spec).stage("generate")?;
    provider.finish()?;

    let headings = SynonymTable::default();
    let raw: Vec<RawPaper> = records
        .iter()
        .map(|r| RawPaper {
            id: r.id.clone(),
            sections: SectionType::ALL
                .iter()
                .filter_map(|k| {
                    Some(RawSection {
                        heading: headings.synonyms().get(k)?.first()?.clone(),
                        body: r.sections.get(k)?.clone(),
                    })
                })
                .collect(),
        })
        .collect();
    let mut topic_sizes = vec![0; topics.max(1)];
    let mut csv = String::from("paper_id,topic\n");
    for (r, t) in records.iter().zip(&labels) {
        topic_sizes[*t] += 1;
        csv.push_str(&format!("{},{t}\n", r.id));
    }

    let corpus = Corpus::from_records(records).stage("validate corpus")?;
    let path = output
        .or_else(|| cfg.corpus.clone())
        .unwrap_or_else(|| out_path(cfg, "corpus.jsonl"));
    save_corpus(&corpus, &path).stage("write corpus")?;
    write_atomic(&out_path(cfg, "raw_papers.jsonl"), |w| {
        use std::io::Write;
        for p in &raw {
            writeln!(w, "{}", serde_json::to_string(p).expect("serializes"))?;
        }
        Ok(())
    })
    .stage("write raw papers")?;
    write_text(&out_path(cfg, "planted_topics.csv"), &csv)?;
    let report = SynthReport {
        provider: provider.id().to_string(),
        papers,
        topics: topics.max(1),
        reviews_per_paper: reviews,
        noise,
        seed: spec.seed,
        topic_sizes,
    };
    write_json(&out_path(cfg, "synth.json"), &report)?;
    println!("wrote {} planted papers to {}", papers, path.display());
    Ok(())
}
