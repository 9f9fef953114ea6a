use std::io::BufRead;

use anyhow::{Context, Result};
use serde::Serialize;

use sdq_core::sections::{
    build_section_dataset, embed_section_dataset, train_section_classifier, RawPaper,
    SectionModelSpec, SectionTrainConfig, SectionTrainReport, SynonymTable,
};
use sdq_core::util::{format_mean_sigma, write_bytes_atomic};

use super::{out_path, write_json, write_text, StageExt};
use crate::config::{existing_path, RunConfig};
use crate::provider::build_provider;

#[derive(Serialize)]
struct DatasetReport {
    papers: usize,
    examples: usize,
    label_counts: [usize; 5],
    unmatched_sections: usize,
    empty_sections: usize,
}

#[derive(Serialize)]
struct SeedReport {
    seed: u64,
    #[serde(flatten)]
    report: SectionTrainReport,
}

fn read_papers(path: &std::path::Path) -> Result<Vec<RawPaper>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let s = &cfg.sections;
    let path = existing_path(None, s.papers.as_deref(), "papers file").stage("load papers")?;
    let papers = read_papers(path).stage("load papers")?;
    let table = match s.synonyms.as_deref() {
        Some(p) => SynonymTable::load(p).stage("load synonyms")?,
        None => SynonymTable::default(),
    };
    let ds = build_section_dataset(&papers, &table);
    let provider = build_provider(&cfg.provider).stage("provider")?;
    let t0 = std::time::Instant::now();
    let data = embed_section_dataset(&ds, provider.as_dyn()).stage("embed")?;
    provider.finish()?;
    eprintln!(
        "embedded {} section examples in {:.1?}",
        data.len(),
        t0.elapsed()
    );
    write_json(
        &out_path(cfg, "sections/dataset.json"),
        &DatasetReport {
            papers: papers.len(),
            examples: ds.examples.len(),
            label_counts: ds.label_counts(),
            unmatched_sections: ds.unmatched_sections,
            empty_sections: ds.empty_sections,
        },
    )?;
    let spec = SectionModelSpec {
        layers: s.layers,
        heads: s.heads,
        ff_hidden: s.ff_hidden,
        ..SectionModelSpec::new(provider.id(), provider.dimension())
    };
    let mut accuracies = Vec::new();
    for &seed in &cfg.seeds {
        let t0 = std::time::Instant::now();
        let tcfg = SectionTrainConfig {
            seed,
            ..s.train.clone()
        };
        let (model, report) =
            train_section_classifier(spec.clone(), &data, &tcfg).stage("train")?;
        let dir = out_path(cfg, format!("sections/seed-{seed}"));
        let mut bytes = Vec::new();
        model.write_checkpoint(&mut bytes).stage("checkpoint")?;
        write_bytes_atomic(&dir.join("model.sdqs"), &bytes).stage("checkpoint")?;
        eprintln!(
            "seed {seed}: test accuracy {:?} in {:.1?}",
            report.test_accuracy,
            t0.elapsed()
        );
        accuracies.extend(report.test_accuracy);
        write_json(&dir.join("report.json"), &SeedReport { seed, report })?;
    }
    let line = if accuracies.is_empty() {
        "section test accuracy: -\n".to_string()
    } else {
        format!(
            "section test accuracy: {} over {} seeds\n",
            format_mean_sigma(&accuracies),
            accuracies.len()
        )
    };
    write_text(&out_path(cfg, "sections/summary.txt"), &line)?;
    print!("{line}");
    Ok(())
}
