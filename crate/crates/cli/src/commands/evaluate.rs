use std::path::Path;

use anyhow::{ensure, Result};
use serde::Serialize;

use sdq_core::harmonize::temporal_split_corpus;
use sdq_core::metrics::{evaluate_model, report_table, MetricReport};
use sdq_core::scoremodel::{build_examples, CheckpointHeader, Objective, ScoreModel};

use super::train::model_label;
use super::{enum_name, load, out_path, partition, write_json, write_text, StageExt};
use crate::config::{existing_path, RunConfig, SplitChoice};
use crate::provider::{build_provider, Provider};

#[derive(Serialize)]
struct EvaluateReport {
    model: String,
    config_hash: String,
    split: String,
    items: usize,
    reports: Vec<MetricReport>,
}

/// Loads a checkpoint and checks it was trained on this provider's
/// embeddings.
pub fn load_checkpoint(
    path: &Path,
    provider: &Provider,
) -> Result<(ScoreModel<f32>, CheckpointHeader)> {
    let mut file = std::fs::File::open(path).stage("load checkpoint")?;
    let (model, header) = ScoreModel::read_checkpoint(&mut std::io::BufReader::new(&mut file))
        .map_err(|e| anyhow::Error::from(e).context(format!("checkpoint {}", path.display())))
        .stage("load checkpoint")?;
    ensure!(
        header.spec.provider_id == provider.id(),
        "stage load checkpoint: {} was trained on {} embeddings, configured provider is {}",
        path.display(),
        header.spec.provider_id,
        provider.id()
    );
    Ok((model, header))
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let path = existing_path(None, cfg.evaluate.checkpoint.as_deref(), "checkpoint")
        .stage("load checkpoint")?;
    let provider = build_provider(&cfg.provider).stage("provider")?;
    let (model, header) = load_checkpoint(path, &provider)?;
    let corpus = load(cfg)?;
    let (examples, _) = build_examples(
        corpus.records(),
        &header.spec,
        provider.as_dyn(),
        cfg.snapshot,
    )
    .stage("embed")?;
    provider.finish()?;
    let set = match cfg.evaluate.split {
        SplitChoice::All => examples,
        choice => {
            let split = temporal_split_corpus(&corpus, &cfg.split).stage("split")?;
            let [tr, va, te] = partition(&examples, &split);
            match choice {
                SplitChoice::Train => tr,
                SplitChoice::Validation => va,
                _ => te,
            }
        }
    };
    let with_l1 = cfg.train_config(header.spec.kind)?.objective == Objective::Regression;
    let reports = cfg
        .seeds
        .iter()
        .map(|&s| evaluate_model(&model, &set, s, cfg.evaluate.max_pairs, with_l1))
        .collect::<Result<Vec<_>, _>>()
        .stage("evaluate")?;
    let split = enum_name(&cfg.evaluate.split);
    let rows: Vec<(String, MetricReport)> = reports
        .iter()
        .map(|r| (format!("seed {}", r.seed), r.clone()))
        .collect();
    let table = report_table(&rows);
    write_text(&out_path(cfg, format!("evaluate-{split}.txt")), &table)?;
    write_json(
        &out_path(cfg, format!("evaluate-{split}.json")),
        &EvaluateReport {
            model: model_label(&header.spec),
            config_hash: header.config_hash,
            split,
            items: set.len(),
            reports,
        },
    )?;
    print!("{table}");
    Ok(())
}
