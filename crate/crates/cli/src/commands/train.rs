use anyhow::{ensure, Result};
use serde::Serialize;

use sdq_core::harmonize::{temporal_split_corpus, TemporalSplit};
use sdq_core::metrics::{evaluate_model, summary_row, summary_table, MetricReport};
use sdq_core::scoremodel::{
    build_examples, grid_search, train, write_history, ExampleBuildReport, GridCell, ModelSpec,
    Objective, ScoreModel,
};

use super::{enum_name, load, out_path, partition, write_json, write_text, StageExt};
use crate::config::RunConfig;
use crate::provider::build_provider;

#[derive(Serialize)]
struct DataReport {
    provider: String,
    examples: ExampleBuildReport,
    train: usize,
    validation: usize,
    test: usize,
}

#[derive(Serialize)]
struct SeedReport {
    seed: u64,
    config_hash: String,
    learning_rate: f64,
    dropout: f64,
    epochs_run: usize,
    best_epoch: Option<usize>,
    best_val_loss: Option<f64>,
    validation: Option<MetricReport>,
    test: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<GridCell>>,
}

#[derive(Serialize)]
struct Summary {
    model: String,
    seeds: Vec<u64>,
    /// `mean (σ)` over seeds.
    accuracy: String,
    spearman: String,
    l1: String,
    pearson: String,
    per_seed: Vec<MetricReport>,
}

pub fn model_label(spec: &ModelSpec) -> String {
    format!(
        "{}/{}/{}",
        enum_name(&spec.representation_kind),
        enum_name(&spec.context_kind),
        enum_name(&spec.target_kind)
    )
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let provider = build_provider(&cfg.provider).stage("provider")?;
    let corpus = load(cfg)?;
    let spec = cfg
        .model
        .spec(provider.id(), provider.dimension())
        .stage("model spec")?;
    let split: TemporalSplit = temporal_split_corpus(&corpus, &cfg.split).stage("split")?;
    let t0 = std::time::Instant::now();
    let (examples, build) =
        build_examples(corpus.records(), &spec, provider.as_dyn(), cfg.snapshot).stage("embed")?;
    provider.finish()?;
    eprintln!(
        "embedded {} examples in {:.1?}",
        examples.len(),
        t0.elapsed()
    );
    let [tr, va, te] = partition(&examples, &split);
    ensure!(
        tr.len() >= 2 && va.len() >= 2 && te.len() >= 2,
        "stage split: need at least 2 examples per split, got {}/{}/{}",
        tr.len(),
        va.len(),
        te.len()
    );
    write_json(&out_path(cfg, "split.json"), &split)?;
    write_json(
        &out_path(cfg, "data.json"),
        &DataReport {
            provider: provider.id().to_string(),
            examples: build,
            train: tr.len(),
            validation: va.len(),
            test: te.len(),
        },
    )?;

    let base = cfg.train_config(spec.kind).stage("train config")?;
    let mut tests = Vec::new();
    for &seed in &cfg.seeds {
        let t0 = std::time::Instant::now();
        let tcfg = sdq_core::scoremodel::TrainConfig {
            seed,
            ..base.clone()
        };
        let (outcome, lr, dropout, grid) = if cfg.grid {
            let g = grid_search(&spec, &tr, &va, &tcfg).stage("grid search")?;
            (g.best, g.best_learning_rate, g.best_dropout, Some(g.cells))
        } else {
            let model = ScoreModel::new(spec.clone(), seed).stage("train")?;
            (
                train(model, &tr, &va, &tcfg).stage("train")?,
                tcfg.learning_rate,
                tcfg.dropout,
                None,
            )
        };
        let final_cfg = sdq_core::scoremodel::TrainConfig {
            learning_rate: lr,
            dropout,
            ..tcfg.clone()
        };
        let with_l1 = tcfg.objective == Objective::Regression;
        let max_pairs = cfg.evaluate.max_pairs;
        let test =
            evaluate_model(&outcome.model, &te, seed, max_pairs, with_l1).stage("evaluate")?;
        let validation = evaluate_model(&outcome.model, &va, seed, max_pairs, with_l1).ok();
        let dir = out_path(cfg, format!("seed-{seed}"));
        let hash = final_cfg.config_hash();
        let mut ckpt = Vec::new();
        outcome
            .model
            .write_checkpoint(&mut ckpt, &hash)
            .stage("checkpoint")?;
        sdq_core::util::write_bytes_atomic(&dir.join("model.sdqm"), &ckpt).stage("checkpoint")?;
        write_history(&dir.join("history.jsonl"), &outcome.history).stage("history")?;
        eprintln!(
            "seed {seed}: test accuracy {:.4}, best epoch {:?}, {:.1?}",
            test.pairwise_accuracy.unwrap_or(f64::NAN),
            outcome.best_epoch,
            t0.elapsed()
        );
        write_json(
            &dir.join("report.json"),
            &SeedReport {
                seed,
                config_hash: hash,
                learning_rate: lr,
                dropout,
                epochs_run: outcome.history.len(),
                best_epoch: outcome.best_epoch,
                best_val_loss: outcome.best_val_loss,
                validation,
                test: test.clone(),
                grid,
            },
        )?;
        tests.push(test);
    }

    let label = model_label(&spec);
    let row = summary_row(&label, &tests);
    let table = summary_table(std::slice::from_ref(&row));
    write_text(&out_path(cfg, "summary.txt"), &table)?;
    write_json(
        &out_path(cfg, "summary.json"),
        &Summary {
            model: label,
            seeds: cfg.seeds.clone(),
            accuracy: row[1].clone(),
            spearman: row[2].clone(),
            l1: row[3].clone(),
            pearson: row[4].clone(),
            per_seed: tests,
        },
    )?;
    print!("{table}");
    Ok(())
}
