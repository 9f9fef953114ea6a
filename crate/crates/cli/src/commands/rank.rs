use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use sdq_core::corpus::PaperRecord;
use sdq_core::embed::{embed_text, embed_texts};
use sdq_core::metrics::{round_robin_rank, swiss_rank, text_table, ScoreComparator};
use sdq_core::scoremodel::{context_texts, representation_text, EmbeddedExample, ModelSpec};

use super::evaluate::load_checkpoint;
use super::{out_path, write_json, write_text, StageExt};
use crate::config::{existing_path, RunConfig};
use crate::provider::{build_provider, Provider};

#[derive(Serialize)]
struct RankedItem {
    position: usize,
    id: String,
    score: f64,
    wins: usize,
    tiebreak: f64,
}

#[derive(Serialize)]
struct RankReport {
    format: String,
    rounds: Option<usize>,
    items: usize,
    comparisons: usize,
    ranking: Vec<RankedItem>,
}

/// `*.txt` files hold the representation text; `*.json` files hold a paper
/// record. Items are identified by file stem, in name order.
fn read_items(dir: &Path, spec: &ModelSpec, provider: &Provider) -> Result<Vec<EmbeddedExample>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt" || x == "json"))
        .collect();
    files.sort();
    let mut out = Vec::with_capacity(files.len());
    for f in files {
        let id = f
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let body = std::fs::read_to_string(&f).with_context(|| f.display().to_string())?;
        let (text, context) = if f.extension().is_some_and(|x| x == "json") {
            let r: PaperRecord =
                serde_json::from_str(&body).with_context(|| f.display().to_string())?;
            let text = representation_text(&r, spec.representation_kind).with_context(|| {
                format!("{}: no text for the model's representation", f.display())
            })?;
            (text, context_texts(&r, spec.context_kind))
        } else {
            (body.trim().to_string(), Vec::new())
        };
        let p = provider.as_dyn();
        let v = embed_text(&text, p).with_context(|| f.display().to_string())?;
        let refs: Vec<&str> = context.iter().map(String::as_str).collect();
        let ctx = if refs.is_empty() {
            Vec::new()
        } else {
            embed_texts(&refs, p)?
        };
        out.push(EmbeddedExample::new(id, p.id(), v).with_context(ctx));
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let input =
        existing_path(None, cfg.rank.input.as_deref(), "input folder").stage("read input")?;
    ensure!(
        input.is_dir(),
        "stage read input: {} is not a directory",
        input.display()
    );
    let ckpt = existing_path(None, cfg.rank.checkpoint.as_deref(), "checkpoint")
        .stage("load checkpoint")?;
    let provider = build_provider(&cfg.provider).stage("provider")?;
    let (model, header) = load_checkpoint(ckpt, &provider)?;
    let items = read_items(input, &header.spec, &provider).stage("embed")?;
    provider.finish()?;
    if items.len() < 2 {
        bail!(
            "stage read input: need at least 2 items in {}, found {}",
            input.display(),
            items.len()
        );
    }
    let scores = items
        .iter()
        .map(|e| model.predict(e))
        .collect::<Result<Vec<_>, _>>()
        .stage("score")?;
    let ids: Vec<String> = items.iter().map(|e| e.paper_id.clone()).collect();
    let cmp = ScoreComparator {
        scores: scores.clone(),
    };
    let (format, rounds, ranking) = if cfg.rank.swiss {
        (
            "swiss",
            Some(cfg.rank.rounds),
            swiss_rank(&ids, &cmp, cfg.rank.rounds),
        )
    } else {
        ("round_robin", None, round_robin_rank(&ids, &cmp))
    };
    let ranked: Vec<RankedItem> = ranking
        .standings
        .iter()
        .enumerate()
        .map(|(i, s)| RankedItem {
            position: i + 1,
            id: s.id.clone(),
            score: scores[ids.iter().position(|x| *x == s.id).expect("ranked id")],
            wins: s.wins,
            tiebreak: s.tiebreak,
        })
        .collect();
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .map(|r| {
            vec![
                r.position.to_string(),
                r.id.clone(),
                format!("{:.4}", r.score),
                r.wins.to_string(),
                format!("{:.3}", r.tiebreak),
            ]
        })
        .collect();
    let mut table = text_table(&["#", "id", "score", "wins", "tiebreak"], &rows);
    table.push_str(&format!("comparisons: {}\n", ranking.comparisons));
    write_text(&out_path(cfg, "ranking.txt"), &table)?;
    write_json(
        &out_path(cfg, "ranking.json"),
        &RankReport {
            format: format.into(),
            rounds,
            items: ids.len(),
            comparisons: ranking.comparisons,
            ranking: ranked,
        },
    )?;
    print!("{table}");
    Ok(())
}
