use anyhow::Result;
use serde::Serialize;

use sdq_core::embed::{embed_texts, plan_text};
use sdq_core::scoremodel::{context_texts, representation_text};

use super::{enum_name, load, out_path, write_json, StageExt};
use crate::config::RunConfig;
use crate::provider::build_provider;

#[derive(Serialize)]
struct EmbedReport {
    provider: String,
    dimension: usize,
    representation: String,
    context: String,
    records: usize,
    missing_representation: usize,
    representation_texts: usize,
    context_texts: usize,
    distinct_texts: usize,
    chunks: usize,
    chunked_texts: usize,
}

/// Embeds every representation and context text of the corpus once, so
/// later runs are served from the cache.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let provider = build_provider(&cfg.provider).stage("provider")?;
    let corpus = load(cfg)?;
    let (mut reps, mut ctxs, mut missing) = (Vec::new(), Vec::new(), 0);
    for r in corpus.iter() {
        match representation_text(r, cfg.model.representation).filter(|t| !t.trim().is_empty()) {
            Some(t) => reps.push(t),
            None => missing += 1,
        }
        ctxs.extend(
            context_texts(r, cfg.model.context)
                .into_iter()
                .filter(|t| !t.trim().is_empty()),
        );
    }
    let mut all: Vec<&str> = reps.iter().chain(&ctxs).map(String::as_str).collect();
    all.sort_unstable();
    all.dedup();
    let plans: Vec<usize> = all
        .iter()
        .map(|t| plan_text(t, provider.as_dyn()).len())
        .collect();
    embed_texts(&all, provider.as_dyn()).stage("embed")?;
    provider.finish()?;
    let report = EmbedReport {
        provider: provider.id().to_string(),
        dimension: provider.dimension(),
        representation: enum_name(&cfg.model.representation),
        context: enum_name(&cfg.model.context),
        records: corpus.len(),
        missing_representation: missing,
        representation_texts: reps.len(),
        context_texts: ctxs.len(),
        distinct_texts: all.len(),
        chunks: plans.iter().sum(),
        chunked_texts: plans.iter().filter(|&&n| n > 1).count(),
    };
    write_json(&out_path(cfg, "embed_report.json"), &report)?;
    println!(
        "embedded {} distinct texts ({} chunks) with {}",
        report.distinct_texts, report.chunks, report.provider
    );
    Ok(())
}
