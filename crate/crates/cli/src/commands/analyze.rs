use anyhow::Result;
use serde::Serialize;

use sdq_core::corpus::ReviewDimension;
use sdq_core::metrics::{
    citation_review_correlation, human_consistency, review_dimension_correlations, text_table,
    CorpusFilter, HumanConsistency,
};
use sdq_core::util::format_mean_sigma;

use super::{load, out_path, write_json, write_text};
use crate::config::RunConfig;

#[derive(Serialize)]
struct CitationRow {
    filter: CorpusFilter,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    /// Why the correlation is undefined for this subset.
    #[serde(skip_serializing_if = "Option::is_none")]
    unavailable: Option<String>,
}

#[derive(Serialize)]
struct ConsistencyReport {
    dimension: ReviewDimension,
    per_seed: Vec<HumanConsistency>,
    /// `mean (σ)` of the per-seed correlations.
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unavailable: Option<String>,
}

/// Analyses that are undefined on the corpus (too few scored papers, a
/// constant column) are reported as unavailable rather than failing.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let corpus = load(cfg)?;
    let records = corpus.records();
    let a = &cfg.analyze;

    let dims = review_dimension_correlations(records);
    write_text(&out_path(cfg, "analyze/dimensions.csv"), &dims.to_csv())?;
    write_text(&out_path(cfg, "analyze/dimensions.txt"), &dims.to_table())?;
    write_text(&out_path(cfg, "analyze/dimensions.svg"), &dims.to_svg())?;

    let base = CorpusFilter {
        venue: None,
        year: a.year,
        before_year: a.before_year,
        field_of_study: a.field_of_study.clone(),
    };
    let filters: Vec<CorpusFilter> = if a.venues.is_empty() {
        vec![base]
    } else {
        a.venues
            .iter()
            .map(|v| CorpusFilter {
                venue: Some(v.clone()),
                ..base.clone()
            })
            .collect()
    };
    let citation: Vec<CitationRow> = filters
        .into_iter()
        .map(
            |filter| match citation_review_correlation(records, &filter, cfg.snapshot) {
                Ok(c) => CitationRow {
                    filter,
                    n: Some(c.n),
                    rho: Some(c.rho),
                    unavailable: None,
                },
                Err(e) => CitationRow {
                    filter,
                    n: None,
                    rho: None,
                    unavailable: Some(e.to_string()),
                },
            },
        )
        .collect();
    write_json(&out_path(cfg, "analyze/citation_review.json"), &citation)?;

    let runs: Result<Vec<HumanConsistency>, _> = cfg
        .seeds
        .iter()
        .map(|&s| human_consistency(records, a.dimension, s))
        .collect();
    let consistency = match runs {
        Ok(per_seed) => {
            let rhos: Vec<f64> = per_seed.iter().map(|h| h.rho).collect();
            ConsistencyReport {
                dimension: a.dimension,
                rho: Some(format_mean_sigma(&rhos)),
                per_seed,
                unavailable: None,
            }
        }
        Err(e) => ConsistencyReport {
            dimension: a.dimension,
            per_seed: Vec::new(),
            rho: None,
            unavailable: Some(e.to_string()),
        },
    };
    write_json(
        &out_path(cfg, "analyze/human_consistency.json"),
        &consistency,
    )?;

    let rows: Vec<Vec<String>> = citation
        .iter()
        .map(|c| {
            vec![
                c.filter.venue.clone().unwrap_or_else(|| "all".into()),
                c.n.map_or("-".into(), |n| n.to_string()),
                c.rho.map_or_else(|| "-".into(), |r| format!("{r:.3}")),
            ]
        })
        .collect();
    let mut summary = String::from("review dimension correlations\n");
    summary.push_str(&dims.to_table());
    summary.push_str("\ncitation target vs mean review score\n");
    summary.push_str(&text_table(&["venue", "n", "rho"], &rows));
    summary.push_str(&format!(
        "\nhuman consistency ({}): {}\n",
        a.dimension.as_str(),
        consistency
            .rho
            .as_deref()
            .or(consistency.unavailable.as_deref())
            .unwrap_or("-")
    ));
    write_text(&out_path(cfg, "analyze/summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}
