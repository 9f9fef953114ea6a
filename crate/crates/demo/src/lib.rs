//! WebAssembly bindings for the static page in `www/`.
//!
//! Everything runs in the page: a stub embedder stands in for the
//! embedding server, so scores only reflect the planted signal.

use std::cell::RefCell;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sdq_core::corpus::{read_corpus, write_corpus, Corpus};
use sdq_core::embed::{embed_text, EmbeddingProvider, StubEmbedder};
use sdq_core::metrics::{
    evaluate_model, heatmap_svg, review_dimension_correlations, round_robin_rank, swiss_rank,
    MetricReport, Ranking, ScoreComparator, DEFAULT_MAX_PAIRS,
};
use sdq_core::scoremodel::{
    train, EmbeddedExample, EpochRecord, ModelDims, ModelKind, ModelSpec, ScoreModel, TrainConfig,
};
use sdq_core::synth::{planted_corpus, planted_examples, PlantedCorpusSpec};

const DIMENSION: usize = 64;

thread_local! {
    static MODEL: RefCell<Option<ScoreModel<f32>>> = const { RefCell::new(None) };
}

fn provider() -> StubEmbedder {
    StubEmbedder::with_dimension(0, DIMENSION)
}

fn spec(provider_id: &str) -> ModelSpec {
    ModelSpec::no_context(provider_id).with_dims(ModelDims {
        input: DIMENSION,
        hidden: 32,
        heads: 2,
        ff_hidden: 64,
    })
}

#[derive(Serialize)]
struct TrainResult {
    history: Vec<EpochRecord>,
    best_epoch: Option<usize>,
    test: MetricReport,
}

/// Trains on a planted corpus of `papers` examples and keeps the model for
/// [`rank_lines`].
pub fn train_planted(
    papers: usize,
    epochs: usize,
    noise: f64,
    seed: u64,
) -> Result<String, String> {
    if papers < 20 {
        return Err("need at least 20 papers".into());
    }
    let p = provider();
    let (examples, _) = planted_examples(&p, papers, noise, seed).map_err(|e| e.to_string())?;
    let (tr, rest) = examples.split_at(papers * 3 / 5);
    let (va, te) = rest.split_at(rest.len() / 2);
    let cfg = TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: 3e-3,
        dropout: 0.0,
        seed,
        ..TrainConfig::for_kind(ModelKind::NoContext)
    };
    let model = ScoreModel::new(spec(p.id()), seed).map_err(|e| e.to_string())?;
    let outcome = train(model, tr, va, &cfg).map_err(|e| e.to_string())?;
    let test = evaluate_model(&outcome.model, te, seed, DEFAULT_MAX_PAIRS, false)
        .map_err(|e| e.to_string())?;
    let result = TrainResult {
        history: outcome.history,
        best_epoch: outcome.best_epoch,
        test,
    };
    MODEL.with(|m| *m.borrow_mut() = Some(outcome.model));
    serde_json::to_string(&result).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct RankResult {
    ranking: Ranking,
    scores: Vec<(String, f64)>,
}

/// Ranks one text per non-empty line with the trained model (an untrained
/// one if none yet). Ids are `#1`, `#2`, ... in input order.
pub fn rank_lines(text: &str, swiss: bool, rounds: usize) -> Result<String, String> {
    let p = provider();
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if lines.len() < 2 {
        return Err("enter at least two lines".into());
    }
    let items = lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            Ok(EmbeddedExample::new(
                format!("#{}", i + 1),
                p.id(),
                embed_text(l, &p)?,
            ))
        })
        .collect::<Result<Vec<_>, sdq_core::embed::EmbedError>>()
        .map_err(|e| e.to_string())?;
    let batch: Vec<&EmbeddedExample> = items.iter().collect();
    let scores = MODEL.with(|m| match m.borrow().as_ref() {
        Some(model) => model.predict_batch(&batch),
        None => ScoreModel::<f32>::new(spec(p.id()), 0)?.predict_batch(&batch),
    });
    let scores = scores.map_err(|e| e.to_string())?;
    let ids: Vec<String> = items.iter().map(|e| e.paper_id.clone()).collect();
    let cmp = ScoreComparator {
        scores: scores.clone(),
    };
    let ranking = if swiss {
        swiss_rank(&ids, &cmp, rounds)
    } else {
        round_robin_rank(&ids, &cmp)
    };
    let result = RankResult {
        ranking,
        scores: ids.into_iter().zip(scores).collect(),
    };
    serde_json::to_string(&result).map_err(|e| e.to_string())
}

/// A planted corpus as JSONL, for pasting into the heatmap box.
pub fn planted_jsonl(papers: usize, reviews: usize, seed: u64) -> Result<String, String> {
    let spec = PlantedCorpusSpec {
        papers,
        reviews_per_paper: reviews,
        seed,
        ..Default::default()
    };
    let (records, _) = planted_corpus(&provider(), &spec).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    write_corpus(&records, &mut out).map_err(|e| e.to_string())?;
    String::from_utf8(out).map_err(|e| e.to_string())
}

/// Spearman correlations between review dimensions as an SVG heatmap.
pub fn dimension_heatmap_svg(jsonl: &str) -> Result<String, String> {
    let corpus: Corpus = read_corpus(jsonl.as_bytes()).map_err(|e| e.to_string())?;
    let m = review_dimension_correlations(corpus.records());
    let labels: Vec<String> = m.dimensions.iter().map(|d| d.to_string()).collect();
    Ok(heatmap_svg(&labels, &m.rho))
}

#[wasm_bindgen(js_name = trainPlanted)]
pub fn train_planted_js(
    papers: usize,
    epochs: usize,
    noise: f64,
    seed: u32,
) -> Result<String, JsError> {
    train_planted(papers, epochs, noise, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = rankLines)]
pub fn rank_lines_js(text: &str, swiss: bool, rounds: usize) -> Result<String, JsError> {
    rank_lines(text, swiss, rounds).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = plantedJsonl)]
pub fn planted_jsonl_js(papers: usize, reviews: usize, seed: u32) -> Result<String, JsError> {
    planted_jsonl(papers, reviews, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = dimensionHeatmap)]
pub fn dimension_heatmap_js(jsonl: &str) -> Result<String, JsError> {
    dimension_heatmap_svg(jsonl).map_err(|e| JsError::new(&e))
}
