use std::collections::BTreeMap;

use anyhow::Result;
use serde::Serialize;

use sdq_core::metrics::text_table;
use sdq_core::scoremodel::build_examples;
use sdq_core::topics::{
    fit_lda_observed, labels_csv, per_topic_training, preprocess_corpus, LdaConfig, PerTopicConfig,
    PerTopicOutcome,
};
use sdq_core::util::write_bytes_atomic;

use super::{load, out_path, write_json, write_text, StageExt};
use crate::config::RunConfig;
use crate::provider::build_provider;

#[derive(Serialize)]
struct TopicsReport {
    k: usize,
    iterations: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    documents: usize,
    unlabeled: usize,
    vocabulary: usize,
    phrases: usize,
    final_log_likelihood: Option<f64>,
    topic_sizes: Vec<usize>,
    labeled_sizes: Vec<usize>,
}

pub fn run(cfg: &RunConfig) -> Result<()> {
    let corpus = load(cfg)?;
    let t = &cfg.topics;
    let seed = cfg.seeds[0];
    let pairs: Vec<(&str, &str)> = corpus
        .iter()
        .map(|r| (r.title.as_str(), r.r#abstract.as_str()))
        .collect();
    let (docs, phraser) = preprocess_corpus(&pairs, t.phrase_threshold);
    let lda_cfg = LdaConfig {
        k: t.k,
        iterations: t.iterations,
        alpha: t.alpha,
        beta: t.beta,
        seed,
    };
    let t0 = std::time::Instant::now();
    let model = fit_lda_observed(&docs, &lda_cfg, |s| {
        if (s.iteration + 1) % 100 == 0 {
            eprintln!(
                "sweep {}: log p(w, z) = {:.1}",
                s.iteration + 1,
                s.log_likelihood
            );
        }
    })
    .stage("fit topics")?;
    eprintln!("fitted {} topics in {:.1?}", model.k, t0.elapsed());

    let labels: Vec<(String, _)> = corpus
        .iter()
        .zip(&docs)
        .map(|(r, d)| (r.id.clone(), model.dominant_topic(d)))
        .collect();
    let mut labeled_sizes = vec![0; model.k];
    for (_, a) in &labels {
        if let Some(a) = a {
            labeled_sizes[a.topic] += 1;
        }
    }
    let mut bytes = Vec::new();
    model.write_to(&mut bytes).stage("write model")?;
    write_bytes_atomic(&out_path(cfg, "topics/model.sdql"), &bytes).stage("write model")?;
    write_text(&out_path(cfg, "topics/labels.csv"), &labels_csv(&labels))?;
    let mut words = String::new();
    for k in 0..model.k {
        let top = model.top_words(k, t.top_words).stage("top words")?;
        words.push_str(&format!(
            "topic {k} ({} papers): {}\n",
            labeled_sizes[k],
            top.join(" ")
        ));
    }
    write_text(&out_path(cfg, "topics/top_words.txt"), &words)?;
    write_json(
        &out_path(cfg, "topics/report.json"),
        &TopicsReport {
            k: model.k,
            iterations: t.iterations,
            alpha: model.alpha,
            beta: model.beta,
            seed,
            documents: docs.len(),
            unlabeled: labels.iter().filter(|(_, a)| a.is_none()).count(),
            vocabulary: model.vocabulary.len(),
            phrases: phraser.n_phrases(),
            final_log_likelihood: model.log_likelihood.last().copied(),
            topic_sizes: model.topic_sizes(),
            labeled_sizes,
        },
    )?;
    print!("{words}");

    if t.per_topic {
        let provider = build_provider(&cfg.provider).stage("provider")?;
        let spec = cfg
            .model
            .spec(provider.id(), provider.dimension())
            .stage("model spec")?;
        let (examples, _) =
            build_examples(corpus.records(), &spec, provider.as_dyn(), cfg.snapshot)
                .stage("embed")?;
        provider.finish()?;
        let by_id: BTreeMap<String, usize> = labels
            .iter()
            .filter_map(|(id, a)| Some((id.clone(), a.as_ref()?.topic)))
            .collect();
        let train_cfg = sdq_core::scoremodel::TrainConfig {
            seed,
            ..cfg.train_config(spec.kind).stage("train config")?
        };
        let pt = PerTopicConfig {
            top_m: t.top_m,
            min_size: t.min_size,
            split: cfg.split,
            eval_seed: seed,
            max_pairs: cfg.evaluate.max_pairs,
        };
        let outcome: PerTopicOutcome =
            per_topic_training(&examples, &by_id, &spec, &train_cfg, &pt)
                .stage("per-topic training")?;
        let mut rows: Vec<Vec<String>> = outcome
            .reports
            .iter()
            .map(|r| {
                vec![
                    r.topic.to_string(),
                    r.n_samples.to_string(),
                    r.report
                        .pairwise_accuracy
                        .map_or("-".into(), |v| format!("{v:.4}")),
                    r.report.spearman.map_or("-".into(), |v| format!("{v:.4}")),
                ]
            })
            .collect();
        rows.extend(outcome.skipped.iter().map(|s| {
            vec![
                s.topic.to_string(),
                s.n_samples.to_string(),
                "skipped".into(),
                "-".into(),
            ]
        }));
        let table = text_table(&["topic", "papers", "accuracy", "spearman"], &rows);
        write_text(&out_path(cfg, "topics/per_topic.txt"), &table)?;
        write_json(&out_path(cfg, "topics/per_topic.json"), &outcome)?;
        print!("{table}");
    }
    Ok(())
}
