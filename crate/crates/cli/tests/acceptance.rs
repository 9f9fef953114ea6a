//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p sdq-cli --test acceptance`

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::Rng;

use sdq_core::corpus::{load_corpus, save_corpus, Corpus, SectionType};
use sdq_core::embed::{embed_texts, EmbeddingProvider, StubEmbedder};
use sdq_core::harmonize::{harmonize_review, VenueTable};
use sdq_core::metrics::{
    check_coherence, evaluate_model, pairwise_accuracy, pearson, round_robin_rank, spearman,
    ScoreComparator, DEFAULT_MAX_PAIRS,
};
use sdq_core::scoremodel::{
    check_objective_gradients, pairwise_loss, regression_loss, train, ContextKind, EmbeddedExample,
    GradientCheckSetup, ModelDims, ModelSpec, Objective, ScoreModel, TrainConfig,
};
use sdq_core::sections::{
    build_section_dataset, embed_section_dataset, train_section_classifier, RawPaper, RawSection,
    SectionModelSpec, SectionTrainConfig, SynonymTable,
};
use sdq_core::synth::{
    planted_examples, random_records, random_sentence, random_texts, section_paragraph, vocabulary,
};
use sdq_core::topics::{fit_lda_observed, preprocess_corpus, LdaConfig};
use sdq_core::util::stream_rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget: Duration, detail: String) -> Outcome {
    check(
        elapsed <= budget,
        format!("{detail}, {elapsed:.1?} of {budget:?}"),
    )
}

fn gradients() -> Outcome {
    const TOL: f64 = 1e-5;
    let start = Instant::now();
    let specs = |dims: ModelDims| {
        [
            ModelSpec::no_context("p").with_dims(dims),
            ModelSpec::context("p", ContextKind::ReferenceTitlesAbstracts).with_dims(dims),
        ]
    };
    let reduced = ModelDims {
        input: 8,
        hidden: 6,
        heads: 2,
        ff_hidden: 12,
    };
    let sampled = GradientCheckSetup {
        examples: 5,
        max_context: 2,
        samples_per_tensor: Some(4),
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (dims, setup) in [
        (reduced, GradientCheckSetup::default()),
        (ModelDims::default(), sampled),
    ] {
        for spec in specs(dims) {
            for objective in [Objective::Pairwise, Objective::Regression] {
                for draw in 0..3 {
                    let r = check_objective_gradients(&spec, objective, 300 + draw, &setup)
                        .map_err(|e| e.to_string())?;
                    worst = worst.max(r.max_rel_error);
                    checked += r.checked;
                }
            }
        }
    }
    if worst >= TOL {
        return Err(format!(
            "max relative error {worst:.2e} over {checked} coordinates"
        ));
    }
    within(
        start.elapsed(),
        Duration::from_secs(60),
        format!("max relative error {worst:.2e} over {checked} coordinates"),
    )
}

fn planted_learning() -> Outcome {
    let start = Instant::now();
    let provider = StubEmbedder::new(17);
    let (examples, _) = planted_examples(&provider, 3000, 0.05, 99).map_err(|e| e.to_string())?;
    let (train_set, rest) = examples.split_at(2000);
    let (val_set, test_set) = rest.split_at(500);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        dropout: 0.0,
        seed: 5,
        ..TrainConfig::default()
    };
    let model = ScoreModel::new(ModelSpec::no_context(provider.id()), cfg.seed)
        .map_err(|e| e.to_string())?;
    let outcome = train(model, train_set, val_set, &cfg).map_err(|e| e.to_string())?;
    let r = evaluate_model(&outcome.model, test_set, 0, DEFAULT_MAX_PAIRS, false)
        .map_err(|e| e.to_string())?;
    let (acc, rho) = (
        r.pairwise_accuracy.unwrap_or(0.0),
        r.spearman.unwrap_or(0.0),
    );
    let detail = format!("test accuracy {acc:.4}, spearman {rho:.4}");
    check(acc >= 0.90 && rho >= 0.85, detail.clone())?;
    within(start.elapsed(), Duration::from_secs(300), detail)
}

fn comparator_coherence() -> Outcome {
    let provider = StubEmbedder::new(3);
    let texts = random_texts(50, 40, 500, 8);
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let vectors = embed_texts(&refs, &provider).map_err(|e| e.to_string())?;
    let ids: Vec<String> = (0..50).map(|i| format!("item-{i:02}")).collect();
    let items: Vec<EmbeddedExample> = ids
        .iter()
        .zip(vectors)
        .map(|(id, v)| EmbeddedExample::new(id.clone(), provider.id(), v))
        .collect();
    let model = ScoreModel::<f32>::new(ModelSpec::no_context(provider.id()), 4)
        .map_err(|e| e.to_string())?;
    let batch: Vec<&EmbeddedExample> = items.iter().collect();
    let scores = model.predict_batch(&batch).map_err(|e| e.to_string())?;
    let cmp = ScoreComparator {
        scores: scores.clone(),
    };
    let coherence = check_coherence(&cmp, 50);
    let ranking = round_robin_rank(&ids, &cmp);
    let mut by_score: Vec<usize> = (0..50).collect();
    by_score.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b])));
    let expected: Vec<&str> = by_score.iter().map(|&i| ids[i].as_str()).collect();
    check(
        coherence.is_coherent() && ranking.ids() == expected && ranking.comparisons == 1225,
        format!(
            "{} antisymmetry violations, {} cycles, round robin matches score order: {}",
            coherence.antisymmetry_violations,
            coherence.cycles,
            ranking.ids() == expected
        ),
    )
}

fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

fn ranks_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let equal = x.iter().filter(|w| *w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn metric_oracles() -> Outcome {
    let mut rng = stream_rng(2024, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(3..100);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| v * 0.7 + rng.random_range(-10.0..10.0))
            .collect();
        let p = pearson(&x, &y).map_err(|e| e.to_string())?;
        let s = spearman(&x, &y).map_err(|e| e.to_string())?;
        worst = worst.max((p - pearson_oracle(&x, &y)).abs());
        worst = worst.max((s - pearson_oracle(&ranks_oracle(&x), &ranks_oracle(&y))).abs());
    }
    let mut constant_ok = true;
    for n in [2usize, 50, 1000] {
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let scores = vec![0.3; n];
        for max_pairs in [DEFAULT_MAX_PAIRS, 500] {
            let a =
                pairwise_accuracy(&scores, &targets, 1, max_pairs).map_err(|e| e.to_string())?;
            constant_ok &= a.accuracy == 0.5;
        }
    }
    check(
        worst <= 1e-12 && constant_ok,
        format!("worst deviation {worst:.1e} over 1000 pairs, constant model at exactly 0.5: {constant_ok}"),
    )
}

fn loss_constants() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    let mut worst: f64 = 0.0;
    for f in [-30.0, -1.5, 0.0, 0.25, 7.0, 1e6] {
        for x in [0.0, 0.5, 1.0] {
            worst = worst.max((pairwise_loss(f, f, x) - ln2).abs());
        }
    }
    let zero = [-3.0, 0.0, 0.4, 1.0, 12.5]
        .iter()
        .all(|&s| regression_loss(s, s) == 0.0);
    check(
        worst <= 1e-12 && zero,
        format!("|pairwise(f, f) - ln 2| <= {worst:.1e}, L1 at the target is 0: {zero}"),
    )
}

fn sections_classifier() -> Outcome {
    let table = SynonymTable::default();
    let mut rng = stream_rng(5, 2);
    let papers: Vec<RawPaper> = (0..60)
        .map(|i| RawPaper {
            id: format!("raw-{i}"),
            sections: SectionType::ALL
                .iter()
                .map(|k| RawSection {
                    heading: format!(
                        "{}. {}",
                        k.index() + 1,
                        table.synonyms()[k].choose(&mut rng).unwrap()
                    ),
                    body: section_paragraph(&mut rng, *k, 3),
                })
                .collect(),
        })
        .collect();
    let provider = StubEmbedder::new(21);
    let ds = build_section_dataset(&papers, &table);
    let data = embed_section_dataset(&ds, &provider).map_err(|e| e.to_string())?;
    let cfg = SectionTrainConfig {
        seed: 3,
        epochs: 5,
        ..Default::default()
    };
    let spec = SectionModelSpec::new(provider.id(), provider.dimension());
    let (_, report) = train_section_classifier(spec, &data, &cfg).map_err(|e| e.to_string())?;
    let acc = report.test_accuracy.unwrap_or(0.0);
    check(
        acc >= 0.95,
        format!(
            "held-out accuracy {acc:.4} on {} paragraphs",
            report.test_size
        ),
    )
}

fn lda_recovery() -> Outcome {
    let vocabs = [vocabulary(0, 40), vocabulary(40, 40)];
    let mut rng = stream_rng(11, 3);
    let (texts, truth): (Vec<(String, String)>, Vec<usize>) = (0..200)
        .map(|i| {
            let t = (i + rng.random_range(0..2)) % 2;
            let title = random_sentence(&mut rng, &vocabs[t], 6);
            let abs = random_sentence(&mut rng, &vocabs[t], 30);
            ((title, abs), t)
        })
        .unzip();
    let pairs: Vec<(&str, &str)> = texts
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    let (docs, _) = preprocess_corpus(&pairs, 20);
    let total: usize = docs.iter().map(Vec::len).sum();
    let cfg = LdaConfig {
        k: 2,
        iterations: 300,
        seed: 1,
        ..Default::default()
    };
    let mut conserved = true;
    let model = fit_lda_observed(&docs, &cfg, |s| {
        conserved &= s.assigned_tokens == total && s.document_tokens == total;
    })
    .map_err(|e| e.to_string())?;
    let pred: Vec<usize> = docs
        .iter()
        .map(|d| {
            model
                .dominant_topic(d)
                .map(|t| t.topic)
                .unwrap_or(usize::MAX)
        })
        .collect();
    let same = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
    let acc = same.max(1.0 - same);
    check(
        acc >= 0.9 && conserved,
        format!("label accuracy {acc:.3}, token counts conserved every sweep: {conserved}"),
    )
}

fn corpus_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("c.jsonl");
    let records = random_records(1000, 2);
    let corpus = Corpus::from_records(records.clone()).map_err(|e| e.to_string())?;
    save_corpus(&corpus, &path).map_err(|e| e.to_string())?;
    let first = std::fs::read(&path).map_err(|e| e.to_string())?;
    let loaded = load_corpus(&path).map_err(|e| e.to_string())?;
    let identical = loaded.records() == &records[..];
    save_corpus(&loaded, &path).map_err(|e| e.to_string())?;
    let stable = std::fs::read(&path).map_err(|e| e.to_string())? == first;

    let venues_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/venues.toml");
    let venues = VenueTable::load(&venues_path).map_err(|e| e.to_string())?;
    let (mut endpoints, mut exact) = (0, true);
    for v in venues.iter() {
        for entry in v.mapping.entries() {
            let Some(dim) = entry.attribute.dimension() else {
                continue;
            };
            let Some(scale) = v.scales.get(&dim) else {
                continue;
            };
            for (raw, want) in [(scale.min_value, 0.0), (scale.max_value, 1.0)] {
                let fields = [(entry.field.clone(), format!("{raw}: label"))].into();
                let h =
                    harmonize_review(&fields, &v.mapping, &v.scales).map_err(|e| e.to_string())?;
                exact &= h.review.get(dim) == Some(want);
                endpoints += 1;
            }
        }
    }
    check(
        identical && stable && exact && endpoints > 0,
        format!(
            "1000 records identical after reload: {identical}, re-save byte-identical: {stable}, \
             {endpoints} scale endpoints map to exactly 0/1: {exact}"
        ),
    )
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let export = dir.join("export");
    std::fs::create_dir_all(&export).map_err(|e| e.to_string())?;
    std::fs::write(
        export.join("a.jsonl"),
        concat!(
            r#"{"id":"x1","venue":"ICLR 2023","title":"One","abstract":"First.","publication_date":"2023-05","decision":"Accept: poster","reviews":[{"recommendation":"8: accept","confidence":"4: sure","summary":"Good.","extra":"?"}]}"#,
            "\n",
            r#"{"id":"x2","venue":"ICLR 2023","title":"Two","abstract":"Second.","publication_date":"2023-05","decision":"Reject","reviews":[{"recommendation":"3: reject"}]}"#,
            "\n"
        ),
    )
    .map_err(|e| e.to_string())?;
    let venues = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/venues.toml");
    let venues = venues.to_str().unwrap();
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth", "--papers", "300"],
        vec![
            "ingest",
            "--export",
            "export",
            "--mapping",
            venues,
            "--output",
            "ingested.jsonl",
        ],
        vec!["embed"],
        vec!["train"],
        vec!["evaluate", "--split", "validation"],
        vec!["rank"],
        vec!["rank", "--swiss", "--rounds", "4"],
        vec!["analyze"],
        vec!["sections"],
        vec!["topics", "--per-topic"],
    ];
    for step in steps {
        let mut args = vec!["--config", "run.toml"];
        args.extend(step.iter().copied());
        let out = common::sdq(dir, &args);
        if !out.status.success() {
            return Err(format!(
                "sdq {}: {}",
                step.join(" "),
                common::stderr(&out).trim()
            ));
        }
    }
    Ok(())
}

fn cli_determinism() -> Outcome {
    let a = common::workspace(12);
    let b = common::workspace(12);
    run_pipeline(a.path())?;
    run_pipeline(b.path())?;
    let files = common::files_under(a.path());
    if files != common::files_under(b.path()) {
        return Err("runs produced different file sets".into());
    }
    let differing: Vec<String> = files
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .map(|f| f.display().to_string())
        .collect();
    check(
        differing.is_empty(),
        if differing.is_empty() {
            format!(
                "{} output files byte-identical across two runs of every subcommand",
                files.len()
            )
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("gradient check", gradients),
        ("planted learning", planted_learning),
        ("comparator coherence", comparator_coherence),
        ("metric oracles", metric_oracles),
        ("loss constants", loss_constants),
        ("section classifier", sections_classifier),
        ("topic recovery", lda_recovery),
        ("corpus round trip", corpus_round_trip),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} {}. {name}: {detail} [{:.1?}]",
            i + 1,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
