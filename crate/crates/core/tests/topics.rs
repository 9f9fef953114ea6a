use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdq_core::synth::{random_sentence, vocabulary};
use sdq_core::topics::{fit_lda_observed, preprocess_corpus, LdaConfig};

/// 200 title/abstract pairs, alternating between two disjoint vocabularies.
fn planted_texts(seed: u64) -> (Vec<(String, String)>, Vec<usize>) {
    let vocabs = [vocabulary(0, 40), vocabulary(40, 40)];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..200)
        .map(|i| {
            let t = (i + rng.random_range(0..2)) % 2;
            let title = random_sentence(&mut rng, &vocabs[t], 6);
            let abs = random_sentence(&mut rng, &vocabs[t], 30);
            ((title, abs), t)
        })
        .unzip()
}

#[test]
fn two_planted_topics_through_the_full_pipeline() {
    let (texts, truth) = planted_texts(11);
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
    let mut sweeps = 0;
    let model = fit_lda_observed(&docs, &cfg, |s| {
        assert_eq!(s.assigned_tokens, total);
        assert_eq!(s.document_tokens, total);
        sweeps += 1;
    })
    .unwrap();
    assert_eq!(sweeps, 300);

    let pred: Vec<usize> = docs
        .iter()
        .map(|d| model.dominant_topic(d).unwrap().topic)
        .collect();
    let same = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / 200.0;
    let acc = same.max(1.0 - same);
    assert!(acc >= 0.9, "accuracy {acc}");

    // window means of the likelihood trace never fall by more than the
    // spread of the stationary tail
    let means: Vec<f64> = model
        .log_likelihood
        .chunks(50)
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect();
    let tail = &model.log_likelihood[150..];
    let mu = tail.iter().sum::<f64>() / tail.len() as f64;
    let sd = (tail.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
    for w in means.windows(2) {
        assert!(w[1] >= w[0] - sd, "{means:?} (tail sd {sd})");
    }
    assert!(means.last().unwrap() > &means[0]);
}
