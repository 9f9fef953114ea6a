use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::harmonize::SplitSpec;
use crate::metrics::{evaluate_model, MetricReport, MetricsError};
use crate::scoremodel::{
    train, EmbeddedExample, ModelSpec, ScoreModel, ScoreModelError, TrainConfig,
};
use crate::util::{fnv1a64, splitmix64};

pub const DEFAULT_TOPICS: usize = 13;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_BETA: f64 = 0.01;
pub const INFERENCE_SWEEPS: usize = 50;
pub const DEFAULT_MIN_TOPIC_SIZE: usize = 200;

#[derive(Debug, thiserror::Error)]
pub enum TopicsError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("{docs} documents are fewer than the {k} topics")]
    TooFewDocuments { docs: usize, k: usize },
    #[error("need at least 2 topics, got {0}")]
    TooFewTopics(usize),
    #[error("priors must be positive and finite")]
    InvalidPrior,
    #[error("topic {topic} out of range for {k} topics")]
    UnknownTopic { topic: usize, k: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ScoreModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub k: usize,
    pub iterations: usize,
    /// Document-topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOPICS,
            iterations: DEFAULT_ITERATIONS,
            alpha: None,
            beta: DEFAULT_BETA,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub k: usize,
    pub vocabulary: Vec<String>,
    /// `k x V`, each row a distribution over the vocabulary.
    pub topic_word: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    /// Topic of every in-vocabulary token of the training documents.
    pub assignments: Vec<Vec<usize>>,
    /// Joint log-likelihood `log p(w, z)` after each sweep.
    pub log_likelihood: Vec<f64>,
    index: HashMap<String, usize>,
}

/// Counts observed after each Gibbs sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStats {
    pub iteration: usize,
    pub corpus_tokens: usize,
    /// Sum of the per-topic token counts.
    pub assigned_tokens: usize,
    /// Sum of the per-document topic counts.
    pub document_tokens: usize,
    pub log_likelihood: f64,
}

struct Counts {
    k: usize,
    v: usize,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<u32>,
    topic_total: Vec<u32>,
}

impl Counts {
    fn log_likelihood(&self, alpha: f64, beta: f64, doc_lens: &[usize]) -> f64 {
        let (k, v) = (self.k as f64, self.v as f64);
        let mut ll = k * (libm::lgamma(v * beta) - v * libm::lgamma(beta));
        for t in 0..self.k {
            for w in 0..self.v {
                let n = self.topic_word[t * self.v + w];
                if n > 0 {
                    ll += libm::lgamma(n as f64 + beta) - libm::lgamma(beta);
                }
            }
            ll -= libm::lgamma(self.topic_total[t] as f64 + v * beta) - libm::lgamma(v * beta);
        }
        let la = libm::lgamma(alpha);
        for (row, &len) in self.doc_topic.iter().zip(doc_lens) {
            ll += libm::lgamma(k * alpha) - libm::lgamma(len as f64 + k * alpha);
            for &n in row {
                if n > 0 {
                    ll += libm::lgamma(n as f64 + alpha) - la;
                }
            }
        }
        ll
    }
}

pub fn fit_lda(docs: &[Vec<String>], cfg: &LdaConfig) -> Result<LdaModel, TopicsError> {
    fit_lda_observed(docs, cfg, |_| {})
}

/// Collapsed Gibbs sampling with symmetric priors; `observe` runs after
/// every sweep.
pub fn fit_lda_observed<F: FnMut(&SweepStats)>(
    docs: &[Vec<String>],
    cfg: &LdaConfig,
    mut observe: F,
) -> Result<LdaModel, TopicsError> {
    let k = cfg.k;
    let (alpha, beta) = (cfg.alpha(), cfg.beta);
    if k < 2 {
        return Err(TopicsError::TooFewTopics(k));
    }
    if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
        return Err(TopicsError::InvalidPrior);
    }
    if docs.len() < k {
        return Err(TopicsError::TooFewDocuments {
            docs: docs.len(),
            k,
        });
    }
    let vocabulary: Vec<String> = docs
        .iter()
        .flatten()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    if vocabulary.is_empty() {
        return Err(TopicsError::EmptyCorpus);
    }
    let index: HashMap<String, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    let words: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.iter().map(|w| index[w]).collect())
        .collect();
    let doc_lens: Vec<usize> = words.iter().map(Vec::len).collect();
    let corpus_tokens: usize = doc_lens.iter().sum();
    let v = vocabulary.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut c = Counts {
        k,
        v,
        doc_topic: vec![vec![0; k]; docs.len()],
        topic_word: vec![0; k * v],
        topic_total: vec![0; k],
    };
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    for (d, ws) in words.iter().enumerate() {
        let zd: Vec<usize> = ws.iter().map(|_| rng.random_range(0..k)).collect();
        for (&w, &t) in ws.iter().zip(&zd) {
            c.doc_topic[d][t] += 1;
            c.topic_word[t * v + w] += 1;
            c.topic_total[t] += 1;
        }
        z.push(zd);
    }

    let vbeta = v as f64 * beta;
    let mut p = vec![0.0f64; k];
    let mut trace = Vec::with_capacity(cfg.iterations);
    for it in 0..cfg.iterations {
        for (d, ws) in words.iter().enumerate() {
            for (i, &w) in ws.iter().enumerate() {
                let old = z[d][i];
                c.doc_topic[d][old] -= 1;
                c.topic_word[old * v + w] -= 1;
                c.topic_total[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (c.doc_topic[d][t] as f64 + alpha)
                        * (c.topic_word[t * v + w] as f64 + beta)
                        / (c.topic_total[t] as f64 + vbeta);
                    p[t] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = p.iter().position(|&x| u < x).unwrap_or(k - 1);
                z[d][i] = new;
                c.doc_topic[d][new] += 1;
                c.topic_word[new * v + w] += 1;
                c.topic_total[new] += 1;
            }
        }
        let ll = c.log_likelihood(alpha, beta, &doc_lens);
        trace.push(ll);
        observe(&SweepStats {
            iteration: it + 1,
            corpus_tokens,
            assigned_tokens: c.topic_total.iter().map(|&n| n as usize).sum(),
            document_tokens: c.doc_topic.iter().flatten().map(|&n| n as usize).sum(),
            log_likelihood: ll,
        });
    }

    let topic_word = (0..k)
        .map(|t| {
            let row: Vec<f64> = (0..v)
                .map(|w| c.topic_word[t * v + w] as f64 + beta)
                .collect();
            normalize(row)
        })
        .collect();
    Ok(LdaModel {
        k,
        vocabulary,
        topic_word,
        alpha,
        beta,
        seed: cfg.seed,
        assignments: z,
        log_likelihood: trace,
        index,
    })
}

fn normalize(mut row: Vec<f64>) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= s);
    row
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub topic: usize,
    pub probability: f64,
}

impl LdaModel {
    pub fn vocabulary_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Posterior topic mixture of `doc` with `φ` held fixed, averaged over
    /// [`INFERENCE_SWEEPS`] Gibbs sweeps of the document's own tokens.
    /// `None` when no token is in the vocabulary.
    pub fn infer(&self, doc: &[String]) -> Option<Vec<f64>> {
        let ws: Vec<usize> = doc
            .iter()
            .filter_map(|w| self.vocabulary_index(w))
            .collect();
        if ws.is_empty() {
            return None;
        }
        let k = self.k;
        let seed = splitmix64(self.seed ^ fnv1a64(doc.join(" ").as_bytes()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z: Vec<usize> = ws.iter().map(|_| rng.random_range(0..k)).collect();
        let mut n = vec![0u32; k];
        z.iter().for_each(|&t| n[t] += 1);
        let mut theta = vec![0.0; k];
        let mut p = vec![0.0; k];
        let denom = ws.len() as f64 + k as f64 * self.alpha;
        for _ in 0..INFERENCE_SWEEPS {
            for (i, &w) in ws.iter().enumerate() {
                n[z[i]] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    total += (n[t] as f64 + self.alpha) * self.topic_word[t][w];
                    p[t] = total;
                }
                let u = rng.random::<f64>() * total;
                z[i] = p.iter().position(|&x| u < x).unwrap_or(k - 1);
                n[z[i]] += 1;
            }
            for t in 0..k {
                theta[t] += (n[t] as f64 + self.alpha) / denom;
            }
        }
        Some(normalize(theta))
    }

    /// Highest-posterior topic of `doc`; ties go to the lowest id.
    pub fn dominant_topic(&self, doc: &[String]) -> Option<TopicAssignment> {
        let theta = self.infer(doc)?;
        let topic = argmax_lowest(&theta);
        Some(TopicAssignment {
            topic,
            probability: theta[topic],
        })
    }

    /// The `n` most probable words of `topic` (ties by vocabulary order).
    pub fn top_words(&self, topic: usize, n: usize) -> Result<Vec<String>, TopicsError> {
        let row = self
            .topic_word
            .get(topic)
            .ok_or(TopicsError::UnknownTopic { topic, k: self.k })?;
        let mut order: Vec<usize> = (0..row.len()).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        Ok(order
            .into_iter()
            .take(n)
            .map(|i| self.vocabulary[i].clone())
            .collect())
    }

    /// Training documents per topic, by the majority of their token
    /// assignments.
    pub fn topic_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for zd in &self.assignments {
            if zd.is_empty() {
                continue;
            }
            let mut n = vec![0.0; self.k];
            zd.iter().for_each(|&t| n[t] += 1.0);
            sizes[argmax_lowest(&n)] += 1;
        }
        sizes
    }
}

const MAGIC: &[u8; 4] = b"SDQL";
const VERSION: u16 = 1;

impl LdaModel {
    /// Vocabulary, `φ`, priors and seed. Training assignments and the
    /// likelihood trace are not stored.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), TopicsError> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.k as u32).to_le_bytes())?;
        w.write_all(&(self.vocabulary.len() as u32).to_le_bytes())?;
        w.write_all(&self.alpha.to_le_bytes())?;
        w.write_all(&self.beta.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for word in &self.vocabulary {
            w.write_all(&(word.len() as u32).to_le_bytes())?;
            w.write_all(word.as_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.k * self.vocabulary.len() * 8);
        for row in &self.topic_word {
            row.iter()
                .for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, TopicsError> {
        let bad = |m: &str| TopicsError::Format(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a topic model file"));
        }
        if u16::from_le_bytes(read_n(r)?) != VERSION {
            return Err(bad("unsupported version"));
        }
        let k = u32::from_le_bytes(read_n(r)?) as usize;
        let v = u32::from_le_bytes(read_n(r)?) as usize;
        let alpha = f64::from_le_bytes(read_n(r)?);
        let beta = f64::from_le_bytes(read_n(r)?);
        let seed = u64::from_le_bytes(read_n(r)?);
        if k < 2 {
            return Err(TopicsError::TooFewTopics(k));
        }
        let mut vocabulary = Vec::with_capacity(v);
        for _ in 0..v {
            let len = u32::from_le_bytes(read_n(r)?) as usize;
            let mut b = vec![0u8; len];
            r.read_exact(&mut b)?;
            vocabulary.push(String::from_utf8(b).map_err(|_| bad("word is not UTF-8"))?);
        }
        let index: HashMap<String, usize> = vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        if index.len() != v {
            return Err(bad("duplicate vocabulary entry"));
        }
        let mut topic_word = Vec::with_capacity(k);
        for _ in 0..k {
            let mut row = Vec::with_capacity(v);
            for _ in 0..v {
                row.push(f64::from_le_bytes(read_n(r)?));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(bad("topic row does not sum to 1"));
            }
            topic_word.push(row);
        }
        Ok(Self {
            k,
            vocabulary,
            topic_word,
            alpha,
            beta,
            seed,
            assignments: Vec::new(),
            log_likelihood: Vec::new(),
            index,
        })
    }
}

fn read_n<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], TopicsError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// `paper_id,topic_id,probability` rows; papers without a label get empty
/// topic and probability fields.
pub fn labels_csv(labels: &[(String, Option<TopicAssignment>)]) -> String {
    let mut out = String::from("paper_id,topic_id,probability\n");
    for (id, a) in labels {
        match a {
            Some(a) => out.push_str(&format!("{id},{},{:.6}\n", a.topic, a.probability)),
            None => out.push_str(&format!("{id},,\n")),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub topic: usize,
    pub n_samples: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTopic {
    pub topic: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PerTopicOutcome {
    pub reports: Vec<TopicReport>,
    pub skipped: Vec<SkippedTopic>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerTopicConfig {
    pub top_m: usize,
    pub min_size: usize,
    pub split: SplitSpec,
    pub eval_seed: u64,
    pub max_pairs: usize,
}

impl Default for PerTopicConfig {
    fn default() -> Self {
        Self {
            top_m: 5,
            min_size: DEFAULT_MIN_TOPIC_SIZE,
            split: SplitSpec::default(),
            eval_seed: 0,
            max_pairs: crate::metrics::DEFAULT_MAX_PAIRS,
        }
    }
}

/// Trains and evaluates one score model per frequent topic. The `top_m`
/// largest topics (ties by id) are considered; those below `min_size`
/// examples are skipped. Each topic subset is split temporally.
pub fn per_topic_training(
    examples: &[EmbeddedExample],
    labels: &BTreeMap<String, usize>,
    spec: &ModelSpec,
    train_cfg: &TrainConfig,
    cfg: &PerTopicConfig,
) -> Result<PerTopicOutcome, TopicsError> {
    let mut by_topic: BTreeMap<usize, Vec<&EmbeddedExample>> = BTreeMap::new();
    for e in examples {
        if let Some(&t) = labels.get(&e.paper_id) {
            by_topic.entry(t).or_default().push(e);
        }
    }
    let mut ranked: Vec<(usize, usize)> = by_topic.iter().map(|(t, v)| (*t, v.len())).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = PerTopicOutcome::default();
    for &(topic, n) in ranked.iter().take(cfg.top_m) {
        if n < cfg.min_size {
            out.skipped.push(SkippedTopic {
                topic,
                n_samples: n,
            });
            continue;
        }
        let mut subset: Vec<EmbeddedExample> =
            by_topic[&topic].iter().map(|e| (*e).clone()).collect();
        subset.sort_by(|a, b| {
            a.publication_date
                .cmp(&b.publication_date)
                .then_with(|| a.paper_id.cmp(&b.paper_id))
        });
        let [a, b, _] = cfg.split.sizes(subset.len());
        let (tr, rest) = subset.split_at(a);
        let (va, te) = rest.split_at(b);
        let model = ScoreModel::new(spec.clone(), train_cfg.seed)?;
        let outcome = train(model, tr, va, train_cfg)?;
        let report = evaluate_model(&outcome.model, te, cfg.eval_seed, cfg.max_pairs, false)?;
        out.reports.push(TopicReport {
            topic,
            n_samples: n,
            train: tr.len(),
            validation: va.len(),
            test: te.len(),
            report,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn planted(n: usize, seed: u64) -> (Vec<Vec<String>>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = [
            crate::synth::vocabulary(0, 30),
            crate::synth::vocabulary(30, 30),
        ];
        (0..n)
            .map(|i| {
                let t = i % 2;
                let d = (0..20)
                    .map(|_| vocab[t][rng.random_range(0..30)].clone())
                    .collect();
                (d, t)
            })
            .unzip()
    }

    fn accuracy_up_to_permutation(pred: &[usize], truth: &[usize]) -> f64 {
        let same =
            pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / pred.len() as f64;
        same.max(1.0 - same)
    }

    #[test]
    fn single_token_corpus_puts_all_mass_on_it() {
        let docs = vec![words("x"); 4];
        let m = fit_lda(
            &docs,
            &LdaConfig {
                k: 2,
                iterations: 20,
                ..Default::default()
            },
        )
        .unwrap();
        for row in &m.topic_word {
            assert_eq!(row, &[1.0]);
        }
    }

    #[test]
    fn planted_topics_are_recovered() {
        let (docs, truth) = planted(200, 1);
        let cfg = LdaConfig {
            k: 2,
            iterations: 200,
            seed: 3,
            ..Default::default()
        };
        let m = fit_lda(&docs, &cfg).unwrap();
        let pred: Vec<usize> = docs
            .iter()
            .map(|d| m.dominant_topic(d).unwrap().topic)
            .collect();
        assert!(accuracy_up_to_permutation(&pred, &truth) >= 0.9);
    }

    #[test]
    fn sweeps_conserve_tokens_and_rows_are_distributions() {
        let (docs, _) = planted(60, 2);
        let total: usize = docs.iter().map(Vec::len).sum();
        let mut seen = 0;
        let m = fit_lda_observed(
            &docs,
            &LdaConfig {
                k: 4,
                iterations: 30,
                ..Default::default()
            },
            |s| {
                assert_eq!(s.corpus_tokens, total);
                assert_eq!(s.assigned_tokens, total);
                assert_eq!(s.document_tokens, total);
                seen += 1;
            },
        )
        .unwrap();
        assert_eq!(seen, 30);
        assert_eq!(m.log_likelihood.len(), 30);
        for row in &m.topic_word {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let theta = m.infer(&docs[0]).unwrap();
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fitting_is_seed_deterministic() {
        let (docs, _) = planted(40, 4);
        let cfg = LdaConfig {
            k: 3,
            iterations: 15,
            seed: 9,
            ..Default::default()
        };
        let a = fit_lda(&docs, &cfg).unwrap();
        let b = fit_lda(&docs, &cfg).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.topic_word, b.topic_word);
        let c = fit_lda(&docs, &LdaConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.assignments, c.assignments);
    }

    fn hand_model(topic_word: Vec<Vec<f64>>, vocab: &[&str]) -> LdaModel {
        let vocabulary: Vec<String> = vocab.iter().map(|s| s.to_string()).collect();
        LdaModel {
            k: topic_word.len(),
            index: vocabulary
                .iter()
                .enumerate()
                .map(|(i, w)| (w.clone(), i))
                .collect(),
            vocabulary,
            topic_word,
            alpha: 50.0 / 5.0,
            beta: 0.01,
            seed: 0,
            assignments: Vec::new(),
            log_likelihood: Vec::new(),
        }
    }

    #[test]
    fn token_owned_by_one_topic_selects_it() {
        let eps = 1e-6;
        let mut rows = vec![vec![1.0 - eps, eps]; 5];
        rows[3] = vec![eps, 1.0 - eps];
        let m = hand_model(rows, &["common", "rare"]);
        let a = m.dominant_topic(&words("rare")).unwrap();
        assert_eq!(a.topic, 3);
        assert_eq!(m.dominant_topic(&words("unknown words")), None);
        assert_eq!(m.dominant_topic(&[]), None);
    }

    #[test]
    fn ties_go_to_the_lowest_topic() {
        let m = hand_model(vec![vec![0.5, 0.5]; 3], &["a", "b"]);
        assert_eq!(argmax_lowest(&[0.2, 0.4, 0.4]), 1);
        assert!(m.dominant_topic(&words("a")).is_some());
    }

    #[test]
    fn top_words_length_and_order() {
        let m = hand_model(
            vec![vec![0.1, 0.6, 0.3], vec![0.2, 0.2, 0.6]],
            &["a", "b", "c"],
        );
        assert_eq!(m.top_words(0, 2).unwrap(), ["b", "c"]);
        assert_eq!(m.top_words(1, 10).unwrap(), ["c", "a", "b"]);
        assert_eq!(m.top_words(0, 0).unwrap().len(), 0);
        assert!(m.top_words(2, 1).is_err());
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let docs = vec![words("a b"); 3];
        assert!(matches!(
            fit_lda(&[], &LdaConfig::default()),
            Err(TopicsError::TooFewDocuments { .. })
        ));
        assert!(matches!(
            fit_lda(
                &docs,
                &LdaConfig {
                    k: 1,
                    ..Default::default()
                }
            ),
            Err(TopicsError::TooFewTopics(1))
        ));
        assert!(matches!(
            fit_lda(
                &vec![vec![]; 3],
                &LdaConfig {
                    k: 2,
                    ..Default::default()
                }
            ),
            Err(TopicsError::EmptyCorpus)
        ));
        assert!(matches!(
            fit_lda(
                &docs,
                &LdaConfig {
                    k: 2,
                    beta: 0.0,
                    ..Default::default()
                }
            ),
            Err(TopicsError::InvalidPrior)
        ));
    }

    #[test]
    fn model_round_trips() {
        let (docs, _) = planted(20, 5);
        let m = fit_lda(
            &docs,
            &LdaConfig {
                k: 2,
                iterations: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = LdaModel::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back.topic_word, m.topic_word);
        assert_eq!(back.vocabulary, m.vocabulary);
        assert_eq!(back.dominant_topic(&docs[0]), m.dominant_topic(&docs[0]));
        buf[0] = b'X';
        assert!(LdaModel::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn labels_csv_has_blank_fields_for_missing_labels() {
        let csv = labels_csv(&[
            (
                "p1".into(),
                Some(TopicAssignment {
                    topic: 2,
                    probability: 0.75,
                }),
            ),
            ("p2".into(), None),
        ]);
        assert_eq!(csv, "paper_id,topic_id,probability\np1,2,0.750000\np2,,\n");
    }

    #[test]
    fn small_and_empty_topics_are_skipped() {
        let ex: Vec<EmbeddedExample> = (0..6)
            .map(|i| {
                EmbeddedExample::new(format!("p{i}"), "stub", vec![0.0; 4]).with_target(i as f64)
            })
            .collect();
        let labels: BTreeMap<String, usize> = (0..6).map(|i| (format!("p{i}"), i % 2)).collect();
        let spec = ModelSpec::no_context("stub");
        let out = per_topic_training(
            &ex,
            &labels,
            &spec,
            &TrainConfig::default(),
            &PerTopicConfig::default(),
        )
        .unwrap();
        assert!(out.reports.is_empty());
        assert_eq!(
            out.skipped,
            [
                SkippedTopic {
                    topic: 0,
                    n_samples: 3
                },
                SkippedTopic {
                    topic: 1,
                    n_samples: 3
                }
            ]
        );
        let none = per_topic_training(
            &ex,
            &BTreeMap::new(),
            &spec,
            &TrainConfig::default(),
            &PerTopicConfig::default(),
        )
        .unwrap();
        assert_eq!(none, PerTopicOutcome::default());
    }
}
