use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SectionDataset, SectionsError};
use crate::corpus::SectionType;
use crate::embed::{embed_texts, segment_sentences, EmbeddingProvider};
use crate::harmonize::SplitSpec;
use crate::nn::layers::softmax_in_place;
use crate::nn::{
    AdamConfig, EncoderCache, EncoderConfig, EncoderLayer, Grads, Linear, ParamSet, Real,
};
use crate::util::{map_shards, splitmix64, stream_rng};

pub const SECTION_CLASSES: usize = 5;

/// Architecture of a section classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionModelSpec {
    pub provider_id: String,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_hidden: usize,
}

impl SectionModelSpec {
    pub fn new(provider_id: impl Into<String>, dim: usize) -> Self {
        Self {
            provider_id: provider_id.into(),
            dim,
            layers: 2,
            heads: 8,
            ff_hidden: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SectionTrainConfig {
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shard_size: usize,
    pub split: SplitSpec,
}

impl Default for SectionTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            dropout: 0.3,
            batch_size: 128,
            epochs: 20,
            seed: 0,
            shard_size: 16,
            split: SplitSpec::default(),
        }
    }
}

/// Sentence-sequence classifier: encoder layers, mean pooling over
/// sentences, linear map to five logits.
#[derive(Debug, Clone)]
pub struct SectionClassifier<T = f32> {
    pub spec: SectionModelSpec,
    pub params: ParamSet<T>,
    layers: Vec<EncoderLayer>,
    head: Linear,
}

pub(crate) struct SectionCache<T> {
    len: usize,
    layers: Vec<EncoderCache<T>>,
    pooled: Vec<T>,
}

/// A section example after embedding each sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSection {
    pub label: SectionType,
    pub sentences: Vec<Vec<f32>>,
}

impl<T: Real> SectionClassifier<T> {
    pub fn new(spec: SectionModelSpec, seed: u64) -> Result<Self, SectionsError> {
        if spec.layers == 0 || spec.dim == 0 {
            return Err(SectionsError::InvalidConfig(
                "need at least one layer and a positive dimension".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new(splitmix64(seed ^ 0x5345_4354));
        let cfg = EncoderConfig::new(spec.dim, spec.heads, spec.ff_hidden);
        let layers = (0..spec.layers)
            .map(|l| EncoderLayer::new(&mut params, &format!("encoder{l}"), cfg, &mut rng))
            .collect::<Result<Vec<_>, _>>()?;
        let head = Linear::new(&mut params, "head", spec.dim, SECTION_CLASSES, &mut rng);
        Ok(Self {
            spec,
            params,
            layers,
            head,
        })
    }

    pub fn cast<U: Real>(&self) -> SectionClassifier<U> {
        SectionClassifier {
            spec: self.spec.clone(),
            params: self.params.cast(),
            layers: self.layers.clone(),
            head: self.head.clone(),
        }
    }

    pub(crate) fn forward(
        &self,
        sentences: &[Vec<f32>],
        dropout: f64,
        rng: &mut ChaCha8Rng,
        training: bool,
    ) -> Result<(Vec<T>, SectionCache<T>), SectionsError> {
        let d = self.spec.dim;
        let len = sentences.len();
        if len == 0 {
            return Err(SectionsError::EmptyInput);
        }
        let mut x = Vec::with_capacity(len * d);
        for s in sentences {
            if s.len() != d {
                return Err(SectionsError::Dimension {
                    expected: d,
                    got: s.len(),
                });
            }
            x.extend(s.iter().map(|v| T::of(*v as f64)));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(&self.params, &x, len, dropout, rng, training)?;
            caches.push(c);
            x = y;
        }
        let inv = T::of(1.0 / len as f64);
        let mut pooled = vec![T::zero(); d];
        for r in 0..len {
            for (p, v) in pooled.iter_mut().zip(&x[r * d..(r + 1) * d]) {
                *p += *v * inv;
            }
        }
        let logits = self.head.forward(&self.params, &pooled, 1)?;
        Ok((
            logits,
            SectionCache {
                len,
                layers: caches,
                pooled,
            },
        ))
    }

    pub(crate) fn backward(
        &self,
        cache: &SectionCache<T>,
        dlogits: &[T],
        grads: &mut Grads<T>,
    ) -> Result<(), SectionsError> {
        let d = self.spec.dim;
        let dpooled = self
            .head
            .backward(&self.params, &cache.pooled, 1, dlogits, grads, true)
            .expect("input gradient requested");
        let inv = T::of(1.0 / cache.len as f64);
        let row: Vec<T> = dpooled.iter().map(|g| *g * inv).collect();
        let mut dx: Vec<T> = (0..cache.len).flat_map(|_| row.iter().copied()).collect();
        debug_assert_eq!(dx.len(), cache.len * d);
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            dx = layer.backward(&self.params, c, &dx, grads)?;
        }
        Ok(())
    }

    /// Softmax cross-entropy of one example and its logit gradient.
    pub(crate) fn example_loss(
        &self,
        ex: &EmbeddedSection,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        training: bool,
    ) -> Result<(f64, Vec<T>, SectionCache<T>), SectionsError> {
        let (logits, cache) = self.forward(&ex.sentences, dropout, rng, training)?;
        let mut p = logits.clone();
        softmax_in_place(&mut p);
        let y = ex.label.index();
        let loss = -log_softmax(&logits, y);
        p[y] -= T::one();
        Ok((loss, p, cache))
    }

    /// Mean cross-entropy over `set`; dropout is active when `dropout > 0`.
    pub fn loss(
        &self,
        set: &[EmbeddedSection],
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, SectionsError> {
        let mut total = 0.0;
        for ex in set {
            total += self.example_loss(ex, dropout, rng, dropout > 0.0)?.0;
        }
        Ok(total / set.len().max(1) as f64)
    }

    pub fn loss_and_gradient(
        &self,
        set: &[EmbeddedSection],
        dropout: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, Grads<T>), SectionsError> {
        let mut grads = self.params.zero_grads_like();
        let scale = T::of(1.0 / set.len().max(1) as f64);
        let mut total = 0.0;
        for ex in set {
            let (l, mut d, cache) = self.example_loss(ex, dropout, rng, dropout > 0.0)?;
            d.iter_mut().for_each(|v| *v *= scale);
            self.backward(&cache, &d, &mut grads)?;
            total += l;
        }
        Ok((total / set.len().max(1) as f64, grads))
    }

    /// Class probabilities in inference mode.
    pub fn probabilities(
        &self,
        sentences: &[Vec<f32>],
    ) -> Result<[f64; SECTION_CLASSES], SectionsError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (logits, _) = self.forward(sentences, 0.0, &mut rng, false)?;
        let mut p: Vec<f64> = logits.iter().map(|v| v.as_f64()).collect();
        softmax_in_place(&mut p);
        let mut out = [0.0; SECTION_CLASSES];
        out.copy_from_slice(&p);
        Ok(out)
    }
}

fn log_softmax<T: Real>(logits: &[T], y: usize) -> f64 {
    let m = logits
        .iter()
        .fold(f64::NEG_INFINITY, |a, v| a.max(v.as_f64()));
    let lse = m + logits
        .iter()
        .map(|v| (v.as_f64() - m).exp())
        .sum::<f64>()
        .ln();
    logits[y].as_f64() - lse
}

/// Highest-probability class; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

/// Embeds every sentence of every example, batching across examples.
pub fn embed_section_dataset<P: EmbeddingProvider + ?Sized>(
    dataset: &SectionDataset,
    provider: &P,
) -> Result<Vec<EmbeddedSection>, SectionsError> {
    let texts: Vec<&str> = dataset
        .examples
        .iter()
        .flat_map(|e| e.sentences.iter().map(String::as_str))
        .collect();
    let mut vectors = embed_texts(&texts, provider)?.into_iter();
    Ok(dataset
        .examples
        .iter()
        .map(|e| EmbeddedSection {
            label: e.label,
            sentences: vectors.by_ref().take(e.sentences.len()).collect(),
        })
        .collect())
}

/// Indices of a random split stratified by label: each label's examples
/// are shuffled and cut with the split fractions.
pub fn stratified_split(labels: &[SectionType], split: &SplitSpec, seed: u64) -> [Vec<usize>; 3] {
    let mut out: [Vec<usize>; 3] = Default::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for kind in SectionType::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == kind).collect();
        idx.shuffle(&mut rng);
        let [a, b, _] = split.sizes(idx.len());
        out[0].extend_from_slice(&idx[..a]);
        out[1].extend_from_slice(&idx[a..a + b]);
        out[2].extend_from_slice(&idx[a + b..]);
    }
    for part in &mut out {
        part.sort_unstable();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionTrainReport {
    pub label_counts: [usize; SECTION_CLASSES],
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub history: Vec<SectionEpoch>,
    pub best_epoch: Option<usize>,
    pub test_accuracy: Option<f64>,
}

pub fn accuracy(
    model: &SectionClassifier<f32>,
    set: &[EmbeddedSection],
) -> Result<Option<f64>, SectionsError> {
    if set.is_empty() {
        return Ok(None);
    }
    let mut hits = 0;
    for ex in set {
        if argmax(&model.probabilities(&ex.sentences)?) == ex.label.index() {
            hits += 1;
        }
    }
    Ok(Some(hits as f64 / set.len() as f64))
}

/// Splits, trains with Adam on softmax cross-entropy, keeps the epoch with
/// the lowest validation loss and reports test accuracy.
pub fn train_section_classifier(
    spec: SectionModelSpec,
    data: &[EmbeddedSection],
    cfg: &SectionTrainConfig,
) -> Result<(SectionClassifier<f32>, SectionTrainReport), SectionsError> {
    cfg.split
        .validate()
        .map_err(|e| SectionsError::InvalidConfig(e.to_string()))?;
    if cfg.batch_size == 0 || cfg.shard_size == 0 || !(0.0..1.0).contains(&cfg.dropout) {
        return Err(SectionsError::InvalidConfig(
            "batch and shard sizes must be positive, dropout in [0, 1)".into(),
        ));
    }
    let mut counts = [0usize; SECTION_CLASSES];
    for e in data {
        counts[e.label.index()] += 1;
    }
    if counts.iter().filter(|c| **c > 0).count() < 2 {
        return Err(SectionsError::SingleClass);
    }
    let labels: Vec<SectionType> = data.iter().map(|e| e.label).collect();
    let [tr, va, te] = stratified_split(&labels, &cfg.split, cfg.seed);
    let pick =
        |idx: &[usize]| -> Vec<EmbeddedSection> { idx.iter().map(|&i| data[i].clone()).collect() };
    let (train_set, val_set, test_set) = (pick(&tr), pick(&va), pick(&te));
    let mut model = SectionClassifier::<f32>::new(spec, cfg.seed)?;
    let mut best = model.params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(splitmix64(
            cfg.seed ^ epoch as u64,
        )));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let shards: Vec<&[usize]> = batch.chunks(cfg.shard_size).collect();
            let (rseed, first) = model.params.reserve_rng_streams(shards.len() as u64);
            let current = &model;
            let scale = 1.0 / batch.len() as f64;
            let results = map_shards(shards.len(), |k| {
                let mut rng = stream_rng(rseed, first + k as u64);
                let mut grads = current.params.zero_grads_like();
                let mut loss = 0.0;
                for &i in shards[k] {
                    let (l, mut d, cache) =
                        current.example_loss(&train_set[i], cfg.dropout, &mut rng, true)?;
                    d.iter_mut().for_each(|v| *v *= scale as f32);
                    current.backward(&cache, &d, &mut grads)?;
                    loss += l;
                }
                Ok::<_, SectionsError>((loss, grads))
            });
            let mut grads = model.params.zero_grads_like();
            for r in results {
                let (l, g) = r?;
                total += l;
                grads.add(&g);
            }
            grads.ensure_finite("section gradient")?;
            model.params.accumulate(&grads);
            model
                .params
                .adam_step(cfg.learning_rate, AdamConfig::default())?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let val_loss = if val_set.is_empty() {
            f64::NAN
        } else {
            model.loss(&val_set, 0.0, &mut rng)?
        };
        let val_accuracy = accuracy(&model, &val_set)?.unwrap_or(f64::NAN);
        history.push(SectionEpoch {
            epoch,
            train_loss: total / train_set.len().max(1) as f64,
            val_loss,
            val_accuracy,
        });
        // without a validation set the last epoch is kept
        if val_set.is_empty() || val_loss < best_val {
            best_val = val_loss;
            best = model.params.clone();
            best_epoch = Some(epoch);
        }
    }
    model.params = best;
    let test_accuracy = accuracy(&model, &test_set)?;
    Ok((
        model,
        SectionTrainReport {
            label_counts: counts,
            train_size: train_set.len(),
            val_size: val_set.len(),
            test_size: test_set.len(),
            history,
            best_epoch,
            test_accuracy,
        },
    ))
}

/// Predicted section type and the five class probabilities.
pub fn classify_section<P: EmbeddingProvider + ?Sized>(
    paragraph: &str,
    classifier: &SectionClassifier<f32>,
    provider: &P,
) -> Result<(SectionType, [f64; SECTION_CLASSES]), SectionsError> {
    if provider.id() != classifier.spec.provider_id {
        return Err(SectionsError::ProviderMismatch {
            model: classifier.spec.provider_id.clone(),
            provider: provider.id().to_string(),
        });
    }
    let sentences = segment_sentences(paragraph);
    if sentences.is_empty() {
        return Err(SectionsError::EmptyInput);
    }
    let refs: Vec<&str> = sentences.iter().map(String::as_str).collect();
    let emb = embed_texts(&refs, provider)?;
    let p = classifier.probabilities(&emb)?;
    let label = SectionType::from_index(argmax(&p)).expect("five classes");
    Ok((label, p))
}

const MAGIC: &[u8; 4] = b"SDQS";
const VERSION: u16 = 1;

impl SectionClassifier<f32> {
    pub fn write_checkpoint<W: Write>(&self, w: &mut W) -> Result<(), SectionsError> {
        let header = serde_json::to_vec(&self.spec).expect("spec serializes");
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        self.params.write_to(w)?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Self, SectionsError> {
        let bad = |m: &str| SectionsError::Checkpoint(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a section classifier checkpoint"));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != VERSION {
            return Err(bad("unsupported checkpoint version"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let mut header = vec![0u8; u32::from_le_bytes(b4) as usize];
        r.read_exact(&mut header)?;
        let spec: SectionModelSpec =
            serde_json::from_slice(&header).map_err(|e| bad(&format!("header: {e}")))?;
        let params = ParamSet::<f32>::read_from(r)?;
        let mut model = SectionClassifier::<f32>::new(spec, 0)?;
        let layout = |p: &ParamSet<f32>| -> Vec<(String, Vec<usize>)> {
            p.params()
                .iter()
                .map(|x| (x.name.clone(), x.value.shape().to_vec()))
                .collect()
        };
        if layout(&model.params) != layout(&params) {
            return Err(bad("parameter layout does not match the header"));
        }
        model.params = params;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::check_gradients_in;
    use rand::Rng;

    fn small_spec() -> SectionModelSpec {
        SectionModelSpec {
            provider_id: "p".into(),
            dim: 8,
            layers: 2,
            heads: 2,
            ff_hidden: 12,
        }
    }

    fn random_set(n: usize, dim: usize, seed: u64) -> Vec<EmbeddedSection> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let len = rng.random_range(1..4);
                EmbeddedSection {
                    label: SectionType::from_index(i % 5).unwrap(),
                    sentences: (0..len)
                        .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
                        .collect(),
                }
            })
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let mut model = SectionClassifier::<f64>::new(small_spec(), seed).unwrap();
            let set = random_set(5, 8, seed + 10);
            let mask_seed = 99 + seed;
            let (_, grads) = model
                .loss_and_gradient(&set, 0.3, &mut ChaCha8Rng::seed_from_u64(mask_seed))
                .unwrap();
            let report = check_gradients_in(
                &mut model,
                |m| &mut m.params,
                &grads,
                1e-4,
                None,
                |m| {
                    m.loss(&set, 0.3, &mut ChaCha8Rng::seed_from_u64(mask_seed))
                        .unwrap()
                },
            );
            assert!(report.max_rel_error < 1e-5, "{report:?}");
        }
    }

    #[test]
    fn probabilities_are_distributions_and_deterministic() {
        let model = SectionClassifier::<f32>::new(small_spec(), 1).unwrap();
        for ex in random_set(20, 8, 3) {
            let p = model.probabilities(&ex.sentences).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|v| *v >= 0.0));
            assert_eq!(p, model.probabilities(&ex.sentences).unwrap());
        }
        assert!(matches!(
            model.probabilities(&[]),
            Err(SectionsError::EmptyInput)
        ));
    }

    #[test]
    fn stratified_split_keeps_label_shares() {
        let labels: Vec<SectionType> = (0..200)
            .map(|i| SectionType::from_index(i % 5).unwrap())
            .collect();
        let [a, b, c] = stratified_split(&labels, &SplitSpec::default(), 4);
        assert_eq!((a.len(), b.len(), c.len()), (140, 30, 30));
        for part in [&a, &b, &c] {
            let per: Vec<usize> = SectionType::ALL
                .iter()
                .map(|k| part.iter().filter(|&&i| labels[i] == *k).count())
                .collect();
            assert!(per.iter().all(|n| *n == part.len() / 5));
        }
        assert_eq!(
            stratified_split(&labels, &SplitSpec::default(), 4),
            [a, b, c]
        );
    }

    #[test]
    fn single_class_is_rejected() {
        let mut set = random_set(10, 8, 0);
        set.iter_mut()
            .for_each(|e| e.label = SectionType::Conclusion);
        assert!(matches!(
            train_section_classifier(small_spec(), &set, &SectionTrainConfig::default()),
            Err(SectionsError::SingleClass)
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = SectionClassifier::<f32>::new(small_spec(), 8).unwrap();
        let mut buf = Vec::new();
        model.write_checkpoint(&mut buf).unwrap();
        let back = SectionClassifier::read_checkpoint(&mut buf.as_slice()).unwrap();
        let ex = &random_set(1, 8, 2)[0];
        assert_eq!(
            model.probabilities(&ex.sentences).unwrap(),
            back.probabilities(&ex.sentences).unwrap()
        );
        buf[0] = b'X';
        assert!(SectionClassifier::read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
