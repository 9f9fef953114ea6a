use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScoreModelError;
use crate::corpus::YearMonth;
use crate::nn::{EncoderCache, EncoderConfig, EncoderLayer, Grads, Mlp, MlpCache, ParamSet, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NoContext,
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    CitationLogAvg,
    ReviewScoreMean,
    ImpactMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    TitleAbstract,
    Hypothesis,
    Introduction,
    RelatedWork,
    Methodology,
    ExperimentsResults,
    Conclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    None,
    FullPaperSections,
    ReferenceTitlesAbstracts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ff_hidden: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            input: 768,
            hidden: 256,
            heads: 1,
            ff_hidden: 1024,
        }
    }
}

/// Everything about a model except its parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub target_kind: TargetKind,
    pub representation_kind: RepresentationKind,
    pub context_kind: ContextKind,
    pub provider_id: String,
    pub dims: ModelDims,
}

impl ModelSpec {
    pub fn no_context(provider_id: impl Into<String>) -> Self {
        Self {
            kind: ModelKind::NoContext,
            target_kind: TargetKind::CitationLogAvg,
            representation_kind: RepresentationKind::TitleAbstract,
            context_kind: ContextKind::None,
            provider_id: provider_id.into(),
            dims: ModelDims::default(),
        }
    }

    pub fn context(provider_id: impl Into<String>, context_kind: ContextKind) -> Self {
        Self {
            kind: ModelKind::Context,
            context_kind,
            ..Self::no_context(provider_id)
        }
    }

    pub fn with_dims(mut self, dims: ModelDims) -> Self {
        self.dims = dims;
        self
    }

    pub fn validate(&self) -> Result<(), ScoreModelError> {
        match (self.kind, self.context_kind) {
            (ModelKind::NoContext, ContextKind::None) => {}
            (ModelKind::Context, c) if c != ContextKind::None => {}
            _ => {
                return Err(ScoreModelError::InvalidSpec(format!(
                    "{:?} model cannot use context kind {:?}",
                    self.kind, self.context_kind
                )))
            }
        }
        let d = self.dims;
        if d.input == 0 || d.hidden == 0 || d.heads == 0 || d.ff_hidden == 0 {
            return Err(ScoreModelError::InvalidSpec("zero-sized dimension".into()));
        }
        if self.kind == ModelKind::Context && d.input % d.heads != 0 {
            return Err(ScoreModelError::InvalidSpec(format!(
                "input dimension {} not divisible by {} heads",
                d.input, d.heads
            )));
        }
        Ok(())
    }
}

/// One item: paper embedding, context embeddings and an optional target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedExample {
    pub paper_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub publication_date: Option<YearMonth>,
    pub provider_id: String,
    pub paper_embedding: Vec<f32>,
    #[serde(default)]
    pub context_embeddings: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
}

impl EmbeddedExample {
    pub fn new(
        paper_id: impl Into<String>,
        provider_id: impl Into<String>,
        embedding: Vec<f32>,
    ) -> Self {
        Self {
            paper_id: paper_id.into(),
            publication_date: None,
            provider_id: provider_id.into(),
            paper_embedding: embedding,
            context_embeddings: Vec::new(),
            target: None,
        }
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_context(mut self, context: Vec<Vec<f32>>) -> Self {
        self.context_embeddings = context;
        self
    }
}

/// The scorer `f_θ`: an MLP on the paper embedding, optionally preceded
/// by one encoder layer over `[paper, context...]` read out at slot 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel<T> {
    pub spec: ModelSpec,
    pub params: ParamSet<T>,
    pub encoder: Option<EncoderLayer>,
    pub mlp: Mlp,
}

pub(crate) enum BatchCache<T> {
    NoContext(MlpCache<T>),
    Context {
        lens: Vec<usize>,
        enc: Vec<EncoderCache<T>>,
        mlp: MlpCache<T>,
    },
}

impl<T: Real> BatchCache<T> {
    /// Activation pattern of every ReLU in the batch; the objective is
    /// smooth between two parameter points that share it.
    pub(crate) fn relu_pattern(&self) -> Vec<bool> {
        match self {
            BatchCache::NoContext(m) => m.relu_pattern().collect(),
            BatchCache::Context { enc, mlp, .. } => enc
                .iter()
                .flat_map(|c| c.relu_pattern())
                .chain(mlp.relu_pattern())
                .collect(),
        }
    }
}

impl<T: Real> ScoreModel<T> {
    /// Xavier-initialized model; the same seed gives the same weights.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self, ScoreModelError> {
        spec.validate()?;
        let mut params = ParamSet::new(splitmix_seed(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = spec.dims;
        let encoder = match spec.kind {
            ModelKind::NoContext => None,
            ModelKind::Context => Some(EncoderLayer::new(
                &mut params,
                "encoder",
                EncoderConfig::new(d.input, d.heads, d.ff_hidden),
                &mut rng,
            )?),
        };
        let mlp = Mlp::new(&mut params, "mlp", d.input, d.hidden, 1, &mut rng);
        Ok(Self {
            spec,
            params,
            encoder,
            mlp,
        })
    }

    pub fn cast<U: Real>(&self) -> ScoreModel<U> {
        ScoreModel {
            spec: self.spec.clone(),
            params: self.params.cast(),
            encoder: self.encoder.clone(),
            mlp: self.mlp.clone(),
        }
    }

    pub fn check_example(&self, ex: &EmbeddedExample) -> Result<(), ScoreModelError> {
        if ex.provider_id != self.spec.provider_id {
            return Err(ScoreModelError::ProviderMismatch {
                model: self.spec.provider_id.clone(),
                example: ex.provider_id.clone(),
            });
        }
        let d = self.spec.dims.input;
        let bad = std::iter::once(&ex.paper_embedding)
            .chain(&ex.context_embeddings)
            .find(|v| v.len() != d);
        if let Some(v) = bad {
            return Err(ScoreModelError::Dimension {
                paper_id: ex.paper_id.clone(),
                expected: d,
                got: v.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward_batch(
        &self,
        xs: &[&EmbeddedExample],
        dropout: f64,
        rng: &mut ChaCha8Rng,
        training: bool,
    ) -> Result<(Vec<T>, BatchCache<T>), ScoreModelError> {
        let d = self.spec.dims.input;
        let n = xs.len();
        match &self.encoder {
            None => {
                let mut x = Vec::with_capacity(n * d);
                for ex in xs {
                    x.extend(ex.paper_embedding.iter().map(|v| T::of(*v as f64)));
                }
                let (y, cache) = self
                    .mlp
                    .forward(&self.params, &x, n, dropout, rng, training)?;
                Ok((y, BatchCache::NoContext(cache)))
            }
            Some(enc) => {
                let mut slot0 = Vec::with_capacity(n * d);
                let mut caches = Vec::with_capacity(n);
                let mut lens = Vec::with_capacity(n);
                for ex in xs {
                    let len = 1 + ex.context_embeddings.len();
                    let mut seq = Vec::with_capacity(len * d);
                    for v in std::iter::once(&ex.paper_embedding).chain(&ex.context_embeddings) {
                        seq.extend(v.iter().map(|x| T::of(*x as f64)));
                    }
                    let (out, cache) =
                        enc.forward(&self.params, &seq, len, dropout, rng, training)?;
                    slot0.extend_from_slice(&out[..d]);
                    caches.push(cache);
                    lens.push(len);
                }
                let (y, mlp) = self
                    .mlp
                    .forward(&self.params, &slot0, n, dropout, rng, training)?;
                Ok((
                    y,
                    BatchCache::Context {
                        lens,
                        enc: caches,
                        mlp,
                    },
                ))
            }
        }
    }

    pub(crate) fn backward_batch(
        &self,
        cache: &BatchCache<T>,
        dscores: &[T],
        grads: &mut Grads<T>,
    ) -> Result<(), ScoreModelError> {
        match cache {
            BatchCache::NoContext(mlp) => {
                self.mlp
                    .backward(&self.params, mlp, dscores, grads, false)?;
            }
            BatchCache::Context { lens, enc, mlp } => {
                let d = self.spec.dims.input;
                let dx = self
                    .mlp
                    .backward(&self.params, mlp, dscores, grads, true)?
                    .expect("dx requested");
                let layer = self.encoder.as_ref().expect("context model has an encoder");
                for (i, (len, c)) in lens.iter().zip(enc).enumerate() {
                    let mut dout = vec![T::zero(); len * d];
                    dout[..d].copy_from_slice(&dx[i * d..(i + 1) * d]);
                    layer.backward(&self.params, c, &dout, grads)?;
                }
            }
        }
        Ok(())
    }

    /// Scores in inference mode.
    pub fn predict_batch(&self, xs: &[&EmbeddedExample]) -> Result<Vec<f64>, ScoreModelError> {
        for ex in xs {
            self.check_example(ex)?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(256) {
            let (y, _) = self.forward_batch(chunk, 0.0, &mut rng, false)?;
            out.extend(y.iter().map(|v| v.as_f64()));
        }
        Ok(out)
    }

    pub fn predict(&self, ex: &EmbeddedExample) -> Result<f64, ScoreModelError> {
        Ok(self.predict_batch(&[ex])?[0])
    }
}

fn splitmix_seed(seed: u64) -> u64 {
    crate::util::splitmix64(seed ^ 0x5d0f_d20f_6c3e_a1b7)
}

const CKPT_MAGIC: &[u8; 4] = b"SDQM";
const CKPT_VERSION: u16 = 1;

/// Header stored ahead of the parameters in a model checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub spec: ModelSpec,
    pub config_hash: String,
}

impl ScoreModel<f32> {
    pub fn write_checkpoint<W: Write>(
        &self,
        w: &mut W,
        config_hash: &str,
    ) -> Result<(), ScoreModelError> {
        let header = serde_json::to_vec(&CheckpointHeader {
            spec: self.spec.clone(),
            config_hash: config_hash.to_string(),
        })
        .expect("header serializes");
        w.write_all(CKPT_MAGIC)?;
        w.write_all(&CKPT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        self.params.write_to(w)?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(
        r: &mut R,
    ) -> Result<(Self, CheckpointHeader), ScoreModelError> {
        let bad = |m: &str| ScoreModelError::Checkpoint(m.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CKPT_MAGIC {
            return Err(bad("not a model checkpoint"));
        }
        let mut b2 = [0u8; 2];
        r.read_exact(&mut b2)?;
        if u16::from_le_bytes(b2) != CKPT_VERSION {
            return Err(bad("unsupported checkpoint version"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let mut header = vec![0u8; u32::from_le_bytes(b4) as usize];
        r.read_exact(&mut header)?;
        let header: CheckpointHeader =
            serde_json::from_slice(&header).map_err(|e| bad(&format!("header: {e}")))?;
        let params = ParamSet::<f32>::read_from(r)?;
        // rebuild the layer layout, then adopt the stored values
        let mut model = ScoreModel::<f32>::new(header.spec.clone(), 0)?;
        let expected: Vec<(&str, &[usize])> = model
            .params
            .params()
            .iter()
            .map(|p| (p.name.as_str(), p.value.shape()))
            .collect();
        let got: Vec<(&str, &[usize])> = params
            .params()
            .iter()
            .map(|p| (p.name.as_str(), p.value.shape()))
            .collect();
        if expected != got {
            return Err(bad("parameter layout does not match the model spec"));
        }
        model.params = params;
        Ok((model, header))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn small() -> ModelDims {
        ModelDims {
            input: 8,
            hidden: 6,
            heads: 2,
            ff_hidden: 10,
        }
    }

    fn example(id: &str, rng: &mut ChaCha8Rng, ctx: usize) -> EmbeddedExample {
        let mut v = || {
            (0..8)
                .map(|_| rng.random_range(-1.0f32..1.0))
                .collect::<Vec<_>>()
        };
        let paper = v();
        let context = (0..ctx).map(|_| v()).collect();
        EmbeddedExample::new(id, "p", paper).with_context(context)
    }

    #[test]
    fn spec_invariants() {
        let mut s = ModelSpec::no_context("p");
        s.context_kind = ContextKind::FullPaperSections;
        assert!(ScoreModel::<f32>::new(s, 0).is_err());
        let mut s = ModelSpec::context("p", ContextKind::ReferenceTitlesAbstracts);
        s.context_kind = ContextKind::None;
        assert!(ScoreModel::<f32>::new(s, 0).is_err());
        let s = ModelSpec::context("p", ContextKind::FullPaperSections).with_dims(ModelDims {
            heads: 3,
            ..small()
        });
        assert!(ScoreModel::<f32>::new(s, 0).is_err());
    }

    #[test]
    fn zero_model_predicts_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for spec in [
            ModelSpec::no_context("p").with_dims(small()),
            ModelSpec::context("p", ContextKind::FullPaperSections).with_dims(small()),
        ] {
            let mut m = ScoreModel::<f32>::new(spec, 3).unwrap();
            for id in m.params.ids().collect::<Vec<_>>() {
                m.params.value_mut(id).iter_mut().for_each(|v| *v = 0.0);
            }
            for i in 0..5 {
                assert_eq!(
                    m.predict(&example(&format!("e{i}"), &mut rng, i)).unwrap(),
                    0.0
                );
            }
        }
    }

    #[test]
    fn empty_context_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = ScoreModel::<f32>::new(
            ModelSpec::context("p", ContextKind::FullPaperSections).with_dims(small()),
            4,
        )
        .unwrap();
        let ex = example("a", &mut rng, 0);
        let a = m.predict(&ex).unwrap();
        assert_eq!(a, m.predict(&ex).unwrap());
        assert!(a.is_finite());
    }

    #[test]
    fn context_order_does_not_matter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = ScoreModel::<f64>::new(
            ModelSpec::context("p", ContextKind::ReferenceTitlesAbstracts).with_dims(small()),
            5,
        )
        .unwrap();
        let ex = example("a", &mut rng, 6);
        let base = m.predict(&ex).unwrap();
        for _ in 0..20 {
            let mut shuffled = ex.clone();
            shuffled.context_embeddings.shuffle(&mut rng);
            assert!((m.predict(&shuffled).unwrap() - base).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatches_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ScoreModel::<f32>::new(ModelSpec::no_context("p").with_dims(small()), 0).unwrap();
        let mut ex = example("a", &mut rng, 0);
        ex.provider_id = "q".into();
        assert!(matches!(
            m.predict(&ex),
            Err(ScoreModelError::ProviderMismatch { .. })
        ));
        let ex = EmbeddedExample::new("b", "p", vec![0.0; 7]);
        assert!(matches!(
            m.predict(&ex),
            Err(ScoreModelError::Dimension { got: 7, .. })
        ));
    }

    #[test]
    fn same_seed_same_weights() {
        let s = ModelSpec::context("p", ContextKind::FullPaperSections).with_dims(small());
        assert_eq!(
            ScoreModel::<f32>::new(s.clone(), 9).unwrap(),
            ScoreModel::<f32>::new(s.clone(), 9).unwrap()
        );
        assert_ne!(
            ScoreModel::<f32>::new(s.clone(), 9).unwrap().params,
            ScoreModel::<f32>::new(s, 10).unwrap().params
        );
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = ModelSpec::context("p", ContextKind::FullPaperSections).with_dims(small());
        let m = ScoreModel::<f32>::new(spec, 11).unwrap();
        let mut buf = Vec::new();
        m.write_checkpoint(&mut buf, "abc").unwrap();
        let (back, header) = ScoreModel::read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back.params, m.params);
        assert_eq!(header.config_hash, "abc");
        assert_eq!(header.spec, m.spec);
        assert!(ScoreModel::read_checkpoint(&mut &buf[..buf.len() - 3]).is_err());
        assert!(ScoreModel::read_checkpoint(&mut &b"SDQX"[..]).is_err());
    }
}
