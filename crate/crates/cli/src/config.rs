//! Run configuration: one TOML file, overridable by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use sdq_core::corpus::{ReviewDimension, YearMonth};
use sdq_core::harmonize::citations::CitationClientConfig;
use sdq_core::harmonize::SplitSpec;
use sdq_core::metrics::DEFAULT_MAX_PAIRS;
use sdq_core::scoremodel::{
    ContextKind, ModelDims, ModelKind, ModelSpec, RepresentationKind, TargetKind, TrainConfig,
};
use sdq_core::sections::{SectionModelSpec, SectionTrainConfig};
use sdq_core::topics::{
    DEFAULT_BETA, DEFAULT_ITERATIONS, DEFAULT_MIN_TOPIC_SIZE, DEFAULT_PHRASE_THRESHOLD,
    DEFAULT_TOPICS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub stub_seed: u64,
    pub endpoint: Option<String>,
    /// Identity of the remote model, needed to reuse a cache offline.
    pub model_id: Option<String>,
    pub revision: Option<String>,
    pub dimension: usize,
    pub max_tokens: usize,
    pub cache: Option<PathBuf>,
    pub no_cache: bool,
    pub no_network: bool,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Stub,
            stub_seed: 0,
            endpoint: None,
            model_id: None,
            revision: None,
            dimension: 768,
            max_tokens: 512,
            cache: None,
            no_cache: false,
            no_network: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub target: TargetKind,
    pub representation: RepresentationKind,
    pub context: ContextKind,
    pub hidden: usize,
    pub heads: usize,
    pub ff_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let d = ModelDims::default();
        Self {
            target: TargetKind::CitationLogAvg,
            representation: RepresentationKind::TitleAbstract,
            context: ContextKind::None,
            hidden: d.hidden,
            heads: d.heads,
            ff_hidden: d.ff_hidden,
        }
    }
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        if self.context == ContextKind::None {
            ModelKind::NoContext
        } else {
            ModelKind::Context
        }
    }

    /// The input width follows the provider.
    pub fn spec(&self, provider_id: &str, dimension: usize) -> Result<ModelSpec> {
        let spec = ModelSpec {
            kind: self.kind(),
            target_kind: self.target,
            representation_kind: self.representation,
            context_kind: self.context,
            provider_id: provider_id.to_string(),
            dims: ModelDims {
                input: dimension,
                hidden: self.hidden,
                heads: self.heads,
                ff_hidden: self.ff_hidden,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub checkpoint: Option<PathBuf>,
    pub split: SplitChoice,
    pub max_pairs: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            split: SplitChoice::Test,
            max_pairs: DEFAULT_MAX_PAIRS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub input: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub swiss: bool,
    pub rounds: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            input: None,
            checkpoint: None,
            swiss: false,
            rounds: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Review attribute for the human-consistency baseline.
    pub dimension: ReviewDimension,
    /// One citation-versus-review row per venue; all venues when empty.
    pub venues: Vec<String>,
    pub year: Option<i32>,
    pub before_year: Option<i32>,
    pub field_of_study: Option<String>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            dimension: ReviewDimension::Score,
            venues: Vec::new(),
            year: None,
            before_year: None,
            field_of_study: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionsConfig {
    pub papers: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub layers: usize,
    pub heads: usize,
    pub ff_hidden: usize,
    pub train: SectionTrainConfig,
}

impl Default for SectionsConfig {
    fn default() -> Self {
        let s = SectionModelSpec::new("", 0);
        Self {
            papers: None,
            synonyms: None,
            layers: s.layers,
            heads: s.heads,
            ff_hidden: s.ff_hidden,
            train: SectionTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsConfig {
    pub k: usize,
    pub iterations: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub phrase_threshold: usize,
    pub top_words: usize,
    pub per_topic: bool,
    pub top_m: usize,
    pub min_size: usize,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_TOPICS,
            iterations: DEFAULT_ITERATIONS,
            alpha: None,
            beta: DEFAULT_BETA,
            phrase_threshold: DEFAULT_PHRASE_THRESHOLD,
            top_words: 10,
            per_topic: false,
            top_m: 5,
            min_size: DEFAULT_MIN_TOPIC_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Month at which citation counts were collected.
    pub snapshot: YearMonth,
    pub threads: Option<usize>,
    pub provider: ProviderConfig,
    pub split: SplitSpec,
    pub model: ModelConfig,
    /// Overrides on top of the defaults for the model kind.
    pub train: toml::Table,
    pub grid: bool,
    pub evaluate: EvaluateConfig,
    pub rank: RankConfig,
    pub analyze: AnalyzeConfig,
    pub sections: SectionsConfig,
    pub topics: TopicsConfig,
    pub citations: CitationClientConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            out_dir: PathBuf::from("out"),
            seeds: vec![0],
            snapshot: YearMonth::new(2024, 1),
            threads: None,
            provider: ProviderConfig::default(),
            split: SplitSpec::default(),
            model: ModelConfig::default(),
            train: toml::Table::new(),
            grid: false,
            evaluate: EvaluateConfig::default(),
            rank: RankConfig::default(),
            analyze: AnalyzeConfig::default(),
            sections: SectionsConfig::default(),
            topics: TopicsConfig::default(),
            citations: CitationClientConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "seed list is empty");
        ensure!(
            self.snapshot.is_valid(),
            "invalid snapshot month {}",
            self.snapshot
        );
        self.split.validate()?;
        if self.threads == Some(0) {
            bail!("threads must be positive");
        }
        self.train_config(self.model.kind())?;
        Ok(())
    }

    /// Training settings for `kind`: its defaults, overlaid with `[train]`.
    pub fn train_config(&self, kind: ModelKind) -> Result<TrainConfig> {
        let base = TrainConfig::for_kind(kind);
        let mut table = toml::Table::try_from(&base)?;
        for (key, value) in &self.train {
            if !table.contains_key(key) && key != "pairs_per_epoch" {
                bail!("unknown training setting {key:?}");
            }
            table.insert(key.clone(), value.clone());
        }
        let cfg: TrainConfig = table.try_into().context("training settings")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        let p = self
            .corpus
            .as_deref()
            .context("no corpus configured (set `corpus` or pass --corpus)")?;
        ensure!(p.is_file(), "corpus {} does not exist", p.display());
        Ok(p)
    }
}

/// Existing file named by a flag or, failing that, the config.
pub fn existing_path<'a>(
    flag: Option<&'a Path>,
    config: Option<&'a Path>,
    what: &str,
) -> Result<&'a Path> {
    let p = flag
        .or(config)
        .with_context(|| format!("no {what} given"))?;
    ensure!(p.exists(), "{what} {} does not exist", p.display());
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sede = [1]").is_err());
        assert!(RunConfig::from_toml("[provider]\nkind = \"stub\"\ncahce = \"x\"").is_err());
        let cfg = RunConfig::from_toml("[train]\nepoch = 3").unwrap();
        assert!(cfg.validate().unwrap_err().to_string().contains("epoch"));
    }

    #[test]
    fn train_overrides_apply_per_kind() {
        let cfg = RunConfig::from_toml("[train]\nepochs = 3\npairs_per_epoch = 10").unwrap();
        let t = cfg.train_config(ModelKind::Context).unwrap();
        assert_eq!(
            (t.epochs, t.batch_size, t.pairs_per_epoch),
            (3, 128, Some(10))
        );
        let t = cfg.train_config(ModelKind::NoContext).unwrap();
        assert_eq!((t.epochs, t.batch_size), (3, 256));
    }

    #[test]
    fn empty_seed_list_is_invalid() {
        let cfg = RunConfig::from_toml("seeds = []").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn model_spec_follows_provider_width() {
        let m = ModelConfig {
            context: ContextKind::ReferenceTitlesAbstracts,
            heads: 4,
            ..Default::default()
        };
        let spec = m.spec("stub", 64).unwrap();
        assert_eq!((spec.kind, spec.dims.input), (ModelKind::Context, 64));
        assert!(ModelConfig { heads: 5, ..m }.spec("stub", 64).is_err());
    }
}
