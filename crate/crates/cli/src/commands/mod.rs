//! One module per subcommand. Report files hold no timings or absolute
//! paths, so reruns with the same config and seed are byte-identical;
//! progress and timings go to stderr.

pub mod analyze;
pub mod embed;
pub mod evaluate;
pub mod ingest;
pub mod rank;
pub mod sections;
pub mod synth;
pub mod topics;
pub mod train;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;

use sdq_core::corpus::{load_corpus, Corpus};
use sdq_core::harmonize::TemporalSplit;
use sdq_core::scoremodel::EmbeddedExample;
use sdq_core::util::write_bytes_atomic;

use crate::config::RunConfig;

/// Tags an error with the pipeline stage it came from.
pub trait StageExt<T> {
    fn stage(self, name: &str) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, name: &str) -> Result<T> {
        self.map_err(|e| e.into().context(format!("stage {name}")))
    }
}

pub fn out_path(cfg: &RunConfig, rel: impl AsRef<Path>) -> PathBuf {
    cfg.out_dir.join(rel)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_bytes_atomic(path, &bytes).stage(&format!("write {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_bytes_atomic(path, text.as_bytes()).stage(&format!("write {}", path.display()))
}

pub fn load(cfg: &RunConfig) -> Result<Corpus> {
    let path = cfg.corpus_path().stage("load corpus")?;
    let corpus = load_corpus(path).stage("load corpus")?;
    eprintln!("loaded {} records", corpus.len());
    Ok(corpus)
}

/// snake_case name of a serde enum value.
pub fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// Examples in split order; ids without an example are dropped.
pub fn partition(examples: &[EmbeddedExample], split: &TemporalSplit) -> [Vec<EmbeddedExample>; 3] {
    let by_id: HashMap<&str, &EmbeddedExample> =
        examples.iter().map(|e| (e.paper_id.as_str(), e)).collect();
    let pick = |ids: &[String]| -> Vec<EmbeddedExample> {
        ids.iter()
            .filter_map(|id| by_id.get(id.as_str()).map(|e| (*e).clone()))
            .collect()
    };
    [
        pick(&split.train),
        pick(&split.validation),
        pick(&split.test),
    ]
}
