//! Section classification: a heading synonym table, dataset construction
//! from parsed papers, and a sentence-sequence classifier over the five
//! section types.

mod classifier;
mod dataset;
mod synonyms;

pub use classifier::{
    accuracy, argmax, classify_section, embed_section_dataset, stratified_split,
    train_section_classifier, EmbeddedSection, SectionClassifier, SectionEpoch, SectionModelSpec,
    SectionTrainConfig, SectionTrainReport, SECTION_CLASSES,
};
pub use dataset::{
    build_section_dataset, paragraphs, RawPaper, RawSection, SectionDataset, SectionExample,
};
pub use synonyms::{normalize_heading, SynonymTable};

use crate::embed::EmbedError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum SectionsError {
    #[error("synonym table: {0}")]
    Synonyms(String),
    #[error("dataset holds fewer than two section types")]
    SingleClass,
    #[error("empty input: no sentence to classify")]
    EmptyInput,
    #[error("sentence embedding has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("classifier was trained with {model}, provider is {provider}")]
    ProviderMismatch { model: String, provider: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
