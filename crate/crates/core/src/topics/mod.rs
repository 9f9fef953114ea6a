//! Topic labeling with collapsed Gibbs LDA over normalized title and
//! abstract tokens.

mod lda;
mod preprocess;

pub use lda::*;
pub use preprocess::{
    preprocess_corpus, Phraser, Preprocessor, SuffixRules, DEFAULT_PHRASE_THRESHOLD, MIN_TOKEN_LEN,
    STOPWORDS,
};
