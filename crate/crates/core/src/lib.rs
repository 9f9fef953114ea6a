//! Scholarly document quality prediction: corpus handling, review
//! harmonization, embeddings, scoring models, metrics, section
//! classification and topic modelling.

pub mod corpus;
pub mod embed;
pub mod harmonize;
pub mod metrics;
pub mod nn;
pub mod scoremodel;
pub mod sections;
pub mod synth;
pub mod topics;
pub mod util;
