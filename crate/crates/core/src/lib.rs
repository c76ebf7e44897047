//! Topic classification of short social-media posts and causal analysis of
//! per-topic mention counts against establishment sales.
//!
//! The pipeline runs in two halves:
//!
//! * [`corpus`], [`entropy`], [`classifier`] and [`pipeline`] segment posts,
//!   pick entropy-based topic keywords, train one linear max-margin classifier
//!   per topic, route posts through the hierarchical classifier and count
//!   topics per station;
//! * [`lingam`] estimates the causal connection strengths between those
//!   counts and sales.
//!
//! [`synthgen`] produces data with known ground truth for both halves.

pub mod assignment;
pub mod classifier;
pub mod corpus;
pub mod entropy;
pub mod error;
pub mod lingam;
pub mod pipeline;
pub mod synthgen;

pub use classifier::{FeatureSpace, FeatureVector, Hyper, LinearModel, Metrics};
pub use corpus::{Document, LabeledCorpus, Segmenter, SegmenterSpec, TopicId};
pub use entropy::{EntropyTable, KeywordConfig, KeywordSet, SelectionMode};
pub use error::{Error, Result};
pub use lingam::{CausalModel, IcaConfig, LingamConfig, TargetEffects};
pub use pipeline::{ObservationMatrix, PipelineConfig, TopicAssignment};
