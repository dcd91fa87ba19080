//! Synthetic data generators and independent reference computations.

mod corpus;
pub mod checks;
pub mod oracle;
mod shapes;

pub use corpus::{gen_opinion_corpus, leans_from_outcome, SynthCorpus, SynthCorpusConfig, SynthTruth};
pub use shapes::{gen_manifold, spiral_arc_length, ManifoldKind, ManifoldSample, BLOB_SEPARATION};
