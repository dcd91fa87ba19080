//! Relative opinion measurement.
//!
//! The crate covers the whole chain from raw posts to discrete opinion
//! predictions:
//!
//! * [`corpus`] parses, filters, tokenizes and geolocates posts.
//! * [`hashtag`] builds the hashtag co-occurrence network, keeps only
//!   statistically significant edges, spreads opinion labels from seed
//!   hashtags and turns them into a labeled training set.
//! * [`oowe`] trains the opinion-oriented word embedding.
//! * [`aggregate`] averages word vectors into tweet, user and state points.
//! * [`manifold`] provides distances, MDS and embedding-quality measures.
//! * [`lnp`] runs linear neighborhood propagation over the opinion points.
//! * [`synth`] holds data generators and independent numeric oracles.
//! * [`pipeline`] wires everything into re-runnable stages for the CLI.

pub mod aggregate;
pub mod config;
pub mod corpus;
pub mod error;
pub mod hashtag;
pub mod lnp;
pub mod manifold;
pub mod oowe;
pub mod par;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
