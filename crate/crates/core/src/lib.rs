//! Federated graph representations.
//!
//! Several parties each hold a private graph over a shared attribute schema.
//! A coordinator and the parties jointly learn a node embedding table by
//! federated averaging, aggregate privacy-protected attribute distributions
//! under secure aggregation, and reconstruct a structure from the learned
//! embeddings, without raw nodes, edges or attribute values leaving a party.

pub mod analysis;
pub mod embedding;
pub mod error;
pub mod federation;
pub mod graph;
pub mod privacy;
pub mod representation;
pub mod seed;
pub mod service;
pub mod synth;

pub use error::{Error, Result};
