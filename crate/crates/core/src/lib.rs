//! Representative-output decoding for probabilistic sequence models.
//!
//! Candidates and voters come from beam search or sampling; each voter
//! scores every candidate with a similarity in `[0, 1]`, weighted by its
//! model probability, and the highest total wins (range voting).

pub mod config;
pub mod decode;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod logmath;
pub mod models;
pub mod oracle;
pub mod seq;
pub mod voting;

pub use error::{Error, Result};
