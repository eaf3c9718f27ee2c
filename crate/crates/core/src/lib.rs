//! Frequently-visited location analysis for geo-located event streams.
//!
//! The pipeline parses events ([`ingest`]), attaches a landuse class to every point
//! ([`landuse`]), clusters each user's points into ranked visit locations ([`cluster`])
//! and aggregates the clusters into composition, purity and hourly-signature tables
//! ([`metrics`]). [`synth`] produces labeled corpora with known ground truth.

pub mod ingest;
pub mod landuse;
pub mod cluster;
pub mod metrics;
pub mod synth;
pub mod pipeline;
