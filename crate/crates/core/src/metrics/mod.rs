//! Aggregate products computed from ranked clusters.

mod composition;
mod purity;
mod sensitivity;
mod signature;

use thiserror::Error;

pub use composition::{rank_composition, RankComposition};
pub use purity::{purity_distribution, quantile, PurityDistribution, RankPurity};
pub use sensitivity::{SensitivityReport, SensitivityRow};
pub use signature::{
    classify_cluster, signature_distance, Classification, HourlyStats, ReferenceSignatures, SignatureGroup,
    SignatureMatrix, SignatureMetric, HOURS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("signature vector has no mass")]
    EmptySignature,
    #[error("signature vector has a negative or non-finite entry")]
    InvalidSignature,
    #[error("classification needs references for at least 2 classes, found {0}")]
    TooFewReferences(usize),
    #[error("invalid reference signatures: {0}")]
    BadReferences(String),
}
