use num_complex::Complex64;
use thiserror::Error;

use crate::model::ChannelId;
use crate::quadrature::GridMismatch;

/// Failures of operator applications and spectral computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error(transparent)]
    GridMismatch(#[from] GridMismatch),
    #[error("index {index} out of range for {channel} of rank {rank}")]
    IndexOutOfRange {
        channel: ChannelId,
        index: usize,
        rank: usize,
    },
    #[error("SpectrumHit: λ = {lambda} is within {margin:e} of {set} (distance {distance:e})")]
    SpectrumHit {
        lambda: Complex64,
        set: &'static str,
        distance: f64,
        margin: f64,
    },
    #[error("EigenvalueHit: λ = {lambda} is numerically a discrete eigenvalue (relative singular value {ratio:e})")]
    EigenvalueHit { lambda: Complex64, ratio: f64 },
    #[error("NotAnEigenvalue: λ = {lambda} (relative singular value {ratio:e})")]
    NotAnEigenvalue { lambda: f64, ratio: f64 },
    #[error("NoAtom: {channel} weight {index} has no level set of positive measure at {value}")]
    NoAtom {
        channel: ChannelId,
        index: usize,
        value: f64,
    },
    #[error("eigensolver failed to converge")]
    ConvergenceFailure,
}
