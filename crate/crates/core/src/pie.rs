//! The second-kind equation `f - τ (T1 + T2) f = g`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::error::SpectralError;
use crate::model::DiscreteModel;
use crate::operators::{apply_t, check_resolvent_set, second_kind_solution};
use crate::quadrature::{Grid2D, GridMismatch};
use crate::spectrum::FiniteRankSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TauKind {
    /// Unique solution for every right-hand side.
    Regular,
    /// Nontrivial homogeneous solutions exist.
    Eigen,
    /// `1/τ` lies in `σ(T1) ∪ σ(T2)`.
    ChannelSingular,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauClass {
    pub tau: Complex64,
    pub class: TauKind,
    /// Relative smallest singular value of the finite-rank system, when formed.
    pub singular_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PieError {
    #[error("NonUniqueSolution: 1/τ = {lambda} is a discrete eigenvalue of T")]
    NonUniqueSolution { tau: Complex64, lambda: Complex64 },
    #[error("OutsideTheory: {reason}")]
    OutsideTheory { tau: Complex64, reason: String },
    #[error(transparent)]
    GridMismatch(#[from] GridMismatch),
}

pub fn classify_tau(m: &DiscreteModel, tau: Complex64) -> TauClass {
    let class = |class, singular_ratio| TauClass {
        tau,
        class,
        singular_ratio,
    };
    if tau == Complex64::new(0.0, 0.0) {
        return class(TauKind::Zero, None);
    }
    let lambda = 1.0 / tau;
    if check_resolvent_set(m, lambda, m.resolvent_margin()).is_err() {
        return class(TauKind::ChannelSingular, None);
    }
    let ratio = FiniteRankSystem::new_unchecked(m, lambda).system_singular_ratio();
    if ratio <= m.model().search.rank_tol {
        class(TauKind::Eigen, Some(ratio))
    } else {
        class(TauKind::Regular, Some(ratio))
    }
}

fn refusal(tau: Complex64, e: SpectralError) -> PieError {
    match e {
        SpectralError::EigenvalueHit { lambda, .. } => PieError::NonUniqueSolution { tau, lambda },
        SpectralError::GridMismatch(g) => PieError::GridMismatch(g),
        other => PieError::OutsideTheory {
            tau,
            reason: other.to_string(),
        },
    }
}

/// Unique solution for regular `τ`, through `u1 = (E - τT1)^{-1} g`,
/// `u2 = (E - τT2)^{-1} u1` and the finite-rank system of
/// [`FiniteRankSystem::solve_second_kind`].
pub fn solve_pie(m: &DiscreteModel, tau: Complex64, g: &Grid2D) -> Result<Grid2D, PieError> {
    solve_pie_ordered(m, tau, g, None)
}

/// As [`solve_pie`], permuting the finite-rank unknowns by `ordering` first.
pub fn solve_pie_ordered(
    m: &DiscreteModel,
    tau: Complex64,
    g: &Grid2D,
    ordering: Option<&[usize]>,
) -> Result<Grid2D, PieError> {
    if tau == Complex64::new(0.0, 0.0) {
        return Err(PieError::OutsideTheory {
            tau,
            reason: "τ = 0".into(),
        });
    }
    second_kind_solution(m, tau, g, ordering).map_err(|e| refusal(tau, e))
}

/// `‖f - τ T f - g‖ / max(‖g‖, 1e-300)`.
pub fn residual(
    m: &DiscreteModel,
    tau: Complex64,
    f: &Grid2D,
    g: &Grid2D,
) -> Result<f64, SpectralError> {
    let tf = apply_t(m, f)?;
    let mut r = f.try_sub(g)?;
    r.axpy(-tau, &tf)?;
    Ok(r.norm() / g.norm().max(1e-300))
}
