//! Brute-force check of the analytic spectrum by Nyström discretisation.
//!
//! On a single-panel Gauss grid `(x_p, y_q)` with weights `w_p`, `v_q`, the
//! symmetrised matrix of `T` is
//!
//! ```text
//! M[(p,q),(r,u)] = √(w_p w_r) k1(x_p, x_r, y_q) δ_qu + √(v_q v_u) k2(x_p, y_u, y_q) δ_pr
//! ```
//!
//! which is similar to the plain Nyström matrix and symmetric for real models.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{DomainError, Expr1D};
use crate::model::{ChannelId, PioModel};
use crate::quadrature::gauss_legendre;
use crate::spectrum::{SpectralSet, SpectrumReport};

/// Largest system solved by the dense eigensolver.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("grid sizes must be positive (got {nx}×{ny})")]
    BadSize { nx: usize, ny: usize },
    #[error("{channel} {list}[{index}] at {at}: {source}")]
    Domain {
        channel: ChannelId,
        list: &'static str,
        index: usize,
        at: f64,
        source: DomainError,
    },
    #[error("symmetric eigensolver failed to converge")]
    ConvergenceFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NystromSystem {
    pub nx: usize,
    pub ny: usize,
    pub x_nodes: Vec<f64>,
    pub x_weights: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub y_weights: Vec<f64>,
    /// Channel-1 basis on x-nodes and weights on y-nodes.
    phi: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    /// Channel-2 basis on y-nodes and weights on x-nodes.
    psi: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
}

fn nodes_on(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    (
        t.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|w| half * w).collect(),
    )
}

fn sample(
    channel: ChannelId,
    list: &'static str,
    exprs: &[Expr1D],
    nodes: &[f64],
) -> Result<Vec<Vec<f64>>, OracleError> {
    exprs
        .iter()
        .enumerate()
        .map(|(index, e)| {
            nodes
                .iter()
                .map(|&t| {
                    e.eval(t).map_err(|source| OracleError::Domain {
                        channel,
                        list,
                        index,
                        at: t,
                        source,
                    })
                })
                .collect()
        })
        .collect()
}

/// Sample both kernels on an `nx × ny` Gauss grid, independent of the
/// model's own quadrature settings.
pub fn nystrom_matrix(m: &PioModel, nx: usize, ny: usize) -> Result<NystromSystem, OracleError> {
    if nx == 0 || ny == 0 {
        return Err(OracleError::BadSize { nx, ny });
    }
    let (x_nodes, x_weights) = nodes_on(m.x.0, m.x.1, nx);
    let (y_nodes, y_weights) = nodes_on(m.y.0, m.y.1, ny);
    Ok(NystromSystem {
        phi: sample(ChannelId::One, "basis", &m.channel1.basis, &x_nodes)?,
        h: sample(ChannelId::One, "weights", &m.channel1.weights, &y_nodes)?,
        psi: sample(ChannelId::Two, "basis", &m.channel2.basis, &y_nodes)?,
        p: sample(ChannelId::Two, "weights", &m.channel2.weights, &x_nodes)?,
        nx,
        ny,
        x_nodes,
        x_weights,
        y_nodes,
        y_weights,
    })
}

impl NystromSystem {
    pub fn dim(&self) -> usize {
        self.nx * self.ny
    }

    fn k1(&self, p: usize, r: usize, q: usize) -> f64 {
        (0..self.phi.len())
            .map(|k| self.phi[k][p] * self.phi[k][r] * self.h[k][q])
            .sum()
    }

    fn k2(&self, p: usize, u: usize, q: usize) -> f64 {
        (0..self.psi.len())
            .map(|j| self.p[j][p] * self.psi[j][q] * self.psi[j][u])
            .sum()
    }

    /// Entry for rows `(p,q)` → `p·ny + q`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let (p, q) = (row / self.ny, row % self.ny);
        let (r, u) = (col / self.ny, col % self.ny);
        let mut v = 0.0;
        if q == u {
            v += (self.x_weights[p] * self.x_weights[r]).sqrt() * self.k1(p, r, q);
        }
        if p == r {
            v += (self.y_weights[q] * self.y_weights[u]).sqrt() * self.k2(p, u, q);
        }
        v
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| self.entry(i, j)).collect())
            .collect();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    /// `max |M_il - M_li|` over the structurally nonzero entries.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let (p, q) = (i / self.ny, i % self.ny);
                let same_q = (0..self.nx).map(|r| r * self.ny + q);
                let same_p = (0..self.ny).map(|u| p * self.ny + u);
                same_q
                    .chain(same_p)
                    .map(|j| (self.entry(i, j) - self.entry(j, i)).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Factorisation `M = Z D Zᵀ` column count: `ny·n + nx·m`.
    fn factor_rank(&self) -> usize {
        self.ny * self.phi.len() + self.nx * self.psi.len()
    }
}

fn sorted_eigs(m: DMatrix<f64>) -> Result<Vec<f64>, OracleError> {
    let e =
        SymmetricEigen::try_new(m, f64::EPSILON, 10_000).ok_or(OracleError::ConvergenceFailure)?;
    let mut v: Vec<f64> = e.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// All eigenvalues of the dense symmetric matrix, ascending.
pub fn oracle_eigs_dense(sys: &NystromSystem) -> Result<Vec<f64>, OracleError> {
    sorted_eigs(sys.dense())
}

/// All eigenvalues through the factorisation `M = Z D Zᵀ`.
///
/// Columns of `Z` are `√w φ_k ⊗ e_q` (diagonal entry `h_k(y_q)`) and
/// `e_p ⊗ √v ψ_j` (entry `p_j(x_p)`). The nonzero eigenvalues of `Z D Zᵀ` are
/// those of `D G` with `G = ZᵀZ = Q S Qᵀ`, i.e. of the symmetric
/// `S^{1/2} Qᵀ D Q S^{1/2}`; the rest are zero.
pub fn oracle_eigs_compressed(sys: &NystromSystem) -> Result<Vec<f64>, OracleError> {
    let (nx, ny, n, m) = (sys.nx, sys.ny, sys.phi.len(), sys.psi.len());
    let r1 = ny * n;
    let r = sys.factor_rank();
    let gx: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    (0..nx)
                        .map(|p| sys.x_weights[p] * sys.phi[k][p] * sys.phi[l][p])
                        .sum()
                })
                .collect()
        })
        .collect();
    let gy: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    (0..ny)
                        .map(|q| sys.y_weights[q] * sys.psi[i][q] * sys.psi[j][q])
                        .sum()
                })
                .collect()
        })
        .collect();
    let sx: Vec<f64> = sys.x_weights.iter().map(|w| w.sqrt()).collect();
    let sy: Vec<f64> = sys.y_weights.iter().map(|w| w.sqrt()).collect();
    let mut g = DMatrix::<f64>::zeros(r, r);
    let mut d = vec![0.0; r];
    for q in 0..ny {
        for k in 0..n {
            let a = q * n + k;
            d[a] = sys.h[k][q];
            for l in 0..n {
                g[(a, q * n + l)] = gx[k][l];
            }
            for p in 0..nx {
                for j in 0..m {
                    let b = r1 + p * m + j;
                    let v = sx[p] * sys.phi[k][p] * sy[q] * sys.psi[j][q];
                    g[(a, b)] = v;
                    g[(b, a)] = v;
                }
            }
        }
    }
    for p in 0..nx {
        for i in 0..m {
            let a = r1 + p * m + i;
            d[a] = sys.p[i][p];
            for j in 0..m {
                g[(a, r1 + p * m + j)] = gy[i][j];
            }
        }
    }
    let ge =
        SymmetricEigen::try_new(g, f64::EPSILON, 10_000).ok_or(OracleError::ConvergenceFailure)?;
    let q = ge.eigenvectors;
    let s: Vec<f64> = ge.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()).collect();
    // B = D Q S^{1/2}, H = (Q S^{1/2})ᵀ B
    let qs = DMatrix::from_fn(r, r, |i, j| q[(i, j)] * s[j]);
    let b = DMatrix::from_fn(r, r, |i, j| d[i] * qs[(i, j)]);
    let mut hm = qs.transpose() * b;
    hm = (&hm + hm.transpose()) * 0.5;
    let mut eigs = sorted_eigs(hm)?;
    eigs.extend(std::iter::repeat_n(0.0, sys.dim().saturating_sub(r)));
    eigs.sort_by(f64::total_cmp);
    Ok(eigs)
}

/// All `nx·ny` eigenvalues, ascending. Dense for small systems, otherwise
/// through the low-rank factorisation.
pub fn oracle_eigs(sys: &NystromSystem) -> Result<Vec<f64>, OracleError> {
    if sys.dim() <= DENSE_LIMIT || sys.factor_rank() >= sys.dim() {
        oracle_eigs_dense(sys)
    } else {
        oracle_eigs_compressed(sys)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MismatchKind {
    /// An analytic discrete eigenvalue without a nearby Nyström eigenvalue.
    MissingDiscrete,
    /// A Nyström eigenvalue explained by neither part of the analytic spectrum.
    Unexplained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mismatch {
    pub kind: MismatchKind,
    pub value: f64,
    /// Distance to the nearest counterpart.
    pub distance: f64,
    /// For a missing discrete value, the nearest Nyström eigenvalue. It is
    /// not reported again as unexplained.
    pub nearest_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub tol_disc: f64,
    pub tol_ess: f64,
    pub mismatches: Vec<Mismatch>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn nearest(values: &[f64], x: f64) -> Option<(usize, f64)> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| (i, (v - x).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn compare_essential(
    essential: &SpectralSet,
    discrete: &[f64],
    eigs: &[f64],
    tol_disc: f64,
    tol_ess: f64,
) -> ComparisonReport {
    let mut mismatches = Vec::new();
    let mut paired = vec![false; eigs.len()];
    for &l in discrete {
        let near = nearest(eigs, l);
        let d = near.map_or(f64::INFINITY, |n| n.1);
        if d > tol_disc {
            if let Some((i, _)) = near {
                paired[i] = true;
            }
            mismatches.push(Mismatch {
                kind: MismatchKind::MissingDiscrete,
                value: l,
                distance: d,
                nearest_eigenvalue: near.map(|n| eigs[n.0]),
            });
        }
    }
    for (i, &e) in eigs.iter().enumerate() {
        if e.abs() <= tol_ess || paired[i] {
            continue;
        }
        let de = essential.distance_real(e);
        let dd = nearest(discrete, e).map_or(f64::INFINITY, |n| n.1);
        if de > tol_ess && dd > tol_disc {
            mismatches.push(Mismatch {
                kind: MismatchKind::Unexplained,
                value: e,
                distance: de.min(dd),
                nearest_eigenvalue: None,
            });
        }
    }
    ComparisonReport {
        tol_disc,
        tol_ess,
        mismatches,
    }
}

pub fn compare_spectra(
    report: &SpectrumReport,
    eigs: &[f64],
    tol_disc: f64,
    tol_ess: f64,
) -> ComparisonReport {
    let discrete: Vec<f64> = report.discrete.iter().map(|d| d.lambda).collect();
    compare_essential(&report.essential, &discrete, eigs, tol_disc, tol_ess)
}
