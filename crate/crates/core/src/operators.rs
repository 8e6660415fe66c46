//! Operator actions on grid functions.
//!
//! With `P_k f(x,y) = φ_k(x) ∫ φ_k(s) f(s,y) ds` and
//! `Q_j f(x,y) = ψ_j(y) ∫ ψ_j(t) f(x,t) dt`:
//!
//! ```text
//! T1 = Σ_k h_k(y) P_k              T2 = Σ_j p_j(x) Q_j
//! S1(τ) = Σ_k h_k/(1 - τ h_k) P_k  S2(τ) = Σ_j p_j/(1 - τ p_j) Q_j
//! (E - τ T1)^{-1} = E + τ S1(τ)     (E - τ T2)^{-1} = E + τ S2(τ)
//! W1(τ) = (E - τ T2)^{-1} S1(τ) T2  W2(τ) = (E - τ T1)^{-1} S2(τ) T1
//! ```
//!
//! Inner products use the quadrature weights of the model grid, so the
//! identities above hold at quadrature precision.

use num_complex::Complex64;

use crate::error::SpectralError;
use crate::model::{ChannelId, DiscreteModel};
use crate::quadrature::Grid2D;
use crate::spectrum::FiniteRankSystem;

pub type OpResult<T> = Result<T, SpectralError>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which operator, for reporting and dispatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Apply,
    Project(usize),
    Resolvent(Complex64),
    S(Complex64),
    W(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorTag {
    pub channel: ChannelId,
    pub transform: Transform,
}

impl OperatorTag {
    pub fn apply(&self, m: &DiscreteModel, f: &Grid2D) -> OpResult<Grid2D> {
        match self.transform {
            Transform::Apply => apply_partial(m, self.channel, f),
            Transform::Project(k) => project(m, self.channel, k, f),
            Transform::Resolvent(l) => resolvent_channel(m, self.channel, l, f),
            Transform::S(t) => apply_s(m, self.channel, t, f),
            Transform::W(t) => apply_w(m, self.channel, t, f),
        }
    }
}

fn basis_and_weights(m: &DiscreteModel, ch: ChannelId) -> (&[Vec<f64>], &[Vec<f64>]) {
    match ch {
        ChannelId::One => (&m.phi, &m.h),
        ChannelId::Two => (&m.psi, &m.p),
    }
}

/// `⟨b_k, f⟩` along the integration axis of the channel, one value per grid
/// line of the other axis.
fn coefficients(m: &DiscreteModel, ch: ChannelId, f: &Grid2D) -> Vec<Vec<Complex64>> {
    let (nx, ny) = (m.nx(), m.ny());
    let vals = f.values();
    let (basis, _) = basis_and_weights(m, ch);
    match ch {
        ChannelId::One => {
            let w = m.rules().x.weights();
            basis
                .iter()
                .map(|phi| {
                    let mut c = vec![ZERO; ny];
                    for p in 0..nx {
                        let s = w[p] * phi[p];
                        let row = &vals[p * ny..(p + 1) * ny];
                        for (cq, v) in c.iter_mut().zip(row) {
                            *cq += v * s;
                        }
                    }
                    c
                })
                .collect()
        }
        ChannelId::Two => {
            let w = m.rules().y.weights();
            basis
                .iter()
                .map(|psi| {
                    (0..nx)
                        .map(|p| {
                            let row = &vals[p * ny..(p + 1) * ny];
                            row.iter()
                                .zip(w.iter().zip(psi))
                                .map(|(v, (wq, b))| v * (wq * b))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        }
    }
}

/// `Σ_k mult(k, o) · coef_k(o) · b_k(axis)`, where `o` indexes the other axis.
fn synthesize<M>(m: &DiscreteModel, ch: ChannelId, coef: &[Vec<Complex64>], mut mult: M) -> Grid2D
where
    M: FnMut(usize, usize) -> Complex64,
{
    let (nx, ny) = (m.nx(), m.ny());
    let (basis, _) = basis_and_weights(m, ch);
    let mut out = Grid2D::zeros(m.rules().clone());
    let vals = out.values_mut();
    for (k, (b, c)) in basis.iter().zip(coef).enumerate() {
        match ch {
            ChannelId::One => {
                let scaled: Vec<Complex64> = (0..ny).map(|q| c[q] * mult(k, q)).collect();
                for p in 0..nx {
                    let row = &mut vals[p * ny..(p + 1) * ny];
                    for (v, s) in row.iter_mut().zip(&scaled) {
                        *v += s * b[p];
                    }
                }
            }
            ChannelId::Two => {
                for p in 0..nx {
                    let s = c[p] * mult(k, p);
                    let row = &mut vals[p * ny..(p + 1) * ny];
                    for (v, bq) in row.iter_mut().zip(b) {
                        *v += s * *bq;
                    }
                }
            }
        }
    }
    out
}

fn on_grid(m: &DiscreteModel, f: &Grid2D) -> OpResult<()> {
    f.on_rules(m.rules()).map_err(SpectralError::from)
}

/// `T1 f` or `T2 f`.
pub fn apply_partial(m: &DiscreteModel, ch: ChannelId, f: &Grid2D) -> OpResult<Grid2D> {
    on_grid(m, f)?;
    let coef = coefficients(m, ch, f);
    let (_, weights) = basis_and_weights(m, ch);
    Ok(synthesize(m, ch, &coef, |k, o| {
        Complex64::new(weights[k][o], 0.0)
    }))
}

/// `T f = T1 f + T2 f`.
pub fn apply_t(m: &DiscreteModel, f: &Grid2D) -> OpResult<Grid2D> {
    let mut out = apply_partial(m, ChannelId::One, f)?;
    out.axpy(ONE, &apply_partial(m, ChannelId::Two, f)?)?;
    Ok(out)
}

/// `P_k f` (channel 1) or `Q_k f` (channel 2), with `k` counted from 1.
pub fn project(m: &DiscreteModel, ch: ChannelId, k: usize, f: &Grid2D) -> OpResult<Grid2D> {
    let rank = m.rank(ch);
    if k == 0 || k > rank {
        return Err(SpectralError::IndexOutOfRange {
            channel: ch,
            index: k,
            rank,
        });
    }
    on_grid(m, f)?;
    let coef = coefficients(m, ch, f);
    Ok(synthesize(m, ch, &coef, |i, _| {
        if i + 1 == k {
            ONE
        } else {
            ZERO
        }
    }))
}

fn check_channel(m: &DiscreteModel, ch: ChannelId, lambda: Complex64, margin: f64) -> OpResult<()> {
    let d = m.channel_spectrum(ch).distance(lambda);
    if d <= margin {
        return Err(SpectralError::SpectrumHit {
            lambda,
            set: match ch {
                ChannelId::One => "σ(T1)",
                ChannelId::Two => "σ(T2)",
            },
            distance: d,
            margin,
        });
    }
    Ok(())
}

/// Reject λ within `margin` of `σ(T1) ∪ σ(T2)`.
pub fn check_resolvent_set(m: &DiscreteModel, lambda: Complex64, margin: f64) -> OpResult<()> {
    check_channel(m, ChannelId::One, lambda, margin)?;
    check_channel(m, ChannelId::Two, lambda, margin)
}

/// `(T_ch - λE)^{-1} f = -(1/λ) (f - Σ_k w_k/(w_k - λ) P_k f)` with the default
/// margin `1e-9 (1 + B)`.
pub fn resolvent_channel(
    m: &DiscreteModel,
    ch: ChannelId,
    lambda: Complex64,
    f: &Grid2D,
) -> OpResult<Grid2D> {
    resolvent_channel_with_margin(m, ch, lambda, f, m.resolvent_margin())
}

pub fn resolvent_channel_with_margin(
    m: &DiscreteModel,
    ch: ChannelId,
    lambda: Complex64,
    f: &Grid2D,
    margin: f64,
) -> OpResult<Grid2D> {
    check_channel(m, ch, lambda, margin)?;
    on_grid(m, f)?;
    let coef = coefficients(m, ch, f);
    let (_, weights) = basis_and_weights(m, ch);
    let sum = synthesize(m, ch, &coef, |k, o| {
        let w = weights[k][o];
        Complex64::new(w, 0.0) / (w - lambda)
    });
    let mut out = f.try_sub(&sum)?;
    let scale = -ONE / lambda;
    for v in out.values_mut() {
        *v *= scale;
    }
    Ok(out)
}

/// `S_ch(τ) f = Σ_k w_k/(1 - τ w_k) P_k f`.
pub fn apply_s(m: &DiscreteModel, ch: ChannelId, tau: Complex64, f: &Grid2D) -> OpResult<Grid2D> {
    if tau != ZERO {
        check_channel(m, ch, ONE / tau, m.resolvent_margin())?;
    }
    Ok(apply_s_unchecked(m, ch, tau, f))
}

fn apply_s_unchecked(m: &DiscreteModel, ch: ChannelId, tau: Complex64, f: &Grid2D) -> Grid2D {
    let coef = coefficients(m, ch, f);
    let (_, weights) = basis_and_weights(m, ch);
    synthesize(m, ch, &coef, |k, o| {
        let w = weights[k][o];
        Complex64::new(w, 0.0) / (ONE - tau * w)
    })
}

/// `(E - τ T_ch)^{-1} f = f + τ S_ch(τ) f`.
pub fn inverse_second_kind(
    m: &DiscreteModel,
    ch: ChannelId,
    tau: Complex64,
    f: &Grid2D,
) -> OpResult<Grid2D> {
    let s = apply_s(m, ch, tau, f)?;
    let mut out = f.clone();
    out.axpy(tau, &s)?;
    Ok(out)
}

/// `W1(τ) f` for channel 1, `W2(τ) f` for channel 2, by operator composition.
pub fn apply_w(m: &DiscreteModel, ch: ChannelId, tau: Complex64, f: &Grid2D) -> OpResult<Grid2D> {
    if tau == ZERO {
        return Err(SpectralError::SpectrumHit {
            lambda: Complex64::new(f64::INFINITY, 0.0),
            set: "τ = 0",
            distance: 0.0,
            margin: m.resolvent_margin(),
        });
    }
    check_resolvent_set(m, ONE / tau, m.resolvent_margin())?;
    on_grid(m, f)?;
    let other = ch.other();
    let t_other = apply_partial(m, other, f)?;
    let s = apply_s_unchecked(m, ch, tau, &t_other);
    inverse_second_kind(m, other, tau, &s)
}

/// `R_λ(T) g = (T - λE)^{-1} g` through the factorisation
/// `T - λE = -λ (E - T1/λ)(E - T2/λ)(E - W1(1/λ)/λ²)`.
///
/// The finite-rank factor is inverted through the `mn × mn` system of
/// [`FiniteRankSystem::solve_second_kind`].
pub fn resolvent_t(m: &DiscreteModel, lambda: Complex64, g: &Grid2D) -> OpResult<Grid2D> {
    if lambda == ZERO {
        return Err(SpectralError::SpectrumHit {
            lambda,
            set: "{0}",
            distance: 0.0,
            margin: m.resolvent_margin(),
        });
    }
    let tau = ONE / lambda;
    let f = second_kind_solution(m, tau, g, None)?;
    Ok(f.scale(-tau))
}

/// Unique solution of `f - τ T f = g` for `1/τ` in the resolvent set of both
/// channels and away from the discrete spectrum. `ordering` permutes the
/// finite-rank unknowns before the linear solve.
pub(crate) fn second_kind_solution(
    m: &DiscreteModel,
    tau: Complex64,
    g: &Grid2D,
    ordering: Option<&[usize]>,
) -> OpResult<Grid2D> {
    let lambda = ONE / tau;
    check_resolvent_set(m, lambda, m.resolvent_margin())?;
    on_grid(m, g)?;
    let u1 = inverse_second_kind(m, ChannelId::One, tau, g)?;
    let u2 = inverse_second_kind(m, ChannelId::Two, tau, &u1)?;
    let sys = FiniteRankSystem::new_unchecked(m, lambda);
    let rank_tol = m.model().search.rank_tol;
    let ratio = sys.system_singular_ratio();
    if ratio <= rank_tol {
        return Err(SpectralError::EigenvalueHit { lambda, ratio });
    }
    let c = sys.solve_second_kind(&u2, ordering)?;
    let mut f = u2;
    for (ci, fi) in c.iter().zip(sys.f_functions()) {
        f.axpy(tau * ci, fi)?;
    }
    Ok(f)
}

/// Orthonormal grid functions annihilated by `T_ch`: products of a normalised
/// function of the non-integrated variable with functions of the integrated
/// variable that are orthogonal to the channel basis on the grid.
pub fn zero_eigen_witnesses(m: &DiscreteModel, ch: ChannelId, count: usize) -> Vec<Grid2D> {
    let (basis, _) = basis_and_weights(m, ch);
    let (rule, other_rule) = match ch {
        ChannelId::One => (&m.rules().x, &m.rules().y),
        ChannelId::Two => (&m.rules().y, &m.rules().x),
    };
    let w = rule.weights();
    let dot =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(w).map(|((a, b), w)| a * b * w).sum() };
    let (lo, hi) = rule.interval();
    let mut family: Vec<Vec<f64>> = Vec::new();
    let mut ortho: Vec<Vec<f64>> = basis.to_vec();
    // Gram-Schmidt on monomials of the centred variable, twice for stability.
    let mut degree: usize = 0;
    while family.len() < count && degree < rule.len() {
        let mut v: Vec<f64> = rule
            .nodes()
            .iter()
            .map(|&t| ((2.0 * t - lo - hi) / (hi - lo)).powi(degree as i32))
            .collect();
        degree += 1;
        for _ in 0..2 {
            for u in &ortho {
                let nu = dot(u, u);
                let c = dot(&v, u) / nu;
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
        }
        let n = dot(&v, &v).sqrt();
        if n < 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n);
        ortho.push(v.clone());
        family.push(v);
    }
    let (olo, ohi) = other_rule.interval();
    let other_norm = 1.0 / (ohi - olo).sqrt();
    family
        .into_iter()
        .map(|g| {
            let mut out = Grid2D::zeros(m.rules().clone());
            let ny = m.ny();
            for p in 0..m.nx() {
                for q in 0..ny {
                    let v = match ch {
                        ChannelId::One => g[p] * other_norm,
                        ChannelId::Two => other_norm * g[q],
                    };
                    out.values_mut()[p * ny + q] = Complex64::new(v, 0.0);
                }
            }
            out
        })
        .collect()
}
