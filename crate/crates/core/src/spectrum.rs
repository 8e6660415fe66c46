//! Essential and discrete spectrum of `T = T1 + T2`.
//!
//! For `λ` off `σ(T1) ∪ σ(T2)`, with `r_j = h_j/(λ - h_j)` and
//! `a_i = p_i/(λ - p_i)`, the pairs `ω = (k, j)` (`k ≤ m` over channel 2,
//! `j ≤ n` over channel 1, flattened as `(k-1)n + (j-1)`) index
//!
//! ```text
//! F_ω(x,y) = φ_j(x) [ψ_k(y) r_j(y) + Σ_i a_i(x) ψ_i(y) c_kji],   c_kji = ∫ r_j ψ_k ψ_i
//! B_ω(x,y) = p_k(x) φ_j(x) ψ_k(y)
//! Π_il     = ∫∫ F_ωi B_ωl,   Δ(λ) = det(Π(λ) - λI)
//! ```
//!
//! and `W1(1/λ) f = λ Σ_ω F_ω (B_ω, f)`. An eigenfunction `f = W1 f / λ²`
//! therefore has the form `f = (1/λ) Σ A_ω F_ω` with `A_ω = (B_ω, f)`, and
//! the coefficients satisfy `A = (1/λ) Πᵀ A`. The nullity of `Πᵀ - λI`
//! equals that of `Π - λI`, so roots of `Δ` are exactly the parameters with
//! nontrivial solutions.

use std::borrow::Cow;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

pub use crate::essran::{essential_range, EssRange, SpectralPoint, SpectralSet};

use crate::error::SpectralError;
use crate::expr::DomainError;
use crate::model::{ChannelId, DiscreteModel, PioModel};
use crate::operators::{apply_partial, check_resolvent_set};
use crate::quadrature::Grid2D;

pub type SpecResult<T> = Result<T, SpectralError>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Label for the eigenvalue counts reported by the search.
pub const MULTIPLICITY_KIND: &str = "algebraic-system multiplicity";

/// Roots closer than this are reported once.
pub const DEDUP_TOL: f64 = 1e-8;

/// Which homogeneous reduction produces `Π`: path 1 builds it from channel 1
/// against channel 2, path 2 from the channel-swapped model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Path {
    #[default]
    One,
    Two,
}

impl Path {
    pub fn from_index(i: u8) -> Option<Path> {
        match i {
            1 => Some(Path::One),
            2 => Some(Path::Two),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Path::One => 1,
            Path::Two => 2,
        }
    }
}

/// Serialised as `1` or `2`.
impl Serialize for Path {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

fn model_for_path(m: &DiscreteModel, path: Path) -> Cow<'_, DiscreteModel> {
    match path {
        Path::One => Cow::Borrowed(m),
        Path::Two => Cow::Owned(m.swapped()),
    }
}

pub fn sigma_channel(m: &DiscreteModel, ch: ChannelId) -> SpectralSet {
    m.channel_spectrum(ch).clone()
}

/// `{0} ∪ ⋃ Essran(h_k) ∪ ⋃ Essran(p_j)`.
pub fn sigma_ess(m: &DiscreteModel) -> SpectralSet {
    m.channel_spectrum(ChannelId::One)
        .union(m.channel_spectrum(ChannelId::Two))
}

/// One `F_{k,j}(·,·;λ)`, evaluable anywhere on the rectangle.
#[derive(Debug, Clone)]
pub struct FFunction<'a> {
    model: &'a PioModel,
    k: usize,
    j: usize,
    lambda: Complex64,
    /// `c_kji` for `i = 1..m`.
    c: Vec<Complex64>,
}

impl FFunction<'_> {
    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn inner_integrals(&self) -> &[Complex64] {
        &self.c
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<Complex64, DomainError> {
        let ch1 = &self.model.channel1;
        let ch2 = &self.model.channel2;
        let h = ch1.weights[self.j].eval(y)?;
        let mut acc = ch2.basis[self.k].eval(y)? * h / (self.lambda - h);
        for (i, c) in self.c.iter().enumerate() {
            let p = ch2.weights[i].eval(x)?;
            acc += c * ch2.basis[i].eval(y)? * p / (self.lambda - p);
        }
        Ok(acc * ch1.basis[self.j].eval(x)?)
    }

    pub fn on_grid(&self, m: &DiscreteModel) -> Result<Grid2D, DomainError> {
        Grid2D::try_from_fn(m.rules().clone(), |x, y| self.eval(x, y))
    }
}

/// Per-`λ` samples `r_j(y_q)` and `a_i(x_p)`.
struct Resolvents {
    r: Vec<Vec<Complex64>>,
    a: Vec<Vec<Complex64>>,
}

impl Resolvents {
    fn new(m: &DiscreteModel, lambda: Complex64) -> Resolvents {
        let frac = |rows: &[Vec<f64>]| -> Vec<Vec<Complex64>> {
            rows.iter()
                .map(|w| {
                    w.iter()
                        .map(|&v| Complex64::new(v, 0.0) / (lambda - v))
                        .collect()
                })
                .collect()
        };
        Resolvents {
            r: frac(&m.h),
            a: frac(&m.p),
        }
    }
}

/// `c[k][j][i] = ∫ r_j ψ_k ψ_i dy` by the y-rule.
fn inner_integrals(m: &DiscreteModel, res: &Resolvents) -> Vec<Vec<Vec<Complex64>>> {
    let wy = m.rules().y.weights();
    (0..m.m())
        .map(|k| {
            (0..m.n())
                .map(|j| {
                    (0..m.m())
                        .map(|i| {
                            (0..wy.len())
                                .map(|q| res.r[j][q] * (wy[q] * m.psi[k][q] * m.psi[i][q]))
                                .sum()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `F_{k,j}` (1-based, `k ≤ m`, `j ≤ n`) for the model behind `m`.
pub fn build_f<'a>(
    m: &'a DiscreteModel,
    k: usize,
    j: usize,
    lambda: Complex64,
) -> SpecResult<FFunction<'a>> {
    if k == 0 || k > m.m() {
        return Err(SpectralError::IndexOutOfRange {
            channel: ChannelId::Two,
            index: k,
            rank: m.m(),
        });
    }
    if j == 0 || j > m.n() {
        return Err(SpectralError::IndexOutOfRange {
            channel: ChannelId::One,
            index: j,
            rank: m.n(),
        });
    }
    check_resolvent_set(m, lambda, m.resolvent_margin())?;
    let res = Resolvents::new(m, lambda);
    let c = inner_integrals(m, &res);
    Ok(FFunction {
        model: m.model(),
        k: k - 1,
        j: j - 1,
        lambda,
        c: c[k - 1][j - 1].clone(),
    })
}

/// The `mn × mn` matrix `Π(λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiMatrix {
    pub lambda: Complex64,
    pub path: Path,
    pub entries: DMatrix<Complex64>,
    /// `(k, j)` pairs, 1-based, in flattening order.
    pub index_map: Vec<(usize, usize)>,
}

fn index_map(m: usize, n: usize) -> Vec<(usize, usize)> {
    (1..=m).flat_map(|k| (1..=n).map(move |j| (k, j))).collect()
}

/// `λ`-independent parts of the separable evaluation of `Π`.
///
/// Every integrand of `Π_il` is a product of a function of `x` and a
/// function of `y`, so the tensor quadrature of `∫∫ F B` splits into 1D sums:
///
/// ```text
/// Π[(k,j),(k',j')] = X1[j,j',k'] c[k,j,k'] + Σ_i X2[i,j,j',k'] c[k,j,i] Y2[i,k']
/// X1 = ∫ φ_j φ_j' p_k' dx,  X2 = ∫ φ_j φ_j' p_k' a_i dx,  Y2 = ∫ ψ_i ψ_k' dy
/// ```
struct PiAssembler<'a> {
    m: &'a DiscreteModel,
    /// `wx φ_j φ_j' p_k'` at each x-node, indexed `[(j * n + j') * mm + k'][p]`.
    xg: Vec<Vec<f64>>,
    x1: Vec<f64>,
    /// `[i * mm + k']`.
    y2: Vec<f64>,
}

impl<'a> PiAssembler<'a> {
    fn new(m: &'a DiscreteModel) -> Self {
        let (n, mm) = (m.n(), m.m());
        let wx = m.rules().x.weights();
        let wy = m.rules().y.weights();
        let mut xg = Vec::with_capacity(n * n * mm);
        for j in 0..n {
            for jp in 0..n {
                for kp in 0..mm {
                    xg.push(
                        (0..wx.len())
                            .map(|p| wx[p] * m.phi[j][p] * m.phi[jp][p] * m.p[kp][p])
                            .collect::<Vec<f64>>(),
                    );
                }
            }
        }
        let x1 = xg.iter().map(|g| g.iter().sum()).collect();
        let mut y2 = Vec::with_capacity(mm * mm);
        for i in 0..mm {
            for kp in 0..mm {
                y2.push(
                    (0..wy.len())
                        .map(|q| wy[q] * m.psi[i][q] * m.psi[kp][q])
                        .sum(),
                );
            }
        }
        PiAssembler { m, xg, x1, y2 }
    }

    fn eval(&self, lambda: Complex64) -> DMatrix<Complex64> {
        let m = self.m;
        let (n, mm) = (m.n(), m.m());
        let res = Resolvents::new(m, lambda);
        let c = inner_integrals(m, &res);
        // x2[i][(j*n + j')*mm + k']
        let x2: Vec<Vec<Complex64>> = (0..mm)
            .map(|i| {
                self.xg
                    .iter()
                    .map(|g| g.iter().zip(&res.a[i]).map(|(g, a)| a * *g).sum())
                    .collect()
            })
            .collect();
        let dim = mm * n;
        let mut pi = DMatrix::from_element(dim, dim, ZERO);
        for k in 0..mm {
            for j in 0..n {
                let row = k * n + j;
                for kp in 0..mm {
                    for jp in 0..n {
                        let g = (j * n + jp) * mm + kp;
                        let mut v = c[k][j][kp] * self.x1[g];
                        for i in 0..mm {
                            v += x2[i][g] * c[k][j][i] * self.y2[i * mm + kp];
                        }
                        pi[(row, kp * n + jp)] = v;
                    }
                }
            }
        }
        pi
    }
}

/// `Π(λ)` for the given path.
pub fn pi_matrix(m: &DiscreteModel, lambda: Complex64, path: Path) -> SpecResult<PiMatrix> {
    check_resolvent_set(m, lambda, m.resolvent_margin())?;
    let target = model_for_path(m, path);
    let entries = PiAssembler::new(&target).eval(lambda);
    Ok(PiMatrix {
        lambda,
        path,
        entries,
        index_map: index_map(target.m(), target.n()),
    })
}

/// `Δ(λ) = det(Π(λ) - λI)` by LU with partial pivoting.
pub fn delta(m: &DiscreteModel, lambda: Complex64, path: Path) -> SpecResult<Complex64> {
    let pi = pi_matrix(m, lambda, path)?;
    Ok(shifted(&pi.entries, lambda).lu().determinant())
}

fn shifted(pi: &DMatrix<Complex64>, lambda: Complex64) -> DMatrix<Complex64> {
    let mut a = pi.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= lambda;
    }
    a
}

/// Singular values of `Π - λI`, descending, with the scale
/// `max(‖Π‖₂, |λ|)` that the rank tolerance is measured against.
fn shifted_singular_values(pi: &DMatrix<Complex64>, lambda: Complex64) -> (Vec<f64>, f64) {
    let pi_norm = if pi.is_empty() {
        0.0
    } else {
        pi.clone().singular_values().max()
    };
    let mut sv: Vec<f64> = shifted(pi, lambda)
        .singular_values()
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    (sv, pi_norm.max(lambda.norm()).max(f64::MIN_POSITIVE))
}

fn rank_deficiency(sv: &[f64], scale: f64, rank_tol: f64) -> usize {
    sv.iter().filter(|&&s| s <= rank_tol * scale).count()
}

/// Relative smallest singular value of `Π(λ) - λI`.
pub fn singular_ratio(m: &DiscreteModel, lambda: Complex64, path: Path) -> SpecResult<f64> {
    let pi = pi_matrix(m, lambda, path)?;
    let (sv, scale) = shifted_singular_values(&pi.entries, lambda);
    Ok(sv.last().copied().unwrap_or(0.0) / scale)
}

/// The `F` and `B` functions on the grid together with `Π` assembled from
/// their grid integrals.
#[derive(Debug, Clone)]
pub struct FiniteRankSystem {
    lambda: Complex64,
    f: Vec<Grid2D>,
    b: Vec<Grid2D>,
    pi: DMatrix<Complex64>,
}

impl FiniteRankSystem {
    pub fn new(m: &DiscreteModel, lambda: Complex64) -> SpecResult<FiniteRankSystem> {
        check_resolvent_set(m, lambda, m.resolvent_margin())?;
        Ok(Self::new_unchecked(m, lambda))
    }

    pub(crate) fn new_unchecked(m: &DiscreteModel, lambda: Complex64) -> FiniteRankSystem {
        let (n, mm, nx, ny) = (m.n(), m.m(), m.nx(), m.ny());
        let res = Resolvents::new(m, lambda);
        let c = inner_integrals(m, &res);
        let rules = m.rules();
        let mut f = Vec::with_capacity(mm * n);
        let mut b = Vec::with_capacity(mm * n);
        for k in 0..mm {
            for j in 0..n {
                let mut fv = Vec::with_capacity(nx * ny);
                let mut bv = Vec::with_capacity(nx * ny);
                for p in 0..nx {
                    for q in 0..ny {
                        let mut s = m.psi[k][q] * res.r[j][q];
                        for i in 0..mm {
                            s += res.a[i][p] * m.psi[i][q] * c[k][j][i];
                        }
                        fv.push(s * m.phi[j][p]);
                        bv.push(Complex64::new(m.p[k][p] * m.phi[j][p] * m.psi[k][q], 0.0));
                    }
                }
                f.push(Grid2D::from_values(rules.clone(), fv));
                b.push(Grid2D::from_values(rules.clone(), bv));
            }
        }
        let dim = mm * n;
        let pi = DMatrix::from_fn(dim, dim, |i, l| {
            f[i].bilinear(&b[l])
                .expect("grids built from the same rules")
        });
        FiniteRankSystem { lambda, f, b, pi }
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn f_functions(&self) -> &[Grid2D] {
        &self.f
    }

    pub fn b_functions(&self) -> &[Grid2D] {
        &self.b
    }

    pub fn pi(&self) -> &DMatrix<Complex64> {
        &self.pi
    }

    /// `(B_ω, f)` for every `ω`.
    pub fn moments(&self, g: &Grid2D) -> SpecResult<Vec<Complex64>> {
        self.b
            .iter()
            .map(|b| b.bilinear(g).map_err(SpectralError::from))
            .collect()
    }

    /// Smallest singular value of `Π - λI` relative to `max(‖Π‖, |λ|)`.
    ///
    /// `I - τΠᵀ = -τ (Πᵀ - λI)` for `τ = 1/λ`, so this also measures how close
    /// the second-kind system below is to singular.
    pub fn system_singular_ratio(&self) -> f64 {
        let (sv, scale) = shifted_singular_values(&self.pi, self.lambda);
        sv.last().copied().unwrap_or(0.0) / scale
    }

    /// Coefficients `c` with `(I - τΠᵀ) c = d`, `d_ω = (B_ω, u)`, `τ = 1/λ`.
    ///
    /// Expanding `(E - τ² W1(τ)) f = u` with `τ² W1(τ) f = τ Σ F_ω (B_ω, f)`
    /// gives `f = u + τ Σ c_ω F_ω` where `c_ω = (B_ω, f)`; pairing with `B_l`
    /// yields the system. Its determinant is
    /// `det(I - τΠᵀ) = (-τ)^{mn} det(Π - λI) = (-1/λ)^{mn} Δ(λ)`, so it is
    /// uniquely solvable exactly when `Δ(λ) ≠ 0`.
    ///
    /// `ordering` permutes the unknowns before factorisation.
    pub fn solve_second_kind(
        &self,
        u: &Grid2D,
        ordering: Option<&[usize]>,
    ) -> SpecResult<Vec<Complex64>> {
        let dim = self.dim();
        let tau = Complex64::new(1.0, 0.0) / self.lambda;
        let d = self.moments(u)?;
        let perm: Vec<usize> = match ordering {
            Some(o) => {
                assert_eq!(o.len(), dim, "ordering must permute all unknowns");
                o.to_vec()
            }
            None => (0..dim).collect(),
        };
        // A[r, s] = (I - τΠᵀ)[perm r, perm s]
        let a = DMatrix::from_fn(dim, dim, |r, s| {
            let (i, l) = (perm[r], perm[s]);
            let id = if i == l { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - tau * self.pi[(l, i)]
        });
        let rhs = DVector::from_fn(dim, |r, _| d[perm[r]]);
        let sol = a.lu().solve(&rhs).ok_or(SpectralError::EigenvalueHit {
            lambda: self.lambda,
            ratio: 0.0,
        })?;
        let mut c = vec![ZERO; dim];
        for (r, &i) in perm.iter().enumerate() {
            c[i] = sol[r];
        }
        Ok(c)
    }
}

/// `W1(τ) f = λ Σ_ω F_ω (B_ω, f)` with `λ = 1/τ`.
pub fn apply_w1_kernel(m: &DiscreteModel, tau: Complex64, f: &Grid2D) -> SpecResult<Grid2D> {
    let lambda = Complex64::new(1.0, 0.0) / tau;
    let sys = FiniteRankSystem::new(m, lambda)?;
    let mut out = Grid2D::zeros(m.rules().clone());
    for (fw, a) in sys.f_functions().iter().zip(sys.moments(f)?) {
        out.axpy(lambda * a, fw)?;
    }
    Ok(out)
}

/// Root-search settings resolved against a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchOptions {
    pub margin: f64,
    pub scan_points: usize,
    pub root_tol: f64,
    pub rank_tol: f64,
    pub path: Path,
}

impl SearchOptions {
    pub fn for_model(m: &DiscreteModel) -> SearchOptions {
        let s = &m.model().search;
        SearchOptions {
            margin: m.search_margin(),
            scan_points: s.scan_points,
            root_tol: s.root_tol,
            rank_tol: s.rank_tol,
            path: Path::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteEigenvalue {
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Serialised as `[λ, multiplicity]`.
impl Serialize for DiscreteEigenvalue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.lambda, self.multiplicity).serialize(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteSpectrum {
    pub eigenvalues: Vec<DiscreteEigenvalue>,
    /// Sub-intervals of the search region that were scanned.
    pub gaps: Vec<(f64, f64)>,
    /// Margin neighbourhoods of the essential set: not searched.
    pub unresolved_bands: Vec<(f64, f64)>,
    /// Largest spacing between scan samples.
    pub scan_step: f64,
}

type Intervals = Vec<(f64, f64)>;

/// `(gaps, bands)`.
fn search_region(ess: &SpectralSet, bound: f64, margin: f64) -> (Intervals, Intervals) {
    let (lo, hi) = (-bound - 1.0, bound + 1.0);
    let bands: Vec<(f64, f64)> = ess
        .neighbourhood(margin)
        .into_iter()
        .filter(|&(a, b)| b >= lo && a <= hi)
        .map(|(a, b)| (a.max(lo), b.min(hi)))
        .collect();
    let mut gaps = Vec::new();
    let mut cursor = lo;
    for &(a, b) in &bands {
        if a > cursor {
            gaps.push((cursor, a));
        }
        cursor = cursor.max(b);
    }
    if cursor < hi {
        gaps.push((cursor, hi));
    }
    (gaps, bands)
}

struct Evaluator<'a> {
    m: &'a DiscreteModel,
    asm: PiAssembler<'a>,
    rank_tol: f64,
}

impl Evaluator<'_> {
    fn pi(&self, lambda: f64) -> DMatrix<Complex64> {
        self.asm.eval(Complex64::new(lambda, 0.0))
    }

    fn delta(&self, lambda: f64) -> f64 {
        let l = Complex64::new(lambda, 0.0);
        shifted(&self.pi(lambda), l).lu().determinant().re
    }

    fn ratio(&self, lambda: f64) -> f64 {
        let (sv, scale) = shifted_singular_values(&self.pi(lambda), Complex64::new(lambda, 0.0));
        sv.last().copied().unwrap_or(0.0) / scale
    }

    fn multiplicity(&self, lambda: f64) -> usize {
        let (sv, scale) = shifted_singular_values(&self.pi(lambda), Complex64::new(lambda, 0.0));
        rank_deficiency(&sv, scale, self.rank_tol)
    }

    fn bisect(&self, mut a: f64, mut b: f64, mut da: f64, tol: f64) -> f64 {
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            let mid = 0.5 * (a + b);
            let dm = self.delta(mid);
            if dm == 0.0 {
                return mid;
            }
            if (dm < 0.0) == (da < 0.0) {
                a = mid;
                da = dm;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Golden-section minimisation of the relative singular value.
    fn golden(&self, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let (mut fc, mut fd) = (self.ratio(c), self.ratio(d));
        for _ in 0..200 {
            if b - a <= tol {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = self.ratio(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = self.ratio(d);
            }
        }
        let x = 0.5 * (a + b);
        (x, self.ratio(x))
    }
}

/// Real roots of `Δ` outside the margin neighbourhood of the essential set.
///
/// Each gap gets `scan_points` equispaced samples. Sign changes are bisected
/// to `root_tol`; interior local minima of `|Δ|` without a sign change are
/// refined by golden-section on the relative smallest singular value of
/// `Π - λI` and accepted when it drops below `rank_tol`. Roots between scan
/// samples that neither change sign nor form a sampled local minimum are
/// not detected.
pub fn discrete_spectrum(m: &DiscreteModel, opts: &SearchOptions) -> DiscreteSpectrum {
    let target = model_for_path(m, opts.path);
    let ev = Evaluator {
        m: &target,
        asm: PiAssembler::new(&target),
        rank_tol: opts.rank_tol,
    };
    let ess = sigma_ess(ev.m);
    let (gaps, bands) = search_region(&ess, ev.m.norm_bound(), opts.margin);
    let npts = opts.scan_points.max(3);
    let mut roots: Vec<DiscreteEigenvalue> = Vec::new();
    let mut step: f64 = 0.0;
    for &(a, b) in &gaps {
        let h = (b - a) / (npts - 1) as f64;
        step = step.max(h);
        let lam: Vec<f64> = (0..npts)
            .map(|i| if i == npts - 1 { b } else { a + h * i as f64 })
            .collect();
        let d: Vec<f64> = lam.par_iter().map(|&l| ev.delta(l)).collect();
        let mut found: Vec<f64> = (0..npts)
            .into_par_iter()
            .filter_map(|i| {
                if d[i] == 0.0 {
                    return Some(lam[i]);
                }
                if i + 1 < npts && d[i + 1] != 0.0 && (d[i] < 0.0) != (d[i + 1] < 0.0) {
                    return Some(ev.bisect(lam[i], lam[i + 1], d[i], opts.root_tol));
                }
                None
            })
            .collect();
        let tangential: Vec<f64> = (1..npts - 1)
            .into_par_iter()
            .filter_map(|i| {
                let (l, c, r) = (d[i - 1].abs(), d[i].abs(), d[i + 1].abs());
                let same_sign =
                    (d[i - 1] < 0.0) == (d[i] < 0.0) && (d[i] < 0.0) == (d[i + 1] < 0.0);
                if !(c < l && c <= r && same_sign && d[i] != 0.0) {
                    return None;
                }
                let (x, ratio) = ev.golden(lam[i - 1], lam[i + 1], opts.root_tol);
                (ratio <= opts.rank_tol).then_some(x)
            })
            .collect();
        found.extend(tangential);
        roots.extend(found.into_iter().map(|l| DiscreteEigenvalue {
            lambda: l,
            multiplicity: ev.multiplicity(l).max(1),
        }));
    }
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut eigenvalues: Vec<DiscreteEigenvalue> = Vec::with_capacity(roots.len());
    for r in roots {
        match eigenvalues.last() {
            Some(prev) if (r.lambda - prev.lambda).abs() <= DEDUP_TOL => {}
            _ => eigenvalues.push(r),
        }
    }
    DiscreteSpectrum {
        eigenvalues,
        gaps,
        unresolved_bands: bands,
        scan_step: step,
    }
}

fn gram_schmidt(funcs: Vec<Grid2D>, tol: f64) -> SpecResult<Vec<Grid2D>> {
    let mut out: Vec<Grid2D> = Vec::with_capacity(funcs.len());
    for mut f in funcs {
        for _ in 0..2 {
            for u in &out {
                let c = f.inner(u)?;
                f.axpy(-c, u)?;
            }
        }
        let n = f.norm();
        if n > tol {
            out.push(f.scale_real(1.0 / n));
        }
    }
    Ok(out)
}

/// Orthonormal eigenfunctions of `T` for a discrete eigenvalue `λ0`.
///
/// The coefficient vectors span the nullspace of `Πᵀ - λ0 I`, found from the
/// singular values below `rank_tol · max(‖Π‖, |λ0|)`; each is mapped to
/// `(1/λ0) Σ A_ω F_ω`.
pub fn eigenfunctions_t(m: &DiscreteModel, lambda0: f64) -> SpecResult<Vec<Grid2D>> {
    let lambda = Complex64::new(lambda0, 0.0);
    let sys = FiniteRankSystem::new(m, lambda)?;
    let rank_tol = m.model().search.rank_tol;
    let at = sys.pi().transpose();
    let (sv_sorted, scale) = shifted_singular_values(&at, lambda);
    let nullity = rank_deficiency(&sv_sorted, scale, rank_tol);
    if nullity == 0 {
        return Err(SpectralError::NotAnEigenvalue {
            lambda: lambda0,
            ratio: sv_sorted.last().copied().unwrap_or(0.0) / scale,
        });
    }
    let svd = shifted(&at, lambda).svd(false, true);
    let v_t = svd.v_t.ok_or(SpectralError::ConvergenceFailure)?;
    let mut funcs = Vec::with_capacity(nullity);
    for (row, &s) in svd.singular_values.iter().enumerate() {
        if s > rank_tol * scale {
            continue;
        }
        let mut f = Grid2D::zeros(m.rules().clone());
        for (w, fw) in sys.f_functions().iter().enumerate() {
            f.axpy(v_t[(row, w)].conj() / lambda, fw)?;
        }
        funcs.push(f);
    }
    gram_schmidt(funcs, 1e-300)
}

fn channel_axis(m: &DiscreteModel, ch: ChannelId) -> (&[Vec<f64>], &[f64]) {
    match ch {
        ChannelId::One => (&m.phi, m.rules().y.nodes()),
        ChannelId::Two => (&m.psi, m.rules().x.nodes()),
    }
}

/// `φ_j0(x) g(y)` for channel 1 or `g(x) ψ_j0(y)` for channel 2, where `g`
/// is sampled on the weight axis.
fn separable(m: &DiscreteModel, ch: ChannelId, j0: usize, g: &[f64]) -> Grid2D {
    let (basis, _) = channel_axis(m, ch);
    let b = &basis[j0];
    let ny = m.ny();
    let mut out = Grid2D::zeros(m.rules().clone());
    for p in 0..m.nx() {
        for q in 0..ny {
            let v = match ch {
                ChannelId::One => b[p] * g[q],
                ChannelId::Two => g[p] * b[q],
            };
            out.values_mut()[p * ny + q] = Complex64::new(v, 0.0);
        }
    }
    out
}

fn check_weight_index(m: &DiscreteModel, ch: ChannelId, j0: usize) -> SpecResult<()> {
    let rank = m.rank(ch);
    if j0 == 0 || j0 > rank {
        return Err(SpectralError::IndexOutOfRange {
            channel: ch,
            index: j0,
            rank,
        });
    }
    Ok(())
}

/// `φ_j0(x) χ_D(y)/√μ(D)` with `D` the level set `{h_j0 = λ0}` of positive
/// measure (mirrored for channel 2). `j0` is 1-based.
pub fn atom_eigenfunction(
    m: &DiscreteModel,
    ch: ChannelId,
    j0: usize,
    lambda0: f64,
) -> SpecResult<Grid2D> {
    check_weight_index(m, ch, j0)?;
    let w = &m.model().channel(ch).weights[j0 - 1];
    let (lo, hi) = m.model().weight_interval(ch);
    let no_atom = SpectralError::NoAtom {
        channel: ch,
        index: j0,
        value: lambda0,
    };
    let mut cuts = vec![lo];
    cuts.extend(w.breakpoints_in(lo, hi));
    cuts.push(hi);
    let mut pieces = Vec::new();
    for c in cuts.windows(2) {
        let (a, b) = (c[0], c[1]);
        let mid = 0.5 * (a + b);
        if !w.is_constant_on(a, b).map_err(|_| no_atom.clone())? {
            continue;
        }
        let v = w.eval_on_piece(mid, mid).map_err(|_| no_atom.clone())?;
        if (v - lambda0).abs() <= 1e-12 * (1.0 + v.abs()) {
            pieces.push((a, b));
        }
    }
    let measure: f64 = pieces.iter().map(|(a, b)| b - a).sum();
    if measure <= 0.0 {
        return Err(no_atom);
    }
    let (_, nodes) = channel_axis(m, ch);
    let g: Vec<f64> = nodes
        .iter()
        .map(|&t| {
            if pieces.iter().any(|&(a, b)| a < t && t < b) {
                1.0 / measure.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(separable(m, ch, j0 - 1, &g))
}

/// Singular sequence element `φ_j0(x) χ_V(y)/√μ(V)` with
/// `V = {y : |h_j0(y) - λ0| < 1/p}` taken over grid nodes and measured by the
/// quadrature weights. `None` when no node falls in `V`.
pub fn weyl_function(
    m: &DiscreteModel,
    ch: ChannelId,
    j0: usize,
    lambda0: f64,
    p: usize,
) -> SpecResult<Option<Grid2D>> {
    check_weight_index(m, ch, j0)?;
    let (weights, rule) = match ch {
        ChannelId::One => (&m.h, &m.rules().y),
        ChannelId::Two => (&m.p, &m.rules().x),
    };
    let w = &weights[j0 - 1];
    let inside: Vec<bool> = w
        .iter()
        .map(|v| (v - lambda0).abs() < 1.0 / p as f64)
        .collect();
    let mu: f64 = rule
        .weights()
        .iter()
        .zip(&inside)
        .filter(|(_, &i)| i)
        .map(|(w, _)| w)
        .sum();
    if mu <= 0.0 {
        return Ok(None);
    }
    let g: Vec<f64> = inside
        .iter()
        .map(|&i| if i { 1.0 / mu.sqrt() } else { 0.0 })
        .collect();
    Ok(Some(separable(m, ch, j0 - 1, &g)))
}

/// `‖(T_ch - λ0) f‖` for a grid function.
pub fn channel_residual(
    m: &DiscreteModel,
    ch: ChannelId,
    lambda0: f64,
    f: &Grid2D,
) -> SpecResult<f64> {
    let mut r = apply_partial(m, ch, f)?;
    r.axpy(Complex64::new(-lambda0, 0.0), f)?;
    Ok(r.norm())
}

/// Relative Cauchy–Riemann residual `|∂_y Δ - i ∂_x Δ| / |∂_x Δ|` at `z` by
/// central differences with step `h`.
pub fn cauchy_riemann_residual(
    m: &DiscreteModel,
    z: Complex64,
    h: f64,
    path: Path,
) -> SpecResult<f64> {
    let d = |w: Complex64| delta(m, w, path);
    let dx = (d(z + h)? - d(z - h)?) / (2.0 * h);
    let i = Complex64::new(0.0, 1.0);
    let dy = (d(z + i * h)? - d(z - i * h)?) / (2.0 * h);
    Ok((dy - i * dx).norm() / dx.norm().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub lambda: f64,
    /// `None` when `λ` is within the resolvent margin of `σ(T1) ∪ σ(T2)`.
    pub delta: Option<Complex64>,
}

/// `Δ` on `samples` equispaced points of `[lmin, lmax]`, endpoints included.
pub fn delta_trace(
    m: &DiscreteModel,
    lmin: f64,
    lmax: f64,
    samples: usize,
    path: Path,
) -> Vec<TraceRow> {
    let target = model_for_path(m, path);
    let asm = PiAssembler::new(&target);
    let margin = m.resolvent_margin();
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let lambda = match samples {
                1 => lmin,
                _ if i == samples - 1 => lmax,
                _ => lmin + (lmax - lmin) * i as f64 / (samples - 1) as f64,
            };
            let l = Complex64::new(lambda, 0.0);
            let delta = check_resolvent_set(m, l, margin)
                .ok()
                .map(|_| shifted(&asm.eval(l), l).lu().determinant());
            TraceRow { lambda, delta }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub essential: SpectralSet,
    pub channel1: SpectralSet,
    pub channel2: SpectralSet,
    pub discrete: Vec<DiscreteEigenvalue>,
    pub multiplicity_kind: &'static str,
    pub unresolved_bands: Vec<(f64, f64)>,
    pub scan_step: f64,
    pub bound: f64,
    pub settings: SearchOptions,
}

/// Essential part, discrete eigenvalues and search metadata.
pub fn sigma_full(m: &DiscreteModel, opts: &SearchOptions) -> SpectrumReport {
    let disc = discrete_spectrum(m, opts);
    SpectrumReport {
        essential: sigma_ess(m),
        channel1: sigma_channel(m, ChannelId::One),
        channel2: sigma_channel(m, ChannelId::Two),
        discrete: disc.eigenvalues,
        multiplicity_kind: MULTIPLICITY_KIND,
        unresolved_bands: disc.unresolved_bands,
        scan_step: disc.scan_step,
        bound: m.norm_bound(),
        settings: *opts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::operators::apply_t;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn dm(m: PioModel) -> DiscreteModel {
        DiscreteModel::new(m).unwrap()
    }

    fn rich() -> DiscreteModel {
        dm(PioModel::from_strings(
            (0.0, 1.0),
            (-1.0, 1.0),
            (
                &["legendre(0)", "legendre(2)"],
                &["t + 2", "piecewise([-1,0]:-1; [0,1]:t^2)"],
            ),
            (
                &["legendre(1)", "trig(3)", "legendre(0)"],
                &["sin(t)", "1.5", "t - 0.5"],
            ),
        )
        .unwrap())
    }

    /// `λ (λ ln(λ/(λ-1)) - 1)²`: the 1×1 `Π` of fixture B.
    fn pi_b(l: f64) -> f64 {
        let s = l * (l / (l - 1.0)).ln() - 1.0;
        l * s * s
    }

    /// Independent scalar bisection for `λ ln(λ/(λ-1)) = 2` on `(1, 2)`.
    fn root_b() -> f64 {
        let g = |l: f64| l * (l / (l - 1.0)).ln() - 2.0;
        let (mut a, mut b) = (1.0 + 1e-9, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if (g(mid) > 0.0) == (g(a) > 0.0) {
                a = mid
            } else {
                b = mid
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn essential_sets() {
        let a = dm(fixture_a());
        let e = sigma_ess(&a);
        assert_eq!(e.point_values(), vec![0.0, 2.0, 3.0]);
        assert!(e.intervals.is_empty());
        assert_eq!(
            sigma_channel(&a, ChannelId::One).nonzero_eigenvalues(),
            vec![2.0]
        );
        let b = dm(fixture_b());
        assert_eq!(sigma_ess(&b).intervals, vec![(0.0, 1.0)]);
        assert!(sigma_channel(&b, ChannelId::One)
            .nonzero_eigenvalues()
            .is_empty());
        let cm = dm(fixture_c());
        assert_eq!(sigma_ess(&cm).point_values(), vec![0.0, 2.0, 4.0]);
        assert_eq!(
            sigma_channel(&cm, ChannelId::One).nonzero_eigenvalues(),
            vec![2.0, 4.0]
        );
    }

    #[test]
    fn f_functions() {
        let a = dm(fixture_a());
        let f = build_f(&a, 1, 1, c(4.0)).unwrap();
        assert!((f.eval(0.2, 0.7).unwrap() - c(4.0)).norm() < 1e-13);
        let b = dm(fixture_b());
        let f = build_f(&b, 1, 1, c(2.0)).unwrap();
        let i = 2.0 * 2f64.ln() - 1.0;
        assert!((f.inner_integrals()[0] - c(i)).norm() < 1e-13);
        for (x, y) in [(0.1, 0.9), (0.5, 0.5), (0.95, 0.02)] {
            let want = y / (2.0 - y) + x / (2.0 - x) * i;
            assert!((f.eval(x, y).unwrap() - c(want)).norm() < 1e-13);
        }
        let z =
            dm(
                PioModel::from_strings((0.0, 1.0), (0.0, 1.0), (&["1"], &["0"]), (&["1"], &["t"]))
                    .unwrap(),
            );
        assert_eq!(
            build_f(&z, 1, 1, c(2.0))
                .unwrap()
                .on_grid(&z)
                .unwrap()
                .max_abs(),
            0.0
        );
        assert!(matches!(
            build_f(&a, 2, 1, c(4.0)),
            Err(SpectralError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            build_f(&a, 1, 1, c(3.0)),
            Err(SpectralError::SpectrumHit { .. })
        ));
    }

    #[test]
    fn pi_and_delta_closed_forms() {
        let a = dm(fixture_a());
        let closed_pi = |l: f64| 6.0 * l / ((l - 2.0) * (l - 3.0));
        let closed_delta = |l: f64| l * l * (5.0 - l) / ((l - 2.0) * (l - 3.0));
        for l in [4.0, 1.0, -0.7, 2.5, 10.0] {
            let pi = pi_matrix(&a, c(l), Path::One).unwrap();
            assert!(
                (pi.entries[(0, 0)] - c(closed_pi(l))).norm() < 1e-10 * closed_pi(l).abs().max(1.0)
            );
            let d = delta(&a, c(l), Path::One).unwrap();
            assert!((d - c(closed_delta(l))).norm() < 1e-10 * closed_delta(l).abs().max(1.0));
        }
        assert!((delta(&a, c(4.0), Path::One).unwrap() - c(8.0)).norm() < 1e-10);
        assert!((delta(&a, c(1.0), Path::One).unwrap() - c(2.0)).norm() < 1e-10);

        let b = dm(fixture_b());
        let pi = pi_matrix(&b, c(2.0), Path::One).unwrap();
        assert!((pi.entries[(0, 0)].re - pi_b(2.0)).abs() < 1e-12);
        assert!((pi.entries[(0, 0)].re - 0.29845).abs() < 1e-5);

        let z =
            dm(
                PioModel::from_strings((0.0, 1.0), (0.0, 1.0), (&["1"], &["0"]), (&["1"], &["t"]))
                    .unwrap(),
            );
        assert_eq!(
            pi_matrix(&z, c(2.0), Path::One).unwrap().entries[(0, 0)],
            ZERO
        );
        let zm =
            dm(
                PioModel::from_strings((0.0, 1.0), (0.0, 1.0), (&["1"], &["0"]), (&["1"], &["0"]))
                    .unwrap(),
            );
        assert!((delta(&zm, c(1.0), Path::One).unwrap() - c(-1.0)).norm() < 1e-15);
        assert!(matches!(
            delta(&a, c(2.0), Path::One),
            Err(SpectralError::SpectrumHit { .. })
        ));
    }

    #[test]
    fn separable_pi_matches_grid_integrals() {
        let m = rich();
        for l in [c(3.7), Complex64::new(0.4, 0.3), c(-2.5)] {
            let fast = pi_matrix(&m, l, Path::One).unwrap().entries;
            let sys = FiniteRankSystem::new(&m, l).unwrap();
            let diff = (&fast - sys.pi()).norm();
            assert!(diff < 1e-11 * (1.0 + fast.norm()), "{diff}");
        }
        let pi = pi_matrix(&m, c(3.7), Path::One).unwrap();
        assert_eq!(pi.index_map.len(), 6);
        assert_eq!(pi.index_map[0], (1, 1));
        assert_eq!(pi.index_map[1], (1, 2));
        assert_eq!(pi.index_map[5], (3, 2));
        assert!(pi.entries.iter().all(|v| v.im.abs() < 1e-12));
    }

    #[test]
    fn w1_kernel_matches_composition() {
        use crate::operators::apply_w;
        for m in [dm(fixture_a()), rich()] {
            let f =
                Grid2D::from_real_fn(m.rules().clone(), |x, y| (3.0 * x).sin() + x * y * y - 0.2);
            for tau in [c(0.1), c(-0.3), Complex64::new(0.2, 0.1)] {
                let k = apply_w1_kernel(&m, tau, &f).unwrap();
                let o = apply_w(&m, ChannelId::One, tau, &f).unwrap();
                let d = k.try_sub(&o).unwrap().norm();
                assert!(d <= 1e-10 * (1.0 + o.norm()), "τ={tau}: {d}");
            }
        }
    }

    #[test]
    fn discrete_fixtures() {
        let a = dm(fixture_a());
        let s = discrete_spectrum(&a, &SearchOptions::for_model(&a));
        assert_eq!(s.eigenvalues.len(), 1);
        assert!((s.eigenvalues[0].lambda - 5.0).abs() < 1e-8);
        assert_eq!(s.eigenvalues[0].multiplicity, 1);

        let b = dm(fixture_b());
        let s = discrete_spectrum(&b, &SearchOptions::for_model(&b));
        assert_eq!(s.eigenvalues.len(), 1);
        assert!((s.eigenvalues[0].lambda - root_b()).abs() < 1e-6);
        assert!((root_b() - 1.255_001).abs() < 1e-6);

        let cm = dm(fixture_c());
        assert!(discrete_spectrum(&cm, &SearchOptions::for_model(&cm))
            .eigenvalues
            .is_empty());
        let z = dm(zero_model());
        assert!(discrete_spectrum(&z, &SearchOptions::for_model(&z))
            .eigenvalues
            .is_empty());
    }

    #[test]
    fn tangential_root_is_found() {
        // Two channel-1 functions with the same weights give a repeated root.
        let m = dm(PioModel::from_strings(
            (0.0, 1.0),
            (0.0, 1.0),
            (&["legendre(0)", "legendre(1)"], &["1", "1"]),
            (&["1"], &["2"]),
        )
        .unwrap());
        let s = discrete_spectrum(&m, &SearchOptions::for_model(&m));
        assert_eq!(s.eigenvalues.len(), 1, "{:?}", s.eigenvalues);
        assert!((s.eigenvalues[0].lambda - 3.0).abs() < 1e-7);
        assert_eq!(s.eigenvalues[0].multiplicity, 2);
        let fs = eigenfunctions_t(&m, s.eigenvalues[0].lambda).unwrap();
        assert_eq!(fs.len(), 2);
    }

    #[test]
    fn eigenfunctions() {
        let a = dm(fixture_a());
        let fs = eigenfunctions_t(&a, 5.0).unwrap();
        assert_eq!(fs.len(), 1);
        let f = &fs[0];
        let v0 = f.values()[0];
        assert!(f.values().iter().all(|v| (v - v0).norm() < 1e-12));
        let r = apply_t(&a, f)
            .unwrap()
            .try_sub(&f.scale_real(5.0))
            .unwrap()
            .norm();
        assert!(r < 1e-12);
        assert!(matches!(
            eigenfunctions_t(&a, 4.0),
            Err(SpectralError::NotAnEigenvalue { .. })
        ));

        let b = dm(fixture_b());
        let l = discrete_spectrum(&b, &SearchOptions::for_model(&b)).eigenvalues[0].lambda;
        let fs = eigenfunctions_t(&b, l).unwrap();
        assert_eq!(fs.len(), 1);
        let r = apply_t(&b, &fs[0])
            .unwrap()
            .try_sub(&fs[0].scale_real(l))
            .unwrap()
            .norm();
        assert!(r <= 1e-6, "{r}");
    }

    #[test]
    fn atoms() {
        let cm = dm(fixture_c());
        let f = atom_eigenfunction(&cm, ChannelId::One, 1, 2.0).unwrap();
        let r = cm.rules();
        for (p, _) in r.x.nodes().iter().enumerate() {
            for (q, &y) in r.y.nodes().iter().enumerate() {
                let want = if y < 0.5 { 2f64.sqrt() } else { 0.0 };
                assert!((f.at(p, q) - c(want)).norm() < 1e-14);
            }
        }
        assert!(channel_residual(&cm, ChannelId::One, 2.0, &f).unwrap() <= 1e-10);
        let f4 = atom_eigenfunction(&cm, ChannelId::One, 1, 4.0).unwrap();
        assert!(channel_residual(&cm, ChannelId::One, 4.0, &f4).unwrap() <= 1e-10);

        let a = dm(fixture_a());
        let f = atom_eigenfunction(&a, ChannelId::One, 1, 2.0).unwrap();
        assert!(f.values().iter().all(|v| (v - c(1.0)).norm() < 1e-14));
        let g = atom_eigenfunction(&a, ChannelId::Two, 1, 3.0).unwrap();
        assert!(channel_residual(&a, ChannelId::Two, 3.0, &g).unwrap() <= 1e-10);

        let b = dm(fixture_b());
        assert!(matches!(
            atom_eigenfunction(&b, ChannelId::One, 1, 0.5),
            Err(SpectralError::NoAtom { .. })
        ));
    }

    #[test]
    fn weyl_sequence_shrinks() {
        let mut mb = fixture_b();
        mb.quad.extra_breakpoints_y = vec![0.5 - 1.0 / 64.0, 0.5 + 1.0 / 64.0];
        let b = dm(mb);
        let f = weyl_function(&b, ChannelId::One, 1, 0.5, 64)
            .unwrap()
            .unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-12);
        let r = channel_residual(&b, ChannelId::One, 0.5, &f).unwrap();
        assert!(r < 0.02, "{r}");
        assert!(r <= 1.0 / 64.0);
    }

    #[test]
    fn holomorphic_delta() {
        let b = dm(fixture_b());
        let r = cauchy_riemann_residual(&b, Complex64::new(2.5, 0.5), 1e-4, Path::One).unwrap();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn dual_paths_share_roots() {
        for m in [dm(fixture_a()), dm(fixture_b()), rich()] {
            let o1 = SearchOptions::for_model(&m);
            let o2 = SearchOptions {
                path: Path::Two,
                ..o1
            };
            let r1 = discrete_spectrum(&m, &o1).eigenvalues;
            let r2 = discrete_spectrum(&m, &o2).eigenvalues;
            assert_eq!(r1.len(), r2.len(), "{r1:?} vs {r2:?}");
            for (a, b) in r1.iter().zip(&r2) {
                assert!((a.lambda - b.lambda).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn report_structure() {
        let a = dm(fixture_a());
        let rep = sigma_full(&a, &SearchOptions::for_model(&a));
        assert!(sigma_channel(&a, ChannelId::One).is_subset_of(&rep.essential));
        assert!(sigma_channel(&a, ChannelId::Two).is_subset_of(&rep.essential));
        for d in &rep.discrete {
            assert!(rep.essential.distance_real(d.lambda) >= rep.settings.margin);
        }
        let v = serde_json::to_value(&rep).unwrap();
        assert_eq!(v["discrete"][0][1], 1);
        assert_eq!(rep.multiplicity_kind, MULTIPLICITY_KIND);
    }

    #[test]
    fn trace_rows() {
        let a = dm(fixture_a());
        let rows = delta_trace(&a, 3.5, 6.0, 6, Path::One);
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].lambda, 4.0);
        assert!((rows[1].delta.unwrap() - c(8.0)).norm() < 1e-10);
        assert_eq!(rows[5].lambda, 6.0);
        let hit = delta_trace(&a, 1.0, 3.0, 3, Path::One);
        assert!(hit[1].delta.is_none() && hit[2].delta.is_none());
        assert!(hit[0].delta.is_some());
    }
}
