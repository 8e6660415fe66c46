//! The degenerate-kernel operator model `T = T1 + T2` on a rectangle.
//!
//! Channel 1 integrates over `x`: `k1(x,s,y) = Σ_k φ_k(x) φ_k(s) h_k(y)`, with
//! the orthonormal system `φ_k` on `[a,b]` and weights `h_k` on `[c,d]`.
//! Channel 2 integrates over `y`: `k2(x,t,y) = Σ_j p_j(x) ψ_j(y) ψ_j(t)`,
//! with `ψ_j` orthonormal on `[c,d]` and weights `p_j` on `[a,b]`.
//!
//! All expressions are real valued, so the conjugations in the kernels are the
//! identity.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::essran::{essential_range, SpectralSet};
use crate::expr::{parse_expr, DomainError, Expr1D, ParseError};
use crate::quadrature::{build_rule, QuadError, TensorRule};

pub const DEFAULT_ORDER: usize = 32;
pub const DEFAULT_ORTHO_TOL: f64 = 1e-8;
pub const DEFAULT_SCAN_POINTS: usize = 512;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Number of equispaced points (endpoints included) added to the quadrature
/// nodes when sampling weight suprema.
pub const DENSE_SAMPLES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelId {
    /// Integration over `x`; basis `φ_k(x)`, weights `h_k(y)`.
    One,
    /// Integration over `y`; basis `ψ_j(y)`, weights `p_j(x)`.
    Two,
}

impl ChannelId {
    pub fn from_index(i: u8) -> Option<ChannelId> {
        match i {
            1 => Some(ChannelId::One),
            2 => Some(ChannelId::Two),
            _ => None,
        }
    }

    pub fn other(self) -> ChannelId {
        match self {
            ChannelId::One => ChannelId::Two,
            ChannelId::Two => ChannelId::One,
        }
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelId::One => f.write_str("channel1"),
            ChannelId::Two => f.write_str("channel2"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file is not valid JSON for the schema: {0}")]
    Json(String),
    #[error("{channel} {list}[{index}]: {source}")]
    Expr {
        channel: ChannelId,
        list: &'static str,
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Structure(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("{channel} {list}[{index}] cannot be evaluated at {at}: {source}")]
    Domain {
        channel: ChannelId,
        list: &'static str,
        index: usize,
        at: f64,
        #[source]
        source: DomainError,
    },
}

/// An orthonormal system with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub basis: Vec<Expr1D>,
    pub weights: Vec<Expr1D>,
}

impl Channel {
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadSettings {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub extra_breakpoints_x: Vec<f64>,
    #[serde(default)]
    pub extra_breakpoints_y: Vec<f64>,
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            order: DEFAULT_ORDER,
            extra_breakpoints_x: Vec::new(),
            extra_breakpoints_y: Vec::new(),
        }
    }
}

/// Root-search settings. A missing margin means `1e-3 * (1 + B)` with `B`
/// the norm bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSettings {
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
    #[serde(default = "default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn default_scan_points() -> usize {
    DEFAULT_SCAN_POINTS
}
fn default_root_tol() -> f64 {
    DEFAULT_ROOT_TOL
}
fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            margin: None,
            scan_points: DEFAULT_SCAN_POINTS,
            root_tol: DEFAULT_ROOT_TOL,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PioModel {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub channel1: Channel,
    pub channel2: Channel,
    pub quad: QuadSettings,
    pub search: SearchSettings,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainFile {
    x: [f64; 2],
    y: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    basis: Vec<String>,
    weights: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    domain: DomainFile,
    channel1: ChannelFile,
    channel2: ChannelFile,
    #[serde(default)]
    quadrature: QuadSettings,
    #[serde(default)]
    search: SearchSettings,
}

/// Expand `legendre(k)` / `trig(k)` shorthands into explicit expressions in
/// `t` that are orthonormal on `[lo, hi]`. Other text is returned unchanged.
pub fn expand_shorthand(text: &str, lo: f64, hi: f64) -> String {
    let s = text.trim();
    let parse_call = |name: &str| -> Option<usize> {
        let rest = s.strip_prefix(name)?.trim_start();
        let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
        inner.trim().parse().ok()
    };
    if let Some(k) = parse_call("legendre") {
        legendre_expression(k, lo, hi)
    } else if let Some(k) = parse_call("trig") {
        trig_expression(k, lo, hi)
    } else {
        text.to_string()
    }
}

/// Coefficients (ascending powers) of the Legendre polynomial `P_k`.
fn legendre_coefficients(k: usize) -> Vec<f64> {
    let mut p0 = vec![1.0];
    if k == 0 {
        return p0;
    }
    let mut p1 = vec![0.0, 1.0];
    for n in 1..k {
        let nf = n as f64;
        let mut next = vec![0.0; n + 2];
        for (i, c) in p1.iter().enumerate() {
            next[i + 1] += (2.0 * nf + 1.0) * c / (nf + 1.0);
        }
        for (i, c) in p0.iter().enumerate() {
            next[i] -= nf * c / (nf + 1.0);
        }
        p0 = p1;
        p1 = next;
    }
    p1
}

fn legendre_expression(k: usize, lo: f64, hi: f64) -> String {
    let norm = ((2 * k + 1) as f64 / (hi - lo)).sqrt();
    let alpha = 2.0 / (hi - lo);
    let beta = -(hi + lo) / (hi - lo);
    let u = format!("({alpha:?}*t + {beta:?})");
    let terms: Vec<String> = legendre_coefficients(k)
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| {
            let c = c * norm;
            match i {
                0 => format!("{c:?}"),
                1 => format!("{c:?}*{u}"),
                _ => format!("{c:?}*{u}^{i}"),
            }
        })
        .collect();
    terms.join(" + ")
}

fn trig_expression(k: usize, lo: f64, hi: f64) -> String {
    let len = hi - lo;
    if k == 0 {
        return format!("{:?}", 1.0 / len.sqrt());
    }
    let amp = (2.0 / len).sqrt();
    let r = k.div_ceil(2) as f64;
    let freq = 2.0 * std::f64::consts::PI * r / len;
    let func = if k % 2 == 1 { "cos" } else { "sin" };
    format!("{amp:?}*{func}({freq:?}*(t - {lo:?}))")
}

fn parse_list(
    channel: ChannelId,
    list: &'static str,
    texts: &[&str],
    lo: f64,
    hi: f64,
) -> Result<Vec<Expr1D>, ModelError> {
    texts
        .iter()
        .enumerate()
        .map(|(index, t)| {
            parse_expr(&expand_shorthand(t, lo, hi)).map_err(|source| ModelError::Expr {
                channel,
                list,
                index,
                source,
            })
        })
        .collect()
}

impl PioModel {
    /// Build a model from expression strings. `channel1 = (φ basis, h weights)`,
    /// `channel2 = (ψ basis, p weights)`.
    pub fn from_strings(
        x: (f64, f64),
        y: (f64, f64),
        channel1: (&[&str], &[&str]),
        channel2: (&[&str], &[&str]),
    ) -> Result<PioModel, ModelError> {
        let c1 = Channel {
            basis: parse_list(ChannelId::One, "basis", channel1.0, x.0, x.1)?,
            weights: parse_list(ChannelId::One, "weights", channel1.1, y.0, y.1)?,
        };
        let c2 = Channel {
            basis: parse_list(ChannelId::Two, "basis", channel2.0, y.0, y.1)?,
            weights: parse_list(ChannelId::Two, "weights", channel2.1, x.0, x.1)?,
        };
        Ok(PioModel {
            x,
            y,
            channel1: c1,
            channel2: c2,
            quad: QuadSettings::default(),
            search: SearchSettings::default(),
        })
    }

    pub fn from_json_str(text: &str) -> Result<PioModel, ModelError> {
        fn strs(v: &[String]) -> Vec<&str> {
            v.iter().map(String::as_str).collect()
        }
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        let x = (file.domain.x[0], file.domain.x[1]);
        let y = (file.domain.y[0], file.domain.y[1]);
        let mut m = PioModel::from_strings(
            x,
            y,
            (&strs(&file.channel1.basis), &strs(&file.channel1.weights)),
            (&strs(&file.channel2.basis), &strs(&file.channel2.weights)),
        )?;
        m.quad = file.quadrature;
        m.search = file.search;
        Ok(m)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let srcs = |v: &Vec<Expr1D>| v.iter().map(|e| e.source().to_string()).collect();
        let file = ModelFile {
            domain: DomainFile {
                x: [self.x.0, self.x.1],
                y: [self.y.0, self.y.1],
            },
            channel1: ChannelFile {
                basis: srcs(&self.channel1.basis),
                weights: srcs(&self.channel1.weights),
            },
            channel2: ChannelFile {
                basis: srcs(&self.channel2.basis),
                weights: srcs(&self.channel2.weights),
            },
            quadrature: self.quad.clone(),
            search: self.search.clone(),
        };
        serde_json::to_value(file).expect("model serializes")
    }

    pub fn channel(&self, ch: ChannelId) -> &Channel {
        match ch {
            ChannelId::One => &self.channel1,
            ChannelId::Two => &self.channel2,
        }
    }

    /// Interval of the basis (integration variable) of a channel.
    pub fn basis_interval(&self, ch: ChannelId) -> (f64, f64) {
        match ch {
            ChannelId::One => self.x,
            ChannelId::Two => self.y,
        }
    }

    /// Interval the weights of a channel live on.
    pub fn weight_interval(&self, ch: ChannelId) -> (f64, f64) {
        match ch {
            ChannelId::One => self.y,
            ChannelId::Two => self.x,
        }
    }

    /// Exchange the roles of `x` and `y` (and of the two channels).
    pub fn swapped(&self) -> PioModel {
        PioModel {
            x: self.y,
            y: self.x,
            channel1: self.channel2.clone(),
            channel2: self.channel1.clone(),
            quad: QuadSettings {
                order: self.quad.order,
                extra_breakpoints_x: self.quad.extra_breakpoints_y.clone(),
                extra_breakpoints_y: self.quad.extra_breakpoints_x.clone(),
            },
            search: self.search.clone(),
        }
    }

    /// Multiply every weight of both channels by `c`.
    pub fn scaled_weights(&self, c: f64) -> Result<PioModel, ModelError> {
        let scale = |ch: ChannelId, list: &[Expr1D]| -> Result<Vec<Expr1D>, ModelError> {
            list.iter()
                .enumerate()
                .map(|(index, e)| {
                    parse_expr(&format!("({c:?})*({})", e.source())).map_err(|source| {
                        ModelError::Expr {
                            channel: ch,
                            list: "weights",
                            index,
                            source,
                        }
                    })
                })
                .collect()
        };
        let mut m = self.clone();
        m.channel1.weights = scale(ChannelId::One, &self.channel1.weights)?;
        m.channel2.weights = scale(ChannelId::Two, &self.channel2.weights)?;
        Ok(m)
    }

    fn breakpoints(&self, axis_x: bool) -> Vec<f64> {
        let (lo, hi, exprs, extra): (f64, f64, Vec<&Expr1D>, &Vec<f64>) = if axis_x {
            (
                self.x.0,
                self.x.1,
                self.channel1
                    .basis
                    .iter()
                    .chain(&self.channel2.weights)
                    .collect(),
                &self.quad.extra_breakpoints_x,
            )
        } else {
            (
                self.y.0,
                self.y.1,
                self.channel2
                    .basis
                    .iter()
                    .chain(&self.channel1.weights)
                    .collect(),
                &self.quad.extra_breakpoints_y,
            )
        };
        let mut bps: Vec<f64> = exprs
            .iter()
            .flat_map(|e| e.breakpoints_in(lo, hi))
            .collect();
        bps.extend(extra.iter().copied().filter(|&b| b > lo && b < hi));
        bps.sort_by(f64::total_cmp);
        bps.dedup();
        bps
    }

    /// Tensor quadrature rule honoring every breakpoint of every expression.
    pub fn build_rules(&self) -> Result<TensorRule, ModelError> {
        let rx = build_rule(self.x.0, self.x.1, self.quad.order, &self.breakpoints(true))?;
        let ry = build_rule(
            self.y.0,
            self.y.1,
            self.quad.order,
            &self.breakpoints(false),
        )?;
        Ok(TensorRule::new(rx, ry))
    }

    /// Degenerate kernel value. Channel 1 takes `(x, s, y)`, channel 2 `(x, t, y)`.
    pub fn eval_kernel(&self, ch: ChannelId, point: (f64, f64, f64)) -> Result<f64, DomainError> {
        let (x, s, y) = point;
        let c = self.channel(ch);
        let mut acc = 0.0;
        for (b, w) in c.basis.iter().zip(&c.weights) {
            acc += match ch {
                ChannelId::One => b.eval(x)? * b.eval(s)? * w.eval(y)?,
                ChannelId::Two => w.eval(x)? * b.eval(y)? * b.eval(s)?,
            };
        }
        Ok(acc)
    }
}

fn dense_points(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..DENSE_SAMPLES).map(move |i| lo + (hi - lo) * i as f64 / (DENSE_SAMPLES - 1) as f64)
}

/// `max_k sup|h_k| + max_j sup|p_j|` over the quadrature nodes plus a dense
/// equispaced sample. Points where a weight cannot be evaluated are skipped.
pub fn norm_bound(m: &PioModel) -> f64 {
    let rules = m.build_rules().ok();
    let sup = |ch: ChannelId| -> f64 {
        let (lo, hi) = m.weight_interval(ch);
        let nodes: Vec<f64> = match (&rules, ch) {
            (Some(r), ChannelId::One) => r.y.nodes().to_vec(),
            (Some(r), ChannelId::Two) => r.x.nodes().to_vec(),
            (None, _) => Vec::new(),
        };
        m.channel(ch)
            .weights
            .iter()
            .map(|w| {
                nodes
                    .iter()
                    .copied()
                    .chain(dense_points(lo, hi))
                    .filter_map(|t| w.eval(t).ok())
                    .map(f64::abs)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    };
    sup(ChannelId::One) + sup(ChannelId::Two)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub deviation: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ortho_tol: f64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Run every model check; failures become report entries.
pub fn validate_model(m: &PioModel, ortho_tol: f64) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: String, passed: bool, deviation: Option<f64>, detail: String| {
        checks.push(Check {
            name,
            passed,
            deviation,
            detail,
        })
    };

    for (axis, (lo, hi)) in [("x", m.x), ("y", m.y)] {
        let ok = lo.is_finite() && hi.is_finite() && lo < hi;
        push(format!("domain.{axis}"), ok, None, format!("[{lo}, {hi}]"));
    }
    let rules = if m.x.0 < m.x.1 && m.y.0 < m.y.1 {
        match m.build_rules() {
            Ok(r) => Some(r),
            Err(e) => {
                push("quadrature".into(), false, None, e.to_string());
                None
            }
        }
    } else {
        None
    };

    for ch in [ChannelId::One, ChannelId::Two] {
        let c = m.channel(ch);
        let (n_b, n_w) = (c.basis.len(), c.weights.len());
        push(
            format!("{ch}.lengths"),
            n_b == n_w && n_b > 0,
            None,
            format!("{n_b} basis functions, {n_w} weights"),
        );
        let Some(rules) = &rules else { continue };
        let (basis_rule, weight_rule) = match ch {
            ChannelId::One => (&rules.x, &rules.y),
            ChannelId::Two => (&rules.y, &rules.x),
        };
        let (wlo, whi) = m.weight_interval(ch);

        // evaluability at quadrature nodes (and the dense sample for weights)
        let mut basis_samples = Vec::with_capacity(n_b);
        let mut eval_failure: Option<String> = None;
        for (i, b) in c.basis.iter().enumerate() {
            match basis_rule
                .nodes()
                .iter()
                .map(|&t| b.eval(t).map_err(|e| (t, e)))
                .collect::<Result<Vec<f64>, _>>()
            {
                Ok(v) => basis_samples.push(v),
                Err((t, e)) => {
                    eval_failure.get_or_insert(format!("basis[{i}] at t={t}: {e}"));
                }
            }
        }
        let mut sup: f64 = 0.0;
        for (i, w) in c.weights.iter().enumerate() {
            for t in weight_rule
                .nodes()
                .iter()
                .copied()
                .chain(dense_points(wlo, whi))
            {
                match w.eval(t) {
                    Ok(v) => sup = sup.max(v.abs()),
                    Err(e) => {
                        eval_failure.get_or_insert(format!("weights[{i}] at t={t}: {e}"));
                        break;
                    }
                }
            }
        }
        push(
            format!("{ch}.evaluable"),
            eval_failure.is_none(),
            None,
            eval_failure
                .clone()
                .unwrap_or_else(|| "all sample points finite".into()),
        );
        push(
            format!("{ch}.weights_bounded"),
            eval_failure.is_none() && sup.is_finite(),
            Some(sup),
            format!("max sampled |weight| = {sup}"),
        );

        if basis_samples.len() == n_b && n_b > 0 {
            let mut dev: f64 = 0.0;
            let mut worst = (0, 0, 0.0);
            for i in 0..n_b {
                for j in 0..=i {
                    let g: f64 = basis_rule
                        .weights()
                        .iter()
                        .zip(basis_samples[i].iter().zip(&basis_samples[j]))
                        .map(|(w, (a, b))| w * a * b)
                        .sum();
                    let d = (g - if i == j { 1.0 } else { 0.0 }).abs();
                    if d > dev {
                        dev = d;
                        worst = (i, j, g);
                    }
                }
            }
            push(
                format!("{ch}.orthonormality"),
                dev <= ortho_tol,
                Some(dev),
                format!(
                    "max |<b_i,b_j> - δ_ij| = {dev:e} (worst <b_{},b_{}> = {})",
                    worst.0 + 1,
                    worst.1 + 1,
                    worst.2
                ),
            );
        } else {
            push(
                format!("{ch}.orthonormality"),
                false,
                None,
                "basis could not be sampled".into(),
            );
        }
    }
    ValidationReport { ortho_tol, checks }
}

/// A model sampled on its tensor quadrature grid. Every operator in the crate
/// works on this representation.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    model: PioModel,
    rules: Arc<TensorRule>,
    /// `φ_k(x_p)`, one row per basis function.
    pub(crate) phi: Vec<Vec<f64>>,
    /// `h_k(y_q)`.
    pub(crate) h: Vec<Vec<f64>>,
    /// `ψ_j(y_q)`.
    pub(crate) psi: Vec<Vec<f64>>,
    /// `p_j(x_p)`.
    pub(crate) p: Vec<Vec<f64>>,
    sigma1: SpectralSet,
    sigma2: SpectralSet,
    bound: f64,
}

fn sample(
    ch: ChannelId,
    list: &'static str,
    exprs: &[Expr1D],
    nodes: &[f64],
) -> Result<Vec<Vec<f64>>, ModelError> {
    exprs
        .iter()
        .enumerate()
        .map(|(index, e)| {
            nodes
                .iter()
                .map(|&t| {
                    e.eval(t).map_err(|source| ModelError::Domain {
                        channel: ch,
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

fn channel_spectrum(m: &PioModel, ch: ChannelId) -> Result<SpectralSet, ModelError> {
    let (lo, hi) = m.weight_interval(ch);
    let mut set = SpectralSet::zero();
    for (index, w) in m.channel(ch).weights.iter().enumerate() {
        let r = essential_range(w, lo, hi).map_err(|(at, source)| ModelError::Domain {
            channel: ch,
            list: "weights",
            index,
            at,
            source,
        })?;
        set.absorb(&r);
    }
    Ok(set)
}

impl DiscreteModel {
    /// Sample a model on its quadrature grid. The model should have passed
    /// [`validate_model`]; structural problems are reported as errors here.
    pub fn new(model: PioModel) -> Result<DiscreteModel, ModelError> {
        for ch in [ChannelId::One, ChannelId::Two] {
            let c = model.channel(ch);
            if c.basis.is_empty() || c.basis.len() != c.weights.len() {
                return Err(ModelError::Structure(format!(
                    "{ch}: basis and weights must have equal positive length ({} vs {})",
                    c.basis.len(),
                    c.weights.len()
                )));
            }
        }
        let rules = Arc::new(model.build_rules()?);
        let phi = sample(
            ChannelId::One,
            "basis",
            &model.channel1.basis,
            rules.x.nodes(),
        )?;
        let h = sample(
            ChannelId::One,
            "weights",
            &model.channel1.weights,
            rules.y.nodes(),
        )?;
        let psi = sample(
            ChannelId::Two,
            "basis",
            &model.channel2.basis,
            rules.y.nodes(),
        )?;
        let p = sample(
            ChannelId::Two,
            "weights",
            &model.channel2.weights,
            rules.x.nodes(),
        )?;
        let sigma1 = channel_spectrum(&model, ChannelId::One)?;
        let sigma2 = channel_spectrum(&model, ChannelId::Two)?;
        let bound = norm_bound(&model);
        Ok(DiscreteModel {
            model,
            rules,
            phi,
            h,
            psi,
            p,
            sigma1,
            sigma2,
            bound,
        })
    }

    pub fn model(&self) -> &PioModel {
        &self.model
    }

    pub fn rules(&self) -> &Arc<TensorRule> {
        &self.rules
    }

    /// Number of functions in channel 1 (`n`).
    pub fn n(&self) -> usize {
        self.phi.len()
    }

    /// Number of functions in channel 2 (`m`).
    pub fn m(&self) -> usize {
        self.psi.len()
    }

    pub fn rank(&self, ch: ChannelId) -> usize {
        match ch {
            ChannelId::One => self.n(),
            ChannelId::Two => self.m(),
        }
    }

    pub fn nx(&self) -> usize {
        self.rules.nx()
    }

    pub fn ny(&self) -> usize {
        self.rules.ny()
    }

    /// Spectrum of the channel operator: `{0} ∪ ⋃ Essran(weights)`.
    pub fn channel_spectrum(&self, ch: ChannelId) -> &SpectralSet {
        match ch {
            ChannelId::One => &self.sigma1,
            ChannelId::Two => &self.sigma2,
        }
    }

    pub fn norm_bound(&self) -> f64 {
        self.bound
    }

    /// Default exclusion margin for channel resolvents: `1e-9 * (1 + B)`.
    pub fn resolvent_margin(&self) -> f64 {
        1e-9 * (1.0 + self.bound)
    }

    /// Root-search margin: configured value or `1e-3 * (1 + B)`.
    pub fn search_margin(&self) -> f64 {
        self.model
            .search
            .margin
            .unwrap_or(1e-3 * (1.0 + self.bound))
    }

    /// The model with axes and channels exchanged, sampled on the transposed grid.
    pub fn swapped(&self) -> DiscreteModel {
        DiscreteModel {
            model: self.model.swapped(),
            rules: Arc::new(self.rules.transposed()),
            phi: self.psi.clone(),
            h: self.p.clone(),
            psi: self.phi.clone(),
            p: self.h.clone(),
            sigma1: self.sigma2.clone(),
            sigma2: self.sigma1.clone(),
            bound: self.bound,
        }
    }
}

/// Reference models used throughout the tests and the examples.
pub mod fixtures {
    use super::PioModel;

    const UNIT: (f64, f64) = (0.0, 1.0);

    /// Constant basis, `h ≡ 2`, `p ≡ 3`.
    pub fn fixture_a() -> PioModel {
        PioModel::from_strings(UNIT, UNIT, (&["1"], &["2"]), (&["1"], &["3"])).unwrap()
    }

    /// Constant basis, `h(y) = y`, `p(x) = x`.
    pub fn fixture_b() -> PioModel {
        PioModel::from_strings(UNIT, UNIT, (&["1"], &["t"]), (&["1"], &["t"])).unwrap()
    }

    /// Piecewise-constant `h`, channel 2 switched off.
    pub fn fixture_c() -> PioModel {
        PioModel::from_strings(
            UNIT,
            UNIT,
            (&["1"], &["piecewise([0,0.5]:2; [0.5,1]:4)"]),
            (&["1"], &["0"]),
        )
        .unwrap()
    }

    /// Every weight identically zero.
    pub fn zero_model() -> PioModel {
        PioModel::from_strings(UNIT, UNIT, (&["1"], &["0"]), (&["1"], &["0"])).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixture_a_validates() {
        let r = validate_model(&fixture_a(), 1e-10);
        assert!(r.passed(), "{r:#?}");
        assert!(
            r.check("channel1.orthonormality")
                .unwrap()
                .deviation
                .unwrap()
                < 1e-14
        );
    }

    #[test]
    fn duplicated_basis_fails_orthonormality() {
        let m = PioModel::from_strings(
            (0.0, 1.0),
            (0.0, 1.0),
            (&["1", "1"], &["1", "2"]),
            (&["1"], &["3"]),
        )
        .unwrap();
        let r = validate_model(&m, 1e-10);
        let c = r.check("channel1.orthonormality").unwrap();
        assert!(!c.passed);
        assert!((c.deviation.unwrap() - 1.0).abs() < 1e-14);
        assert!(r.check("channel2.orthonormality").unwrap().passed);
    }

    #[test]
    fn singular_weight_fails_evaluability() {
        let m =
            PioModel::from_strings((0.0, 1.0), (0.0, 1.0), (&["1"], &["1/t"]), (&["1"], &["3"]))
                .unwrap();
        let r = validate_model(&m, 1e-10);
        let c = r.check("channel1.evaluable").unwrap();
        assert!(!c.passed);
        assert!(c.detail.contains("division by zero"), "{}", c.detail);
        assert!(!r.passed());
    }

    #[test]
    fn length_mismatch_is_reported() {
        let m = PioModel::from_strings(
            (0.0, 1.0),
            (0.0, 1.0),
            (&["1"], &["1", "2"]),
            (&["1"], &["3"]),
        )
        .unwrap();
        let r = validate_model(&m, 1e-10);
        assert!(!r.check("channel1.lengths").unwrap().passed);
        assert!(matches!(
            DiscreteModel::new(m),
            Err(ModelError::Structure(_))
        ));
    }

    #[test]
    fn kernel_values() {
        let a = fixture_a();
        assert_eq!(a.eval_kernel(ChannelId::One, (0.1, 0.7, 0.3)).unwrap(), 2.0);
        assert_eq!(a.eval_kernel(ChannelId::Two, (0.9, 0.2, 0.5)).unwrap(), 3.0);
        let b = fixture_b();
        assert_eq!(b.eval_kernel(ChannelId::One, (0.3, 0.9, 0.4)).unwrap(), 0.4);
    }

    #[test]
    fn norm_bounds() {
        assert_eq!(norm_bound(&fixture_a()), 5.0);
        assert_eq!(norm_bound(&fixture_b()), 2.0);
        assert_eq!(norm_bound(&zero_model()), 0.0);
        assert_eq!(norm_bound(&fixture_c()), 4.0);
    }

    #[test]
    fn shorthand_systems_are_orthonormal() {
        let m = PioModel::from_strings(
            (-1.0, 2.0),
            (0.5, 1.5),
            (
                &["legendre(0)", "legendre(1)", "legendre(2)", "legendre(5)"],
                &["1", "t", "2", "3"],
            ),
            (
                &["trig(0)", "trig(1)", "trig(2)", "trig(3)"],
                &["1", "1", "t", "0"],
            ),
        )
        .unwrap();
        let r = validate_model(&m, 1e-12);
        assert!(r.passed(), "{r:#?}");
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{
            "domain": {"x": [0, 1], "y": [0, 1]},
            "channel1": {"basis": ["1"], "weights": ["2"]},
            "channel2": {"basis": ["1"], "weights": ["3"]}
        }"#;
        let m = PioModel::from_json_str(text).unwrap();
        assert_eq!(m, fixture_a());
        assert_eq!(m.quad.order, DEFAULT_ORDER);
        assert_eq!(m.search.scan_points, 512);
        let back = PioModel::from_json_str(&m.to_json_value().to_string()).unwrap();
        assert_eq!(back, m);

        let bad = r#"{"domain": {"x": [0, 1], "y": [0, 1]},
            "channel1": {"basis": ["1"], "weights": ["2 +"]},
            "channel2": {"basis": ["1"], "weights": ["3"]}}"#;
        assert!(matches!(
            PioModel::from_json_str(bad),
            Err(ModelError::Expr { .. })
        ));
        assert!(matches!(
            PioModel::from_json_str("{"),
            Err(ModelError::Json(_))
        ));
        let unknown = text.replace("\"domain\"", "\"search\": {\"bogus\": 1}, \"domain\"");
        assert!(matches!(
            PioModel::from_json_str(&unknown),
            Err(ModelError::Json(_))
        ));
    }

    #[test]
    fn rules_respect_breakpoints() {
        let c = fixture_c();
        let r = c.build_rules().unwrap();
        assert_eq!(r.y.panels().len(), 2);
        assert_eq!(r.x.panels().len(), 1);
    }

    proptest! {
        #[test]
        fn channel1_kernel_is_symmetric(x in 0.0f64..1.0, s in 0.0f64..1.0, y in 0.0f64..1.0) {
            let m = PioModel::from_strings(
                (0.0, 1.0), (0.0, 1.0),
                (&["legendre(0)", "legendre(1)", "legendre(3)"], &["t", "sin(t)", "piecewise([0,0.5]:1; [0.5,1]:-2)"]),
                (&["trig(1)"], &["t^2"]),
            ).unwrap();
            let a = m.eval_kernel(ChannelId::One, (x, s, y)).unwrap();
            let b = m.eval_kernel(ChannelId::One, (s, x, y)).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
            let a = m.eval_kernel(ChannelId::Two, (x, s, y)).unwrap();
            let b = m.eval_kernel(ChannelId::Two, (x, y, s)).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }

        #[test]
        fn model_json_parser_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = PioModel::from_json_str(&text);
        }
    }
}
