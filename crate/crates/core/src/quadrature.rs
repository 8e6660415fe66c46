//! Composite Gauss–Legendre rules and the tensor grid used to represent
//! functions of two variables.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("bad interval [{lo}, {hi}]")]
    BadInterval { lo: f64, hi: f64 },
    #[error("breakpoint {0} is not inside the open interval")]
    BadBreakpoint(f64),
    #[error("quadrature order must be at least 1")]
    BadOrder,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, computed by Newton iteration
/// on the Legendre polynomial of degree `n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                dp = legendre_with_derivative(n, x).1;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss–Legendre rule over `[lo, hi]` with `order` nodes in every
/// panel. Panels are the sub-intervals between consecutive breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule1D {
    lo: f64,
    hi: f64,
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: Vec<(f64, f64)>,
}

pub fn build_rule(
    lo: f64,
    hi: f64,
    order: usize,
    breakpoints: &[f64],
) -> Result<QuadRule1D, QuadError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(QuadError::BadInterval { lo, hi });
    }
    if order == 0 {
        return Err(QuadError::BadOrder);
    }
    let mut cuts = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(lo);
    let mut bps: Vec<f64> = breakpoints.to_vec();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    for &b in &bps {
        if !(b > lo && b < hi) {
            return Err(QuadError::BadBreakpoint(b));
        }
        cuts.push(b);
    }
    cuts.push(hi);

    let (ref_nodes, ref_weights) = gauss_legendre(order);
    let panels: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let mut nodes = Vec::with_capacity(order * panels.len());
    let mut weights = Vec::with_capacity(order * panels.len());
    for &(a, b) in &panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    Ok(QuadRule1D {
        lo,
        hi,
        order,
        nodes,
        weights,
        panels,
    })
}

impl QuadRule1D {
    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> &[(f64, f64)] {
        &self.panels
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(node_i)`.
    pub fn integrate<F, E>(&self, mut f: F) -> Result<Complex64, E>
    where
        F: FnMut(f64) -> Result<Complex64, E>,
    {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += f(x)? * w;
        }
        Ok(acc)
    }

    pub fn integrate_real<F>(&self, mut f: F) -> f64
    where
        F: FnMut(f64) -> f64,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Quadrature sum of values sampled at the nodes.
    pub fn sum_samples(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Pair of rules spanning the rectangle `[a,b] × [c,d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorRule {
    pub x: QuadRule1D,
    pub y: QuadRule1D,
}

impl TensorRule {
    pub fn new(x: QuadRule1D, y: QuadRule1D) -> Self {
        TensorRule { x, y }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    /// Tensor-product quadrature of `f(x, y)`.
    pub fn integrate<F, E>(&self, mut f: F) -> Result<Complex64, E>
    where
        F: FnMut(f64, f64) -> Result<Complex64, E>,
    {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &wx) in self.x.nodes.iter().zip(&self.x.weights) {
            let mut row = Complex64::new(0.0, 0.0);
            for (&y, &wy) in self.y.nodes.iter().zip(&self.y.weights) {
                row += f(x, y)? * wy;
            }
            acc += row * wx;
        }
        Ok(acc)
    }

    /// The same rectangle with axes exchanged.
    pub fn transposed(&self) -> TensorRule {
        TensorRule {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("grid mismatch: functions live on different quadrature grids")]
pub struct GridMismatch;

/// A function on the rectangle sampled at the tensor quadrature nodes.
/// `values[p * ny + q]` is the sample at `(x_p, y_q)`.
#[derive(Debug, Clone)]
pub struct Grid2D {
    rules: Arc<TensorRule>,
    values: Vec<Complex64>,
}

impl Grid2D {
    pub fn zeros(rules: Arc<TensorRule>) -> Self {
        let n = rules.nx() * rules.ny();
        Grid2D {
            rules,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_values(rules: Arc<TensorRule>, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), rules.nx() * rules.ny());
        Grid2D { rules, values }
    }

    pub fn from_fn<F>(rules: Arc<TensorRule>, mut f: F) -> Self
    where
        F: FnMut(f64, f64) -> Complex64,
    {
        let mut values = Vec::with_capacity(rules.nx() * rules.ny());
        for &x in rules.x.nodes() {
            for &y in rules.y.nodes() {
                values.push(f(x, y));
            }
        }
        Grid2D { rules, values }
    }

    pub fn try_from_fn<F, E>(rules: Arc<TensorRule>, mut f: F) -> Result<Self, E>
    where
        F: FnMut(f64, f64) -> Result<Complex64, E>,
    {
        let mut values = Vec::with_capacity(rules.nx() * rules.ny());
        for &x in rules.x.nodes() {
            for &y in rules.y.nodes() {
                values.push(f(x, y)?);
            }
        }
        Ok(Grid2D { rules, values })
    }

    pub fn from_real_fn<F>(rules: Arc<TensorRule>, mut f: F) -> Self
    where
        F: FnMut(f64, f64) -> f64,
    {
        Self::from_fn(rules, |x, y| Complex64::new(f(x, y), 0.0))
    }

    pub fn rules(&self) -> &Arc<TensorRule> {
        &self.rules
    }

    pub fn nx(&self) -> usize {
        self.rules.nx()
    }

    pub fn ny(&self) -> usize {
        self.rules.ny()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, p: usize, q: usize) -> Complex64 {
        self.values[p * self.ny() + q]
    }

    pub fn same_grid(&self, other: &Grid2D) -> bool {
        Arc::ptr_eq(&self.rules, &other.rules) || *self.rules == *other.rules
    }

    pub fn check_grid(&self, other: &Grid2D) -> Result<(), GridMismatch> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(GridMismatch)
        }
    }

    pub fn on_rules(&self, rules: &Arc<TensorRule>) -> Result<(), GridMismatch> {
        if Arc::ptr_eq(&self.rules, rules) || *self.rules == **rules {
            Ok(())
        } else {
            Err(GridMismatch)
        }
    }

    /// `∫∫ f` by the tensor rule.
    pub fn integral(&self) -> Complex64 {
        let ny = self.ny();
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, wx) in self.rules.x.weights().iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (q, wy) in self.rules.y.weights().iter().enumerate() {
                row += self.values[p * ny + q] * *wy;
            }
            acc += row * *wx;
        }
        acc
    }

    /// `∫∫ f · conj(g)`.
    pub fn inner(&self, other: &Grid2D) -> Result<Complex64, GridMismatch> {
        self.check_grid(other)?;
        Ok(self.inner_unchecked(other))
    }

    /// `∫∫ f · g` without conjugation.
    pub fn bilinear(&self, other: &Grid2D) -> Result<Complex64, GridMismatch> {
        self.check_grid(other)?;
        let ny = self.ny();
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, wx) in self.rules.x.weights().iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (q, wy) in self.rules.y.weights().iter().enumerate() {
                let i = p * ny + q;
                row += self.values[i] * other.values[i] * *wy;
            }
            acc += row * *wx;
        }
        Ok(acc)
    }

    fn inner_unchecked(&self, other: &Grid2D) -> Complex64 {
        let ny = self.ny();
        let mut acc = Complex64::new(0.0, 0.0);
        for (p, wx) in self.rules.x.weights().iter().enumerate() {
            let mut row = Complex64::new(0.0, 0.0);
            for (q, wy) in self.rules.y.weights().iter().enumerate() {
                let i = p * ny + q;
                row += self.values[i] * other.values[i].conj() * *wy;
            }
            acc += row * *wx;
        }
        acc
    }

    /// Quadrature L2 norm.
    pub fn norm(&self) -> f64 {
        self.inner_unchecked(self).re.max(0.0).sqrt()
    }

    /// Largest absolute sample.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: Complex64) -> Grid2D {
        Grid2D {
            rules: self.rules.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> Grid2D {
        self.scale(Complex64::new(c, 0.0))
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: Complex64, other: &Grid2D) -> Result<(), GridMismatch> {
        self.check_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Grid2D) -> Result<Grid2D, GridMismatch> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn try_sub(&self, other: &Grid2D) -> Result<Grid2D, GridMismatch> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    /// The same samples viewed on the transposed rectangle.
    pub fn transposed(&self, rules_t: Arc<TensorRule>) -> Grid2D {
        let (nx, ny) = (self.nx(), self.ny());
        let mut values = vec![Complex64::new(0.0, 0.0); nx * ny];
        for p in 0..nx {
            for q in 0..ny {
                values[q * nx + p] = self.values[p * ny + q];
            }
        }
        Grid2D {
            rules: rules_t,
            values,
        }
    }
}

impl Add for &Grid2D {
    type Output = Grid2D;

    /// Panics on a grid mismatch; use `try_add` for the fallible form.
    fn add(self, rhs: &Grid2D) -> Grid2D {
        self.try_add(rhs).expect("grids must match")
    }
}

impl Sub for &Grid2D {
    type Output = Grid2D;

    fn sub(self, rhs: &Grid2D) -> Grid2D {
        self.try_sub(rhs).expect("grids must match")
    }
}

impl Mul<Complex64> for &Grid2D {
    type Output = Grid2D;

    fn mul(self, rhs: Complex64) -> Grid2D {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn real_integral(rule: &QuadRule1D, f: impl Fn(f64) -> f64) -> f64 {
        rule.integrate_real(f)
    }

    #[test]
    fn small_rules() {
        let r = build_rule(0.0, 1.0, 1, &[]).unwrap();
        assert_eq!(r.nodes(), &[0.5]);
        assert_eq!(r.weights(), &[1.0]);

        let r = build_rule(-1.0, 1.0, 2, &[]).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes()[0] + s).abs() < 1e-15);
        assert!((r.nodes()[1] - s).abs() < 1e-15);
        assert!((r.weights()[0] - 1.0).abs() < 1e-15);
        assert!((r.weights()[1] - 1.0).abs() < 1e-15);

        let r = build_rule(0.0, 1.0, 2, &[0.5]).unwrap();
        assert_eq!(r.len(), 4);
        assert_eq!(r.panels(), &[(0.0, 0.5), (0.5, 1.0)]);
    }

    #[test]
    fn rule_errors() {
        assert!(matches!(
            build_rule(1.0, 1.0, 4, &[]),
            Err(QuadError::BadInterval { .. })
        ));
        assert!(matches!(
            build_rule(2.0, 1.0, 4, &[]),
            Err(QuadError::BadInterval { .. })
        ));
        assert_eq!(
            build_rule(0.0, 1.0, 4, &[1.0]),
            Err(QuadError::BadBreakpoint(1.0))
        );
        assert_eq!(
            build_rule(0.0, 1.0, 4, &[-0.2]),
            Err(QuadError::BadBreakpoint(-0.2))
        );
        assert_eq!(build_rule(0.0, 1.0, 0, &[]), Err(QuadError::BadOrder));
    }

    #[test]
    fn integrate_1d_examples() {
        let r = build_rule(0.0, 1.0, 2, &[]).unwrap();
        assert!((real_integral(&r, |t| t * t) - 1.0 / 3.0).abs() < 1e-15);
        for order in [1, 3, 7, 32] {
            let r = build_rule(0.0, 1.0, order, &[0.3]).unwrap();
            assert!((real_integral(&r, |_| 1.0) - 1.0).abs() < 1e-14);
        }
        // antiderivative of t/(2-t) is -t - 2 ln(2 - t)
        let exact = 2.0 * 2f64.ln() - 1.0;
        let r = build_rule(0.0, 1.0, 32, &[]).unwrap();
        assert!((real_integral(&r, |t| t / (2.0 - t)) - exact).abs() < 1e-12);
        assert!((exact - 0.3862943611).abs() < 1e-10);
    }

    #[test]
    fn integrate_complex_values() {
        let r = build_rule(0.0, 1.0, 8, &[]).unwrap();
        let v: Result<Complex64, ()> = r.integrate(|t| Ok(Complex64::new(t, 2.0 * t)));
        let v = v.unwrap();
        assert!((v - Complex64::new(0.5, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn integrate_2d_examples() {
        let rx = build_rule(0.0, 1.0, 2, &[]).unwrap();
        let tr = TensorRule::new(rx.clone(), rx);
        let one: Result<Complex64, ()> = tr.integrate(|_, _| Ok(c(1.0)));
        assert!((one.unwrap() - c(1.0)).norm() < 1e-15);
        let xy: Result<Complex64, ()> = tr.integrate(|x, y| Ok(c(x * y)));
        assert!((xy.unwrap() - c(0.25)).norm() < 1e-15);
        let odd: Result<Complex64, ()> = tr.integrate(|x, y| Ok(c((x - 0.5) * (y - 0.5))));
        assert!(odd.unwrap().norm() < 1e-15);
    }

    #[test]
    fn refinement_convergence() {
        let fixtures: [fn(f64) -> f64; 3] =
            [|t| t / (2.0 - t), |t| (3.0 * t).sin(), |t| (t * t).exp()];
        for f in fixtures {
            for order in [16, 24, 32] {
                let a = real_integral(&build_rule(0.0, 1.0, order, &[]).unwrap(), f);
                let b = real_integral(&build_rule(0.0, 1.0, 2 * order, &[]).unwrap(), f);
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn piecewise_constant_is_exact() {
        let e = crate::expr::parse_expr("piecewise([0,0.3]:2; [0.3,0.7]:-1; [0.7,1]:5)").unwrap();
        for order in [1, 2, 5, 32] {
            let r = build_rule(0.0, 1.0, order, &e.breakpoints_in(0.0, 1.0)).unwrap();
            let v = real_integral(&r, |t| e.eval(t).unwrap());
            assert!((v - (0.6 - 0.4 + 1.5)).abs() < 1e-14, "order {order}: {v}");
        }
    }

    #[test]
    fn grid_norm_and_inner() {
        let rx = build_rule(0.0, 1.0, 4, &[]).unwrap();
        let rules = Arc::new(TensorRule::new(rx.clone(), rx));
        let z = Grid2D::zeros(rules.clone());
        assert_eq!(z.norm(), 0.0);
        let f = Grid2D::from_real_fn(rules.clone(), |x, _| x);
        assert!((f.norm() - (1.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let g = Grid2D::from_real_fn(rules.clone(), |_, y| y);
        assert!((f.inner(&g).unwrap() - c(0.25)).norm() < 1e-15);
        let other = Arc::new(TensorRule::new(
            build_rule(0.0, 2.0, 4, &[]).unwrap(),
            build_rule(0.0, 1.0, 4, &[]).unwrap(),
        ));
        assert_eq!(f.inner(&Grid2D::zeros(other)), Err(GridMismatch));
    }

    proptest! {
        #[test]
        fn polynomial_exactness(order in 1usize..40, coeffs in proptest::collection::vec(-1.0f64..1.0, 1..80),
                                lo in -3.0f64..0.0, len in 0.5f64..4.0) {
            let degree = (2 * order - 1).min(coeffs.len() - 1);
            let coeffs = &coeffs[..=degree];
            let hi = lo + len;
            let r = build_rule(lo, hi, order, &[]).unwrap();
            let num = real_integral(&r, |t| coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c));
            let exact: f64 = coeffs.iter().enumerate().map(|(k, c)| {
                let k1 = (k + 1) as i32;
                c * (hi.powi(k1) - lo.powi(k1)) / k1 as f64
            }).sum();
            let scale: f64 = coeffs.iter().enumerate().map(|(k, c)| {
                c.abs() * lo.abs().max(hi.abs()).powi(k as i32 + 1)
            }).sum::<f64>().max(1.0);
            prop_assert!((num - exact).abs() <= 1e-13 * scale, "{num} vs {exact}");
        }

        #[test]
        fn weight_sum_and_node_placement(order in 1usize..64, cuts in proptest::collection::vec(0.01f64..0.99, 0..5)) {
            let r = build_rule(0.0, 1.0, order, &cuts).unwrap();
            let total: f64 = r.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(r.weights().iter().all(|&w| w > 0.0));
            for (i, &(a, b)) in r.panels().iter().enumerate() {
                for &x in &r.nodes()[i * order..(i + 1) * order] {
                    prop_assert!(x > a && x < b);
                }
            }
            for w in r.nodes().windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            for &b in &cuts {
                prop_assert!(r.panels().iter().any(|&(lo, _)| lo == b));
            }
        }
    }
}
