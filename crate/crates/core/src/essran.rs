//! Essential ranges of piecewise-smooth weights and the spectral sets built
//! from them.

use num_complex::Complex64;
use serde::Serialize;

use crate::expr::{DomainError, Expr1D};

/// Samples per non-constant piece (endpoints included).
pub const RANGE_SAMPLES: usize = 4096;

/// Essential range of a real function: closed intervals plus atoms, i.e.
/// values attained on sets of positive measure.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EssRange {
    /// Sorted, disjoint closed intervals.
    pub intervals: Vec<(f64, f64)>,
    /// `(value, measure)` pairs, sorted by value.
    pub atoms: Vec<(f64, f64)>,
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

fn merge_intervals(mut ivs: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ivs.len());
    for (lo, hi) in ivs {
        match out.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn merge_atoms(mut atoms: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (v, mu) in atoms {
        match out.last_mut() {
            Some(last) if same_value(last.0, v) => last.1 += mu,
            _ => out.push((v, mu)),
        }
    }
    out
}

/// Essential range of `h` on `[lo, hi]`.
///
/// Each smooth piece (between consecutive breakpoints) contributes either an
/// atom `(value, length)` when it is constant, or the interval spanned by
/// its samples. On failure the offending point is returned with the error.
pub fn essential_range(h: &Expr1D, lo: f64, hi: f64) -> Result<EssRange, (f64, DomainError)> {
    let mut cuts = vec![lo];
    cuts.extend(h.breakpoints_in(lo, hi));
    cuts.push(hi);
    let mut intervals = Vec::new();
    let mut atoms = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        if h.is_constant_on(a, b)? {
            let v = h.eval_on_piece(mid, mid).map_err(|e| (mid, e))?;
            atoms.push((v, b - a));
            continue;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for i in 0..=RANGE_SAMPLES {
            let t = a + (b - a) * i as f64 / RANGE_SAMPLES as f64;
            let v = h.eval_on_piece(t, mid).map_err(|e| (t, e))?;
            min = min.min(v);
            max = max.max(v);
        }
        intervals.push((min, max));
    }
    Ok(EssRange {
        intervals: merge_intervals(intervals),
        atoms: merge_atoms(atoms),
    })
}

impl EssRange {
    pub fn atom(&self, value: f64) -> Option<f64> {
        self.atoms
            .iter()
            .find(|(v, _)| same_value(*v, value))
            .map(|(_, mu)| *mu)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralPoint {
    pub value: f64,
    /// Measure of the level set that produced the point; zero for the point
    /// `0` when it comes only from the kernel of the operator.
    pub measure: f64,
    /// Eigenvalue of infinite multiplicity of the channel operator.
    pub eigenvalue: bool,
}

/// A closed subset of the real line made of intervals and isolated points.
/// Channel spectra always contain `0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSet {
    pub intervals: Vec<(f64, f64)>,
    pub points: Vec<SpectralPoint>,
}

impl SpectralSet {
    /// `{0}`, with `0` flagged as an eigenvalue of infinite multiplicity.
    pub fn zero() -> SpectralSet {
        SpectralSet {
            intervals: Vec::new(),
            points: vec![SpectralPoint {
                value: 0.0,
                measure: 0.0,
                eigenvalue: true,
            }],
        }
    }

    pub fn empty() -> SpectralSet {
        SpectralSet {
            intervals: Vec::new(),
            points: Vec::new(),
        }
    }

    fn add_point(&mut self, pt: SpectralPoint) {
        if let Some(existing) = self
            .points
            .iter_mut()
            .find(|p| same_value(p.value, pt.value))
        {
            existing.measure += pt.measure;
            existing.eigenvalue |= pt.eigenvalue;
        } else {
            self.points.push(pt);
            self.points.sort_by(|a, b| a.value.total_cmp(&b.value));
        }
    }

    /// Add an essential range; its atoms become flagged eigenvalues.
    pub fn absorb(&mut self, r: &EssRange) {
        let mut ivs = std::mem::take(&mut self.intervals);
        ivs.extend_from_slice(&r.intervals);
        self.intervals = merge_intervals(ivs);
        for &(value, measure) in &r.atoms {
            self.add_point(SpectralPoint {
                value,
                measure,
                eigenvalue: true,
            });
        }
    }

    pub fn union(&self, other: &SpectralSet) -> SpectralSet {
        let mut out = self.clone();
        let mut ivs = std::mem::take(&mut out.intervals);
        ivs.extend_from_slice(&other.intervals);
        out.intervals = merge_intervals(ivs);
        for &p in &other.points {
            out.add_point(p);
        }
        out
    }

    /// Distance from a complex number to the set.
    pub fn distance(&self, z: Complex64) -> f64 {
        let d_pts = self
            .points
            .iter()
            .map(|p| (z - p.value).norm())
            .fold(f64::INFINITY, f64::min);
        let d_ivs = self
            .intervals
            .iter()
            .map(|&(lo, hi)| {
                let dx = if z.re < lo {
                    lo - z.re
                } else if z.re > hi {
                    z.re - hi
                } else {
                    0.0
                };
                dx.hypot(z.im)
            })
            .fold(f64::INFINITY, f64::min);
        d_pts.min(d_ivs)
    }

    pub fn distance_real(&self, v: f64) -> f64 {
        self.distance(Complex64::new(v, 0.0))
    }

    pub fn contains_value(&self, v: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= v && v <= hi)
            || self.points.iter().any(|p| p.value == v)
    }

    /// Exact containment on the data structures.
    pub fn is_subset_of(&self, other: &SpectralSet) -> bool {
        self.intervals.iter().all(|&(lo, hi)| {
            other
                .intervals
                .iter()
                .any(|&(olo, ohi)| olo <= lo && hi <= ohi)
        }) && self.points.iter().all(|p| other.contains_value(p.value))
    }

    /// Nonzero values flagged as eigenvalues of infinite multiplicity.
    pub fn nonzero_eigenvalues(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.eigenvalue && p.value != 0.0)
            .map(|p| p.value)
            .collect()
    }

    /// All isolated point values, sorted.
    pub fn point_values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Smallest and largest element of the set.
    pub fn hull(&self) -> Option<(f64, f64)> {
        let lo = self
            .intervals
            .iter()
            .map(|i| i.0)
            .chain(self.points.iter().map(|p| p.value))
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .intervals
            .iter()
            .map(|i| i.1)
            .chain(self.points.iter().map(|p| p.value))
            .fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }

    /// The closed `margin`-neighbourhood of the set as sorted disjoint intervals.
    pub fn neighbourhood(&self, margin: f64) -> Vec<(f64, f64)> {
        let ivs = self
            .intervals
            .iter()
            .map(|&(lo, hi)| (lo - margin, hi + margin))
            .chain(
                self.points
                    .iter()
                    .map(|p| (p.value - margin, p.value + margin)),
            )
            .collect();
        merge_intervals(ivs)
    }
}
