//! Globally adaptive Gauss–Kronrod (10/21) quadrature over mapped panels.
//!
//! An integral over `[a, c]` is handed in as a list of [`Panel`]s. Each panel
//! carries a change of variables that flattens the behaviour expected at its
//! ends (the `s^{1-n}` pole at the origin, the `(1-s)^{-C}` growth toward the
//! truncation knee, the boundary layer at `s = 1`). Subintervals of all panels
//! share one priority queue, so the tolerance applies to the panel sum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances and grading for boundary-layer integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Exponent `γ ≥ 1` of the substitution `s = 1 - (1 - a) u^γ` used on
    /// panels that end at `r = 1`, and of the profile mesh near `r = 1`.
    pub boundary_grading: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 10_000,
            boundary_grading: 3.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Usage("quadrature tolerances must be positive".into()));
        }
        if !(self.boundary_grading >= 1.0) {
            return Err(Error::Usage("boundary grading must be at least 1".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::Usage("max_subdivisions must be positive".into()));
        }
        Ok(())
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

/// Result of a converged integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

/// A piece `[lo, hi]` of the integration range together with the change of
/// variables applied on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Panel {
    Linear { lo: f64, hi: f64 },
    /// `s = e^t`; flattens `s^{-k}` near a small `lo`.
    LogPole { lo: f64, hi: f64 },
    /// `1 - s = e^t`; flattens `(1 - s)^{-1}` growth toward `hi < 1`.
    LogGap { lo: f64, hi: f64 },
    /// `s = 1 - (1 - lo) u^γ` on `[lo, 1]`.
    TowardOne { lo: f64, gamma: f64 },
}

impl Panel {
    pub fn lo(&self) -> f64 {
        match *self {
            Panel::Linear { lo, .. }
            | Panel::LogPole { lo, .. }
            | Panel::LogGap { lo, .. }
            | Panel::TowardOne { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            Panel::Linear { hi, .. } | Panel::LogPole { hi, .. } | Panel::LogGap { hi, .. } => hi,
            Panel::TowardOne { .. } => 1.0,
        }
    }

    /// Range of the mapped variable.
    fn mapped_range(&self) -> (f64, f64) {
        match *self {
            Panel::Linear { lo, hi } => (lo, hi),
            Panel::LogPole { lo, hi } => (lo.ln(), hi.ln()),
            Panel::LogGap { lo, hi } => ((-hi).ln_1p(), (-lo).ln_1p()),
            Panel::TowardOne { .. } => (0.0, 1.0),
        }
    }

    /// Returns `(s(t), 1 - s(t), ds/dt)` with the orientation folded into
    /// the sign so that the mapped integral always runs low to high. The gap
    /// is exact for the panels that approach 1.
    #[inline]
    fn map(&self, t: f64) -> (f64, f64, f64) {
        match *self {
            Panel::Linear { .. } => (t, 1.0 - t, 1.0),
            Panel::LogPole { .. } => {
                let s = t.exp();
                (s, 1.0 - s, s)
            }
            Panel::LogGap { .. } => {
                let gap = t.exp();
                (1.0 - gap, gap, gap)
            }
            Panel::TowardOne { lo, gamma } => {
                let w = 1.0 - lo;
                let gap = w * t.powf(gamma);
                (1.0 - gap, gap, gamma * w * t.powf(gamma - 1.0))
            }
        }
    }
}

/// Splits `[lo, hi]` into linear panels at the given interior points.
pub fn linear_panels(lo: f64, hi: f64, cuts: &[f64]) -> Vec<Panel> {
    let mut pts = vec![lo];
    pts.extend(cuts.iter().copied().filter(|&c| c > lo && c < hi));
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts.windows(2)
        .map(|w| Panel::Linear { lo: w[0], hi: w[1] })
        .collect()
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

struct Rule {
    value: f64,
    error: f64,
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Rule {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(centre - x);
        let f2 = f(centre + x);
        fv1[j] = f1;
        fv2[j] = f2;
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Rule { value, error }
}

struct Piece {
    panel: usize,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over the union of `panels`.
pub fn integrate<F>(f: F, panels: &[Panel], cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    integrate_with_gap(|s, _| f(s), panels, cfg)
}

/// As [`integrate`], for integrands `f(s, 1 - s)` that need the distance
/// to 1 without cancellation.
pub fn integrate_with_gap<F>(f: F, panels: &[Panel], cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(f64, f64) -> f64,
{
    let f = &f;
    let mapped: Vec<_> = panels
        .iter()
        .map(|p| move |t: f64| {
            let (s, gap, jac) = p.map(t);
            let v = f(s, gap);
            if jac == 0.0 {
                0.0
            } else {
                v * jac
            }
        })
        .collect();

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (k, p) in panels.iter().enumerate() {
        let (a, b) = p.mapped_range();
        if a == b {
            continue;
        }
        let rule = kronrod21(&mapped[k], a, b);
        total += rule.value;
        total_err += rule.error;
        heap.push(Piece {
            panel: k,
            a,
            b,
            value: rule.value,
            error: rule.error,
        });
    }

    let mut subdivisions = 0;
    loop {
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::Quadrature {
                estimate: total,
                error_estimate: total_err,
                subdivisions,
            });
        }
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(Estimate {
                value: total,
                error: total_err,
                subdivisions,
            });
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: total,
                error_estimate: total_err,
                subdivisions,
            });
        }
        let Some(worst) = heap.pop() else {
            unreachable!("nonzero error with an empty queue")
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval cannot be split further in f64
            return Err(Error::Quadrature {
                estimate: total,
                error_estimate: total_err,
                subdivisions,
            });
        }
        let left = kronrod21(&mapped[worst.panel], worst.a, mid);
        let right = kronrod21(&mapped[worst.panel], mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        subdivisions += 1;
        heap.push(Piece {
            panel: worst.panel,
            a: worst.a,
            b: mid,
            value: left.value,
            error: left.error,
        });
        heap.push(Piece {
            panel: worst.panel,
            a: mid,
            b: worst.b,
            value: right.value,
            error: right.error,
        });
        // refresh the running sums occasionally to shed accumulated rounding
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>();
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_exact_for_degree_31() {
        let rule = kronrod21(&|x: f64| x.powi(30) + x.powi(31), -1.0, 1.0);
        assert!((rule.value - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn mapped_panels_agree_with_closed_forms() {
        // ∫_{0.01}^{0.5} s^{-2} ds = 100 - 2
        let est = integrate(|s| s.powi(-2), &[Panel::LogPole { lo: 0.01, hi: 0.5 }], &cfg()).unwrap();
        assert!((est.value - 98.0).abs() < 1e-9 * 98.0);
        // ∫_{0.5}^{1-1e-6} (1-s)^{-1} ds = ln(0.5e6)
        let est = integrate(
            |s| 1.0 / (1.0 - s),
            &[Panel::LogGap { lo: 0.5, hi: 1.0 - 1e-6 }],
            &cfg(),
        )
        .unwrap();
        assert!((est.value - 5e5_f64.ln()).abs() < 1e-8);
        // ∫_{0.5}^{1} (1-s)^{-1/2} ds = 2 sqrt(0.5); γ = 2 makes the mapped
        // integrand constant
        let est = integrate(
            |s| (1.0 - s).powf(-0.5),
            &[Panel::TowardOne { lo: 0.5, gamma: 2.0 }],
            &cfg(),
        )
        .unwrap();
        assert!((est.value - 2.0 * 0.5_f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn multiple_panels_sum() {
        let panels = linear_panels(0.0, 3.0, &[1.0, 2.0]);
        assert_eq!(panels.len(), 3);
        let est = integrate(|x| x * x, &panels, &cfg()).unwrap();
        assert!((est.value - 9.0).abs() < 1e-13);
    }

    #[test]
    fn exhausting_subdivisions_reports_estimate() {
        let tight = QuadratureConfig {
            max_subdivisions: 3,
            rel_tol: 1e-14,
            ..cfg()
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), &[Panel::Linear { lo: 1e-4, hi: 1.0 }], &tight)
            .unwrap_err();
        match err {
            Error::Quadrature {
                estimate,
                error_estimate,
                subdivisions,
            } => {
                assert!(estimate.is_finite());
                assert!(error_estimate > 0.0);
                assert_eq!(subdivisions, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
