//! Radial drift families and their exact antiderivatives.
//!
//! Every drift here is radial and points inward: `B(x) = b(|x|) x/|x|` with
//! `b ≤ 0`. Downstream code never integrates `b` numerically. It consumes
//! the nonnegative scalar
//!
//! ```text
//! D(a, r) = -∫_a^r b(t) dt,    0 ≤ a ≤ r ≤ 1
//! ```
//!
//! in closed form, and only ever exponentiates differences of `D`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A member of one of the radial drift families.
///
/// Serialized as a flat JSON object tagged by `family`, e.g.
/// `{"family": "truncated_inverse", "C": 1.0, "m": 100}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    /// `b(r) = -C/(1-r)` for `r ≤ 1-1/m`, frozen at `-Cm` beyond.
    TruncatedInverse {
        #[serde(rename = "C")]
        c: f64,
        m: u64,
    },
    /// `b(r) = -C/(1-r)^(1-β)`, integrable up to the boundary.
    PowerRegularized {
        #[serde(rename = "C")]
        c: f64,
        beta: f64,
    },
    /// `b(r) = -ε/(1-r)`.
    SmallConstant { epsilon: f64 },
    /// Piecewise-linear `b` through `(radii[i], values[i])`, with
    /// `radii` running from 0 to 1.
    Tabulated { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftFamily {
    TruncatedInverse,
    PowerRegularized,
    SmallConstant,
    Tabulated,
}

/// Outcome of [`DriftSpec::limiting_bound_holds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitingBound {
    /// `sup (1-r)|b(r)|` over the probe grid.
    pub sup: f64,
    /// The family's nominal constant (`C`, `C`, `ε`, or `max |b|`).
    pub nominal: f64,
    pub holds: bool,
}

impl DriftSpec {
    pub fn truncated(c: f64, m: u64) -> Self {
        DriftSpec::TruncatedInverse { c, m }
    }

    pub fn power(c: f64, beta: f64) -> Self {
        DriftSpec::PowerRegularized { c, beta }
    }

    pub fn small(epsilon: f64) -> Self {
        DriftSpec::SmallConstant { epsilon }
    }

    /// The drift `b ≡ 0`, as a two-node table.
    pub fn zero() -> Self {
        DriftSpec::Tabulated {
            radii: vec![0.0, 1.0],
            values: vec![0.0, 0.0],
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: DriftSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn family(&self) -> DriftFamily {
        match self {
            DriftSpec::TruncatedInverse { .. } => DriftFamily::TruncatedInverse,
            DriftSpec::PowerRegularized { .. } => DriftFamily::PowerRegularized,
            DriftSpec::SmallConstant { .. } => DriftFamily::SmallConstant,
            DriftSpec::Tabulated { .. } => DriftFamily::Tabulated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            DriftSpec::TruncatedInverse { c, m } => {
                if !(c.is_finite() && *c > 0.0) {
                    return bad(format!("C must be positive, got {c}"));
                }
                if *m < 3 {
                    return bad(format!("m must be at least 3, got {m}"));
                }
            }
            DriftSpec::PowerRegularized { c, beta } => {
                if !(c.is_finite() && *c > 0.0) {
                    return bad(format!("C must be positive, got {c}"));
                }
                if !(*beta > 0.0 && *beta < 1.0) {
                    return bad(format!("beta must lie in (0, 1), got {beta}"));
                }
            }
            DriftSpec::SmallConstant { epsilon } => {
                if !(epsilon.is_finite() && *epsilon > 0.0) {
                    return bad(format!("epsilon must be positive, got {epsilon}"));
                }
            }
            DriftSpec::Tabulated { radii, values } => {
                if radii.len() < 2 || radii.len() != values.len() {
                    return bad("table needs at least two (radius, value) pairs".into());
                }
                if radii[0] != 0.0 || *radii.last().unwrap() != 1.0 {
                    return bad("table radii must start at 0 and end at 1".into());
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("table radii must be strictly increasing".into());
                }
                if values.iter().any(|v| !v.is_finite() || *v > 0.0) {
                    return bad("table values must be finite and nonpositive".into());
                }
            }
        }
        Ok(())
    }

    /// Radius `1 - 1/m` where the truncated drift freezes.
    pub fn branch_point(&self) -> Option<f64> {
        match self {
            DriftSpec::TruncatedInverse { m, .. } => Some(1.0 - 1.0 / *m as f64),
            _ => None,
        }
    }

    pub fn truncation(&self) -> Option<u64> {
        match self {
            DriftSpec::TruncatedInverse { m, .. } => Some(*m),
            _ => None,
        }
    }

    /// The strength constant `C` (or `ε`); `None` for tables.
    pub fn strength(&self) -> Option<f64> {
        match self {
            DriftSpec::TruncatedInverse { c, .. } | DriftSpec::PowerRegularized { c, .. } => {
                Some(*c)
            }
            DriftSpec::SmallConstant { epsilon } => Some(*epsilon),
            DriftSpec::Tabulated { .. } => None,
        }
    }

    /// Whether `D(a, 1)` is finite.
    pub fn integrable_to_boundary(&self) -> bool {
        !matches!(self, DriftSpec::SmallConstant { .. })
    }

    /// `sup |b|` on `[0, 1)`, when the drift is bounded.
    pub fn sup_magnitude(&self) -> Option<f64> {
        match self {
            DriftSpec::TruncatedInverse { c, m } => Some(c * *m as f64),
            DriftSpec::Tabulated { values, .. } => {
                Some(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
            }
            _ => None,
        }
    }

    /// Signed radial component `b(r) = B·r̂`.
    pub fn radial_component(&self, r: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::Domain(format!("radius {r} outside [0, 1)")));
        }
        Ok(self.radial_component_unchecked(r))
    }

    pub(crate) fn radial_component_unchecked(&self, r: f64) -> f64 {
        match self {
            DriftSpec::TruncatedInverse { c, m } => {
                let m = *m as f64;
                if r <= 1.0 - 1.0 / m {
                    -c / (1.0 - r)
                } else {
                    -c * m
                }
            }
            DriftSpec::PowerRegularized { c, beta } => -c / (1.0 - r).powf(1.0 - beta),
            DriftSpec::SmallConstant { epsilon } => -epsilon / (1.0 - r),
            DriftSpec::Tabulated { radii, values } => {
                let i = segment_index(radii, r);
                let t = (r - radii[i]) / (radii[i + 1] - radii[i]);
                values[i] + t * (values[i + 1] - values[i])
            }
        }
    }

    /// `D(a, r) = -∫_a^r b(t) dt` for `0 ≤ a ≤ r ≤ 1`.
    ///
    /// `r = 1` is accepted whenever the integral converges there, which is
    /// every family except [`DriftSpec::SmallConstant`].
    pub fn drift_integral(&self, a: f64, r: f64) -> Result<f64> {
        if !(a >= 0.0 && r <= 1.0) {
            return Err(Error::Domain(format!("interval [{a}, {r}] not inside [0, 1]")));
        }
        if a > r {
            return Err(Error::Domain(format!("lower limit {a} exceeds upper limit {r}")));
        }
        if r == 1.0 && !self.integrable_to_boundary() {
            return Err(Error::DivergentIntegral(
                "drift integral up to r = 1 is infinite for this family".into(),
            ));
        }
        Ok(self.drift_integral_unchecked(a, r))
    }

    pub(crate) fn drift_integral_unchecked(&self, a: f64, r: f64) -> f64 {
        if a == r {
            return 0.0;
        }
        match self {
            DriftSpec::TruncatedInverse { c, m } => {
                let mf = *m as f64;
                let inv_m = 1.0 / mf;
                let knee = 1.0 - inv_m;
                // ln(1 - x), exact at the knee
                let log1m = |x: f64| if x >= knee { -mf.ln() } else { (-x).ln_1p() };
                let inner = log1m(a.min(knee)) - log1m(r.min(knee));
                let outer_hi = if r > knee { (r - 1.0) + inv_m } else { 0.0 };
                let outer_lo = if a > knee { (a - 1.0) + inv_m } else { 0.0 };
                c * inner + c * mf * (outer_hi - outer_lo)
            }
            DriftSpec::PowerRegularized { c, beta } => {
                c / beta * ((1.0 - a).powf(*beta) - (1.0 - r).powf(*beta))
            }
            DriftSpec::SmallConstant { epsilon } => epsilon * ((-a).ln_1p() - (-r).ln_1p()),
            DriftSpec::Tabulated { radii, values } => {
                tabulated_primitive(radii, values, a) - tabulated_primitive(radii, values, r)
            }
        }
    }

    /// `D(0, s)` given `gap = 1 - s` exactly; avoids recomputing `1 - s`
    /// next to the boundary.
    pub(crate) fn drift_from_origin(&self, s: f64, gap: f64) -> f64 {
        match self {
            DriftSpec::TruncatedInverse { c, m } => {
                let inv_m = 1.0 / *m as f64;
                if gap >= inv_m {
                    -c * gap.ln()
                } else {
                    c * (*m as f64).ln() + c * *m as f64 * (inv_m - gap)
                }
            }
            DriftSpec::PowerRegularized { c, beta } => c / beta * (1.0 - gap.powf(*beta)),
            DriftSpec::SmallConstant { epsilon } => -epsilon * gap.ln(),
            DriftSpec::Tabulated { .. } => self.drift_integral_unchecked(0.0, s),
        }
    }

    /// `D(a, r)` with orientation: `-D(r, a)` when `r < a`.
    pub(crate) fn signed_drift_integral(&self, a: f64, r: f64) -> f64 {
        if a <= r {
            self.drift_integral_unchecked(a, r)
        } else {
            -self.drift_integral_unchecked(r, a)
        }
    }

    pub fn nominal_bound(&self) -> f64 {
        match self {
            DriftSpec::TruncatedInverse { c, .. } | DriftSpec::PowerRegularized { c, .. } => *c,
            DriftSpec::SmallConstant { epsilon } => *epsilon,
            DriftSpec::Tabulated { values, .. } => {
                values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
            }
        }
    }

    /// Checks `(1 - r)|b(r)| ≤ nominal` over `grid`.
    pub fn limiting_bound_holds(&self, grid: &[f64]) -> LimitingBound {
        let sup = grid
            .iter()
            .filter(|r| (0.0..1.0).contains(*r))
            .map(|&r| (1.0 - r) * self.radial_component_unchecked(r).abs())
            .fold(0.0_f64, f64::max);
        let nominal = self.nominal_bound();
        LimitingBound {
            sup,
            nominal,
            holds: sup <= nominal * (1.0 + 1e-12),
        }
    }
}

fn segment_index(radii: &[f64], r: f64) -> usize {
    let i = radii.partition_point(|&x| x <= r);
    i.saturating_sub(1).min(radii.len() - 2)
}

/// `∫_0^x b` for a piecewise-linear table (trapezoids are exact).
fn tabulated_primitive(radii: &[f64], values: &[f64], x: f64) -> f64 {
    let i = segment_index(radii, x);
    let mut acc = 0.0;
    for k in 0..i {
        acc += 0.5 * (radii[k + 1] - radii[k]) * (values[k] + values[k + 1]);
    }
    let t = (x - radii[i]) / (radii[i + 1] - radii[i]);
    let bx = values[i] + t * (values[i + 1] - values[i]);
    acc + 0.5 * (x - radii[i]) * (values[i] + bx)
}
