//! Weak-form certificate for radial Green's profiles.
//!
//! For a radial test function `φ` with compact support in the ball, the
//! profile must satisfy
//!
//! ```text
//! ∫_Ω ∇G·∇φ − (B·∇G) φ dx = φ(0),
//! ```
//!
//! the weak form of the operator whose radial reduction is
//! `G'' + (n-1)/r G' + b G' = 0`. In polar coordinates this is
//!
//! ```text
//! R = ω_{n-1} ∫_0^1 r^{n-1} G'(r) [φ'(r) − b(r) φ(r)] dr − φ(0) = 0.
//! ```
//!
//! `r^{n-1} G'` stays bounded at the pole, so the integrand does too. A
//! profile whose flux constant is off by a factor `λ` gives
//! `R = (λ − 1) φ(0)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate, linear_panels, Panel, QuadratureConfig};
use crate::radial::{build_profile, sphere_area, RadialGreenProfile};

/// Radial test function `φ(|x|)`, smooth at the origin (`φ'(0) = 0`) and
/// vanishing on `[support_radius, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialTestFunction {
    Zero,
    /// `(1 − (r/R)²)^k` for `r < R`.
    Bump { radius: f64, power: u32 },
    /// 1 on `[0, flat]`, C^∞ decay to 0 at `support`.
    Plateau { flat: f64, support: f64 },
    Combination(Vec<(f64, RadialTestFunction)>),
}

fn smooth_kernel(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn smooth_kernel_prime(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        smooth_kernel(t) / (t * t)
    }
}

impl RadialTestFunction {
    pub fn bump(radius: f64, power: u32) -> Self {
        RadialTestFunction::Bump { radius, power }
    }

    pub fn plateau() -> Self {
        RadialTestFunction::Plateau {
            flat: 0.4,
            support: 0.7,
        }
    }

    pub fn id(&self) -> String {
        match self {
            RadialTestFunction::Zero => "zero".into(),
            RadialTestFunction::Bump { radius, power } => format!("bump_k{power}_R{radius}"),
            RadialTestFunction::Plateau { flat, support } => format!("plateau_{flat}_{support}"),
            RadialTestFunction::Combination(terms) => terms
                .iter()
                .map(|(c, f)| format!("{c}*{}", f.id()))
                .collect::<Vec<_>>()
                .join("+"),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            RadialTestFunction::Zero => 0.0,
            RadialTestFunction::Bump { radius, power } => {
                if r >= *radius {
                    0.0
                } else {
                    (1.0 - (r / radius).powi(2)).powi(*power as i32)
                }
            }
            RadialTestFunction::Plateau { flat, support } => {
                let t = (r - flat) / (support - flat);
                let (a, b) = (smooth_kernel(t), smooth_kernel(1.0 - t));
                if a == 0.0 {
                    1.0
                } else {
                    1.0 - a / (a + b)
                }
            }
            RadialTestFunction::Combination(terms) => {
                terms.iter().map(|(c, f)| c * f.value(r)).sum()
            }
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match self {
            RadialTestFunction::Zero => 0.0,
            RadialTestFunction::Bump { radius, power } => {
                if r >= *radius {
                    0.0
                } else {
                    let k = *power as i32;
                    let base = 1.0 - (r / radius).powi(2);
                    -2.0 * k as f64 * r / (radius * radius) * base.powi(k - 1)
                }
            }
            RadialTestFunction::Plateau { flat, support } => {
                let width = support - flat;
                let t = (r - flat) / width;
                let (a, b) = (smooth_kernel(t), smooth_kernel(1.0 - t));
                if a == 0.0 || b == 0.0 {
                    return 0.0;
                }
                let (da, db) = (smooth_kernel_prime(t), -smooth_kernel_prime(1.0 - t));
                let ds = (da * b - a * db) / ((a + b) * (a + b));
                -ds / width
            }
            RadialTestFunction::Combination(terms) => {
                terms.iter().map(|(c, f)| c * f.derivative(r)).sum()
            }
        }
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value(0.0)
    }

    /// Smallest `R` with `φ ≡ 0` on `[R, 1]`.
    pub fn support_radius(&self) -> f64 {
        match self {
            RadialTestFunction::Zero => 0.0,
            RadialTestFunction::Bump { radius, .. } => *radius,
            RadialTestFunction::Plateau { support, .. } => *support,
            RadialTestFunction::Combination(terms) => terms
                .iter()
                .map(|(_, f)| f.support_radius())
                .fold(0.0, f64::max),
        }
    }

    /// Radii where `φ` changes formula.
    fn kinks(&self, out: &mut Vec<f64>) {
        match self {
            RadialTestFunction::Zero => {}
            RadialTestFunction::Bump { radius, .. } => out.push(*radius),
            RadialTestFunction::Plateau { flat, support } => out.extend([*flat, *support]),
            RadialTestFunction::Combination(terms) => terms.iter().for_each(|(_, f)| f.kinks(out)),
        }
    }
}

/// The fixed family used to certify profiles: bumps `(1 − (r/R)²)^k` for
/// `k ∈ {2,3,4}`, `R ∈ {0.3, 0.6, 0.8}`, and one plateau.
pub fn certified_family() -> Vec<RadialTestFunction> {
    let mut family = Vec::with_capacity(10);
    for power in [2, 3, 4] {
        for radius in [0.3, 0.6, 0.8] {
            family.push(RadialTestFunction::bump(radius, power));
        }
    }
    family.push(RadialTestFunction::plateau());
    family
}

/// `ω ∫_0^R r^{n-1} G' (φ' − bφ) dr`; the identity says this equals `φ(0)`.
fn weak_form_integral(
    profile: &RadialGreenProfile,
    tf: &RadialTestFunction,
    q: &QuadratureConfig,
) -> Result<f64> {
    let support = tf.support_radius();
    if support >= 1.0 {
        return Err(Error::Domain(format!(
            "test function support reaches the boundary (R = {support})"
        )));
    }
    if support <= 0.0 {
        return Ok(0.0);
    }
    let mut cuts = Vec::new();
    tf.kinks(&mut cuts);
    cuts.extend(profile.spec.branch_point());
    let panels: Vec<Panel> = linear_panels(0.0, support, &cuts);
    let spec = &profile.spec;
    let est = integrate(
        |r: f64| {
            let b = spec.radial_component_unchecked(r);
            profile.flux_density(r) * (tf.derivative(r) - b * tf.value(r))
        },
        &panels,
        q,
    )?;
    Ok(sphere_area(profile.n) * est.value)
}

/// Residual `R` of the weak-form identity for one test function.
pub fn identity_residual(
    profile: &RadialGreenProfile,
    tf: &RadialTestFunction,
    q: &QuadratureConfig,
) -> Result<f64> {
    if *tf == RadialTestFunction::Zero {
        return Ok(0.0);
    }
    Ok(weak_form_integral(profile, tf, q)? - tf.value_at_zero())
}

/// Scale factor `λ` that zeroes the residual of `λ·G` for the reference bump
/// `(1 − (r/0.8)²)³`. Equals 1 when the pole normalization is right.
pub fn normalization_search(spec: &DriftSpec, n: usize, q: &QuadratureConfig) -> Result<f64> {
    let profile = build_profile(spec, n, 16, q)?;
    let reference = RadialTestFunction::bump(0.8, 3);
    let a = weak_form_integral(&profile, &reference, q)?;
    Ok(reference.value_at_zero() / a)
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualEntry {
    pub phi: String,
    #[serde(rename = "R")]
    pub r: f64,
}

/// JSON verification report for one profile.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub spec: DriftSpec,
    pub n: usize,
    pub residuals: Vec<ResidualEntry>,
    pub max_abs_residual: f64,
}

pub fn verify_profile(
    profile: &RadialGreenProfile,
    family: &[RadialTestFunction],
    q: &QuadratureConfig,
) -> Result<VerificationReport> {
    let residuals = family
        .par_iter()
        .map(|tf| {
            Ok(ResidualEntry {
                phi: tf.id(),
                r: identity_residual(profile, tf, q)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_residual = residuals.iter().map(|e| e.r.abs()).fold(0.0, f64::max);
    Ok(VerificationReport {
        spec: profile.spec.clone(),
        n: profile.n,
        residuals,
        max_abs_residual,
    })
}

/// Finite-quadrature stand-ins for the Sobolev memberships of `G`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SobolevCheck {
    /// `∫_0^1 |G'| r^{n-1} dr`
    pub gradient_l1: f64,
    /// `∫_s^1 |G'|² r^{n-1} dr`
    pub gradient_l2_outside: f64,
    pub excluded_radius: f64,
}

pub fn sobolev_check(
    profile: &RadialGreenProfile,
    excluded_radius: f64,
    q: &QuadratureConfig,
) -> Result<SobolevCheck> {
    if !(excluded_radius > 0.0 && excluded_radius < 1.0) {
        return Err(Error::Domain(format!("radius {excluded_radius} outside (0, 1)")));
    }
    let gamma = q.boundary_grading;
    let mut panels = Vec::new();
    if let Some(knee) = profile.spec.branch_point() {
        panels.push(Panel::Linear { lo: 0.0, hi: knee });
        panels.push(Panel::TowardOne { lo: knee, gamma });
    } else {
        panels.push(Panel::Linear { lo: 0.0, hi: 0.5 });
        panels.push(Panel::TowardOne { lo: 0.5, gamma });
    }
    let l1 = integrate(|r| profile.flux_density(r).abs(), &panels, q)?.value;
    let lo = excluded_radius;
    let mut panels = Vec::new();
    match profile.spec.branch_point() {
        Some(knee) if lo < knee => {
            panels.push(Panel::Linear { lo, hi: knee });
            panels.push(Panel::TowardOne { lo: knee, gamma });
        }
        _ => panels.push(Panel::TowardOne { lo, gamma }),
    }
    let n = profile.n as i32;
    let l2 = integrate(
        |r| {
            let d = profile.flux_density(r);
            d * d / r.powi(n - 1)
        },
        &panels,
        q,
    )?
    .value;
    Ok(SobolevCheck {
        gradient_l1: l1,
        gradient_l2_outside: l2,
        excluded_radius,
    })
}
