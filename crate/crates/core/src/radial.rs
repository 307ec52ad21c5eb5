//! Radial Green's function with pole at the origin.
//!
//! Away from the pole the profile solves
//!
//! ```text
//! G'' + (n-1)/r G' + b(r) G' = 0,    G(1) = 0,
//! ```
//!
//! so `r^{n-1} G'(r) e^{D(r,1)}` is constant. The constant is fixed by the
//! pole condition `r^{n-1} G'(r) → -1/ω_{n-1}` as `r → 0`, which gives
//!
//! ```text
//! r^{n-1} G'(r) = -e^{D(0,r)} / ω_{n-1}
//! G(r)          = (1/ω_{n-1}) ∫_r^1 s^{1-n} e^{D(0,s)} ds.
//! ```
//!
//! Both are evaluated from exponents of `D` differences only.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_with_gap, Panel, QuadratureConfig};

/// Largest exponent we are willing to pass to `exp`.
const MAX_EXPONENT: f64 = 700.0;

/// Below this radius the pole `s^{1-n}` dominates and panels use `s = e^t`.
const POLE_SPLIT: f64 = 0.25;

/// Smallest radius of the geometric part of a profile mesh.
const MESH_INNER_RADIUS: f64 = 1e-4;

/// Mesh points placed inside the boundary layer `(1 - 1/m, 1)`.
const LAYER_POINTS: usize = 24;

/// Surface area `ω_{n-1} = 2π^{n/2}/Γ(n/2)` of the unit sphere in `ℝⁿ`.
pub fn sphere_area(n: usize) -> f64 {
    use std::f64::consts::PI;
    // ω_0 = 2, ω_1 = 2π, ω_{k+1} = 2π ω_{k-1} / k
    let (mut area, mut k) = if n % 2 == 1 { (2.0, 1) } else { (2.0 * PI, 2) };
    while k < n {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

fn check_dimension(n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Domain(format!("dimension must be at least 3, got {n}")));
    }
    Ok(())
}

fn guarded_exp(exponent: f64, context: &'static str) -> Result<f64> {
    if exponent > MAX_EXPONENT || exponent.is_nan() {
        return Err(Error::Overflow { context, exponent });
    }
    Ok(exponent.exp())
}

/// Requires `G(r)` to be finite: for `b = -ε/(1-r)` the integrand behaves
/// like `(1-s)^{-ε}` at the boundary.
fn check_integrable(spec: &DriftSpec) -> Result<()> {
    if let DriftSpec::SmallConstant { epsilon } = spec {
        if *epsilon >= 1.0 {
            return Err(Error::DivergentIntegral(format!(
                "G is infinite for epsilon = {epsilon} >= 1"
            )));
        }
    }
    Ok(())
}

/// Largest float strictly below one.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

/// `G'(r)` under the pole normalization.
pub fn green_derivative(spec: &DriftSpec, n: usize, r: f64) -> Result<f64> {
    check_dimension(n)?;
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1)")));
    }
    let exponent =
        spec.drift_integral_unchecked(0.0, r) - sphere_area(n).ln() - (n - 1) as f64 * r.ln();
    Ok(-guarded_exp(exponent, "green_derivative")?)
}

/// Panels covering `[r, 1]`, split at the pole region and the truncation knee.
fn value_panels(spec: &DriftSpec, r: f64, gamma: f64) -> Vec<Panel> {
    let mut panels = Vec::with_capacity(3);
    let mut lo = r;
    if lo < POLE_SPLIT {
        panels.push(Panel::LogPole { lo, hi: POLE_SPLIT });
        lo = POLE_SPLIT;
    }
    if let Some(knee) = spec.branch_point() {
        if lo < knee {
            panels.push(Panel::LogGap { lo, hi: knee });
            lo = knee;
        }
    }
    panels.push(Panel::TowardOne {
        lo,
        gamma: boundary_gamma(spec, gamma),
    });
    panels
}

/// Scaled integrand `s^{1-n} e^{D(0,s) - shift}` of `-ω G'`, as a function
/// of `s` and `1 - s`.
fn scaled_integrand(spec: &DriftSpec, n: usize, shift: f64) -> impl Fn(f64, f64) -> f64 + '_ {
    let power = (n - 1) as f64;
    move |s: f64, gap: f64| {
        let gap = gap.max(f64::MIN_POSITIVE);
        let e = spec.drift_from_origin(s, gap) - shift - power * s.ln();
        e.exp()
    }
}

/// Grading exponent of the panel that ends at 1. Power-law boundary
/// behaviour `(1-s)^{-ε}` or `(1-s)^β` becomes polynomial in the mapped
/// variable for the right choice.
fn boundary_gamma(spec: &DriftSpec, base: f64) -> f64 {
    match spec {
        DriftSpec::SmallConstant { epsilon } => 1.0 / (1.0 - epsilon),
        DriftSpec::PowerRegularized { beta, .. } => (base * beta).ceil() / beta,
        _ => base,
    }
}

/// Exponent shift that keeps the integrand at most `s^{1-n}`.
fn integrand_shift(spec: &DriftSpec) -> f64 {
    if spec.integrable_to_boundary() {
        spec.drift_integral_unchecked(0.0, 1.0)
    } else {
        0.0
    }
}

/// `G(r) = ∫_r^1 -G'(s) ds`, with `G(1) = 0` exactly.
pub fn green_value(spec: &DriftSpec, n: usize, r: f64, q: &QuadratureConfig) -> Result<f64> {
    check_dimension(n)?;
    q.validate()?;
    check_integrable(spec)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1]")));
    }
    if r == 1.0 {
        return Ok(0.0);
    }
    let shift = integrand_shift(spec);
    let panels = value_panels(spec, r, q.boundary_grading);
    let est = integrate_with_gap(scaled_integrand(spec, n, shift), &panels, q)?;
    let log_value = est.value.ln() + shift - sphere_area(n).ln();
    guarded_exp(log_value, "green_value")
}

/// Adjoint Green's function `G*(r) = e^{-D(0,r)} G(r)`: the kernel with the
/// pole at the origin in the *second* argument, so that the solution of the
/// Dirichlet problem with source `f` has `u(0) = ∫ G*(|y|) f(y) dy`.
pub fn adjoint_green_value(
    spec: &DriftSpec,
    n: usize,
    r: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    let g = green_value(spec, n, r, q)?;
    Ok(g * (-spec.drift_integral_unchecked(0.0, r.min(ONE_MINUS))).exp())
}

fn weighted_mass(spec: &DriftSpec, n: usize, s: f64, q: &QuadratureConfig) -> Result<f64> {
    let nf = n as f64;
    let est = integrate(
        |t: f64| t.powf(nf - 1.0) * (-spec.drift_integral_unchecked(0.0, t)).exp(),
        &[Panel::Linear { lo: 0.0, hi: s }],
        q,
    )?;
    Ok(est.value)
}

fn check_mollifier(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Domain(format!("mollifier radius {rho} outside (0, 1)")));
    }
    Ok(())
}

/// `ω Q(ρ)`: the outward flux `-ω r^{n-1} u'(r) e^{-D(0,r)}` of the
/// mollified solution outside the mollifier. Equals 1 for zero drift.
pub fn mollifier_flux(spec: &DriftSpec, n: usize, rho: f64, q: &QuadratureConfig) -> Result<f64> {
    check_dimension(n)?;
    check_mollifier(rho)?;
    let ball = rho.powi(n as i32) / n as f64;
    Ok(weighted_mass(spec, n, rho, q)? / ball)
}

/// Radial solution with the mollified source `1_{B(0,ρ)}/|B(0,ρ)|` in
/// place of the point mass.
///
/// With `Q(s) = (1/|B_ρ|) ∫_0^{min(s,ρ)} t^{n-1} e^{-D(0,t)} dt`, the
/// solution is `u(r) = ∫_r^1 s^{1-n} e^{D(0,s)} Q(s) ds`. For `r ≥ ρ` this is
/// `ω Q(ρ) G(r)`.
pub fn mollified_green_value(
    spec: &DriftSpec,
    n: usize,
    rho: f64,
    r: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    let outer_flux = mollifier_flux(spec, n, rho, q)?;
    if r >= rho {
        return Ok(outer_flux * green_value(spec, n, r, q)?);
    }
    if r <= 0.0 {
        return Err(Error::Domain(format!("radius {r} must be positive")));
    }
    let nf = n as f64;
    let ball = sphere_area(n) * rho.powi(n as i32) / nf;
    // inner part: integrand stays bounded since Q(s) ~ s^n
    let inner = integrate(
        |s: f64| {
            let qs = weighted_mass(spec, n, s, q).unwrap_or(f64::NAN) / ball;
            s.powf(1.0 - nf) * spec.drift_integral_unchecked(0.0, s).exp() * qs
        },
        &[Panel::Linear { lo: r, hi: rho }],
        q,
    )?;
    Ok(inner.value + outer_flux * green_value(spec, n, rho, q)?)
}

/// Centered finite-difference residual of the radial equation at `r`,
/// scaled by `|G'|(n-1)/r`.
///
/// The differences `G(r±h) - G(r)` are taken as integrals of `G'` over the
/// stencil cells, so the additive constant that the boundary layer
/// contributes to `G` never enters. The residual is homogeneous in `G`,
/// which lets the integrand be normalised by `e^{D(0,r)}`.
pub fn ode_residual(
    spec: &DriftSpec,
    n: usize,
    r: f64,
    h: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    check_dimension(n)?;
    if !(h > 0.0 && r - h > 0.0 && r + h < 1.0) {
        return Err(Error::Domain(format!("stencil [{}, {}] leaves (0, 1)", r - h, r + h)));
    }
    let shift = spec.drift_integral_unchecked(0.0, r);
    let cell = |lo: f64, hi: f64| -> Result<f64> {
        let mut cuts = Vec::new();
        if let Some(knee) = spec.branch_point() {
            cuts.push(knee);
        }
        let panels = crate::quad::linear_panels(lo, hi, &cuts);
        Ok(integrate_with_gap(scaled_integrand(spec, n, shift), &panels, q)?.value)
    };
    // G(r) - G(r+h) and G(r-h) - G(r), up to the common factor
    let outer = cell(r, r + h)?;
    let inner = cell(r - h, r)?;
    let d1 = -(outer + inner) / (2.0 * h);
    let d2 = (inner - outer) / (h * h);
    let nm1 = (n - 1) as f64;
    let b = spec.radial_component(r)?;
    let residual = d2 + nm1 / r * d1 + b * d1;
    Ok(residual.abs() / (d1.abs() * nm1 / r))
}

/// Radial mesh in `(0, 1]`, geometric toward 0 and graded as `1 - u^γ`
/// toward 1, with the truncation knee and a block of boundary-layer points
/// inserted when the drift is truncated.
pub fn graded_mesh(spec: &DriftSpec, mesh_size: usize, gamma: f64) -> Vec<f64> {
    let inner = mesh_size / 2;
    let outer = mesh_size - inner;
    let mut mesh = Vec::with_capacity(mesh_size + LAYER_POINTS + 1);
    let ratio = (0.5 / MESH_INNER_RADIUS).ln();
    for i in 0..inner {
        mesh.push(MESH_INNER_RADIUS * (ratio * i as f64 / inner as f64).exp());
    }
    for j in 0..outer {
        let u = 1.0 - j as f64 / (outer - 1) as f64;
        mesh.push(1.0 - 0.5 * u.powf(gamma));
    }
    if let Some(knee) = spec.branch_point() {
        mesh.push(knee);
        let width = 1.0 - knee;
        for k in 1..LAYER_POINTS {
            mesh.push(knee + width * k as f64 / LAYER_POINTS as f64);
        }
    }
    mesh.sort_by(|a, b| a.partial_cmp(b).unwrap());
    mesh.dedup_by(|a, b| (*a - *b).abs() <= 4.0 * f64::EPSILON * b.abs());
    mesh
}

/// Green's function tabulated on a graded radial mesh.
#[derive(Debug, Clone, Serialize)]
pub struct RadialGreenProfile {
    pub spec: DriftSpec,
    pub n: usize,
    /// Increasing radii in `(0, 1]`, ending at 1.
    pub mesh: Vec<f64>,
    pub g: Vec<f64>,
    /// `G'` on the mesh; `-∞` at `r = 1` when the drift is not integrable
    /// up to the boundary.
    pub g_prime: Vec<f64>,
    /// `K = r^{n-1} G'(r) e^{D(r, anchor)}`, the same at every radius.
    pub flux_constant: f64,
    /// Reference radius of `K`: 1 when `D(·, 1)` is finite, otherwise 1/2.
    pub flux_anchor: f64,
    pub quadrature: QuadratureConfig,
}

/// Flux constant under the pole normalization.
fn normalized_flux(spec: &DriftSpec, n: usize, anchor: f64) -> Result<f64> {
    let exponent = spec.drift_integral_unchecked(0.0, anchor) - sphere_area(n).ln();
    Ok(-guarded_exp(exponent, "flux_constant")?)
}

fn flux_anchor(spec: &DriftSpec) -> f64 {
    if spec.integrable_to_boundary() {
        1.0
    } else {
        0.5
    }
}

/// Tabulates `G` and `G'` on a graded mesh of at least `mesh_size` points.
pub fn build_profile(
    spec: &DriftSpec,
    n: usize,
    mesh_size: usize,
    q: &QuadratureConfig,
) -> Result<RadialGreenProfile> {
    spec.validate()?;
    check_dimension(n)?;
    q.validate()?;
    check_integrable(spec)?;
    if mesh_size < 16 {
        return Err(Error::Domain(format!("mesh_size must be at least 16, got {mesh_size}")));
    }
    let mesh = graded_mesh(spec, mesh_size, q.boundary_grading);
    let shift = integrand_shift(spec);
    let knee = spec.branch_point();
    let log_scale = shift - sphere_area(n).ln();

    // each segment [r_k, r_{k+1}] is smooth; the sum runs inward from r = 1
    let pieces: Vec<f64> = mesh
        .par_windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let panel = if hi == 1.0 {
                Panel::TowardOne {
                    lo,
                    gamma: boundary_gamma(spec, q.boundary_grading),
                }
            } else if knee == Some(hi) {
                Panel::LogGap { lo, hi }
            } else if lo < POLE_SPLIT {
                Panel::LogPole { lo, hi }
            } else {
                Panel::Linear { lo, hi }
            };
            integrate_with_gap(scaled_integrand(spec, n, shift), &[panel], q).map(|e| e.value)
        })
        .collect::<Result<_>>()?;

    let mut g = vec![0.0; mesh.len()];
    let mut acc = 0.0;
    for k in (0..pieces.len()).rev() {
        acc += pieces[k];
        g[k] = guarded_exp(acc.ln() + log_scale, "build_profile")?;
    }

    let g_prime = mesh
        .iter()
        .map(|&r| {
            if r < 1.0 {
                green_derivative(spec, n, r)
            } else if spec.integrable_to_boundary() {
                normalized_flux(spec, n, 1.0)
            } else {
                Ok(f64::NEG_INFINITY)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let anchor = flux_anchor(spec);
    Ok(RadialGreenProfile {
        spec: spec.clone(),
        n,
        mesh,
        g,
        g_prime,
        flux_constant: normalized_flux(spec, n, anchor)?,
        flux_anchor: anchor,
        quadrature: *q,
    })
}

impl RadialGreenProfile {
    /// `r^{n-1} G'(r)` from the profile's own flux constant; bounded as
    /// `r → 0`.
    pub fn flux_density(&self, r: f64) -> f64 {
        let r = r.min(ONE_MINUS);
        self.flux_constant * (-self.spec.signed_drift_integral(r, self.flux_anchor)).exp()
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.flux_density(r) / r.powi(self.n as i32 - 1)
    }

    /// Ratio of this profile's flux constant to the pole-normalized one;
    /// 1 for profiles produced by [`build_profile`].
    pub fn normalization_ratio(&self) -> f64 {
        let k0 = normalized_flux(&self.spec, self.n, self.flux_anchor)
            .expect("flux constant was finite at construction");
        self.flux_constant / k0
    }

    /// `G(r)` at an arbitrary radius, scaled consistently with the flux
    /// constant.
    pub fn value(&self, r: f64) -> Result<f64> {
        Ok(self.normalization_ratio() * green_value(&self.spec, self.n, r, &self.quadrature)?)
    }

    /// Copy with every value multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.g.iter_mut().for_each(|v| *v *= factor);
        out.g_prime.iter_mut().for_each(|v| *v *= factor);
        out.flux_constant *= factor;
        out
    }

    /// Largest relative deviation of `r^{n-1} G'(r) e^{D(r, anchor)}` from
    /// the flux constant over the finite mesh entries.
    pub fn flux_drift(&self) -> f64 {
        self.mesh
            .iter()
            .zip(&self.g_prime)
            .filter(|(_, d)| d.is_finite())
            .map(|(&r, &d)| {
                let k = r.powi(self.n as i32 - 1)
                    * d
                    * self.spec.signed_drift_integral(r, self.flux_anchor).exp();
                ((k - self.flux_constant) / self.flux_constant).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Writes `r,G,Gprime` rows in decreasing `r` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,G,Gprime")?;
        for k in (0..self.mesh.len()).rev() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e}",
                self.mesh[k], self.g[k], self.g_prime[k]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn zero_drift_value(n: usize, r: f64) -> f64 {
        (r.powf(2.0 - n as f64) - 1.0) / (sphere_area(n) * (n as f64 - 2.0))
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_value_is_zero() {
        for spec in [DriftSpec::truncated(1.0, 100), DriftSpec::small(0.01)] {
            assert_eq!(green_value(&spec, 3, 1.0, &q()).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivative_ratio_matches_closed_form() {
        let spec = DriftSpec::truncated(1.0, 100);
        let d1 = green_derivative(&spec, 3, 0.5).unwrap();
        let d2 = green_derivative(&spec, 3, 0.75).unwrap();
        assert!((d2 / d1 - 8.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn zero_drift_derivative_is_laplacian_flux() {
        for r in [0.01, 0.3, 0.9] {
            let d = green_derivative(&DriftSpec::zero(), 3, r).unwrap();
            assert!((d + 1.0 / (4.0 * PI * r * r)).abs() < 1e-13 / (r * r));
        }
    }

    #[test]
    fn pole_normalization() {
        let spec = DriftSpec::truncated(1.0, 100);
        let r = 1e-7;
        let flux = r * r * green_derivative(&spec, 3, r).unwrap();
        assert!((flux + 1.0 / (4.0 * PI)).abs() < 1e-8);
    }

    #[test]
    fn derivative_domain_errors() {
        let spec = DriftSpec::truncated(1.0, 100);
        assert!(green_derivative(&spec, 3, 0.0).is_err());
        assert!(green_derivative(&spec, 3, 1.0).is_err());
        assert!(green_derivative(&spec, 2, 0.5).is_err());
    }

    #[test]
    fn small_constant_close_to_laplacian() {
        let g = green_value(&DriftSpec::small(0.01), 3, 0.5, &q()).unwrap();
        let g0 = 1.0 / (4.0 * PI);
        assert!(((g - g0) / g0).abs() < 0.05);
        assert!(g > g0);
    }

    #[test]
    fn small_constant_beyond_one_diverges() {
        assert!(matches!(
            green_value(&DriftSpec::small(1.5), 3, 0.5, &q()),
            Err(Error::DivergentIntegral(_))
        ));
    }

    #[test]
    fn zero_drift_profile_is_classical() {
        let p = build_profile(&DriftSpec::zero(), 3, 64, &q()).unwrap();
        for (&r, &g) in p.mesh.iter().zip(&p.g) {
            let exact = zero_drift_value(3, r);
            if r < 1.0 {
                assert!(((g - exact) / exact).abs() < 1e-10, "r={r}");
            } else {
                assert_eq!(g, 0.0);
            }
        }
    }

    #[test]
    fn truncated_profile_invariants() {
        let p = build_profile(&DriftSpec::truncated(1.0, 10_000), 3, 256, &q()).unwrap();
        assert_eq!(*p.g.last().unwrap(), 0.0);
        assert!(p.g.windows(2).all(|w| w[0] > w[1]));
        assert!(p.g_prime[..p.mesh.len() - 1].iter().all(|&d| d < 0.0));
        assert!(p.flux_drift() < 1e-9);
        let knee = 1.0 - 1e-4;
        let in_layer = p.mesh.iter().filter(|&&r| r > knee && r <= 1.0).count();
        assert!(in_layer >= 20);
    }

    #[test]
    fn power_profile_has_finite_value() {
        let p = build_profile(&DriftSpec::power(1.0, 0.5), 3, 64, &q()).unwrap();
        let g_half = p.value(0.5).unwrap();
        assert!(g_half.is_finite() && g_half > 0.0);
        assert!(p.flux_constant.is_finite());
    }

    #[test]
    fn small_constant_profile_uses_interior_anchor() {
        let p = build_profile(&DriftSpec::small(0.01), 3, 32, &q()).unwrap();
        assert_eq!(p.flux_anchor, 0.5);
        assert_eq!(*p.g_prime.last().unwrap(), f64::NEG_INFINITY);
        assert!(p.flux_drift() < 1e-12);
    }

    #[test]
    fn profile_value_agrees_with_table() {
        let p = build_profile(&DriftSpec::truncated(1.0, 1000), 3, 64, &q()).unwrap();
        for k in [3, 20, 40, 60] {
            let direct = p.value(p.mesh[k]).unwrap();
            assert!(((direct - p.g[k]) / p.g[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_small_mesh() {
        assert!(build_profile(&DriftSpec::zero(), 3, 8, &q()).is_err());
    }

    #[test]
    fn csv_is_decreasing_in_r() {
        let p = build_profile(&DriftSpec::zero(), 3, 16, &q()).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("r,G,Gprime"));
        let radii: Vec<f64> = lines
            .map(|l| l.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(radii[0], 1.0);
        assert!(radii.windows(2).all(|w| w[0] > w[1]));
        assert!(text.contains("1.0000000000000000e0,0.0000000000000000e0"));
    }

    #[test]
    fn mollified_value_matches_scaled_green_outside_source() {
        let spec = DriftSpec::zero();
        // zero drift: ω Q(ρ) = 1, so u_ρ = G outside the ball
        let u = mollified_green_value(&spec, 3, 0.1, 0.4, &q()).unwrap();
        let g = zero_drift_value(3, 0.4);
        assert!(((u - g) / g).abs() < 1e-9);
        // inside: Newtonian potential of a uniform ball, minus 1/(4π)
        let r: f64 = 0.05;
        let rho: f64 = 0.1;
        let exact = (3.0 * rho * rho - r * r) / (8.0 * PI * rho.powi(3)) - 1.0 / (4.0 * PI);
        let u = mollified_green_value(&spec, 3, rho, r, &q()).unwrap();
        assert!(((u - exact) / exact).abs() < 1e-8);
    }

    #[test]
    fn adjoint_value_at_half() {
        let spec = DriftSpec::truncated(1.0, 100);
        let g = green_value(&spec, 3, 0.5, &q()).unwrap();
        let w = adjoint_green_value(&spec, 3, 0.5, &q()).unwrap();
        assert!((w - 0.5 * g).abs() < 1e-14);
    }
}
