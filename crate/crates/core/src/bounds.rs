//! Empirical constants for the interior two-sided estimates.
//!
//! With the pole at the origin `δ(0) = 1`, so the interior region is
//! `|x| ≤ 1/2` and the lower estimate reads `r^{n-2} G(r) ≥ c₀`. The probes
//! report the infimum (and supremum) of `r^{n-2} G(r)` and of
//! `a^{n-1}|G'(a)|` over fixed radii rather than assuming any constant.

use std::io::Write;

use serde::Serialize;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::radial::RadialGreenProfile;

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub spec: DriftSpec,
    pub n: usize,
    /// `inf r^{n-2} G(r)` over the probes.
    pub c0_empirical: f64,
    /// `sup r^{n-2} G(r)` over the probes.
    pub c2_empirical: f64,
    /// `inf a^{n-1}|G'(a)|` over the probes with `a ≤ 1/4`.
    pub derivative_c0: Option<f64>,
    /// `(r, r^{n-2} G(r))`
    pub probes: Vec<(f64, f64)>,
    /// `(a, a^{n-1}|G'(a)|)`
    pub derivative_probes: Vec<(f64, f64)>,
    /// Every probe product is positive.
    pub lower_bound_holds: bool,
}

/// `{1/2} ∪ {2^{-k}/4 : k = 0..=12}`, decreasing.
pub fn probe_radii() -> Vec<f64> {
    let mut radii = vec![0.5];
    radii.extend((0..=12).map(|k| 0.25 / f64::powi(2.0, k)));
    radii
}

fn check_radii(radii: &[f64], upper: f64) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Usage("no probe radii given".into()));
    }
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r <= upper)) {
        return Err(Error::Domain(format!("probe radius {r} outside (0, {upper}]")));
    }
    Ok(())
}

pub fn interior_lower_bound(profile: &RadialGreenProfile, radii: &[f64]) -> Result<BoundReport> {
    check_radii(radii, 0.5)?;
    let n = profile.n as i32;
    let probes = radii
        .iter()
        .map(|&r| Ok((r, r.powi(n - 2) * profile.value(r)?)))
        .collect::<Result<Vec<_>>>()?;
    let derivative_probes: Vec<(f64, f64)> = radii
        .iter()
        .filter(|&&a| a <= 0.25)
        .map(|&a| (a, profile.flux_density(a).abs()))
        .collect();
    let c0 = probes.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let c2 = probes.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let derivative_c0 = derivative_probes
        .iter()
        .map(|p| p.1)
        .reduce(f64::min);
    Ok(BoundReport {
        spec: profile.spec.clone(),
        n: profile.n,
        c0_empirical: c0,
        c2_empirical: c2,
        derivative_c0,
        lower_bound_holds: probes.iter().all(|p| p.1 > 0.0),
        probes,
        derivative_probes,
    })
}

/// `min a^{n-1}|G'(a)|` over `inner_radii ⊂ (0, 1/4]`.
pub fn derivative_lower_bound(profile: &RadialGreenProfile, inner_radii: &[f64]) -> Result<f64> {
    check_radii(inner_radii, 0.25)?;
    Ok(inner_radii
        .iter()
        .map(|&a| profile.flux_density(a).abs())
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperBoundStatus {
    UniformUpper,
    NoUniformUpper,
}

#[derive(Debug, Clone, Serialize)]
pub struct UpperBoundSummary {
    pub status: UpperBoundStatus,
    /// `sup` over the family of `r^{n-2} G_m(r)`.
    pub c2_empirical: f64,
    pub r: f64,
    /// `(m, r^{n-2} G_m(r))` ordered by `m`; `m` is absent for
    /// untruncated drifts.
    pub values: Vec<(Option<u64>, f64)>,
}

/// Growth factor between the smallest and largest truncation level beyond
/// which the family is declared unbounded.
pub const DIVERGENCE_FACTOR: f64 = 2.0;

/// Decides whether `r^{n-2} G_m(r)` stays bounded across a family of
/// profiles that share `n` and the drift strength.
pub fn upper_bound_status(profiles: &[RadialGreenProfile], r: f64) -> Result<UpperBoundSummary> {
    if profiles.len() < 2 {
        return Err(Error::Usage("need at least two profiles".into()));
    }
    let first = &profiles[0];
    for p in profiles {
        if p.n != first.n
            || p.spec.family() != first.spec.family()
            || p.spec.strength() != first.spec.strength()
        {
            return Err(Error::Usage("profiles must share family, strength and n".into()));
        }
    }
    if !(r > 0.0 && r <= 0.5) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1/2]")));
    }
    let n = first.n as i32;
    let mut values = profiles
        .iter()
        .map(|p| Ok((p.spec.truncation(), r.powi(n - 2) * p.value(r)?)))
        .collect::<Result<Vec<_>>>()?;
    values.sort_by_key(|v| v.0);
    let lowest = values.first().unwrap().1;
    let highest_m = values.last().unwrap().1;
    let c2 = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let status = if highest_m >= DIVERGENCE_FACTOR * lowest {
        UpperBoundStatus::NoUniformUpper
    } else {
        UpperBoundStatus::UniformUpper
    };
    Ok(UpperBoundSummary {
        status,
        c2_empirical: c2,
        r,
        values,
    })
}

/// Sweep summary with columns `m,C,n,r,G,r_pow_n2_times_G`.
pub fn write_sweep_csv<W: Write>(reports: &[BoundReport], mut out: W) -> Result<()> {
    writeln!(out, "m,C,n,r,G,r_pow_n2_times_G")?;
    for rep in reports {
        let m = rep.spec.truncation().map(|m| m.to_string()).unwrap_or_default();
        let c = rep.spec.strength().map(|c| format!("{c:.16e}")).unwrap_or_default();
        for &(r, prod) in &rep.probes {
            let g = prod / r.powi(rep.n as i32 - 2);
            writeln!(out, "{m},{c},{},{r:.16e},{g:.16e},{prod:.16e}", rep.n)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::QuadratureConfig;
    use crate::radial::build_profile;
    use std::f64::consts::PI;

    fn profile(spec: DriftSpec) -> RadialGreenProfile {
        build_profile(&spec, 3, 32, &QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn zero_drift_lower_constant() {
        let p = profile(DriftSpec::zero());
        let rep = interior_lower_bound(&p, &[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        assert!((rep.c0_empirical - 1.0 / (8.0 * PI)).abs() < 1e-12);
        assert!(rep.lower_bound_holds);
    }

    #[test]
    fn single_probe_is_positive() {
        let p = profile(DriftSpec::truncated(1.0, 1000));
        let rep = interior_lower_bound(&p, &[0.25]).unwrap();
        assert!(rep.probes[0].1 > 0.0);
    }

    #[test]
    fn empty_or_bad_radii_rejected() {
        let p = profile(DriftSpec::zero());
        assert!(interior_lower_bound(&p, &[]).is_err());
        assert!(interior_lower_bound(&p, &[0.6]).is_err());
        assert!(derivative_lower_bound(&p, &[]).is_err());
        assert!(derivative_lower_bound(&p, &[0.3]).is_err());
    }

    #[test]
    fn zero_drift_derivative_constant() {
        let p = profile(DriftSpec::zero());
        let c = derivative_lower_bound(&p, &[0.01, 0.1, 0.25]).unwrap();
        assert!((c - 1.0 / (4.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn small_constant_derivative_near_laplacian() {
        let p = profile(DriftSpec::small(0.01));
        let c = derivative_lower_bound(&p, &[0.01, 0.05, 0.1, 0.25]).unwrap();
        assert!(((c - 1.0 / (4.0 * PI)) * 4.0 * PI).abs() < 0.03);
    }

    #[test]
    fn truncated_derivative_band_is_m_stable() {
        let radii = [0.01, 0.05, 0.1, 0.15, 0.2, 0.25];
        let c4 = derivative_lower_bound(&profile(DriftSpec::truncated(1.0, 10_000)), &radii).unwrap();
        let c2 = derivative_lower_bound(&profile(DriftSpec::truncated(1.0, 100)), &radii).unwrap();
        assert!(c4 > 0.0);
        assert!(((c4 - c2) / c2).abs() < 0.01);
        // a^{2}|G'(a)| = (1/4π)/(1-a) on the inner branch
        assert!(c4 >= 1.0 / (4.0 * PI) && c4 <= (4.0 / 3.0) / (4.0 * PI));
    }

    #[test]
    fn c1_family_has_no_uniform_upper_bound() {
        let family: Vec<_> = [100, 10_000, 1_000_000]
            .into_iter()
            .map(|m| profile(DriftSpec::truncated(1.0, m)))
            .collect();
        let s = upper_bound_status(&family, 0.5).unwrap();
        assert_eq!(s.status, UpperBoundStatus::NoUniformUpper);
    }

    #[test]
    fn subcritical_family_is_bounded() {
        let family: Vec<_> = [1_000_000, 100, 10_000]
            .into_iter()
            .map(|m| profile(DriftSpec::truncated(0.5, m)))
            .collect();
        let s = upper_bound_status(&family, 0.5).unwrap();
        assert_eq!(s.status, UpperBoundStatus::UniformUpper);
        assert!(s.c2_empirical.is_finite());
        assert_eq!(s.values[0].0, Some(100));
    }

    #[test]
    fn m_independent_family_is_bounded() {
        let family = vec![profile(DriftSpec::small(0.01)), profile(DriftSpec::small(0.01))];
        let s = upper_bound_status(&family, 0.5).unwrap();
        assert_eq!(s.status, UpperBoundStatus::UniformUpper);
    }

    #[test]
    fn mixed_family_rejected() {
        let family = vec![
            profile(DriftSpec::truncated(1.0, 100)),
            profile(DriftSpec::truncated(0.5, 100)),
        ];
        assert!(upper_bound_status(&family, 0.5).is_err());
        assert!(upper_bound_status(&family[..1], 0.5).is_err());
    }

    #[test]
    fn sweep_csv_header() {
        let p = profile(DriftSpec::truncated(1.0, 100));
        let rep = interior_lower_bound(&p, &[0.25, 0.5]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&[rep], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,C,n,r,G,r_pow_n2_times_G\n100,"));
        assert_eq!(text.lines().count(), 3);
    }
}
