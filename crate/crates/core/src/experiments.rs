//! End-to-end experiments producing tabular reports.
//!
//! Every report carries the resolved configuration; data rows are written
//! with fixed formatting so repeated runs give byte-identical CSV. The only
//! wall-clock value lives in `report.json`.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::fd::{self, BallGrid, FdSummary, Solution};
use crate::quad::QuadratureConfig;
use crate::radial::{build_profile, green_value};
use crate::verify::{certified_family, verify_profile};

/// Residual bound above which the distributional identity is declared
/// violated.
pub const VERIFY_TOLERANCE: f64 = 1e-6;
/// `r²` below which the two smallest `m` are dropped from the fit.
pub const FIT_R2_THRESHOLD: f64 = 0.999;
/// Relative band for the finite-difference cross-checks.
pub const FD_BAND: f64 = 0.10;
/// Window of the FD-vs-radial comparison.
pub const FD_COMPARISON_WINDOW: (f64, f64) = (0.15, 0.7);
/// Shell radius of the discrete flux probe.
pub const FLUX_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    MSweep,
    CSweep,
    BetaSweep,
    Verify,
    FdCheck,
    Blowup,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Real(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Least-squares line `G ≈ slope·ln m + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Truncation levels left out by the transient rule.
    pub excluded: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            passed: value < threshold,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub fit: Option<Fit>,
    pub checks: Vec<Check>,
    pub config_echo: Value,
    /// Kind-specific details (verification residuals, FD summary).
    pub summary: Option<Value>,
}

impl ExperimentReport {
    fn new(kind: ExperimentKind, columns: &[&str], config_echo: Value) -> Self {
        ExperimentReport {
            kind,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            fit: None,
            checks: Vec::new(),
            config_echo,
            summary: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|row| row[j].as_f64()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<Value> {
        let mut value = serde_json::to_value(self)?;
        value["passed"] = json!(self.passed());
        value["timestamp"] = json!(chrono::Utc::now().to_rfc3339());
        Ok(value)
    }

    /// Writes `<dir>/report.json` and `<dir>/rows.csv`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.to_json()?)?;
        fs::write(dir.join("report.json"), json + "\n")?;
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        fs::write(dir.join("rows.csv"), csv)?;
        Ok(())
    }
}

fn check_eval_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("evaluation radius {r} outside (0, 1)")));
    }
    Ok(())
}

fn sorted_unique<T: PartialOrd + Copy>(values: &[T], what: &str) -> Result<Vec<T>> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite parameters"));
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Usage(format!("duplicate values in {what}")));
    }
    Ok(v)
}

/// Least squares of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// Fit of `G` against `ln m`; drops the two smallest `m` when `r²` is
/// below threshold and at least three points remain.
pub fn divergence_fit(ms: &[u64], g: &[f64]) -> Fit {
    let x: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
    let (slope, intercept, r_squared) = least_squares(&x, g);
    if r_squared < FIT_R2_THRESHOLD && ms.len() >= 5 {
        let (slope, intercept, r_squared) = least_squares(&x[2..], &g[2..]);
        return Fit {
            slope,
            intercept,
            r_squared,
            excluded: ms[..2].to_vec(),
        };
    }
    Fit {
        slope,
        intercept,
        r_squared,
        excluded: Vec::new(),
    }
}

/// `G_m(r_eval)` over truncation levels, with the `ln m` fit.
pub fn run_m_sweep(
    c: f64,
    n: usize,
    m_list: &[u64],
    r_eval: f64,
    q: &QuadratureConfig,
) -> Result<ExperimentReport> {
    let ms = sorted_unique(m_list, "m list")?;
    if ms.len() < 4 {
        return Err(Error::Usage(format!("m sweep needs at least 4 values, got {}", ms.len())));
    }
    check_eval_radius(r_eval)?;
    let g = ms
        .par_iter()
        .map(|&m| green_value(&DriftSpec::truncated(c, m), n, r_eval, q))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new(
        ExperimentKind::MSweep,
        &["m", "C", "n", "r", "G", "ln_m"],
        json!({ "C": c, "n": n, "m": ms, "r": r_eval, "quadrature": q }),
    );
    for (&m, &gm) in ms.iter().zip(&g) {
        report.rows.push(vec![
            m.into(),
            c.into(),
            n.into(),
            r_eval.into(),
            gm.into(),
            (m as f64).ln().into(),
        ]);
    }
    report.fit = Some(divergence_fit(&ms, &g));
    Ok(report)
}

/// `G(r_eval)` over drift strengths at a fixed truncation level.
pub fn run_c_sweep(
    m: u64,
    n: usize,
    c_list: &[f64],
    r_eval: f64,
    q: &QuadratureConfig,
) -> Result<ExperimentReport> {
    if c_list.is_empty() {
        return Err(Error::Usage("empty C list".into()));
    }
    let cs = sorted_unique(c_list, "C list")?;
    check_eval_radius(r_eval)?;
    let g = cs
        .par_iter()
        .map(|&c| green_value(&DriftSpec::truncated(c, m), n, r_eval, q))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new(
        ExperimentKind::CSweep,
        &["m", "C", "n", "r", "G", "r_pow_n2_times_G"],
        json!({ "m": m, "n": n, "C": cs, "r": r_eval, "quadrature": q }),
    );
    for (&c, &gc) in cs.iter().zip(&g) {
        report.rows.push(vec![
            m.into(),
            c.into(),
            n.into(),
            r_eval.into(),
            gc.into(),
            (r_eval.powi(n as i32 - 2) * gc).into(),
        ]);
    }
    Ok(report)
}

/// Constant drift `b ≡ -C`, the `β = 1` member of the power family.
pub fn constant_drift(c: f64) -> DriftSpec {
    DriftSpec::Tabulated {
        radii: vec![0.0, 1.0],
        values: vec![-c, -c],
    }
}

/// Largest β at which the β → 1 continuity check applies.
pub const BETA_LIMIT_PROBE: f64 = 0.99;
pub const BETA_LIMIT_BAND: f64 = 0.30;

/// `G(r_eval)` over the power-regularized family.
pub fn run_beta_sweep(
    c: f64,
    n: usize,
    beta_list: &[f64],
    r_eval: f64,
    q: &QuadratureConfig,
) -> Result<ExperimentReport> {
    if beta_list.is_empty() {
        return Err(Error::Usage("empty beta list".into()));
    }
    let betas = sorted_unique(beta_list, "beta list")?;
    check_eval_radius(r_eval)?;
    for &beta in &betas {
        DriftSpec::power(c, beta).validate()?;
    }
    let g = betas
        .par_iter()
        .map(|&beta| green_value(&DriftSpec::power(c, beta), n, r_eval, q))
        .collect::<Result<Vec<_>>>()?;
    let limit = green_value(&constant_drift(c), n, r_eval, q)?;
    let mut report = ExperimentReport::new(
        ExperimentKind::BetaSweep,
        &["beta", "C", "n", "r", "G", "G_beta_one"],
        json!({ "C": c, "n": n, "beta": betas, "r": r_eval, "quadrature": q }),
    );
    for (&beta, &gb) in betas.iter().zip(&g) {
        report.rows.push(vec![
            beta.into(),
            c.into(),
            n.into(),
            r_eval.into(),
            gb.into(),
            limit.into(),
        ]);
    }
    let increases = g.windows(2).filter(|w| w[1] >= w[0]).count();
    report.checks.push(Check {
        name: "decreasing_in_beta".into(),
        passed: increases == 0,
        value: increases as f64,
        threshold: 0.0,
    });
    let last = *betas.last().unwrap();
    if last >= BETA_LIMIT_PROBE {
        let gap = (g.last().unwrap() - limit).abs() / limit;
        report.checks.push(Check::below("beta_one_continuity", gap, BETA_LIMIT_BAND));
    }
    Ok(report)
}

/// Distributional identity over the certified family, optionally on a
/// deliberately mis-scaled profile.
pub fn run_verify(
    spec: &DriftSpec,
    n: usize,
    mis_scale: f64,
    q: &QuadratureConfig,
) -> Result<ExperimentReport> {
    if !(mis_scale.is_finite() && mis_scale != 0.0) {
        return Err(Error::Usage(format!("mis-scale factor {mis_scale} must be finite and nonzero")));
    }
    let profile = build_profile(spec, n, 32, q)?.rescaled(mis_scale);
    let family = certified_family();
    let verification = verify_profile(&profile, &family, q)?;
    let mut report = ExperimentReport::new(
        ExperimentKind::Verify,
        &["phi", "phi0", "R"],
        json!({ "spec": spec, "n": n, "mis_scale": mis_scale, "quadrature": q }),
    );
    for (tf, entry) in family.iter().zip(&verification.residuals) {
        report.rows.push(vec![
            entry.phi.clone().into(),
            tf.value_at_zero().into(),
            entry.r.into(),
        ]);
    }
    report.checks.push(Check::below(
        "max_abs_residual",
        verification.max_abs_residual,
        VERIFY_TOLERANCE,
    ));
    report.summary = Some(serde_json::to_value(&verification)?);
    Ok(report)
}

pub struct FdCheckOutcome {
    pub report: ExperimentReport,
    pub grid: BallGrid,
    pub solution: Solution,
    pub summary: FdSummary,
}

/// Solves the mollified problem on the grid and compares with the radial
/// profile.
pub fn run_fd_check(
    c: f64,
    m: u64,
    points: usize,
    rho: f64,
    tol: f64,
    q: &QuadratureConfig,
) -> Result<FdCheckOutcome> {
    let spec = DriftSpec::truncated(c, m);
    let grid = BallGrid::new(points)?;
    let system = fd::assemble(&spec, &grid, rho)?;
    let solution = fd::solve(&system, tol, fd::DEFAULT_MAX_ITER)?;
    let u = &solution.u;

    let comparison = fd::radial_comparison(&system, u, rho, 1.0, q)?;
    let shells = fd::shells(&grid, u);
    let mut report = ExperimentReport::new(
        ExperimentKind::FdCheck,
        &["r", "count", "u_mean", "radial", "rel_error", "deviation"],
        json!({ "C": c, "m": m, "N": points, "rho": rho, "tol": tol, "quadrature": q }),
    );
    for row in &comparison {
        let shell = shells.iter().find(|s| s.r_mean == row.r).expect("same shells");
        report.rows.push(vec![
            row.r.into(),
            shell.count.into(),
            row.fd.into(),
            row.radial.into(),
            row.rel_error.into(),
            shell.deviation.unwrap_or(f64::NAN).into(),
        ]);
    }

    let (lo, hi) = FD_COMPARISON_WINDOW;
    let worst = comparison
        .iter()
        .filter(|row| row.r > lo && row.r < hi)
        .map(|row| row.rel_error)
        .fold(0.0, f64::max);
    let summary = FdSummary::new(&system, &solution);
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    let flux = fd::discrete_flux(&grid, u, FLUX_RADIUS);
    let flux_expected = fd::flux_comparator(&spec, rho, FLUX_RADIUS, q)?;
    report.checks.push(Check {
        name: "maximum_principle".into(),
        passed: min_u >= fd::MAX_PRINCIPLE_FLOOR,
        value: min_u,
        threshold: fd::MAX_PRINCIPLE_FLOOR,
    });
    report.checks.push(Check::below(
        "symmetry_deviation",
        summary.symmetry_deviation.unwrap_or(f64::NAN),
        FD_BAND,
    ));
    report.checks.push(Check::below("radial_comparison", worst, FD_BAND));
    if rho < 0.2 {
        let gap = ((flux - flux_expected) / flux_expected).abs();
        report.checks.push(Check::below("flux_consistency", gap, FD_BAND));
    }
    report.summary = Some(json!({
        "fd": summary,
        "m_matrix": system.m_matrix_check(),
        "min_u": min_u,
        "flux": flux,
        "flux_expected": flux_expected,
        "max_rel_error_window": worst,
    }));
    Ok(FdCheckOutcome {
        report,
        grid,
        solution,
        summary,
    })
}

/// `u_m(0)` for a source away from the pole, over increasing `m`.
pub fn run_blowup(
    c: f64,
    m_list: &[u64],
    points: usize,
    tol: f64,
    q: &QuadratureConfig,
) -> Result<ExperimentReport> {
    let rows = fd::poisson_blowup_experiment(c, m_list, points, tol, q)?;
    let mut report = ExperimentReport::new(
        ExperimentKind::Blowup,
        &["m", "C", "N", "u0", "comparator", "peclet", "iterations"],
        json!({
            "C": c,
            "m": m_list,
            "N": points,
            "tol": tol,
            "source_center": [fd::BLOWUP_CENTER, 0.0, 0.0],
            "source_radius": fd::BLOWUP_RADIUS,
            "quadrature": q,
        }),
    );
    for row in &rows {
        report.rows.push(vec![
            row.m.into(),
            c.into(),
            points.into(),
            row.u0.into(),
            row.comparator.into(),
            row.peclet.into(),
            row.iterations.into(),
        ]);
    }
    if c >= 1.0 {
        let stalls = rows.windows(2).filter(|w| w[1].u0 <= w[0].u0).count();
        report.checks.push(Check {
            name: "strictly_increasing".into(),
            passed: stalls == 0,
            value: stalls as f64,
            threshold: 0.0,
        });
    }
    report.summary = Some(json!({ "threads": rayon::current_num_threads() }));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn fit_recovers_line() {
        let ms = [10, 100, 1000, 10_000];
        let g: Vec<f64> = ms.iter().map(|&m| 0.5 * (m as f64).ln() + 2.0).collect();
        let fit = divergence_fit(&ms, &g);
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!(fit.excluded.is_empty());
    }

    #[test]
    fn fit_drops_transient() {
        let ms = [10, 100, 1000, 10_000, 100_000];
        let mut g: Vec<f64> = ms.iter().map(|&m| (m as f64).ln()).collect();
        g[0] += 3.0;
        let fit = divergence_fit(&ms, &g);
        assert_eq!(fit.excluded, vec![10, 100]);
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }

    #[test]
    fn m_sweep_is_order_insensitive() {
        let ms = [100, 1000, 10_000, 100_000];
        let a = run_m_sweep(1.0, 3, &ms, 0.5, &q()).unwrap();
        let mut rev = ms;
        rev.reverse();
        let b = run_m_sweep(1.0, 3, &rev, 0.5, &q()).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.fit, b.fit);
    }

    #[test]
    fn m_sweep_needs_four_values() {
        assert!(matches!(
            run_m_sweep(1.0, 3, &[10, 100, 1000], 0.5, &q()),
            Err(Error::Usage(_))
        ));
        assert!(run_m_sweep(1.0, 3, &[10, 10, 100, 1000], 0.5, &q()).is_err());
    }

    #[test]
    fn beta_sweep_checks() {
        assert!(matches!(run_beta_sweep(1.0, 3, &[], 0.5, &q()), Err(Error::Usage(_))));
        assert!(run_beta_sweep(1.0, 3, &[0.5, 1.2], 0.5, &q()).is_err());
        let rep = run_beta_sweep(1.0, 3, &[0.9, 0.1, 0.5, 0.99], 0.5, &q()).unwrap();
        assert!(rep.passed(), "{:?}", rep.checks);
        assert_eq!(rep.column("beta").unwrap(), vec![0.1, 0.5, 0.9, 0.99]);
    }

    #[test]
    fn verify_pass_and_mis_scale() {
        let spec = DriftSpec::truncated(1.0, 10_000);
        assert!(run_verify(&spec, 3, 1.0, &q()).unwrap().passed());
        let bad = run_verify(&spec, 3, 2.0, &q()).unwrap();
        assert!(!bad.passed());
        let phi0 = bad.column("phi0").unwrap();
        let r = bad.column("R").unwrap();
        for (p, r) in phi0.iter().zip(&r) {
            assert!((r - p).abs() < 1e-4);
        }
    }

    #[test]
    fn csv_quotes_text_with_commas() {
        assert_eq!(Cell::Text("a,b".into()).csv(), "\"a,b\"");
        assert_eq!(Cell::Real(0.5).csv(), "5.0000000000000000e-1");
    }

    #[test]
    fn small_fd_check_runs() {
        let out = run_fd_check(1.0, 5, 17, 0.25, 1e-8, &q()).unwrap();
        assert!(!out.report.rows.is_empty());
        assert_eq!(out.solution.u.len(), out.grid.interior_count());
        assert!(out.report.checks.iter().any(|c| c.name == "maximum_principle" && c.passed));
    }
}
