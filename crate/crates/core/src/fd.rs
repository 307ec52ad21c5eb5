//! Finite-difference cross-check on a Cartesian grid over the unit ball,
//! `n = 3` only.
//!
//! The operator whose Green's function the radial module tabulates is
//! `-Δu - B·∇u` with `B = b(|x|) x/|x|`. Writing it as `-Δu + V·∇u` with the
//! outward velocity `V = -B`, every component of the first-order term is
//! upwinded against the sign of `V`, which keeps the matrix an M-matrix at
//! any Péclet number. Dirichlet data sit on the first node outside the ball
//! along each axis.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::{DriftFamily, DriftSpec};
use crate::error::{Error, Result};
use crate::quad::{integrate, Panel, QuadratureConfig};
use crate::radial::{adjoint_green_value, mollified_green_value, mollifier_flux};

const EXTERIOR: u32 = u32::MAX;

/// Block length for reductions; fixed so sums do not depend on the pool.
const REDUCE_CHUNK: usize = 4096;

/// Default relative residual target of [`solve`].
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Most negative value tolerated by the post-hoc maximum-principle check.
pub const MAX_PRINCIPLE_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone)]
pub struct BallGrid {
    /// Points per axis; odd, so the origin is a node.
    pub points: usize,
    pub h: f64,
    index: Vec<u32>,
    nodes: Vec<[u32; 3]>,
}

impl BallGrid {
    pub fn new(points: usize) -> Result<Self> {
        if points % 2 == 0 || points < 5 {
            return Err(Error::Domain(format!(
                "points per axis must be odd and at least 5, got {points}"
            )));
        }
        let h = 2.0 / (points - 1) as f64;
        let mut index = vec![EXTERIOR; points * points * points];
        let mut nodes = Vec::new();
        for i in 0..points {
            for j in 0..points {
                for k in 0..points {
                    let x = [i, j, k].map(|c| -1.0 + c as f64 * h);
                    if x[0] * x[0] + x[1] * x[1] + x[2] * x[2] < 1.0 {
                        index[(i * points + j) * points + k] = nodes.len() as u32;
                        nodes.push([i as u32, j as u32, k as u32]);
                    }
                }
            }
        }
        Ok(BallGrid {
            points,
            h,
            index,
            nodes,
        })
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn position(&self, node: usize) -> [f64; 3] {
        self.nodes[node].map(|c| -1.0 + c as f64 * self.h)
    }

    pub fn radius(&self, node: usize) -> f64 {
        let x = self.position(node);
        (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
    }

    pub fn origin(&self) -> usize {
        let c = (self.points / 2) as u32;
        self.lookup([c, c, c]).expect("origin is interior")
    }

    fn lookup(&self, c: [u32; 3]) -> Option<usize> {
        let p = self.points;
        let id = self.index[(c[0] as usize * p + c[1] as usize) * p + c[2] as usize];
        (id != EXTERIOR).then_some(id as usize)
    }

    /// Neighbour one step along `axis` in direction `step` (±1); `None` is a
    /// Dirichlet node. Interior nodes never touch the edge of the cube.
    pub fn neighbor(&self, node: usize, axis: usize, step: i32) -> Option<usize> {
        let mut c = self.nodes[node];
        c[axis] = (c[axis] as i64 + step as i64) as u32;
        self.lookup(c)
    }
}

/// Compressed sparse row storage.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub rows: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            for &(c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            rows: rows.len(),
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).filter(|&(c, _)| c == i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.rows).all(|i| {
            self.row(i).all(|(c, v)| {
                let t: f64 = self.row(c).filter(|&(cc, _)| cc == i).map(|(_, w)| w).sum();
                (v - t).abs() <= tol * v.abs().max(t.abs())
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct FdSystem {
    pub grid: BallGrid,
    pub spec: DriftSpec,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Radius of the mollified delta; `None` for a user-supplied source.
    pub rho: Option<f64>,
    /// `(6 - #interior neighbours)/h²` per row.
    pub laplacian_row_sums: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Sign structure of the assembled matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MMatrixCheck {
    pub positive_diagonal: bool,
    pub nonpositive_off_diagonal: bool,
    pub min_row_sum: f64,
    pub min_laplacian_row_sum: f64,
}

impl MMatrixCheck {
    pub fn holds(&self) -> bool {
        self.positive_diagonal
            && self.nonpositive_off_diagonal
            && self.min_row_sum >= 0.0
            && self.min_laplacian_row_sum >= 0.0
    }
}

impl FdSystem {
    pub fn m_matrix_check(&self) -> MMatrixCheck {
        let a = &self.matrix;
        let mut check = MMatrixCheck {
            positive_diagonal: true,
            nonpositive_off_diagonal: true,
            min_row_sum: f64::INFINITY,
            min_laplacian_row_sum: self
                .laplacian_row_sums
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        };
        for i in 0..a.rows {
            let mut sum = 0.0;
            for (c, v) in a.row(i) {
                if c == i {
                    check.positive_diagonal &= v > 0.0;
                } else {
                    check.nonpositive_off_diagonal &= v <= 0.0;
                }
                sum += v;
            }
            // cancellation in 6/h² - Σ 1/h² leaves rounding noise
            let scale = 6.0 / (self.grid.h * self.grid.h);
            check.min_row_sum = check.min_row_sum.min(if sum.abs() < 1e-12 * scale { 0.0 } else { sum });
        }
        check
    }
}

fn check_fd_spec(spec: &DriftSpec) -> Result<()> {
    spec.validate()?;
    match spec.family() {
        DriftFamily::TruncatedInverse | DriftFamily::Tabulated => Ok(()),
        other => Err(Error::InvalidSpec(format!(
            "finite-difference solves need a drift bounded on the closed ball, got {other:?}"
        ))),
    }
}

/// `B(x) = b(|x|) x/|x|`, zero at the origin.
pub fn drift_vector(spec: &DriftSpec, x: [f64; 3]) -> Result<[f64; 3]> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == 0.0 {
        return Ok([0.0; 3]);
    }
    let b = spec.radial_component(r)?;
    Ok(x.map(|xi| b * xi / r))
}

/// `C·m·h`; above 1/2 the upwind layer is under-resolved.
pub fn peclet_number(spec: &DriftSpec, h: f64) -> f64 {
    spec.sup_magnitude().unwrap_or(0.0) * h
}

fn assemble_operator(spec: &DriftSpec, grid: &BallGrid) -> Result<(CsrMatrix, Vec<f64>)> {
    let h = grid.h;
    let ih2 = 1.0 / (h * h);
    let rows = (0..grid.interior_count())
        .into_par_iter()
        .map(|node| {
            let b = drift_vector(spec, grid.position(node))?;
            let mut row = Vec::with_capacity(7);
            let mut diag = 6.0 * ih2;
            let mut lap_sum = 6.0 * ih2;
            for axis in 0..3 {
                let v = -b[axis];
                for step in [-1, 1] {
                    let mut coef = -ih2;
                    // V > 0: V(u_i - u_{i-1})/h; V < 0: V(u_{i+1} - u_i)/h
                    if step == -1 && v > 0.0 {
                        coef -= v / h;
                        diag += v / h;
                    } else if step == 1 && v < 0.0 {
                        coef += v / h;
                        diag -= v / h;
                    }
                    if let Some(nb) = grid.neighbor(node, axis, step) {
                        row.push((nb, coef));
                        lap_sum -= ih2;
                    }
                }
            }
            row.push((node, diag));
            Ok((row, lap_sum))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, sums): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok((CsrMatrix::from_rows(rows), sums))
}

fn peclet_warnings(spec: &DriftSpec, h: f64) -> Vec<String> {
    let pe = peclet_number(spec, h);
    if pe > 0.5 {
        vec![format!("cell Péclet number C·m·h = {pe:.3} exceeds 0.5; boundary layer under-resolved")]
    } else {
        Vec::new()
    }
}

/// System with the mollified delta `1_{B(0,ρ)}/|B(0,ρ)|` as source. The
/// discrete indicator is normalised by its node count so that its discrete
/// mass is exactly one.
pub fn assemble(spec: &DriftSpec, grid: &BallGrid, rho: f64) -> Result<FdSystem> {
    check_fd_spec(spec)?;
    if !(rho >= 2.0 * grid.h) {
        return Err(Error::Resolution(format!(
            "mollifier radius {rho} below two grid spacings ({})",
            2.0 * grid.h
        )));
    }
    if rho >= 1.0 {
        return Err(Error::Domain(format!("mollifier radius {rho} must be below 1")));
    }
    let (matrix, laplacian_row_sums) = assemble_operator(spec, grid)?;
    let inside: Vec<bool> = (0..grid.interior_count()).map(|k| grid.radius(k) < rho).collect();
    let count = inside.iter().filter(|&&b| b).count();
    let height = 1.0 / (count as f64 * grid.h.powi(3));
    let rhs = inside.iter().map(|&b| if b { height } else { 0.0 }).collect();
    Ok(FdSystem {
        grid: grid.clone(),
        spec: spec.clone(),
        matrix,
        rhs,
        rho: Some(rho),
        laplacian_row_sums,
        warnings: peclet_warnings(spec, grid.h),
    })
}

/// System with `f` sampled at the interior nodes.
pub fn assemble_with_source<F>(spec: &DriftSpec, grid: &BallGrid, source: F) -> Result<FdSystem>
where
    F: Fn([f64; 3]) -> f64 + Sync,
{
    check_fd_spec(spec)?;
    let (matrix, laplacian_row_sums) = assemble_operator(spec, grid)?;
    let rhs = (0..grid.interior_count())
        .into_par_iter()
        .map(|k| source(grid.position(k)))
        .collect();
    Ok(FdSystem {
        grid: grid.clone(),
        spec: spec.clone(),
        matrix,
        rhs,
        rho: None,
        laplacian_row_sums,
        warnings: peclet_warnings(spec, grid.h),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
        .collect();
    partial.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Final `‖f - Au‖/‖f‖`, recomputed from scratch.
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

/// Jacobi-preconditioned BiCGSTAB. Deterministic for a fixed configuration
/// whatever the thread count: reductions use fixed blocks summed in order.
pub fn solve(system: &FdSystem, tol: f64, max_iter: usize) -> Result<Solution> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.rows;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(Solution {
            u: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            residual_history: vec![0.0],
        });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let precondition = |src: &[f64], dst: &mut [f64]| {
        dst.par_iter_mut()
            .zip(src.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(d, (s, w))| *d = s * w);
    };

    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut r_hat = r.clone();
    let (mut p, mut v) = (vec![0.0; n], vec![0.0; n]);
    let (mut y, mut z, mut s, mut t) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut history = vec![1.0];

    let true_residual = |x: &[f64], r: &mut Vec<f64>| {
        let mut ax = vec![0.0; n];
        a.matvec(x, &mut ax);
        r.par_iter_mut()
            .zip(b.par_iter().zip(ax.par_iter()))
            .for_each(|(ri, (bi, axi))| *ri = bi - axi);
        norm(r) / b_norm
    };

    for it in 1..=max_iter {
        let rho = dot(&r_hat, &r);
        if rho == 0.0 || omega == 0.0 {
            // breakdown: restart the shadow space on the true residual
            true_residual(&x, &mut r);
            r_hat.copy_from_slice(&r);
            p.fill(0.0);
            v.fill(0.0);
            (rho_old, alpha, omega) = (1.0, 1.0, 1.0);
            continue;
        }
        let beta = (rho / rho_old) * (alpha / omega);
        p.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(pi, (ri, vi))| *pi = ri + beta * (*pi - omega * vi));
        precondition(&p, &mut y);
        a.matvec(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        s.par_iter_mut()
            .zip(r.par_iter().zip(v.par_iter()))
            .for_each(|(si, (ri, vi))| *si = ri - alpha * vi);
        precondition(&s, &mut z);
        a.matvec(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        x.par_iter_mut()
            .zip(y.par_iter().zip(z.par_iter()))
            .for_each(|(xi, (yi, zi))| *xi += alpha * yi + omega * zi);
        r.par_iter_mut()
            .zip(s.par_iter().zip(t.par_iter()))
            .for_each(|(ri, (si, ti))| *ri = si - omega * ti);
        rho_old = rho;
        let rel = norm(&r) / b_norm;
        history.push(rel);
        if !rel.is_finite() {
            break;
        }
        if rel <= tol {
            let checked = true_residual(&x, &mut r);
            if checked <= tol {
                *history.last_mut().unwrap() = checked;
                let sol = Solution {
                    u: x,
                    iterations: it,
                    residual: checked,
                    residual_history: history,
                };
                check_maximum_principle(system, &sol)?;
                return Ok(sol);
            }
            r_hat.copy_from_slice(&r);
            p.fill(0.0);
            v.fill(0.0);
            (rho_old, alpha, omega) = (1.0, 1.0, 1.0);
        }
    }
    Err(Error::Solver {
        iterations: history.len() - 1,
        last: *history.last().unwrap(),
        residual_history: history,
    })
}

fn check_maximum_principle(system: &FdSystem, sol: &Solution) -> Result<()> {
    if system.rhs.iter().any(|&f| f < 0.0) {
        return Ok(());
    }
    let min = sol.u.iter().copied().fold(f64::INFINITY, f64::min);
    if min < MAX_PRINCIPLE_FLOOR {
        return Err(Error::MaximumPrinciple { min });
    }
    Ok(())
}

/// Nodes sharing a radial bin `[k h, (k+1) h)`.
#[derive(Debug, Clone, Serialize)]
pub struct Shell {
    pub index: usize,
    pub r_mean: f64,
    pub u_mean: f64,
    pub count: usize,
    /// Spread of `u` about its least-squares line in `|x|`, over the mean
    /// of `|u|`.
    pub deviation: Option<f64>,
}

pub fn shells(grid: &BallGrid, u: &[f64]) -> Vec<Shell> {
    let bins = (1.0 / grid.h).ceil() as usize + 1;
    let mut members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); bins];
    for (k, &value) in u.iter().enumerate() {
        let r = grid.radius(k);
        members[((r / grid.h) as usize).min(bins - 1)].push((r, value));
    }
    members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(index, m)| {
            let count = m.len() as f64;
            let r_mean = m.iter().map(|p| p.0).sum::<f64>() / count;
            let u_mean = m.iter().map(|p| p.1).sum::<f64>() / count;
            Shell {
                index,
                r_mean,
                u_mean,
                count: m.len(),
                deviation: detrended_spread(&m, r_mean, u_mean),
            }
        })
        .collect()
}

fn detrended_spread(m: &[(f64, f64)], r_mean: f64, u_mean: f64) -> Option<f64> {
    if m.len() < 3 {
        return None;
    }
    let srr: f64 = m.iter().map(|p| (p.0 - r_mean).powi(2)).sum();
    let sru: f64 = m.iter().map(|p| (p.0 - r_mean) * (p.1 - u_mean)).sum();
    let slope = if srr > 0.0 { sru / srr } else { 0.0 };
    let residuals = m.iter().map(|p| p.1 - u_mean - slope * (p.0 - r_mean));
    let (lo, hi) = residuals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
        (lo.min(e), hi.max(e))
    });
    let scale = m.iter().map(|p| p.1.abs()).sum::<f64>() / m.len() as f64;
    (scale > 0.0).then(|| (hi - lo) / scale)
}

/// Largest shell deviation among shells with `lo < r_mean < hi`.
pub fn symmetry_deviation_in_window(grid: &BallGrid, u: &[f64], lo: f64, hi: f64) -> f64 {
    shells(grid, u)
        .iter()
        .filter(|s| s.r_mean > lo && s.r_mean < hi)
        .filter_map(|s| s.deviation)
        .fold(0.0, f64::max)
}

/// Largest within-shell deviation, skipping the source region `|x| < 2ρ`
/// and the boundary shells `|x| > 1 - 3h`.
pub fn radial_symmetry_deviation(grid: &BallGrid, u: &[f64], rho: f64) -> f64 {
    symmetry_deviation_in_window(grid, u, 2.0 * rho, 1.0 - 3.0 * grid.h)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonRow {
    pub r: f64,
    pub fd: f64,
    pub radial: f64,
    pub rel_error: f64,
}

/// Shell averages against the radial mollified solution at the shell mean
/// radius, for shells with `lo < r_mean < hi`.
pub fn radial_comparison(
    system: &FdSystem,
    u: &[f64],
    lo: f64,
    hi: f64,
    q: &QuadratureConfig,
) -> Result<Vec<ComparisonRow>> {
    let rho = system
        .rho
        .ok_or_else(|| Error::Usage("radial comparison needs the mollified source".into()))?;
    shells(&system.grid, u)
        .par_iter()
        .filter(|s| s.r_mean > lo && s.r_mean < hi)
        .map(|s| {
            let radial = mollified_green_value(&system.spec, 3, rho, s.r_mean, q)?;
            Ok(ComparisonRow {
                r: s.r_mean,
                fd: s.u_mean,
                radial,
                rel_error: ((s.u_mean - radial) / radial).abs(),
            })
        })
        .collect()
}

/// Discrete flux of `-∇u` out of the staircase region `{|x| ≤ radius}`:
/// `Σ (u_i - u_j) h` over grid edges leaving the region.
pub fn discrete_flux(grid: &BallGrid, u: &[f64], radius: f64) -> f64 {
    let inside = |k: usize| grid.radius(k) <= radius;
    let mut flux = 0.0;
    for k in (0..grid.interior_count()).filter(|&k| inside(k)) {
        for axis in 0..3 {
            for step in [-1, 1] {
                match grid.neighbor(k, axis, step) {
                    Some(j) if inside(j) => {}
                    Some(j) => flux += (u[k] - u[j]) * grid.h,
                    None => flux += u[k] * grid.h,
                }
            }
        }
    }
    flux
}

/// Continuum value of [`discrete_flux`] for the mollified solution at
/// `radius > ρ`: `ω Q(ρ) e^{D(0,r)}`, which is 1 without drift.
pub fn flux_comparator(spec: &DriftSpec, rho: f64, radius: f64, q: &QuadratureConfig) -> Result<f64> {
    Ok(mollifier_flux(spec, 3, rho, q)? * spec.drift_integral(0.0, radius)?.exp())
}

/// Interior nodes as `x,y,z,u` rows.
pub fn write_solution_csv<W: Write>(grid: &BallGrid, u: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "x,y,z,u")?;
    for (k, value) in u.iter().enumerate() {
        let x = grid.position(k);
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", x[0], x[1], x[2], value)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct FdSummary {
    #[serde(rename = "N")]
    pub points: usize,
    pub h: f64,
    pub rho: Option<f64>,
    pub m: Option<u64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub iters: usize,
    pub residual: f64,
    pub symmetry_deviation: Option<f64>,
    pub threads: usize,
    pub warnings: Vec<String>,
}

impl FdSummary {
    pub fn new(system: &FdSystem, sol: &Solution) -> Self {
        FdSummary {
            points: system.grid.points,
            h: system.grid.h,
            rho: system.rho,
            m: system.spec.truncation(),
            c: system.spec.strength(),
            iters: sol.iterations,
            residual: sol.residual,
            symmetry_deviation: system
                .rho
                .map(|rho| radial_symmetry_deviation(&system.grid, &sol.u, rho)),
            threads: rayon::current_num_threads(),
            warnings: system.warnings.clone(),
        }
    }
}

/// Centre and radius of the source ball in the blow-up experiment.
pub const BLOWUP_CENTER: f64 = 0.5;
pub const BLOWUP_RADIUS: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct BlowupRow {
    pub m: u64,
    pub u0: f64,
    /// `∫ G*(|y|) f(y) dy` by radial quadrature.
    pub comparator: f64,
    pub iterations: usize,
    pub peclet: f64,
}

/// Area of `{|y| = r} ∩ B(d e₁, ε)` for `|d - r| < ε`.
fn cap_area(r: f64, d: f64, eps: f64) -> f64 {
    let cos_theta = ((r * r + d * d - eps * eps) / (2.0 * r * d)).clamp(-1.0, 1.0);
    2.0 * std::f64::consts::PI * r * r * (1.0 - cos_theta)
}

/// `u(0) = ∫ G*(|y|) 1_{B((1/2,0,0), 0.1)}(y) dy` with the adjoint kernel.
pub fn blowup_comparator(spec: &DriftSpec, q: &QuadratureConfig) -> Result<f64> {
    let (d, eps) = (BLOWUP_CENTER, BLOWUP_RADIUS);
    // the outer quadrature only needs moderate accuracy
    let outer = QuadratureConfig { rel_tol: 1e-8, ..*q };
    let est = integrate(
        |r| adjoint_green_value(spec, 3, r, q).unwrap_or(f64::NAN) * cap_area(r, d, eps),
        &[Panel::Linear { lo: d - eps, hi: d + eps }],
        &outer,
    )?;
    Ok(est.value)
}

/// `u_m(0)` for `-Δu - B_m·∇u = 1_{B((1/2,0,0), 0.1)}` over increasing `m`.
pub fn poisson_blowup_experiment(
    c: f64,
    m_list: &[u64],
    points: usize,
    tol: f64,
    q: &QuadratureConfig,
) -> Result<Vec<BlowupRow>> {
    if m_list.is_empty() || m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("m list must be nonempty and strictly increasing".into()));
    }
    let grid = BallGrid::new(points)?;
    let indicator = |x: [f64; 3]| {
        let d2 = (x[0] - BLOWUP_CENTER).powi(2) + x[1] * x[1] + x[2] * x[2];
        if d2 < BLOWUP_RADIUS * BLOWUP_RADIUS {
            1.0
        } else {
            0.0
        }
    };
    m_list
        .iter()
        .map(|&m| {
            let spec = DriftSpec::truncated(c, m);
            let system = assemble_with_source(&spec, &grid, indicator)?;
            let sol = solve(&system, tol, DEFAULT_MAX_ITER)?;
            Ok(BlowupRow {
                m,
                u0: sol.u[grid.origin()],
                comparator: blowup_comparator(&spec, q)?,
                iterations: sol.iterations,
                peclet: peclet_number(&spec, grid.h),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solved(spec: &DriftSpec, points: usize, rho: f64) -> (FdSystem, Solution) {
        let grid = BallGrid::new(points).unwrap();
        let system = assemble(spec, &grid, rho).unwrap();
        let sol = solve(&system, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        (system, sol)
    }

    #[test]
    fn grid_structure() {
        let g = BallGrid::new(9).unwrap();
        assert_eq!(g.h, 0.25);
        assert_eq!(g.position(g.origin()), [0.0; 3]);
        assert!(BallGrid::new(8).is_err());
        for k in 0..g.interior_count() {
            assert!(g.radius(k) < 1.0);
        }
    }

    #[test]
    fn drift_vector_on_axis() {
        let spec = DriftSpec::truncated(1.0, 20);
        assert_eq!(drift_vector(&spec, [0.5, 0.0, 0.0]).unwrap(), [-2.0, 0.0, 0.0]);
        assert_eq!(drift_vector(&spec, [0.0; 3]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn assembly_structure_and_guards() {
        let grid = BallGrid::new(17).unwrap();
        let spec = DriftSpec::truncated(1.0, 20);
        let sys = assemble(&spec, &grid, 4.0 * grid.h).unwrap();
        assert_eq!(sys.matrix.rows, grid.interior_count());
        assert!(sys.m_matrix_check().holds());
        let mass: f64 = sys.rhs.iter().sum::<f64>() * grid.h.powi(3);
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(!sys.warnings.is_empty(), "C·m·h = 2.5 must warn");
        assert!(matches!(
            assemble(&spec, &grid, 1.5 * grid.h),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(
            assemble(&DriftSpec::power(1.0, 0.5), &grid, 0.3),
            Err(Error::InvalidSpec(_))
        ));
        assert!(assemble(&DriftSpec::zero(), &grid, 0.3).unwrap().matrix.is_symmetric(1e-14));
        assert!(!sys.matrix.is_symmetric(1e-14));
    }

    #[test]
    fn zero_drift_ordering_and_closed_form() {
        let (sys, sol) = solved(&DriftSpec::zero(), 33, 0.125);
        let g = &sys.grid;
        let center = sol.u[g.origin()];
        let edge = (0..g.interior_count())
            .filter(|&k| g.radius(k) > 1.0 - g.h)
            .map(|k| sol.u[k])
            .fold(0.0, f64::max);
        assert!(center > edge);
        let rows = radial_comparison(&sys, &sol.u, 0.15, 0.7, &QuadratureConfig::default()).unwrap();
        let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
        assert!(worst < 0.05, "worst {worst}");
    }

    #[test]
    fn halving_tolerance_is_consistent() {
        let grid = BallGrid::new(17).unwrap();
        let sys = assemble(&DriftSpec::truncated(1.0, 5), &grid, 0.25).unwrap();
        let tol = 1e-8;
        let a = solve(&sys, tol, 1000).unwrap();
        let b = solve(&sys, tol / 2.0, 1000).unwrap();
        let diff: f64 = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(diff / norm(&b.u) < 10.0 * tol);
    }

    #[test]
    fn solve_is_deterministic() {
        let grid = BallGrid::new(17).unwrap();
        let sys = assemble(&DriftSpec::truncated(1.0, 5), &grid, 0.25).unwrap();
        let a = solve(&sys, 1e-10, 1000).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| solve(&sys, 1e-10, 1000)).unwrap();
        assert_eq!(a.u, b.u);
    }

    #[test]
    fn non_convergence_reports_history() {
        let grid = BallGrid::new(17).unwrap();
        let sys = assemble(&DriftSpec::zero(), &grid, 0.25).unwrap();
        match solve(&sys, 1e-12, 2) {
            Err(Error::Solver { residual_history, .. }) => assert_eq!(residual_history.len(), 3),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let grid = BallGrid::new(9).unwrap();
        let sys = assemble_with_source(&DriftSpec::truncated(1.0, 5), &grid, |_| 0.0).unwrap();
        let sol = solve(&sys, DEFAULT_TOL, 10).unwrap();
        assert!(sol.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn detector_flags_non_radial_function() {
        let grid = BallGrid::new(33).unwrap();
        let u: Vec<f64> = (0..grid.interior_count()).map(|k| grid.position(k)[0]).collect();
        assert!(radial_symmetry_deviation(&grid, &u, 0.125) > 1.0);
        let radial: Vec<f64> = (0..grid.interior_count()).map(|k| 1.0 - grid.radius(k)).collect();
        assert!(radial_symmetry_deviation(&grid, &radial, 0.125) < 1e-12);
    }

    #[test]
    fn zero_drift_flux_is_unit() {
        let (sys, sol) = solved(&DriftSpec::zero(), 33, 0.125);
        let flux = discrete_flux(&sys.grid, &sol.u, 0.3);
        assert!((flux - 1.0).abs() < 1e-6, "flux {flux}");
    }

    #[test]
    fn drift_flux_matches_comparator() {
        let spec = DriftSpec::truncated(1.0, 5);
        let (sys, sol) = solved(&spec, 33, 0.125);
        let flux = discrete_flux(&sys.grid, &sol.u, 0.3);
        let expected = flux_comparator(&spec, 0.125, 0.3, &QuadratureConfig::default()).unwrap();
        assert!(((flux - expected) / expected).abs() < 0.1, "{flux} vs {expected}");
    }

    #[test]
    fn blowup_list_must_increase() {
        let q = QuadratureConfig::default();
        assert!(poisson_blowup_experiment(1.0, &[10, 5], 17, 1e-8, &q).is_err());
        assert!(poisson_blowup_experiment(1.0, &[], 17, 1e-8, &q).is_err());
    }

    #[test]
    fn cap_area_limits() {
        // a sphere through the centre of a small ball cuts ≈ πε²
        let a = cap_area(0.5, 0.5, 1e-3);
        assert!((a - std::f64::consts::PI * 1e-6).abs() < 1e-8);
    }
}
