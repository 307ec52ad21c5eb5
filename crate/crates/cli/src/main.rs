//! Runs the Green's function experiments and writes `report.json` + `rows.csv`.
//!
//! Exit codes: 0 pass, 2 usage, 3 numerical failure, 4 failed check.
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use driftgreen::bounds;
use driftgreen::experiments::{self, ExperimentReport};
use driftgreen::{build_profile, DriftSpec, Error, QuadratureConfig};

#[derive(Parser)]
#[command(version, about, long_about = None)]
struct Cli {
    /// Relative tolerance of every adaptive quadrature
    #[arg(long, global = true, default_value_t = 1e-10)]
    rel_tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// G_m(r) over truncation levels m, with the fit against ln m
    SweepM {
        #[arg(long = "C")]
        c: f64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// G(r) over the power-regularized family
    SweepBeta {
        #[arg(long = "C")]
        c: f64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        beta: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// G_m(r) over drift strengths at fixed m
    SweepC {
        #[arg(long)]
        m: u64,
        #[arg(long = "C", value_delimiter = ',', required = true)]
        c: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        r: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residuals of the distributional identity over the certified family
    Verify {
        /// Drift spec as inline JSON or a path to a JSON file
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Multiply the profile by this factor before checking
        #[arg(long, default_value_t = 1.0)]
        mis_scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference solve cross-checked against the radial profile
    FdCheck {
        #[arg(long)]
        m: u64,
        #[arg(long = "C")]
        c: f64,
        #[arg(long = "N")]
        points: usize,
        #[arg(long, default_value_t = 0.125)]
        rho: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// u_m(0) for a source centred at (1/2, 0, 0)
    Blowup {
        #[arg(long = "C")]
        c: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        #[arg(long = "N")]
        points: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulated G and G' on the graded mesh, as `profile.csv`
    Profile {
        /// Drift spec as inline JSON or a path to a JSON file
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        mesh: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Interior lower/upper bound probes over truncation levels
    Bounds {
        #[arg(long = "C")]
        c: f64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

fn read_spec(arg: &str) -> Result<DriftSpec, Error> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        return DriftSpec::from_json(trimmed);
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| Error::Usage(format!("cannot read spec file {arg}: {e}")))?;
    DriftSpec::from_json(&text)
}

fn finish(report: &ExperimentReport, out: Option<&Path>) -> Result<bool, Error> {
    if let Some(dir) = out {
        report.write_to(dir)?;
    }
    println!("{:?}: {} rows", report.kind, report.rows.len());
    if let Some(fit) = &report.fit {
        println!(
            "fit: slope {:.6e}, intercept {:.6e}, r2 {:.6}, excluded {:?}",
            fit.slope, fit.intercept, fit.r_squared, fit.excluded
        );
    }
    for check in &report.checks {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {:.6e} (threshold {:.1e})", check.name, check.value, check.threshold);
    }
    if out.is_none() {
        let mut stdout = std::io::stdout().lock();
        report.write_csv(&mut stdout)?;
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool, Error> {
    let q = QuadratureConfig::default().with_rel_tol(cli.rel_tol);
    q.validate()?;
    match cli.command {
        Command::SweepM { c, n, m, r, out } => {
            finish(&experiments::run_m_sweep(c, n, &m, r, &q)?, out.as_deref())
        }
        Command::SweepBeta { c, n, beta, r, out } => {
            finish(&experiments::run_beta_sweep(c, n, &beta, r, &q)?, out.as_deref())
        }
        Command::SweepC { m, c, n, r, out } => {
            finish(&experiments::run_c_sweep(m, n, &c, r, &q)?, out.as_deref())
        }
        Command::Verify {
            spec,
            n,
            mis_scale,
            out,
        } => {
            let spec = read_spec(&spec)?;
            finish(&experiments::run_verify(&spec, n, mis_scale, &q)?, out.as_deref())
        }
        Command::FdCheck {
            m,
            c,
            points,
            rho,
            tol,
            out,
        } => {
            let outcome = experiments::run_fd_check(c, m, points, rho, tol, &q)?;
            for w in &outcome.summary.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                let file = std::fs::File::create(dir.join("solution.csv"))?;
                driftgreen::fd::write_solution_csv(
                    &outcome.grid,
                    &outcome.solution.u,
                    std::io::BufWriter::new(file),
                )?;
                let summary = serde_json::to_string_pretty(&outcome.summary)?;
                std::fs::write(dir.join("summary.json"), summary + "\n")?;
            }
            finish(&outcome.report, out.as_deref())
        }
        Command::Blowup {
            c,
            m,
            points,
            tol,
            out,
        } => finish(&experiments::run_blowup(c, &m, points, tol, &q)?, out.as_deref()),
        Command::Profile { spec, n, mesh, out } => {
            let profile = build_profile(&read_spec(&spec)?, n, mesh, &q)?;
            eprintln!(
                "{} mesh points, flux constant {:.6e}, flux drift {:.1e}",
                profile.mesh.len(),
                profile.flux_constant,
                profile.flux_drift()
            );
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let file = std::fs::File::create(dir.join("profile.csv"))?;
                    profile.write_csv(std::io::BufWriter::new(file))?;
                }
                None => profile.write_csv(std::io::stdout().lock())?,
            }
            Ok(true)
        }
        Command::Bounds { c, n, m, out } => run_bounds(c, n, &m, &q, out.as_deref()),
    }
}

fn run_bounds(c: f64, n: usize, ms: &[u64], q: &QuadratureConfig, out: Option<&Path>) -> Result<bool, Error> {
    let profiles = ms
        .iter()
        .map(|&m| build_profile(&DriftSpec::truncated(c, m), n, 32, q))
        .collect::<Result<Vec<_>, _>>()?;
    let radii = bounds::probe_radii();
    let reports = profiles
        .iter()
        .map(|p| bounds::interior_lower_bound(p, &radii))
        .collect::<Result<Vec<_>, _>>()?;
    let upper = if profiles.len() >= 2 {
        Some(bounds::upper_bound_status(&profiles, 0.5)?)
    } else {
        None
    };
    for rep in &reports {
        println!(
            "m={}: c0 {:.6e}, C2 {:.6e}, derivative c0 {:.6e}",
            rep.spec.truncation().unwrap_or(0),
            rep.c0_empirical,
            rep.c2_empirical,
            rep.derivative_c0.unwrap_or(f64::NAN)
        );
    }
    if let Some(u) = &upper {
        println!("upper bound: {:?}", u.status);
    }
    let passed = reports.iter().all(|r| r.lower_bound_holds);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::json!({
            "kind": "Bounds",
            "config_echo": { "C": c, "n": n, "m": ms, "radii": radii, "quadrature": q },
            "reports": reports,
            "upper": upper,
            "passed": passed,
        });
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&json)? + "\n")?;
        let file = std::fs::File::create(dir.join("rows.csv"))?;
        bounds::write_sweep_csv(&reports, std::io::BufWriter::new(file))?;
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
