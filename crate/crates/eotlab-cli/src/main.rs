//! Declarative experiment runner: parse a flat config, execute sweeps and
//! detachment checks, and emit CSV reports with CI-friendly exit codes.
//!
//! Exit codes: 0 success, 2 an acceptance threshold failed, 1 execution
//! error (bad config, solver non-convergence, I/O).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use eotlab::config::{parse_config, DetachConfig, ExperimentConfig};
use eotlab::detachment::{
    check_p_detachment, convex_ball_lower_bound_with, global_detachment_forward, BallBoundOptions,
};
use eotlab::estimates::run_sweep;
use eotlab::field::{PotentialField, PotentialKind};
use eotlab::marginals::{build_marginal, ConvexDomain, Grid};
use eotlab::report::{fmt17, solution_csv, sweep_csv, sweep_summary, write_atomic};
use eotlab::sinkhorn::{solve_schrodinger_with, SolverOptions};

#[derive(Parser)]
#[command(
    name = "eotlab",
    version,
    about = "entropic optimal transport laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's [output] dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sampling integrals (solvers stay sequential for
    /// bit-reproducibility).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Verbose diagnostics on stderr plus per-epsilon iteration traces.
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one (instance, epsilon) pair and write the solution table.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Regularization parameter; defaults to the first (largest) value
        /// of the config schedule.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run the full epsilon sweep: CSV, summary, and threshold gates.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run detachment checks (convex-ball bound, dual-pair certificates).
    Detach {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Aggregate sweep summaries from a directory into one table.
    Report {
        /// Directory holding summary_*.txt files.
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let verbose = match &cli.command {
        Command::Solve { common, .. } | Command::Sweep { common } | Command::Detach { common } => {
            common.verbose
        }
        Command::Report { .. } => false,
    };
    env_logger::Builder::from_default_env()
        .filter_level(if verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .init();

    let outcome = match cli.command {
        Command::Solve { common, epsilon } => cmd_solve(&common, epsilon),
        Command::Sweep { common } => cmd_sweep(&common),
        Command::Detach { common } => cmd_detach(&common),
        Command::Report { dir } => cmd_report(&dir),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| format!("cannot read {}: {e}", common.config.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(dir) = &common.out {
        cfg.out_dir = dir.display().to_string();
    }
    Ok(cfg)
}

fn cmd_solve(common: &CommonArgs, epsilon: Option<f64>) -> Result<bool, String> {
    let cfg = load_config(common)?;
    let eps = epsilon.unwrap_or(cfg.epsilons[0]);
    if !(eps > 0.0) {
        return Err(format!("epsilon must be positive, got {eps}"));
    }
    let inst = &cfg.instance;
    let src = inst.source_domain.to_domain().map_err(|e| e.to_string())?;
    let tgt = inst.target_domain.to_domain().map_err(|e| e.to_string())?;
    let f = inst.source_density.build(&src).map_err(|e| e.to_string())?;
    let g = inst.target_density.build(&tgt).map_err(|e| e.to_string())?;
    let mu = Arc::new(build_marginal(&src, &f, inst.resolution).map_err(|e| e.to_string())?);
    let nu = Arc::new(build_marginal(&tgt, &g, inst.resolution).map_err(|e| e.to_string())?);
    let opts = SolverOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        keep_dual_trace: common.verbose,
        ..SolverOptions::default()
    };
    let sol = solve_schrodinger_with(&mu, &nu, eps, &opts, None).map_err(|e| e.to_string())?;
    log::info!(
        "instance {} at eps = {eps}: {} iterations, residual {:.3e}",
        inst.id,
        sol.iterations,
        sol.marginal_residual
    );
    let out = Path::new(&cfg.out_dir);
    let path = out.join(format!("solution_{}_eps{eps}.csv", inst.id));
    write_atomic(&path, &solution_csv(&sol)).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    if common.verbose {
        write_trace(out, &inst.id, eps, &sol.residual_trace, &sol.dual_trace)?;
    }
    Ok(true)
}

fn write_trace(
    out: &Path,
    id: &str,
    eps: f64,
    residuals: &[f64],
    duals: &[f64],
) -> Result<(), String> {
    let mut csv = String::from("iteration,residual,dual_value\n");
    for (k, r) in residuals.iter().enumerate() {
        let d = duals.get(k).map(|d| fmt17(*d)).unwrap_or_default();
        csv.push_str(&format!("{},{},{d}\n", k + 1, fmt17(*r)));
    }
    let path = out.join(format!("trace_{id}_eps{eps}.csv"));
    write_atomic(&path, &csv).map_err(|e| e.to_string())?;
    Ok(())
}

fn cmd_sweep(common: &CommonArgs) -> Result<bool, String> {
    let cfg = load_config(common)?;
    let report = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let out = Path::new(&cfg.out_dir);
    let csv_path = out.join(format!("sweep_{}.csv", report.instance_id));
    let sum_path = out.join(format!("summary_{}.txt", report.instance_id));
    write_atomic(&csv_path, &sweep_csv(&report)).map_err(|e| e.to_string())?;
    write_atomic(&sum_path, &sweep_summary(&report)).map_err(|e| e.to_string())?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", sum_path.display());
    for gate in &report.gates {
        if !gate.pass {
            eprintln!("threshold failure [{}]: {}", gate.name, gate.detail);
        }
    }
    Ok(report.all_gates_pass())
}

/// One row of the certificate table.
struct DetachRow {
    check: &'static str,
    p: f64,
    value: f64,
    floor: f64,
    satisfied: bool,
    samples: usize,
    detail: String,
}

fn detach_rows(detach: &DetachConfig, threads: usize) -> Result<Vec<DetachRow>, String> {
    let mut rows = Vec::new();
    for check in &detach.checks {
        match check.as_str() {
            "prop31" => {
                let domain = detach.domain.to_domain().map_err(|e| e.to_string())?;
                let opts = BallBoundOptions {
                    integral_points: detach.integral_points,
                    seed: 0,
                    threads,
                };
                let base = convex_ball_lower_bound_with(
                    &domain,
                    detach.z_samples,
                    detach.r_samples,
                    &opts,
                )
                .map_err(|e| e.to_string())?;
                let doubled = convex_ball_lower_bound_with(
                    &domain,
                    detach.z_samples,
                    detach.r_samples,
                    &BallBoundOptions {
                        integral_points: 2 * detach.integral_points,
                        ..opts
                    },
                )
                .map_err(|e| e.to_string())?;
                rows.push(DetachRow {
                    check: "prop31",
                    p: f64::NAN,
                    value: base.min_ratio,
                    floor: detach.ratio_floor,
                    satisfied: base.min_ratio >= detach.ratio_floor && base.min_ratio > 0.0,
                    samples: base.pairs,
                    detail: format!("worst z {:?} r {:.4}", base.worst_z, base.worst_r),
                });
                let stable = (base.min_ratio - doubled.min_ratio).abs()
                    <= 0.1 * doubled.min_ratio.abs().max(1e-300);
                rows.push(DetachRow {
                    check: "prop31-stability",
                    p: f64::NAN,
                    value: doubled.min_ratio,
                    floor: 0.9 * base.min_ratio,
                    satisfied: stable,
                    samples: doubled.pairs,
                    detail: "doubled integration points".into(),
                });
            }
            "quadratic" => {
                let grid = Grid::midpoint(&[(0.0, 1.0)], 256);
                let u_vals: Vec<f64> = grid.axes[0].iter().map(|x| 0.5 * x * x).collect();
                let v_vals: Vec<f64> = grid.axes[0].iter().map(|y| 0.5 * y * y).collect();
                let u =
                    PotentialField::new(grid.clone(), u_vals, None, PotentialKind::KantorovichU0)
                        .map_err(|e| e.to_string())?;
                let v = PotentialField::new(grid, v_vals, None, PotentialKind::KantorovichV0)
                    .map_err(|e| e.to_string())?;
                let k = ConvexDomain::interval(0.0, 1.0).map_err(|e| e.to_string())?;
                let cert = check_p_detachment(&u, &v, &k, 2.0, &|x| vec![x[0]])
                    .map_err(|e| e.to_string())?;
                rows.push(DetachRow {
                    check: "quadratic",
                    p: 2.0,
                    value: cert.best_l,
                    floor: 0.4999,
                    satisfied: (cert.best_l - 0.5).abs() <= 1e-4,
                    samples: cert.sample_count,
                    detail: format!("worst pair {:?}", cert.worst_pair),
                });
                // the same potential through the Hölder-implication route
                let rep = global_detachment_forward(&u, 1.0, 1.0, &|x| vec![x[0]])
                    .map_err(|e| e.to_string())?;
                rows.push(DetachRow {
                    check: "quadratic-global",
                    p: 2.0,
                    value: rep.certificate.best_l,
                    floor: rep.bound,
                    satisfied: rep.satisfied,
                    samples: rep.certificate.sample_count,
                    detail: format!("measured Bregman coefficient {:.6}", rep.measured_bregman),
                });
            }
            "sqrt" => {
                let grid = Grid::midpoint(&[(-1.0, 1.0)], 1024);
                let u_vals: Vec<f64> = grid.axes[0]
                    .iter()
                    .map(|x| (2.0 / 3.0) * x.abs().powf(1.5))
                    .collect();
                let v_vals: Vec<f64> = grid.axes[0].iter().map(|y| y.abs().powi(3) / 3.0).collect();
                let u =
                    PotentialField::new(grid.clone(), u_vals, None, PotentialKind::KantorovichU0)
                        .map_err(|e| e.to_string())?;
                let v = PotentialField::new(grid, v_vals, None, PotentialKind::KantorovichV0)
                    .map_err(|e| e.to_string())?;
                let k = ConvexDomain::interval(-0.5, 0.5).map_err(|e| e.to_string())?;
                let grad = |x: &[f64]| vec![x[0].signum() * x[0].abs().sqrt()];
                let cert = check_p_detachment(&u, &v, &k, 3.0, &grad).map_err(|e| e.to_string())?;
                rows.push(DetachRow {
                    check: "sqrt",
                    p: 3.0,
                    value: cert.best_l,
                    floor: 0.0,
                    satisfied: cert.best_l > 0.0 && cert.best_l <= 1.0 / 3.0 + 1e-3,
                    samples: cert.sample_count,
                    detail: format!("worst pair {:?}", cert.worst_pair),
                });
            }
            other => return Err(format!("unknown detachment check '{other}'")),
        }
    }
    Ok(rows)
}

fn cmd_detach(common: &CommonArgs) -> Result<bool, String> {
    let cfg = load_config(common)?;
    let detach = cfg.detach.clone().unwrap_or_default();
    let rows = detach_rows(&detach, common.threads)?;
    let mut csv = String::from("check,p,value,floor,satisfied,samples,detail\n");
    let mut ok = true;
    for r in &rows {
        ok &= r.satisfied;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.check,
            if r.p.is_nan() {
                String::new()
            } else {
                r.p.to_string()
            },
            fmt17(r.value),
            fmt17(r.floor),
            r.satisfied,
            r.samples,
            r.detail.replace(',', ";")
        ));
        if !r.satisfied {
            eprintln!(
                "threshold failure [{}]: value {} floor {}",
                r.check, r.value, r.floor
            );
        }
    }
    let out = Path::new(&cfg.out_dir);
    let path = out.join(format!("detach_{}.csv", cfg.instance.id));
    write_atomic(&path, &csv).map_err(|e| e.to_string())?;
    println!("wrote {}", path.display());
    Ok(ok)
}

fn cmd_report(dir: &Path) -> Result<bool, String> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("cannot read {}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("summary_") && n.ends_with(".txt"))
                .unwrap_or(false)
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        return Err(format!("no summary_*.txt files under {}", dir.display()));
    }
    let mut csv =
        String::from("instance,alpha_hat,beta_used,cpt_slope,a_hat,b_hat,m_hat,gates_failed\n");
    let mut all_pass = true;
    for path in &entries {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        let field = |key: &str| -> String {
            text.lines()
                .find_map(|l| l.strip_prefix(&format!("{key} = ")))
                .map(|rest| rest.split_whitespace().next().unwrap_or("").to_string())
                .unwrap_or_default()
        };
        let instance = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("instance "))
            .map(|rest| rest.split_whitespace().next().unwrap_or("?").to_string())
            .unwrap_or_else(|| "?".into());
        let failed = text.lines().filter(|l| l.starts_with("[FAIL]")).count();
        all_pass &= failed == 0;
        csv.push_str(&format!(
            "{instance},{},{},{},{},{},{},{failed}\n",
            field("alpha_hat"),
            field("beta_used"),
            field("cpt_slope"),
            field("a_hat"),
            field("b_hat"),
            field("m_hat"),
        ));
    }
    let path = dir.join("report.csv");
    write_atomic(&path, &csv).map_err(|e| e.to_string())?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(all_pass)
}
