//! Command-line front end: convergence ladders, coarsening runs, kernel and
//! surrogate audits, and the direct-vs-fast performance comparison.

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;
use tfac_core::error::{KitError, Result};
use tfac_core::harness::coarsening::run_coarsening;
use tfac_core::harness::config::{content_hash, RunConfig};
use tfac_core::harness::convergence::{
    optimal_gamma, run_convergence, ConvergenceSettings,
};
use tfac_core::harness::output::{write_kernel_check_csv, write_soe_check, write_summary_json, RunSummary};
use tfac_core::harness::perf::{run_perf_compare, write_perf_csv, PerfSettings};
use tfac_core::l1_kernels::{l1_weights, KernelTriangle, Retention};
use tfac_core::schemes::SchemeKind;
use tfac_core::soe::{build_soe, build_soe_with, SoeOptions};
use tfac_core::temporal_mesh::TemporalMesh;

#[derive(Parser)]
#[command(
    name = "tfac",
    version,
    about = "Time-fractional Allen-Cahn solver kit: nonuniform L1 stepping with \
             fast history compression, maximum-bound and energy monitors"
)]
struct Cli {
    /// Run configuration file (.json or .toml); required by `coarsen`
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV/VTK/JSON artifacts
    #[arg(long, global = true, default_value = "tfac-out")]
    out: PathBuf,
    /// Override the RNG seed of the config or built-in defaults
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for field arithmetic; results are identical for any value
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Sfl1,
    Pc,
}

impl SchemeArg {
    fn kind(self) -> SchemeKind {
        match self {
            SchemeArg::Sfl1 => SchemeKind::StabilizedL1,
            SchemeArg::Pc => SchemeKind::PredictorCorrector,
        }
    }
    fn name(self) -> &'static str {
        match self {
            SchemeArg::Sfl1 => "sfl1",
            SchemeArg::Pc => "pc",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Temporal convergence ladder against the manufactured solution on
    /// graded meshes; writes convergence.csv and summary.json
    Convergence {
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        /// Regularity exponent of the manufactured solution
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        /// Mesh grading exponent; defaults to the order-recovering optimum
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Pc)]
        scheme: SchemeArg,
        /// Ladder of step counts, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = vec![100usize, 200, 400, 800, 1600, 3200])]
        ladder: Vec<usize>,
        /// Cells per axis of the 2D grid
        #[arg(long, default_value_t = 64)]
        grid_m: usize,
        #[arg(long, default_value_t = 1e-4)]
        eps2: f64,
        /// History-compression tolerance used by the ladder runs
        #[arg(long, default_value_t = 1e-9)]
        soe_tol: f64,
    },
    /// Coarsening-dynamics run described by --config; writes energy.csv,
    /// snapshots and summary.json
    Coarsen,
    /// Build a kernel surrogate and audit it on a geometric scan; writes
    /// soe_check.csv and soe_summary.json
    SoeCheck {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Lower end of the certified window
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        /// Upper end of the certified window
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 10_000)]
        points: usize,
        /// Build even when the tolerance exceeds the dissipation-law cap
        #[arg(long)]
        allow_over_cap: bool,
    },
    /// Discrete-kernel audit on a graded mesh: weights, inverse and
    /// complementary kernels, identity residuals; writes kernel_check.csv
    KernelCheck {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Number of mesh steps (and kernel rows)
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
    /// Lockstep direct-vs-fast comparison; writes perf.csv and
    /// perf_summary.json
    Perf {
        /// Cells per axis of the 1D grid
        #[arg(long, default_value_t = 256)]
        m: usize,
        #[arg(long, default_value_t = 1000)]
        n_steps: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-10)]
        soe_tol: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        tfac_core::parallel::set_threads(n.max(1));
    }
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    match cli.command {
        Command::Convergence {
            alpha,
            mu,
            gamma,
            scheme,
            ladder,
            grid_m,
            eps2,
            soe_tol,
        } => {
            let gamma = gamma.unwrap_or_else(|| optimal_gamma(alpha, mu));
            let mut settings = ConvergenceSettings::new(alpha, mu, gamma, scheme.kind());
            settings.ladder = ladder;
            settings.grid_m = grid_m;
            settings.eps2 = eps2;
            settings.soe_tol = soe_tol;
            run_convergence_cmd(&cli.out, &settings, scheme.name())
        }
        Command::Coarsen => {
            let path = cli.config.as_ref().ok_or_else(|| {
                KitError::Config("coarsen needs --config <file.json|file.toml>".into())
            })?;
            let mut config = RunConfig::from_path(path)?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            let outcome = run_coarsening(&config, Some(&cli.out))?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "coarsening run finished: {} steps, sup-norm flags {}, energy flags {}, {:.2} s",
                outcome.times.len() - 1,
                outcome.summary.mbp_violations,
                outcome.summary.energy_violations,
                outcome.summary.wall_time
            );
            println!("artifacts in {}", cli.out.display());
            Ok(())
        }
        Command::SoeCheck { alpha, tol, delta, horizon, points, allow_over_cap } => {
            let started = Instant::now();
            let soe = if allow_over_cap {
                build_soe_with(
                    alpha,
                    tol,
                    delta,
                    horizon,
                    SoeOptions { enforce_cap: false, scan_points: points.max(2) },
                )?
            } else {
                build_soe(alpha, tol, delta, horizon)?
            };
            if soe.cap_exceeded() {
                eprintln!(
                    "warning: tolerance {tol:.3e} exceeds the dissipation-law cap; \
                     bound and energy guarantees do not transfer"
                );
            }
            let worst = write_soe_check(&cli.out, &soe, points)?;
            println!(
                "surrogate: {} nodes, certified error {:.3e}, scan error {:.3e} (tol {:.1e}), {:.2} s",
                soe.n_nodes(),
                soe.certified_error(),
                worst,
                tol,
                started.elapsed().as_secs_f64()
            );
            println!("artifacts in {}", cli.out.display());
            Ok(())
        }
        Command::KernelCheck { alpha, n, gamma, horizon } => {
            run_kernel_check(&cli.out, alpha, n, gamma, horizon)
        }
        Command::Perf { m, n_steps, alpha, soe_tol } => {
            let started = Instant::now();
            let mut settings = PerfSettings::new(m, n_steps, alpha, soe_tol);
            if let Some(seed) = cli.seed {
                settings.seed = seed;
            }
            let report = run_perf_compare(&settings)?;
            write_perf_csv(&cli.out.join("perf.csv"), &report)?;
            #[derive(Serialize)]
            struct PerfSummary<'a> {
                config_hash: String,
                m: usize,
                n_steps: usize,
                alpha: f64,
                soe_tol: f64,
                soe_nodes: usize,
                max_divergence: f64,
                direct_total_seconds: f64,
                fast_total_seconds: f64,
                fast_flatness: f64,
                direct_growth: f64,
                direct_memory_bytes: usize,
                fast_memory_bytes: usize,
                wall_time: f64,
                #[serde(skip)]
                _marker: std::marker::PhantomData<&'a ()>,
            }
            let hash_input = (m, n_steps, alpha.to_bits(), soe_tol.to_bits(), settings.seed);
            let summary = PerfSummary {
                config_hash: content_hash(&hash_input),
                m,
                n_steps,
                alpha,
                soe_tol,
                soe_nodes: report.soe_nodes,
                max_divergence: report.max_divergence,
                direct_total_seconds: report.direct_total_seconds,
                fast_total_seconds: report.fast_total_seconds,
                fast_flatness: report.fast_flatness,
                direct_growth: report.direct_growth,
                direct_memory_bytes: report.direct_memory_bytes,
                fast_memory_bytes: report.fast_memory_bytes,
                wall_time: started.elapsed().as_secs_f64(),
                _marker: std::marker::PhantomData,
            };
            let text = serde_json::to_string_pretty(&summary)
                .map_err(|e| KitError::Config(format!("summary serialization failed: {e}")))?;
            std::fs::write(cli.out.join("perf_summary.json"), text + "\n")?;
            println!(
                "perf: direct {:.2} s total ({}x per-step growth), fast {:.2} s total \
                 ({:.2} flatness, {} nodes), divergence {:.3e}",
                report.direct_total_seconds,
                report.direct_growth.round() as i64,
                report.fast_total_seconds,
                report.fast_flatness,
                report.soe_nodes,
                report.max_divergence
            );
            println!("artifacts in {}", cli.out.display());
            Ok(())
        }
    }
}

fn run_convergence_cmd(
    out: &std::path::Path,
    settings: &ConvergenceSettings,
    scheme_name: &str,
) -> Result<()> {
    let started = Instant::now();
    let report = run_convergence(settings)?;
    let mut csv = std::io::BufWriter::new(std::fs::File::create(out.join("convergence.csv"))?);
    writeln!(csv, "n,tau_max,error")?;
    for e in &report.entries {
        writeln!(csv, "{},{},{}", e.n, e.tau_max, e.error)?;
    }
    drop(csv);
    #[derive(Serialize)]
    struct Snapshot<'a> {
        alpha: f64,
        mu: f64,
        gamma: f64,
        scheme: &'a str,
        ladder: &'a [usize],
        grid_m: usize,
        eps2: f64,
        soe_tol: f64,
    }
    let summary = RunSummary {
        config_hash: content_hash(&Snapshot {
            alpha: settings.alpha,
            mu: settings.mu,
            gamma: settings.gamma,
            scheme: scheme_name,
            ladder: &settings.ladder,
            grid_m: settings.grid_m,
            eps2: settings.eps2,
            soe_tol: settings.soe_tol,
        }),
        slopes: Some(vec![report.slope]),
        mbp_violations: report.mbp_violations,
        energy_violations: 0,
        wall_time: started.elapsed().as_secs_f64(),
    };
    write_summary_json(&out.join("summary.json"), &summary)?;
    if !report.monotone {
        eprintln!("warning: error decay is not monotone along the ladder");
    }
    println!(
        "{scheme_name} alpha={} mu={} gamma={:.3}: slope {:.3} over the finest points, {:.2} s",
        settings.alpha,
        settings.mu,
        settings.gamma,
        report.slope,
        summary.wall_time
    );
    println!("artifacts in {}", out.display());
    Ok(())
}

fn run_kernel_check(
    out: &std::path::Path,
    alpha: f64,
    n: usize,
    gamma: f64,
    horizon: f64,
) -> Result<()> {
    let started = Instant::now();
    let mesh = TemporalMesh::graded(horizon, n, gamma)?;
    let mut triangle = KernelTriangle::new(Retention::Full);
    for k in 0..mesh.n_steps() {
        triangle.push_row(l1_weights(&mesh, k, alpha)?)?;
    }
    write_kernel_check_csv(&out.join("kernel_check.csv"), &triangle)?;
    let mut max_delta = 0.0f64;
    let mut max_partition = 0.0f64;
    for row in 0..triangle.len() {
        for k in 0..=row {
            max_delta = max_delta.max(triangle.delta_residual(row, k)?.abs());
            max_partition = max_partition.max(triangle.partition_residual(row, k)?.abs());
        }
    }
    #[derive(Serialize)]
    struct KernelSummary {
        config_hash: String,
        alpha: f64,
        gamma: f64,
        n: usize,
        horizon: f64,
        max_delta_residual: f64,
        max_partition_residual: f64,
        min_dcc: f64,
        wall_time: f64,
    }
    let summary = KernelSummary {
        config_hash: content_hash(&(alpha.to_bits(), gamma.to_bits(), n, horizon.to_bits())),
        alpha,
        gamma,
        n,
        horizon,
        max_delta_residual: max_delta,
        max_partition_residual: max_partition,
        min_dcc: triangle.min_dcc(),
        wall_time: started.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| KitError::Config(format!("summary serialization failed: {e}")))?;
    std::fs::write(out.join("kernel_summary.json"), text + "\n")?;
    println!(
        "kernel audit over {n} rows: delta residual {max_delta:.3e}, partition residual \
         {max_partition:.3e}, min complementary entry {:.3e}, {:.2} s",
        summary.min_dcc, summary.wall_time
    );
    println!("artifacts in {}", out.display());
    Ok(())
}
