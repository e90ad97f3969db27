//! Command-line runner.
//!
//! `proxopt run <config>` executes the experiment a config file describes
//! and writes per-method CSVs plus a re-runnable manifest; `proxopt verify
//! <suite>` runs one of the built-in verification suites and prints its
//! pass/fail table.
//!
//! Exit codes: 0 success, 1 verification cases failed, 2 bad invocation or
//! unparseable/invalid configuration, 3 numeric failure mid-run.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use proxopt::checks::{run_suite, Suite};
use proxopt::config::{parse_config, render_config, MonitorChoice, RunConfig};
use proxopt::engine::{dual_regularizer_condition, RegularizerCondition, Trajectory};
use proxopt::experiments::{network_from_config, replay_trajectory, run_experiment, MethodId};
use proxopt::metrics::export_csv;
use proxopt::{Error, Result};

#[derive(Parser)]
#[command(
    name = "proxopt",
    version,
    about = "Decentralized stochastic saddle-point experiments and checks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment from a config file and write CSVs + a manifest.
    Run(RunArgs),
    /// Run a built-in verification suite and print its pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file path.
    #[arg(value_name = "CONFIG")]
    config_file: Option<PathBuf>,

    /// Config file path (flag form of the positional).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Root seed; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Replica worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,

    /// Comma-separated methods (default: the scenario's full set).
    #[arg(long, value_delimiter = ',', value_name = "NAMES")]
    methods: Option<Vec<String>>,

    /// Output directory; overrides the config's `dir`. The environment
    /// variable PROXOPT_OUT overrides both.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,

    /// Also write each method's first-replica state trajectory
    /// (iteration, flattened primal, flattened multipliers).
    #[arg(long)]
    dump_state: bool,

    /// Also evaluate the alternative (dimensionally inconsistent)
    /// benchmark normalization on the time-averaged observations and
    /// report it in the manifest (field scenario only).
    #[arg(long)]
    alt_lmmse_formula: bool,

    /// Node whose per-node metric columns are recorded; overrides the
    /// config's `monitor`.
    #[arg(long, value_name = "INDEX")]
    monitor_node: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name: equivalence | gradients | decrement | rates | sampling.
    #[arg(value_name = "SUITE")]
    suite: String,

    /// Root seed for the suite's instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Numeric { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn configure_jobs(jobs: Option<usize>) -> Result<()> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(Error::InvalidArgument("jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool setup failed: {e}")))
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    configure_jobs(args.jobs)?;
    let path = match (args.config_file, args.config) {
        (Some(p), None) | (None, Some(p)) => p,
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument(
                "give the config path once, either positionally or via --config".into(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidArgument(
                "a config file is required (positional or --config)".into(),
            ))
        }
    };
    let text = std::fs::read_to_string(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;

    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(node) = args.monitor_node {
        cfg.monitor = MonitorChoice::Node(node);
    }
    if let Ok(dir) = std::env::var("PROXOPT_OUT") {
        cfg.out_dir = dir;
    } else if let Some(dir) = args.out {
        cfg.out_dir = dir;
    }
    if args.dump_state {
        cfg.dump_state = true;
    }
    cfg.validate()?;

    let methods = match &args.methods {
        Some(names) => names
            .iter()
            .map(|n| MethodId::parse(n))
            .collect::<Result<Vec<_>>>()?,
        None => MethodId::defaults_for(cfg.kind),
    };

    let output = run_experiment(&cfg, &methods, args.alt_lmmse_formula)?;

    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io {
        path: out_dir.clone(),
        source,
    })?;

    let mut manifest_notes = String::new();
    let method_names: Vec<&str> = methods.iter().map(|m| m.name()).collect();
    let _ = writeln!(manifest_notes, "# methods = {}", method_names.join(","));

    for m in &output.methods {
        let name = m.method.name();
        export_csv(&m.mean, &out_dir.join(format!("{name}_mean.csv")))?;
        for (k, series) in m.replicas.iter().enumerate() {
            export_csv(series, &out_dir.join(format!("{name}_run{k:03}.csv")))?;
        }
        let last = m.mean.rows().last().expect("horizon is at least 1");
        println!(
            "{name}: {} replicas; mean at t={}: F_gap {:.4e}, std_err {:.4e}, viol_pos {:.4e}",
            m.replicas.len(),
            last.t,
            last.f_gap,
            last.std_err,
            last.viol_pos
        );
        if !m.jensen.is_empty() {
            let ok = m.jensen.iter().filter(|j| j.holds()).count();
            let line = format!(
                "average-iterate convexity checks: {ok}/{} replicas hold",
                m.jensen.len()
            );
            println!("{name}: {line}");
            let _ = writeln!(manifest_notes, "# {name}: {line}");
        }
        if cfg.dump_state {
            let traj = replay_trajectory(&cfg, m.method, 0)?;
            let dump = out_dir.join(format!("{name}_state.csv"));
            std::fs::write(&dump, render_state_dump(&traj)).map_err(|source| Error::Io {
                path: dump,
                source,
            })?;
        }
    }

    if !output.benchmark_excess.is_empty() {
        let line = format!(
            "batch benchmark mean excess = {:.16e} over {} replicas",
            mean(&output.benchmark_excess),
            output.benchmark_excess.len()
        );
        println!("{line}");
        let _ = writeln!(manifest_notes, "# {line}");
    }
    if let Some(alt) = &output.alt_benchmark_excess {
        let line = format!(
            "alternative benchmark mean excess = {:.16e} over {} replicas",
            mean(alt),
            alt.len()
        );
        println!("{line}");
        let _ = writeln!(manifest_notes, "# {line}");
    }

    let delta_line = delta_condition_line(&cfg)?;
    println!("{delta_line}");
    let _ = writeln!(manifest_notes, "# {delta_line}");

    let manifest = out_dir.join("manifest.cfg");
    std::fs::write(&manifest, format!("{}{manifest_notes}", render_config(&cfg))).map_err(
        |source| Error::Io {
            path: manifest.clone(),
            source,
        },
    )?;
    println!("wrote {} and per-method CSVs to {}", manifest.display(), out_dir.display());
    Ok(ExitCode::SUCCESS)
}

/// Reports whether the configured dual regularization weight satisfies the
/// sufficient condition for the constant-step guarantee. Informational
/// only: without a configured `lipschitz` bound there is nothing to check.
fn delta_condition_line(cfg: &RunConfig) -> Result<String> {
    let root = cfg.seed.expect("validated before reporting");
    let net = network_from_config(cfg, root)?;
    let status = dual_regularizer_condition(
        net.n_nodes(),
        2 * net.n_edges(),
        cfg.lipschitz,
        cfg.delta,
        cfg.eps,
    );
    Ok(match status {
        RegularizerCondition::Satisfied => format!(
            "delta condition: satisfied ((N+M)L^2 + delta^2 eps^2 <= delta with L = {:.16e})",
            cfg.lipschitz.expect("satisfied implies a bound")
        ),
        RegularizerCondition::Violated => format!(
            "delta condition: violated for L = {:.16e} (informational; the run proceeds)",
            cfg.lipschitz.expect("violated implies a bound")
        ),
        RegularizerCondition::Unverifiable => {
            "delta condition: unverifiable (no lipschitz bound in config)".to_string()
        }
    })
}

/// One row per stored state s_0..s_T: round index, flattened primal
/// components, flattened directed multipliers.
fn render_state_dump(traj: &Trajectory) -> String {
    let (p0, d0) = &traj.states[0];
    let mut out = String::from("t");
    for (i, x) in p0.x.iter().enumerate() {
        for c in 0..x.len() {
            let _ = write!(out, ",x{i}_{c}");
        }
    }
    for k in 0..d0.values().len() {
        let _ = write!(out, ",lam{k}");
    }
    out.push('\n');
    for (t, (p, d)) in traj.states.iter().enumerate() {
        let _ = write!(out, "{t}");
        for x in &p.x {
            for c in 0..x.len() {
                let _ = write!(out, ",{:.16e}", x[c]);
            }
        }
        for v in d.values() {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    configure_jobs(args.jobs)?;
    let suite = Suite::parse(&args.suite)?;
    let report = run_suite(suite, args.seed)?;
    print!("{}", report.render_table());
    Ok(if report.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
