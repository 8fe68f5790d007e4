//! `tflab`: batch experiments over time-frequency model sums.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand};
use tflab::grids::{enlarge_to_grids, separate_grid};
use tflab::harness::{self, plot::emit_plot, Baseline, Experiment, ExperimentConfig, Params};
use tflab::intervals::Interval;
use tflab::LabError;

#[derive(Parser, Debug)]
#[command(name = "tflab", version, about = "Numerical experiments on time-frequency model sums")]
#[command(after_help = "Exit status: 0 when every check passes, 1 when a bound or identity check fails, 2 on usage errors.")]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true, env = "TFLAB_SEED", default_value_t = 1)]
    seed: u64,
    /// Output directory for tables, plots and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Baseline constants file; the built-in calibration otherwise.
    #[arg(long, global = true)]
    baseline: Option<PathBuf>,
    /// Run the experiment described by a JSON config instead of a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Model-sum counterexample scan.
    Counterexample {
        #[command(subcommand)]
        action: ScanAction<CounterexampleArgs>,
    },
    /// Bilinear maximal and truncated singular operators.
    Maximal {
        #[command(subcommand)]
        action: ScanAction<MaximalArgs>,
    },
    /// Maximal Fourier restriction to neighbourhoods of L basepoints.
    Bourgain {
        #[command(subcommand)]
        action: ScanAction<BourgainArgs>,
    },
    /// Tree-decomposition pipeline.
    Pipeline {
        #[command(subcommand)]
        action: PipelineAction,
    },
    /// Maximal partial sums of finite function families.
    ///
    /// rm.csv columns: J, family, seed, b_est, lhs, ratio, blocked_rhs, exhaustive.
    RmCheck {
        /// Family sizes.
        #[arg(long = "J", value_delimiter = ',')]
        j: Option<Vec<usize>>,
        /// Random sign trials per family (at least 32).
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Randomised checks of grid enlargement and grid separation.
    ///
    /// enlarge.csv columns: trial, A, intervals, classes, class_bound, containment, nesting.
    /// separate.csv columns: trial, intervals, D, N_inf, N_l1, flat_measure, flat_bound, square_sum, required_c.
    GridLemmaCheck {
        #[arg(long)]
        trials: Option<usize>,
        /// Fixed enlargement factor; cycles through 2, 4, 8 otherwise.
        #[arg(long = "A")]
        a: Option<f64>,
        /// Separation exponent n.
        #[arg(long)]
        mu: Option<u32>,
        /// Fixed D; 2‖N‖∞ otherwise.
        #[arg(long = "D")]
        d: Option<f64>,
    },
    /// Adaptedness of generated wave packets.
    ///
    /// packets.csv columns: system, packets, norm_deviation, leakage, area_ratio,
    /// orthogonality, orthogonal_pairs, C_0 .. C_6.
    PacketsValidate,
    /// Enlarge a JSON list of `[left, length]` intervals into grids.
    Enlarge {
        input: PathBuf,
        #[arg(long = "A", default_value_t = 2.0)]
        a: f64,
    },
    /// Split a JSON list of `[left, length]` grid intervals into sharp and flat parts.
    Separate {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long = "D")]
        d: f64,
        #[arg(long, default_value_t = 1.0)]
        base_threshold: f64,
    },
    /// Refit all baseline constants.
    Calibrate {
        #[arg(long, value_delimiter = ',', default_values_t = harness::CALIBRATION_SEEDS)]
        seeds: Vec<u64>,
        /// Destination; printed to stdout otherwise.
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Draw a column of a CSV table against another as SVG.
    Plot {
        table: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        log: bool,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum ScanAction<A: Args> {
    Scan(A),
}

#[derive(Subcommand, Debug)]
enum PipelineAction {
    /// Run the master split on the synthetic corpus or on `--system`.
    ///
    /// stages.csv columns: system, path, stage, sharp, flat, flat_measure, lhs_norm, rhs_bound, pass.
    /// bounds.csv columns: system, path, name, lhs, form, required, allowed, pass.
    /// identities.csv columns: system, path, name, evaluations, failures.
    Run(PipelineArgs),
}

/// counterexample.csv columns: N, avg_norm, norm_f1_p, norm_f2_q, ratio.
/// test_norms.csv columns: t, N, norm. slopes.csv columns: quantity, slope, expected.
#[derive(Args, Debug)]
struct CounterexampleArgs {
    #[arg(long = "N", value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
}

/// maximal.csv columns: parameter, trial, norm, ratio, fitted_c, violations.
#[derive(Args, Debug)]
struct MaximalArgs {
    #[arg(long)]
    trials: Option<usize>,
    /// reciprocal, zero, inverse-square, or a `y,k` CSV file.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

/// bourgain.csv columns: parameter, norm, ratio.
#[derive(Args, Debug)]
struct BourgainArgs {
    /// Basepoint counts.
    #[arg(long = "L", value_delimiter = ',')]
    l: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Tile system JSON; the synthetic corpus otherwise.
    #[arg(long)]
    system: Option<PathBuf>,
    #[arg(long = "A")]
    a: Option<f64>,
    #[arg(long)]
    mu: Option<u32>,
    #[arg(long = "D")]
    d: Option<f64>,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Samples per unit length.
    #[arg(long)]
    resolution: Option<usize>,
    /// Spatial window as `a,b`.
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<(f64, f64)>,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected a,b")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let baseline = match &cli.baseline {
        Some(p) => Baseline::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => Baseline::builtin(),
    };
    let cfg = match (cli.config, cli.command) {
        (Some(_), Some(_)) => anyhow::bail!("--config cannot be combined with a subcommand"),
        (Some(path), None) => {
            let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?;
            if std::env::var_os("TFLAB_SEED").is_some() {
                cfg.seed = cli.seed;
            }
            if let Some(out) = cli.out {
                cfg.output = out;
            }
            cfg
        }
        (None, Some(cmd)) => match experiment_config(cmd, cli.seed, cli.out.clone())? {
            Some(cfg) => cfg,
            None => return Ok(Outcome::Pass),
        },
        (None, None) => anyhow::bail!("no subcommand or --config given; see --help"),
    };
    let art = harness::run_experiment(&cfg, &baseline)?;
    let files = harness::write_artifacts(&cfg, &baseline, &art, &cfg.output)?;
    for line in &art.log {
        eprintln!("{line}");
    }
    for v in &art.verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    println!("wrote {} files to {}", files.len(), cfg.output.display());
    Ok(if art.pass() { Outcome::Pass } else { Outcome::Fail })
}

/// Builds the config for an experiment subcommand; runs the utility
/// subcommands directly and returns `None` for them.
fn experiment_config(cmd: Command, seed: u64, out: Option<PathBuf>) -> anyhow::Result<Option<ExperimentConfig>> {
    let (experiment, params) = match cmd {
        Command::Counterexample { action: ScanAction::Scan(a) } => (
            Experiment::CounterexampleScan,
            Params { n_list: a.n, r: a.r, p: a.p, q: a.q, trials: a.trials, resolution: a.grid.resolution, window: a.grid.window, ..Params::default() },
        ),
        Command::Maximal { action: ScanAction::Scan(a) } => (
            Experiment::MaximalScan,
            Params { trials: a.trials, kernel: a.kernel, r: a.r, p: a.p, q: a.q, resolution: a.grid.resolution, window: a.grid.window, ..Params::default() },
        ),
        Command::Bourgain { action: ScanAction::Scan(a) } => (
            Experiment::BourgainScan,
            Params { l: a.l, trials: a.trials, resolution: a.grid.resolution, window: a.grid.window, ..Params::default() },
        ),
        Command::Pipeline { action: PipelineAction::Run(a) } => {
            (Experiment::PipelineRun, Params { system: a.system, a: a.a, mu: a.mu, d: a.d, ..Params::default() })
        }
        Command::RmCheck { j, trials } => (Experiment::RmCheck, Params { j, trials, ..Params::default() }),
        Command::GridLemmaCheck { trials, a, mu, d } => (Experiment::GridLemmaCheck, Params { trials, a, mu, d, ..Params::default() }),
        Command::PacketsValidate => (Experiment::PacketsValidate, Params::default()),
        Command::Enlarge { input, a } => {
            let res = enlarge_to_grids(&read_intervals(&input)?, a)?;
            println!("{}", serde_json::to_string_pretty(&res)?);
            return Ok(None);
        }
        Command::Separate { input, n, d, base_threshold } => {
            let res = separate_grid(&read_intervals(&input)?, n, d, base_threshold)?;
            println!("{}", serde_json::to_string_pretty(&res)?);
            return Ok(None);
        }
        Command::Calibrate { seeds, write } => {
            let b = harness::calibrate(&seeds)?;
            match write {
                Some(p) => std::fs::write(&p, b.to_json()).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", b.to_json()),
            }
            return Ok(None);
        }
        Command::Plot { table, x, y, log, output } => {
            let plot = emit_plot(&table, &x, &y, log, &output)?;
            if let Some(s) = plot.slope {
                println!("fitted slope {s:.4}");
            }
            return Ok(None);
        }
    };
    let mut cfg = ExperimentConfig::new(experiment, seed);
    cfg.params = params;
    cfg.output = out.unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
    Ok(Some(cfg))
}

fn read_intervals(path: &Path) -> anyhow::Result<Vec<Interval>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(LabError::from)?)
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
