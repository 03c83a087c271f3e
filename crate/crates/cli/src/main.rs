use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use magstark_cli::convergence::convergence;
use magstark_cli::envelope::{write_report, Timings};
use magstark_cli::{exit_code, CliError, CliResult, Experiment, ExperimentConfig};

/// Numerical experiments for the magnetic Stark Hamiltonian.
///
/// `magstark <experiment> --config run.toml --out results/` runs one experiment;
/// `magstark convergence <experiment> --config run.toml --levels 21,31,41` refines it.
#[derive(Debug, Parser)]
#[command(name = "magstark", version)]
struct Cli {
    /// Experiment name, or `convergence` followed by an experiment name.
    #[arg(required = true, num_args = 1..=2, value_name = "EXPERIMENT")]
    names: Vec<String>,

    #[arg(long)]
    config: PathBuf,

    /// Override a config entry, e.g. `--set grid.nx=41`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,

    /// Output directory; falls back to `experiment.out`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Grid sizes for `convergence`; falls back to `experiment.levels`.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

fn parse_experiment(name: &str) -> CliResult<Experiment> {
    Experiment::from_str(name, false).map_err(|_| {
        let known: Vec<&str> = Experiment::value_variants().iter().map(|e| e.name()).collect();
        CliError::Usage(format!(
            "unknown experiment `{name}`; expected one of {}",
            known.join(", ")
        ))
    })
}

fn main_inner(cli: Cli) -> CliResult<i32> {
    let cfg = ExperimentConfig::load(&cli.config, &cli.set)?;
    let start = Instant::now();
    let (label, outcome) = match cli.names.as_slice() {
        [name] if name != "convergence" => {
            let exp = parse_experiment(name)?;
            (exp.name().to_string(), magstark_cli::execute(exp, &cfg)?)
        }
        [conv, name] if conv == "convergence" => {
            let exp = parse_experiment(name)?;
            cfg.validate()?;
            let levels = cli.levels.clone().unwrap_or_else(|| cfg.experiment.levels.clone());
            faer::set_global_parallelism(faer::Par::Seq);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.experiment.threads)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            let o = pool.install(|| convergence(exp, &cfg, &levels))?;
            (format!("convergence-{}", exp.name()), o)
        }
        _ => {
            return Err(CliError::Usage(
                "expected `<experiment>` or `convergence <experiment>`".into(),
            ))
        }
    };
    let timings = Timings {
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.experiment.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let path = write_report(&dir, &label, &cfg, &outcome, timings)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    for g in &outcome.gates {
        let verdict = if g.pass { "PASS" } else { "FAIL" };
        eprintln!("{verdict} {}: {:?} {}", g.name, g.value, g.condition);
    }
    eprintln!("report: {}", path.display());
    Ok(exit_code(&outcome))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match main_inner(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
