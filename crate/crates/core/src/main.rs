//! Command-line front end for the check suites.
//!
//! Exit codes: 0 all graded checks passed, 1 at least one failed, 2 the
//! configuration was unusable (unknown suite or chart, bad parameter).

use std::path::PathBuf;

use clap::Parser;

use torsion_lab::runner::{
    self, parse_manifold_arg, ManifoldRequest, RunConfig, Suite, DEFAULT_POINTS, DEFAULT_SEED,
    DEFAULT_TOL,
};

#[derive(Parser)]
#[command(
    name = "torsion-lab",
    version,
    about = "Numerical checks for compatible connections on almost complex and almost contact charts"
)]
struct Cli {
    /// Suite to run (repeatable); default: all suites
    #[arg(long = "suite", value_name = "NAME")]
    suite: Vec<String>,

    /// Chart family NAME[:key=value,...] (repeatable); default: every
    /// registered family with its default parameters
    #[arg(long = "manifold", value_name = "NAME[:k=v,...]")]
    manifold: Vec<String>,

    /// Sample points per chart
    #[arg(long, value_name = "N", default_value_t = DEFAULT_POINTS)]
    points: usize,

    /// Seed for the point sampler
    #[arg(long, value_name = "S", default_value_t = DEFAULT_SEED)]
    seed: u64,

    /// Pass tolerance for graded residuals
    #[arg(long, value_name = "T", default_value = "1e-8")]
    tol: f64, // display form of DEFAULT_TOL, pinned below

    /// Write a JSONL report to this path
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,

    /// List registered chart families and exit
    #[arg(long)]
    list_manifolds: bool,

    /// List identity names with their statements and exit
    #[arg(long)]
    list_identities: bool,
}

// The clap default above is a string so the help shows "1e-8"; keep it in
// lockstep with the runner's constant.
const _: () = assert!(DEFAULT_TOL == 1e-8);

fn build_config(cli: &Cli) -> torsion_lab::Result<RunConfig> {
    let defaults = RunConfig::default();

    let suites = if cli.suite.is_empty() {
        defaults.suites
    } else {
        let mut suites: Vec<Suite> = Vec::new();
        for s in &cli.suite {
            let suite = Suite::parse(s)?;
            if !suites.contains(&suite) {
                suites.push(suite);
            }
        }
        suites
    };

    let manifolds: Vec<ManifoldRequest> = if cli.manifold.is_empty() {
        defaults.manifolds
    } else {
        cli.manifold
            .iter()
            .map(|s| parse_manifold_arg(s))
            .collect::<torsion_lab::Result<_>>()?
    };

    Ok(RunConfig {
        suites,
        manifolds,
        points: cli.points,
        seed: cli.seed,
        tol: cli.tol,
        report_path: cli.report.clone(),
    })
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();

    if cli.list_manifolds {
        return match runner::list_manifolds(&mut stdout) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        };
    }
    if cli.list_identities {
        return match runner::list_identities(&mut stdout) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                2
            }
        };
    }

    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match runner::run(&config, &mut stdout) {
        Ok(summary) => summary.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn main() {
    std::process::exit(real_main());
}
