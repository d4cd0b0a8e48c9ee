use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use smtlab_cli::{load_config, run, Experiment, Overrides};

/// Runs one laboratory experiment and writes its manifest and data files.
#[derive(Parser, Debug)]
#[command(name = "smtlab", version)]
struct Cli {
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refinement level, overriding `domain.level`.
    #[arg(long)]
    level: Option<u32>,
    /// Single β, overriding `beta`.
    #[arg(long)]
    beta: Option<f64>,
    /// Comma-separated ε values for the sweep or the test family.
    #[arg(long, value_delimiter = ',')]
    eps_list: Option<Vec<f64>>,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUN_ERROR: u8 = 3;

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SMTLAB_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("SMTLAB_THREADS: `{v}` is not a thread count"))?;
    if n == 0 {
        return Err("SMTLAB_THREADS: must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let overrides = Overrides { output_dir: cli.out, level: cli.level, beta: cli.beta, eps_list: cli.eps_list };
    let cfg = match load_config(&cli.config, cli.experiment, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let manifest = match run(&cfg) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUN_ERROR);
        }
    };
    for c in &manifest.checks {
        println!("{} {} = {:.6e} (target {})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.target);
    }
    println!("manifest: {}", cfg.output_dir.join("manifest.json").display());
    if manifest.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
