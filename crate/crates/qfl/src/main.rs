use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qfl::{run, Overrides};

/// Run one quasifree scenario and write its report, tables and summary.
#[derive(Parser, Debug)]
#[command(name = "qfl", version, about)]
struct Args {
    /// Scenario file (JSON)
    #[arg(long, env = "QFL_SCENARIO")]
    scenario: PathBuf,
    /// Output directory
    #[arg(long, env = "QFL_OUT", default_value = ".")]
    out: PathBuf,
    #[arg(long, env = "QFL_SEED")]
    seed: Option<u64>,
    /// Fock cutoff per mode
    #[arg(long, env = "QFL_CUTOFF")]
    cutoff: Option<usize>,
    /// Replaces the command's primary tolerance
    #[arg(long, env = "QFL_TOL")]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let overrides = Overrides { seed: args.seed, cutoff: args.cutoff, tol: args.tol };
    match run(&args.scenario, &args.out, &overrides) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qfl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
