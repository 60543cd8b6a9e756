use std::path::PathBuf;
use std::process::ExitCode;

use attoscope::{run, CliError, ConfigIssue, RunConfig, RunOptions, Stage};
use clap::Parser;

/// Strong-field ionization of hydrogen by a few-cycle pulse.
#[derive(Debug, Parser)]
#[command(name = "attoscope", version)]
struct Args {
    /// ground, propagate, phase-space, spectral1d, trajectories, pmpe, reconstruct or all
    stage: String,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Instants with stored states and Wigner maps, e.g. `155,160,165`.
    #[arg(long, value_delimiter = ',')]
    t_snapshots: Option<Vec<f64>>,
    /// Trajectory starting times.
    #[arg(long, value_delimiter = ',')]
    ts_list: Option<Vec<f64>>,
    /// External detection file (CSV with a `p_d` column) for `reconstruct`.
    #[arg(long)]
    pd_file: Option<PathBuf>,
}

fn config_error(message: String) -> CliError {
    CliError::Config(vec![ConfigIssue { line: None, message }])
}

fn threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ATTOSCOPE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| config_error(format!("ATTOSCOPE_THREADS must be a positive integer (got `{v}`)")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| config_error(format!("cannot set thread count: {e}")))
}

fn main_inner(args: Args) -> Result<(), CliError> {
    threads()?;
    let stage = Stage::parse(&args.stage).ok_or_else(|| config_error(format!("unknown stage `{}`", args.stage)))?;
    let cfg = RunConfig::load(&args.config).map_err(CliError::Config)?;
    let opts = RunOptions { out_dir: args.out, t_snapshots: args.t_snapshots, ts_list: args.ts_list, pd_file: args.pd_file };
    for r in run(stage, cfg, &opts)? {
        println!("[{}]", r.stage);
        for l in &r.lines {
            println!("  {l}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
