mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use isoperi::harness::RunOptions;

use commands::Status;
use config::{ensure_writable, RunConfig};

/// Concentration residuals for linear classifiers with Gaussian inputs, and
/// Monte-Carlo checks of them.
#[derive(Parser)]
#[command(name = "isoperi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration; missing fields take default values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if needed.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial batches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Zero timestamps and runtimes so that reruns are byte-identical.
    #[arg(long, global = true)]
    reproducible: bool,
    /// Override a configuration field, e.g. `--set model.theta0=0.5`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every residual at each configured δ.
    Bounds,
    /// Run trials and check the tail of the supremum against the residuals.
    Verify {
        /// Add a deliberately too small residual that should be rejected.
        #[arg(long)]
        negative_control: bool,
    },
    /// Monte-Carlo check of the Poincaré and log-Sobolev inequalities.
    FiCheck,
    /// Asymptotic-regime sweeps.
    Sweep {
        #[arg(value_enum)]
        which: SweepKind,
    },
    /// Compare the optimizer against an exhaustive grid (dimension ≤ 3).
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    EffectiveRank,
    Proportional,
}

fn run(cli: Cli) -> Result<Status, anyhow::Error> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), &cli.sets)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global()?;
    }
    ensure_writable(&cfg.out_dir)?;
    let opts = RunOptions { reproducible: cli.reproducible };
    let out = cfg.out_dir.clone();
    match cli.command {
        Command::Bounds => commands::bounds(&cfg, &out),
        Command::Verify { negative_control } => commands::verify(&cfg, &out, negative_control, opts),
        Command::FiCheck => commands::fi(&cfg, &out),
        Command::Sweep { which: SweepKind::EffectiveRank } => commands::sweep_effective_rank(&cfg, &out, opts),
        Command::Sweep { which: SweepKind::Proportional } => commands::sweep_proportional(&cfg, &out, opts),
        Command::Oracle => commands::oracle(&cfg, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ISOPERI_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = run(cli);
    match &result {
        Ok(Status::CheckFailed) => eprintln!("check failed"),
        Err(e) => eprintln!("error: {e:#}"),
        Ok(Status::Ok) => {}
    }
    ExitCode::from(exit_code(&result))
}

fn exit_code(result: &Result<Status, anyhow::Error>) -> u8 {
    match result {
        Ok(Status::Ok) => 0,
        Ok(Status::CheckFailed) => 1,
        Err(_) => 2,
    }
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;

    fn invoke(args: &[&str], out: &Path) -> u8 {
        let mut argv = vec!["isoperi", "--out", out.to_str().unwrap()];
        argv.extend(args);
        exit_code(&run(Cli::try_parse_from(argv).unwrap()))
    }

    const SMALL: [&str; 6] = ["--set", "trials=100", "--set", "n=40", "--set", "optimizer.restarts=4"];

    #[test]
    fn bounds_writes_report() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(invoke(&["bounds"], dir.path()), 0);
        let text = std::fs::read_to_string(dir.path().join("bounds.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.as_array().is_some_and(|a| !a.is_empty()));
    }

    #[test]
    fn verify_writes_artifacts_and_control_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut args = vec!["verify", "--negative-control", "--reproducible"];
        args.extend(SMALL);
        assert!(invoke(&args, dir.path()) <= 1);
        for f in ["batch.jsonl", "tail.csv", "tail.svg"] {
            assert!(dir.path().join(f).exists(), "{f} missing");
        }
        let csv = std::fs::read_to_string(dir.path().join("tail.csv")).unwrap();
        assert!(csv.contains("negative_control"));
    }

    #[test]
    fn oracle_rejects_high_dimension() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(invoke(&["oracle"], dir.path()), 2);
    }

    #[test]
    fn invalid_config_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(invoke(&["bounds", "--set", "n=0"], dir.path()), 2);
        assert_eq!(invoke(&["bounds", "--set", "deltas=[1.5]"], dir.path()), 2);
    }

    #[test]
    fn unwritable_output_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain-file");
        std::fs::write(&file, "x").unwrap();
        assert_eq!(invoke(&["bounds"], &file.join("sub")), 2);
    }
}
