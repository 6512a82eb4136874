use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use btfl_core::bench::format_table;
use btfl_core::config::ExperimentConfig;
use btfl_core::error::{BtflError, Result};
use btfl_core::experiment::{
    format_train_summary, report, run_bench, train, train_summary, write_bench_outputs, ExperimentState, STATE_FILE,
};
use btfl_core::selftest::run_selftest;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "btfl", version, about = "Federated dual-head test-time adaptation: simulate, benchmark, report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the federation and write the experiment state.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; falls back to `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every configured method on the five benchmark streams.
    Bench {
        #[arg(long)]
        state: PathBuf,
        /// Defaults to the config stored in the state file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the summary table from the trace files of a bench run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the numerical property battery.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env_overrides(|k| std::env::var(k).ok())?;
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.out_dir.clone()).ok_or_else(|| BtflError::Config {
        field: "out_dir".into(),
        reason: "pass --out or set out_dir in the config".into(),
    })
}

fn cmd_train(config: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config.as_deref())?;
    let dir = out_dir(out, &cfg)?;
    let start = Instant::now();
    let state = train(&cfg)?;
    fs::create_dir_all(&dir)?;
    let path = dir.join(STATE_FILE);
    state.write(&path)?;
    log::info!("trained {} clients in {:.1?}", state.federation.clients.len(), start.elapsed());
    print!("{}", format_train_summary(&train_summary(&state)?));
    println!("state written to {}", path.display());
    Ok(())
}

fn cmd_bench(state_path: PathBuf, config: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let state = ExperimentState::read(&state_path)?;
    let cfg = match config {
        Some(p) => load_config(Some(&p))?,
        None => {
            let mut c = state.config.clone();
            c.apply_env_overrides(|k| std::env::var(k).ok())?;
            c
        }
    };
    let dir = match out.or_else(|| cfg.out_dir.clone()) {
        Some(d) => d,
        None => state_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let start = Instant::now();
    let outcome = run_bench(&state, &cfg)?;
    write_bench_outputs(&outcome, &dir)?;
    log::info!("benchmark finished in {:.1?}", start.elapsed());
    print!("{}", format_table(&outcome.summary));
    println!("results written to {}", dir.display());
    Ok(())
}

fn cmd_report(dir: PathBuf) -> Result<()> {
    print!("{}", format_table(&report(&dir)?));
    Ok(())
}

fn cmd_selftest(seed: u64) -> ExitCode {
    let start = Instant::now();
    let verdicts = run_selftest(seed);
    for v in &verdicts {
        println!("{:<4} {:<18} {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!("{} of {} properties passed in {:.1?}", verdicts.len() - failed, verdicts.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, out } => cmd_train(config, out),
        Command::Bench { state, config, out } => cmd_bench(state, config, out),
        Command::Report { input } => cmd_report(input),
        Command::Selftest { seed } => return cmd_selftest(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
