use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use score_forge::config::{ExperimentConfig, ExperimentKind};
use score_forge::experiment::run_experiment;
use score_forge::{output_dir, parallel, run_to_dir, HarnessError};

#[derive(Parser)]
#[command(name = "score-forge", about = "Kernel score estimation and diffusion sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to $SCORE_FORGE_THREADS, then all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check the moment conditions of every kernel order up to L.
    CertifyKernel {
        #[arg(long, value_name = "L")]
        max_order: usize,
    },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Version => {
            println!("score-forge {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
        Command::CertifyKernel { max_order } => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::KernelCertify);
            cfg.max_order = max_order;
            let result = run_experiment(&cfg, &score_forge_core::Sequential)?;
            for c in &result.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            finish(&result)
        }
        Command::Run { config, out, threads } => {
            let cfg = ExperimentConfig::load(&config)?;
            let threads = parallel::resolve_threads(threads)?;
            let dir = output_dir(&cfg, out.as_deref());
            log::info!("running {} with {threads} threads into {}", cfg.experiment.name(), dir.display());
            let result = run_to_dir(&cfg, &dir, threads)?;
            for f in &result.fits {
                println!("{}: slope {:.3}, r2 {:.3} over {} points", f.series, f.fit.slope, f.fit.r2, f.points);
            }
            for c in &result.checks {
                println!("{} {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.series, c.name, c.detail);
            }
            finish(&result)
        }
    }
}

fn finish(result: &score_forge::ExperimentResult) -> Result<(), HarnessError> {
    if result.passed() {
        Ok(())
    } else {
        Err(HarnessError::Acceptance(result.failures()))
    }
}
