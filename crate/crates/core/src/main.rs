use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pqf_credit::cli::config::SyntheticSpec;
use pqf_credit::cli::report::{write_pqf_csv, REPORT_TXT};
use pqf_credit::cli::{emit_report, generate_synthetic, load_report, project_only, render_text, run_experiment, save_csv, ExperimentConfig};
use pqf_credit::{Error, Result};

/// Worker-pool size override.
const THREADS_ENV: &str = "PQF_CREDIT_THREADS";

#[derive(Parser)]
#[command(name = "pqf-credit", version, about = "Projected quantum features for credit-default scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write report.json / report.txt.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset from a TOML parameter file.
    Synth {
        params: PathBuf,
        #[arg(short, long, default_value = "synthetic.csv")]
        out: PathBuf,
        #[arg(long, default_value = "target")]
        label_column: String,
    },
    /// Write projected-feature CSVs for the train and test split only.
    Project {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Re-render the text tables of a finished run.
    Report { run_dir: PathBuf },
}

fn out_dir(cfg: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
}

fn synth(params: &Path, out: &Path, label: &str) -> Result<()> {
    let spec: SyntheticSpec =
        toml::from_str(&std::fs::read_to_string(params)?).map_err(|e| Error::Config(e.to_string()))?;
    let ds = generate_synthetic(&spec)?;
    save_csv(&ds, label, out)?;
    println!("wrote {} rows ({} positives) to {}", ds.len(), ds.positives(), out.display());
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out_dir(&cfg, out);
            let (report, exports) = run_experiment(&cfg)?;
            for p in emit_report(&report, &exports, &dir)? {
                log::info!("wrote {}", p.display());
            }
            print!("{}", render_text(&report));
        }
        Command::Synth {
            params,
            out,
            label_column,
        } => synth(&params, &out, &label_column)?,
        Command::Project { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out_dir(&cfg, out);
            std::fs::create_dir_all(&dir)?;
            for e in project_only(&cfg)? {
                let p = dir.join(format!("pqf_{}.csv", e.name));
                write_pqf_csv(&e.data, &p)?;
                println!("wrote {} rows to {}", e.data.len(), p.display());
            }
        }
        Command::Report { run_dir } => {
            let report = load_report(&run_dir)?;
            let text = render_text(&report);
            std::fs::write(run_dir.join(REPORT_TXT), &text)?;
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not size worker pool: {e}");
                }
            }
            _ => log::warn!("ignoring {THREADS_ENV}={v}: expected a positive integer"),
        }
    }
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
