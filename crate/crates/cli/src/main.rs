use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use labbridge::bridge::FieldReading;
use labbridge::datamodel::{save_cells, synth_generate, SynthConfig};
use labbridge::phm::PhmTask;
use labbridge::pipeline::{self, PipelineConfig, PipelineError, SplitName, Stage};

#[derive(Parser)]
#[command(name = "labbridge", version, about = "Field-to-lab battery data bridging, diagnosis and prognosis")]
struct Cli {
    /// Worker threads for training and evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config's `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Readings {
    /// Current field reading as `re1,re2,soc,temperature` (mΩ, mΩ, fraction, °C).
    #[arg(long, value_parser = parse_reading)]
    reading: FieldReading,
    /// Field reading of the reference RPT, same format.
    #[arg(long, value_parser = parse_reading)]
    reference: FieldReading,
}

#[derive(Subcommand)]
enum Command {
    /// Choose the two preset frequencies from the training lab spectra.
    SelectFreqs(Common),
    /// Train one stage, or everything with `--stage all`.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "all")]
        stage: Stage,
    },
    /// Score trained models on one split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "test")]
        split: SplitName,
    },
    /// Predict remaining capacity from field readings.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        readings: Readings,
    },
    /// Predict remaining life from field readings.
    Prognose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        readings: Readings,
    },
    /// Write a synthetic dataset in the canonical layout.
    SynthGen {
        /// Dataset directory to create.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Generator config (JSON); the desk-scale default when absent.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_reading(s: &str) -> Result<FieldReading, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [re1, re2, soc, temperature] => Ok(FieldReading { re: [re1, re2], soc, temperature }),
        _ => Err(format!("expected re1,re2,soc,temperature, got {} values", parts.len())),
    }
}

fn load(common: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn synth(out: &PathBuf, seed: u64, config: Option<&PathBuf>) -> Result<(), PipelineError> {
    let cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
            serde_json::from_str::<SynthConfig>(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::desk_default(),
    };
    let cells = synth_generate(&cfg, seed)?;
    save_cells(out, &cells)?;
    println!("wrote {} cells to {}", cells.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::SelectFreqs(common) => {
            let report = pipeline::select_freqs(&load(&common)?)?;
            println!("{}", report.to_json()?);
        }
        Command::Train { common, stage } => {
            let rows = pipeline::train(&load(&common)?, stage)?;
            println!("stage,target_soc,quantity,n_samples,mae,rmse,mape");
            for r in rows {
                let mape = r.mape.map(|m| m.to_string()).unwrap_or_default();
                println!("{},{},{},{},{},{},{}", r.stage, r.target_soc, r.quantity, r.n_samples, r.mae, r.rmse, mape);
            }
        }
        Command::Evaluate { common, split } => {
            let report = pipeline::evaluate(&load(&common)?, split)?;
            println!("step,lab_data,mae,rmse,mape");
            for r in report.rows {
                let mape = r.mape.map(|m| m.to_string()).unwrap_or_default();
                println!("{},{},{},{},{}", r.step, r.lab_data, r.mae, r.rmse, mape);
            }
        }
        Command::Diagnose { common, readings } => {
            let out = pipeline::infer(&load(&common)?, PhmTask::Diagnosis, readings.reading, readings.reference)?;
            println!("{}", out.to_json()?);
        }
        Command::Prognose { common, readings } => {
            let out = pipeline::infer(&load(&common)?, PhmTask::Prognosis, readings.reading, readings.reference)?;
            println!("{}", out.to_json()?);
        }
        Command::SynthGen { out, seed, config } => synth(&out, seed, config.as_ref())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
