use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hsd::pipeline::{self, ModelKind, PipelineConfig};
use hsd::train_eval::RankBy;
use hsd::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "hsd",
    version,
    about = "Three-class abusive-language classification toolkit"
)]
struct Cli {
    /// Pipeline config (TOML). `compare` accepts it more than once.
    #[arg(long, global = true)]
    config: Vec<PathBuf>,

    /// Overrides train.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory, overrides paths.out.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Floating-point precision of the recurrent models.
    #[arg(long, global = true)]
    precision: Option<PrecisionArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Double,
    Single,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RankArg {
    Macro,
    Weighted,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the class distribution of a labeled csv.
    Stats {
        /// Defaults to paths.train of the config.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train the configured model and print its held-out report.
    Train,
    /// Label a csv with a trained model directory.
    Predict {
        #[arg(long)]
        model_dir: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Defaults to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a predictions csv against a labeled csv.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Train several models on one shared split and rank them.
    Compare {
        /// Model kinds to run with the first config, e.g. `lr,svm_cascade,gru,bilstm`.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long, value_enum, default_value = "macro")]
        rank_by: RankArg,
    },
}

fn load_config(cli: &Cli, path: &Path) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path, true)?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    if let Some(p) = cli.precision {
        cfg.train.precision = match p {
            PrecisionArg::Double => "double",
            PrecisionArg::Single => "single",
        }
        .into();
    }
    if let Some(out) = &cli.out {
        cfg.paths.out = Some(out.clone());
    }
    Ok(cfg)
}

fn single_config(cli: &Cli) -> Result<PipelineConfig> {
    match cli.config.as_slice() {
        [one] => load_config(cli, one),
        [] => Err(Error::Config("--config is required".into())),
        _ => Err(Error::Config("this command takes a single --config".into())),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Stats { input } => {
            let path = match input {
                Some(p) => p.clone(),
                None => single_config(cli)?
                    .paths
                    .train
                    .ok_or_else(|| Error::Config("paths.train is not set".into()))?,
            };
            let (_, table) = pipeline::cmd_stats(&path)?;
            emit(&table.to_string());
        }
        Command::Train => {
            let cfg = single_config(cli)?;
            let outcome = pipeline::cmd_train(&cfg, cfg.paths.out.as_deref())?;
            let r = &outcome.record;
            emit(&format!("model: {}\n", r.model));
            if let Some(last) = r.epoch_losses.last() {
                emit(&format!("epochs: {}  final loss: {}\n", r.epoch_losses.len(), last));
            }
            match &r.heldout_metrics {
                Some(m) => emit(&format!("held-out report\n{}", m)),
                None => emit(&format!("training report\n{}", r.train_metrics)),
            }
            if let Some(dir) = &cfg.paths.out {
                emit(&format!("artifacts written to {}\n", dir.display()));
            }
        }
        Command::Predict {
            model_dir,
            input,
            output,
        } => {
            let rows = pipeline::cmd_predict(model_dir, input)?;
            match output {
                Some(path) => {
                    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
                    pipeline::write_predictions(std::io::BufWriter::new(file), &rows)?;
                }
                None => pipeline::write_predictions(std::io::stdout().lock(), &rows)?,
            }
        }
        Command::Eval { gold, predictions } => {
            let report = pipeline::cmd_eval(gold, predictions)?;
            emit(&report.to_string());
        }
        Command::Compare { models, rank_by } => {
            let mut configs = cli
                .config
                .iter()
                .map(|p| load_config(cli, p))
                .collect::<Result<Vec<_>>>()?;
            if !models.is_empty() {
                let base = configs
                    .first()
                    .cloned()
                    .ok_or_else(|| Error::Config("--models needs a base --config".into()))?;
                configs = models
                    .iter()
                    .map(|m| {
                        let kind = ModelKind::parse(m)
                            .ok_or_else(|| Error::Config(format!("unknown model kind {:?}", m)))?;
                        let mut c = base.clone();
                        c.model.kind = kind;
                        c.model.name = None;
                        Ok(c)
                    })
                    .collect::<Result<_>>()?;
            }
            if configs.is_empty() {
                return Err(Error::Config("compare needs at least one --config".into()));
            }
            let by = match rank_by {
                RankArg::Macro => RankBy::MacroF1,
                RankArg::Weighted => RankBy::WeightedF1,
            };
            let outcome = pipeline::cmd_compare(&configs, by, cli.out.as_deref())?;
            emit(&outcome.table.to_string());
            if outcome.all_failed() {
                eprintln!("error: every model failed");
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

// a closed pipe (e.g. `| head`) is not an error worth a panic
fn emit(s: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(s.as_bytes());
}
