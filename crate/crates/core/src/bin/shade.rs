//! `shade`: train, sweep, diagnose, verify, binarize and evaluate.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 verification failure,
//! 3 numeric failure during training.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use shade_core::experiment::verify::{run_scope, Scope};
use shade_core::experiment::{
    binarize, diagnose, diagnose_csv, eval_csv, eval_splits, run, sweep, Checkpoint, ExperimentConfig, Splits,
    CHECKPOINT_FILE, DEFAULT_BETA_GRID,
};
use shade_core::Error;

#[derive(Parser)]
#[command(name = "shade", version, about = "Conditional-entropy regularization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes metrics.csv, timing.csv, moving_averages.csv and checkpoint.json.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per regularization weight and keep the best on validation.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated weights; defaults to {1, 5} x 10^-i for i = 1..7.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Per-unit H(Y|C) and H(Y|Z) estimates for every observed layer.
    Diagnose {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset to use instead of the one recorded in the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-contained verification suites.
    Verify {
        /// bounds, gradients, dpi, reconstruction, algorithm1 or all.
        #[arg(long, default_value = "all")]
        scope: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Swap one hidden layer's ReLU for a binary activation and fine-tune the layers above.
    Binarize {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Observed-layer index; defaults to the last hidden layer.
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Loss and accuracy of a checkpoint on every split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Verification,
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Numeric(msg) => Failure::Numeric(msg),
            Error::Verification(msg) => Failure::Usage(format!("verification error: {msg}")),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load_config(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if out.is_some() {
        config.output_dir = out;
    }
    Ok(config)
}

fn write_file(dir: Option<&Path>, name: &str, text: &str) -> Result<(), Error> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}

fn splits_for(checkpoint: &Checkpoint, config: Option<&Path>) -> Result<Splits, Error> {
    match config {
        Some(p) => Splits::load(&ExperimentConfig::load(p)?),
        None => Splits::load(&checkpoint.config),
    }
}

fn cmd_train(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> CmdResult {
    let config = load_config(&config, seed, out)?;
    if config.output_dir.is_none() {
        return Err(Failure::Usage("no output directory: set output_dir or pass --out".into()));
    }
    let splits = Splits::load(&config)?;
    let result = run(&config, &splits)?;
    let last = result.last();
    println!(
        "epoch {}: train accuracy {:.4}, val accuracy {:.4}, test accuracy {:.4}",
        last.epoch, last.train_accuracy, last.val_accuracy, last.test_accuracy
    );
    Ok(())
}

fn cmd_sweep(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>, grid: Option<Vec<f64>>) -> CmdResult {
    let config = load_config(&config, seed, out)?;
    let grid = grid.unwrap_or_else(|| DEFAULT_BETA_GRID.to_vec());
    let splits = Splits::load(&config)?;
    let result = sweep(&config, &splits, &grid)?;
    let summary = result.summary_csv();
    write_file(config.output_dir.as_deref(), "sweep.csv", &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_diagnose(checkpoint: PathBuf, config: Option<PathBuf>, out: Option<PathBuf>) -> CmdResult {
    let ck = Checkpoint::load(&checkpoint)?;
    let splits = splits_for(&ck, config.as_deref())?;
    let reports = diagnose(&ck.network, &splits.test)?;
    for r in &reports {
        if !r.excluded_classes.is_empty() {
            log::warn!("layer {}: classes {:?} have too few samples and were excluded", r.layer, r.excluded_classes);
        }
        println!(
            "layer {}: mean H(Y|C) {:.4}, mean H(Y|Z) {:.4} over {} units",
            r.layer,
            r.mean_given_class(),
            r.mean_given_latent(),
            r.units.len()
        );
    }
    write_file(out.as_deref(), "entropy.csv", &diagnose_csv(&reports)?)?;
    Ok(())
}

fn cmd_verify(scope: String, out: Option<PathBuf>) -> CmdResult {
    let scopes = if scope == "all" {
        Scope::ALL.to_vec()
    } else {
        vec![Scope::parse(&scope).ok_or_else(|| {
            Failure::Usage(format!(
                "unknown scope '{scope}' (expected bounds, gradients, dpi, reconstruction, algorithm1 or all)"
            ))
        })?]
    };
    let mut csv = String::from("scope,check,result,detail\n");
    let mut ok = true;
    for s in scopes {
        let report = run_scope(s)?;
        print!("{report}");
        csv.push_str(&report.csv());
        ok &= report.passed();
    }
    write_file(out.as_deref(), "verify.csv", &csv)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn cmd_binarize(checkpoint: PathBuf, layer: Option<usize>, epochs: usize, out: Option<PathBuf>) -> CmdResult {
    let ck = Checkpoint::load(&checkpoint)?;
    let splits = Splits::load(&ck.config)?;
    let observed = ck.network.observed_layers().len();
    let layer = match layer {
        Some(l) => l,
        None => observed
            .checked_sub(1)
            .ok_or_else(|| Failure::Usage("network has no hidden layer to binarize".into()))?,
    };
    let outcome = binarize(&ck, &splits, layer, epochs)?;
    print!("{}", outcome.csv());
    if let Some(dir) = out.as_deref() {
        write_file(Some(dir), "binarize.csv", &outcome.csv())?;
        Checkpoint {
            epoch: ck.epoch + epochs,
            config: ck.config.clone(),
            network: outcome.network,
            shade: outcome.shade,
        }
        .save(&dir.join(CHECKPOINT_FILE))?;
    }
    Ok(())
}

fn cmd_eval(checkpoint: PathBuf, config: Option<PathBuf>, out: Option<PathBuf>) -> CmdResult {
    let ck = Checkpoint::load(&checkpoint)?;
    let splits = splits_for(&ck, config.as_deref())?;
    let text = eval_csv(&eval_splits(&ck.network, &splits)?);
    print!("{text}");
    write_file(out.as_deref(), "eval.csv", &text)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train { config, seed, out } => cmd_train(config, seed, out),
        Command::Sweep { config, seed, out, grid } => cmd_sweep(config, seed, out, grid),
        Command::Diagnose { checkpoint, config, out } => cmd_diagnose(checkpoint, config, out),
        Command::Verify { scope, out } => cmd_verify(scope, out),
        Command::Binarize {
            checkpoint,
            layer,
            epochs,
            out,
        } => cmd_binarize(checkpoint, layer, epochs, out),
        Command::Eval { checkpoint, config, out } => cmd_eval(checkpoint, config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numeric failure: {msg}; the last good checkpoint is kept");
            ExitCode::from(3)
        }
    }
}
