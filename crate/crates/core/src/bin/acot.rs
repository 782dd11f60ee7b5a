use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use acot::experiment::{self, Settings};
use acot::Error;

#[derive(Parser)]
#[command(name = "acot", version, about = "Contrastive subspace representations of feature sequences")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory receiving all artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Flat key=value file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted synthetic dataset split into train/ and test/.
    GenData(GenDataArgs),
    /// Train the frame classifier and the adversarial generator.
    TrainGan(TrainGanArgs),
    /// Learn one subspace per sequence.
    LearnRepr(LearnReprArgs),
    /// Classify sequences from pooled or subspace representations.
    Classify(ClassifyArgs),
    /// Check the transport sandwich bound on random instances.
    VerifyBounds(VerifyBoundsArgs),
    /// Run the ablation table and optional sweeps.
    Ablate(AblateArgs),
}

#[derive(Args, Serialize)]
struct SyntheticArgs {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    signal_dim: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    sequences_per_class: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long, value_parser = finite)]
    snr: Option<f64>,
    #[arg(long, value_parser = finite)]
    noise_scale: Option<f64>,
    #[arg(long)]
    distractors: Option<usize>,
    #[arg(long, value_parser = finite)]
    distractor_scale: Option<f64>,
    #[arg(long, value_parser = finite)]
    jitter: Option<f64>,
    #[arg(long)]
    frame_noise_support: Option<usize>,
    #[arg(long, value_parser = finite)]
    frame_noise_spread: Option<f64>,
    #[arg(long, value_parser = finite)]
    test_fraction: Option<f64>,
}

#[derive(Args, Serialize)]
struct GenDataArgs {
    #[command(flatten)]
    #[serde(flatten)]
    synthetic: SyntheticArgs,
}

#[derive(Args, Serialize)]
struct GanArgs {
    #[arg(long, value_parser = finite)]
    sigma: Option<f64>,
    #[arg(long, value_parser = finite)]
    lambda1: Option<f64>,
    #[arg(long, value_parser = finite)]
    lambda2: Option<f64>,
    #[arg(long, value_parser = finite)]
    lr: Option<f64>,
    #[arg(long)]
    critic_steps: Option<usize>,
    #[arg(long, value_parser = finite)]
    clip: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    classifier_iters: Option<usize>,
    #[arg(long, value_parser = finite)]
    classifier_lr: Option<f64>,
}

#[derive(Args, Serialize)]
struct TrainGanArgs {
    /// Dataset directory (manifest.json plus CSVs).
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    gan: GanArgs,
}

#[derive(Args, Serialize)]
struct AcotArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_parser = finite)]
    beta1: Option<f64>,
    #[arg(long, value_parser = finite)]
    beta2: Option<f64>,
    #[arg(long, value_parser = finite)]
    eta: Option<f64>,
    /// squared_euclidean or euclidean
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    outer_rounds: Option<usize>,
    #[arg(long)]
    rcg_iters: Option<usize>,
    #[arg(long)]
    ipot_iters: Option<usize>,
    #[arg(long)]
    negatives_per_positive: Option<usize>,
    /// Use the exact transport gradient in the subspace step.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    exact_ot_grad: Option<bool>,
}

#[derive(Args, Serialize)]
struct LearnReprArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// Trained generator JSON; implies adversarial negatives.
    #[arg(long)]
    generator: Option<PathBuf>,
    /// adversarial or random
    #[arg(long)]
    negatives: Option<String>,
    #[arg(long, value_parser = finite)]
    sigma: Option<f64>,
    #[arg(long, value_parser = finite)]
    ot_weight: Option<f64>,
    /// Also write each final coupling as CSV.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    dump_coupling: Option<bool>,
    #[command(flatten)]
    #[serde(flatten)]
    acot: AcotArgs,
}

#[derive(Args, Serialize)]
struct ClassifierArgs {
    /// avgpool_raw, acot_subspace_knn or acot_avgpool_linear
    #[arg(long)]
    pipeline: Option<String>,
    #[arg(long, value_parser = finite)]
    gamma: Option<f64>,
    #[arg(long)]
    knn: Option<usize>,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// learn-repr output directory for the training sequences.
    #[arg(long)]
    train_repr: Option<PathBuf>,
    #[arg(long)]
    test_repr: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    classifier: ClassifierArgs,
}

#[derive(Args, Serialize)]
struct VerifyBoundsArgs {
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Draw instances with k = d.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    full_rank: Option<bool>,
}

#[derive(Args, Serialize)]
struct AblateArgs {
    /// gen-data output directory; synthesized in memory when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    random_trials: Option<usize>,
    /// Comma-separated sweep values.
    #[arg(long)]
    k_sweep: Option<String>,
    #[arg(long)]
    beta1_sweep: Option<String>,
    #[arg(long)]
    beta2_sweep: Option<String>,
    #[arg(long)]
    negatives_sweep: Option<String>,
    #[arg(long)]
    sigma_sweep: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    #[serde(flatten)]
    gan: GanArgs,
    #[command(flatten)]
    #[serde(flatten)]
    acot: AcotArgs,
    #[command(flatten)]
    #[serde(flatten)]
    classifier: ClassifierArgs,
}

fn finite(text: &str) -> Result<f64, String> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err("value must be finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Flag values given on the command line, as settings.
fn flags_to_settings<T: Serialize>(args: &T) -> Settings {
    let mut s = Settings::new();
    if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(args) {
        for (k, v) in map {
            match v {
                serde_json::Value::Null => {}
                serde_json::Value::String(text) => s.set(&k, text),
                other => s.set(&k, other.to_string()),
            }
        }
    }
    s
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let text = serde_json::to_string(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{text}").map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::new(),
    };
    let flags = match &cli.command {
        Command::GenData(a) => flags_to_settings(a),
        Command::TrainGan(a) => flags_to_settings(a),
        Command::LearnRepr(a) => flags_to_settings(a),
        Command::Classify(a) => flags_to_settings(a),
        Command::VerifyBounds(a) => flags_to_settings(a),
        Command::Ablate(a) => flags_to_settings(a),
    };
    settings.overlay(&flags);
    if let Some(seed) = cli.seed {
        settings.set("seed", seed.to_string());
    }
    let out = &cli.out_dir;
    match cli.command {
        Command::GenData(_) => print_json(&experiment::gen_data(&settings, out)?),
        Command::TrainGan(_) => print_json(&experiment::train_gan(&settings, out)?),
        Command::LearnRepr(_) => {
            let r = experiment::learn_repr(&settings, out)?;
            print_json(&serde_json::json!({
                "sequences": r.sequences.len(),
                "mean_ordering_satisfied": r.mean_ordering_satisfied,
                "negatives": r.negatives,
            }))
        }
        Command::Classify(_) => print_json(&experiment::classify(&settings, out)?),
        Command::VerifyBounds(_) => {
            let reports = experiment::verify_bounds(&settings, out)?;
            experiment::emit_json_lines(&mut std::io::stdout().lock(), &reports)
        }
        Command::Ablate(_) => {
            let report = experiment::ablate_to_dir(&settings, out)?;
            experiment::emit_json_lines(&mut std::io::stdout().lock(), &report.records)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = ErrorRecord {
                error: e.kind(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            };
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
