use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use colorcue::classifier::{train_svm, LinearModel, SvmParams, DEFAULT_EPOCHS};
use colorcue::evaluation::roc_curve;
use colorcue::experiment::{self, training_seed, ExperimentConfig, MANIFEST_NAME};
use colorcue::features::{FeatureSet, DEFAULT_BINS};
use colorcue::formats::{self, ScoreRow};
use colorcue::simulators::SimConfig;
use colorcue::{classifier, Error};

const DEFAULT_SEED: u64 = 2019;

#[derive(Parser)]
#[command(
    name = "colorcue",
    version,
    about = "Detect GAN-generated imagery from saturation and chromaticity cues",
    after_help = r"Examples:

    colorcue simulate --out corpus/train
    colorcue extract corpus/train/manifest.csv --features saturation_over --out train.csv
    colorcue train train.csv --out model.json
    colorcue score test.csv --model model.json --out scores.csv
    colorcue eval scores.csv --out roc/
    colorcue reproduce --out results/"
)]
struct Cli {
    /// Worker threads for per-image work (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled PNG corpus of GAN-like and camera-like images
    Simulate(SimulateArgs),
    /// Compute feature rows for a corpus directory or manifest
    Extract(ExtractArgs),
    /// Train a linear SVM on a features CSV
    Train(TrainArgs),
    /// Score a features CSV with a trained model
    Score(ScoreArgs),
    /// Build the ROC curve and AUC from a scores CSV
    Eval(EvalArgs),
    /// Run the saturation ablation end to end on simulated corpora
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// key = value simulator config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Images per class
    #[arg(long)]
    count: Option<usize>,
    /// Index of the first image (use disjoint ranges for train and test)
    #[arg(long)]
    first_index: Option<u64>,
    #[arg(long)]
    image_size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Image directory or manifest.csv
    input: PathBuf,
    /// saturation_over, saturation_both or chroma_histogram
    #[arg(long, default_value = "saturation_both")]
    features: String,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    features: PathBuf,
    /// Regularization strength (default 1/n)
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Train on raw feature values
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    features: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    scores: PathBuf,
    /// Directory for roc.csv and roc.svg
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// key = value experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Images per class in each of the train and test corpora
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    image_size: Option<usize>,
    /// Skip the chromaticity histogram classifier
    #[arg(long)]
    no_chroma: bool,
    #[arg(long)]
    out: PathBuf,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => SimConfig::read(path)?,
        None => SimConfig {
            seed: DEFAULT_SEED,
            ..SimConfig::default()
        },
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(count) = args.count {
        cfg.count = count;
    }
    if let Some(first) = args.first_index {
        cfg.first_index = first;
    }
    if let Some(size) = args.image_size {
        cfg.image_size = size;
    }
    let (entries, stats) = experiment::write_corpus(&cfg, &args.out)?;
    println!(
        "wrote {} images and {} to {}",
        entries.len(),
        MANIFEST_NAME,
        args.out.display()
    );
    for st in &stats {
        let name = match st.label {
            colorcue::Label::Camera => "camera",
            colorcue::Label::Gan => "gan",
        };
        println!(
            "{name}: {} images, mean f_over[255] = {:.6}, mean f_under[0] = {:.6}",
            st.count, st.mean_f_over[3], st.mean_f_under[0]
        );
    }
    Ok(())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let set = FeatureSet::parse(&args.features, args.bins)?;
    let outcome = experiment::extract_from(&args.input, set)?;
    for (path, err) in &outcome.skipped {
        log::warn!("skipping {}: {err}", path.display());
    }
    formats::write_features(&args.out, set.dim(), &outcome.rows)?;
    println!(
        "wrote {} rows x {} features to {}",
        outcome.rows.len(),
        set.dim(),
        args.out.display()
    );
    if !outcome.skipped.is_empty() {
        eprintln!("note: skipped {} undecodable image(s)", outcome.skipped.len());
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let rows = formats::read_features(&args.features)?;
    let params = SvmParams {
        lambda: args.lambda,
        epochs: args.epochs,
        seed: training_seed(args.seed),
        standardize: !args.no_standardize,
    };
    let model = train_svm(&rows, &params)?;
    model.save(&args.out)?;
    println!(
        "trained on {} rows, lambda = {}, final objective = {}",
        rows.len(),
        model.lambda,
        model.training.final_objective
    );
    println!("training accuracy = {}", classifier::accuracy(&model, &rows)?);
    Ok(())
}

fn score(args: ScoreArgs) -> Result<()> {
    let model = LinearModel::load(&args.model)?;
    let rows = formats::read_features(&args.features)?;
    let scores = rows
        .iter()
        .map(|x| {
            Ok(ScoreRow {
                path: x.source.clone(),
                label: x.label,
                score: classifier::score(&model, x)?,
            })
        })
        .collect::<colorcue::Result<Vec<_>>>()?;
    formats::write_scores(&args.out, &scores)?;
    println!("wrote {} scores to {}", scores.len(), args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let rows = formats::read_scores(&args.scores)?;
    let data = formats::labeled_scores(&args.scores, &rows)?;
    let roc = roc_curve(&data)?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        formats::write_roc_csv(&dir.join("roc.csv"), &roc)?;
        formats::write_text(&dir.join("roc.svg"), &formats::roc_svg(&[("roc", &roc)]))?;
    }
    println!(
        "positives = {}, negatives = {}, roc points = {}",
        roc.n_positive,
        roc.n_negative,
        roc.points.len()
    );
    println!("AUC={}", roc.auc);
    Ok(())
}

fn reproduce(args: ReproduceArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::read(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(bins) = args.bins {
        cfg.bins = bins;
    }
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
    }
    if let Some(epochs) = args.epochs {
        cfg.epochs = epochs;
    }
    if let Some(count) = args.count {
        cfg.train_count = count;
        cfg.test_count = count;
    }
    if let Some(size) = args.image_size {
        cfg.sim.image_size = size;
    }
    if args.no_chroma {
        cfg.include_chroma = false;
    }
    let (result, files) = experiment::reproduce(&cfg, &args.out)?;
    print!("{}", result.summary_table());
    println!("wrote {} files to {}", files.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score(a),
        Command::Eval(a) => eval(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

/// 0 success, 1 usage error, 2 data error, 3 internal error.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_) | Error::BinCountTooSmall { .. }) => 1,
        Some(_) => 2,
        None => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
