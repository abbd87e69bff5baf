//! `anomid` — generate episodes, train identification models, replay the
//! identification pipeline, and run the benchmark protocol.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/model error, 3 training
//! divergence.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use anomid_core::crf::{train_arow, train_lbfgs, CrfArowConfig, CrfLbfgsConfig};
use anomid_core::episode::{read_episodes, write_episodes, AnomalyClass};
use anomid_core::error::Error;
use anomid_core::eval::{emit_report, run_benchmark, BenchmarkConfig, Method};
use anomid_core::featurize::fit_stats;
use anomid_core::hmm::fit_supervised;
use anomid_core::lstm::{train as train_lstm, LstmTrainConfig};
use anomid_core::model_io::{
    dataset_fingerprint, load_model, save_model, ModelFile, TrainedModel, MODEL_FORMAT_VERSION,
};
use anomid_core::optim::LbfgsConfig;
use anomid_core::pipeline::{run_episode, GroundTruthDetector};
use anomid_core::sim::{generate_dataset, DatasetConfig, DEFAULT_SAMPLES_PER_PHASE};

#[derive(Parser)]
#[command(
    name = "anomid",
    version,
    about = "Anomaly cause identification for tabletop manipulation episodes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic episode dataset
    Simgen(SimgenArgs),
    /// Train one identification model and save it
    Train(TrainArgs),
    /// Identify the anomaly cause of one recorded episode
    Identify(IdentifyArgs),
    /// Run the repeated split/train/test benchmark and write a report
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct SimgenArgs {
    /// Number of disappearance episodes
    #[arg(long, default_value_t = 49)]
    dis: usize,
    /// Number of collapse (unbalance) episodes
    #[arg(long, default_value_t = 39)]
    unb: usize,
    /// Number of location-change episodes
    #[arg(long, default_value_t = 32)]
    loc: usize,
    /// Number of anomaly-free episodes
    #[arg(long, default_value_t = 0)]
    safe: usize,
    /// Master seed; per-episode seeds derive from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Sensor noise multiplier (0 disables noise)
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Samples emitted per action phase
    #[arg(long, default_value_t = DEFAULT_SAMPLES_PER_PHASE)]
    samples_per_phase: usize,
    /// Output episode file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// One of: hmm, crf-lbfgs, crf-arow, lstm
    #[arg(long)]
    method: String,
    /// Episode file to train on (all episodes are used)
    #[arg(long)]
    data: PathBuf,
    /// Training seed (LSTM initialization / AROW shuffling)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperParams,
}

#[derive(Args, Clone)]
struct HyperParams {
    /// LSTM training epochs
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// LSTM learning rate
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// LSTM hidden width
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// LSTM gradient clip (global norm)
    #[arg(long, default_value_t = 5.0)]
    grad_clip: f64,
    /// CRF L2 regularization (L-BFGS trainer)
    #[arg(long, default_value_t = 0.01)]
    l2: f64,
    /// L-BFGS iteration cap
    #[arg(long, default_value_t = 150)]
    max_iters: usize,
    /// AROW regularization r
    #[arg(long, default_value_t = 1.0)]
    arow_r: f64,
    /// AROW training epochs
    #[arg(long, default_value_t = 10)]
    arow_epochs: usize,
    /// HMM additive smoothing pseudo-count
    #[arg(long, default_value_t = 1.0)]
    smoothing: f64,
}

impl HyperParams {
    fn lstm_config(&self, seed: u64) -> LstmTrainConfig {
        LstmTrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            hidden: self.hidden,
            init_seed: seed,
            grad_clip: self.grad_clip,
        }
    }

    fn lbfgs_config(&self) -> CrfLbfgsConfig {
        CrfLbfgsConfig {
            l2: self.l2,
            lbfgs: LbfgsConfig {
                max_iters: self.max_iters,
                ..LbfgsConfig::default()
            },
        }
    }

    fn arow_config(&self, seed: u64) -> CrfArowConfig {
        CrfArowConfig {
            r: self.arow_r,
            epochs: self.arow_epochs,
            shuffle_seed: seed,
        }
    }

    fn describe(&self, method: Method, seed: u64) -> BTreeMap<String, String> {
        let mut config = BTreeMap::new();
        config.insert("method".into(), method.to_string());
        config.insert("seed".into(), seed.to_string());
        match method {
            Method::Hmm => {
                config.insert("smoothing".into(), self.smoothing.to_string());
            }
            Method::CrfLbfgs => {
                config.insert("l2".into(), self.l2.to_string());
                config.insert("max_iters".into(), self.max_iters.to_string());
            }
            Method::CrfArow => {
                config.insert("arow_r".into(), self.arow_r.to_string());
                config.insert("arow_epochs".into(), self.arow_epochs.to_string());
            }
            Method::Lstm => {
                config.insert("epochs".into(), self.epochs.to_string());
                config.insert("lr".into(), self.lr.to_string());
                config.insert("hidden".into(), self.hidden.to_string());
                config.insert("grad_clip".into(), self.grad_clip.to_string());
            }
        }
        config
    }
}

#[derive(Args)]
struct IdentifyArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Episode file holding the episode to identify
    #[arg(long)]
    data: PathBuf,
    /// Episode id within the data file
    #[arg(long)]
    episode: String,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Episode file with the full dataset
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated subset of hmm,crf-lbfgs,crf-arow,lstm — or "all"
    #[arg(long, default_value = "all")]
    methods: String,
    /// Number of repeated random splits
    #[arg(long, default_value_t = 10)]
    runs: usize,
    /// Fraction of episodes used for training in each run
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    /// Master seed for splits and training
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Report directory
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: HyperParams,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Divergence { .. } => 3,
        Error::InvalidInput(_) | Error::InvalidScenario(_) => 1,
        _ => 2,
    }
}

fn run(cli: Cli) -> anomid_core::Result<()> {
    match cli.command {
        Command::Simgen(args) => simgen(args),
        Command::Train(args) => train(args),
        Command::Identify(args) => identify(args),
        Command::Benchmark(args) => benchmark(args),
    }
}

fn simgen(args: SimgenArgs) -> anomid_core::Result<()> {
    let config = DatasetConfig {
        n_dis: args.dis,
        n_unb: args.unb,
        n_loc: args.loc,
        n_safe: args.safe,
        seed: args.seed,
        noise_level: args.noise,
        samples_per_phase: args.samples_per_phase,
    };
    let episodes = generate_dataset(&config)?;
    write_episodes(&episodes, &args.out)?;
    println!(
        "wrote {} episodes ({} DIS / {} UNB / {} LOC / {} SAFE) to {}",
        episodes.len(),
        args.dis,
        args.unb,
        args.loc,
        args.safe,
        args.out.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> anomid_core::Result<()> {
    let method = Method::from_str(&args.method)?;
    let episodes = read_episodes(&args.data)?;
    if episodes.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} holds no episodes",
            args.data.display()
        )));
    }
    let stats = fit_stats(&episodes)?;
    let model = match method {
        Method::Hmm => TrainedModel::Hmm(fit_supervised(&episodes, &stats, args.hyper.smoothing)?),
        Method::CrfLbfgs => {
            let (model, report) = train_lbfgs(&episodes, &stats, &args.hyper.lbfgs_config())?;
            if report.line_search_failed {
                eprintln!("warning: line search failed; keeping the best iterate");
            }
            TrainedModel::Crf(model)
        }
        Method::CrfArow => {
            TrainedModel::Crf(train_arow(&episodes, &stats, &args.hyper.arow_config(args.seed))?)
        }
        Method::Lstm => {
            let (model, curve) =
                train_lstm(&episodes, &stats, &args.hyper.lstm_config(args.seed))?;
            if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
                println!(
                    "loss {:.4} -> {:.4} over {} epochs (final training F {:.3})",
                    first.loss,
                    last.loss,
                    curve.len(),
                    last.f_score
                );
            }
            TrainedModel::Lstm(model)
        }
    };
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        train_config: args.hyper.describe(method, args.seed),
        dataset_fingerprint: dataset_fingerprint(&episodes),
        model,
    };
    save_model(&file, &args.out)?;
    println!("saved {} model to {}", method, args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct IdentifyOutput<'a> {
    episode: &'a str,
    #[serde(rename = "final")]
    final_class: AnomalyClass,
    detection_step: Option<usize>,
    votes: BTreeMap<String, usize>,
    labels: Vec<AnomalyClass>,
}

fn identify(args: IdentifyArgs) -> anomid_core::Result<()> {
    let model = load_model(&args.model)?;
    let episodes = read_episodes(&args.data)?;
    let episode = episodes
        .iter()
        .find(|e| e.id == args.episode)
        .ok_or_else(|| {
            Error::InvalidEpisode(format!(
                "episode {} not found in {}",
                args.episode,
                args.data.display()
            ))
        })?;
    let result = run_episode(&model.model, &GroundTruthDetector, episode)?;
    let mut votes = BTreeMap::new();
    for class in AnomalyClass::ALL {
        votes.insert(class.to_string(), result.votes[class.index()]);
    }
    let output = IdentifyOutput {
        episode: &episode.id,
        final_class: result.final_class,
        detection_step: result.detection_step,
        votes,
        labels: result.labels,
    };
    println!(
        "{}",
        serde_json::to_string(&output)
            .map_err(|e| Error::InvalidInput(format!("serialize output: {e}")))?
    );
    Ok(())
}

fn benchmark(args: BenchmarkArgs) -> anomid_core::Result<()> {
    let methods: Vec<Method> = if args.methods == "all" {
        Method::ALL.to_vec()
    } else {
        args.methods
            .split(',')
            .map(|s| Method::from_str(s.trim()))
            .collect::<anomid_core::Result<Vec<_>>>()?
    };
    let dataset = read_episodes(&args.data)?;
    let config = BenchmarkConfig {
        methods,
        runs: args.runs,
        train_fraction: args.train_frac,
        master_seed: args.seed,
        hmm_smoothing: args.hyper.smoothing,
        crf_lbfgs: args.hyper.lbfgs_config(),
        crf_arow: args.hyper.arow_config(0),
        lstm: args.hyper.lstm_config(0),
    };
    let result = run_benchmark(&dataset, &config)?;
    let files = emit_report(&result, &args.out)?;
    for report in &result.reports {
        println!(
            "{:<10} overall F {:.3} +/- {:.3} | anomaly-only F {:.3} +/- {:.3}",
            report.method.to_string(),
            report.overall_macro.f_score.mean,
            report.overall_macro.f_score.std,
            report.overall_anomaly.f_score.mean,
            report.overall_anomaly.f_score.std,
        );
    }
    println!("report written to {} ({} files)", args.out.display(), files.len());
    Ok(())
}
