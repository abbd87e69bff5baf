//! Benchmark protocol: stratified splits, repeated runs, per-class metrics,
//! confusion matrices, and report files.
//!
//! One benchmark = `runs` repetitions of: seeded stratified 80/20 split,
//! featurization stats fitted on the train partition, each selected method
//! trained from scratch, every test episode replayed through the
//! identification pipeline with the ground-truth detector. State-level
//! precision/recall/F are pooled per run over the consumed step prefixes and
//! reported as mean and (population) standard deviation across runs;
//! confusion matrices aggregate counts over all runs. Everything derives
//! from the master seed, so a benchmark re-run is byte-identical.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::crf::{train_arow, train_lbfgs, CrfArowConfig, CrfLbfgsConfig};
use crate::episode::{AnomalyClass, Episode};
use crate::error::{Error, Result};
use crate::featurize::fit_stats;
use crate::hmm::fit_supervised;
use crate::lstm::{train as train_lstm, EpochPoint, LstmTrainConfig};
use crate::model_io::dataset_fingerprint;
use crate::pipeline::{run_episode, GroundTruthDetector, Labeler};
use crate::seed::derive_seed;

/// The identification methods under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Hmm,
    CrfLbfgs,
    CrfArow,
    Lstm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hmm, Method::CrfLbfgs, Method::CrfArow, Method::Lstm];

    /// Fixed seed stream id per method (independent of selection order).
    fn seed_stream(self) -> u64 {
        match self {
            Method::Hmm => 10,
            Method::CrfLbfgs => 11,
            Method::CrfArow => 12,
            Method::Lstm => 13,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Hmm => "hmm",
            Method::CrfLbfgs => "crf-lbfgs",
            Method::CrfArow => "crf-arow",
            Method::Lstm => "lstm",
        };
        f.write_str(s)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "hmm" => Ok(Method::Hmm),
            "crf-lbfgs" => Ok(Method::CrfLbfgs),
            "crf-arow" => Ok(Method::CrfArow),
            "lstm" => Ok(Method::Lstm),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other} (expected hmm, crf-lbfgs, crf-arow or lstm)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Stratified split outcome; partitions keep the dataset order.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub train: Vec<Episode>,
    pub test: Vec<Episode>,
    pub warnings: Vec<String>,
}

/// Seeded, stratified train/test split. The train partition gets
/// `round(n * train_fraction)` episodes overall; per-class counts follow the
/// largest-remainder rule so every class with at least two episodes appears
/// in both partitions. Classes with a single episode go to train with a
/// warning.
pub fn split(dataset: &[Episode], train_fraction: f64, seed: u64) -> Result<SplitOutcome> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("split on empty dataset".into()));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidInput(format!(
            "train_fraction must be in [0, 1], got {train_fraction}"
        )));
    }
    let total_train = (dataset.len() as f64 * train_fraction).round() as usize;
    let mut warnings = Vec::new();

    // per-class episode indices, classes in fixed order
    let mut class_indices: Vec<(AnomalyClass, Vec<usize>)> = Vec::new();
    for class in AnomalyClass::ALL {
        let idx: Vec<usize> = dataset
            .iter()
            .enumerate()
            .filter(|(_, e)| e.case_label == class)
            .map(|(i, _)| i)
            .collect();
        if !idx.is_empty() {
            class_indices.push((class, idx));
        }
    }

    // largest-remainder apportionment of train slots
    struct Alloc {
        class_pos: usize,
        n: usize,
        take: usize,
        remainder: f64,
        adjustable: bool,
    }
    let mut allocs: Vec<Alloc> = Vec::new();
    for (pos, (class, idx)) in class_indices.iter().enumerate() {
        let n = idx.len();
        if n == 1 {
            warnings.push(format!(
                "class {class} has a single episode; placing it in train"
            ));
            allocs.push(Alloc {
                class_pos: pos,
                n,
                take: 1,
                remainder: 0.0,
                adjustable: false,
            });
        } else {
            let ideal = n as f64 * train_fraction;
            let base = (ideal.floor() as usize).clamp(1, n - 1);
            allocs.push(Alloc {
                class_pos: pos,
                n,
                take: base,
                remainder: ideal - ideal.floor(),
                adjustable: true,
            });
        }
    }
    let mut assigned: usize = allocs.iter().map(|a| a.take).sum();
    // grow toward the target, largest remainder first (stable order on ties)
    while assigned < total_train {
        let mut best: Option<usize> = None;
        for (i, a) in allocs.iter().enumerate() {
            if a.adjustable && a.take < a.n - 1 {
                if best.map_or(true, |b| a.remainder > allocs[b].remainder) {
                    best = Some(i);
                }
            }
        }
        match best {
            Some(i) => {
                allocs[i].take += 1;
                assigned += 1;
            }
            None => break,
        }
    }
    // or shrink, smallest remainder first
    while assigned > total_train {
        let mut best: Option<usize> = None;
        for (i, a) in allocs.iter().enumerate() {
            if a.adjustable && a.take > 1 {
                if best.map_or(true, |b| a.remainder < allocs[b].remainder) {
                    best = Some(i);
                }
            }
        }
        match best {
            Some(i) => {
                allocs[i].take -= 1;
                assigned -= 1;
            }
            None => break,
        }
    }

    // seeded shuffle within each class, then recombine in dataset order
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for a in &allocs {
        let (_, indices) = &class_indices[a.class_pos];
        let mut shuffled = indices.clone();
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(seed, a.class_pos as u64));
        shuffled.shuffle(&mut rng);
        train_idx.extend_from_slice(&shuffled[..a.take]);
        test_idx.extend_from_slice(&shuffled[a.take..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(SplitOutcome {
        train: train_idx.iter().map(|&i| dataset[i].clone()).collect(),
        test: test_idx.iter().map(|&i| dataset[i].clone()).collect(),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mean and population standard deviation across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn from_values(values: &[f64]) -> Stat {
        if values.is_empty() {
            return Stat { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Precision/recall/F triple with across-run spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub precision: Stat,
    pub recall: Stat,
    pub f_score: Stat,
}

/// Per-run precision/recall/F values for one class (or aggregate).
#[derive(Debug, Clone, Copy, Default)]
struct Prf {
    precision: f64,
    recall: f64,
    f_score: f64,
}

/// Precision, recall and F for one class from pooled step counts.
/// Empty denominators yield 0 (the documented zero-division rule);
/// F = 2PR/(P+R) when P+R > 0, else 0.
fn prf_from_counts(tp: usize, predicted: usize, gold: usize) -> Prf {
    let precision = if predicted > 0 {
        tp as f64 / predicted as f64
    } else {
        0.0
    };
    let recall = if gold > 0 { tp as f64 / gold as f64 } else { 0.0 };
    let f_score = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f_score,
    }
}

/// Per-run state-level metrics from a 4x4 confusion count matrix
/// (`[gold][predicted]`).
#[derive(Debug, Clone, Copy)]
struct RunMetrics {
    per_class: [Prf; 4],
    macro_all: Prf,
    macro_anomaly: Prf,
    micro: Prf,
}

fn run_metrics(confusion: &[[usize; 4]; 4]) -> RunMetrics {
    let mut per_class = [Prf::default(); 4];
    for c in 0..4 {
        let tp = confusion[c][c];
        let gold: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        per_class[c] = prf_from_counts(tp, predicted, gold);
    }
    let mean_of = |classes: &[usize]| -> Prf {
        let k = classes.len() as f64;
        Prf {
            precision: classes.iter().map(|&c| per_class[c].precision).sum::<f64>() / k,
            recall: classes.iter().map(|&c| per_class[c].recall).sum::<f64>() / k,
            f_score: classes.iter().map(|&c| per_class[c].f_score).sum::<f64>() / k,
        }
    };
    let tp_total: usize = (0..4).map(|c| confusion[c][c]).sum();
    let total: usize = confusion.iter().flatten().sum();
    let micro = prf_from_counts(tp_total, total, total);
    RunMetrics {
        per_class,
        macro_all: mean_of(&[0, 1, 2, 3]),
        macro_anomaly: mean_of(&[1, 2, 3]),
        micro,
    }
}

/// Aggregated report for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Indexed by [`AnomalyClass::index`].
    pub per_class: Vec<MetricStats>,
    /// Unweighted mean over the four class columns (Safe included).
    pub overall_macro: MetricStats,
    /// Unweighted mean over the three anomaly classes only.
    pub overall_anomaly: MetricStats,
    /// Micro average (pooled step accuracy).
    pub overall_micro: MetricStats,
    /// Step-level confusion counts (`[gold][predicted]`), all runs pooled.
    pub state_confusion_counts: [[u64; 4]; 4],
    /// Row-normalized step-level confusion.
    pub state_confusion: [[f64; 4]; 4],
    /// Case-level confusion over anomaly classes (`[gold][predicted]`),
    /// counts over all runs; gold order LOC, DIS, UNB.
    pub case_confusion: [[u64; 3]; 3],
    /// Episodes whose majority vote came out SAFE, by gold class (defended
    /// against even though the vote tie rule prevents it).
    pub case_safe_spill: [u64; 3],
    pub runs_completed: usize,
    /// (run index, error) for runs whose training failed; those runs are
    /// excluded from the aggregates.
    pub failed_runs: Vec<(usize, String)>,
    /// LSTM training curves per run (empty for the other methods).
    pub curves: Vec<(usize, Vec<EpochPoint>)>,
}

/// Per-episode identification outcome, kept for pipeline-conformance checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub run: usize,
    pub method: Method,
    pub episode_id: String,
    pub gold_case: AnomalyClass,
    pub predicted_case: AnomalyClass,
    pub detection_step: Option<usize>,
    pub votes: [usize; 4],
    /// Predicted labels over the consumed prefix.
    pub labels: Vec<AnomalyClass>,
    /// Gold labels over the same prefix.
    pub gold_labels: Vec<AnomalyClass>,
}

/// Benchmark configuration; per-run and per-method seeds derive from
/// `master_seed`.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub runs: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
    pub hmm_smoothing: f64,
    pub crf_lbfgs: CrfLbfgsConfig,
    pub crf_arow: CrfArowConfig,
    pub lstm: LstmTrainConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            methods: Method::ALL.to_vec(),
            runs: 10,
            train_fraction: 0.8,
            master_seed: 7,
            hmm_smoothing: 1.0,
            crf_lbfgs: CrfLbfgsConfig::default(),
            crf_arow: CrfArowConfig::default(),
            lstm: LstmTrainConfig::default(),
        }
    }
}

/// Full benchmark output.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub reports: Vec<MethodReport>,
    pub outcomes: Vec<EpisodeOutcome>,
    pub dataset_fingerprint: String,
    pub runs: usize,
    pub train_fraction: f64,
    pub master_seed: u64,
}

struct MethodRunOutput {
    confusion: [[usize; 4]; 4],
    case_pairs: Vec<(AnomalyClass, AnomalyClass)>,
    outcomes: Vec<EpisodeOutcome>,
    curve: Option<Vec<EpochPoint>>,
    error: Option<String>,
}

fn evaluate_method(
    method: Method,
    run: usize,
    train: &[Episode],
    test: &[Episode],
    config: &BenchmarkConfig,
    run_seed: u64,
) -> MethodRunOutput {
    let mut out = MethodRunOutput {
        confusion: [[0; 4]; 4],
        case_pairs: Vec::new(),
        outcomes: Vec::new(),
        curve: None,
        error: None,
    };
    let stats = match fit_stats(train) {
        Ok(s) => s,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    let method_seed = derive_seed(run_seed, method.seed_stream());
    let labeler: Box<dyn Labeler> = match method {
        Method::Hmm => match fit_supervised(train, &stats, config.hmm_smoothing) {
            Ok(bank) => Box::new(bank),
            Err(e) => {
                out.error = Some(e.to_string());
                return out;
            }
        },
        Method::CrfLbfgs => match train_lbfgs(train, &stats, &config.crf_lbfgs) {
            Ok((model, _)) => Box::new(model),
            Err(e) => {
                out.error = Some(e.to_string());
                return out;
            }
        },
        Method::CrfArow => {
            let arow = CrfArowConfig {
                shuffle_seed: method_seed,
                ..config.crf_arow
            };
            match train_arow(train, &stats, &arow) {
                Ok(model) => Box::new(model),
                Err(e) => {
                    out.error = Some(e.to_string());
                    return out;
                }
            }
        }
        Method::Lstm => {
            let lstm_config = LstmTrainConfig {
                init_seed: method_seed,
                ..config.lstm
            };
            match train_lstm(train, &stats, &lstm_config) {
                Ok((model, curve)) => {
                    out.curve = Some(curve);
                    Box::new(model)
                }
                Err(e) => {
                    out.error = Some(e.to_string());
                    return out;
                }
            }
        }
    };

    for ep in test {
        let result = match run_episode(labeler.as_ref(), &GroundTruthDetector, ep) {
            Ok(r) => r,
            Err(e) => {
                out.error = Some(format!("episode {}: {e}", ep.id));
                return out;
            }
        };
        let consumed = result.labels.len();
        let gold_labels: Vec<AnomalyClass> = ep.samples[..consumed].iter().map(|(_, y)| *y).collect();
        for (gold, pred) in gold_labels.iter().zip(&result.labels) {
            out.confusion[gold.index()][pred.index()] += 1;
        }
        if ep.case_label.is_anomaly() {
            out.case_pairs.push((ep.case_label, result.final_class));
        }
        out.outcomes.push(EpisodeOutcome {
            run,
            method,
            episode_id: ep.id.clone(),
            gold_case: ep.case_label,
            predicted_case: result.final_class,
            detection_step: result.detection_step,
            votes: result.votes,
            labels: result.labels,
            gold_labels,
        });
    }
    out
}

/// Builds the 3x3 case-level count matrix (plus the SAFE spill column) from
/// (gold case, predicted case) pairs; golds must be anomaly classes.
pub fn case_confusion(
    pairs: &[(AnomalyClass, AnomalyClass)],
) -> ([[u64; 3]; 3], [u64; 3]) {
    let mut matrix = [[0u64; 3]; 3];
    let mut spill = [0u64; 3];
    for (gold, pred) in pairs {
        debug_assert!(gold.is_anomaly());
        let g = gold.index() - 1;
        if pred.is_anomaly() {
            matrix[g][pred.index() - 1] += 1;
        } else {
            spill[g] += 1;
        }
    }
    (matrix, spill)
}

/// Runs the full protocol. Runs execute in parallel with derived seeds;
/// aggregation is in run order, so the result is deterministic.
pub fn run_benchmark(dataset: &[Episode], config: &BenchmarkConfig) -> Result<BenchmarkResult> {
    for class in AnomalyClass::ANOMALIES {
        if !dataset.iter().any(|e| e.case_label == class) {
            return Err(Error::MissingClass(class.to_string()));
        }
    }
    if config.runs == 0 {
        return Err(Error::InvalidInput("benchmark needs at least one run".into()));
    }

    let fingerprint = dataset_fingerprint(dataset);
    let per_run: Vec<Vec<MethodRunOutput>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let run_seed = derive_seed(config.master_seed, 1000 + run as u64);
            let split_outcome = split(dataset, config.train_fraction, derive_seed(run_seed, 0))
                .expect("dataset validated non-empty");
            config
                .methods
                .iter()
                .map(|&method| {
                    evaluate_method(
                        method,
                        run,
                        &split_outcome.train,
                        &split_outcome.test,
                        config,
                        run_seed,
                    )
                })
                .collect()
        })
        .collect();

    let mut reports = Vec::new();
    let mut outcomes = Vec::new();
    for (m_idx, &method) in config.methods.iter().enumerate() {
        let mut metrics_per_run: Vec<RunMetrics> = Vec::new();
        let mut counts = [[0u64; 4]; 4];
        let mut case_pairs: Vec<(AnomalyClass, AnomalyClass)> = Vec::new();
        let mut failed = Vec::new();
        let mut curves = Vec::new();
        for (run, run_outputs) in per_run.iter().enumerate() {
            let output = &run_outputs[m_idx];
            if let Some(err) = &output.error {
                failed.push((run, err.clone()));
                continue;
            }
            metrics_per_run.push(run_metrics(&output.confusion));
            for g in 0..4 {
                for p in 0..4 {
                    counts[g][p] += output.confusion[g][p] as u64;
                }
            }
            case_pairs.extend_from_slice(&output.case_pairs);
            if let Some(curve) = &output.curve {
                curves.push((run, curve.clone()));
            }
        }
        let stat3 = |pick: &dyn Fn(&RunMetrics) -> Prf| -> MetricStats {
            let p: Vec<f64> = metrics_per_run.iter().map(|m| pick(m).precision).collect();
            let r: Vec<f64> = metrics_per_run.iter().map(|m| pick(m).recall).collect();
            let f: Vec<f64> = metrics_per_run.iter().map(|m| pick(m).f_score).collect();
            MetricStats {
                precision: Stat::from_values(&p),
                recall: Stat::from_values(&r),
                f_score: Stat::from_values(&f),
            }
        };
        let per_class: Vec<MetricStats> = (0..4)
            .map(|c| stat3(&move |m: &RunMetrics| m.per_class[c]))
            .collect();
        let mut normalized = [[0.0f64; 4]; 4];
        for g in 0..4 {
            let row_sum: u64 = counts[g].iter().sum();
            if row_sum > 0 {
                for p in 0..4 {
                    normalized[g][p] = counts[g][p] as f64 / row_sum as f64;
                }
            }
        }
        let (case_matrix, spill) = case_confusion(&case_pairs);
        reports.push(MethodReport {
            method,
            per_class,
            overall_macro: stat3(&|m: &RunMetrics| m.macro_all),
            overall_anomaly: stat3(&|m: &RunMetrics| m.macro_anomaly),
            overall_micro: stat3(&|m: &RunMetrics| m.micro),
            state_confusion_counts: counts,
            state_confusion: normalized,
            case_confusion: case_matrix,
            case_safe_spill: spill,
            runs_completed: metrics_per_run.len(),
            failed_runs: failed,
            curves,
        });
    }
    for run_outputs in &per_run {
        for output in run_outputs {
            outcomes.extend(output.outcomes.iter().cloned());
        }
    }
    Ok(BenchmarkResult {
        reports,
        outcomes,
        dataset_fingerprint: fingerprint,
        runs: config.runs,
        train_fraction: config.train_fraction,
        master_seed: config.master_seed,
    })
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

fn reproducibility_header(result: &BenchmarkResult, method: Option<Method>) -> String {
    let mut s = String::new();
    s.push_str(&format!("# dataset_fingerprint={}\n", result.dataset_fingerprint));
    s.push_str(&format!("# master_seed={}\n", result.master_seed));
    s.push_str(&format!("# runs={}\n", result.runs));
    s.push_str(&format!("# train_fraction={}\n", result.train_fraction));
    if let Some(m) = method {
        s.push_str(&format!("# method={m}\n"));
    }
    s
}

fn write_file(dir: &Path, name: &str, content: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Writes the metrics tables, both confusion matrices per method, the LSTM
/// training curves and a plain-text summary into `out_dir`. Returns the
/// files written. Output bytes are a pure function of the benchmark result.
pub fn emit_report(result: &BenchmarkResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();

    for report in &result.reports {
        // metrics table: rows precision/recall/f-score, columns per class
        // (avg, std) plus the aggregate columns
        let mut csv = reproducibility_header(result, Some(report.method));
        csv.push_str("measure");
        for class in AnomalyClass::ALL {
            let name = class.report_name().to_lowercase();
            csv.push_str(&format!(",{name}_avg,{name}_std"));
        }
        csv.push_str(",overall_avg,overall_std,anomaly_overall_avg,anomaly_overall_std,micro_avg,micro_std\n");
        let rows: [(&str, &dyn Fn(&MetricStats) -> Stat); 3] = [
            ("precision", &|m: &MetricStats| m.precision),
            ("recall", &|m: &MetricStats| m.recall),
            ("f_score", &|m: &MetricStats| m.f_score),
        ];
        for (name, pick) in rows {
            csv.push_str(name);
            for c in 0..4 {
                let s = pick(&report.per_class[c]);
                csv.push_str(&format!(",{:.6},{:.6}", s.mean, s.std));
            }
            let overall = pick(&report.overall_macro);
            let anomaly = pick(&report.overall_anomaly);
            let micro = pick(&report.overall_micro);
            csv.push_str(&format!(
                ",{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                overall.mean, overall.std, anomaly.mean, anomaly.std, micro.mean, micro.std
            ));
        }
        write_file(out_dir, &format!("metrics_{}.csv", report.method), &csv, &mut written)?;

        // state-level confusion (row-normalized)
        let mut csv = reproducibility_header(result, Some(report.method));
        csv.push_str("gold\\predicted");
        for class in AnomalyClass::ALL {
            csv.push_str(&format!(",{}", class.report_name().to_lowercase()));
        }
        csv.push('\n');
        for (g, class) in AnomalyClass::ALL.iter().enumerate() {
            csv.push_str(&class.report_name().to_lowercase());
            for p in 0..4 {
                csv.push_str(&format!(",{:.6}", report.state_confusion[g][p]));
            }
            csv.push('\n');
        }
        write_file(
            out_dir,
            &format!("state_confusion_{}.csv", report.method),
            &csv,
            &mut written,
        )?;

        // case-level confusion (counts over anomaly classes)
        let mut csv = reproducibility_header(result, Some(report.method));
        csv.push_str("gold\\predicted,location,disappearance,unbalance,safe_spill\n");
        for (g, class) in AnomalyClass::ANOMALIES.iter().enumerate() {
            csv.push_str(&class.report_name().to_lowercase());
            for p in 0..3 {
                csv.push_str(&format!(",{}", report.case_confusion[g][p]));
            }
            csv.push_str(&format!(",{}\n", report.case_safe_spill[g]));
        }
        write_file(
            out_dir,
            &format!("case_confusion_{}.csv", report.method),
            &csv,
            &mut written,
        )?;

        // training curve (loss and f-score per epoch), LSTM only
        if !report.curves.is_empty() {
            let mut csv = reproducibility_header(result, Some(report.method));
            csv.push_str("run,epoch,loss,f_score\n");
            for (run, curve) in &report.curves {
                for point in curve {
                    csv.push_str(&format!(
                        "{run},{},{:.6},{:.6}\n",
                        point.epoch, point.loss, point.f_score
                    ));
                }
            }
            write_file(
                out_dir,
                &format!("curve_{}.csv", report.method),
                &csv,
                &mut written,
            )?;
        }
    }

    // plain-text summary
    let mut summary = String::new();
    summary.push_str("anomaly identification benchmark\n");
    summary.push_str("================================\n\n");
    summary.push_str(&reproducibility_header(result, None));
    summary.push('\n');
    if result.reports.is_empty() {
        summary.push_str("no methods were benchmarked\n");
    }
    for report in &result.reports {
        summary.push_str(&format!(
            "{}: overall F {:.3} +/- {:.3} | anomaly-only F {:.3} +/- {:.3} | runs {}\n",
            report.method,
            report.overall_macro.f_score.mean,
            report.overall_macro.f_score.std,
            report.overall_anomaly.f_score.mean,
            report.overall_anomaly.f_score.std,
            report.runs_completed,
        ));
        for class in AnomalyClass::ALL {
            let m = &report.per_class[class.index()];
            summary.push_str(&format!(
                "  {:<14} P {:.3}+/-{:.3}  R {:.3}+/-{:.3}  F {:.3}+/-{:.3}\n",
                class.report_name(),
                m.precision.mean,
                m.precision.std,
                m.recall.mean,
                m.recall.std,
                m.f_score.mean,
                m.f_score.std,
            ));
        }
        for (run, err) in &report.failed_runs {
            summary.push_str(&format!("  run {run} FAILED: {err}\n"));
        }
        summary.push('\n');
    }
    write_file(out_dir, "summary.txt", &summary, &mut written)?;
    Ok(written)
}
