//! Linear-chain conditional random field over the four step labels.
//!
//! Features are binary indicators from three templates: TRANS(prev, label)
//! over all 16 label pairs, START(label) for the virtual start transition,
//! and EMIT(label, channel, code) for every (channel, code) seen in training
//! paired with all four labels. Unseen test codes simply contribute nothing.
//! Inference is exact (forward algorithm for the partition function,
//! forward-backward for marginals, max-product for decoding), all in log
//! space. Two trainers are provided: batch L-BFGS on the L2-regularized
//! negative log-likelihood, and an online AROW-style confidence-weighted
//! update driven by Viterbi decoding errors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{AnomalyClass, Episode};
use crate::error::{Error, Result};
use crate::featurize::{
    discretize_sequence, DiscreteObservation, FeaturizerStats, CHANNEL_CARDINALITIES,
    CHANNEL_NAMES,
};
use crate::optim::{minimize, LbfgsConfig};
use crate::util::logsumexp;

/// Number of step labels (SAFE, LOC, DIS, UNB).
pub const NUM_LABELS: usize = 4;

const TRANS_BLOCK: usize = NUM_LABELS * NUM_LABELS;
const START_BLOCK: usize = NUM_LABELS;
const EMIT_OFFSET: usize = TRANS_BLOCK + START_BLOCK;

/// Bidirectional mapping between feature identities and dense weight
/// indices. Built from training data only.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfFeatureIndex {
    /// `emit_base[channel][code]` is the weight index of
    /// EMIT(SAFE, channel, code); the other labels follow consecutively.
    /// `None` for codes never seen in training.
    emit_base: Vec<Vec<Option<usize>>>,
    num_features: usize,
}

impl CrfFeatureIndex {
    /// Indexes TRANS and START exhaustively plus EMIT features for every
    /// (channel, code) present in `sequences`.
    pub fn build(sequences: &[Vec<DiscreteObservation>]) -> CrfFeatureIndex {
        let mut seen: Vec<Vec<bool>> = CHANNEL_CARDINALITIES
            .iter()
            .map(|&card| vec![false; card])
            .collect();
        for seq in sequences {
            for obs in seq {
                for (ch, &code) in obs.codes.iter().enumerate() {
                    seen[ch][code] = true;
                }
            }
        }
        let mut emit_base: Vec<Vec<Option<usize>>> = CHANNEL_CARDINALITIES
            .iter()
            .map(|&card| vec![None; card])
            .collect();
        let mut next = EMIT_OFFSET;
        for (ch, codes) in seen.iter().enumerate() {
            for (code, &present) in codes.iter().enumerate() {
                if present {
                    emit_base[ch][code] = Some(next);
                    next += NUM_LABELS;
                }
            }
        }
        CrfFeatureIndex {
            emit_base,
            num_features: next,
        }
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Weight index of TRANS(prev, label).
    pub fn trans(prev: usize, label: usize) -> usize {
        prev * NUM_LABELS + label
    }

    /// Weight index of START(label).
    pub fn start(label: usize) -> usize {
        TRANS_BLOCK + label
    }

    /// Weight index of EMIT(label, channel, code); `None` when the code was
    /// not seen in training.
    pub fn emit(&self, label: usize, channel: usize, code: usize) -> Option<usize> {
        self.emit_base[channel][code].map(|base| base + label)
    }

    /// Feature identity strings, one per weight index, in index order.
    pub fn feature_names(&self) -> Vec<String> {
        let label_name = |l: usize| AnomalyClass::from_index(l).unwrap().to_string();
        let mut names = Vec::with_capacity(self.num_features);
        for prev in 0..NUM_LABELS {
            for label in 0..NUM_LABELS {
                names.push(format!("TRANS:{}:{}", label_name(prev), label_name(label)));
            }
        }
        for label in 0..NUM_LABELS {
            names.push(format!("START:{}", label_name(label)));
        }
        let mut blocks: Vec<(usize, usize, usize)> = Vec::new();
        for (ch, codes) in self.emit_base.iter().enumerate() {
            for (code, base) in codes.iter().enumerate() {
                if let Some(base) = base {
                    blocks.push((*base, ch, code));
                }
            }
        }
        blocks.sort_unstable();
        for (_, ch, code) in blocks {
            for label in 0..NUM_LABELS {
                names.push(format!("EMIT:{}:{}:{}", label_name(label), CHANNEL_NAMES[ch], code));
            }
        }
        names
    }

    /// Rebuilds an index from identity strings (the serialized form).
    pub fn from_feature_names(names: &[String]) -> Result<CrfFeatureIndex> {
        let corrupt = |msg: String| Error::CorruptModel(msg);
        let parse_label = |s: &str| -> Result<usize> {
            AnomalyClass::ALL
                .iter()
                .position(|c| c.to_string() == s)
                .ok_or_else(|| corrupt(format!("unknown label {s}")))
        };
        if names.len() < EMIT_OFFSET || (names.len() - EMIT_OFFSET) % NUM_LABELS != 0 {
            return Err(corrupt(format!("bad feature count {}", names.len())));
        }
        for prev in 0..NUM_LABELS {
            for label in 0..NUM_LABELS {
                let expect = format!(
                    "TRANS:{}:{}",
                    AnomalyClass::from_index(prev).unwrap(),
                    AnomalyClass::from_index(label).unwrap()
                );
                let got = &names[CrfFeatureIndex::trans(prev, label)];
                if *got != expect {
                    return Err(corrupt(format!("expected {expect}, found {got}")));
                }
            }
        }
        for label in 0..NUM_LABELS {
            let expect = format!("START:{}", AnomalyClass::from_index(label).unwrap());
            let got = &names[CrfFeatureIndex::start(label)];
            if *got != expect {
                return Err(corrupt(format!("expected {expect}, found {got}")));
            }
        }
        let mut emit_base: Vec<Vec<Option<usize>>> = CHANNEL_CARDINALITIES
            .iter()
            .map(|&card| vec![None; card])
            .collect();
        let mut idx = EMIT_OFFSET;
        while idx < names.len() {
            let parts: Vec<&str> = names[idx].split(':').collect();
            if parts.len() != 4 || parts[0] != "EMIT" {
                return Err(corrupt(format!("bad feature {}", names[idx])));
            }
            let ch = CHANNEL_NAMES
                .iter()
                .position(|&n| n == parts[2])
                .ok_or_else(|| corrupt(format!("unknown channel {}", parts[2])))?;
            let code: usize = parts[3]
                .parse()
                .map_err(|_| corrupt(format!("bad code in {}", names[idx])))?;
            if code >= CHANNEL_CARDINALITIES[ch] {
                return Err(corrupt(format!("code {code} out of range for {}", parts[2])));
            }
            if emit_base[ch][code].is_some() {
                return Err(corrupt(format!("duplicate feature {}", names[idx])));
            }
            for label in 0..NUM_LABELS {
                let got = &names[idx + label];
                let parts: Vec<&str> = got.split(':').collect();
                if parts.len() != 4
                    || parse_label(parts[1])? != label
                    || parts[2] != CHANNEL_NAMES[ch]
                    || parts[3].parse::<usize>().ok() != Some(code)
                {
                    return Err(corrupt(format!("misordered feature {got}")));
                }
            }
            emit_base[ch][code] = Some(idx);
            idx += NUM_LABELS;
        }
        Ok(CrfFeatureIndex {
            emit_base,
            num_features: names.len(),
        })
    }
}

/// Weights plus the feature index and the featurization stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CrfModelWire", try_from = "CrfModelWire")]
pub struct CrfModel {
    pub index: CrfFeatureIndex,
    pub weights: Vec<f64>,
    pub stats: FeaturizerStats,
}

#[derive(Serialize, Deserialize, Clone)]
struct CrfModelWire {
    features: Vec<String>,
    weights: Vec<f64>,
    stats: FeaturizerStats,
}

impl From<CrfModel> for CrfModelWire {
    fn from(m: CrfModel) -> CrfModelWire {
        CrfModelWire {
            features: m.index.feature_names(),
            weights: m.weights,
            stats: m.stats,
        }
    }
}

impl TryFrom<CrfModelWire> for CrfModel {
    type Error = Error;

    fn try_from(w: CrfModelWire) -> Result<CrfModel> {
        if w.features.len() != w.weights.len() {
            return Err(Error::CorruptModel(format!(
                "{} features but {} weights",
                w.features.len(),
                w.weights.len()
            )));
        }
        Ok(CrfModel {
            index: CrfFeatureIndex::from_feature_names(&w.features)?,
            weights: w.weights,
            stats: w.stats,
        })
    }
}

/// A discretized episode with gold label indices, the CRF's training unit.
#[derive(Debug, Clone)]
pub struct LabeledSequence {
    pub obs: Vec<DiscreteObservation>,
    pub labels: Vec<usize>,
}

impl LabeledSequence {
    pub fn from_episode(ep: &Episode, stats: &FeaturizerStats) -> LabeledSequence {
        LabeledSequence {
            obs: discretize_sequence(&ep.observations(), stats),
            labels: ep.samples.iter().map(|(_, y)| y.index()).collect(),
        }
    }
}

impl CrfModel {
    /// Sum of active feature weights at one position: the transition (or
    /// start) weight plus one EMIT weight per channel. `prev = None` marks
    /// the virtual start.
    pub fn score_position(
        &self,
        prev: Option<usize>,
        label: usize,
        x: &DiscreteObservation,
    ) -> f64 {
        let mut score = match prev {
            Some(p) => self.weights[CrfFeatureIndex::trans(p, label)],
            None => self.weights[CrfFeatureIndex::start(label)],
        };
        for (ch, &code) in x.codes.iter().enumerate() {
            if let Some(idx) = self.index.emit(label, ch, code) {
                score += self.weights[idx];
            }
        }
        score
    }

    /// Per-position EMIT score table (`[position][label]`), shared by all
    /// inference routines.
    fn emit_scores(&self, obs: &[DiscreteObservation]) -> Vec<[f64; NUM_LABELS]> {
        obs.iter()
            .map(|x| {
                let mut row = [0.0; NUM_LABELS];
                for (ch, &code) in x.codes.iter().enumerate() {
                    if let Some(base) = self.index.emit_base[ch][code] {
                        for (label, slot) in row.iter_mut().enumerate() {
                            *slot += self.weights[base + label];
                        }
                    }
                }
                row
            })
            .collect()
    }

    fn trans_matrix(&self) -> [[f64; NUM_LABELS]; NUM_LABELS] {
        let mut m = [[0.0; NUM_LABELS]; NUM_LABELS];
        for (prev, row) in m.iter_mut().enumerate() {
            for (label, slot) in row.iter_mut().enumerate() {
                *slot = self.weights[CrfFeatureIndex::trans(prev, label)];
            }
        }
        m
    }

    fn start_vector(&self) -> [f64; NUM_LABELS] {
        let mut v = [0.0; NUM_LABELS];
        for (label, slot) in v.iter_mut().enumerate() {
            *slot = self.weights[CrfFeatureIndex::start(label)];
        }
        v
    }

    fn forward(
        &self,
        emit: &[[f64; NUM_LABELS]],
        trans: &[[f64; NUM_LABELS]; NUM_LABELS],
        start: &[f64; NUM_LABELS],
    ) -> Vec<[f64; NUM_LABELS]> {
        let n = emit.len();
        let mut alpha = vec![[0.0; NUM_LABELS]; n];
        for l in 0..NUM_LABELS {
            alpha[0][l] = start[l] + emit[0][l];
        }
        for t in 1..n {
            for l in 0..NUM_LABELS {
                let terms: Vec<f64> = (0..NUM_LABELS)
                    .map(|p| alpha[t - 1][p] + trans[p][l])
                    .collect();
                alpha[t][l] = logsumexp(&terms) + emit[t][l];
            }
        }
        alpha
    }

    fn backward(
        &self,
        emit: &[[f64; NUM_LABELS]],
        trans: &[[f64; NUM_LABELS]; NUM_LABELS],
    ) -> Vec<[f64; NUM_LABELS]> {
        let n = emit.len();
        let mut beta = vec![[0.0; NUM_LABELS]; n];
        for t in (0..n.saturating_sub(1)).rev() {
            for l in 0..NUM_LABELS {
                let terms: Vec<f64> = (0..NUM_LABELS)
                    .map(|nl| trans[l][nl] + emit[t + 1][nl] + beta[t + 1][nl])
                    .collect();
                beta[t][l] = logsumexp(&terms);
            }
        }
        beta
    }

    /// Log partition function: log-sum over all label sequences of the
    /// exponentiated total score.
    pub fn log_partition(&self, obs: &[DiscreteObservation]) -> Result<f64> {
        if obs.is_empty() {
            return Err(Error::EmptyInput("log_partition on empty sequence".into()));
        }
        let emit = self.emit_scores(obs);
        let alpha = self.forward(&emit, &self.trans_matrix(), &self.start_vector());
        Ok(logsumexp(&alpha[obs.len() - 1]))
    }

    /// Total score of a fixed label sequence.
    pub fn sequence_score(&self, obs: &[DiscreteObservation], labels: &[usize]) -> f64 {
        let mut score = self.score_position(None, labels[0], &obs[0]);
        for t in 1..obs.len() {
            score += self.score_position(Some(labels[t - 1]), labels[t], &obs[t]);
        }
        score
    }

    /// Argmax label sequence by max-product; ties break toward the lowest
    /// label index (SAFE < LOC < DIS < UNB).
    pub fn decode(&self, obs: &[DiscreteObservation]) -> Result<Vec<AnomalyClass>> {
        if obs.is_empty() {
            return Err(Error::EmptyInput("decode on empty sequence".into()));
        }
        let n = obs.len();
        let emit = self.emit_scores(obs);
        let trans = self.trans_matrix();
        let start = self.start_vector();
        let mut score = [0.0; NUM_LABELS];
        for l in 0..NUM_LABELS {
            score[l] = start[l] + emit[0][l];
        }
        let mut back: Vec<[usize; NUM_LABELS]> = Vec::with_capacity(n);
        for t in 1..n {
            let mut next = [0.0; NUM_LABELS];
            let mut ptr = [0usize; NUM_LABELS];
            for l in 0..NUM_LABELS {
                let mut best_p = 0;
                let mut best = score[0] + trans[0][l];
                for p in 1..NUM_LABELS {
                    let cand = score[p] + trans[p][l];
                    if cand > best {
                        best = cand;
                        best_p = p;
                    }
                }
                next[l] = best + emit[t][l];
                ptr[l] = best_p;
            }
            score = next;
            back.push(ptr);
        }
        let mut label = 0;
        for l in 1..NUM_LABELS {
            if score[l] > score[label] {
                label = l;
            }
        }
        let mut path = vec![label; n];
        for t in (0..n - 1).rev() {
            label = back[t][label];
            path[t] = label;
        }
        Ok(path
            .into_iter()
            .map(|l| AnomalyClass::from_index(l).unwrap())
            .collect())
    }

    /// Adds `sign` times the active-feature counts of `labels` to `out`.
    fn add_feature_counts(
        &self,
        obs: &[DiscreteObservation],
        labels: &[usize],
        sign: f64,
        out: &mut [f64],
    ) {
        out[CrfFeatureIndex::start(labels[0])] += sign;
        for t in 1..labels.len() {
            out[CrfFeatureIndex::trans(labels[t - 1], labels[t])] += sign;
        }
        for (t, x) in obs.iter().enumerate() {
            for (ch, &code) in x.codes.iter().enumerate() {
                if let Some(idx) = self.index.emit(labels[t], ch, code) {
                    out[idx] += sign;
                }
            }
        }
    }

    /// NLL and exact gradient for one sequence (no regularizer).
    fn nll_grad_one(&self, seq: &LabeledSequence) -> (f64, Vec<f64>) {
        let n = seq.obs.len();
        let emit = self.emit_scores(&seq.obs);
        let trans = self.trans_matrix();
        let start = self.start_vector();
        let alpha = self.forward(&emit, &trans, &start);
        let beta = self.backward(&emit, &trans);
        let log_z = logsumexp(&alpha[n - 1]);

        let mut grad = vec![0.0; self.index.num_features()];
        // expected counts: unary marginals feed START and EMIT
        for t in 0..n {
            for l in 0..NUM_LABELS {
                let p = (alpha[t][l] + beta[t][l] - log_z).exp();
                if t == 0 {
                    grad[CrfFeatureIndex::start(l)] += p;
                }
                for (ch, &code) in seq.obs[t].codes.iter().enumerate() {
                    if let Some(idx) = self.index.emit(l, ch, code) {
                        grad[idx] += p;
                    }
                }
            }
        }
        // pairwise marginals feed TRANS
        for t in 1..n {
            for p in 0..NUM_LABELS {
                for l in 0..NUM_LABELS {
                    let lp = alpha[t - 1][p] + trans[p][l] + emit[t][l] + beta[t][l] - log_z;
                    grad[CrfFeatureIndex::trans(p, l)] += lp.exp();
                }
            }
        }
        // minus empirical counts
        self.add_feature_counts(&seq.obs, &seq.labels, -1.0, &mut grad);
        let nll = log_z - self.sequence_score(&seq.obs, &seq.labels);
        (nll, grad)
    }

    /// Regularized batch NLL and gradient:
    /// `sum_i [log Z(x_i) - score(y_i)] + (l2/2)||w||^2`.
    /// Episodes are processed in parallel; the reduction order is fixed.
    pub fn nll_and_gradient(&self, batch: &[LabeledSequence], l2: f64) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::EmptyInput("nll_and_gradient on empty batch".into()));
        }
        let per_episode: Vec<(f64, Vec<f64>)> = batch
            .par_iter()
            .map(|seq| self.nll_grad_one(seq))
            .collect();
        let mut nll = 0.0;
        let mut grad = vec![0.0; self.index.num_features()];
        for (e_nll, e_grad) in per_episode {
            nll += e_nll;
            for (g, eg) in grad.iter_mut().zip(&e_grad) {
                *g += eg;
            }
        }
        if l2 > 0.0 {
            for (g, w) in grad.iter_mut().zip(&self.weights) {
                nll += 0.5 * l2 * w * w;
                *g += l2 * w;
            }
        }
        if !nll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("CRF objective or gradient".into()));
        }
        Ok((nll, grad))
    }
}

/// Batch trainer configuration.
#[derive(Debug, Clone, Copy)]
pub struct CrfLbfgsConfig {
    /// L2 regularization strength.
    pub l2: f64,
    pub lbfgs: LbfgsConfig,
}

impl Default for CrfLbfgsConfig {
    fn default() -> Self {
        CrfLbfgsConfig {
            l2: 1e-2,
            lbfgs: LbfgsConfig {
                max_iters: 150,
                grad_tol: 1e-4,
                ..LbfgsConfig::default()
            },
        }
    }
}

/// Per-iteration (objective, gradient norm) trace from the batch trainer.
#[derive(Debug, Clone)]
pub struct LbfgsTrainReport {
    pub trace: Vec<(f64, f64)>,
    pub converged: bool,
    pub line_search_failed: bool,
}

/// Trains by minimizing the regularized NLL with L-BFGS.
pub fn train_lbfgs(
    train: &[Episode],
    stats: &FeaturizerStats,
    config: &CrfLbfgsConfig,
) -> Result<(CrfModel, LbfgsTrainReport)> {
    if train.is_empty() {
        return Err(Error::EmptyInput("train_lbfgs on empty training set".into()));
    }
    let sequences: Vec<LabeledSequence> = train
        .iter()
        .map(|ep| LabeledSequence::from_episode(ep, stats))
        .collect();
    let index = CrfFeatureIndex::build(
        &sequences.iter().map(|s| s.obs.clone()).collect::<Vec<_>>(),
    );
    let mut model = CrfModel {
        index,
        weights: vec![0.0; 0],
        stats: stats.clone(),
    };
    model.weights = vec![0.0; model.index.num_features()];

    let objective = |w: &[f64]| -> (f64, Vec<f64>) {
        let probe = CrfModel {
            index: model.index.clone(),
            weights: w.to_vec(),
            stats: model.stats.clone(),
        };
        probe
            .nll_and_gradient(&sequences, config.l2)
            .expect("finite objective during training")
    };
    let outcome = minimize(objective, model.weights.clone(), &config.lbfgs);
    model.weights = outcome.x;
    Ok((
        model,
        LbfgsTrainReport {
            trace: outcome.trace,
            converged: outcome.converged,
            line_search_failed: outcome.line_search_failed,
        },
    ))
}

/// Online trainer configuration.
#[derive(Debug, Clone, Copy)]
pub struct CrfArowConfig {
    /// AROW regularization hyperparameter (larger = more conservative).
    pub r: f64,
    pub epochs: usize,
    pub shuffle_seed: u64,
}

impl Default for CrfArowConfig {
    fn default() -> Self {
        CrfArowConfig {
            r: 1.0,
            epochs: 10,
            shuffle_seed: 0,
        }
    }
}

/// Trains with the structured AROW reduction: Viterbi-decode each episode
/// under the current weights; on a decoding error, apply a
/// confidence-weighted update along the gold-minus-decoded feature
/// difference, with per-coordinate variances that only ever shrink.
pub fn train_arow(
    train: &[Episode],
    stats: &FeaturizerStats,
    config: &CrfArowConfig,
) -> Result<CrfModel> {
    train_arow_inner(train, stats, config, |_, _| ())
}

/// Training loop; `observer(epoch, variance)` fires after every applied
/// update so tests can watch the confidence trajectory.
fn train_arow_inner<F>(
    train: &[Episode],
    stats: &FeaturizerStats,
    config: &CrfArowConfig,
    mut observer: F,
) -> Result<CrfModel>
where
    F: FnMut(usize, &[f64]),
{
    if train.is_empty() {
        return Err(Error::EmptyInput("train_arow on empty training set".into()));
    }
    if config.r <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "AROW r must be > 0, got {}",
            config.r
        )));
    }
    let sequences: Vec<LabeledSequence> = train
        .iter()
        .map(|ep| LabeledSequence::from_episode(ep, stats))
        .collect();
    let index = CrfFeatureIndex::build(
        &sequences.iter().map(|s| s.obs.clone()).collect::<Vec<_>>(),
    );
    let num_features = index.num_features();
    let mut model = CrfModel {
        index,
        weights: vec![0.0; num_features],
        stats: stats.clone(),
    };
    let mut variance = vec![1.0; num_features];
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let mut delta = vec![0.0; num_features];

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let seq = &sequences[i];
            let decoded: Vec<usize> = model
                .decode(&seq.obs)?
                .iter()
                .map(|y| y.index())
                .collect();
            if decoded == seq.labels {
                continue;
            }
            delta.iter_mut().for_each(|d| *d = 0.0);
            model.add_feature_counts(&seq.obs, &seq.labels, 1.0, &mut delta);
            model.add_feature_counts(&seq.obs, &decoded, -1.0, &mut delta);
            let active: Vec<usize> = delta
                .iter()
                .enumerate()
                .filter(|(_, d)| **d != 0.0)
                .map(|(j, _)| j)
                .collect();
            let margin: f64 = active.iter().map(|&j| model.weights[j] * delta[j]).sum();
            let loss = 1.0 - margin;
            if loss <= 0.0 {
                continue;
            }
            let confidence: f64 = active
                .iter()
                .map(|&j| variance[j] * delta[j] * delta[j])
                .sum();
            let beta = 1.0 / (confidence + config.r);
            let alpha = loss * beta;
            for &j in &active {
                model.weights[j] += alpha * variance[j] * delta[j];
                let vd = variance[j] * delta[j];
                variance[j] -= beta * vd * vd;
            }
            observer(epoch, &variance);
        }
    }
    Ok(model)
}
