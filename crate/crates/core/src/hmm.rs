//! Bank of per-anomaly-class hidden Markov models.
//!
//! Each anomaly cause gets its own HMM with binary hidden states (safe /
//! anomaly) and a naive-independence observation model: one categorical
//! distribution per discrete channel per state, multiplied across the 7
//! channels. Models are fitted by supervised maximum likelihood with
//! additive smoothing, using the ground-truth step labels as hidden-state
//! supervision. Classification scores a sequence under every model with the
//! forward algorithm, picks the best-fitting model, and labels the sequence
//! with that model's Viterbi path.

use serde::{Deserialize, Serialize};

use crate::episode::{AnomalyClass, Episode, Observation};
use crate::error::{Error, Result};
use crate::featurize::{
    discretize_sequence, DiscreteObservation, FeaturizerStats, CHANNEL_CARDINALITIES,
    CHANNEL_COUNT,
};
use crate::util::logsumexp;

/// Hidden-state indices.
pub const STATE_SAFE: usize = 0;
pub const STATE_ANOMALY: usize = 1;

/// Binary-hidden-state HMM for one anomaly class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub anomaly_class: AnomalyClass,
    /// Initial state distribution over {safe, anomaly}.
    pub initial: [f64; 2],
    /// Row-stochastic transition matrix, `transition[from][to]`.
    pub transition: [[f64; 2]; 2],
    /// `emission[state][channel][code]`: per-channel categorical
    /// distributions; an observation's probability is the product over
    /// channels.
    pub emission: Vec<Vec<Vec<f64>>>,
}

impl HmmModel {
    /// Log probability of emitting `obs` from `state`.
    fn log_emit(&self, state: usize, obs: &DiscreteObservation) -> f64 {
        let mut lp = 0.0;
        for (ch, &code) in obs.codes.iter().enumerate() {
            lp += self.emission[state][ch][code].ln();
        }
        lp
    }

    /// Forward-algorithm log P(obs | model), in log space throughout.
    pub fn log_likelihood(&self, obs: &[DiscreteObservation]) -> Result<f64> {
        if obs.is_empty() {
            return Err(Error::EmptyInput("log_likelihood on empty sequence".into()));
        }
        let mut alpha = [
            self.initial[0].ln() + self.log_emit(0, &obs[0]),
            self.initial[1].ln() + self.log_emit(1, &obs[0]),
        ];
        for x in &obs[1..] {
            let mut next = [0.0; 2];
            for (to, slot) in next.iter_mut().enumerate() {
                let terms = [
                    alpha[0] + self.transition[0][to].ln(),
                    alpha[1] + self.transition[1][to].ln(),
                ];
                *slot = logsumexp(&terms) + self.log_emit(to, x);
            }
            alpha = next;
        }
        Ok(logsumexp(&alpha))
    }

    /// Most probable hidden-state path (max-product in log space). Ties
    /// break toward the lower state index, i.e. toward safe.
    pub fn viterbi(&self, obs: &[DiscreteObservation]) -> Result<Vec<usize>> {
        if obs.is_empty() {
            return Err(Error::EmptyInput("viterbi on empty sequence".into()));
        }
        let n = obs.len();
        let mut score = [
            self.initial[0].ln() + self.log_emit(0, &obs[0]),
            self.initial[1].ln() + self.log_emit(1, &obs[0]),
        ];
        let mut back: Vec<[usize; 2]> = Vec::with_capacity(n);
        for x in &obs[1..] {
            let mut next = [0.0; 2];
            let mut ptr = [0usize; 2];
            for to in 0..2 {
                let mut best_k = 0;
                let mut best = score[0] + self.transition[0][to].ln();
                let cand = score[1] + self.transition[1][to].ln();
                if cand > best {
                    best = cand;
                    best_k = 1;
                }
                next[to] = best + self.log_emit(to, x);
                ptr[to] = best_k;
            }
            score = next;
            back.push(ptr);
        }
        let mut state = if score[1] > score[0] { 1 } else { 0 };
        let mut path = vec![state; n];
        for t in (0..n - 1).rev() {
            state = back[t][state];
            path[t] = state;
        }
        Ok(path)
    }

    /// First violation of the stochasticity invariants, if any.
    pub fn check_stochastic(&self, tol: f64) -> std::result::Result<(), String> {
        let check = |name: &str, row: &[f64]| -> std::result::Result<(), String> {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(format!("{name} sums to {sum}"));
            }
            if row.iter().any(|&p| p <= 0.0) {
                return Err(format!("{name} has a non-positive entry"));
            }
            Ok(())
        };
        check("initial", &self.initial)?;
        check("transition[safe]", &self.transition[0])?;
        check("transition[anomaly]", &self.transition[1])?;
        for state in 0..2 {
            for ch in 0..CHANNEL_COUNT {
                check(
                    &format!("emission[{state}][{ch}]"),
                    &self.emission[state][ch],
                )?;
            }
        }
        Ok(())
    }
}

/// One fitted HMM per anomaly class plus the shared featurization stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmBank {
    /// Models in the fixed class order LOC, DIS, UNB.
    pub models: Vec<HmmModel>,
    pub stats: FeaturizerStats,
    pub smoothing: f64,
}

/// Supervised maximum-likelihood fit with additive smoothing.
///
/// For the model of class `k`, parameters are counted over episodes whose
/// case label is `k`, mapping the ground-truth step labels onto the hidden
/// states (SAFE -> safe, `k` -> anomaly).
pub fn fit_supervised(
    train: &[Episode],
    stats: &FeaturizerStats,
    smoothing: f64,
) -> Result<HmmBank> {
    if smoothing <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "smoothing pseudo-count must be > 0, got {smoothing}"
        )));
    }
    let mut models = Vec::with_capacity(3);
    for class in AnomalyClass::ANOMALIES {
        let episodes: Vec<&Episode> = train.iter().filter(|e| e.case_label == class).collect();
        if episodes.is_empty() {
            return Err(Error::MissingClass(class.to_string()));
        }
        models.push(fit_one(class, &episodes, stats, smoothing));
    }
    Ok(HmmBank {
        models,
        stats: stats.clone(),
        smoothing,
    })
}

fn fit_one(
    class: AnomalyClass,
    episodes: &[&Episode],
    stats: &FeaturizerStats,
    alpha: f64,
) -> HmmModel {
    let mut init_count = [0.0f64; 2];
    let mut trans_count = [[0.0f64; 2]; 2];
    let mut emit_count: Vec<Vec<Vec<f64>>> = (0..2)
        .map(|_| {
            CHANNEL_CARDINALITIES
                .iter()
                .map(|&card| vec![0.0; card])
                .collect()
        })
        .collect();

    let state_of = |y: AnomalyClass| -> usize {
        if y == AnomalyClass::Safe {
            STATE_SAFE
        } else {
            STATE_ANOMALY
        }
    };

    for ep in episodes {
        let discrete = discretize_sequence(&ep.observations(), stats);
        let states: Vec<usize> = ep.samples.iter().map(|(_, y)| state_of(*y)).collect();
        init_count[states[0]] += 1.0;
        for t in 1..states.len() {
            trans_count[states[t - 1]][states[t]] += 1.0;
        }
        for (t, d) in discrete.iter().enumerate() {
            for (ch, &code) in d.codes.iter().enumerate() {
                emit_count[states[t]][ch][code] += 1.0;
            }
        }
    }

    let init_total: f64 = init_count.iter().sum();
    let initial = [
        (init_count[0] + alpha) / (init_total + 2.0 * alpha),
        (init_count[1] + alpha) / (init_total + 2.0 * alpha),
    ];
    let mut transition = [[0.0; 2]; 2];
    for from in 0..2 {
        let row_total: f64 = trans_count[from].iter().sum();
        for to in 0..2 {
            transition[from][to] = (trans_count[from][to] + alpha) / (row_total + 2.0 * alpha);
        }
    }
    let emission = emit_count
        .into_iter()
        .map(|per_state| {
            per_state
                .into_iter()
                .map(|counts| {
                    let total: f64 = counts.iter().sum();
                    let card = counts.len() as f64;
                    counts
                        .into_iter()
                        .map(|c| (c + alpha) / (total + card * alpha))
                        .collect()
                })
                .collect()
        })
        .collect();

    HmmModel {
        anomaly_class: class,
        initial,
        transition,
        emission,
    }
}

impl HmmBank {
    /// Scores the sequence under every model, selects the best-fitting one
    /// (ties break in the fixed class order LOC < DIS < UNB), Viterbi-decodes
    /// under it, and maps the states back to labels.
    pub fn classify_sequence(&self, obs: &[Observation]) -> Result<Vec<AnomalyClass>> {
        if obs.is_empty() {
            return Err(Error::EmptyInput("classify_sequence on empty sequence".into()));
        }
        let discrete = discretize_sequence(obs, &self.stats);
        let mut best: Option<(f64, &HmmModel)> = None;
        for model in &self.models {
            let ll = model.log_likelihood(&discrete)?;
            if best.as_ref().map_or(true, |(b, _)| ll > *b) {
                best = Some((ll, model));
            }
        }
        let (_, model) = best.expect("bank holds three models");
        let path = model.viterbi(&discrete)?;
        Ok(path
            .into_iter()
            .map(|s| {
                if s == STATE_SAFE {
                    AnomalyClass::Safe
                } else {
                    model.anomaly_class
                }
            })
            .collect())
    }
}
