//! Single-layer LSTM sequence classifier, built from scratch.
//!
//! The cell follows the standard gating equations — forget, input and output
//! gates through sigmoids, a tanh candidate, multiplicative cell update and
//! tanh-squashed hidden output — with a linear 4-class softmax head applied
//! at every step. Training is plain backpropagation through time with exact
//! gradients, per-episode Adam updates (batch size 1), global-norm gradient
//! clipping, and a seeded shuffle per epoch. Everything is double precision
//! and deterministic given the seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::{AnomalyClass, Episode};
use crate::error::{Error, Result};
use crate::featurize::{encode, FeatureVector, FeaturizerStats, FEATURE_WIDTH};
use crate::linalg::Matrix;
use crate::seed::derive_seed;
use crate::util::{logsumexp, macro_f_from_counts};

/// Input width (the dense feature encoding).
pub const INPUT_WIDTH: usize = FEATURE_WIDTH;

/// Output classes (the four step labels).
pub const NUM_CLASSES: usize = 4;

/// Default hidden width.
pub const DEFAULT_HIDDEN: usize = 64;

/// Weights for one gate: recurrent matrix, input matrix, bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(hidden: usize) -> GateParams {
        GateParams {
            w: Matrix::zeros(hidden, hidden),
            u: Matrix::zeros(hidden, INPUT_WIDTH),
            b: vec![0.0; hidden],
        }
    }

    /// Gate pre-activation: `w h + u x + b`.
    fn preactivation(&self, h: &[f64], x: &[f64]) -> Vec<f64> {
        let mut a = self.b.clone();
        self.w.matvec_acc(h, &mut a);
        self.u.matvec_acc(x, &mut a);
        a
    }
}

/// All trainable parameters of the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub hidden: usize,
    pub forget: GateParams,
    pub input: GateParams,
    pub cell: GateParams,
    pub output: GateParams,
    /// Output head: logits = head_w * h + head_b.
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

/// Cell and hidden state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> LstmState {
        LstmState {
            c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// Activations cached by one step for backpropagation through time.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    /// Uniform initialization in `[-k, k]` with `k = 1/sqrt(hidden)`; the
    /// forget-gate bias starts at +1 so early gradients flow.
    pub fn init(hidden: usize, seed: u64) -> LstmParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1.0 / (hidden as f64).sqrt();
        let mut mat = |rows: usize, cols: usize| {
            Matrix::from_fn(rows, cols, |_, _| rng.random_range(-k..k))
        };
        let mut gate = |forget_bias: f64| {
            let w = mat(hidden, hidden);
            let u = mat(hidden, INPUT_WIDTH);
            GateParams {
                w,
                u,
                b: vec![forget_bias; hidden],
            }
        };
        let forget = gate(1.0);
        let input = gate(0.0);
        let cell = gate(0.0);
        let output = gate(0.0);
        let head_w = mat(NUM_CLASSES, hidden);
        LstmParams {
            hidden,
            forget,
            input,
            cell,
            output,
            head_w,
            head_b: vec![0.0; NUM_CLASSES],
        }
    }

    fn zeros_like(&self) -> LstmParams {
        LstmParams {
            hidden: self.hidden,
            forget: GateParams::zeros(self.hidden),
            input: GateParams::zeros(self.hidden),
            cell: GateParams::zeros(self.hidden),
            output: GateParams::zeros(self.hidden),
            head_w: Matrix::zeros(NUM_CLASSES, self.hidden),
            head_b: vec![0.0; NUM_CLASSES],
        }
    }

    /// All parameter tensors as flat slices, in a fixed order.
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(14);
        for gate in [&self.forget, &self.input, &self.cell, &self.output] {
            v.push(gate.w.data());
            v.push(gate.u.data());
            v.push(&gate.b[..]);
        }
        v.push(self.head_w.data());
        v.push(&self.head_b[..]);
        v
    }

    fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for gate in [
            &mut self.forget,
            &mut self.input,
            &mut self.cell,
            &mut self.output,
        ] {
            f(gate.w.data_mut());
            f(gate.u.data_mut());
            f(&mut gate.b);
        }
        f(self.head_w.data_mut());
        f(&mut self.head_b);
    }

    /// Total number of scalar parameters.
    pub fn flat_len(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Reads one scalar parameter by flat index (gradient-check helper).
    pub fn get_flat(&self, idx: usize) -> f64 {
        let mut remaining = idx;
        for t in self.tensors() {
            if remaining < t.len() {
                return t[remaining];
            }
            remaining -= t.len();
        }
        panic!("flat index out of range")
    }

    /// Adds `delta` to one scalar parameter by flat index.
    pub fn add_flat(&mut self, idx: usize, delta: f64) {
        let mut remaining = idx;
        let mut done = false;
        self.for_each_tensor_mut(|t| {
            if !done {
                if remaining < t.len() {
                    t[remaining] += delta;
                    done = true;
                } else {
                    remaining -= t.len();
                }
            }
        });
        assert!(done, "flat index in range");
    }
}

/// One cell update. Returns the new state and the cached activations.
pub fn lstm_step(
    params: &LstmParams,
    state: &LstmState,
    x: &FeatureVector,
) -> Result<(LstmState, StepCache)> {
    let xv = &x.values;
    let f: Vec<f64> = params
        .forget
        .preactivation(&state.h, xv)
        .into_iter()
        .map(sigmoid)
        .collect();
    let i: Vec<f64> = params
        .input
        .preactivation(&state.h, xv)
        .into_iter()
        .map(sigmoid)
        .collect();
    let g: Vec<f64> = params
        .cell
        .preactivation(&state.h, xv)
        .into_iter()
        .map(f64::tanh)
        .collect();
    let o: Vec<f64> = params
        .output
        .preactivation(&state.h, xv)
        .into_iter()
        .map(sigmoid)
        .collect();
    let c: Vec<f64> = (0..params.hidden)
        .map(|k| f[k] * state.c[k] + i[k] * g[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..params.hidden).map(|k| o[k] * tanh_c[k]).collect();
    if h.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LSTM state".into()));
    }
    let new_state = LstmState {
        c: c.clone(),
        h: h.clone(),
    };
    let cache = StepCache {
        x: xv.clone(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        f,
        i,
        g,
        o,
        tanh_c,
        h,
    };
    Ok((new_state, cache))
}

fn log_softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let lse = logsumexp(logits);
    let mut out = [0.0; NUM_CLASSES];
    for (slot, l) in out.iter_mut().zip(logits) {
        *slot = l - lse;
    }
    out
}

fn head_logits(params: &LstmParams, h: &[f64]) -> [f64; NUM_CLASSES] {
    let mut buf = params.head_b.clone();
    params.head_w.matvec_acc(h, &mut buf);
    let mut logits = [0.0; NUM_CLASSES];
    logits.copy_from_slice(&buf);
    logits
}

/// Runs the recurrence over a sequence; returns per-step class
/// log-probabilities and the caches needed for BPTT. Step `t` depends only
/// on inputs up to `t`.
pub fn forward_sequence(
    params: &LstmParams,
    xs: &[FeatureVector],
) -> Result<(Vec<[f64; NUM_CLASSES]>, Vec<StepCache>)> {
    if xs.is_empty() {
        return Err(Error::EmptyInput("forward on empty sequence".into()));
    }
    let mut state = LstmState::zeros(params.hidden);
    let mut log_probs = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    for x in xs {
        let (next, cache) = lstm_step(params, &state, x)?;
        log_probs.push(log_softmax(&head_logits(params, &next.h)));
        caches.push(cache);
        state = next;
    }
    Ok((log_probs, caches))
}

/// Gradients have the same shape as the parameters.
pub type LstmGrads = LstmParams;

/// Mean per-step cross-entropy of the gold labels plus full BPTT gradients.
pub fn loss_and_gradients(
    params: &LstmParams,
    xs: &[FeatureVector],
    golds: &[usize],
) -> Result<(f64, LstmGrads)> {
    if golds.len() != xs.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} inputs",
            golds.len(),
            xs.len()
        )));
    }
    let (log_probs, caches) = forward_sequence(params, xs)?;
    backward(params, &log_probs, &caches, golds)
}

/// BPTT given the forward pass outputs.
fn backward(
    params: &LstmParams,
    log_probs: &[[f64; NUM_CLASSES]],
    caches: &[StepCache],
    golds: &[usize],
) -> Result<(f64, LstmGrads)> {
    let n = caches.len();
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    let mut grads = params.zeros_like();
    let hidden = params.hidden;
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut da_f = vec![0.0; hidden];
    let mut da_i = vec![0.0; hidden];
    let mut da_g = vec![0.0; hidden];
    let mut da_o = vec![0.0; hidden];

    for t in (0..n).rev() {
        let cache = &caches[t];
        loss -= log_probs[t][golds[t]] * scale;

        // softmax + cross-entropy
        let mut dlogit = [0.0; NUM_CLASSES];
        for k in 0..NUM_CLASSES {
            dlogit[k] = log_probs[t][k].exp() * scale;
        }
        dlogit[golds[t]] -= scale;
        grads.head_w.add_outer(&dlogit, &cache.h);
        for (gb, dl) in grads.head_b.iter_mut().zip(&dlogit) {
            *gb += dl;
        }
        let mut dh = dh_next;
        params.head_w.tmatvec_acc(&dlogit, &mut dh);

        // through h = o * tanh(c)
        for k in 0..hidden {
            let do_k = dh[k] * cache.tanh_c[k];
            let dc_k = dc_next[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            let df_k = dc_k * cache.c_prev[k];
            let di_k = dc_k * cache.g[k];
            let dg_k = dc_k * cache.i[k];
            dc_next[k] = dc_k * cache.f[k];
            da_f[k] = df_k * cache.f[k] * (1.0 - cache.f[k]);
            da_i[k] = di_k * cache.i[k] * (1.0 - cache.i[k]);
            da_g[k] = dg_k * (1.0 - cache.g[k] * cache.g[k]);
            da_o[k] = do_k * cache.o[k] * (1.0 - cache.o[k]);
        }

        let mut dh_prev = vec![0.0; hidden];
        for (gate_params, gate_grads, da) in [
            (&params.forget, &mut grads.forget, &da_f),
            (&params.input, &mut grads.input, &da_i),
            (&params.cell, &mut grads.cell, &da_g),
            (&params.output, &mut grads.output, &da_o),
        ] {
            gate_grads.w.add_outer(da, &cache.h_prev);
            gate_grads.u.add_outer(da, &cache.x);
            for (gb, d) in gate_grads.b.iter_mut().zip(da) {
                *gb += d;
            }
            gate_params.w.tmatvec_acc(da, &mut dh_prev);
        }
        dh_next = dh_prev;
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite("LSTM loss".into()));
    }
    Ok((loss, grads))
}

/// Adam optimizer state (first/second moments per parameter tensor).
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &LstmParams, lr: f64) -> AdamState {
        let m: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        let v = m.clone();
        AdamState {
            m,
            v,
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update.
    pub fn update(&mut self, params: &mut LstmParams, grads: &LstmGrads) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let grad_slices = grads.tensors();
        let mut k = 0;
        let (m, v) = (&mut self.m, &mut self.v);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.lr);
        params.for_each_tensor_mut(|t| {
            let gm = &mut m[k];
            let gv = &mut v[k];
            let gs = grad_slices[k];
            for j in 0..t.len() {
                let g = gs[j];
                gm[j] = b1 * gm[j] + (1.0 - b1) * g;
                gv[j] = b2 * gv[j] + (1.0 - b2) * g * g;
                let mhat = gm[j] / bc1;
                let vhat = gv[j] / bc2;
                t[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
            k += 1;
        });
    }
}

/// Scales the gradient set so its global Euclidean norm is at most `clip`.
fn clip_global_norm(grads: &mut LstmGrads, clip: f64) {
    let sq: f64 = grads
        .tensors()
        .iter()
        .map(|t| t.iter().map(|g| g * g).sum::<f64>())
        .sum();
    let norm = sq.sqrt();
    if norm > clip && norm > 0.0 {
        let s = clip / norm;
        grads.for_each_tensor_mut(|t| t.iter_mut().for_each(|g| *g *= s));
    }
}

/// Training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstmTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub init_seed: u64,
    pub grad_clip: f64,
}

impl Default for LstmTrainConfig {
    fn default() -> Self {
        LstmTrainConfig {
            epochs: 500,
            lr: 0.001,
            hidden: DEFAULT_HIDDEN,
            init_seed: 0,
            grad_clip: 5.0,
        }
    }
}

/// One row of the training curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochPoint {
    pub epoch: usize,
    /// Mean per-episode loss over the epoch.
    pub loss: f64,
    /// Macro F-score of the predictions made during the epoch's forward
    /// passes (an online estimate: the parameters move within the epoch).
    pub f_score: f64,
}

/// Trained parameters bundled with the featurization stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub params: LstmParams,
    pub stats: FeaturizerStats,
    pub config: LstmTrainConfig,
}

/// Trains with per-episode Adam updates and a seeded shuffle per epoch.
/// Deterministic given the config and data order.
pub fn train(
    train_episodes: &[Episode],
    stats: &FeaturizerStats,
    config: &LstmTrainConfig,
) -> Result<(LstmModel, Vec<EpochPoint>)> {
    if train_episodes.is_empty() {
        return Err(Error::EmptyInput("LSTM training set is empty".into()));
    }
    let encoded: Vec<(Vec<FeatureVector>, Vec<usize>)> = train_episodes
        .iter()
        .map(|ep| {
            let xs: Vec<FeatureVector> =
                ep.samples.iter().map(|(o, _)| encode(o, stats)).collect();
            let ys: Vec<usize> = ep.samples.iter().map(|(_, y)| y.index()).collect();
            (xs, ys)
        })
        .collect();

    let mut params = LstmParams::init(config.hidden, derive_seed(config.init_seed, 0));
    let mut adam = AdamState::new(&params, config.lr);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.init_seed, 1));
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut confusion = [[0usize; 4]; 4];
        for &idx in &order {
            let (xs, ys) = &encoded[idx];
            let (log_probs, caches) =
                forward_sequence(&params, xs).map_err(|e| Error::Divergence {
                    epoch,
                    message: e.to_string(),
                })?;
            // the epoch F-score comes straight from these forward passes
            for (lp, &gold) in log_probs.iter().zip(ys) {
                confusion[gold][argmax_class(lp).index()] += 1;
            }
            let (loss, mut grads) =
                backward(&params, &log_probs, &caches, ys).map_err(|e| Error::Divergence {
                    epoch,
                    message: e.to_string(),
                })?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: "non-finite loss".into(),
                });
            }
            epoch_loss += loss;
            clip_global_norm(&mut grads, config.grad_clip);
            adam.update(&mut params, &grads);
        }
        curve.push(EpochPoint {
            epoch,
            loss: epoch_loss / encoded.len() as f64,
            f_score: macro_f_from_counts(&confusion),
        });
    }
    Ok((
        LstmModel {
            params,
            stats: stats.clone(),
            config: *config,
        },
        curve,
    ))
}

impl LstmModel {
    /// Per-step argmax labels for one episode; ties break toward the lowest
    /// class index.
    pub fn predict_labels(&self, episode: &Episode) -> Result<Vec<AnomalyClass>> {
        let xs: Vec<FeatureVector> = episode
            .samples
            .iter()
            .map(|(o, _)| encode(o, &self.stats))
            .collect();
        self.predict_encoded(&xs)
    }

    /// Per-step argmax labels for an encoded sequence.
    pub fn predict_encoded(&self, xs: &[FeatureVector]) -> Result<Vec<AnomalyClass>> {
        let (log_probs, _) = forward_sequence(&self.params, xs)?;
        Ok(log_probs.iter().map(|lp| argmax_class(lp)).collect())
    }
}

fn argmax_class(log_probs: &[f64; NUM_CLASSES]) -> AnomalyClass {
    let mut best = 0;
    for k in 1..NUM_CLASSES {
        if log_probs[k] > log_probs[best] {
            best = k;
        }
    }
    AnomalyClass::from_index(best).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::AnomalyClass as AC;
    use crate::featurize::fit_stats;
    use crate::sim::{generate_episode, ScenarioKind, ScenarioSpec};
    use rand::Rng;

    fn random_inputs(rng: &mut ChaCha8Rng, len: usize) -> Vec<FeatureVector> {
        (0..len)
            .map(|_| FeatureVector {
                values: (0..INPUT_WIDTH).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect()
    }

    fn zero_params(hidden: usize) -> LstmParams {
        let mut p = LstmParams::init(hidden, 0);
        p.for_each_tensor_mut(|t| t.iter_mut().for_each(|v| *v = 0.0));
        p
    }

    #[test]
    fn zero_params_step_closed_form() {
        let hidden = 6;
        let params = zero_params(hidden);
        let state = LstmState::zeros(hidden);
        let x = FeatureVector {
            values: vec![0.3; INPUT_WIDTH],
        };
        let (next, cache) = lstm_step(&params, &state, &x).unwrap();
        assert!(cache.f.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(cache.i.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(cache.o.iter().all(|&v| (v - 0.5).abs() < 1e-15));
        assert!(cache.g.iter().all(|&v| v == 0.0));
        assert!(next.c.iter().all(|&v| v == 0.0));
        assert!(next.h.iter().all(|&v| v == 0.0));

        // with a pre-existing cell state v: c = v/2, h = tanh(v/2)/2
        let mut carry = LstmState::zeros(hidden);
        for (k, c) in carry.c.iter_mut().enumerate() {
            *c = 0.2 * (k as f64 + 1.0);
        }
        let (next, _) = lstm_step(&params, &carry, &x).unwrap();
        for k in 0..hidden {
            let v = carry.c[k];
            assert!((next.c[k] - 0.5 * v).abs() < 1e-15);
            assert!((next.h[k] - 0.5 * (0.5 * v).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn gates_and_hidden_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = LstmParams::init(8, 99);
        let mut state = LstmState::zeros(8);
        for t in 0..50 {
            let x = &random_inputs(&mut rng, 1)[0];
            let (next, cache) = lstm_step(&params, &state, x).unwrap();
            for v in cache.f.iter().chain(&cache.i).chain(&cache.o) {
                assert!(*v > 0.0 && *v < 1.0, "gate out of range at step {t}");
            }
            for v in &cache.g {
                assert!(v.abs() < 1.0);
            }
            for v in &next.h {
                assert!(v.abs() < 1.0, "|h| must stay below 1");
            }
            state = next;
        }
    }

    #[test]
    fn zero_params_forward_is_uniform_and_normalized() {
        let params = zero_params(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = random_inputs(&mut rng, 7);
        let (log_probs, _) = forward_sequence(&params, &xs).unwrap();
        for lp in &log_probs {
            for v in lp {
                assert!((v - (0.25f64).ln()).abs() < 1e-12);
            }
            assert!(logsumexp(lp).abs() < 1e-10);
        }
    }

    #[test]
    fn log_probs_normalize_for_random_params() {
        let params = LstmParams::init(6, 17);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs = random_inputs(&mut rng, 12);
        let (log_probs, _) = forward_sequence(&params, &xs).unwrap();
        for lp in &log_probs {
            assert!(logsumexp(lp).abs() < 1e-10);
        }
    }

    #[test]
    fn outputs_are_causal() {
        let params = LstmParams::init(6, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs = random_inputs(&mut rng, 6);
        let (base, _) = forward_sequence(&params, &xs).unwrap();
        let mut perturbed = xs.clone();
        perturbed[4].values[0] += 10.0;
        let (after, _) = forward_sequence(&params, &perturbed).unwrap();
        for t in 0..4 {
            assert_eq!(base[t], after[t], "step {t} must ignore future inputs");
        }
        assert_ne!(base[4], after[4]);
    }

    /// Independent scalar re-implementation of the recurrence, no matrix
    /// helpers, used as the forward oracle.
    fn naive_forward(params: &LstmParams, xs: &[FeatureVector]) -> Vec<[f64; NUM_CLASSES]> {
        let hidden = params.hidden;
        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut out = Vec::new();
        let gate_val = |gp: &GateParams, k: usize, h: &[f64], x: &[f64]| -> f64 {
            let mut a = gp.b[k];
            for j in 0..hidden {
                a += gp.w.row(k)[j] * h[j];
            }
            for (j, xv) in x.iter().enumerate() {
                a += gp.u.row(k)[j] * xv;
            }
            a
        };
        for x in xs {
            let mut new_h = vec![0.0; hidden];
            let mut new_c = vec![0.0; hidden];
            for k in 0..hidden {
                let f = sigmoid(gate_val(&params.forget, k, &h, &x.values));
                let i = sigmoid(gate_val(&params.input, k, &h, &x.values));
                let g = gate_val(&params.cell, k, &h, &x.values).tanh();
                let o = sigmoid(gate_val(&params.output, k, &h, &x.values));
                new_c[k] = f * c[k] + i * g;
                new_h[k] = o * new_c[k].tanh();
            }
            h = new_h;
            c = new_c;
            let mut logits = [0.0; NUM_CLASSES];
            for (cls, logit) in logits.iter_mut().enumerate() {
                *logit = params.head_b[cls];
                for j in 0..hidden {
                    *logit += params.head_w.row(cls)[j] * h[j];
                }
            }
            let lse = logsumexp(&logits);
            let mut lp = [0.0; NUM_CLASSES];
            for (slot, l) in lp.iter_mut().zip(&logits) {
                *slot = l - lse;
            }
            out.push(lp);
        }
        out
    }

    #[test]
    fn forward_matches_naive_recomputation() {
        let params = LstmParams::init(7, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let xs = random_inputs(&mut rng, 3);
        let (fast, _) = forward_sequence(&params, &xs).unwrap();
        let slow = naive_forward(&params, &xs);
        for (a, b) in fast.iter().zip(&slow) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_params_loss_is_log4_and_step_duplication_invariant() {
        let params = zero_params(5);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs = random_inputs(&mut rng, 9);
        let ys: Vec<usize> = (0..9).map(|t| t % 4).collect();
        let (loss, _) = loss_and_gradients(&params, &xs, &ys).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);

        let mut xs2 = Vec::new();
        let mut ys2 = Vec::new();
        for (x, y) in xs.iter().zip(&ys) {
            xs2.push(x.clone());
            xs2.push(x.clone());
            ys2.push(*y);
            ys2.push(*y);
        }
        let (loss2, _) = loss_and_gradients(&params, &xs2, &ys2).unwrap();
        assert!((loss2 - loss).abs() < 1e-12);
    }

    #[test]
    fn bptt_matches_central_finite_differences() {
        let hidden = 5;
        let params = LstmParams::init(hidden, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs = random_inputs(&mut rng, 4);
        let ys = vec![0usize, 2, 1, 3];
        let (_, grads) = loss_and_gradients(&params, &xs, &ys).unwrap();
        let eps = 1e-5;
        let mut max_rel = 0.0f64;
        for _ in 0..30 {
            let j = rng.random_range(0..params.flat_len());
            let mut plus = params.clone();
            plus.add_flat(j, eps);
            let mut minus = params.clone();
            minus.add_flat(j, -eps);
            let (fp, _) = loss_and_gradients(&plus, &xs, &ys).unwrap();
            let (fm, _) = loss_and_gradients(&minus, &xs, &ys).unwrap();
            let numeric = (fp - fm) / (2.0 * eps);
            let analytic = grads.get_flat(j);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel < 1e-4, "max relative error {max_rel}");
    }

    #[test]
    fn single_episode_is_memorized() {
        let spec = ScenarioSpec::new(ScenarioKind::PickObject, AC::Loc, 12, 1.0);
        let ep = generate_episode(&spec).unwrap();
        let stats = fit_stats(std::slice::from_ref(&ep)).unwrap();
        let config = LstmTrainConfig {
            epochs: 500,
            hidden: 32,
            init_seed: 1,
            ..LstmTrainConfig::default()
        };
        let (_, curve) = train(std::slice::from_ref(&ep), &stats, &config).unwrap();
        let final_loss = curve.last().unwrap().loss;
        assert!(
            final_loss < 0.01,
            "single-episode training must memorize, got loss {final_loss}"
        );
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let spec = ScenarioSpec::new(ScenarioKind::PickObject, AC::Dis, 3, 1.0);
        let a = generate_episode(&spec).unwrap();
        let spec_b = ScenarioSpec::new(ScenarioKind::PushObject, AC::Loc, 4, 1.0);
        let b = generate_episode(&spec_b).unwrap();
        let eps = vec![a, b];
        let stats = fit_stats(&eps).unwrap();
        let config = LstmTrainConfig {
            epochs: 3,
            hidden: 8,
            init_seed: 5,
            ..LstmTrainConfig::default()
        };
        let (m1, c1) = train(&eps, &stats, &config).unwrap();
        let (m2, c2) = train(&eps, &stats, &config).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(c1.len(), c2.len());
        for (p1, p2) in c1.iter().zip(&c2) {
            assert_eq!(p1.loss, p2.loss);
        }
        let other = LstmTrainConfig {
            init_seed: 6,
            ..config
        };
        let (m3, _) = train(&eps, &stats, &other).unwrap();
        assert_ne!(m1.params, m3.params);
    }

    #[test]
    fn zero_params_predict_all_safe_and_bias_shift_invariance() {
        let spec = ScenarioSpec::new(ScenarioKind::PickObject, AC::Safe, 8, 1.0);
        let ep = generate_episode(&spec).unwrap();
        let stats = fit_stats(std::slice::from_ref(&ep)).unwrap();
        let model = LstmModel {
            params: zero_params(6),
            stats: stats.clone(),
            config: LstmTrainConfig::default(),
        };
        let labels = model.predict_labels(&ep).unwrap();
        assert!(labels.iter().all(|y| *y == AC::Safe));

        // shifting every logit by the same constant cannot change the argmax
        let mut shifted = LstmModel {
            params: LstmParams::init(6, 77),
            stats,
            config: LstmTrainConfig::default(),
        };
        let base = shifted.clone();
        shifted
            .params
            .head_b
            .iter_mut()
            .for_each(|b| *b += 3.7);
        assert_eq!(
            base.predict_labels(&ep).unwrap(),
            shifted.predict_labels(&ep).unwrap()
        );
    }
}
