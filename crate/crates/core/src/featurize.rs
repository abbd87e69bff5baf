//! Observation featurization.
//!
//! Two views of the same observation are produced from statistics fitted on
//! training data only:
//!
//! * [`encode`] — a fixed-width 43-dim real vector for the LSTM: three
//!   min-max-normalized continuous channels, the clipped/scaled target
//!   offset, and one-hot blocks for sound (3), existence (3) and the global
//!   action phase (33).
//! * [`discretize`] — a 7-channel symbol tuple for the HMM and CRF: the four
//!   continuous channels quantized into 4 equal-count quantile bins, the
//!   three categorical channels passed through verbatim.

use serde::{Deserialize, Serialize};

use crate::episode::{Episode, ExistenceBelief, Observation, SoundClass, PHASE_VOCAB_SIZE};
use crate::error::{Error, Result};

/// Width of the dense feature vector: 3 + 1 + 3 + 3 + 33.
pub const FEATURE_WIDTH: usize = 43;

/// Number of discrete channels (4 continuous + sound + existence + phase).
pub const CHANNEL_COUNT: usize = 7;

/// Per-channel code cardinalities for the discrete view. Continuous channels
/// always use 4 bin ids even if the fitted cut points collapse.
pub const CHANNEL_CARDINALITIES: [usize; CHANNEL_COUNT] = [4, 4, 4, 4, 3, 3, PHASE_VOCAB_SIZE];

/// Stable channel names (used in CRF feature identity strings and reports).
pub const CHANNEL_NAMES: [&str; CHANNEL_COUNT] = [
    "laser",
    "grip_pos",
    "grip_force",
    "offset",
    "sound",
    "existence",
    "phase",
];

/// The target offset is clipped to this magnitude (meters) before being
/// scaled to `[-1, 1]` in the dense encoding.
pub const OFFSET_CLIP_M: f64 = 0.3;

const CONTINUOUS_CHANNELS: usize = 4;

fn continuous_value(obs: &Observation, channel: usize) -> f64 {
    match channel {
        0 => obs.laser_distance_m,
        1 => obs.gripper_position,
        2 => obs.gripper_force,
        3 => obs.target_offset_m,
        _ => unreachable!("continuous channel index out of range"),
    }
}

/// Fixed-width dense encoding of one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Per-channel symbol codes for one observation, ordered
/// laser, grip_pos, grip_force, offset, sound, existence, phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DiscreteObservation {
    pub codes: [usize; CHANNEL_COUNT],
}

/// Statistics for one continuous channel, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub min: f64,
    pub max: f64,
    /// Strictly increasing quantile cut points (25/50/75 percentiles, with
    /// duplicates and cuts at or below the minimum removed). A value lands in
    /// bin `#{cuts <= value}`, so ties go to the higher bin.
    pub cuts: Vec<f64>,
    /// True when the channel took a single value in training; such channels
    /// encode to 0.5 and discretize to bin 0.
    pub constant: bool,
}

/// Featurization statistics, fitted on a training set and carried inside
/// every trained model so the model file is self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizerStats {
    pub channels: Vec<ChannelStats>,
}

/// Linear-interpolation quantile of a sorted slice (the same convention as
/// numpy's default).
fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < n {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

/// Fits min/max and 4-bin quantile cut points for every continuous channel
/// over all observations in `train`. Deterministic and invariant to the
/// order of episodes and samples.
pub fn fit_stats(train: &[Episode]) -> Result<FeaturizerStats> {
    let total: usize = train.iter().map(|e| e.len()).sum();
    if total == 0 {
        return Err(Error::EmptyInput(
            "fit_stats requires at least one observation".into(),
        ));
    }
    let mut channels = Vec::with_capacity(CONTINUOUS_CHANNELS);
    for ch in 0..CONTINUOUS_CHANNELS {
        let mut values: Vec<f64> = Vec::with_capacity(total);
        for ep in train {
            for (obs, _) in &ep.samples {
                values.push(continuous_value(obs, ch));
            }
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let min = values[0];
        let max = values[values.len() - 1];
        let constant = min == max;
        let mut cuts = Vec::new();
        if !constant {
            for p in [0.25, 0.5, 0.75] {
                let c = quantile_linear(&values, p);
                if c > min && cuts.last().map_or(true, |&prev| c > prev) {
                    cuts.push(c);
                }
            }
        }
        channels.push(ChannelStats {
            min,
            max,
            cuts,
            constant,
        });
    }
    Ok(FeaturizerStats { channels })
}

fn one_hot(out: &mut Vec<f64>, len: usize, hot: usize) {
    debug_assert!(hot < len);
    for i in 0..len {
        out.push(if i == hot { 1.0 } else { 0.0 });
    }
}

/// Dense 43-dim encoding. Total on valid observations; out-of-range
/// continuous values are clipped to the fitted range before scaling.
pub fn encode(obs: &Observation, stats: &FeaturizerStats) -> FeatureVector {
    let mut values = Vec::with_capacity(FEATURE_WIDTH);
    // min-max channels: laser, gripper position, gripper force
    for ch in 0..3 {
        let st = &stats.channels[ch];
        let v = continuous_value(obs, ch);
        values.push(if st.constant {
            0.5
        } else {
            (v.clamp(st.min, st.max) - st.min) / (st.max - st.min)
        });
    }
    // offset: fixed clip and scale, independent of the fitted range
    values.push(obs.target_offset_m.clamp(-OFFSET_CLIP_M, OFFSET_CLIP_M) / OFFSET_CLIP_M);
    one_hot(&mut values, SoundClass::ALL.len(), obs.sound.code());
    one_hot(
        &mut values,
        ExistenceBelief::ALL.len(),
        obs.target_existence.code(),
    );
    one_hot(&mut values, PHASE_VOCAB_SIZE, obs.action_phase.global_index());
    debug_assert_eq!(values.len(), FEATURE_WIDTH);
    FeatureVector { values }
}

fn bin_of(v: f64, st: &ChannelStats) -> usize {
    if st.constant {
        return 0;
    }
    st.cuts.iter().take_while(|&&c| v >= c).count()
}

/// Discrete 7-channel view: quantile bin for each continuous channel,
/// categorical channels verbatim.
pub fn discretize(obs: &Observation, stats: &FeaturizerStats) -> DiscreteObservation {
    let mut codes = [0usize; CHANNEL_COUNT];
    for ch in 0..CONTINUOUS_CHANNELS {
        codes[ch] = bin_of(continuous_value(obs, ch), &stats.channels[ch]);
    }
    codes[4] = obs.sound.code();
    codes[5] = obs.target_existence.code();
    codes[6] = obs.action_phase.global_index();
    DiscreteObservation { codes }
}

/// Discretizes a whole observation sequence.
pub fn discretize_sequence(obs: &[Observation], stats: &FeaturizerStats) -> Vec<DiscreteObservation> {
    obs.iter().map(|o| discretize(o, stats)).collect()
}
