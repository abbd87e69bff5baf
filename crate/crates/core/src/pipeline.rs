//! Execution pipeline: buffer observations, trigger identification on
//! detection, and reduce per-step labels to a single cause.
//!
//! The flow mirrors plan execution on the robot: observations accumulate
//! step by step; when the detector fires at step `T` the labeler sees the
//! buffered history `x_0..=x_T` and the majority label wins. If detection
//! never fires the whole run is safe by definition and the labeler is not
//! consulted. Raw per-modality streams with their own clocks are aligned
//! onto the 10 Hz grid by zero-order hold before any of this.

use crate::crf::CrfModel;
use crate::episode::{
    ActionKind, ActionPhase, AnomalyClass, Episode, ExistenceBelief, Observation, SoundClass,
    LASER_MAX_RANGE_M, SAMPLE_RATE_HZ,
};
use crate::error::{Error, Result};
use crate::featurize::discretize_sequence;
use crate::hmm::HmmBank;
use crate::lstm::LstmModel;

/// Anything that can label a buffered observation history. Implementations
/// are pure and deterministic.
pub trait Labeler {
    fn label_sequence(&self, obs: &[Observation]) -> Result<Vec<AnomalyClass>>;
}

impl Labeler for HmmBank {
    fn label_sequence(&self, obs: &[Observation]) -> Result<Vec<AnomalyClass>> {
        self.classify_sequence(obs)
    }
}

impl Labeler for CrfModel {
    fn label_sequence(&self, obs: &[Observation]) -> Result<Vec<AnomalyClass>> {
        self.decode(&discretize_sequence(obs, &self.stats))
    }
}

impl Labeler for LstmModel {
    fn label_sequence(&self, obs: &[Observation]) -> Result<Vec<AnomalyClass>> {
        let xs: Vec<_> = obs
            .iter()
            .map(|o| crate::featurize::encode(o, &self.stats))
            .collect();
        self.predict_encoded(&xs)
    }
}

/// Decides whether (and when) an anomaly flag fires for an episode. Fires at
/// most once.
pub trait Detector {
    fn detection_step(&self, episode: &Episode) -> Option<usize>;
}

/// Replays the detection step recorded in the episode, standing in for the
/// external detection procedure.
pub struct GroundTruthDetector;

impl Detector for GroundTruthDetector {
    fn detection_step(&self, episode: &Episode) -> Option<usize> {
        episode.detection_step
    }
}

/// A detector that never fires (useful for safe baselines and tests).
pub struct NeverDetector;

impl Detector for NeverDetector {
    fn detection_step(&self, _episode: &Episode) -> Option<usize> {
        None
    }
}

/// Outcome of identifying one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationResult {
    /// Per-step labels over the consumed prefix (up to the detection step,
    /// or the whole episode when detection never fires).
    pub labels: Vec<AnomalyClass>,
    /// Majority-vote class over `labels`.
    pub final_class: AnomalyClass,
    /// Vote counts indexed by [`AnomalyClass::index`]; they sum to
    /// `labels.len()`.
    pub votes: [usize; 4],
    pub detection_step: Option<usize>,
}

/// Majority vote over a label sequence. Ties between SAFE and an anomaly
/// class go to the anomaly (identification only runs after detection); ties
/// among anomaly classes resolve in the fixed order LOC < DIS < UNB.
pub fn majority_vote(labels: &[AnomalyClass]) -> Result<AnomalyClass> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("majority_vote on empty labels".into()));
    }
    let mut counts = [0usize; 4];
    for y in labels {
        counts[y.index()] += 1;
    }
    let max = *counts.iter().max().expect("non-empty");
    for class in AnomalyClass::ANOMALIES {
        if counts[class.index()] == max {
            return Ok(class);
        }
    }
    Ok(AnomalyClass::Safe)
}

/// Replays one episode through the identification loop. Observations after
/// the detection step are never consumed; a detector firing beyond the
/// episode length is an error.
pub fn run_episode(
    labeler: &dyn Labeler,
    detector: &dyn Detector,
    episode: &Episode,
) -> Result<IdentificationResult> {
    let detection = detector.detection_step(episode);
    let labels = match detection {
        Some(t) => {
            if t >= episode.len() {
                return Err(Error::InvalidInput(format!(
                    "detector fired at step {t} but the episode has {} steps",
                    episode.len()
                )));
            }
            let history: Vec<Observation> = episode.samples[..=t]
                .iter()
                .map(|(o, _)| o.clone())
                .collect();
            labeler.label_sequence(&history)?
        }
        None => vec![AnomalyClass::Safe; episode.len()],
    };
    let final_class = majority_vote(&labels)?;
    let mut votes = [0usize; 4];
    for y in &labels {
        votes[y.index()] += 1;
    }
    Ok(IdentificationResult {
        labels,
        final_class,
        votes,
        detection_step: detection,
    })
}

// ---------------------------------------------------------------------------
// Sensor fusion
// ---------------------------------------------------------------------------

/// Raw per-modality streams, each a list of (time in seconds, value) with
/// non-decreasing timestamps. The vision stream carries existence and target
/// offset together.
#[derive(Debug, Clone, Default)]
pub struct SensorStreams {
    pub laser: Vec<(f64, f64)>,
    pub gripper_position: Vec<(f64, f64)>,
    pub gripper_force: Vec<(f64, f64)>,
    pub sound: Vec<(f64, SoundClass)>,
    pub vision: Vec<(f64, (ExistenceBelief, f64))>,
    pub phase: Vec<(f64, ActionPhase)>,
}

const GRID_EPS: f64 = 1e-9;

fn check_monotone<T>(name: &str, stream: &[(f64, T)]) -> Result<()> {
    for pair in stream.windows(2) {
        if pair[1].0 < pair[0].0 {
            return Err(Error::InvalidInput(format!(
                "{name} stream is not monotone in time ({} after {})",
                pair[1].0, pair[0].0
            )));
        }
    }
    Ok(())
}

/// Last value at or before `t`, else the declared default.
fn hold<T: Clone>(stream: &[(f64, T)], t: f64, default: T) -> T {
    let mut value = default;
    for (ts, v) in stream {
        if *ts <= t + GRID_EPS {
            value = v.clone();
        } else {
            break;
        }
    }
    value
}

/// Aligns all modalities onto the 10 Hz step grid by zero-order hold.
/// Steps before a modality's first sample take that modality's default:
/// continuous channels 0, sound NoSound, existence Unknown (offset 0),
/// phase (move-towards-object, 0). The grid spans from 0 to the latest
/// timestamp of any stream; fusing an already-aligned set of streams is the
/// identity.
pub fn fuse_stream(streams: &SensorStreams) -> Result<Vec<Observation>> {
    check_monotone("laser", &streams.laser)?;
    check_monotone("gripper_position", &streams.gripper_position)?;
    check_monotone("gripper_force", &streams.gripper_force)?;
    check_monotone("sound", &streams.sound)?;
    check_monotone("vision", &streams.vision)?;
    check_monotone("phase", &streams.phase)?;

    let last_ts = [
        streams.laser.last().map(|s| s.0),
        streams.gripper_position.last().map(|s| s.0),
        streams.gripper_force.last().map(|s| s.0),
        streams.sound.last().map(|s| s.0),
        streams.vision.last().map(|s| s.0),
        streams.phase.last().map(|s| s.0),
    ]
    .into_iter()
    .flatten()
    .fold(f64::NEG_INFINITY, f64::max);
    if !last_ts.is_finite() {
        return Ok(Vec::new());
    }

    let dt = 1.0 / SAMPLE_RATE_HZ;
    let steps = ((last_ts / dt) - GRID_EPS).ceil().max(0.0) as usize + 1;
    let default_phase = ActionPhase::new(ActionKind::MoveTowardsObject, 0).expect("valid phase");

    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        let now = t as f64 * dt;
        let (existence, raw_offset) = hold(
            &streams.vision,
            now,
            (ExistenceBelief::Unknown, 0.0),
        );
        // no visual update means no offset knowledge
        let offset = if existence == ExistenceBelief::Unknown {
            0.0
        } else {
            raw_offset
        };
        out.push(Observation {
            t,
            laser_distance_m: hold(&streams.laser, now, 0.0).clamp(0.0, LASER_MAX_RANGE_M),
            gripper_position: hold(&streams.gripper_position, now, 0.0).clamp(0.0, 100.0),
            gripper_force: hold(&streams.gripper_force, now, 0.0).clamp(0.0, 100.0),
            sound: hold(&streams.sound, now, SoundClass::NoSound),
            target_existence: existence,
            target_offset_m: offset,
            action_phase: hold(&streams.phase, now, default_phase),
        });
    }
    Ok(out)
}
