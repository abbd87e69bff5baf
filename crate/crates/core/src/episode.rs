//! Data model for fused sensor observations and labeled manipulation episodes.
//!
//! An [`Episode`] is the unit the rest of the crate works on: an ordered list
//! of per-step [`Observation`]s paired with ground-truth [`AnomalyClass`]
//! labels, plus the plan that was executed and the anomaly metadata (onset
//! and detection steps). Episodes are immutable after construction and are
//! stored on disk as line-delimited JSON records (one episode per line, see
//! [`write_episodes`] / [`read_episodes`]).

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk format version written by [`write_episodes`].
pub const EPISODE_FORMAT_VERSION: u32 = 1;

/// Laser rangefinder saturation distance in meters. Readings are clamped to
/// `[0, LASER_MAX_RANGE_M]`.
pub const LASER_MAX_RANGE_M: f64 = 2.0;

/// Nominal sampling rate of the fused observation stream, in Hz. Time is an
/// integer step index everywhere; the rate is metadata only.
pub const SAMPLE_RATE_HZ: f64 = 10.0;

/// Label domain: the safe state plus the three anomaly causes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyClass {
    /// No anomaly present at this step.
    #[serde(rename = "SAFE")]
    Safe,
    /// A target object was relocated by an external agent.
    #[serde(rename = "LOC")]
    Loc,
    /// A target object was removed from the environment.
    #[serde(rename = "DIS")]
    Dis,
    /// A stacked structure collapsed due to an earlier unstable placement.
    #[serde(rename = "UNB")]
    Unb,
}

impl AnomalyClass {
    /// All four label values, in fixed index order.
    pub const ALL: [AnomalyClass; 4] = [
        AnomalyClass::Safe,
        AnomalyClass::Loc,
        AnomalyClass::Dis,
        AnomalyClass::Unb,
    ];

    /// The three anomaly causes, in the fixed tie-break order.
    pub const ANOMALIES: [AnomalyClass; 3] =
        [AnomalyClass::Loc, AnomalyClass::Dis, AnomalyClass::Unb];

    /// Dense index in `[0, 4)`; `Safe` is 0.
    pub fn index(self) -> usize {
        match self {
            AnomalyClass::Safe => 0,
            AnomalyClass::Loc => 1,
            AnomalyClass::Dis => 2,
            AnomalyClass::Unb => 3,
        }
    }

    pub fn from_index(idx: usize) -> Option<AnomalyClass> {
        AnomalyClass::ALL.get(idx).copied()
    }

    pub fn is_anomaly(self) -> bool {
        self != AnomalyClass::Safe
    }

    /// Human-readable column name used in reports.
    pub fn report_name(self) -> &'static str {
        match self {
            AnomalyClass::Safe => "Safe",
            AnomalyClass::Loc => "Location",
            AnomalyClass::Dis => "Disappearance",
            AnomalyClass::Unb => "Unbalance",
        }
    }
}

impl fmt::Display for AnomalyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnomalyClass::Safe => "SAFE",
            AnomalyClass::Loc => "LOC",
            AnomalyClass::Dis => "DIS",
            AnomalyClass::Unb => "UNB",
        };
        f.write_str(s)
    }
}

/// Primitive manipulation actions the robot can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    #[serde(rename = "move-towards-object")]
    MoveTowardsObject,
    #[serde(rename = "move-to-location")]
    MoveToLocation,
    #[serde(rename = "pick-up")]
    PickUp,
    #[serde(rename = "put-down")]
    PutDown,
    #[serde(rename = "put-down-on")]
    PutDownOn,
    #[serde(rename = "push")]
    Push,
}

impl ActionKind {
    /// All action kinds in the fixed vocabulary order used for one-hot
    /// encoding and the global phase index.
    pub const ALL: [ActionKind; 6] = [
        ActionKind::MoveTowardsObject,
        ActionKind::MoveToLocation,
        ActionKind::PickUp,
        ActionKind::PutDown,
        ActionKind::PutDownOn,
        ActionKind::Push,
    ];

    /// Number of execution phases this action expands to.
    pub fn phase_count(self) -> usize {
        match self {
            ActionKind::MoveTowardsObject | ActionKind::MoveToLocation | ActionKind::PickUp => 5,
            ActionKind::PutDown | ActionKind::PutDownOn | ActionKind::Push => 6,
        }
    }

    /// Offset of this action's phase block in the global phase vocabulary.
    fn phase_base(self) -> usize {
        let mut base = 0;
        for kind in ActionKind::ALL {
            if kind == self {
                return base;
            }
            base += kind.phase_count();
        }
        unreachable!("action kind not in ALL");
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActionKind::MoveTowardsObject => "move-towards-object",
            ActionKind::MoveToLocation => "move-to-location",
            ActionKind::PickUp => "pick-up",
            ActionKind::PutDown => "put-down",
            ActionKind::PutDownOn => "put-down-on",
            ActionKind::Push => "push",
        };
        f.write_str(s)
    }
}

/// Size of the global (action, phase) vocabulary: 5+5+5+6+6+6.
pub const PHASE_VOCAB_SIZE: usize = 33;

/// One phase of one action: the symbolic "what is the arm doing" channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ActionPhase {
    action: ActionKind,
    phase_index: usize,
}

impl ActionPhase {
    pub fn new(action: ActionKind, phase_index: usize) -> Result<ActionPhase> {
        if phase_index >= action.phase_count() {
            return Err(Error::InvalidInput(format!(
                "phase index {phase_index} out of range for {action} ({} phases)",
                action.phase_count()
            )));
        }
        Ok(ActionPhase {
            action,
            phase_index,
        })
    }

    pub fn action(self) -> ActionKind {
        self.action
    }

    pub fn phase_index(self) -> usize {
        self.phase_index
    }

    /// Dense index in `[0, PHASE_VOCAB_SIZE)` over all (action, phase) pairs,
    /// actions in vocabulary order, phases by index.
    pub fn global_index(self) -> usize {
        self.action.phase_base() + self.phase_index
    }

    /// Inverse of [`global_index`](Self::global_index).
    pub fn from_global_index(idx: usize) -> Option<ActionPhase> {
        let mut base = 0;
        for kind in ActionKind::ALL {
            let n = kind.phase_count();
            if idx < base + n {
                return Some(ActionPhase {
                    action: kind,
                    phase_index: idx - base,
                });
            }
            base += n;
        }
        None
    }
}

/// Classified microphone output for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SoundClass {
    #[serde(rename = "no-sound")]
    NoSound,
    #[serde(rename = "drop")]
    Drop,
    #[serde(rename = "ego-noise")]
    EgoNoise,
}

impl SoundClass {
    pub const ALL: [SoundClass; 3] = [SoundClass::NoSound, SoundClass::Drop, SoundClass::EgoNoise];

    /// One-hot / discrete code, ordering NoSound < Drop < EgoNoise.
    pub fn code(self) -> usize {
        match self {
            SoundClass::NoSound => 0,
            SoundClass::Drop => 1,
            SoundClass::EgoNoise => 2,
        }
    }
}

/// Belief about the tracked target object's existence in the scene.
/// `Unknown` means visual updates are suspended (arm occlusion).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExistenceBelief {
    #[serde(rename = "yes")]
    Yes,
    #[serde(rename = "no")]
    No,
    #[serde(rename = "unknown")]
    Unknown,
}

impl ExistenceBelief {
    pub const ALL: [ExistenceBelief; 3] = [
        ExistenceBelief::Yes,
        ExistenceBelief::No,
        ExistenceBelief::Unknown,
    ];

    /// One-hot / discrete code, ordering Yes < No < Unknown.
    pub fn code(self) -> usize {
        match self {
            ExistenceBelief::Yes => 0,
            ExistenceBelief::No => 1,
            ExistenceBelief::Unknown => 2,
        }
    }
}

/// One fused multi-modal sensor sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Time step index; the fused stream is sampled at 10 Hz.
    pub t: usize,
    /// Gripper-mounted laser distance to whatever is under the gripper,
    /// meters, saturating at [`LASER_MAX_RANGE_M`].
    pub laser_distance_m: f64,
    /// Gripper aperture in `[0, 100]`; 100 is fully open (8 cm).
    pub gripper_position: f64,
    /// Gripper force in `[0, 100]`, normalized from the 0-35 N sensor scale.
    pub gripper_force: f64,
    /// Classified sound for this step.
    pub sound: SoundClass,
    /// Belief about the tracked target object.
    pub target_existence: ExistenceBelief,
    /// Signed planar displacement of the target from its last commanded or
    /// known location, meters. Exactly 0 while existence is `Unknown`.
    pub target_offset_m: f64,
    /// Which (action, phase) the robot is executing.
    pub action_phase: ActionPhase,
}

impl Observation {
    /// Checks the per-observation field invariants; returns the first
    /// violation as a message.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("laser_distance_m", self.laser_distance_m),
            ("gripper_position", self.gripper_position),
            ("gripper_force", self.gripper_force),
            ("target_offset_m", self.target_offset_m),
        ] {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if !(0.0..=LASER_MAX_RANGE_M).contains(&self.laser_distance_m) {
            return Err(format!(
                "laser_distance_m {} outside [0, {LASER_MAX_RANGE_M}]",
                self.laser_distance_m
            ));
        }
        if !(0.0..=100.0).contains(&self.gripper_position) {
            return Err(format!(
                "gripper_position {} outside [0, 100]",
                self.gripper_position
            ));
        }
        if !(0.0..=100.0).contains(&self.gripper_force) {
            return Err(format!(
                "gripper_force {} outside [0, 100]",
                self.gripper_force
            ));
        }
        if self.target_existence == ExistenceBelief::Unknown && self.target_offset_m != 0.0 {
            return Err(format!(
                "target_offset_m {} must be 0 while existence is unknown",
                self.target_offset_m
            ));
        }
        Ok(())
    }
}

/// An ordered, labeled observation sequence for one manipulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Unique identifier.
    pub id: String,
    /// The action sequence the robot executed.
    pub plan: Vec<ActionKind>,
    /// Per-step observation plus ground-truth label.
    pub samples: Vec<(Observation, AnomalyClass)>,
    /// Step at which the anomaly physically begins (absent for safe runs).
    pub anomaly_onset: Option<usize>,
    /// Step at which detection fires (absent for safe runs).
    pub detection_step: Option<usize>,
    /// Overall ground truth for the episode.
    pub case_label: AnomalyClass,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Observations only, in step order.
    pub fn observations(&self) -> Vec<Observation> {
        self.samples.iter().map(|(o, _)| o.clone()).collect()
    }

    /// Ground-truth labels only, in step order.
    pub fn labels(&self) -> Vec<AnomalyClass> {
        self.samples.iter().map(|(_, y)| *y).collect()
    }

    /// Checks every episode invariant; returns the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.samples.is_empty() {
            return Err("samples must be non-empty".into());
        }
        for (i, (obs, _)) in self.samples.iter().enumerate() {
            if obs.t != i {
                return Err(format!(
                    "sample {i} has t = {}; t must increase from 0 with unit stride",
                    obs.t
                ));
            }
            obs.validate().map_err(|e| format!("sample {i}: {e}"))?;
        }
        let n = self.samples.len();
        if self.case_label == AnomalyClass::Safe {
            if let Some((i, _)) = self
                .samples
                .iter()
                .enumerate()
                .find(|(_, (_, y))| *y != AnomalyClass::Safe)
            {
                return Err(format!(
                    "safe episode has non-safe label at step {i}"
                ));
            }
            if self.anomaly_onset.is_some() || self.detection_step.is_some() {
                return Err("safe episode must not carry anomaly_onset or detection_step".into());
            }
        } else {
            let onset = self
                .anomaly_onset
                .ok_or("non-safe episode requires anomaly_onset")?;
            let detect = self
                .detection_step
                .ok_or("non-safe episode requires detection_step")?;
            if !(onset <= detect && detect < n) {
                return Err(format!(
                    "require anomaly_onset ({onset}) <= detection_step ({detect}) < length ({n})"
                ));
            }
            for (i, (_, y)) in self.samples.iter().enumerate() {
                let expected = if i < onset {
                    AnomalyClass::Safe
                } else {
                    self.case_label
                };
                if *y != expected {
                    return Err(format!(
                        "label at step {i} is {y}, expected {expected} (onset {onset})"
                    ));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// On-disk records
// ---------------------------------------------------------------------------

/// Flat per-sample wire record. Field names are part of the stable format.
#[derive(Serialize, Deserialize)]
struct SampleRecord {
    t: usize,
    laser: f64,
    grip_pos: f64,
    grip_force: f64,
    sound: SoundClass,
    existence: ExistenceBelief,
    offset: f64,
    action: ActionKind,
    phase: usize,
    label: AnomalyClass,
}

/// One episode per line. Field names are part of the stable format.
#[derive(Serialize, Deserialize)]
struct EpisodeRecord {
    version: u32,
    id: String,
    plan: Vec<ActionKind>,
    case_label: AnomalyClass,
    anomaly_onset: Option<usize>,
    detection_step: Option<usize>,
    samples: Vec<SampleRecord>,
}

impl EpisodeRecord {
    fn from_episode(ep: &Episode) -> EpisodeRecord {
        EpisodeRecord {
            version: EPISODE_FORMAT_VERSION,
            id: ep.id.clone(),
            plan: ep.plan.clone(),
            case_label: ep.case_label,
            anomaly_onset: ep.anomaly_onset,
            detection_step: ep.detection_step,
            samples: ep
                .samples
                .iter()
                .map(|(o, y)| SampleRecord {
                    t: o.t,
                    laser: o.laser_distance_m,
                    grip_pos: o.gripper_position,
                    grip_force: o.gripper_force,
                    sound: o.sound,
                    existence: o.target_existence,
                    offset: o.target_offset_m,
                    action: o.action_phase.action(),
                    phase: o.action_phase.phase_index(),
                    label: *y,
                })
                .collect(),
        }
    }

    fn into_episode(self) -> std::result::Result<Episode, String> {
        let mut samples = Vec::with_capacity(self.samples.len());
        for s in self.samples {
            let phase = ActionPhase::new(s.action, s.phase).map_err(|e| e.to_string())?;
            samples.push((
                Observation {
                    t: s.t,
                    laser_distance_m: s.laser,
                    gripper_position: s.grip_pos,
                    gripper_force: s.grip_force,
                    sound: s.sound,
                    target_existence: s.existence,
                    target_offset_m: s.offset,
                    action_phase: phase,
                },
                s.label,
            ));
        }
        Ok(Episode {
            id: self.id,
            plan: self.plan,
            samples,
            anomaly_onset: self.anomaly_onset,
            detection_step: self.detection_step,
            case_label: self.case_label,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes episodes one per line into any writer. Episodes are validated
/// (including finiteness of every float field) before anything is written.
pub fn write_episodes_to<W: Write>(episodes: &[Episode], mut w: W) -> Result<()> {
    let wrap_io = |source: std::io::Error| Error::Io {
        path: PathBuf::from("<writer>"),
        source,
    };
    for ep in episodes {
        ep.validate()
            .map_err(|e| Error::InvalidEpisode(format!("episode {}: {e}", ep.id)))?;
    }
    for ep in episodes {
        let record = EpisodeRecord::from_episode(ep);
        serde_json::to_writer(&mut w, &record).map_err(|e| Error::Malformed {
            path: PathBuf::from("<writer>"),
            line: 0,
            message: e.to_string(),
        })?;
        w.write_all(b"\n").map_err(wrap_io)?;
    }
    w.flush().map_err(wrap_io)?;
    Ok(())
}

/// Serializes episodes one per line to a file; see [`write_episodes_to`].
pub fn write_episodes<P: AsRef<Path>>(episodes: &[Episode], path: P) -> Result<()> {
    let path = path.as_ref();
    for ep in episodes {
        ep.validate()
            .map_err(|e| Error::InvalidEpisode(format!("episode {}: {e}", ep.id)))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    write_episodes_to(episodes, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Reads a file written by [`write_episodes`]. Every record must parse and
/// pass the full invariant check; failures name the 1-based line.
pub fn read_episodes<P: AsRef<Path>>(path: P) -> Result<Vec<Episode>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut episodes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: EpisodeRecord =
            serde_json::from_str(&line).map_err(|e| Error::Malformed {
                path: path.to_path_buf(),
                line: lineno,
                message: e.to_string(),
            })?;
        if record.version != EPISODE_FORMAT_VERSION {
            return Err(Error::Version {
                found: record.version,
                expected: EPISODE_FORMAT_VERSION,
            });
        }
        let episode = record.into_episode().map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: lineno,
            message: e,
        })?;
        episode.validate().map_err(|e| Error::Invariant {
            path: path.to_path_buf(),
            line: lineno,
            message: e,
        })?;
        episodes.push(episode);
    }
    Ok(episodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(t: usize) -> Observation {
        Observation {
            t,
            laser_distance_m: 0.5,
            gripper_position: 0.0,
            gripper_force: 0.0,
            sound: SoundClass::NoSound,
            target_existence: ExistenceBelief::Yes,
            target_offset_m: 0.0,
            action_phase: ActionPhase::new(ActionKind::PickUp, 0).unwrap(),
        }
    }

    fn safe_episode(n: usize) -> Episode {
        Episode {
            id: "safe-0".into(),
            plan: vec![ActionKind::PickUp],
            samples: (0..n).map(|t| (obs(t), AnomalyClass::Safe)).collect(),
            anomaly_onset: None,
            detection_step: None,
            case_label: AnomalyClass::Safe,
        }
    }

    #[test]
    fn phase_vocabulary_has_33_entries() {
        let total: usize = ActionKind::ALL.iter().map(|a| a.phase_count()).sum();
        assert_eq!(total, PHASE_VOCAB_SIZE);
        // global_index is a bijection onto [0, 33)
        let mut seen = [false; PHASE_VOCAB_SIZE];
        for kind in ActionKind::ALL {
            for p in 0..kind.phase_count() {
                let g = ActionPhase::new(kind, p).unwrap().global_index();
                assert!(!seen[g], "duplicate global index {g}");
                seen[g] = true;
                assert_eq!(
                    ActionPhase::from_global_index(g),
                    Some(ActionPhase::new(kind, p).unwrap())
                );
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn phase_index_out_of_range_rejected() {
        assert!(ActionPhase::new(ActionKind::PickUp, 5).is_err());
        assert!(ActionPhase::new(ActionKind::Push, 5).is_ok());
        assert!(ActionPhase::new(ActionKind::Push, 6).is_err());
    }

    #[test]
    fn write_zero_episodes_gives_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.ep");
        write_episodes(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert!(read_episodes(&path).unwrap().is_empty());
    }

    #[test]
    fn single_safe_episode_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.ep");
        let ep = safe_episode(3);
        write_episodes(std::slice::from_ref(&ep), &path).unwrap();
        let content = std::fs::read_to_string(&path).unwrap();
        assert_eq!(content.lines().count(), 1);
        let back = read_episodes(&path).unwrap();
        assert_eq!(back, vec![ep]);
    }

    #[test]
    fn label_before_onset_rejected() {
        let mut ep = safe_episode(4);
        ep.case_label = AnomalyClass::Loc;
        ep.anomaly_onset = Some(2);
        ep.detection_step = Some(2);
        // labels: LOC already at step 1, before the onset
        ep.samples[1].1 = AnomalyClass::Loc;
        ep.samples[2].1 = AnomalyClass::Loc;
        ep.samples[3].1 = AnomalyClass::Loc;
        let err = ep.validate().unwrap_err();
        assert!(err.contains("step 1"), "unexpected message: {err}");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ep");
        // bypass the writer's validation by serializing the record directly
        let record = EpisodeRecord::from_episode(&ep);
        std::fs::write(&path, format!("{}\n", serde_json::to_string(&record).unwrap())).unwrap();
        match read_episodes(&path) {
            Err(Error::Invariant { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected invariant error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_force_rejected_by_field_checker() {
        // oracle: run the invariant checker field by field
        let mut ep = safe_episode(2);
        ep.samples[1].0.gripper_force = 150.0;
        let err = ep.validate().unwrap_err();
        assert!(err.contains("gripper_force"), "unexpected message: {err}");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("force.ep");
        let record = EpisodeRecord::from_episode(&ep);
        std::fs::write(&path, format!("{}\n", serde_json::to_string(&record).unwrap())).unwrap();
        let err = read_episodes(&path).unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }), "got {err:?}");
    }

    #[test]
    fn unknown_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.ep");
        let mut record = EpisodeRecord::from_episode(&safe_episode(1));
        record.version = 9;
        std::fs::write(&path, format!("{}\n", serde_json::to_string(&record).unwrap())).unwrap();
        match read_episodes(&path) {
            Err(Error::Version { found, expected }) => {
                assert_eq!((found, expected), (9, EPISODE_FORMAT_VERSION));
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_field_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.ep");
        let mut ep = safe_episode(2);
        ep.samples[0].0.laser_distance_m = f64::NAN;
        assert!(write_episodes(&[ep], &path).is_err());
        assert!(!path.exists());
    }

    #[test]
    fn malformed_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mangled.ep");
        let good = serde_json::to_string(&EpisodeRecord::from_episode(&safe_episode(1))).unwrap();
        std::fs::write(&path, format!("{good}\n{{not json\n")).unwrap();
        match read_episodes(&path) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }
}
