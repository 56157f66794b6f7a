//! Runners, recording points, passing times and the dataset manifest.
//!
//! CRT is never stored. The manifest carries wall-clock passing times and the
//! race start; [`compute_crt`] derives the cumulative race time at a recording
//! point as the first split plus the sum of the segment times after it.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("runner id must be non-empty")]
    EmptyRunnerId,
    #[error("invalid CRT value {0} (must be finite and >= 0)")]
    InvalidCrt(f64),
    #[error("runner {runner}: missing passing time at recording point {rp}")]
    MissingRecordingPoint { runner: String, rp: u32 },
    #[error("runner {runner}: passing time at recording point {rp} does not increase over the previous point")]
    NonMonotonicTimes { runner: String, rp: u32 },
    #[error("passing times belong to more than one runner ({0} and {1})")]
    MixedRunners(String, String),
    #[error("runner {runner}: duplicate passing time for recording point {rp}")]
    DuplicatePassingTime { runner: String, rp: u32 },
    #[error("manifest parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("manifest validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Opaque runner identifier (bib number, re-id label, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RunnerId(String);

impl RunnerId {
    pub fn new(id: impl Into<String>) -> Result<Self, DomainError> {
        let id = id.into();
        if id.is_empty() {
            return Err(DomainError::EmptyRunnerId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for RunnerId {
    type Error = DomainError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<RunnerId> for String {
    fn from(id: RunnerId) -> Self {
        id.0
    }
}

impl fmt::Display for RunnerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// 0-based ordinal of a camera location along the course.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordingPointId(pub u32);

impl RecordingPointId {
    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for RecordingPointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rp{}", self.0)
    }
}

/// A runner passing a recording point; `wall_clock` is seconds since race start.
#[derive(Debug, Clone, PartialEq)]
pub struct PassingTime {
    pub runner: RunnerId,
    pub rp: RecordingPointId,
    pub wall_clock: f64,
}

/// Cumulative race time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CrtSeconds(f64);

impl CrtSeconds {
    pub fn new(seconds: f64) -> Result<Self, DomainError> {
        if !seconds.is_finite() || seconds < 0.0 {
            return Err(DomainError::InvalidCrt(seconds));
        }
        Ok(Self(seconds))
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    pub fn minutes(self) -> f64 {
        self.0 / 60.0
    }
}

/// Cumulative race time at `target`.
///
/// Sums the first split and every segment `T_j - T_{j-1}` up to `target`. The
/// sum telescopes to the wall-clock time at `target`, but walking the segments
/// is what catches gaps and non-monotone timing data.
///
/// ```
/// use racecrt::{compute_crt, PassingTime, RecordingPointId, RunnerId};
///
/// let runner = RunnerId::new("R0001")?;
/// let times: Vec<_> = [3600.0, 7200.0, 9000.0]
///     .iter()
///     .enumerate()
///     .map(|(rp, &t)| PassingTime { runner: runner.clone(), rp: RecordingPointId(rp as u32), wall_clock: t })
///     .collect();
/// assert_eq!(compute_crt(&times, RecordingPointId(2))?.seconds(), 9000.0);
/// # Ok::<(), racecrt::DomainError>(())
/// ```
pub fn compute_crt(
    passing_times: &[PassingTime],
    target: RecordingPointId,
) -> Result<CrtSeconds, DomainError> {
    let Some(first) = passing_times.first() else {
        return Err(DomainError::MissingRecordingPoint {
            runner: String::new(),
            rp: 0,
        });
    };
    let runner = &first.runner;
    let mut by_rp = BTreeMap::new();
    for pt in passing_times {
        if &pt.runner != runner {
            return Err(DomainError::MixedRunners(
                runner.to_string(),
                pt.runner.to_string(),
            ));
        }
        if by_rp.insert(pt.rp.0, pt.wall_clock).is_some() {
            return Err(DomainError::DuplicatePassingTime {
                runner: runner.to_string(),
                rp: pt.rp.0,
            });
        }
    }
    let time_at = |rp: u32| {
        by_rp
            .get(&rp)
            .copied()
            .ok_or_else(|| DomainError::MissingRecordingPoint {
                runner: runner.to_string(),
                rp,
            })
    };

    let first_split = time_at(0)?;
    if !first_split.is_finite() || first_split < 0.0 {
        return Err(DomainError::InvalidCrt(first_split));
    }
    let mut crt = first_split;
    let mut previous = first_split;
    for rp in 1..=target.0 {
        let current = time_at(rp)?;
        let segment = current - previous;
        if !(segment > 0.0) {
            return Err(DomainError::NonMonotonicTimes {
                runner: runner.to_string(),
                rp,
            });
        }
        crt += segment;
        previous = current;
    }
    CrtSeconds::new(crt)
}

/// Where an observation's footage lives and how it is timed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootageRef {
    pub path: PathBuf,
    pub frames: u32,
    pub fps: f64,
}

/// One runner filmed at one recording point.
///
/// `passing_time` is absolute wall clock (same clock as the manifest's
/// `race_start`); `tracks` points at the runner's MOT-style box file, which is
/// loaded and checked against the footage by the pre-processing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub runner: RunnerId,
    pub rp: RecordingPointId,
    pub footage: FootageRef,
    pub passing_time: f64,
    pub tracks: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub race_start: f64,
    pub recording_points: Vec<RecordingPointId>,
    pub observations: Vec<Observation>,
}

impl DatasetManifest {
    /// Builds and validates a manifest.
    pub fn new(
        race_start: f64,
        recording_points: Vec<RecordingPointId>,
        observations: Vec<Observation>,
    ) -> Result<Self, DomainError> {
        let manifest = Self {
            race_start,
            recording_points,
            observations,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let invalid = |msg: String| Err(DomainError::Validation(msg));
        if !self.race_start.is_finite() {
            return invalid("race_start must be finite".into());
        }
        for (i, rp) in self.recording_points.iter().enumerate() {
            if rp.0 as usize != i {
                return invalid(format!(
                    "recording_points must be the contiguous ordinals 0..=P, found {} at position {i}",
                    rp.0
                ));
            }
        }
        let mut seen = HashSet::new();
        for obs in &self.observations {
            if !seen.insert((obs.runner.clone(), obs.rp)) {
                return invalid(format!(
                    "duplicate observation for runner {} at {}",
                    obs.runner, obs.rp
                ));
            }
            if obs.rp.0 as usize >= self.recording_points.len() {
                return invalid(format!(
                    "runner {} references unknown recording point {}",
                    obs.runner, obs.rp.0
                ));
            }
            if obs.footage.frames == 0 {
                return invalid(format!(
                    "runner {} at {}: footage frame count must be > 0",
                    obs.runner, obs.rp
                ));
            }
            if !(obs.footage.fps > 0.0 && obs.footage.fps.is_finite()) {
                return invalid(format!(
                    "runner {} at {}: fps must be > 0",
                    obs.runner, obs.rp
                ));
            }
            if !(obs.passing_time - self.race_start >= 0.0) {
                return invalid(format!(
                    "runner {} at {}: passing time precedes race start",
                    obs.runner, obs.rp
                ));
            }
        }
        for (runner, times) in self.passing_times_by_runner() {
            for pair in times.windows(2) {
                if !(pair[1].wall_clock > pair[0].wall_clock) {
                    return invalid(format!(
                        "runner {runner}: passing times must increase along the course ({} -> {})",
                        pair[0].rp, pair[1].rp
                    ));
                }
            }
        }
        Ok(())
    }

    /// Passing times relative to race start, grouped per runner and ordered by recording point.
    pub fn passing_times_by_runner(&self) -> BTreeMap<RunnerId, Vec<PassingTime>> {
        let mut grouped: BTreeMap<RunnerId, Vec<PassingTime>> = BTreeMap::new();
        for obs in &self.observations {
            grouped
                .entry(obs.runner.clone())
                .or_default()
                .push(PassingTime {
                    runner: obs.runner.clone(),
                    rp: obs.rp,
                    wall_clock: obs.passing_time - self.race_start,
                });
        }
        for times in grouped.values_mut() {
            times.sort_by_key(|pt| pt.rp);
        }
        grouped
    }

    /// CRT for every observation, in manifest order. Observations whose runner
    /// lacks an earlier recording point come back as errors.
    pub fn crts(&self) -> Vec<Result<CrtSeconds, DomainError>> {
        let grouped = self.passing_times_by_runner();
        self.observations
            .iter()
            .map(|obs| compute_crt(&grouped[&obs.runner], obs.rp))
            .collect()
    }

    /// Runners observed at every recording point of the manifest.
    pub fn eligible_runners(&self) -> HashSet<RunnerId> {
        let needed = self.recording_points.len();
        self.passing_times_by_runner()
            .into_iter()
            .filter(|(_, times)| times.len() == needed)
            .map(|(runner, _)| runner)
            .collect()
    }
}

/// Reads and validates a JSON manifest.
pub fn load_manifest<R: Read>(source: R) -> Result<DatasetManifest, DomainError> {
    let manifest: DatasetManifest = serde_json::from_reader(source).map_err(|e| {
        if e.is_io() {
            DomainError::Io(e.into())
        } else {
            DomainError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            }
        }
    })?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn save_manifest<W: Write>(manifest: &DatasetManifest, mut sink: W) -> Result<(), DomainError> {
    serde_json::to_writer_pretty(&mut sink, manifest).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(runner: &str, values: &[f64]) -> Vec<PassingTime> {
        let runner = RunnerId::new(runner).unwrap();
        values
            .iter()
            .enumerate()
            .map(|(i, &t)| PassingTime {
                runner: runner.clone(),
                rp: RecordingPointId(i as u32),
                wall_clock: t,
            })
            .collect()
    }

    fn obs(runner: &str, rp: u32, passing: f64) -> Observation {
        Observation {
            runner: RunnerId::new(runner).unwrap(),
            rp: RecordingPointId(rp),
            footage: FootageRef {
                path: format!("footage/{runner}_{rp}").into(),
                frames: 175,
                fps: 25.0,
            },
            passing_time: passing,
            tracks: format!("tracks/{runner}_{rp}.csv").into(),
        }
    }

    #[test]
    fn crt_single_point() {
        let t = times("a", &[3600.0]);
        assert_eq!(compute_crt(&t, RecordingPointId(0)).unwrap().seconds(), 3600.0);
    }

    #[test]
    fn crt_telescopes_to_last_wall_clock() {
        let t = times("a", &[3600.0, 7200.0, 9000.0]);
        assert_eq!(compute_crt(&t, RecordingPointId(2)).unwrap().seconds(), 9000.0);
        // 3600 + (7200 - 3600)
        assert_eq!(compute_crt(&t, RecordingPointId(1)).unwrap().seconds(), 7200.0);
    }

    #[test]
    fn crt_missing_intermediate_point() {
        let mut t = times("a", &[3600.0, 7200.0, 9000.0]);
        t.remove(1);
        assert!(matches!(
            compute_crt(&t, RecordingPointId(2)),
            Err(DomainError::MissingRecordingPoint { rp: 1, .. })
        ));
    }

    #[test]
    fn crt_non_monotonic() {
        let t = times("a", &[3600.0, 3000.0]);
        assert!(matches!(
            compute_crt(&t, RecordingPointId(1)),
            Err(DomainError::NonMonotonicTimes { rp: 1, .. })
        ));
    }

    #[test]
    fn crt_mixed_runners() {
        let mut t = times("a", &[1.0]);
        t.extend(times("b", &[1.0, 2.0]).into_iter().skip(1));
        assert!(matches!(
            compute_crt(&t, RecordingPointId(1)),
            Err(DomainError::MixedRunners(..))
        ));
    }

    #[test]
    fn empty_manifest_is_valid() {
        let m = load_manifest(r#"{"race_start": 0.0, "recording_points": [], "observations": []}"#.as_bytes())
            .unwrap();
        assert!(m.observations.is_empty());
    }

    #[test]
    fn duplicate_pair_rejected() {
        let r = DatasetManifest::new(
            0.0,
            vec![RecordingPointId(0)],
            vec![obs("a", 0, 10.0), obs("a", 0, 10.0)],
        );
        assert!(matches!(r, Err(DomainError::Validation(_))));
    }

    #[test]
    fn unknown_recording_point_rejected() {
        let r = DatasetManifest::new(0.0, vec![RecordingPointId(0)], vec![obs("a", 1, 10.0)]);
        assert!(matches!(r, Err(DomainError::Validation(_))));
    }

    #[test]
    fn decreasing_passing_times_rejected() {
        let r = DatasetManifest::new(
            0.0,
            vec![RecordingPointId(0), RecordingPointId(1)],
            vec![obs("a", 0, 10.0), obs("a", 1, 5.0)],
        );
        assert!(matches!(r, Err(DomainError::Validation(_))));
    }

    #[test]
    fn parse_error_carries_position() {
        let err = load_manifest("{\n  \"race_start\": \"soon\"\n}".as_bytes()).unwrap_err();
        match err {
            DomainError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("race_start") || message.contains("invalid type"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_runner_id_rejected_in_json() {
        let text = r#"{"race_start": 0.0, "recording_points": [0], "observations": [
            {"runner": "", "rp": 0, "footage": {"path": "f", "frames": 1, "fps": 25.0},
             "passing_time": 1.0, "tracks": "t.csv"}]}"#;
        assert!(matches!(load_manifest(text.as_bytes()), Err(DomainError::Parse { .. })));
    }

    #[test]
    fn crts_relative_to_race_start() {
        let m = DatasetManifest::new(
            1000.0,
            vec![RecordingPointId(0), RecordingPointId(1)],
            vec![obs("a", 1, 8200.0), obs("a", 0, 4600.0), obs("b", 1, 9000.0)],
        )
        .unwrap();
        let crts = m.crts();
        assert_eq!(crts[0].as_ref().unwrap().seconds(), 7200.0);
        assert_eq!(crts[1].as_ref().unwrap().seconds(), 3600.0);
        assert!(crts[2].is_err());
        let eligible = m.eligible_runners();
        assert!(eligible.contains(&RunnerId::new("a").unwrap()));
        assert!(!eligible.contains(&RunnerId::new("b").unwrap()));
    }
}
