use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::Rgb;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::domain::{DatasetManifest, FootageRef, Observation, RecordingPointId, RunnerId};
use crate::inference::{FootageEmbedding, Fusion, InstanceName, InstanceSpec, EMBEDDING_DIM};
use crate::preprocess::{plan_clips, write_box_file, write_frame_dir, Frame, TrackBox};
use crate::rng::{stream_rng, SYNTH_STREAM};
use crate::store::EmbeddingStore;

/// How a synthetic embedding depends on the normalized CRT `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubFamily {
    /// Coordinate 0 is `x`, every other coordinate is 0.
    #[default]
    Linear,
    /// Coordinate `d` is `0.5 + 0.5 sin(pi x + 2 pi d / 192)`.
    Sinusoidal,
    /// Every coordinate is 0.5; carries no signal.
    Constant,
}

impl std::str::FromStr for StubFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "sinusoidal" | "sin" => Ok(Self::Sinusoidal),
            "constant" => Ok(Self::Constant),
            _ => Err(format!("unknown stub family `{s}` (linear, sinusoidal, constant)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub runners: usize,
    pub recording_points: usize,
    /// `[low, high)` CRT range in seconds.
    pub crt_range: (f64, f64),
    pub race_start: f64,
    pub family: StubFamily,
    /// Standard deviation of the Gaussian noise added to the embedding.
    /// The linear family perturbs coordinate 0 only.
    pub noise_sigma: f64,
    pub instances: Vec<InstanceName>,
    pub footage_frames: u32,
    pub fps: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            runners: 152,
            recording_points: 3,
            crt_range: (28_800.0, 72_000.0),
            race_start: 21_600.0,
            family: StubFamily::Linear,
            noise_sigma: 0.0,
            instances: vec![InstanceName::XS],
            footage_frames: 175,
            fps: 25.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        let (lo, hi) = self.crt_range;
        let bad = |m: String| Err(EvalError::InvalidSpec(m));
        if self.runners == 0 || self.recording_points == 0 {
            return bad("runners and recording points must be >= 1".into());
        }
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return bad(format!("CRT range ({lo}, {hi}) must be positive and increasing"));
        }
        if (hi - lo) / (self.recording_points as f64) < 2.0 {
            return bad("CRT range too narrow for whole-second passing times".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !self.race_start.is_finite() {
            return bad("race start must be finite".into());
        }
        if self.instances.is_empty() {
            return bad("at least one instance is needed".into());
        }
        if !(self.fps > 0.0) || self.footage_frames == 0 {
            return bad("footage needs frames > 0 and fps > 0".into());
        }
        Ok(())
    }

    pub fn observations(&self) -> usize {
        self.runners * self.recording_points
    }
}

fn runner_id(i: usize) -> RunnerId {
    RunnerId::new(format!("R{:04}", i + 1)).expect("non-empty")
}

fn obs_stem(runner: &RunnerId, rp: usize) -> String {
    format!("{runner}_rp{rp}")
}

/// Synthetic manifest plus one single-instance store per requested instance.
///
/// Runner `i` reaches recording point `j` at CRT
/// `low + (high - low) (j + u_i) / P` with `u_i ~ U(0, 1)`, rounded to whole
/// seconds. Embeddings are a function of the CRT normalized over the whole
/// population; each instance draws its own noise.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(DatasetManifest, Vec<EmbeddingStore>), EvalError> {
    spec.validate()?;
    let (lo, hi) = spec.crt_range;
    let p = spec.recording_points;
    let mut rng = stream_rng(spec.seed, SYNTH_STREAM);
    let mut crts = Vec::with_capacity(spec.observations());
    let mut observations = Vec::with_capacity(spec.observations());
    for i in 0..spec.runners {
        let u: f64 = rng.gen();
        let runner = runner_id(i);
        for j in 0..p {
            let crt = (lo + (hi - lo) * (j as f64 + u) / p as f64).round();
            crts.push(crt);
            let stem = obs_stem(&runner, j);
            observations.push(Observation {
                runner: runner.clone(),
                rp: RecordingPointId(j as u32),
                footage: FootageRef {
                    path: format!("footage/{stem}").into(),
                    frames: spec.footage_frames,
                    fps: spec.fps,
                },
                passing_time: spec.race_start + crt,
                tracks: format!("tracks/{stem}.csv").into(),
            });
        }
    }
    let recording_points = (0..p as u32).map(RecordingPointId).collect();
    let manifest = DatasetManifest::new(spec.race_start, recording_points, observations)?;

    let min_start = crts.iter().step_by(p).copied().fold(f64::INFINITY, f64::min);
    let max_crt = crts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let normalized: Vec<f64> = crts.iter().map(|c| (c - min_start) / max_crt).collect();

    let mut instances = spec.instances.clone();
    instances.sort();
    instances.dedup();
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| EvalError::InvalidSpec(e.to_string()))?;
    let mut stores = Vec::with_capacity(instances.len());
    for (n, &name) in instances.iter().enumerate() {
        let inst = InstanceSpec::new(name, name.reference_resolution());
        let clips = plan_clips(spec.footage_frames as usize, &inst).map_or(0, |plan| plan.len() as u32);
        let mut noise_rng = stream_rng(spec.seed, SYNTH_STREAM + 1 + n as u64);
        let mut store = EmbeddingStore::new(vec![inst], vec![0], Fusion::Single)?;
        for (obs, &x) in manifest.observations.iter().zip(&normalized) {
            let mut draw = || noise.sample(&mut noise_rng) as f32;
            let values: Vec<f32> = match spec.family {
                StubFamily::Linear => {
                    let mut v = vec![0.0f32; EMBEDDING_DIM];
                    v[0] = x as f32 + draw();
                    v
                }
                StubFamily::Sinusoidal => (0..EMBEDDING_DIM)
                    .map(|d| {
                        let phase = 2.0 * PI * d as f64 / EMBEDDING_DIM as f64;
                        (0.5 + 0.5 * (PI * x + phase).sin()) as f32 + draw()
                    })
                    .collect(),
                StubFamily::Constant => (0..EMBEDDING_DIM).map(|_| 0.5 + draw()).collect(),
            };
            let embedding = FootageEmbedding {
                values,
                provenance: vec![name],
                fusion: Fusion::Single,
            };
            store.insert(obs.runner.clone(), obs.rp, &embedding, &[clips])?;
        }
        stores.push(store);
    }
    Ok((manifest, stores))
}

/// Layout of the rendered synthetic footage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FootageSpec {
    pub width: u32,
    pub height: u32,
    /// Every `drop_every`-th box row is omitted to exercise gap filling; 0 keeps all.
    pub drop_every: usize,
}

impl Default for FootageSpec {
    fn default() -> Self {
        Self {
            width: 64,
            height: 48,
            drop_every: 7,
        }
    }
}

/// Renders PNG frames and box files for every observation under `root`,
/// at the paths the manifest names.
///
/// The runner is a rectangle drifting left to right whose brightness follows
/// the CRT; a second blob crosses the other way as a distractor. The
/// background carries a fixed gradient.
pub fn write_synthetic_footage(
    manifest: &DatasetManifest,
    root: &Path,
    layout: &FootageSpec,
    seed: u64,
) -> Result<(), EvalError> {
    let (w, h) = (layout.width, layout.height);
    if w < 16 || h < 16 {
        return Err(EvalError::InvalidSpec("synthetic frames must be at least 16x16".into()));
    }
    let crts = manifest.crts().into_iter().collect::<Result<Vec<_>, _>>()?;
    let max_crt = crts.iter().map(|c| c.seconds()).fold(1.0, f64::max);
    let (bw, bh) = (w / 4, h / 2);
    for (n, (obs, crt)) in manifest.observations.iter().zip(&crts).enumerate() {
        let mut rng = stream_rng(seed, SYNTH_STREAM + (1 << 20) + n as u64);
        let level = (40.0 + 200.0 * crt.seconds() / max_crt).round() as u8;
        let jitter: u32 = rng.gen_range(0..4);
        let frames_total = obs.footage.frames as usize;
        let mut frames = Vec::with_capacity(frames_total);
        let mut boxes = Vec::with_capacity(frames_total);
        for t in 0..frames_total {
            let x = ((w - bw) as usize * t / frames_total.max(1)) as u32;
            let y = ((h - bh) / 2 + jitter).min(h - bh);
            let dx = (w - 8) - ((w - 8) as usize * t / frames_total.max(1)) as u32;
            let frame = Frame::from_fn(w, h, |px, py| {
                if px >= x && px < x + bw && py >= y && py < y + bh {
                    Rgb([level, level / 2, 255 - level])
                } else if px >= dx && px < dx + 8 && py < 8 {
                    Rgb([250, 250, 30])
                } else {
                    Rgb([(px * 255 / w) as u8, (py * 255 / h) as u8, 90])
                }
            });
            frames.push(frame);
            if layout.drop_every == 0 || t % layout.drop_every != layout.drop_every - 1 {
                boxes.push(TrackBox::new(t as u32, x, y, bw, bh));
            }
        }
        let dir = root.join(&obs.footage.path);
        std::fs::create_dir_all(&dir)?;
        write_frame_dir(&dir, &frames)?;
        let tracks = root.join(&obs.tracks);
        if let Some(parent) = tracks.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_box_file(BufWriter::new(File::create(tracks)?), &boxes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{read_box_file, read_frame_dir};

    #[test]
    fn counts() {
        let spec = SyntheticSpec {
            runners: 214,
            ..SyntheticSpec::default()
        };
        let (m, stores) = gen_synthetic(&spec).unwrap();
        assert_eq!(m.observations.len(), 642);
        assert_eq!(stores[0].len(), 642);
        let (m, _) = gen_synthetic(&SyntheticSpec::default()).unwrap();
        assert_eq!(m.observations.len(), 456);
    }

    #[test]
    fn crts_span_range_and_are_monotone() {
        let (m, _) = gen_synthetic(&SyntheticSpec::default()).unwrap();
        let crts: Vec<f64> = m.crts().into_iter().map(|c| c.unwrap().seconds()).collect();
        assert!(crts.iter().all(|&c| (28_800.0..=72_000.0).contains(&c)));
        for chunk in crts.chunks(3) {
            assert!(chunk[0] < chunk[1] && chunk[1] < chunk[2]);
        }
        assert_eq!(m.eligible_runners().len(), 152);
    }

    #[test]
    fn linear_noise_free_encodes_crt() {
        let (m, stores) = gen_synthetic(&SyntheticSpec::default()).unwrap();
        let crts: Vec<f64> = m.crts().into_iter().map(|c| c.unwrap().seconds()).collect();
        let min_start = crts.iter().step_by(3).copied().fold(f64::INFINITY, f64::min);
        let max = crts.iter().copied().fold(0.0, f64::max);
        for (obs, c) in m.observations.iter().zip(&crts) {
            let row = stores[0].get(&obs.runner, obs.rp).unwrap();
            assert_eq!(row[0], ((c - min_start) / max) as f32);
            assert!(row[1..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn seeded_and_instance_noise_independent() {
        let spec = SyntheticSpec {
            runners: 10,
            noise_sigma: 0.1,
            instances: vec![InstanceName::L, InstanceName::XS],
            family: StubFamily::Constant,
            seed: 5,
            ..SyntheticSpec::default()
        };
        let (m1, s1) = gen_synthetic(&spec).unwrap();
        let (m2, s2) = gen_synthetic(&spec).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(s1, s2);
        assert_eq!(s1[0].instance_names(), vec![InstanceName::XS]);
        let k = &s1[0].keys()[0];
        assert_ne!(s1[0].get(&k.0, k.1), s1[1].get(&k.0, k.1));
        assert_eq!(s1[0].clip_counts(&k.0, k.1), Some(&[3u32][..]));
        assert_eq!(s1[1].clip_counts(&k.0, k.1), Some(&[2u32][..]));
    }

    #[test]
    fn rejects_bad_specs() {
        let bad = SyntheticSpec {
            crt_range: (10.0, 5.0),
            ..SyntheticSpec::default()
        };
        assert!(gen_synthetic(&bad).is_err());
        let bad = SyntheticSpec {
            noise_sigma: -1.0,
            ..SyntheticSpec::default()
        };
        assert!(gen_synthetic(&bad).is_err());
    }

    #[test]
    fn footage_files_match_manifest() {
        let spec = SyntheticSpec {
            runners: 2,
            recording_points: 1,
            footage_frames: 30,
            ..SyntheticSpec::default()
        };
        let (m, _) = gen_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_footage(&m, dir.path(), &FootageSpec::default(), 0).unwrap();
        for obs in &m.observations {
            let frames = read_frame_dir(&dir.path().join(&obs.footage.path)).unwrap();
            assert_eq!(frames.len(), 30);
            let boxes = read_box_file(&dir.path().join(&obs.tracks)).unwrap();
            assert_eq!(boxes.len(), 30 - 30 / 7);
        }
    }
}
