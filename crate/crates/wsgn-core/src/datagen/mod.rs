//! Synthetic untrimmed-video generator and the on-disk feature and manifest
//! formats.
//!
//! Generated videos carry per-frame feature vectors, video-level class labels,
//! and ground-truth action segments. Each class owns a fixed unit direction in
//! feature space; frames inside an action segment are drawn around that
//! direction while background frames are zero-mean. Noise is temporally
//! correlated and each video applies its own global gain, so localization
//! requires more than a per-frame magnitude test.

pub mod files;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffcore::Matrix;
use crate::error::{Error, Result};

pub use files::{
    read_features, read_features_f64, read_manifest, write_dataset, write_features,
    write_features_f64, write_manifest,
};

/// Knobs for the synthetic benchmark generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub train_videos: usize,
    pub test_videos: usize,
    /// Smallest frame count a video may have.
    pub min_frames: usize,
    pub max_frames: usize,
    /// Frames per second used to convert segment frames to seconds.
    pub fps: f64,
    pub min_actions: usize,
    pub max_actions: usize,
    /// Segment length range in seconds.
    pub min_action_len: f64,
    pub max_action_len: f64,
    /// Fraction of each video's duration the generator tries to cover with
    /// actions; the resulting count is clamped to the action range.
    pub action_density: f64,
    /// Distance of action frame means from the origin along the class
    /// direction. Zero makes action frames indistinguishable from background.
    pub amplitude: f64,
    pub background_noise: f64,
    pub action_noise: f64,
    /// Lag-one autocorrelation of the feature noise. Zero gives independent
    /// frames; values near one give slowly drifting features whose marginal
    /// distribution is unchanged.
    pub noise_corr: f64,
    /// Per-video global gain is drawn uniformly from this range, emulating
    /// videos recorded at different signal scales.
    pub gain_min: f64,
    pub gain_max: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_classes: 5,
            feature_dim: 16,
            train_videos: 200,
            test_videos: 50,
            min_frames: 40,
            max_frames: 120,
            fps: 5.0,
            min_actions: 1,
            max_actions: 8,
            min_action_len: 1.8,
            max_action_len: 2.2,
            action_density: 0.5,
            amplitude: 3.0,
            background_noise: 1.0,
            action_noise: 1.0,
            noise_corr: 0.9,
            gain_min: 0.25,
            gain_max: 3.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, detail: impl Into<String>) -> Error {
            Error::InvalidConfig {
                field,
                detail: detail.into(),
            }
        }
        if self.num_classes == 0 {
            return Err(bad("num_classes", "must be at least 1"));
        }
        if self.feature_dim == 0 {
            return Err(bad("feature_dim", "must be at least 1"));
        }
        if self.min_frames < 2 {
            return Err(bad("min_frames", "must be at least 2"));
        }
        if self.max_frames < self.min_frames {
            return Err(bad("max_frames", "frame range is empty"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(bad("fps", "must be positive and finite"));
        }
        if self.max_actions < self.min_actions {
            return Err(bad("max_actions", "action count range is empty"));
        }
        if !(self.min_action_len.is_finite() && self.min_action_len > 0.0) {
            return Err(bad("min_action_len", "must be positive and finite"));
        }
        if !(self.max_action_len.is_finite() && self.max_action_len >= self.min_action_len) {
            return Err(bad("max_action_len", "segment length range is empty"));
        }
        if !(self.action_density.is_finite() && self.action_density > 0.0) {
            return Err(bad("action_density", "must be positive and finite"));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(bad("amplitude", "must be non-negative and finite"));
        }
        if !(self.background_noise.is_finite() && self.background_noise >= 0.0) {
            return Err(bad("background_noise", "must be non-negative and finite"));
        }
        if !(self.action_noise.is_finite() && self.action_noise >= 0.0) {
            return Err(bad("action_noise", "must be non-negative and finite"));
        }
        if !(self.noise_corr.is_finite() && (0.0..1.0).contains(&self.noise_corr)) {
            return Err(bad("noise_corr", "must lie in [0, 1)"));
        }
        if !(self.gain_min.is_finite() && self.gain_min > 0.0) {
            return Err(bad("gain_min", "must be positive and finite"));
        }
        if !(self.gain_max.is_finite() && self.gain_max >= self.gain_min) {
            return Err(bad("gain_max", "gain range is empty"));
        }
        Ok(())
    }
}

/// Which half of the benchmark a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidConfig {
                field: "split",
                detail: format!("unknown split {other:?}, expected train or test"),
            }),
        }
    }
}

/// Ground-truth action occurrence in frame units, end exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GtSegment {
    pub class_id: usize,
    pub start: usize,
    pub end: usize,
}

/// One untrimmed video: features, weak labels, and (when known) segments.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub id: String,
    /// T x M per-frame features.
    pub features: Matrix,
    /// Length C, entries 0.0 or 1.0.
    pub labels: Vec<f64>,
    pub gt_segments: Vec<GtSegment>,
    pub fps: f64,
}

impl FeatureSequence {
    pub fn num_frames(&self) -> usize {
        self.features.rows()
    }

    pub fn labeled_classes(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(q, _)| q)
            .collect()
    }
}

/// A full split of videos sharing one label space and frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub videos: Vec<FeatureSequence>,
    pub split: Split,
    pub num_classes: usize,
    pub fps: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.videos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.videos.is_empty()
    }
}

/// Generates the train and test splits for a configuration. The output is a
/// pure function of the configuration, including its seed.
pub fn generate(config: &SynthConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let directions = class_directions(&mut rng, config.num_classes, config.feature_dim);
    let train = generate_split(&mut rng, config, &directions, Split::Train, config.train_videos)?;
    let test = generate_split(&mut rng, config, &directions, Split::Test, config.test_videos)?;
    Ok((train, test))
}

/// Unit mean directions, one row per class, pairwise orthogonal whenever the
/// feature dimension allows so no class is intrinsically harder than another.
fn class_directions(rng: &mut ChaCha8Rng, num_classes: usize, feature_dim: usize) -> Matrix {
    let orthogonalize = feature_dim >= num_classes;
    let mut dirs = Matrix::zeros(num_classes, feature_dim);
    for q in 0..num_classes {
        loop {
            let mut row: Vec<f64> = (0..feature_dim).map(|_| rng.sample(StandardNormal)).collect();
            if orthogonalize {
                for p in 0..q {
                    let dot: f64 = (0..feature_dim).map(|m| row[m] * dirs[(p, m)]).sum();
                    for m in 0..feature_dim {
                        row[m] -= dot * dirs[(p, m)];
                    }
                }
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for m in 0..feature_dim {
                    dirs[(q, m)] = row[m] / norm;
                }
                break;
            }
        }
    }
    dirs
}

fn generate_split(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    directions: &Matrix,
    split: Split,
    count: usize,
) -> Result<Dataset> {
    let mut videos = Vec::with_capacity(count);
    for index in 0..count {
        let id = format!("{split}_{index:04}");
        videos.push(generate_video(rng, config, directions, id)?);
    }
    Ok(Dataset {
        videos,
        split,
        num_classes: config.num_classes,
        fps: config.fps,
    })
}

fn generate_video(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    directions: &Matrix,
    id: String,
) -> Result<FeatureSequence> {
    let num_frames = rng.random_range(config.min_frames..=config.max_frames);
    let gain = config.gain_min + rng.random::<f64>() * (config.gain_max - config.gain_min);

    let mean_len = 0.5 * (config.min_action_len + config.max_action_len);
    let duration = num_frames as f64 / config.fps;
    let target = (config.action_density * duration / mean_len).round() as i64;
    let requested = target.clamp(config.min_actions as i64, config.max_actions as i64) as usize;

    let mut lengths: Vec<usize> = (0..requested)
        .map(|_| {
            let seconds = config.min_action_len
                + rng.random::<f64>() * (config.max_action_len - config.min_action_len);
            ((seconds * config.fps).round() as usize).max(1)
        })
        .collect();
    while lengths.len() > config.min_actions && lengths.iter().sum::<usize>() > num_frames {
        lengths.pop();
    }
    let needed: usize = lengths.iter().sum();
    if needed > num_frames {
        return Err(Error::InfeasiblePlacement {
            segments: lengths.len(),
            needed,
            available: num_frames,
        });
    }

    let classes: Vec<usize> = (0..lengths.len())
        .map(|_| rng.random_range(0..config.num_classes))
        .collect();

    let slack = num_frames - needed;
    let mut cuts: Vec<usize> = (0..lengths.len()).map(|_| rng.random_range(0..=slack)).collect();
    cuts.sort_unstable();

    let mut gt_segments = Vec::with_capacity(lengths.len());
    let mut placed = 0;
    for (i, (&len, &class_id)) in lengths.iter().zip(&classes).enumerate() {
        let start = cuts[i] + placed;
        gt_segments.push(GtSegment {
            class_id,
            start,
            end: start + len,
        });
        placed += len;
    }

    let mut frame_class = vec![None; num_frames];
    for seg in &gt_segments {
        for slot in &mut frame_class[seg.start..seg.end] {
            *slot = Some(seg.class_id);
        }
    }

    let mut labels = vec![0.0; config.num_classes];
    for seg in &gt_segments {
        labels[seg.class_id] = 1.0;
    }

    let mut features = Matrix::zeros(num_frames, config.feature_dim);
    let mut state = vec![0.0; config.feature_dim];
    let rho = config.noise_corr;
    let innovation = (1.0 - rho * rho).sqrt();
    for t in 0..num_frames {
        for s in state.iter_mut() {
            let eps: f64 = rng.sample(StandardNormal);
            *s = if t == 0 { eps } else { rho * *s + innovation * eps };
        }
        let (class, noise_std) = match frame_class[t] {
            Some(q) => (Some(q), config.action_noise),
            None => (None, config.background_noise),
        };
        for m in 0..config.feature_dim {
            let signal = match class {
                Some(q) => config.amplitude * directions[(q, m)],
                None => 0.0,
            };
            let value = gain * (signal + noise_std * state[m]);
            features[(t, m)] = value as f32 as f64;
        }
    }

    Ok(FeatureSequence {
        id,
        features,
        labels,
        gt_segments,
        fps: config.fps,
    })
}
