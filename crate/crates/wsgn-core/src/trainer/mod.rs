//! Training loops over variable-length videos: seeded shuffling, temporal
//! subsampling with start-offset augmentation, gradient accumulation across
//! sub-batches, and bitwise-resumable checkpoints.

pub mod checkpoint;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{Dataset, FeatureSequence, GtSegment};
use crate::diffcore::{sgd_step, Matrix, OptimState, Parameterized};
use crate::error::{Error, Result};
use crate::model::{
    inference_trace, naive_forward_backward, supervised_forward_backward, weak_forward_backward,
    ForwardTrace, Mode, ModelConfig, ModelParams, Phase,
};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

/// Optimization and scheduling knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Videos per optimizer step.
    pub batch_size: usize,
    /// Number of accumulation groups a batch is split into; grouping never
    /// changes the result, only peak memory.
    pub sub_batches: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Keep every `temporal_stride`-th frame during training.
    pub temporal_stride: usize,
    /// Start offsets are drawn uniformly from [0, max_start_offset] per video
    /// per epoch.
    pub max_start_offset: usize,
    pub mode: Mode,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 128,
            sub_batches: 32,
            learning_rate: 0.2,
            momentum: 0.9,
            weight_decay: 2e-3,
            temporal_stride: 5,
            max_start_offset: 15,
            mode: Mode::Wsgn,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig {
                field: "batch_size",
                detail: "must be at least 1".to_string(),
            });
        }
        if self.sub_batches == 0 || self.sub_batches > self.batch_size {
            return Err(Error::InvalidConfig {
                field: "sub_batches",
                detail: format!(
                    "must lie in [1, batch_size]; got {} for batch size {}",
                    self.sub_batches, self.batch_size
                ),
            });
        }
        if self.temporal_stride == 0 {
            return Err(Error::InvalidConfig {
                field: "temporal_stride",
                detail: "must be at least 1".to_string(),
            });
        }
        OptimState::new(self.learning_rate, self.momentum, self.weight_decay).map(|_| ())
    }
}

fn ceil_div(a: i64, b: i64) -> i64 {
    let q = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        q
    } else {
        q + 1
    }
}

/// Keeps frames `offset, offset+stride, ...` and remaps ground-truth segments
/// onto the surviving frames, dropping segments that no kept frame hits. An
/// offset beyond the video clamps to the last frame so the result always has
/// at least one frame.
pub fn subsample(video: &FeatureSequence, stride: usize, offset: usize) -> FeatureSequence {
    let frames = video.num_frames();
    let offset = offset.min(frames.saturating_sub(1));
    let kept: Vec<usize> = (offset..frames).step_by(stride.max(1)).collect();
    let rows: Vec<Vec<f64>> = kept.iter().map(|&t| video.features.row(t).to_vec()).collect();
    let features = Matrix::from_rows(&rows).expect("kept rows share the source width");

    let stride = stride.max(1) as i64;
    let new_len = kept.len() as i64;
    let mut gt_segments = Vec::new();
    for seg in &video.gt_segments {
        let start = ceil_div(seg.start as i64 - offset as i64, stride).max(0);
        let end = ceil_div(seg.end as i64 - offset as i64, stride).clamp(0, new_len);
        if end > start {
            gt_segments.push(GtSegment {
                class_id: seg.class_id,
                start: start as usize,
                end: end as usize,
            });
        }
    }

    FeatureSequence {
        id: video.id.clone(),
        features,
        labels: video.labels.clone(),
        gt_segments,
        fps: video.fps / stride as f64,
    }
}

/// Per-frame class indicators built from a video's ground-truth segments.
pub fn frame_label_matrix(video: &FeatureSequence, num_classes: usize) -> Matrix {
    let mut labels = Matrix::zeros(video.num_frames(), num_classes);
    for seg in &video.gt_segments {
        for t in seg.start..seg.end.min(video.num_frames()) {
            labels[(t, seg.class_id)] = 1.0;
        }
    }
    labels
}

/// Trained parameters with the optimizer state and per-epoch mean losses.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ModelParams,
    pub optim: OptimState,
    pub loss_curve: Vec<f64>,
}

/// Trains a fresh model. Fully determined by the dataset, both configs, and
/// the seed; rerunning produces bitwise-identical parameters.
pub fn train(
    dataset: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<TrainResult> {
    model_config.validate()?;
    train_config.validate()?;
    check_dataset(dataset, model_config, train_config)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut result = TrainResult {
        params: ModelParams::init(model_config, &mut init_rng),
        optim: OptimState::new(
            train_config.learning_rate,
            train_config.momentum,
            train_config.weight_decay,
        )?,
        loss_curve: Vec::new(),
    };
    run_epochs(dataset, model_config, train_config, &mut result, 0)?;
    Ok(result)
}

/// Continues training from a checkpoint up to its configured epoch count.
/// Because every epoch reseeds its own random stream, the continuation is
/// bitwise identical to a run that never stopped.
pub fn resume(dataset: &Dataset, checkpoint: Checkpoint) -> Result<TrainResult> {
    let Checkpoint {
        params,
        velocities,
        model_config,
        train_config,
        next_epoch,
        loss_curve,
    } = checkpoint;
    model_config.validate()?;
    train_config.validate()?;
    check_dataset(dataset, &model_config, &train_config)?;
    let mut optim = OptimState::new(
        train_config.learning_rate,
        train_config.momentum,
        train_config.weight_decay,
    )?;
    optim.velocities = velocities;
    let mut result = TrainResult {
        params,
        optim,
        loss_curve,
    };
    run_epochs(dataset, &model_config, &train_config, &mut result, next_epoch)?;
    Ok(result)
}

fn check_dataset(
    dataset: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "cannot train on the empty {} split",
            dataset.split
        )));
    }
    for video in &dataset.videos {
        if video.features.cols() != model_config.feature_dim {
            return Err(Error::DimensionMismatch {
                op: "train",
                detail: format!(
                    "video {} has {} feature dimensions, model expects {}",
                    video.id,
                    video.features.cols(),
                    model_config.feature_dim
                ),
            });
        }
        if video.labels.len() != model_config.num_classes {
            return Err(Error::DimensionMismatch {
                op: "train",
                detail: format!(
                    "video {} has {} label entries, model expects {}",
                    video.id,
                    video.labels.len(),
                    model_config.num_classes
                ),
            });
        }
        if train_config.mode == Mode::Supervised
            && video.gt_segments.is_empty()
            && video.labels.iter().any(|&v| v != 0.0)
        {
            return Err(Error::MissingFrameLabels(video.id.clone()));
        }
    }
    Ok(())
}

fn run_epochs(
    dataset: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    result: &mut TrainResult,
    start_epoch: usize,
) -> Result<()> {
    for epoch in start_epoch..train_config.epochs {
        let mean_loss = run_epoch(dataset, model_config, train_config, result, epoch)?;
        result.loss_curve.push(mean_loss);
    }
    Ok(())
}

fn run_epoch(
    dataset: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    result: &mut TrainResult,
    epoch: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    rng.set_stream(1 + epoch as u64);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);

    let mut loss_sum = 0.0;
    for (batch_index, batch) in order.chunks(train_config.batch_size).enumerate() {
        let group_size = batch.len().div_ceil(train_config.sub_batches).max(1);
        for group in batch.chunks(group_size) {
            for &video_index in group {
                let video = &dataset.videos[video_index];
                let offset = rng.random_range(0..=train_config.max_start_offset);
                let sub = subsample(video, train_config.temporal_stride, offset);
                let loss = match train_config.mode {
                    Mode::Naive => naive_forward_backward(
                        &sub.features,
                        &sub.labels,
                        &mut result.params,
                        model_config,
                        Phase::Train,
                        &mut rng,
                    )?,
                    Mode::Wsgn => weak_forward_backward(
                        &sub.features,
                        &sub.labels,
                        &mut result.params,
                        model_config,
                        Phase::Train,
                        &mut rng,
                    )?
                    .0,
                    Mode::Supervised => {
                        let frame_labels = frame_label_matrix(&sub, model_config.num_classes);
                        supervised_forward_backward(
                            &sub.features,
                            &sub.labels,
                            &frame_labels,
                            &mut result.params,
                            model_config,
                            Phase::Train,
                            &mut rng,
                        )?
                    }
                };
                if !loss.is_finite() {
                    return Err(Error::TrainingDiverged {
                        epoch,
                        batch: batch_index,
                        video_id: video.id.clone(),
                    });
                }
                loss_sum += loss;
            }
        }
        let scale = 1.0 / batch.len() as f64;
        for block in result.params.blocks_mut() {
            block.grad.scale_in_place(scale);
        }
        sgd_step(&mut result.params, &mut result.optim)?;
    }
    Ok(loss_sum / dataset.len() as f64)
}

/// One video's inference output.
#[derive(Debug, Clone)]
pub struct VideoTrace {
    pub video_id: String,
    pub trace: ForwardTrace,
}

/// Runs evaluation-mode inference over every full-length video, returning the
/// per-component score matrices in dataset order.
pub fn infer(
    dataset: &Dataset,
    params: &ModelParams,
    model_config: &ModelConfig,
    mode: Mode,
) -> Result<Vec<VideoTrace>> {
    let mut traces = Vec::with_capacity(dataset.len());
    for video in &dataset.videos {
        let trace = inference_trace(&video.features, params, model_config, mode)?;
        traces.push(VideoTrace {
            video_id: video.id.clone(),
            trace,
        });
    }
    Ok(traces)
}
