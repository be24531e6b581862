use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use wsgn_core::datagen::SynthConfig;
use wsgn_core::detector::DetectorConfig;
use wsgn_core::model::{ModelConfig, NormalizationSet};
use wsgn_core::trainer::TrainConfig;
use wsgn_core::{Error, Result};

/// Settings shared by every subcommand, assembled in three layers:
/// built-in defaults, then the optional configuration file, then
/// command-line flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub hidden_dim: Option<usize>,
    pub dropout_rate: f64,
    pub epsilon_std: f64,
    pub normalizations: NormalizationSet,
    pub train: TrainConfig,
    pub score_threshold: f64,
    pub min_duration: f64,
    pub iou_thresholds: Vec<f64>,
    pub timepoints: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            synth: SynthConfig::default(),
            hidden_dim: None,
            dropout_rate: 0.5,
            epsilon_std: 1e-5,
            normalizations: NormalizationSet::all(),
            train: TrainConfig::default(),
            score_threshold: 0.1,
            min_duration: 1.0,
            iou_thresholds: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            timepoints: 25,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = path {
            config.apply_file(path)?;
        }
        Ok(config)
    }

    /// One seed drives both data generation and training.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.train.seed = seed;
    }

    pub fn model_config(&self, feature_dim: usize, num_classes: usize) -> ModelConfig {
        let mut config = ModelConfig::new(feature_dim, num_classes);
        if let Some(hidden) = self.hidden_dim {
            config.hidden_dim = hidden;
        }
        config.dropout_rate = self.dropout_rate;
        config.epsilon_std = self.epsilon_std;
        config.enabled_normalizations = self.normalizations;
        config
    }

    pub fn detector_config(&self, fps: f64) -> DetectorConfig {
        DetectorConfig {
            score_threshold: self.score_threshold,
            min_duration: self.min_duration,
            fps,
        }
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text =
            fs::read_to_string(path).map_err(|err| Error::io(path.display().to_string(), err))?;
        for (index, raw_line) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            for token in trimmed.split_whitespace() {
                let (key, value) = token.split_once('=').ok_or_else(|| Error::Validation {
                    path: path.display().to_string(),
                    line,
                    detail: format!("expected key=value, got {token}"),
                })?;
                self.apply(key, value, path, line)?;
            }
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str, path: &Path, line: usize) -> Result<()> {
        match key {
            "num_classes" => self.synth.num_classes = parse(key, value, path, line)?,
            "feature_dim" => self.synth.feature_dim = parse(key, value, path, line)?,
            "train_videos" => self.synth.train_videos = parse(key, value, path, line)?,
            "test_videos" => self.synth.test_videos = parse(key, value, path, line)?,
            "min_frames" => self.synth.min_frames = parse(key, value, path, line)?,
            "max_frames" => self.synth.max_frames = parse(key, value, path, line)?,
            "fps" => self.synth.fps = parse(key, value, path, line)?,
            "min_actions" => self.synth.min_actions = parse(key, value, path, line)?,
            "max_actions" => self.synth.max_actions = parse(key, value, path, line)?,
            "min_action_len" => self.synth.min_action_len = parse(key, value, path, line)?,
            "max_action_len" => self.synth.max_action_len = parse(key, value, path, line)?,
            "action_density" => self.synth.action_density = parse(key, value, path, line)?,
            "amplitude" => self.synth.amplitude = parse(key, value, path, line)?,
            "background_noise" => self.synth.background_noise = parse(key, value, path, line)?,
            "action_noise" => self.synth.action_noise = parse(key, value, path, line)?,
            "noise_corr" => self.synth.noise_corr = parse(key, value, path, line)?,
            "gain_min" => self.synth.gain_min = parse(key, value, path, line)?,
            "gain_max" => self.synth.gain_max = parse(key, value, path, line)?,
            "seed" => {
                let seed = parse(key, value, path, line)?;
                self.set_seed(seed);
            }
            "hidden_dim" => self.hidden_dim = Some(parse(key, value, path, line)?),
            "dropout_rate" => self.dropout_rate = parse(key, value, path, line)?,
            "epsilon_std" => self.epsilon_std = parse(key, value, path, line)?,
            "normalizations" => self.normalizations = parse(key, value, path, line)?,
            "mode" => self.train.mode = parse(key, value, path, line)?,
            "epochs" => self.train.epochs = parse(key, value, path, line)?,
            "batch_size" => self.train.batch_size = parse(key, value, path, line)?,
            "sub_batches" => self.train.sub_batches = parse(key, value, path, line)?,
            "learning_rate" => self.train.learning_rate = parse(key, value, path, line)?,
            "momentum" => self.train.momentum = parse(key, value, path, line)?,
            "weight_decay" => self.train.weight_decay = parse(key, value, path, line)?,
            "temporal_stride" => self.train.temporal_stride = parse(key, value, path, line)?,
            "max_start_offset" => self.train.max_start_offset = parse(key, value, path, line)?,
            "score_threshold" => self.score_threshold = parse(key, value, path, line)?,
            "min_duration" => self.min_duration = parse(key, value, path, line)?,
            "iou_thresholds" => {
                let mut thresholds = Vec::new();
                for part in value.split(',') {
                    thresholds.push(parse(key, part, path, line)?);
                }
                self.iou_thresholds = thresholds;
            }
            "timepoints" => self.timepoints = parse(key, value, path, line)?,
            _ => {
                return Err(Error::Validation {
                    path: path.display().to_string(),
                    line,
                    detail: format!("unknown configuration key {key}"),
                })
            }
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str, path: &Path, line: usize) -> Result<T>
where
    T::Err: Display,
{
    value.parse().map_err(|err| Error::Validation {
        path: path.display().to_string(),
        line,
        detail: format!("bad value for {key}: {err}"),
    })
}
