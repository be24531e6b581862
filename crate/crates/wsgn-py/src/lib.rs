//! Python bindings for the weak localization toolkit. Matrices cross the
//! boundary as nested lists of floats; datasets and trained models stay in
//! Rust behind opaque handles.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wsgn_core::datagen::{self, SynthConfig};
use wsgn_core::detector::{self, DetectorConfig};
use wsgn_core::diffcore::Matrix;
use wsgn_core::evaluator::{self, Detection, GroundTruth, TimepointScores};
use wsgn_core::model::{frame_scores, ModelConfig};
use wsgn_core::trainer::{self, Checkpoint, TrainConfig, TrainResult};

fn py_err(err: wsgn_core::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(py_err)
}

fn to_lists(matrix: &Matrix) -> Vec<Vec<f64>> {
    (0..matrix.rows()).map(|r| matrix.row(r).to_vec()).collect()
}

fn ground_truths(dataset: &datagen::Dataset) -> Vec<GroundTruth> {
    let mut gts = Vec::new();
    for video in &dataset.videos {
        for seg in &video.gt_segments {
            gts.push(GroundTruth {
                video_id: video.id.clone(),
                class_id: seg.class_id,
                start: seg.start as f64 / dataset.fps,
                end: seg.end as f64 / dataset.fps,
            });
        }
    }
    gts
}

/// A split of untrimmed videos sharing one label space and frame rate.
#[pyclass]
pub struct Dataset {
    inner: datagen::Dataset,
}

impl Dataset {
    fn video(&self, video_id: &str) -> PyResult<&datagen::FeatureSequence> {
        self.inner
            .videos
            .iter()
            .find(|v| v.id == video_id)
            .ok_or_else(|| PyValueError::new_err(format!("unknown video id {video_id:?}")))
    }
}

#[pymethods]
impl Dataset {
    /// Synthesize matched train and test splits from one seeded
    /// configuration; identical arguments always produce identical data.
    #[staticmethod]
    #[pyo3(signature = (
        seed = 0,
        num_classes = 5,
        feature_dim = 16,
        train_videos = 200,
        test_videos = 50,
        min_frames = 40,
        max_frames = 120,
        fps = 5.0,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        seed: u64,
        num_classes: usize,
        feature_dim: usize,
        train_videos: usize,
        test_videos: usize,
        min_frames: usize,
        max_frames: usize,
        fps: f64,
    ) -> PyResult<(Dataset, Dataset)> {
        let config = SynthConfig {
            seed,
            num_classes,
            feature_dim,
            train_videos,
            test_videos,
            min_frames,
            max_frames,
            fps,
            ..SynthConfig::default()
        };
        let (train, test) = datagen::generate(&config).map_err(py_err)?;
        Ok((Dataset { inner: train }, Dataset { inner: test }))
    }

    /// Read a split back from a manifest written by `save`.
    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Dataset> {
        let (inner, warnings) = datagen::read_manifest(&manifest).map_err(py_err)?;
        for warning in warnings {
            eprintln!("warning: {warning}");
        }
        Ok(Dataset { inner })
    }

    /// Write the split under `dir` and return the manifest path.
    fn save(&self, dir: PathBuf) -> PyResult<String> {
        let manifest = datagen::write_dataset(&dir, &self.inner).map_err(py_err)?;
        Ok(manifest.display().to_string())
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes
    }

    #[getter]
    fn fps(&self) -> f64 {
        self.inner.fps
    }

    fn video_ids(&self) -> Vec<String> {
        self.inner.videos.iter().map(|v| v.id.clone()).collect()
    }

    /// Per-frame feature matrix of one video, frames by feature channels.
    fn features(&self, video_id: &str) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_lists(&self.video(video_id)?.features))
    }

    /// Video-level label vector: one 0/1 entry per class.
    fn labels(&self, video_id: &str) -> PyResult<Vec<f64>> {
        Ok(self.video(video_id)?.labels.clone())
    }

    /// Ground-truth segments of one video as (class_id, start, end) with
    /// boundaries in seconds.
    fn segments(&self, video_id: &str) -> PyResult<Vec<(usize, f64, f64)>> {
        let fps = self.inner.fps;
        Ok(self
            .video(video_id)?
            .gt_segments
            .iter()
            .map(|seg| (seg.class_id, seg.start as f64 / fps, seg.end as f64 / fps))
            .collect())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset({} {} videos, {} classes, {} fps)",
            self.inner.len(),
            self.inner.split,
            self.inner.num_classes,
            self.inner.fps
        )
    }
}

/// A trained model checkpoint bound to the recipe that produced it.
#[pyclass]
pub struct Model {
    checkpoint: Checkpoint,
}

fn feature_dim(dataset: &datagen::Dataset) -> PyResult<usize> {
    dataset
        .videos
        .first()
        .map(|v| v.features.cols())
        .ok_or_else(|| PyValueError::new_err("dataset has no videos"))
}

fn assemble(model_config: ModelConfig, train_config: TrainConfig, result: TrainResult) -> Model {
    Model {
        checkpoint: Checkpoint {
            params: result.params,
            velocities: result.optim.velocities,
            model_config,
            next_epoch: train_config.epochs,
            train_config,
            loss_curve: result.loss_curve,
        },
    }
}

#[pymethods]
impl Model {
    /// Train a fresh model on `dataset`. `mode` is naive, wsgn, or
    /// supervised; `normalizations` names the enabled frame weightings,
    /// e.g. "all", "none", or "zloc+gloc". Omitted settings keep the
    /// library defaults.
    #[staticmethod]
    #[pyo3(signature = (
        dataset,
        mode = "wsgn",
        normalizations = "all",
        epochs = None,
        learning_rate = None,
        hidden_dim = None,
        seed = None,
    ))]
    fn train(
        dataset: &Dataset,
        mode: &str,
        normalizations: &str,
        epochs: Option<usize>,
        learning_rate: Option<f64>,
        hidden_dim: Option<usize>,
        seed: Option<u64>,
    ) -> PyResult<Model> {
        let mut model_config =
            ModelConfig::new(feature_dim(&dataset.inner)?, dataset.inner.num_classes);
        model_config.enabled_normalizations = normalizations.parse().map_err(py_err)?;
        if let Some(hidden_dim) = hidden_dim {
            model_config.hidden_dim = hidden_dim;
        }
        let mut train_config = TrainConfig::default();
        train_config.mode = mode.parse().map_err(py_err)?;
        if let Some(epochs) = epochs {
            train_config.epochs = epochs;
        }
        if let Some(learning_rate) = learning_rate {
            train_config.learning_rate = learning_rate;
        }
        if let Some(seed) = seed {
            train_config.seed = seed;
        }
        let result =
            trainer::train(&dataset.inner, &model_config, &train_config).map_err(py_err)?;
        Ok(assemble(model_config, train_config, result))
    }

    /// Continue this model's run on `dataset` up to a longer epoch horizon,
    /// returning a new model. Matches an uninterrupted run exactly.
    fn resume(&self, dataset: &Dataset, epochs: usize) -> PyResult<Model> {
        let mut checkpoint = self.checkpoint.clone();
        checkpoint.train_config.epochs = epochs;
        let model_config = checkpoint.model_config.clone();
        let train_config = checkpoint.train_config.clone();
        let result = trainer::resume(&dataset.inner, checkpoint).map_err(py_err)?;
        Ok(assemble(model_config, train_config, result))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Model> {
        Ok(Model {
            checkpoint: trainer::load_checkpoint(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        trainer::save_checkpoint(&path, &self.checkpoint).map_err(py_err)
    }

    /// Mean training loss after each completed epoch.
    #[getter]
    fn loss_curve(&self) -> Vec<f64> {
        self.checkpoint.loss_curve.clone()
    }

    #[getter]
    fn mode(&self) -> String {
        self.checkpoint.train_config.mode.to_string()
    }

    #[getter]
    fn normalizations(&self) -> String {
        self.checkpoint
            .model_config
            .enabled_normalizations
            .to_string()
    }

    /// Detections over a dataset as (video_id, class_id, start, end,
    /// confidence) with boundaries in seconds.
    #[pyo3(signature = (dataset, score_threshold = 0.1, min_duration = 1.0))]
    fn detect(
        &self,
        dataset: &Dataset,
        score_threshold: f64,
        min_duration: f64,
    ) -> PyResult<Vec<(String, usize, f64, f64, f64)>> {
        let detector = DetectorConfig {
            score_threshold,
            min_duration,
            fps: dataset.inner.fps,
        };
        detector.validate().map_err(py_err)?;
        let traces = self.infer(&dataset.inner)?;
        let mut out = Vec::new();
        for video_trace in &traces {
            let scores = frame_scores(&video_trace.trace.probs, &video_trace.trace.fused)
                .map_err(py_err)?;
            for seg in detector::extract_segments(&scores, &detector).map_err(py_err)? {
                out.push((
                    video_trace.video_id.clone(),
                    seg.class_id,
                    seg.start,
                    seg.end,
                    seg.confidence,
                ));
            }
        }
        Ok(out)
    }

    /// Every matrix the model computes for one video, keyed by name:
    /// probs, fused, scores, prediction, and the zloc/gloc/sloc weight
    /// matrices. All three weightings are traced for inspection; fused
    /// averages only the enabled ones.
    fn components<'py>(
        &self,
        py: Python<'py>,
        dataset: &Dataset,
        video_id: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let video = dataset.video(video_id)?;
        let single = datagen::Dataset {
            videos: vec![video.clone()],
            split: dataset.inner.split,
            num_classes: dataset.inner.num_classes,
            fps: dataset.inner.fps,
        };
        let traces = self.infer(&single)?;
        let trace = &traces[0].trace;
        let out = PyDict::new(py);
        out.set_item("probs", to_lists(&trace.probs))?;
        out.set_item("fused", to_lists(&trace.fused))?;
        out.set_item(
            "scores",
            to_lists(&frame_scores(&trace.probs, &trace.fused).map_err(py_err)?),
        )?;
        out.set_item("prediction", trace.prediction.clone())?;
        out.set_item("zloc", trace.zloc_weights.as_ref().map(to_lists))?;
        out.set_item("gloc", trace.gloc_weights.as_ref().map(to_lists))?;
        out.set_item("sloc", trace.sloc_weights.as_ref().map(to_lists))?;
        Ok(out)
    }

    /// Detection and localization quality on a labeled dataset. Returns
    /// {"detection": {iou_threshold: mAP}, "localization": mAP}.
    #[pyo3(signature = (
        dataset,
        iou_thresholds = vec![0.1, 0.2, 0.3, 0.4, 0.5],
        score_threshold = 0.1,
        min_duration = 1.0,
        timepoints = 25,
    ))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        dataset: &Dataset,
        iou_thresholds: Vec<f64>,
        score_threshold: f64,
        min_duration: f64,
        timepoints: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        if timepoints == 0 {
            return Err(PyValueError::new_err("timepoints must be at least 1"));
        }
        let detector = DetectorConfig {
            score_threshold,
            min_duration,
            fps: dataset.inner.fps,
        };
        detector.validate().map_err(py_err)?;
        let gts = ground_truths(&dataset.inner);
        let traces = self.infer(&dataset.inner)?;

        let mut detections = Vec::new();
        let mut scored = Vec::new();
        for video_trace in &traces {
            let scores = frame_scores(&video_trace.trace.probs, &video_trace.trace.fused)
                .map_err(py_err)?;
            for seg in detector::extract_segments(&scores, &detector).map_err(py_err)? {
                detections.push(Detection {
                    video_id: video_trace.video_id.clone(),
                    class_id: seg.class_id,
                    start: seg.start,
                    end: seg.end,
                    confidence: seg.confidence,
                });
            }
            let indices = detector::sample_timepoints(scores.rows(), timepoints);
            scored.push(TimepointScores {
                video_id: video_trace.video_id.clone(),
                scores: detector::score_timepoints(&scores, timepoints),
                timestamps: indices
                    .iter()
                    .map(|&t| t as f64 / dataset.inner.fps)
                    .collect(),
            });
        }

        let detection = evaluator::detection_map(
            &detections,
            &gts,
            dataset.inner.num_classes,
            &iou_thresholds,
        )
        .map_err(py_err)?;
        let localization =
            evaluator::localization_map(&scored, &gts, dataset.inner.num_classes).map_err(py_err)?;

        let by_threshold = PyDict::new(py);
        for (threshold, map) in detection.thresholds.iter().zip(&detection.map) {
            by_threshold.set_item(threshold, map)?;
        }
        let out = PyDict::new(py);
        out.set_item("detection", by_threshold)?;
        out.set_item("localization", localization.map)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(mode={}, normalizations={}, epochs={})",
            self.checkpoint.train_config.mode,
            self.checkpoint.model_config.enabled_normalizations,
            self.checkpoint.next_epoch
        )
    }
}

impl Model {
    fn infer(&self, dataset: &datagen::Dataset) -> PyResult<Vec<trainer::VideoTrace>> {
        trainer::infer(
            dataset,
            &self.checkpoint.params,
            &self.checkpoint.model_config,
            self.checkpoint.train_config.mode,
        )
        .map_err(py_err)
    }
}

/// Per-entry Gaussian weights from each column's own mean and standard
/// deviation; every output lies in (0, 1] and a constant column maps to 1.
#[pyfunction]
#[pyo3(signature = (scores, epsilon_std = 1e-5))]
fn zloc(scores: Vec<Vec<f64>>, epsilon_std: f64) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_lists(&wsgn_core::model::zloc(
        &to_matrix(scores)?,
        epsilon_std,
    )))
}

/// Per-entry Gaussian weights against externally supplied per-class centers
/// and spreads.
#[pyfunction]
#[pyo3(signature = (scores, mean, scale, epsilon_std = 1e-5))]
fn gloc(
    scores: Vec<Vec<f64>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    epsilon_std: f64,
) -> PyResult<Vec<Vec<f64>>> {
    wsgn_core::model::gloc(&to_matrix(scores)?, &mean, &scale, epsilon_std)
        .map(|m| to_lists(&m))
        .map_err(py_err)
}

/// Softmax over time within each column; every column sums to one.
#[pyfunction]
fn sloc(scores: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_lists(&wsgn_core::model::sloc(&to_matrix(scores)?)))
}

/// Intersection over union of two half-open time intervals.
#[pyfunction]
fn interval_iou(a_start: f64, a_end: f64, b_start: f64, b_end: f64) -> f64 {
    evaluator::interval_iou(a_start, a_end, b_start, b_end)
}

/// Average precision of detections (video_id, class_id, start, end,
/// confidence) against ground truths (video_id, class_id, start, end) at one
/// IoU threshold. Start and end are seconds.
#[pyfunction]
#[pyo3(signature = (detections, ground_truths, iou_threshold = 0.5))]
fn average_precision(
    detections: Vec<(String, usize, f64, f64, f64)>,
    ground_truths: Vec<(String, usize, f64, f64)>,
    iou_threshold: f64,
) -> f64 {
    let dets: Vec<Detection> = detections
        .into_iter()
        .map(|(video_id, class_id, start, end, confidence)| Detection {
            video_id,
            class_id,
            start,
            end,
            confidence,
        })
        .collect();
    let gts: Vec<GroundTruth> = ground_truths
        .into_iter()
        .map(|(video_id, class_id, start, end)| GroundTruth {
            video_id,
            class_id,
            start,
            end,
        })
        .collect();
    evaluator::average_precision(&dets, &gts, iou_threshold)
}

/// Evenly spread frame indices used to probe localization quality.
#[pyfunction]
fn sample_timepoints(frames: usize, count: usize) -> PyResult<Vec<usize>> {
    if frames == 0 || count == 0 {
        return Err(PyValueError::new_err("frames and count must be at least 1"));
    }
    Ok(detector::sample_timepoints(frames, count))
}

/// Weakly supervised temporal action localization toolkit.
#[pymodule]
fn wsgn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(zloc, m)?)?;
    m.add_function(wrap_pyfunction!(gloc, m)?)?;
    m.add_function(wrap_pyfunction!(sloc, m)?)?;
    m.add_function(wrap_pyfunction!(interval_iou, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(sample_timepoints, m)?)?;
    Ok(())
}
