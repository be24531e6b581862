use rand::{Rng, SeedableRng};

use crate::diffcore::{
    bce_loss, dropout_forward, linear_backward, linear_forward, relu_backward, relu_forward,
    softmax_rows, softmax_rows_backward, Matrix, ParamBlock,
};
use crate::error::{Error, Result};
use crate::model::config::{Mode, ModelConfig, Phase};
use crate::model::normalize::{
    fuse_weights, gloc, gloc_backward, sloc, sloc_backward, zloc, zloc_backward,
};
use crate::model::params::ModelParams;

/// Everything a forward pass produces, kept for analysis and backward.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Raw selection scores X (T x C).
    pub selection: Matrix,
    /// Per-frame class probabilities P (T x C).
    pub probs: Matrix,
    /// Local Gaussian weights, when computed.
    pub zloc_weights: Option<Matrix>,
    /// Global Gaussian weights, when computed.
    pub gloc_weights: Option<Matrix>,
    /// Temporal softmax weights, when computed.
    pub sloc_weights: Option<Matrix>,
    /// Fused selection weights G (T x C).
    pub fused: Matrix,
    /// Video-level prediction (length C).
    pub prediction: Vec<f64>,
}

struct HeadTrace {
    dropped: Matrix,
    pre_hidden: Matrix,
    hidden: Matrix,
    logits: Matrix,
}

fn check_features(features: &Matrix, config: &ModelConfig) -> Result<()> {
    if features.cols() != config.feature_dim {
        return Err(Error::DimensionMismatch {
            op: "forward",
            detail: format!(
                "features are {}x{} but the model expects feature_dim {}",
                features.rows(),
                features.cols(),
                config.feature_dim
            ),
        });
    }
    if features.rows() == 0 {
        return Err(Error::EmptyDataset("a video needs at least one frame".to_string()));
    }
    Ok(())
}

fn head_forward<R: Rng>(
    features: &Matrix,
    w1: &ParamBlock,
    b1: &ParamBlock,
    w2: &ParamBlock,
    b2: &ParamBlock,
    dropout_rate: f64,
    phase: Phase,
    rng: &mut R,
) -> Result<HeadTrace> {
    let training = phase == Phase::Train;
    let (dropped, _mask) = dropout_forward(features, dropout_rate, rng, training)?;
    let pre_hidden = linear_forward(&dropped, &w1.value, b1.value.row(0))?;
    let hidden = relu_forward(&pre_hidden);
    let logits = linear_forward(&hidden, &w2.value, b2.value.row(0))?;
    Ok(HeadTrace {
        dropped,
        pre_hidden,
        hidden,
        logits,
    })
}

fn head_backward(
    w1: &mut ParamBlock,
    b1: &mut ParamBlock,
    w2: &mut ParamBlock,
    b2: &mut ParamBlock,
    trace: &HeadTrace,
    grad_logits: &Matrix,
) -> Result<()> {
    let (grad_hidden, grad_w2, grad_b2) = linear_backward(&trace.hidden, &w2.value, grad_logits)?;
    w2.grad.add_scaled(&grad_w2, 1.0)?;
    for (g, &v) in b2.grad.row_mut(0).iter_mut().zip(grad_b2.iter()) {
        *g += v;
    }
    let grad_pre = relu_backward(&trace.pre_hidden, &grad_hidden)?;
    let (_, grad_w1, grad_b1) = linear_backward(&trace.dropped, &w1.value, &grad_pre)?;
    w1.grad.add_scaled(&grad_w1, 1.0)?;
    for (g, &v) in b1.grad.row_mut(0).iter_mut().zip(grad_b1.iter()) {
        *g += v;
    }
    Ok(())
}

/// Per-frame class probabilities from the classification head.
pub fn class_probs<R: Rng>(
    features: &Matrix,
    params: &ModelParams,
    config: &ModelConfig,
    phase: Phase,
    rng: &mut R,
) -> Result<Matrix> {
    check_features(features, config)?;
    let trace = head_forward(
        features,
        &params.cls_w1,
        &params.cls_b1,
        &params.cls_w2,
        &params.cls_b2,
        config.dropout_rate,
        phase,
        rng,
    )?;
    Ok(softmax_rows(&trace.logits))
}

/// Raw selection scores from the selection head.
pub fn select_scores<R: Rng>(
    features: &Matrix,
    params: &ModelParams,
    config: &ModelConfig,
    phase: Phase,
    rng: &mut R,
) -> Result<Matrix> {
    check_features(features, config)?;
    let trace = head_forward(
        features,
        &params.det_w1,
        &params.det_b1,
        &params.det_w2,
        &params.det_b2,
        config.dropout_rate,
        phase,
        rng,
    )?;
    Ok(trace.logits)
}

/// Selection-weighted video prediction: the mean over frames of G*P.
pub fn video_predict(probs: &Matrix, weights: &Matrix) -> Result<Vec<f64>> {
    if probs.shape() != weights.shape() {
        return Err(Error::DimensionMismatch {
            op: "video_predict",
            detail: format!(
                "probabilities are {}x{}, weights are {}x{}",
                probs.rows(),
                probs.cols(),
                weights.rows(),
                weights.cols()
            ),
        });
    }
    if probs.rows() == 0 {
        return Err(Error::EmptyDataset("video prediction needs at least one frame".to_string()));
    }
    let (t_len, c_len) = probs.shape();
    let mut pred = vec![0.0; c_len];
    for t in 0..t_len {
        for q in 0..c_len {
            pred[q] += weights[(t, q)] * probs[(t, q)];
        }
    }
    for p in &mut pred {
        *p /= t_len as f64;
    }
    Ok(pred)
}

/// Unweighted video prediction: the mean of per-frame probabilities.
pub fn naive_predict(probs: &Matrix) -> Result<Vec<f64>> {
    let ones = Matrix::filled(probs.rows(), probs.cols(), 1.0);
    video_predict(probs, &ones)
}

/// Fused per-frame localization scores G*P.
pub fn frame_scores(probs: &Matrix, weights: &Matrix) -> Result<Matrix> {
    probs.zip(weights, |p, g| p * g)
}

fn normalization_weights(
    selection: &Matrix,
    params: &ModelParams,
    config: &ModelConfig,
    compute_all: bool,
) -> Result<(Option<Matrix>, Option<Matrix>, Option<Matrix>)> {
    let enabled = &config.enabled_normalizations;
    let z = if enabled.zloc || compute_all {
        Some(zloc(selection, config.epsilon_std))
    } else {
        None
    };
    let l = if enabled.gloc || compute_all {
        Some(gloc(
            selection,
            params.global_mean.value.row(0),
            params.global_scale.value.row(0),
            config.epsilon_std,
        )?)
    } else {
        None
    };
    let s = if enabled.sloc || compute_all {
        Some(sloc(selection))
    } else {
        None
    };
    Ok((z, l, s))
}

/// Full selection-weighted forward and backward pass for one video.
///
/// Computes the weak video-level loss and accumulates exact gradients into
/// every parameter block, including the learned global mean/scale and the
/// path through the per-video score statistics.
pub fn weak_forward_backward<R: Rng>(
    features: &Matrix,
    labels: &[f64],
    params: &mut ModelParams,
    config: &ModelConfig,
    phase: Phase,
    rng: &mut R,
) -> Result<(f64, ForwardTrace)> {
    check_features(features, config)?;
    if labels.len() != config.num_classes {
        return Err(Error::DimensionMismatch {
            op: "weak_forward_backward",
            detail: format!(
                "label vector has length {} but the model has {} classes",
                labels.len(),
                config.num_classes
            ),
        });
    }
    let cls = head_forward(
        features,
        &params.cls_w1,
        &params.cls_b1,
        &params.cls_w2,
        &params.cls_b2,
        config.dropout_rate,
        phase,
        rng,
    )?;
    let probs = softmax_rows(&cls.logits);
    let det = head_forward(
        features,
        &params.det_w1,
        &params.det_b1,
        &params.det_w2,
        &params.det_b2,
        config.dropout_rate,
        phase,
        rng,
    )?;
    let selection = det.logits.clone();

    let (z, l, s) = normalization_weights(&selection, params, config, false)?;
    let fused = fuse_weights(z.as_ref(), l.as_ref(), s.as_ref(), &config.enabled_normalizations)?;
    let prediction = video_predict(&probs, &fused)?;
    let (loss, grad_pred) = bce_loss(&prediction, labels)?;

    let (t_len, c_len) = probs.shape();
    let t_f = t_len as f64;
    let mut grad_fused = Matrix::zeros(t_len, c_len);
    let mut grad_probs = Matrix::zeros(t_len, c_len);
    for t in 0..t_len {
        for q in 0..c_len {
            grad_fused[(t, q)] = grad_pred[q] * probs[(t, q)] / t_f;
            grad_probs[(t, q)] = grad_pred[q] * fused[(t, q)] / t_f;
        }
    }

    let share = 1.0 / config.enabled_normalizations.count() as f64;
    let mut grad_selection = Matrix::zeros(t_len, c_len);
    if z.is_some() {
        let mut grad_z = grad_fused.clone();
        grad_z.scale_in_place(share);
        let gx = zloc_backward(&selection, &grad_z, config.epsilon_std)?;
        grad_selection.add_scaled(&gx, 1.0)?;
    }
    if l.is_some() {
        let mut grad_l = grad_fused.clone();
        grad_l.scale_in_place(share);
        let (gx, grad_mean, grad_scale) = gloc_backward(
            &selection,
            params.global_mean.value.row(0),
            params.global_scale.value.row(0),
            &grad_l,
            config.epsilon_std,
        )?;
        grad_selection.add_scaled(&gx, 1.0)?;
        for (g, &v) in params.global_mean.grad.row_mut(0).iter_mut().zip(grad_mean.iter()) {
            *g += v;
        }
        for (g, &v) in params.global_scale.grad.row_mut(0).iter_mut().zip(grad_scale.iter()) {
            *g += v;
        }
    }
    if let Some(s_weights) = &s {
        let mut grad_s = grad_fused.clone();
        grad_s.scale_in_place(share);
        let gx = sloc_backward(s_weights, &grad_s)?;
        grad_selection.add_scaled(&gx, 1.0)?;
    }

    let grad_logits = softmax_rows_backward(&probs, &grad_probs)?;
    head_backward(
        &mut params.cls_w1,
        &mut params.cls_b1,
        &mut params.cls_w2,
        &mut params.cls_b2,
        &cls,
        &grad_logits,
    )?;
    head_backward(
        &mut params.det_w1,
        &mut params.det_b1,
        &mut params.det_w2,
        &mut params.det_b2,
        &det,
        &grad_selection,
    )?;

    let trace = ForwardTrace {
        selection,
        probs,
        zloc_weights: z,
        gloc_weights: l,
        sloc_weights: s,
        fused,
        prediction,
    };
    Ok((loss, trace))
}

/// Forward and backward for the unweighted baseline: the video prediction is
/// the plain mean of per-frame class probabilities and only the
/// classification head receives gradients.
pub fn naive_forward_backward<R: Rng>(
    features: &Matrix,
    labels: &[f64],
    params: &mut ModelParams,
    config: &ModelConfig,
    phase: Phase,
    rng: &mut R,
) -> Result<f64> {
    check_features(features, config)?;
    if labels.len() != config.num_classes {
        return Err(Error::DimensionMismatch {
            op: "naive_forward_backward",
            detail: format!(
                "label vector has length {} but the model has {} classes",
                labels.len(),
                config.num_classes
            ),
        });
    }
    let cls = head_forward(
        features,
        &params.cls_w1,
        &params.cls_b1,
        &params.cls_w2,
        &params.cls_b2,
        config.dropout_rate,
        phase,
        rng,
    )?;
    let probs = softmax_rows(&cls.logits);
    let prediction = naive_predict(&probs)?;
    let (loss, grad_pred) = bce_loss(&prediction, labels)?;

    let (t_len, c_len) = probs.shape();
    let t_f = t_len as f64;
    let mut grad_probs = Matrix::zeros(t_len, c_len);
    for t in 0..t_len {
        for q in 0..c_len {
            grad_probs[(t, q)] = grad_pred[q] / t_f;
        }
    }
    let grad_logits = softmax_rows_backward(&probs, &grad_probs)?;
    head_backward(
        &mut params.cls_w1,
        &mut params.cls_b1,
        &mut params.cls_w2,
        &mut params.cls_b2,
        &cls,
        &grad_logits,
    )?;
    Ok(loss)
}

/// Forward and backward for the frame-supervised upper bound.
///
/// The loss is the video-level term on the mean prediction plus the mean
/// over frames of the per-frame term against the given frame labels. The
/// selection stream is unused.
pub fn supervised_forward_backward<R: Rng>(
    features: &Matrix,
    labels: &[f64],
    frame_labels: &Matrix,
    params: &mut ModelParams,
    config: &ModelConfig,
    phase: Phase,
    rng: &mut R,
) -> Result<f64> {
    check_features(features, config)?;
    if labels.len() != config.num_classes {
        return Err(Error::DimensionMismatch {
            op: "supervised_forward_backward",
            detail: format!(
                "label vector has length {} but the model has {} classes",
                labels.len(),
                config.num_classes
            ),
        });
    }
    if frame_labels.shape() != (features.rows(), config.num_classes) {
        return Err(Error::DimensionMismatch {
            op: "supervised_forward_backward",
            detail: format!(
                "frame labels are {}x{} but {} frames and {} classes are required",
                frame_labels.rows(),
                frame_labels.cols(),
                features.rows(),
                config.num_classes
            ),
        });
    }
    let cls = head_forward(
        features,
        &params.cls_w1,
        &params.cls_b1,
        &params.cls_w2,
        &params.cls_b2,
        config.dropout_rate,
        phase,
        rng,
    )?;
    let probs = softmax_rows(&cls.logits);
    let prediction = naive_predict(&probs)?;
    let (video_loss, grad_pred) = bce_loss(&prediction, labels)?;

    let (t_len, c_len) = probs.shape();
    let t_f = t_len as f64;
    let mut grad_probs = Matrix::zeros(t_len, c_len);
    let mut frame_loss_sum = 0.0;
    for t in 0..t_len {
        let (frame_loss, frame_grad) = bce_loss(probs.row(t), frame_labels.row(t))?;
        frame_loss_sum += frame_loss;
        for q in 0..c_len {
            grad_probs[(t, q)] = grad_pred[q] / t_f + frame_grad[q] / t_f;
        }
    }
    let loss = video_loss + frame_loss_sum / t_f;
    let grad_logits = softmax_rows_backward(&probs, &grad_probs)?;
    head_backward(
        &mut params.cls_w1,
        &mut params.cls_b1,
        &mut params.cls_w2,
        &mut params.cls_b2,
        &cls,
        &grad_logits,
    )?;
    Ok(loss)
}

/// Evaluation-mode forward pass producing every component matrix.
///
/// All three normalization weights are computed for analysis regardless of
/// the enabled set. The fused weights follow the mode: all-ones for the
/// baseline and supervised models, the mean of the enabled normalizations
/// otherwise.
pub fn inference_trace(
    features: &Matrix,
    params: &ModelParams,
    config: &ModelConfig,
    mode: Mode,
) -> Result<ForwardTrace> {
    check_features(features, config)?;
    let mut dummy_rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let probs = class_probs(features, params, config, Phase::Eval, &mut dummy_rng)?;
    let selection = select_scores(features, params, config, Phase::Eval, &mut dummy_rng)?;
    let (z, l, s) = normalization_weights(&selection, params, config, true)?;
    let fused = match mode {
        Mode::Naive | Mode::Supervised => Matrix::filled(probs.rows(), probs.cols(), 1.0),
        Mode::Wsgn => fuse_weights(z.as_ref(), l.as_ref(), s.as_ref(), &config.enabled_normalizations)?,
    };
    let prediction = video_predict(&probs, &fused)?;
    Ok(ForwardTrace {
        selection,
        probs,
        zloc_weights: z,
        gloc_weights: l,
        sloc_weights: s,
        fused,
        prediction,
    })
}
