use rand::Rng;

use crate::diffcore::matrix::Matrix;
use crate::error::{Error, Result};

/// Affine layer: out[t][h] = sum_m x[t][m] * w[m][h] + b[h].
pub fn linear_forward(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    if x.cols() != w.rows() || b.len() != w.cols() {
        return Err(Error::DimensionMismatch {
            op: "linear_forward",
            detail: format!(
                "x is {}x{}, w is {}x{}, b has length {}",
                x.rows(),
                x.cols(),
                w.rows(),
                w.cols(),
                b.len()
            ),
        });
    }
    let (t_len, h_len) = (x.rows(), w.cols());
    let mut out = Matrix::zeros(t_len, h_len);
    for t in 0..t_len {
        let x_row = x.row(t);
        let out_row = out.row_mut(t);
        out_row.copy_from_slice(b);
        for (m, &xv) in x_row.iter().enumerate() {
            let w_row = w.row(m);
            for h in 0..h_len {
                out_row[h] += xv * w_row[h];
            }
        }
    }
    Ok(out)
}

/// Gradients of a scalar loss through `linear_forward`.
///
/// Returns (grad_x, grad_w, grad_b) given the upstream gradient on the output.
pub fn linear_backward(
    x: &Matrix,
    w: &Matrix,
    grad_out: &Matrix,
) -> Result<(Matrix, Matrix, Vec<f64>)> {
    if x.cols() != w.rows() || grad_out.rows() != x.rows() || grad_out.cols() != w.cols() {
        return Err(Error::DimensionMismatch {
            op: "linear_backward",
            detail: format!(
                "x is {}x{}, w is {}x{}, grad_out is {}x{}",
                x.rows(),
                x.cols(),
                w.rows(),
                w.cols(),
                grad_out.rows(),
                grad_out.cols()
            ),
        });
    }
    let (t_len, m_len, h_len) = (x.rows(), w.rows(), w.cols());
    let mut grad_x = Matrix::zeros(t_len, m_len);
    let mut grad_w = Matrix::zeros(m_len, h_len);
    let mut grad_b = vec![0.0; h_len];
    for t in 0..t_len {
        let g_row = grad_out.row(t);
        let x_row = x.row(t);
        let gx_row = grad_x.row_mut(t);
        for m in 0..m_len {
            let w_row = w.row(m);
            let mut acc = 0.0;
            for h in 0..h_len {
                acc += g_row[h] * w_row[h];
            }
            gx_row[m] = acc;
        }
        for m in 0..m_len {
            let gw_row = grad_w.row_mut(m);
            let xv = x_row[m];
            for h in 0..h_len {
                gw_row[h] += xv * g_row[h];
            }
        }
        for h in 0..h_len {
            grad_b[h] += g_row[h];
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

/// Elementwise max(x, 0).
pub fn relu_forward(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(x: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    x.zip(grad_out, |xv, g| if xv > 0.0 { g } else { 0.0 })
}

/// Inverted dropout.
///
/// In training mode each entry is zeroed independently with probability
/// `rate` and survivors are scaled by 1/(1-rate); the returned mask holds the
/// multiplier applied to each entry. In evaluation mode the output equals the
/// input and the mask is all ones.
pub fn dropout_forward<R: Rng>(
    x: &Matrix,
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Matrix, Matrix)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidConfig {
            field: "dropout_rate",
            detail: format!("must lie in [0, 1), got {rate}"),
        });
    }
    if !training || rate == 0.0 {
        let mask = Matrix::filled(x.rows(), x.cols(), 1.0);
        return Ok((x.clone(), mask));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mut mask = Matrix::zeros(x.rows(), x.cols());
    for v in mask.data_mut() {
        if rng.random::<f64>() >= rate {
            *v = keep_scale;
        }
    }
    let out = x.zip(&mask, |xv, m| xv * m)?;
    Ok((out, mask))
}

/// Gradient through dropout: multiply by the stored mask.
pub fn dropout_backward(grad_out: &Matrix, mask: &Matrix) -> Result<Matrix> {
    grad_out.zip(mask, |g, m| g * m)
}

/// Row-wise softmax with max subtraction for stability.
pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let row = x.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out_row = out.row_mut(r);
        let mut sum = 0.0;
        for (o, &v) in out_row.iter_mut().zip(row.iter()) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    out
}

/// Gradient through `softmax_rows` given its output.
pub fn softmax_rows_backward(softmax_out: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    if softmax_out.shape() != grad_out.shape() {
        return Err(Error::DimensionMismatch {
            op: "softmax_rows_backward",
            detail: format!(
                "output is {}x{}, grad is {}x{}",
                softmax_out.rows(),
                softmax_out.cols(),
                grad_out.rows(),
                grad_out.cols()
            ),
        });
    }
    let mut grad_x = Matrix::zeros(softmax_out.rows(), softmax_out.cols());
    for r in 0..softmax_out.rows() {
        let s = softmax_out.row(r);
        let g = grad_out.row(r);
        let dot: f64 = s.iter().zip(g.iter()).map(|(&sv, &gv)| sv * gv).sum();
        let gx = grad_x.row_mut(r);
        for c in 0..s.len() {
            gx[c] = s[c] * (g[c] - dot);
        }
    }
    Ok(grad_x)
}

/// Clamp bound used inside the binary cross entropy.
pub const BCE_EPSILON: f64 = 1e-7;

/// Mean binary cross entropy over classes, with the prediction clamped into
/// [1e-7, 1 - 1e-7] before the logs.
///
/// Returns the loss and its gradient with respect to the prediction vector,
/// evaluated at the clamped value.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::DimensionMismatch {
            op: "bce_loss",
            detail: format!(
                "prediction has length {}, target has length {}",
                pred.len(),
                target.len()
            ),
        });
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&p, &y)) in pred.iter().zip(target.iter()).enumerate() {
        let p = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        loss -= (y * p.ln() + (1.0 - y) * (1.0 - p).ln()) / n;
        grad[i] = -(y / p - (1.0 - y) / (1.0 - p)) / n;
    }
    Ok((loss, grad))
}
