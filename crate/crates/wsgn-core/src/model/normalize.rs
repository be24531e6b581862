use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::model::config::NormalizationSet;

/// Per-class column statistics: mean and population standard deviation.
fn column_stats(x: &Matrix, q: usize) -> (f64, f64) {
    let t_len = x.rows();
    let mut mean = 0.0;
    for t in 0..t_len {
        mean += x[(t, q)];
    }
    mean /= t_len as f64;
    let mut var = 0.0;
    for t in 0..t_len {
        let d = x[(t, q)] - mean;
        var += d * d;
    }
    var /= t_len as f64;
    (mean, var.sqrt())
}

/// Local Gaussian normalization.
///
/// Each column is standardized by its own mean and population standard
/// deviation (floored at `epsilon_std`), then mapped through exp(-u^2).
/// Constant columns produce exactly 1 everywhere.
pub fn zloc(x: &Matrix, epsilon_std: f64) -> Matrix {
    let (t_len, c_len) = x.shape();
    let mut out = Matrix::zeros(t_len, c_len);
    for q in 0..c_len {
        let (mean, std) = column_stats(x, q);
        let floored = std.max(epsilon_std);
        for t in 0..t_len {
            let u = (x[(t, q)] - mean) / floored;
            out[(t, q)] = (-u * u).exp();
        }
    }
    out
}

/// Exact gradient through `zloc`, including the dependence of the column
/// mean and standard deviation on every entry. When the standard deviation
/// is floored the std term drops out and only the mean term remains.
pub fn zloc_backward(x: &Matrix, grad_z: &Matrix, epsilon_std: f64) -> Result<Matrix> {
    if x.shape() != grad_z.shape() {
        return Err(Error::DimensionMismatch {
            op: "zloc_backward",
            detail: format!(
                "scores are {}x{}, gradient is {}x{}",
                x.rows(),
                x.cols(),
                grad_z.rows(),
                grad_z.cols()
            ),
        });
    }
    let (t_len, c_len) = x.shape();
    let t_f = t_len as f64;
    let mut grad_x = Matrix::zeros(t_len, c_len);
    let mut u = vec![0.0; t_len];
    let mut g = vec![0.0; t_len];
    for q in 0..c_len {
        let (mean, std) = column_stats(x, q);
        let floored = std.max(epsilon_std);
        for t in 0..t_len {
            u[t] = (x[(t, q)] - mean) / floored;
            let z = (-u[t] * u[t]).exp();
            g[t] = grad_z[(t, q)] * z * (-2.0 * u[t]);
        }
        let g_mean: f64 = g.iter().sum::<f64>() / t_f;
        if std > epsilon_std {
            let gu_mean: f64 = g.iter().zip(u.iter()).map(|(&gv, &uv)| gv * uv).sum::<f64>() / t_f;
            for t in 0..t_len {
                grad_x[(t, q)] = (g[t] - g_mean - u[t] * gu_mean) / floored;
            }
        } else {
            for t in 0..t_len {
                grad_x[(t, q)] = (g[t] - g_mean) / floored;
            }
        }
    }
    Ok(grad_x)
}

/// Global Gaussian normalization with learned per-class mean and scale.
///
/// The scale enters squared, so its magnitude is floored at `epsilon_std`
/// and its sign is irrelevant to the forward value.
pub fn gloc(x: &Matrix, global_mean: &[f64], global_scale: &[f64], epsilon_std: f64) -> Result<Matrix> {
    let (t_len, c_len) = x.shape();
    if global_mean.len() != c_len || global_scale.len() != c_len {
        return Err(Error::DimensionMismatch {
            op: "gloc",
            detail: format!(
                "scores have {} classes but mean has length {} and scale has length {}",
                c_len,
                global_mean.len(),
                global_scale.len()
            ),
        });
    }
    let mut out = Matrix::zeros(t_len, c_len);
    for q in 0..c_len {
        let floored = global_scale[q].abs().max(epsilon_std);
        for t in 0..t_len {
            let v = (x[(t, q)] - global_mean[q]) / floored;
            out[(t, q)] = (-v * v).exp();
        }
    }
    Ok(out)
}

/// Exact gradients through `gloc` with respect to the scores, the learned
/// mean, and the learned scale. The scale gradient carries the sign of the
/// stored scale and is zero where the magnitude is floored.
pub fn gloc_backward(
    x: &Matrix,
    global_mean: &[f64],
    global_scale: &[f64],
    grad_l: &Matrix,
    epsilon_std: f64,
) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    let (t_len, c_len) = x.shape();
    if global_mean.len() != c_len || global_scale.len() != c_len {
        return Err(Error::DimensionMismatch {
            op: "gloc_backward",
            detail: format!(
                "scores have {} classes but mean has length {} and scale has length {}",
                c_len,
                global_mean.len(),
                global_scale.len()
            ),
        });
    }
    if x.shape() != grad_l.shape() {
        return Err(Error::DimensionMismatch {
            op: "gloc_backward",
            detail: format!(
                "scores are {}x{}, gradient is {}x{}",
                x.rows(),
                x.cols(),
                grad_l.rows(),
                grad_l.cols()
            ),
        });
    }
    let mut grad_x = Matrix::zeros(t_len, c_len);
    let mut grad_mean = vec![0.0; c_len];
    let mut grad_scale = vec![0.0; c_len];
    for q in 0..c_len {
        let scale = global_scale[q];
        let floored = scale.abs().max(epsilon_std);
        let scale_free = scale.abs() > epsilon_std;
        for t in 0..t_len {
            let v = (x[(t, q)] - global_mean[q]) / floored;
            let l = (-v * v).exp();
            let core = grad_l[(t, q)] * l * (-2.0 * v) / floored;
            grad_x[(t, q)] = core;
            grad_mean[q] -= core;
            if scale_free {
                grad_scale[q] += grad_l[(t, q)] * l * 2.0 * v * v * scale.signum() / floored;
            }
        }
    }
    Ok((grad_x, grad_mean, grad_scale))
}

/// Temporal softmax normalization: each class column sums to 1 over frames.
pub fn sloc(x: &Matrix) -> Matrix {
    let (t_len, c_len) = x.shape();
    let mut out = Matrix::zeros(t_len, c_len);
    for q in 0..c_len {
        let mut max = f64::NEG_INFINITY;
        for t in 0..t_len {
            max = max.max(x[(t, q)]);
        }
        let mut sum = 0.0;
        for t in 0..t_len {
            let e = (x[(t, q)] - max).exp();
            out[(t, q)] = e;
            sum += e;
        }
        for t in 0..t_len {
            out[(t, q)] /= sum;
        }
    }
    out
}

/// Gradient through `sloc` given its forward output.
pub fn sloc_backward(sloc_out: &Matrix, grad_s: &Matrix) -> Result<Matrix> {
    if sloc_out.shape() != grad_s.shape() {
        return Err(Error::DimensionMismatch {
            op: "sloc_backward",
            detail: format!(
                "weights are {}x{}, gradient is {}x{}",
                sloc_out.rows(),
                sloc_out.cols(),
                grad_s.rows(),
                grad_s.cols()
            ),
        });
    }
    let (t_len, c_len) = sloc_out.shape();
    let mut grad_x = Matrix::zeros(t_len, c_len);
    for q in 0..c_len {
        let mut dot = 0.0;
        for t in 0..t_len {
            dot += sloc_out[(t, q)] * grad_s[(t, q)];
        }
        for t in 0..t_len {
            grad_x[(t, q)] = sloc_out[(t, q)] * (grad_s[(t, q)] - dot);
        }
    }
    Ok(grad_x)
}

/// Elementwise mean of the enabled normalization outputs.
pub fn fuse_weights(
    z: Option<&Matrix>,
    l: Option<&Matrix>,
    s: Option<&Matrix>,
    enabled: &NormalizationSet,
) -> Result<Matrix> {
    if enabled.is_empty() {
        return Err(Error::EmptyNormalizationSet);
    }
    let mut selected: Vec<&Matrix> = Vec::new();
    for (flag, matrix, name) in [
        (enabled.zloc, z, "zloc"),
        (enabled.gloc, l, "gloc"),
        (enabled.sloc, s, "sloc"),
    ] {
        if flag {
            match matrix {
                Some(m) => selected.push(m),
                None => {
                    return Err(Error::DimensionMismatch {
                        op: "fuse_weights",
                        detail: format!("{name} is enabled but its weight matrix is missing"),
                    })
                }
            }
        }
    }
    let shape = selected[0].shape();
    for m in &selected[1..] {
        if m.shape() != shape {
            return Err(Error::DimensionMismatch {
                op: "fuse_weights",
                detail: format!(
                    "weight matrices disagree: {}x{} vs {}x{}",
                    shape.0,
                    shape.1,
                    m.rows(),
                    m.cols()
                ),
            });
        }
    }
    let scale = 1.0 / selected.len() as f64;
    let mut out = Matrix::zeros(shape.0, shape.1);
    for m in &selected {
        for (o, &v) in out.data_mut().iter_mut().zip(m.data().iter()) {
            *o += v;
        }
    }
    out.scale_in_place(scale);
    Ok(out)
}
