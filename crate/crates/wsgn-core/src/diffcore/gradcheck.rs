use crate::diffcore::matrix::Matrix;
use crate::diffcore::optim::Parameterized;
use crate::error::{Error, Result};

/// Relative-error floor: differences are measured against
/// max(|analytic|, |numeric|, 1e-8).
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

/// Gradient-check result for one parameter block.
#[derive(Clone, Debug)]
pub struct BlockCheck {
    pub name: &'static str,
    pub max_relative_error: f64,
}

/// Gradient-check result over all parameter blocks.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub max_relative_error: f64,
}

/// Compares analytic gradients against central finite differences.
///
/// `loss_fn` must evaluate the loss for the current parameter values and
/// accumulate analytic gradients into the blocks; it is called once to read
/// the analytic gradients and then twice per parameter entry at perturbed
/// values (those gradients are discarded). The loss must be deterministic, so
/// any dropout has to be disabled or frozen. The relative error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
pub fn grad_check<P, F>(params: &mut P, mut loss_fn: F, h: f64) -> Result<GradCheckReport>
where
    P: Parameterized,
    F: FnMut(&mut P) -> Result<f64>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidConfig {
            field: "h",
            detail: format!("finite-difference step must be positive, got {h}"),
        });
    }
    params.zero_grads();
    let base_loss = loss_fn(params)?;
    if !base_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            block: "(unperturbed evaluation)".to_string(),
        });
    }
    let names = params.block_names();
    let analytic: Vec<Matrix> = params.blocks().iter().map(|b| b.grad.clone()).collect();
    params.zero_grads();

    let mut blocks = Vec::with_capacity(names.len());
    let mut overall = 0.0_f64;
    for (bi, name) in names.iter().enumerate() {
        let entries = analytic[bi].data().len();
        let mut block_max = 0.0_f64;
        for idx in 0..entries {
            let original = params.blocks()[bi].value.data()[idx];

            params.blocks_mut()[bi].value.data_mut()[idx] = original + h;
            let loss_plus = loss_fn(params)?;
            params.blocks_mut()[bi].value.data_mut()[idx] = original - h;
            let loss_minus = loss_fn(params)?;
            params.blocks_mut()[bi].value.data_mut()[idx] = original;

            if !loss_plus.is_finite() || !loss_minus.is_finite() {
                params.zero_grads();
                return Err(Error::NonFiniteLoss {
                    block: (*name).to_string(),
                });
            }
            let numeric = (loss_plus - loss_minus) / (2.0 * h);
            let a = analytic[bi].data()[idx];
            let scale = a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
            let rel = (a - numeric).abs() / scale;
            block_max = block_max.max(rel);
        }
        overall = overall.max(block_max);
        blocks.push(BlockCheck {
            name,
            max_relative_error: block_max,
        });
    }
    params.zero_grads();
    Ok(GradCheckReport {
        blocks,
        max_relative_error: overall,
    })
}
