use crate::diffcore::matrix::Matrix;
use crate::error::{Error, Result};

/// A trainable tensor paired with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct ParamBlock {
    pub value: Matrix,
    pub grad: Matrix,
}

impl ParamBlock {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ParamBlock {
            value: Matrix::zeros(rows, cols),
            grad: Matrix::zeros(rows, cols),
        }
    }

    pub fn from_value(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        ParamBlock { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.clear();
    }
}

/// Anything exposing an ordered list of named parameter blocks.
///
/// The order is part of the contract: optimizer velocities, checkpoints and
/// gradient-check reports all follow it.
pub trait Parameterized {
    fn block_names(&self) -> Vec<&'static str>;
    fn blocks(&self) -> Vec<&ParamBlock>;
    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock>;

    fn zero_grads(&mut self) {
        for b in self.blocks_mut() {
            b.zero_grad();
        }
    }
}

/// SGD with momentum and weight decay, plus its velocity buffers.
#[derive(Clone, Debug)]
pub struct OptimState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub velocities: Vec<Matrix>,
}

impl OptimState {
    pub fn new(learning_rate: f64, momentum: f64, weight_decay: f64) -> Result<Self> {
        if learning_rate < 0.0 || !learning_rate.is_finite() {
            return Err(Error::InvalidConfig {
                field: "learning_rate",
                detail: format!("must be a nonnegative finite number, got {learning_rate}"),
            });
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig {
                field: "momentum",
                detail: format!("must lie in [0, 1), got {momentum}"),
            });
        }
        if weight_decay < 0.0 || !weight_decay.is_finite() {
            return Err(Error::InvalidConfig {
                field: "weight_decay",
                detail: format!("must be nonnegative, got {weight_decay}"),
            });
        }
        Ok(OptimState {
            learning_rate,
            momentum,
            weight_decay,
            velocities: Vec::new(),
        })
    }
}

/// One optimizer step over every parameter block.
///
/// Update rule per entry: v <- momentum*v + grad + weight_decay*value,
/// then value <- value - learning_rate*v. Gradients are zeroed afterward.
/// Velocity buffers are created lazily on the first step.
pub fn sgd_step<P: Parameterized>(params: &mut P, state: &mut OptimState) -> Result<()> {
    let mut blocks = params.blocks_mut();
    if state.velocities.is_empty() {
        state.velocities = blocks
            .iter()
            .map(|b| Matrix::zeros(b.value.rows(), b.value.cols()))
            .collect();
    }
    if state.velocities.len() != blocks.len() {
        return Err(Error::DimensionMismatch {
            op: "sgd_step",
            detail: format!(
                "{} velocity buffers for {} parameter blocks",
                state.velocities.len(),
                blocks.len()
            ),
        });
    }
    for (block, velocity) in blocks.iter_mut().zip(state.velocities.iter_mut()) {
        if velocity.shape() != block.value.shape() {
            return Err(Error::DimensionMismatch {
                op: "sgd_step",
                detail: format!(
                    "velocity is {}x{} but parameter is {}x{}",
                    velocity.rows(),
                    velocity.cols(),
                    block.value.rows(),
                    block.value.cols()
                ),
            });
        }
        let momentum = state.momentum;
        let decay = state.weight_decay;
        let lr = state.learning_rate;
        for ((v, g), p) in velocity
            .data_mut()
            .iter_mut()
            .zip(block.grad.data().iter())
            .zip(block.value.data().iter())
        {
            *v = momentum * *v + *g + decay * *p;
        }
        for (p, v) in block.value.data_mut().iter_mut().zip(velocity.data().iter()) {
            *p -= lr * *v;
        }
        block.zero_grad();
    }
    Ok(())
}
