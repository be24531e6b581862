use rand::Rng;

use crate::diffcore::{Matrix, ParamBlock, Parameterized};
use crate::model::config::ModelConfig;

/// All trainable state: two two-layer heads plus the learned per-class
/// global mean and scale used by the global Gaussian normalization.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub cls_w1: ParamBlock,
    pub cls_b1: ParamBlock,
    pub cls_w2: ParamBlock,
    pub cls_b2: ParamBlock,
    pub det_w1: ParamBlock,
    pub det_b1: ParamBlock,
    pub det_w2: ParamBlock,
    pub det_b2: ParamBlock,
    pub global_mean: ParamBlock,
    pub global_scale: ParamBlock,
}

/// Canonical block order used by the optimizer, checkpoints, and reports.
pub const BLOCK_NAMES: [&str; 10] = [
    "cls_w1",
    "cls_b1",
    "cls_w2",
    "cls_b2",
    "det_w1",
    "det_b1",
    "det_w2",
    "det_b2",
    "global_mean",
    "global_scale",
];

fn xavier_uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = (rng.random::<f64>() * 2.0 - 1.0) * bound;
    }
    m
}

impl ModelParams {
    /// Uniform Xavier weights, zero biases, global mean 0, global scale 1.
    ///
    /// Weight draws happen in block order (cls_w1, cls_w2, det_w1, det_w2),
    /// each row-major, so a given seed always produces the same parameters.
    pub fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let (m, h, c) = (config.feature_dim, config.hidden_dim, config.num_classes);
        ModelParams {
            cls_w1: ParamBlock::from_value(xavier_uniform(m, h, rng)),
            cls_b1: ParamBlock::zeros(1, h),
            cls_w2: ParamBlock::from_value(xavier_uniform(h, c, rng)),
            cls_b2: ParamBlock::zeros(1, c),
            det_w1: ParamBlock::from_value(xavier_uniform(m, h, rng)),
            det_b1: ParamBlock::zeros(1, h),
            det_w2: ParamBlock::from_value(xavier_uniform(h, c, rng)),
            det_b2: ParamBlock::zeros(1, c),
            global_mean: ParamBlock::zeros(1, c),
            global_scale: ParamBlock::from_value(Matrix::filled(1, c, 1.0)),
        }
    }

    /// All-zero parameters of the right shapes (global scale still 1).
    pub fn zeros(config: &ModelConfig) -> Self {
        let (m, h, c) = (config.feature_dim, config.hidden_dim, config.num_classes);
        ModelParams {
            cls_w1: ParamBlock::zeros(m, h),
            cls_b1: ParamBlock::zeros(1, h),
            cls_w2: ParamBlock::zeros(h, c),
            cls_b2: ParamBlock::zeros(1, c),
            det_w1: ParamBlock::zeros(m, h),
            det_b1: ParamBlock::zeros(1, h),
            det_w2: ParamBlock::zeros(h, c),
            det_b2: ParamBlock::zeros(1, c),
            global_mean: ParamBlock::zeros(1, c),
            global_scale: ParamBlock::from_value(Matrix::filled(1, c, 1.0)),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.cls_w1.value.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.cls_w1.value.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.cls_w2.value.cols()
    }

    /// Largest absolute difference across all blocks of two parameter sets.
    pub fn max_abs_diff(&self, other: &ModelParams) -> f64 {
        self.blocks()
            .iter()
            .zip(other.blocks().iter())
            .map(|(a, b)| {
                a.value
                    .max_abs_diff(&b.value)
                    .expect("parameter sets must share shapes")
            })
            .fold(0.0, f64::max)
    }
}

impl Parameterized for ModelParams {
    fn block_names(&self) -> Vec<&'static str> {
        BLOCK_NAMES.to_vec()
    }

    fn blocks(&self) -> Vec<&ParamBlock> {
        vec![
            &self.cls_w1,
            &self.cls_b1,
            &self.cls_w2,
            &self.cls_b2,
            &self.det_w1,
            &self.det_b1,
            &self.det_w2,
            &self.det_b2,
            &self.global_mean,
            &self.global_scale,
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut ParamBlock> {
        vec![
            &mut self.cls_w1,
            &mut self.cls_b1,
            &mut self.cls_w2,
            &mut self.cls_b2,
            &mut self.det_w1,
            &mut self.det_b1,
            &mut self.det_w2,
            &mut self.det_b2,
            &mut self.global_mean,
            &mut self.global_scale,
        ]
    }
}
