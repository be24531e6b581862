use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wsgn_core::diffcore::{grad_check, linear_forward, Matrix};
use wsgn_core::model::{weak_forward_backward, ModelConfig, ModelParams, Phase, BLOCK_NAMES};
use wsgn_core::Result;

use crate::config::RunConfig;

pub const INSTANCES: usize = 50;
pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

/// Finite differences straddle the relu kink when a hidden pre-activation
/// lies within the perturbation radius of zero, reporting a bogus error on
/// correct gradients. Instances that close are redrawn.
const KINK_GUARD: f64 = 5e-4;

fn away_from_kinks(features: &Matrix, params: &ModelParams) -> bool {
    for (w, b) in [
        (&params.cls_w1, &params.cls_b1),
        (&params.det_w1, &params.det_b1),
    ] {
        let pre = linear_forward(features, &w.value, b.value.data())
            .expect("instance shapes are consistent by construction");
        if pre.data().iter().any(|v| v.abs() < KINK_GUARD) {
            return false;
        }
    }
    true
}

/// Checks analytic gradients of the complete model against central finite
/// differences on random instances. Returns the worst relative error; the
/// caller turns that into the exit code.
pub fn run(config: &RunConfig, break_gradients: bool) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    let mut per_block = vec![0.0_f64; BLOCK_NAMES.len()];
    let mut worst = 0.0_f64;

    for _ in 0..INSTANCES {
        let (model_config, mut params, features, labels) = loop {
            let frames = rng.random_range(2..9);
            let feature_dim = rng.random_range(2..7);
            let num_classes = rng.random_range(2..6);
            let mut model_config = ModelConfig::new(feature_dim, num_classes);
            model_config.dropout_rate = 0.0;
            let mut params = ModelParams::init(&model_config, &mut rng);
            for block in [
                &mut params.cls_b1,
                &mut params.cls_b2,
                &mut params.det_b1,
                &mut params.det_b2,
            ] {
                for v in block.value.data_mut() {
                    *v = rng.random::<f64>() - 0.5;
                }
            }
            for v in params.global_mean.value.data_mut() {
                *v = rng.random::<f64>() * 2.0 - 1.0;
            }
            for v in params.global_scale.value.data_mut() {
                *v = 0.5 + rng.random::<f64>();
            }
            let mut features = Matrix::zeros(frames, feature_dim);
            for v in features.data_mut() {
                *v = (rng.random::<f64>() * 2.0 - 1.0) * 1.5;
            }
            let mut labels = vec![0.0; num_classes];
            labels[rng.random_range(0..num_classes)] = 1.0;
            if rng.random::<f64>() < 0.5 {
                labels[rng.random_range(0..num_classes)] = 1.0;
            }
            if away_from_kinks(&features, &params) {
                break (model_config, params, features, labels);
            }
        };

        let report = grad_check(
            &mut params,
            |p| {
                let mut eval_rng = ChaCha8Rng::seed_from_u64(0);
                let (loss, _) = weak_forward_backward(
                    &features,
                    &labels,
                    p,
                    &model_config,
                    Phase::Eval,
                    &mut eval_rng,
                )?;
                if break_gradients {
                    for g in p.det_w1.grad.data_mut() {
                        *g *= 2.0;
                    }
                }
                Ok(loss)
            },
            STEP,
        )?;
        for (slot, block) in per_block.iter_mut().zip(&report.blocks) {
            *slot = slot.max(block.max_relative_error);
        }
        worst = worst.max(report.max_relative_error);
    }

    println!("block,max_relative_error");
    for (name, error) in BLOCK_NAMES.iter().zip(&per_block) {
        println!("{name},{error:e}");
    }
    println!("overall,{worst:e}");
    Ok(worst)
}
