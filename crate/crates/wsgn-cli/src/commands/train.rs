use std::path::Path;

use wsgn_core::datagen::read_manifest;
use wsgn_core::trainer::{
    load_checkpoint, resume as resume_training, save_checkpoint, train, Checkpoint,
};
use wsgn_core::{Error, Result};

use crate::commands::{create_dir, render_loss_curve, report_warnings, write_text};
use crate::config::RunConfig;

pub fn run(config: &RunConfig, data: &Path, resume_from: Option<&Path>, out: &Path) -> Result<()> {
    let (dataset, warnings) = read_manifest(data)?;
    report_warnings(&warnings);
    let feature_dim = dataset
        .videos
        .first()
        .map(|v| v.features.cols())
        .ok_or_else(|| Error::EmptyDataset(format!("manifest {} has no videos", data.display())))?;
    let model_config = config.model_config(feature_dim, dataset.num_classes);

    let result = match resume_from {
        Some(path) => {
            let mut checkpoint = load_checkpoint(path)?;
            checkpoint.ensure_matches(&model_config, &config.train)?;
            checkpoint.train_config = config.train.clone();
            resume_training(&dataset, checkpoint)?
        }
        None => train(&dataset, &model_config, &config.train)?,
    };

    create_dir(out)?;
    let final_loss = result.loss_curve.last().copied();
    let checkpoint = Checkpoint {
        params: result.params,
        velocities: result.optim.velocities,
        model_config,
        train_config: config.train.clone(),
        next_epoch: config.train.epochs,
        loss_curve: result.loss_curve,
    };
    save_checkpoint(out.join("checkpoint.wsgnd"), &checkpoint)?;
    write_text(
        &out.join("loss_curve.csv"),
        &render_loss_curve(&checkpoint.loss_curve),
    )?;
    match final_loss {
        Some(loss) => eprintln!(
            "trained {} of {} epochs, final epoch loss {loss}",
            checkpoint.loss_curve.len(),
            config.train.epochs
        ),
        None => eprintln!("nothing to train: epoch horizon already reached"),
    }
    Ok(())
}
