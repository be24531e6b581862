//! Binary training checkpoints. A `WSGND1` file carries a text header with
//! every configuration knob, the epoch cursor, and the loss curve, followed by
//! the raw double-precision parameter and velocity tensors, so a resumed run
//! continues bitwise identically to one that never stopped.

use std::fs;
use std::path::Path;

use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::diffcore::Parameterized;
use crate::model::{Mode, ModelConfig, ModelParams, NormalizationSet};
use crate::trainer::TrainConfig;

const MAGIC: &[u8; 6] = b"WSGND1";

/// Everything needed to continue or inspect a training run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// Optimizer velocity buffers in parameter-block order; empty before the
    /// first step.
    pub velocities: Vec<Matrix>,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    /// First epoch a resumed run should execute.
    pub next_epoch: usize,
    pub loss_curve: Vec<f64>,
}

impl Checkpoint {
    /// Confirms the checkpoint belongs to the requested run. Every field must
    /// agree except the epoch horizon, which a resume may extend.
    pub fn ensure_matches(
        &self,
        model_config: &ModelConfig,
        train_config: &TrainConfig,
    ) -> Result<()> {
        if self.model_config != *model_config {
            return Err(Error::CheckpointMismatch(format!(
                "model configuration differs: checkpoint has {:?}, run wants {:?}",
                self.model_config, model_config
            )));
        }
        let mut stored = self.train_config.clone();
        stored.epochs = train_config.epochs;
        if stored != *train_config {
            return Err(Error::CheckpointMismatch(format!(
                "training configuration differs: checkpoint has {:?}, run wants {:?}",
                self.train_config, train_config
            )));
        }
        Ok(())
    }
}

fn push_matrix(bytes: &mut Vec<u8>, matrix: &Matrix) {
    for &v in matrix.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes a checkpoint to disk.
pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let m = &checkpoint.model_config;
    let t = &checkpoint.train_config;
    let loss_curve = if checkpoint.loss_curve.is_empty() {
        "-".to_string()
    } else {
        checkpoint
            .loss_curve
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    let header = format!(
        "mode={}\nnormalizations={}\nfeature_dim={}\nhidden_dim={}\nnum_classes={}\n\
         dropout_rate={}\nepsilon_std={}\nepochs={}\nbatch_size={}\nsub_batches={}\n\
         learning_rate={}\nmomentum={}\nweight_decay={}\ntemporal_stride={}\n\
         max_start_offset={}\nseed={}\nnext_epoch={}\nvelocities={}\nloss_curve={}\n",
        t.mode,
        m.enabled_normalizations,
        m.feature_dim,
        m.hidden_dim,
        m.num_classes,
        m.dropout_rate,
        m.epsilon_std,
        t.epochs,
        t.batch_size,
        t.sub_batches,
        t.learning_rate,
        t.momentum,
        t.weight_decay,
        t.temporal_stride,
        t.max_start_offset,
        t.seed,
        checkpoint.next_epoch,
        checkpoint.velocities.len(),
        loss_curve,
    );
    let header_len = u32::try_from(header.len()).map_err(|_| Error::Format {
        path: path.display().to_string(),
        offset: 6,
        detail: "header too large".to_string(),
    })?;

    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&header_len.to_le_bytes());
    bytes.extend_from_slice(header.as_bytes());
    for block in checkpoint.params.blocks() {
        push_matrix(&mut bytes, &block.value);
    }
    for velocity in &checkpoint.velocities {
        push_matrix(&mut bytes, velocity);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

fn header_value<'a>(
    path: &Path,
    fields: &'a std::collections::HashMap<&str, &str>,
    key: &str,
) -> Result<&'a str> {
    fields.get(key).copied().ok_or_else(|| Error::Format {
        path: path.display().to_string(),
        offset: 10,
        detail: format!("header is missing {key}"),
    })
}

fn parse_header<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Format {
        path: path.display().to_string(),
        offset: 10,
        detail: format!("cannot parse header field {key}={value:?}"),
    })
}

/// Reads a checkpoint written by `save_checkpoint`.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let fail = |offset: usize, detail: String| Error::Format {
        path: path.display().to_string(),
        offset: offset as u64,
        detail,
    };

    if bytes.len() < 6 || &bytes[..6] != MAGIC {
        return Err(fail(0, "bad magic, expected WSGND1".to_string()));
    }
    if bytes.len() < 10 {
        return Err(fail(bytes.len(), "file ends inside the header length".to_string()));
    }
    let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let header_end = 10usize
        .checked_add(header_len)
        .ok_or_else(|| fail(6, "header length overflows".to_string()))?;
    if bytes.len() < header_end {
        return Err(fail(bytes.len(), "file ends inside the header".to_string()));
    }
    let header = std::str::from_utf8(&bytes[10..header_end])
        .map_err(|_| fail(10, "header is not UTF-8".to_string()))?;

    let mut fields = std::collections::HashMap::new();
    for line in header.lines() {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| fail(10, format!("header line {line:?} is not key=value")))?;
        fields.insert(key, value);
    }

    let mode: Mode = parse_header(path, "mode", header_value(path, &fields, "mode")?)?;
    let normalizations: NormalizationSet = parse_header(
        path,
        "normalizations",
        header_value(path, &fields, "normalizations")?,
    )?;
    let feature_dim: usize =
        parse_header(path, "feature_dim", header_value(path, &fields, "feature_dim")?)?;
    let hidden_dim: usize =
        parse_header(path, "hidden_dim", header_value(path, &fields, "hidden_dim")?)?;
    let num_classes: usize =
        parse_header(path, "num_classes", header_value(path, &fields, "num_classes")?)?;
    let model_config = ModelConfig {
        feature_dim,
        num_classes,
        hidden_dim,
        dropout_rate: parse_header(path, "dropout_rate", header_value(path, &fields, "dropout_rate")?)?,
        enabled_normalizations: normalizations,
        epsilon_std: parse_header(path, "epsilon_std", header_value(path, &fields, "epsilon_std")?)?,
    };
    let train_config = TrainConfig {
        epochs: parse_header(path, "epochs", header_value(path, &fields, "epochs")?)?,
        batch_size: parse_header(path, "batch_size", header_value(path, &fields, "batch_size")?)?,
        sub_batches: parse_header(path, "sub_batches", header_value(path, &fields, "sub_batches")?)?,
        learning_rate: parse_header(
            path,
            "learning_rate",
            header_value(path, &fields, "learning_rate")?,
        )?,
        momentum: parse_header(path, "momentum", header_value(path, &fields, "momentum")?)?,
        weight_decay: parse_header(
            path,
            "weight_decay",
            header_value(path, &fields, "weight_decay")?,
        )?,
        temporal_stride: parse_header(
            path,
            "temporal_stride",
            header_value(path, &fields, "temporal_stride")?,
        )?,
        max_start_offset: parse_header(
            path,
            "max_start_offset",
            header_value(path, &fields, "max_start_offset")?,
        )?,
        mode,
        seed: parse_header(path, "seed", header_value(path, &fields, "seed")?)?,
    };
    let next_epoch: usize =
        parse_header(path, "next_epoch", header_value(path, &fields, "next_epoch")?)?;
    let velocity_count: usize =
        parse_header(path, "velocities", header_value(path, &fields, "velocities")?)?;

    let loss_text = header_value(path, &fields, "loss_curve")?;
    let loss_curve: Vec<f64> = if loss_text == "-" {
        Vec::new()
    } else {
        loss_text
            .split(',')
            .map(|v| parse_header(path, "loss_curve", v))
            .collect::<Result<_>>()?
    };

    let mut params = ModelParams::zeros(&model_config);
    let shapes: Vec<(usize, usize)> = params
        .blocks()
        .iter()
        .map(|b| (b.value.rows(), b.value.cols()))
        .collect();
    if velocity_count != 0 && velocity_count != shapes.len() {
        return Err(fail(
            10,
            format!("{velocity_count} velocity tensors for {} parameter blocks", shapes.len()),
        ));
    }

    let value_count: usize = shapes.iter().map(|(r, c)| r * c).sum();
    let tensor_count = value_count * (1 + usize::from(velocity_count != 0));
    let expected = header_end + tensor_count * 8;
    if bytes.len() != expected {
        return Err(fail(
            bytes.len().min(expected),
            format!("expected {expected} bytes of tensors, file has {}", bytes.len()),
        ));
    }

    let mut offset = header_end;
    let mut read_matrix = |rows: usize, cols: usize| -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.data_mut() {
            *v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            offset += 8;
        }
        m
    };
    for block in params.blocks_mut() {
        let (rows, cols) = (block.value.rows(), block.value.cols());
        block.value = read_matrix(rows, cols);
    }
    let mut velocities = Vec::with_capacity(velocity_count);
    for &(rows, cols) in shapes.iter().take(velocity_count) {
        velocities.push(read_matrix(rows, cols));
    }

    Ok(Checkpoint {
        params,
        velocities,
        model_config,
        train_config,
        next_epoch,
        loss_curve,
    })
}
