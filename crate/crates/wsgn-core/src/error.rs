use thiserror::Error;

/// Errors produced by any layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not conform for the named operation.
    #[error("{op}: dimension mismatch, {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    /// A loss evaluation returned NaN or infinity during gradient checking.
    #[error("non-finite loss while evaluating parameter block {block}")]
    NonFiniteLoss { block: String },

    /// Weight fusion was asked to average an empty set of normalizations.
    #[error("no normalizations enabled; fusion needs at least one of zloc, gloc, sloc")]
    EmptyNormalizationSet,

    /// A configuration field failed validation.
    #[error("invalid configuration: field {field}: {detail}")]
    InvalidConfig { field: &'static str, detail: String },

    /// Requested action segments cannot fit into a generated video.
    #[error(
        "cannot place {segments} segments totalling {needed} frames into {available} frames"
    )]
    InfeasiblePlacement {
        segments: usize,
        needed: usize,
        available: usize,
    },

    /// A binary file failed structural validation.
    #[error("format error in {path} at byte {offset}: {detail}")]
    Format {
        path: String,
        offset: u64,
        detail: String,
    },

    /// A manifest or detection record failed validation.
    #[error("validation error in {path} line {line}: {detail}")]
    Validation {
        path: String,
        line: usize,
        detail: String,
    },

    /// The brute-force evaluation oracle only accepts small instances.
    #[error("oracle rejects instance with {count} detections (limit {limit})")]
    OracleTooLarge { count: usize, limit: usize },

    /// Training produced a non-finite loss.
    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}, video {video_id}")]
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        video_id: String,
    },

    /// An operation that needs data received none.
    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    /// Supervised training needs ground-truth segments for every labeled video.
    #[error("video {0} has labels but no ground-truth segments; supervised training needs frame labels")]
    MissingFrameLabels(String),

    /// A checkpoint does not match the requested run.
    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    /// Filesystem failure with the offending path attached.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
