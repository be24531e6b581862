use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One of the three frame-selection normalizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Gaussian of the score standardized by within-video per-class mean/std.
    Zloc,
    /// Gaussian with learned per-class mean and scale.
    Gloc,
    /// Softmax over the temporal axis per class.
    Sloc,
}

/// Which normalizations contribute to the fused selection weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormalizationSet {
    pub zloc: bool,
    pub gloc: bool,
    pub sloc: bool,
}

impl NormalizationSet {
    pub fn all() -> Self {
        NormalizationSet {
            zloc: true,
            gloc: true,
            sloc: true,
        }
    }

    pub fn none() -> Self {
        NormalizationSet {
            zloc: false,
            gloc: false,
            sloc: false,
        }
    }

    pub fn single(n: Normalization) -> Self {
        NormalizationSet::none().with(n)
    }

    pub fn with(mut self, n: Normalization) -> Self {
        match n {
            Normalization::Zloc => self.zloc = true,
            Normalization::Gloc => self.gloc = true,
            Normalization::Sloc => self.sloc = true,
        }
        self
    }

    pub fn contains(&self, n: Normalization) -> bool {
        match n {
            Normalization::Zloc => self.zloc,
            Normalization::Gloc => self.gloc,
            Normalization::Sloc => self.sloc,
        }
    }

    pub fn count(&self) -> usize {
        self.zloc as usize + self.gloc as usize + self.sloc as usize
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

impl fmt::Display for NormalizationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.zloc {
            parts.push("zloc");
        }
        if self.gloc {
            parts.push("gloc");
        }
        if self.sloc {
            parts.push("sloc");
        }
        if parts.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", parts.join("+"))
        }
    }
}

impl FromStr for NormalizationSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = NormalizationSet::none();
        if s.trim() == "none" {
            return Ok(set);
        }
        for token in s.split(['+', ',']) {
            let token = token.trim();
            match token {
                "zloc" => set.zloc = true,
                "gloc" => set.gloc = true,
                "sloc" => set.sloc = true,
                "all" | "complete" => set = NormalizationSet::all(),
                "" => {}
                other => {
                    return Err(Error::InvalidConfig {
                        field: "normalizations",
                        detail: format!(
                            "unknown normalization {other:?}; expected zloc, gloc, sloc, or all"
                        ),
                    })
                }
            }
        }
        Ok(set)
    }
}

/// Whether a forward pass applies training-time stochasticity (dropout).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
}

/// Which model family is being trained or run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Video prediction is the plain mean of per-frame class probabilities.
    Naive,
    /// Selection-weighted prediction with the enabled normalizations.
    Wsgn,
    /// Frame-label supervision on the classification stream.
    Supervised,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Mode::Naive => "naive",
            Mode::Wsgn => "wsgn",
            Mode::Supervised => "supervised",
        };
        write!(f, "{name}")
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "naive" => Ok(Mode::Naive),
            "wsgn" => Ok(Mode::Wsgn),
            "supervised" => Ok(Mode::Supervised),
            other => Err(Error::InvalidConfig {
                field: "mode",
                detail: format!("unknown mode {other:?}; expected naive, wsgn, or supervised"),
            }),
        }
    }
}

/// Architecture hyperparameters shared by all modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub enabled_normalizations: NormalizationSet,
    pub epsilon_std: f64,
}

impl ModelConfig {
    /// Defaults: hidden layer as wide as the input features, dropout 0.5,
    /// all three normalizations, std floor 1e-5.
    pub fn new(feature_dim: usize, num_classes: usize) -> Self {
        ModelConfig {
            feature_dim,
            num_classes,
            hidden_dim: feature_dim,
            dropout_rate: 0.5,
            enabled_normalizations: NormalizationSet::all(),
            epsilon_std: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::InvalidConfig {
                field: "feature_dim",
                detail: "must be at least 1".to_string(),
            });
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidConfig {
                field: "num_classes",
                detail: "must be at least 1".to_string(),
            });
        }
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig {
                field: "hidden_dim",
                detail: "must be at least 1".to_string(),
            });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig {
                field: "dropout_rate",
                detail: format!("must lie in [0, 1), got {}", self.dropout_rate),
            });
        }
        if self.enabled_normalizations.is_empty() {
            return Err(Error::InvalidConfig {
                field: "enabled_normalizations",
                detail: "at least one of zloc, gloc, sloc must be enabled".to_string(),
            });
        }
        if self.epsilon_std <= 0.0 || !self.epsilon_std.is_finite() {
            return Err(Error::InvalidConfig {
                field: "epsilon_std",
                detail: format!("must be a positive finite number, got {}", self.epsilon_std),
            });
        }
        Ok(())
    }
}
