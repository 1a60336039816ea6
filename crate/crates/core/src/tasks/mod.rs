//! The three prediction tasks: speaking status, social formation and body
//! gestures (motion autoencoder plus two latent regressors).

mod chain;
mod checkpoint;
mod features;
pub mod formation;
pub mod gesture;
pub mod speaking;
mod suite;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use ssp_nn::LayerSpec;

use crate::error::{CoreError, Result};

pub use chain::{chain_loss, Chain, ChainObjective, Stage};
pub use checkpoint::Checkpoint;
pub use features::{covered_rows, person_tensor, stack_batch};
pub use suite::{task_suite, TaskCheck};
pub use train::{grad_check_task, train_chain, Batch, TrainReport};

pub const DROPOUT: f64 = 0.25;
pub const SPEAKING_L1: f64 = 0.001;
pub const FORMATION_L1: f64 = 0.1;
pub const AE_LATENT: usize = 256;
pub const AE_KERNEL: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Speaking,
    Formation,
    MotionAe,
    Traj2body,
    Body2body,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Speaking, Task::Formation, Task::MotionAe, Task::Traj2body, Task::Body2body];

    pub fn name(self) -> &'static str {
        match self {
            Task::Speaking => "speaking",
            Task::Formation => "formation",
            Task::MotionAe => "motion-ae",
            Task::Traj2body => "traj2body",
            Task::Body2body => "body2body",
        }
    }

    /// l1 strength used when the config does not override it.
    pub fn default_lambda(self) -> f64 {
        match self {
            Task::Speaking => SPEAKING_L1,
            Task::Formation => FORMATION_L1,
            Task::MotionAe | Task::Traj2body | Task::Body2body => 0.0,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CoreError::Config(format!("unknown task {s:?}")))
    }
}

/// Training hyperparameters; every field has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub input_spec: String,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
    /// Overrides the task's default l1 strength.
    pub lambda_l1: Option<f64>,
    /// Stops training after this many optimizer steps.
    pub max_steps: Option<usize>,
    /// When set, the learning rate follows a cosine schedule from `lr` down
    /// to this value over the planned number of steps.
    pub lr_final: Option<f64>,
    /// Overrides the dropout probability of the speaking and formation nets.
    pub dropout: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::Speaking,
            input_spec: String::new(),
            epochs: 10,
            lr: 1e-3,
            batch: 32,
            seed: 0,
            lambda_l1: None,
            max_steps: None,
            lr_final: None,
            dropout: None,
        }
    }
}

impl TrainConfig {
    pub fn for_task(task: Task) -> Self {
        Self {
            task,
            input_spec: match task {
                Task::Speaking => "self-face-body".into(),
                Task::Formation => "full".into(),
                _ => String::new(),
            },
            ..Self::default()
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda_l1.unwrap_or(self.task.default_lambda())
    }

    pub fn dropout(&self) -> f64 {
        self.dropout.unwrap_or(DROPOUT)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.dropout()) {
            return Err(CoreError::Config(format!("dropout {} must be in [0, 1)", self.dropout())));
        }
        if let Some(f) = self.lr_final {
            if !(f.is_finite() && f >= 0.0) {
                return Err(CoreError::Config(format!("lr_final {f} must be >= 0")));
            }
        }
        if self.batch == 0 {
            return Err(CoreError::Config("batch must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(CoreError::Config(format!("lr {} must be positive", self.lr)));
        }
        if self.lambda().is_nan() || self.lambda() < 0.0 {
            return Err(CoreError::Config("lambda_l1 must be >= 0".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| CoreError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn speaking_specs(dropout: f64) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { in_ch: 78, out_ch: 128, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Dropout(dropout),
        LayerSpec::Conv { in_ch: 128, out_ch: 256, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Dropout(dropout),
        LayerSpec::Conv { in_ch: 256, out_ch: 512, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Conv { in_ch: 512, out_ch: 1, kernel: 1 },
        LayerSpec::Sigmoid,
    ]
}

pub fn formation_specs(dropout: f64) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dropout(dropout),
        LayerSpec::Conv { in_ch: 12, out_ch: 64, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Dropout(dropout),
        LayerSpec::Conv { in_ch: 64, out_ch: 128, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
        LayerSpec::Dropout(dropout),
        LayerSpec::TransposedConv { in_ch: 128, out_ch: 6, kernel: 4, stride: 2 },
    ]
}

pub fn encoder_specs() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { in_ch: 73, out_ch: AE_LATENT, kernel: AE_KERNEL },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
    ]
}

pub fn decoder_specs() -> Vec<LayerSpec> {
    vec![LayerSpec::TransposedConv { in_ch: AE_LATENT, out_ch: 73, kernel: 4, stride: 2 }]
}

/// Maps `in_ch` input channels to the autoencoder latent at half rate.
pub fn regressor_specs(in_ch: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv { in_ch, out_ch: 128, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::Conv { in_ch: 128, out_ch: AE_LATENT, kernel: 3 },
        LayerSpec::Relu,
        LayerSpec::MaxPool,
    ]
}
