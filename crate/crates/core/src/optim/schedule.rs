use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning rate as a function of the step counter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    Constant { lr: f64 },
    /// `lr0 * ratio^floor(step / every)`.
    StepDecay { lr0: f64, ratio: f64, every: usize },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::StepDecay {
            lr0: 0.2,
            ratio: 0.5,
            every: 1000,
        }
    }
}

impl Schedule {
    pub fn lr(&self, step: usize) -> f64 {
        match *self {
            Schedule::Constant { lr } => lr,
            Schedule::StepDecay { lr0, ratio, every } => {
                let decays = (step / every) as i32;
                lr0 * ratio.powi(decays)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant { lr } if lr > 0.0 && lr.is_finite() => Ok(()),
            Schedule::StepDecay { lr0, ratio, every }
                if lr0 > 0.0 && lr0.is_finite() && ratio > 0.0 && ratio.is_finite() && every > 0 =>
            {
                Ok(())
            }
            other => Err(Error::Config(format!("invalid learning-rate schedule {other:?}"))),
        }
    }
}
