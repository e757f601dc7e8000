use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size sequence indexed by the per-(m, state) update count `k >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    /// `1 / (k + 1)^exponent`.
    PowerLaw { exponent: f64 },
    /// Fixed step; only useful for tests and diagnostics.
    Constant { step: f64 },
}

impl StepSchedule {
    /// Belief step sizes: exponent in `(0.5, 1]` so the sequence sums to
    /// infinity but its squares do not.
    pub fn alpha(exponent: f64) -> Result<Self> {
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha exponent {exponent} must lie in (0.5, 1]"
            )));
        }
        Ok(StepSchedule::PowerLaw { exponent })
    }

    /// Q-estimate step sizes: exponent in `(0, 1]`; square-summability is
    /// not required for the model-based update.
    pub fn beta(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "beta exponent {exponent} must lie in (0, 1]"
            )));
        }
        Ok(StepSchedule::PowerLaw { exponent })
    }

    pub fn constant(step: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&step) {
            return Err(Error::InvalidConfig(format!("step {step} not in [0, 1]")));
        }
        Ok(StepSchedule::Constant { step })
    }

    #[inline]
    pub fn at(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::PowerLaw { exponent: 1.0 } => 1.0 / (k as f64 + 1.0),
            StepSchedule::PowerLaw { exponent } => (k as f64 + 1.0).powf(-exponent),
            StepSchedule::Constant { step } => step,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_ranges() {
        assert!(StepSchedule::alpha(0.4).is_err());
        assert!(StepSchedule::alpha(0.5).is_err());
        assert!(StepSchedule::alpha(0.7).is_ok());
        assert!(StepSchedule::alpha(1.0).is_ok());
        assert!(StepSchedule::alpha(1.1).is_err());
        assert!(StepSchedule::beta(0.3).is_ok());
        assert!(StepSchedule::beta(0.0).is_err());
    }

    #[test]
    fn values_in_unit_interval_and_decreasing() {
        let s = StepSchedule::alpha(0.7).unwrap();
        assert_eq!(s.at(0), 1.0);
        let mut prev = 1.0;
        for k in 1..1000 {
            let x = s.at(k);
            assert!(x > 0.0 && x < prev);
            prev = x;
        }
        assert_eq!(StepSchedule::alpha(1.0).unwrap().at(2), 1.0 / 3.0);
    }
}
