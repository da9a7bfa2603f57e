//! Learning-rate schedules: linear warmup over iterations, then polynomial
//! decay over epochs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("iteration {t} outside warmup range 1..={t_max}")]
    OutOfRangeIteration { t: u64, t_max: u64 },
    #[error("epoch {e} outside decay range 0..={e_max}")]
    OutOfRangeEpoch { e: u64, e_max: u64 },
}

/// Base learning rates and schedule shape for both encoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub lr_init_image: f64,
    pub lr_init_text: f64,
    /// Number of warmup iterations.
    pub t_max_warmup: u64,
    /// Number of decay epochs after warmup.
    pub e_max: u64,
    pub poly_power: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            lr_init_image: 1e-4,
            lr_init_text: 5e-5,
            t_max_warmup: 5000,
            e_max: 100,
            poly_power: 0.9,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.lr_init_image > 0.0 && self.lr_init_text > 0.0) {
            return Err("initial learning rates must be positive");
        }
        if self.t_max_warmup < 1 {
            return Err("t_max_warmup must be at least 1");
        }
        if self.e_max < 1 {
            return Err("e_max must be at least 1");
        }
        Ok(())
    }
}

/// Linear warmup: `lr_init * t / t_max` for `1 <= t <= t_max`.
pub fn warmup_lr(t: u64, lr_init: f64, t_max: u64) -> Result<f64, ScheduleError> {
    if t < 1 || t > t_max {
        return Err(ScheduleError::OutOfRangeIteration { t, t_max });
    }
    Ok(lr_init * (t as f64 / t_max as f64))
}

/// Polynomial decay: `lr_init * (1 - e/e_max)^power` for `0 <= e <= e_max`.
pub fn poly_lr(e: u64, lr_init: f64, e_max: u64, power: f64) -> Result<f64, ScheduleError> {
    if e > e_max {
        return Err(ScheduleError::OutOfRangeEpoch { e, e_max });
    }
    Ok(lr_init * (1.0 - e as f64 / e_max as f64).powf(power))
}

/// Learning rate at a 1-based training iteration: warmup while
/// `t <= t_max_warmup`, afterwards polynomial decay indexed by the number of
/// completed post-warmup epochs.
pub fn scheduled_lr(
    t: u64,
    lr_init: f64,
    cfg: &ScheduleConfig,
    iterations_per_epoch: u64,
) -> Result<f64, ScheduleError> {
    assert!(t >= 1, "iterations are 1-based");
    assert!(iterations_per_epoch >= 1);
    if t <= cfg.t_max_warmup {
        warmup_lr(t, lr_init, cfg.t_max_warmup)
    } else {
        let epoch = (t - cfg.t_max_warmup - 1) / iterations_per_epoch;
        poly_lr(epoch.min(cfg.e_max), lr_init, cfg.e_max, cfg.poly_power)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn warmup_reaches_base_rate_at_t_max() {
        assert_eq!(warmup_lr(5000, 1e-4, 5000).unwrap(), 1e-4);
    }

    #[test]
    fn warmup_midpoint_is_half_rate() {
        assert_eq!(warmup_lr(2500, 1e-4, 5000).unwrap(), 5e-5);
    }

    #[test]
    fn warmup_first_iteration() {
        assert_abs_diff_eq!(warmup_lr(1, 1e-4, 5000).unwrap(), 2e-8, epsilon = 1e-22);
    }

    #[test]
    fn warmup_rejects_out_of_range_iterations() {
        assert_eq!(
            warmup_lr(0, 1e-4, 5000).unwrap_err(),
            ScheduleError::OutOfRangeIteration { t: 0, t_max: 5000 }
        );
        assert!(warmup_lr(5001, 1e-4, 5000).is_err());
    }

    #[test]
    fn poly_decay_endpoints() {
        assert_eq!(poly_lr(0, 1e-4, 100, 0.9).unwrap(), 1e-4);
        assert_eq!(poly_lr(100, 1e-4, 100, 0.9).unwrap(), 0.0);
    }

    #[test]
    fn poly_decay_midpoint() {
        // Scalar evaluation: 1e-4 * 0.5^0.9.
        assert_abs_diff_eq!(
            poly_lr(50, 1e-4, 100, 0.9).unwrap(),
            5.358867312681466e-5,
            epsilon = 1e-17
        );
    }

    #[test]
    fn poly_rejects_out_of_range_epochs() {
        assert_eq!(
            poly_lr(101, 1e-4, 100, 0.9).unwrap_err(),
            ScheduleError::OutOfRangeEpoch { e: 101, e_max: 100 }
        );
    }

    #[test]
    fn warmup_and_decay_join_continuously() {
        let cfg = ScheduleConfig::default();
        let end_of_warmup = warmup_lr(cfg.t_max_warmup, 1e-4, cfg.t_max_warmup).unwrap();
        let start_of_decay = poly_lr(0, 1e-4, cfg.e_max, cfg.poly_power).unwrap();
        assert_eq!(end_of_warmup, start_of_decay);
        // First post-warmup iteration still sits at the base rate.
        assert_eq!(
            scheduled_lr(cfg.t_max_warmup + 1, 1e-4, &cfg, 250).unwrap(),
            1e-4
        );
    }

    #[test]
    fn scheduled_lr_tracks_epoch_boundaries() {
        let cfg = ScheduleConfig::default();
        // Last iteration of post-warmup epoch 0.
        assert_eq!(
            scheduled_lr(cfg.t_max_warmup + 250, 1e-4, &cfg, 250).unwrap(),
            poly_lr(0, 1e-4, 100, 0.9).unwrap()
        );
        // First iteration of post-warmup epoch 1.
        assert_eq!(
            scheduled_lr(cfg.t_max_warmup + 251, 1e-4, &cfg, 250).unwrap(),
            poly_lr(1, 1e-4, 100, 0.9).unwrap()
        );
    }
}
