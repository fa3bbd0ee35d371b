//! Minibatch SGD with momentum and coupled weight decay, plus the three
//! learning-rate schedules the experiments compare: constant, inverse-time
//! decay, and the slanted triangular (STLR) shape.
//!
//! Update rule, fixed and documented:
//!
//! ```text
//! v <- mu * v + g + lambda * theta
//! theta <- theta - lr_t * v
//! ```
//!
//! Schedules are indexed by optimizer step, not epoch, so short desk-scale
//! runs still see a smooth triangular profile.

use serde::{Deserialize, Serialize};

use crate::drift::Dataset;
use crate::error::{Error, Result};
use crate::nn::{loss_and_grad, Gradient, ModelState, ParamSet};
use crate::numcore::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSpec {
    Constant { lr: f64 },
    /// eta_t = 1 / (sigma * (t + 1)) for step t >= 0, the 1/(sigma t)
    /// schedule with 1-based time so step 0 divides by sigma, not zero.
    InverseTime { sigma: f64 },
    /// Linear 0 -> max_lr over the first ceil(cut_frac * T) steps, then
    /// linear max_lr -> 0 over the rest. Endpoints are exact.
    Stlr { max_lr: f64, cut_frac: f64 },
}

impl ScheduleSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScheduleSpec::Constant { lr } => {
                if !lr.is_finite() || *lr <= 0.0 {
                    return Err(Error::invalid(format!("constant lr must be > 0, got {lr}")));
                }
            }
            ScheduleSpec::InverseTime { sigma } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(Error::invalid(format!(
                        "inverse-time sigma must be > 0, got {sigma}"
                    )));
                }
            }
            ScheduleSpec::Stlr { max_lr, cut_frac } => {
                if !max_lr.is_finite() || *max_lr <= 0.0 {
                    return Err(Error::invalid(format!("max_lr must be > 0, got {max_lr}")));
                }
                if !(*cut_frac > 0.0 && *cut_frac < 1.0) {
                    return Err(Error::invalid(format!(
                        "cut_frac must lie in (0, 1), got {cut_frac}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub schedule: ScheduleSpec,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl OptimizerConfig {
    /// The fine-tuning defaults used throughout the drift experiments:
    /// constant lr 0.01, momentum 0.9, weight decay 5e-4, 5 epochs.
    pub fn fine_tune_default() -> Self {
        OptimizerConfig {
            schedule: ScheduleSpec::Constant { lr: 0.01 },
            momentum: 0.9,
            weight_decay: 5e-4,
            epochs: 5,
            batch_size: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !self.weight_decay.is_finite() || self.weight_decay < 0.0 {
            return Err(Error::invalid(format!(
                "weight decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        Ok(())
    }
}

pub type Velocity = ParamSet;

/// Peak step of the STLR ramp: ceil(cut_frac * T) clamped so the decay
/// segment keeps at least one step (except in the degenerate T = 1 case).
fn stlr_cut(cut_frac: f64, total_steps: usize) -> usize {
    let cut = (cut_frac * total_steps as f64).ceil() as usize;
    cut.clamp(1, total_steps.saturating_sub(1).max(1))
}

/// Learning rate at optimizer step `t` of a run with `total_steps` steps.
/// `t` ranges over 0..=total_steps; only STLR actually consults the total.
pub fn lr_at(schedule: &ScheduleSpec, step: usize, total_steps: usize) -> Result<f64> {
    schedule.validate()?;
    if total_steps == 0 {
        return Err(Error::invalid("total_steps must be >= 1"));
    }
    if step > total_steps {
        return Err(Error::invalid(format!(
            "step {step} beyond total_steps {total_steps}"
        )));
    }
    Ok(match schedule {
        ScheduleSpec::Constant { lr } => *lr,
        ScheduleSpec::InverseTime { sigma } => 1.0 / (sigma * (step as f64 + 1.0)),
        ScheduleSpec::Stlr { max_lr, cut_frac } => {
            let cut = stlr_cut(*cut_frac, total_steps);
            // Divide before scaling so the peak is exactly max_lr (x/x == 1)
            // and both endpoints are exactly 0.
            if step <= cut {
                max_lr * (step as f64 / cut as f64)
            } else {
                max_lr * ((total_steps - step) as f64 / (total_steps - cut) as f64)
            }
        }
    })
}

/// One SGD step in place. Errors on non-finite gradients (training aborts
/// rather than silently continuing) and re-checks the updated weights.
pub fn sgd_step(
    model: &mut ModelState,
    vel: &mut Velocity,
    grad: &Gradient,
    lr: f64,
    momentum: f64,
    weight_decay: f64,
) -> Result<()> {
    if !model.params().congruent_with(vel) || !model.params().congruent_with(grad) {
        return Err(Error::shape(
            "congruent model/velocity/gradient layouts",
            "mismatched parameter sets",
        ));
    }
    if !grad.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    for (k, (_, theta)) in model.params_mut().entries_mut().iter_mut().enumerate() {
        let g = grad.entries()[k].1.data();
        let v = vel.entries_mut()[k].1.data_mut();
        let td = theta.data_mut();
        for j in 0..td.len() {
            v[j] = momentum * v[j] + g[j] + weight_decay * td[j];
            td[j] -= lr * v[j];
        }
    }
    if !model.params().all_finite() {
        return Err(Error::NonFinite("updated weights".into()));
    }
    Ok(())
}

/// Trains for `epochs` passes with per-epoch seeded reshuffling. The
/// schedule is driven by the global step with T = epochs * ceil(N / batch).
/// Zero epochs returns the model unchanged.
pub fn train(
    mut model: ModelState,
    data: &Dataset,
    cfg: &OptimizerConfig,
    rng: &mut Rng,
) -> Result<ModelState> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("training dataset".into()));
    }
    if cfg.epochs == 0 {
        return Ok(model);
    }
    let n = data.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = cfg.epochs * steps_per_epoch;
    let mut vel = ParamSet::zeros_like(model.params());
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = data.batch(chunk);
            let (loss, grad) = loss_and_grad(&model, &x, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss".into()));
            }
            let lr = lr_at(&cfg.schedule, step, total_steps)?;
            sgd_step(&mut model, &mut vel, &grad, lr, cfg.momentum, cfg.weight_decay)?;
            step += 1;
        }
    }
    Ok(model)
}

/// Mean cross-entropy of the model over a whole dataset (no update).
/// Convenience for monitoring training progress in tests and reports.
pub fn dataset_loss(model: &ModelState, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("loss dataset".into()));
    }
    let idxs: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idxs.chunks(512) {
        let (x, y) = data.batch(chunk);
        let (loss, _) = loss_and_grad(model, &x, &y)?;
        total += loss * chunk.len() as f64;
    }
    Ok(total / data.len() as f64)
}
