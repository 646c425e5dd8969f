//! Recovery from sign measurements: PGD over a generative model's range,
//! BIHT, and the Lasso baselines.

mod adam;
mod biht;
mod lasso;
mod loss;
mod pgd;
mod solver;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_minimize, clamp_to_ball, AdamOutcome, BETA1, BETA2, EPSILON};
pub use biht::{biht, hard_threshold, BihtConfig};
pub use lasso::{
    lasso_1bit, lasso_1bit_relaxed, lasso_linear, LassoSolution, DEFAULT_LASSO_REG, HINGE_PENALTY,
};
pub use loss::{onesided_l1, onesided_l1_subgrad};
pub use pgd::{pgd_1bit, project_range, Projection};
pub use solver::{
    run_solver, Lasso1BitConfig, LassoConfig, SolveStatus, Solver, SolverOutput, SolverSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecoveryConfig {
    /// PGD step size λ.
    pub step_size: f64,
    pub step_scaling: StepScaling,
    pub outer_iters: usize,
    pub restarts: usize,
    /// Adam steps per range projection.
    pub inner_steps: usize,
    pub inner_lr: f64,
    pub seed: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            step_size: 1.25,
            step_scaling: StepScaling::Absolute,
            outer_iters: 15,
            restarts: 4,
            inner_steps: 200,
            inner_lr: 0.1,
            seed: 0,
        }
    }
}

/// How λ multiplies the subgradient `Aᵀ(b − sign(Ax))` in a PGD step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepScaling {
    /// `λ·Aᵀ(…)`, with `A` exactly as measured.
    #[default]
    Absolute,
    /// `(λ/m)·Aᵀ(…)`, so one λ works across measurement counts.
    PerMeasurement,
}

impl RecoveryConfig {
    /// The multiplier applied to `Aᵀ(b − sign(Ax))` for `m` measurements.
    pub fn effective_step(&self, m: usize) -> f64 {
        match self.step_scaling {
            StepScaling::Absolute => self.step_size,
            StepScaling::PerMeasurement => self.step_size / m as f64,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.inner_lr > 0.0 && self.inner_lr.is_finite()) {
            return Err(Error::invalid(format!(
                "inner learning rate must be positive, got {}",
                self.inner_lr
            )));
        }
        if self.outer_iters == 0 || self.restarts == 0 || self.inner_steps == 0 {
            return Err(Error::invalid(
                "iteration and restart counts must be at least 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryResult {
    #[serde(with = "crate::serde_vec")]
    pub estimate: Array1<f64>,
    #[serde(with = "crate::serde_vec::option")]
    pub latent: Option<Array1<f64>>,
    /// One-sided ℓ1 loss of `estimate`.
    pub final_loss: f64,
    pub iterations_run: usize,
    pub restart_index: usize,
    /// 1-based outer iteration that produced `estimate`.
    pub best_iteration: usize,
}
