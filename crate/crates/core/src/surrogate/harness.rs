use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{RatingView, Surrogate, SurrogateConfig, Unrolled};
use crate::diffcore::Optimizer;
use crate::error::{Error, Result};
use crate::seed;

/// Schedule for a surrogate that is trained alongside a set of fake rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerLoopConfig {
    /// Adam steps on the real + initial fake data before the first epoch.
    pub pretrain_steps: usize,
    /// Adam steps per epoch before the unrolled step (`T - 1`).
    pub inner_steps: usize,
    /// Adam learning rate of the surrogate.
    pub surrogate_lr: f64,
    /// Learning rate of the unrolled SGD step.
    pub unroll_lr: f64,
    /// Start every epoch's inner steps from the pretrained state instead of
    /// continuing from the previous epoch.
    pub restart: bool,
}

impl Default for InnerLoopConfig {
    fn default() -> Self {
        Self {
            pretrain_steps: 100,
            inner_steps: 9,
            surrogate_lr: 0.01,
            unroll_lr: 1e-3,
            restart: true,
        }
    }
}

impl InnerLoopConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.surrogate_lr > 0.0) || !(self.unroll_lr >= 0.0) || !self.unroll_lr.is_finite() {
            return Err(Error::invalid("inner loop needs surrogate_lr > 0 and a finite unroll_lr >= 0"));
        }
        Ok(())
    }
}

/// A warm-started surrogate over `real ++ fake` rows.
///
/// Real users occupy rows `0..num_real` and are the ones whose
/// recommendations the promotion loss is measured on; fakes follow.
#[derive(Debug, Clone)]
pub struct SurrogateHarness {
    pub surrogate: Surrogate,
    pub view: RatingView,
    pub num_real: usize,
    /// Real users `0..eval_users` enter the promotion loss.
    pub eval_users: usize,
    optimizer: Optimizer,
    snapshot: Option<(Surrogate, Optimizer)>,
    config: InnerLoopConfig,
    seed: u64,
    round: u64,
}

impl SurrogateHarness {
    pub fn new(
        real: &RatingView,
        fake_values: &Array2<f64>,
        fake_observed: &Array2<f64>,
        surrogate: &SurrogateConfig,
        config: InnerLoopConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let view = real.with_fake_rows(fake_values, fake_observed)?;
        let model = Surrogate::new(surrogate, view.num_users(), view.num_items(), seed)?;
        let mut harness = Self {
            surrogate: model,
            view,
            num_real: real.num_users(),
            eval_users: real.num_users(),
            optimizer: Optimizer::adam(config.surrogate_lr)?,
            snapshot: None,
            config,
            seed,
            round: 0,
        };
        if config.pretrain_steps > 0 {
            harness.train(config.pretrain_steps)?;
        }
        if config.restart {
            harness.snapshot = Some((harness.surrogate.clone(), harness.optimizer.clone()));
        }
        Ok(harness)
    }

    pub fn fake_rows(&self) -> Range<usize> {
        self.num_real..self.view.num_users()
    }

    pub fn set_fake_values(&mut self, values: &Array2<f64>) -> Result<()> {
        let rows = self.fake_rows();
        self.view.set_rows(rows, values)
    }

    /// Replaces both the values and the observed pattern of the fake rows.
    pub fn set_fake_rows(&mut self, values: &Array2<f64>, observed: &Array2<f64>) -> Result<()> {
        let rows = self.fake_rows();
        if observed.dim() != values.dim() {
            return Err(Error::shape(format!("fake mask {:?} vs values {:?}", observed.dim(), values.dim())));
        }
        self.view.set_rows(rows.clone(), values)?;
        self.view.observed.slice_mut(ndarray::s![rows, ..]).assign(observed);
        Ok(())
    }

    pub fn train(&mut self, steps: usize) -> Result<Vec<f64>> {
        self.round += 1;
        let seed = seed::derive_seed(self.seed, &["inner", &self.round.to_string()]);
        self.surrogate.fit(&self.view, steps, &mut self.optimizer, seed)
    }

    /// Runs the per-epoch inner steps; returns their losses (empty when the
    /// schedule has none).
    pub fn train_epoch(&mut self) -> Result<Vec<f64>> {
        if let Some((surrogate, optimizer)) = &self.snapshot {
            self.surrogate = surrogate.clone();
            self.optimizer = optimizer.clone();
        }
        if self.config.inner_steps == 0 {
            return Ok(Vec::new());
        }
        self.train(self.config.inner_steps)
    }

    /// Promotion loss after the unrolled step and its gradient w.r.t. the
    /// fake rows.
    pub fn attack_grad(&self, targets: &[usize]) -> Result<Unrolled> {
        self.surrogate.unrolled_attack_grad(
            &self.view,
            self.fake_rows(),
            0..self.eval_users.min(self.num_real),
            targets,
            self.config.unroll_lr,
        )
    }
}
