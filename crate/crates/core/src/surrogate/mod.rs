//! Differentiable surrogate recommenders used inside the attack loops, and
//! the last-step-unrolled gradient from surrogate predictions back to the
//! fake profiles.
//!
//! The bilevel problem "fake rows -> trained surrogate -> promotion loss" is
//! approximated by treating the surrogate after `T-1` inner steps as a
//! constant and differentiating only through the final (plain SGD) step.

mod autorec;
mod harness;
mod view;
mod wrmf;

use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use autorec::{AutoRecSurrogateConfig, ItemAutoRecSurrogate};
pub use harness::{InnerLoopConfig, SurrogateHarness};
pub use view::RatingView;
pub use wrmf::{wrmf_loss, MissingMode, Unrolled, WrmfConfig, WrmfModel};

use crate::diffcore::Optimizer;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SurrogateConfig {
    Wrmf(WrmfConfig),
    #[serde(rename = "iautorec")]
    ItemAutoRec(AutoRecSurrogateConfig),
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig::Wrmf(WrmfConfig::default())
    }
}

impl SurrogateConfig {
    pub fn label(&self) -> &'static str {
        match self {
            SurrogateConfig::Wrmf(_) => "wrmf",
            SurrogateConfig::ItemAutoRec(_) => "iautorec",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Surrogate {
    Wrmf(WrmfModel),
    ItemAutoRec(ItemAutoRecSurrogate),
}

impl Surrogate {
    pub fn new(config: &SurrogateConfig, num_users: usize, num_items: usize, seed: u64) -> Result<Self> {
        Ok(match config {
            SurrogateConfig::Wrmf(c) => Surrogate::Wrmf(WrmfModel::new(num_users, num_items, *c, seed)?),
            SurrogateConfig::ItemAutoRec(c) => Surrogate::ItemAutoRec(ItemAutoRecSurrogate::new(num_users, *c, seed)?),
        })
    }

    /// `steps` optimizer steps on `L_RS(X*)`; returns per-step losses.
    pub fn fit(&mut self, view: &RatingView, steps: usize, optimizer: &mut Optimizer, seed: u64) -> Result<Vec<f64>> {
        match self {
            Surrogate::Wrmf(m) => m.fit(view, steps, optimizer, seed),
            Surrogate::ItemAutoRec(m) => m.fit(view, steps, optimizer),
        }
    }

    pub fn sgd_step(&mut self, view: &RatingView, lr: f64) -> Result<f64> {
        match self {
            Surrogate::Wrmf(m) => m.sgd_step(view, lr),
            Surrogate::ItemAutoRec(m) => m.sgd_step(view, lr),
        }
    }

    pub fn predict_all(&self, view: &RatingView) -> Result<Array2<f64>> {
        match self {
            Surrogate::Wrmf(m) => Ok(m.predict_all()),
            Surrogate::ItemAutoRec(m) => m.predict_all(view),
        }
    }

    pub fn unrolled_attack_grad(
        &self,
        view: &RatingView,
        fake_rows: Range<usize>,
        eval_users: Range<usize>,
        targets: &[usize],
        inner_lr: f64,
    ) -> Result<Unrolled> {
        match self {
            Surrogate::Wrmf(m) => m.unrolled_attack_grad(view, fake_rows, eval_users, targets, inner_lr),
            Surrogate::ItemAutoRec(m) => m.unrolled_attack_grad(view, fake_rows, eval_users, targets, inner_lr),
        }
    }
}
