use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{diverged, EarlyStop, VictimKind};
use crate::dataset::RatingMatrix;
use crate::diffcore::{Activation, Mlp, Optimizer};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoRecConfig {
    pub hidden: usize,
    pub lr: f64,
    pub reg: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Default for AutoRecConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            lr: 0.001,
            reg: 1e-4,
            epochs: 60,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AutoRecOrientation {
    /// Each training row is a user's rating vector over items.
    User,
    /// Each training row is an item's rating vector over users.
    Item,
}

/// One-hidden-layer autoencoder (sigmoid encoder, linear decoder) fitted to
/// the observed entries of user rows or item columns.
///
/// The full reconstruction is materialised after training.
#[derive(Debug, Clone)]
pub struct AutoRec {
    pub orientation: AutoRecOrientation,
    pub net: Mlp,
    /// Mean observed-entry loss per epoch.
    pub losses: Vec<f64>,
    scores: Array2<f64>,
}

/// Mean squared error over the observed cells of a batch plus `reg * |W|^2`;
/// leaves parameter gradients in `net`.
pub(crate) fn batch_loss(net: &mut Mlp, x: &Array2<f64>, reg: f64) -> Result<f64> {
    net.zero_grad();
    let y = net.forward(x)?;
    let mask: Array2<f64> = x.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 });
    let n_obs = mask.sum().max(1.0);
    let resid = (&y - x) * &mask;
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / n_obs + reg * net.weight_sq_norm();
    net.backward(&(resid * (2.0 / n_obs)))?;
    net.add_weight_decay(reg)?;
    Ok(loss)
}

impl AutoRec {
    pub fn fit(train: &RatingMatrix, orientation: AutoRecOrientation, config: &AutoRecConfig, seed: u64) -> Result<Self> {
        if config.hidden == 0 || config.epochs == 0 || config.batch_size == 0 || !(config.lr > 0.0) || config.reg < 0.0 {
            return Err(Error::invalid("AutoRec needs hidden, epochs, batch_size >= 1, lr > 0, reg >= 0"));
        }
        let kind = match orientation {
            AutoRecOrientation::User => VictimKind::UAutoRec,
            AutoRecOrientation::Item => VictimKind::IAutoRec,
        };
        let dense = train.to_dense();
        let rows = match orientation {
            AutoRecOrientation::User => dense,
            AutoRecOrientation::Item => dense.reversed_axes().as_standard_layout().to_owned(),
        };
        let width = rows.ncols();
        let mut rng = seed::rng(seed);
        let mut net = Mlp::new(
            &[width, config.hidden, width],
            &[Activation::Sigmoid, Activation::Identity],
            &mut rng,
        );
        let mut opt = Optimizer::adam(config.lr)?;
        let mut order: Vec<usize> = (0..rows.nrows()).collect();
        let mut stop = EarlyStop::new(50, 1e-6);
        let mut losses = Vec::new();
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(config.batch_size) {
                let x = rows.select(Axis(0), chunk);
                let loss = batch_loss(&mut net, &x, config.reg)?;
                if !loss.is_finite() {
                    return Err(diverged(kind, epoch, loss));
                }
                opt.step(&mut net.params_mut())?;
                total += loss;
                batches += 1;
            }
            let loss = total / batches as f64;
            losses.push(loss);
            if stop.record(loss) {
                break;
            }
        }
        let recon = net.apply(&rows)?;
        let scores = match orientation {
            AutoRecOrientation::User => recon,
            AutoRecOrientation::Item => recon.reversed_axes().as_standard_layout().to_owned(),
        };
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(diverged(kind, losses.len(), f64::NAN));
        }
        Ok(Self {
            orientation,
            net,
            losses,
            scores,
        })
    }

    pub fn num_users(&self) -> usize {
        self.scores.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.scores.ncols()
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.scores[[user, item]]
    }

    pub fn score_user(&self, user: usize) -> Vec<f64> {
        self.scores.row(user).to_vec()
    }
}
