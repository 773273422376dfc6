use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{diverged, EarlyStop, VictimKind};
use crate::dataset::{Rating, RatingMatrix};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvdConfig {
    pub dim: usize,
    pub lr: f64,
    pub reg: f64,
    pub epochs: usize,
    pub init_std: f64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            lr: 0.005,
            reg: 0.02,
            epochs: 50,
            init_std: 0.1,
        }
    }
}

/// Biased matrix factorization: `mu + b_u + b_i + p_u . q_i`, trained by SGD
/// over shuffled ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub global_mean: f64,
    pub user_bias: Array1<f64>,
    pub item_bias: Array1<f64>,
    pub p: Array2<f64>,
    pub q: Array2<f64>,
    /// Training loss after each epoch.
    pub losses: Vec<f64>,
}

fn check_sgd(kind: &str, dim: usize, lr: f64, reg: f64, epochs: usize) -> Result<()> {
    if dim == 0 || epochs == 0 || !(lr > 0.0) || reg < 0.0 {
        return Err(Error::invalid(format!("{kind} needs dim >= 1, epochs >= 1, lr > 0 and reg >= 0")));
    }
    Ok(())
}

fn global_mean(train: &RatingMatrix) -> f64 {
    train.entries().map(|r| r.value as f64).sum::<f64>() / train.num_ratings() as f64
}

impl Svd {
    /// A model with all factors and biases at zero.
    pub fn constant(num_users: usize, num_items: usize, dim: usize, global_mean: f64) -> Self {
        Self {
            global_mean,
            user_bias: Array1::zeros(num_users),
            item_bias: Array1::zeros(num_items),
            p: Array2::zeros((num_users, dim)),
            q: Array2::zeros((num_items, dim)),
            losses: Vec::new(),
        }
    }

    pub fn fit(train: &RatingMatrix, config: &SvdConfig, seed: u64) -> Result<Self> {
        check_sgd("SVD", config.dim, config.lr, config.reg, config.epochs)?;
        let mut rng = seed::rng(seed);
        let normal = Normal::new(0.0, config.init_std).map_err(|e| Error::invalid(e.to_string()))?;
        let mut model = Self::constant(train.num_users(), train.num_items(), config.dim, global_mean(train));
        model.p.mapv_inplace(|_| normal.sample(&mut rng));
        model.q.mapv_inplace(|_| normal.sample(&mut rng));

        let mut entries: Vec<Rating> = train.entries().collect();
        let mut stop = EarlyStop::new(50, 1e-6);
        let (lr, reg) = (config.lr, config.reg);
        for epoch in 0..config.epochs {
            entries.shuffle(&mut rng);
            let mut loss = 0.0;
            for r in &entries {
                let (u, i) = (r.user, r.item);
                let err = r.value as f64 - model.predict(u, i);
                loss += err * err;
                let bu = model.user_bias[u];
                let bi = model.item_bias[i];
                model.user_bias[u] += lr * (err - reg * bu);
                model.item_bias[i] += lr * (err - reg * bi);
                for k in 0..config.dim {
                    let pu = model.p[[u, k]];
                    let qi = model.q[[i, k]];
                    model.p[[u, k]] += lr * (err * qi - reg * pu);
                    model.q[[i, k]] += lr * (err * pu - reg * qi);
                }
            }
            if !loss.is_finite() {
                return Err(diverged(VictimKind::Svd, epoch, loss));
            }
            model.losses.push(loss);
            if stop.record(loss) {
                break;
            }
        }
        Ok(model)
    }

    pub fn num_users(&self) -> usize {
        self.p.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.q.nrows()
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.global_mean + self.user_bias[user] + self.item_bias[item] + self.p.row(user).dot(&self.q.row(item))
    }

    pub fn score_user(&self, user: usize) -> Vec<f64> {
        let dots = self.q.dot(&self.p.row(user));
        let base = self.global_mean + self.user_bias[user];
        dots.iter().zip(&self.item_bias).map(|(d, b)| base + b + d).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NmfConfig {
    pub dim: usize,
    pub lr: f64,
    pub reg: f64,
    pub epochs: usize,
}

impl Default for NmfConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            lr: 0.005,
            reg: 0.06,
            epochs: 50,
        }
    }
}

/// Non-negative factorization `p_u . q_i` trained by SGD with every factor
/// clamped at zero after each update.
#[derive(Debug, Clone, PartialEq)]
pub struct Nmf {
    pub p: Array2<f64>,
    pub q: Array2<f64>,
    pub losses: Vec<f64>,
    /// Smallest factor entry seen after each epoch.
    pub min_factor: Vec<f64>,
}

impl Nmf {
    pub fn fit(train: &RatingMatrix, config: &NmfConfig, seed: u64) -> Result<Self> {
        check_sgd("NMF", config.dim, config.lr, config.reg, config.epochs)?;
        let mut rng = seed::rng(seed);
        // Uniform init scaled so the initial dot product sits near the mean rating.
        let high = (2.0 * global_mean(train) / config.dim as f64).sqrt();
        let uniform = Uniform::new(0.0, high).map_err(|e| Error::invalid(e.to_string()))?;
        let mut p = Array2::from_shape_simple_fn((train.num_users(), config.dim), || uniform.sample(&mut rng));
        let mut q = Array2::from_shape_simple_fn((train.num_items(), config.dim), || uniform.sample(&mut rng));

        let mut entries: Vec<Rating> = train.entries().collect();
        let mut stop = EarlyStop::new(50, 1e-6);
        let (lr, reg) = (config.lr, config.reg);
        let mut losses = Vec::new();
        let mut min_factor = Vec::new();
        for epoch in 0..config.epochs {
            entries.shuffle(&mut rng);
            let mut loss = 0.0;
            for r in &entries {
                let (u, i) = (r.user, r.item);
                let err = r.value as f64 - p.row(u).dot(&q.row(i));
                loss += err * err;
                for k in 0..config.dim {
                    let pu = p[[u, k]];
                    let qi = q[[i, k]];
                    p[[u, k]] = (pu + lr * (err * qi - reg * pu)).max(0.0);
                    q[[i, k]] = (qi + lr * (err * pu - reg * qi)).max(0.0);
                }
            }
            if !loss.is_finite() {
                return Err(diverged(VictimKind::Nmf, epoch, loss));
            }
            losses.push(loss);
            min_factor.push(p.iter().chain(q.iter()).copied().fold(f64::INFINITY, f64::min));
            if stop.record(loss) {
                break;
            }
        }
        Ok(Self { p, q, losses, min_factor })
    }

    pub fn num_users(&self) -> usize {
        self.p.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.q.nrows()
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.p.row(user).dot(&self.q.row(item))
    }

    pub fn score_user(&self, user: usize) -> Vec<f64> {
        self.q.dot(&self.p.row(user)).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> RatingMatrix {
        let triples = [
            ("a", "x", 5),
            ("a", "y", 3),
            ("a", "z", 1),
            ("b", "x", 4),
            ("b", "z", 2),
            ("c", "y", 5),
            ("c", "z", 4),
            ("d", "x", 1),
            ("d", "y", 2),
        ];
        RatingMatrix::from_triples(triples.iter().map(|&(u, i, r)| (u, i, r)), 5).unwrap()
    }

    #[test]
    fn zero_factors_predict_global_mean() {
        let m = Svd::constant(2, 3, 4, 3.5);
        assert_eq!(m.predict(1, 2), 3.5);
        assert_eq!(m.score_user(0), vec![3.5; 3]);
    }

    #[test]
    fn svd_is_deterministic_and_fits() {
        let train = fixture();
        let cfg = SvdConfig {
            dim: 4,
            epochs: 200,
            lr: 0.02,
            ..SvdConfig::default()
        };
        let a = Svd::fit(&train, &cfg, 3).unwrap();
        let b = Svd::fit(&train, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.losses.last().unwrap() < &a.losses[0]);
        let c = Svd::fit(&train, &cfg, 4).unwrap();
        assert_ne!(a.p, c.p);
    }

    #[test]
    fn score_user_matches_predict() {
        let train = fixture();
        let m = Svd::fit(
            &train,
            &SvdConfig {
                dim: 3,
                epochs: 5,
                ..SvdConfig::default()
            },
            1,
        )
        .unwrap();
        for u in 0..m.num_users() {
            let s = m.score_user(u);
            for (i, v) in s.iter().enumerate() {
                assert!((v - m.predict(u, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nmf_stays_nonnegative() {
        let train = fixture();
        let cfg = NmfConfig {
            dim: 3,
            epochs: 100,
            lr: 0.05,
            reg: 0.0,
        };
        let m = Nmf::fit(&train, &cfg, 9).unwrap();
        assert_eq!(m.min_factor.len(), m.losses.len());
        assert!(m.min_factor.iter().all(|&v| v >= 0.0));
        assert!(m.losses.last().unwrap() < &m.losses[0]);
    }

    #[test]
    fn rejects_bad_config() {
        let train = fixture();
        assert!(Svd::fit(
            &train,
            &SvdConfig {
                dim: 0,
                ..SvdConfig::default()
            },
            0
        )
        .is_err());
        assert!(Nmf::fit(
            &train,
            &NmfConfig {
                lr: 0.0,
                ..NmfConfig::default()
            },
            0
        )
        .is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence() {
        let train = fixture();
        let cfg = SvdConfig {
            lr: 1e6,
            dim: 4,
            epochs: 50,
            ..SvdConfig::default()
        };
        assert!(matches!(Svd::fit(&train, &cfg, 0), Err(Error::Divergence { .. })));
    }
}
