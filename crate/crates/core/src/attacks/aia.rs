use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::heuristics::round_rating;
use super::FakeProfileBatch;
use crate::dataset::{AttackBudget, RatingMatrix};
use crate::diffcore::Optimizer;
use crate::error::{Error, Result};
use crate::seed;
use crate::surrogate::{InnerLoopConfig, RatingView, SurrogateConfig, SurrogateHarness};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AiaConfig {
    pub surrogate: SurrogateConfig,
    pub inner: InnerLoopConfig,
    /// Outer optimisation steps on the fake rows.
    pub epochs: usize,
    /// Adam learning rate on the fake ratings.
    pub lr: f64,
}

impl Default for AiaConfig {
    fn default() -> Self {
        Self {
            surrogate: SurrogateConfig::default(),
            inner: InnerLoopConfig::default(),
            epochs: 30,
            lr: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AiaOutcome {
    pub batch: FakeProfileBatch,
    /// Promotion loss on the surrogate before each update and once more
    /// after the last one (`epochs + 1` values; empty when `epochs == 0`).
    pub losses: Vec<f64>,
}

/// Samples `count` real users, distinct when there are enough of them.
pub(crate) fn sample_templates(num_users: usize, count: usize, rng: &mut seed::Rng) -> Vec<usize> {
    use rand::Rng as _;
    if count <= num_users {
        rand::seq::index::sample(rng, num_users, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..num_users)).collect()
    }
}

/// Real profiles copied as starting points, then pushed along the
/// last-step-unrolled surrogate gradient. The profile size is not
/// constrained: every row keeps its template's full pattern plus the
/// targets.
pub fn aia_attack(real: &RatingMatrix, budget: &AttackBudget, config: &AiaConfig, seed: u64) -> Result<AiaOutcome> {
    budget.validate()?;
    if real.is_empty() {
        return Err(Error::EmptyMatrix("AIA needs real users".into()));
    }
    if !(config.lr > 0.0) {
        return Err(Error::invalid("AIA learning rate must be > 0"));
    }
    let mut rng = seed::rng(seed);
    let templates = sample_templates(real.num_users(), budget.attack_size, &mut rng);
    let (a, m) = (templates.len(), real.num_items());
    let rmax = budget.rating_max as f64;

    let mut values = Array2::<f64>::zeros((a, m));
    for (k, &u) in templates.iter().enumerate() {
        for &(i, r) in real.user_row(u) {
            values[[k, i]] = r as f64;
        }
        for &t in &budget.targets {
            values[[k, t]] = rmax;
        }
    }
    let observed = values.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 });
    let mut free = observed.clone();
    for &t in &budget.targets {
        free.column_mut(t).fill(0.0);
    }

    let mut losses = Vec::new();
    if config.epochs > 0 {
        let base = RatingView::from_matrix(real);
        let sur_seed = seed::derive_seed(seed, &["aia-surrogate"]);
        let mut harness = SurrogateHarness::new(&base, &values, &observed, &config.surrogate, config.inner, sur_seed)?;
        let mut opt = Optimizer::adam(config.lr)?;
        for epoch in 0..=config.epochs {
            harness.train_epoch()?;
            let step = harness.attack_grad(&budget.targets)?;
            if !step.loss.is_finite() {
                return Err(Error::diverged("AIA", epoch, step.loss));
            }
            losses.push(step.loss);
            if epoch == config.epochs {
                break;
            }
            let grad = step.grad * &free;
            opt.step_arrays(&mut [&mut values], &[grad])?;
            values.zip_mut_with(&observed, |v, &o| *v = if o != 0.0 { v.clamp(1.0, rmax) } else { 0.0 });
            harness.set_fake_values(&values)?;
        }
    }

    let rows = (0..a)
        .map(|k| {
            (0..m)
                .filter(|&i| observed[[k, i]] != 0.0)
                .map(|i| (i, round_rating(values[[k, i]], budget.rating_max)))
                .collect()
        })
        .collect();
    let batch = FakeProfileBatch::new(m, rows, "aia", seed, Some(templates), budget.rating_max)?;
    Ok(AiaOutcome { batch, losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::WrmfConfig;

    fn real() -> RatingMatrix {
        let mut t = Vec::new();
        for u in 0..20 {
            for i in 0..12 {
                if (u * 7 + i * 3) % 5 < 2 {
                    t.push((format!("u{u}"), format!("i{i}"), 1 + ((u + 2 * i) % 5) as u8));
                }
            }
        }
        RatingMatrix::from_triples(t, 5).unwrap()
    }

    fn config(epochs: usize) -> AiaConfig {
        AiaConfig {
            surrogate: SurrogateConfig::Wrmf(WrmfConfig {
                dim: 4,
                init_std: 0.1,
                ..WrmfConfig::default()
            }),
            inner: InnerLoopConfig {
                pretrain_steps: 100,
                inner_steps: 5,
                surrogate_lr: 0.05,
                unroll_lr: 0.01,
                ..InnerLoopConfig::default()
            },
            epochs,
            lr: 0.2,
        }
    }

    #[test]
    fn zero_epochs_copies_templates() {
        let m = real();
        let b = AttackBudget::new(6, 3, vec![], vec![11], 5).unwrap();
        let out = aia_attack(&m, &b, &config(0), 5).unwrap();
        assert!(out.losses.is_empty());
        let templates = out.batch.template_users.clone().unwrap();
        for (row, &u) in out.batch.rows.iter().zip(&templates) {
            let mut expect: Vec<(usize, u8)> = m.user_row(u).iter().copied().filter(|&(i, _)| i != 11).collect();
            expect.push((11, 5));
            expect.sort_unstable();
            assert_eq!(row, &expect);
        }
    }

    #[test]
    fn optimisation_lowers_the_promotion_loss() {
        let m = real();
        let b = AttackBudget::new(5, 3, vec![], vec![4], 5).unwrap();
        let out = aia_attack(&m, &b, &config(15), 1).unwrap();
        assert_eq!(out.losses.len(), 16);
        assert!(out.losses.last().unwrap() <= &out.losses[0], "{:?}", out.losses);
        assert_eq!(out.batch.len(), 5);
        out.batch.check_targets(&b).unwrap();
        let again = aia_attack(&m, &b, &config(15), 1).unwrap();
        assert_eq!(again.batch, out.batch);
    }
}
