use rand::seq::index;
use rand_distr::{Distribution, Normal};

use super::FakeProfileBatch;
use crate::dataset::{AttackBudget, Stats};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Clips a continuous rating to `[1, rating_max]` and rounds it to the
/// nearest integer.
pub fn round_rating(value: f64, rating_max: u8) -> u8 {
    value.clamp(1.0, rating_max as f64).round() as u8
}

fn gaussian(mean: f64, std: f64) -> Result<Normal<f64>> {
    Normal::new(mean, std).map_err(|e| Error::invalid(format!("N({mean}, {std}): {e}")))
}

/// Builds `A` rows: targets and selected items at `rating_max`, plus `P`
/// fillers drawn without replacement from `pool` and rated by `rate`.
fn build<F>(name: &str, num_items: usize, budget: &AttackBudget, pool: &[usize], seed: u64, mut rate: F) -> Result<FakeProfileBatch>
where
    F: FnMut(usize, &mut Rng) -> u8,
{
    budget.validate()?;
    let mut rng = seed::rng(seed);
    let take = budget.profile_size.min(pool.len());
    let mut rows = Vec::with_capacity(budget.attack_size);
    for _ in 0..budget.attack_size {
        let mut row: Vec<(usize, u8)> = Vec::with_capacity(take + budget.selected.len() + budget.targets.len());
        for k in index::sample(&mut rng, pool.len(), take) {
            let item = pool[k];
            let r = rate(item, &mut rng);
            row.push((item, r));
        }
        row.extend(budget.selected.iter().map(|&i| (i, budget.rating_max)));
        row.extend(budget.targets.iter().map(|&t| (t, budget.rating_max)));
        rows.push(row);
    }
    FakeProfileBatch::new(num_items, rows, name, seed, None, budget.rating_max)
}

fn filler_pool(num_items: usize, budget: &AttackBudget, keep: impl Fn(usize) -> bool) -> Vec<usize> {
    (0..num_items).filter(|&i| !budget.is_reserved(i) && keep(i)).collect()
}

/// Fillers rated `N(mu, sigma)` from the global moments. Selected items are
/// not used by this attack.
pub fn random_attack(stats: &Stats, budget: &AttackBudget, seed: u64) -> Result<FakeProfileBatch> {
    let budget = AttackBudget {
        selected: Vec::new(),
        ..budget.clone()
    };
    let dist = gaussian(stats.global_mean, stats.global_std)?;
    let pool = filler_pool(stats.num_items, &budget, |_| true);
    build("random", stats.num_items, &budget, &pool, seed, |_, rng| {
        round_rating(dist.sample(rng), budget.rating_max)
    })
}

/// Fillers rated `N(mu_i, sigma_i)` from each item's own moments; only
/// items with at least one rating can be fillers.
pub fn average_attack(stats: &Stats, budget: &AttackBudget, seed: u64) -> Result<FakeProfileBatch> {
    let budget = AttackBudget {
        selected: Vec::new(),
        ..budget.clone()
    };
    let dists = stats
        .item_mean
        .iter()
        .zip(&stats.item_std)
        .map(|(&m, &s)| gaussian(m, s))
        .collect::<Result<Vec<_>>>()?;
    let pool = filler_pool(stats.num_items, &budget, |i| stats.item_count[i] > 0);
    build("average", stats.num_items, &budget, &pool, seed, |item, rng| {
        round_rating(dists[item].sample(rng), budget.rating_max)
    })
}

/// Selected items at the maximum rating, fillers at 1.
pub fn segment_attack(num_items: usize, budget: &AttackBudget, seed: u64) -> Result<FakeProfileBatch> {
    if budget.selected.is_empty() {
        return Err(Error::invalid("segment attack needs at least one selected item"));
    }
    let pool = filler_pool(num_items, budget, |_| true);
    build("segment", num_items, budget, &pool, seed, |_, _| 1)
}

/// Selected (popular) items at the maximum rating, fillers as in the random
/// attack.
pub fn bandwagon_attack(stats: &Stats, budget: &AttackBudget, seed: u64) -> Result<FakeProfileBatch> {
    let dist = gaussian(stats.global_mean, stats.global_std)?;
    let pool = filler_pool(stats.num_items, budget, |_| true);
    build("bandwagon", stats.num_items, budget, &pool, seed, |_, rng| {
        round_rating(dist.sample(rng), budget.rating_max)
    })
}
