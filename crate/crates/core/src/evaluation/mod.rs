//! Measuring an attack: HR@K before and after injection, the PCA
//! detector with precision/recall, and 2-D projection export.

mod cell;
mod detect;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cell::{baseline_hit_ratio, evaluate_cell, run_attack_cell, AttackCell, AttackerSpec, CellSeeds, DetectorConfig, Generated};
pub use detect::{detect, export_projection, precision_recall, principal_directions, projection, Detection};

use crate::dataset::RatingMatrix;
use crate::error::{Error, Result};
use crate::victims::VictimModel;

pub const DEFAULT_K: usize = 10;

/// Whether `target` makes the top `k` of `scores` once `excluded` items are
/// removed. Ties go to the lower item index.
pub fn in_top_k(scores: &[f64], target: usize, k: usize, excluded: &[bool]) -> bool {
    if excluded[target] {
        return false;
    }
    let s = scores[target];
    let ahead = scores
        .iter()
        .enumerate()
        .filter(|&(j, &v)| !excluded[j] && (v > s || (v == s && j < target)))
        .count();
    ahead < k
}

/// Real users HR is computed over: those who did not rate `target` in
/// `train`.
pub fn evaluation_users(train: &RatingMatrix, target: usize) -> Vec<usize> {
    (0..train.num_users()).filter(|&u| train.get(u, target).is_none()).collect()
}

/// Fraction of evaluation users whose top-`k` list (train-rated items
/// excluded) contains `target`. Only the first `train.num_users()` users of
/// the victim count, so fake rows appended after them never do.
pub fn hit_ratio(victim: &VictimModel, train: &RatingMatrix, target: usize, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("K must be >= 1"));
    }
    if target >= train.num_items() || victim.num_items() != train.num_items() {
        return Err(Error::invalid(format!(
            "target {target} / victim over {} items vs train over {}",
            victim.num_items(),
            train.num_items()
        )));
    }
    if victim.num_users() < train.num_users() {
        return Err(Error::invalid("victim knows fewer users than the train matrix"));
    }
    let users = evaluation_users(train, target);
    if users.is_empty() {
        return Err(Error::Validation(format!(
            "every user rated item {}; no evaluation users",
            train.item_id(target)
        )));
    }
    let mut excluded = vec![false; train.num_items()];
    let mut hits = 0usize;
    for &u in &users {
        let scores = victim.score_user(u)?;
        let row = train.user_row(u);
        for &(i, _) in row {
            excluded[i] = true;
        }
        hits += in_top_k(&scores, target, k, &excluded) as usize;
        for &(i, _) in row {
            excluded[i] = false;
        }
    }
    Ok(hits as f64 / users.len() as f64)
}

/// One attacker x victim x target cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub attacker: String,
    pub victim: String,
    pub target: String,
    pub target_index: usize,
    pub k: usize,
    pub hr_before: f64,
    pub hr_after: f64,
    pub num_fakes: usize,
    /// Users the victim saw after injection.
    pub users_after: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub attack_seed: u64,
    pub victim_seed: u64,
    pub wall_clock_secs: f64,
    /// Training curves of learned attackers, by name.
    #[serde(skip)]
    pub losses: BTreeMap<String, Vec<f64>>,
}

impl ExperimentReport {
    pub fn check(&self) -> Result<()> {
        let ratios = [Some(self.hr_before), Some(self.hr_after), self.precision, self.recall];
        if ratios.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Validation(format!("ratio outside [0, 1] in {self:?}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::victims::{fit, VictimSpec};
    use rand::Rng as _;

    /// Full sort of candidate scores, then a membership test.
    fn oracle(scores: &[f64], target: usize, k: usize, excluded: &[bool]) -> bool {
        let mut cand: Vec<usize> = (0..scores.len()).filter(|&j| !excluded[j]).collect();
        cand.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        cand.iter().take(k).any(|&j| j == target)
    }

    #[test]
    fn top_k_membership_matches_full_sort() {
        let mut rng = crate::seed::rng(17);
        for _ in 0..3000 {
            let m = rng.random_range(1..31);
            // few distinct values so ties are common
            let scores: Vec<f64> = (0..m).map(|_| rng.random_range(0..5) as f64).collect();
            let excluded: Vec<bool> = (0..m).map(|_| rng.random_bool(0.3)).collect();
            let t = rng.random_range(0..m);
            let k = rng.random_range(1..m + 2);
            assert_eq!(in_top_k(&scores, t, k, &excluded), oracle(&scores, t, k, &excluded));
        }
    }

    fn fixture(seed: u64) -> RatingMatrix {
        let mut rng = crate::seed::rng(seed);
        let mut t = Vec::new();
        for u in 0..20 {
            for i in 0..30 {
                if rng.random_bool(0.3) && i != 29 || (i == 29 && u < 3) {
                    t.push((format!("u{u}"), format!("i{i}"), rng.random_range(1..=5u8)));
                }
            }
        }
        RatingMatrix::from_triples(t, 5).unwrap()
    }

    #[test]
    fn hit_ratio_matches_oracle_on_fitted_victims() {
        for seed in 0..4 {
            let m = fixture(seed);
            for spec in [VictimSpec::SlopeOne, VictimSpec::default_for(crate::victims::VictimKind::Svd)] {
                let v = fit(&spec, &m, seed).unwrap();
                for target in [0, 7, m.item_index("i29").unwrap()] {
                    for k in [1, 3, 10] {
                        let users = evaluation_users(&m, target);
                        let hits = users
                            .iter()
                            .filter(|&&u| {
                                let mut ex = vec![false; m.num_items()];
                                for &(i, _) in m.user_row(u) {
                                    ex[i] = true;
                                }
                                oracle(&v.score_user(u).unwrap(), target, k, &ex)
                            })
                            .count();
                        let expect = hits as f64 / users.len() as f64;
                        assert_eq!(hit_ratio(&v, &m, target, k).unwrap(), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn saturation_and_errors() {
        let m = fixture(1);
        let v = fit(&VictimSpec::SlopeOne, &m, 0).unwrap();
        // every user keeps at least one unrated candidate in this fixture
        assert_eq!(hit_ratio(&v, &m, 5, m.num_items()).unwrap(), 1.0);
        assert!(hit_ratio(&v, &m, 5, 0).is_err());
        let all = RatingMatrix::from_triples(
            [("a", "x", 3u8), ("b", "x", 4), ("a", "y", 1)]
                .iter()
                .map(|&(u, i, r)| (u.to_string(), i.to_string(), r)),
            5,
        )
        .unwrap();
        let v = fit(&VictimSpec::SlopeOne, &all, 0).unwrap();
        assert!(hit_ratio(&v, &all, all.item_index("x").unwrap(), 1).is_err());
    }

    #[test]
    fn worked_ratios() {
        // a rated y; b rated x and w; c rated x (and rates the target z)
        let t = [("a", "y", 5u8), ("b", "x", 5), ("b", "w", 1), ("c", "x", 1), ("c", "z", 4)];
        let m = RatingMatrix::from_triples(t.iter().map(|&(u, i, r)| (u.to_string(), i.to_string(), r)), 5).unwrap();
        let idx = |s: &str| m.item_index(s).unwrap();
        let mut svd = crate::victims::Svd::constant(3, 4, 1, 3.0);
        svd.item_bias[idx("x")] = 2.0;
        svd.item_bias[idx("y")] = 1.0;
        svd.item_bias[idx("z")] = 0.5;
        svd.item_bias[idx("w")] = 1.5;
        let v = VictimModel::Svd(svd.clone());
        // for y: b ranks y > z (hit), c ranks w > y (miss)
        assert_eq!(evaluation_users(&m, idx("z")), vec![0, 1]);
        assert_eq!(hit_ratio(&v, &m, idx("z"), 1).unwrap(), 0.0);
        assert_eq!(hit_ratio(&v, &m, idx("y"), 1).unwrap(), 0.5);
        svd.item_bias[idx("z")] = 9.0;
        assert_eq!(hit_ratio(&VictimModel::Svd(svd), &m, idx("z"), 1).unwrap(), 1.0);
    }
}
