use ndarray::Array2;
use rand::seq::index;
use rand::Rng as _;

use crate::dataset::{AttackBudget, RatingMatrix};
use crate::error::{Error, Result};
use crate::seed;

/// `A` real users' rating rows, each cut down to at most `P` items; the
/// starting point for the fake profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateBatch {
    /// Dense `A x num_items`, zero where the template has no rating.
    pub values: Array2<f64>,
    pub source_users: Vec<usize>,
}

impl TemplateBatch {
    pub fn len(&self) -> usize {
        self.source_users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_users.is_empty()
    }

    pub fn num_items(&self) -> usize {
        self.values.ncols()
    }

    /// 0/1 support of the templates.
    pub fn mask(&self) -> Array2<f64> {
        self.values.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 })
    }
}

/// Draws `A` users uniformly with replacement and keeps `P` of each one's
/// rated items, chosen uniformly (all of them when the user has fewer).
pub fn sample_templates(real: &RatingMatrix, budget: &AttackBudget, seed: u64) -> Result<TemplateBatch> {
    budget.validate()?;
    if real.num_users() == 0 {
        return Err(Error::EmptyMatrix("no real users to sample templates from".into()));
    }
    let mut rng = seed::rng(seed);
    let mut values = Array2::zeros((budget.attack_size, real.num_items()));
    let mut source_users = Vec::with_capacity(budget.attack_size);
    for v in 0..budget.attack_size {
        let u = rng.random_range(0..real.num_users());
        let row = real.user_row(u);
        let keep = budget.profile_size.min(row.len());
        for k in index::sample(&mut rng, row.len(), keep) {
            let (i, r) = row[k];
            values[[v, i]] = r as f64;
        }
        source_users.push(u);
    }
    Ok(TemplateBatch { values, source_users })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real() -> RatingMatrix {
        let mut t = Vec::new();
        for i in 0..3 {
            t.push(("small".to_string(), format!("i{i}"), 4u8));
        }
        for i in 0..200 {
            t.push(("big".to_string(), format!("i{i}"), 1 + (i % 5) as u8));
        }
        RatingMatrix::from_triples(t, 5).unwrap()
    }

    #[test]
    fn keeps_at_most_p_rated_items() {
        let m = real();
        let b = AttackBudget::new(40, 90, vec![], vec![250.min(m.num_items() - 1)], 5).unwrap();
        let t = sample_templates(&m, &b, 3).unwrap();
        assert_eq!(t.len(), 40);
        for (row, &u) in t.values.rows().into_iter().zip(&t.source_users) {
            let nz: Vec<usize> = (0..row.len()).filter(|&i| row[i] != 0.0).collect();
            let expect = if m.user_id(u) == "small" { 3 } else { 90 };
            assert_eq!(nz.len(), expect);
            for i in nz {
                assert_eq!(m.get(u, i).map(|r| r as f64), Some(row[i]));
            }
        }
        assert!(t.source_users.iter().any(|&u| m.user_id(u) == "small"));
        assert_eq!(t, sample_templates(&m, &b, 3).unwrap());
    }
}
