//! Fake-profile batches and the baseline attackers: Random, Average,
//! Segment, Bandwagon (heuristics) and AIA (surrogate-gradient).

mod aia;
mod heuristics;

use std::io::Write;

use ndarray::Array2;

pub use aia::{aia_attack, AiaConfig, AiaOutcome};
pub use heuristics::{average_attack, bandwagon_attack, random_attack, round_rating, segment_attack};

use crate::dataset::{AttackBudget, RatingMatrix};
use crate::error::{Error, Result};

/// `A` generated fake rows with where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeProfileBatch {
    pub num_items: usize,
    /// Per fake user, `(item, rating)` pairs sorted by item.
    pub rows: Vec<Vec<(usize, u8)>>,
    pub attacker: String,
    pub seed: u64,
    /// Real users each row was built from, for template-based attackers.
    pub template_users: Option<Vec<usize>>,
}

impl FakeProfileBatch {
    /// Sorts each row and checks ratings and item bounds.
    pub fn new(
        num_items: usize,
        mut rows: Vec<Vec<(usize, u8)>>,
        attacker: impl Into<String>,
        seed: u64,
        template_users: Option<Vec<usize>>,
        rating_max: u8,
    ) -> Result<Self> {
        for (k, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(i, _)| i);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Validation(format!("fake row {k} rates an item twice")));
            }
            if let Some(&(i, r)) = row.iter().find(|&&(i, r)| i >= num_items || r < 1 || r > rating_max) {
                return Err(Error::Validation(format!(
                    "fake row {k} has ({i}, {r}) outside {num_items} items / [1, {rating_max}]"
                )));
            }
        }
        Ok(Self {
            num_items,
            rows,
            attacker: attacker.into(),
            seed,
            template_users,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of rated items in `row` other than targets and selected items.
    pub fn filler_count(&self, row: usize, budget: &AttackBudget) -> usize {
        self.rows[row].iter().filter(|&&(i, _)| !budget.is_reserved(i)).count()
    }

    /// Checks that every row gives every target the maximum rating.
    pub fn check_targets(&self, budget: &AttackBudget) -> Result<()> {
        for (k, row) in self.rows.iter().enumerate() {
            for &t in &budget.targets {
                if !row.contains(&(t, budget.rating_max)) {
                    return Err(Error::Validation(format!(
                        "fake row {k} does not rate target {t} with {}",
                        budget.rating_max
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows.len(), self.num_items));
        for (k, row) in self.rows.iter().enumerate() {
            for &(i, r) in row {
                out[[k, i]] = r as f64;
            }
        }
        out
    }

    pub fn user_ids(&self) -> Vec<String> {
        (0..self.rows.len()).map(|k| format!("fake-{}-{k}", self.attacker)).collect()
    }

    /// `real` with the fake rows appended after the real users.
    pub fn inject(&self, real: &RatingMatrix) -> Result<RatingMatrix> {
        if real.num_items() != self.num_items {
            return Err(Error::shape(format!(
                "{}-item batch into {}-item matrix",
                self.num_items,
                real.num_items()
            )));
        }
        real.with_appended_users(&self.user_ids(), &self.rows)
    }

    /// `user_id,item_id,rating` lines using `item_ids` for the item column.
    pub fn write_csv<W: Write>(&self, out: W, item_ids: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_id", "item_id", "rating"])?;
        for (id, row) in self.user_ids().iter().zip(&self.rows) {
            for &(i, r) in row {
                let item = item_ids.get(i).ok_or_else(|| Error::shape(format!("no id for item {i}")))?;
                w.write_record([id.as_str(), item.as_str(), &r.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
