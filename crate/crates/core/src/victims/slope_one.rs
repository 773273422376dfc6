use crate::dataset::RatingMatrix;

/// Weighted Slope-One.
///
/// Deviation sums and co-rating counts are kept as integers, so a prediction
/// is a single integer ratio and does not depend on accumulation order.
#[derive(Debug, Clone)]
pub struct SlopeOne {
    num_items: usize,
    /// `dev_sum[i * m + j] = sum over users rating both of (r_ui - r_uj)`.
    dev_sum: Vec<i32>,
    count: Vec<u32>,
    user_rows: Vec<Vec<(usize, u8)>>,
    item_mean: Vec<f64>,
    global_mean: f64,
}

impl SlopeOne {
    pub fn fit(train: &RatingMatrix) -> Self {
        let m = train.num_items();
        let mut dev_sum = vec![0i32; m * m];
        let mut count = vec![0u32; m * m];
        let mut user_rows = Vec::with_capacity(train.num_users());
        for u in 0..train.num_users() {
            let row = train.user_row(u);
            for &(i, ri) in row {
                let base = i * m;
                for &(j, rj) in row {
                    dev_sum[base + j] += ri as i32 - rj as i32;
                    count[base + j] += 1;
                }
            }
            user_rows.push(row.to_vec());
        }
        let mut sums = vec![0.0; m];
        let mut counts = vec![0usize; m];
        let mut total = 0.0;
        for r in train.entries() {
            sums[r.item] += r.value as f64;
            counts[r.item] += 1;
            total += r.value as f64;
        }
        let global_mean = if train.num_ratings() > 0 {
            total / train.num_ratings() as f64
        } else {
            0.0
        };
        let item_mean = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { global_mean })
            .collect();
        Self {
            num_items: m,
            dev_sum,
            count,
            user_rows,
            item_mean,
            global_mean,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_rows.len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// Average deviation `dev(i, j)`, or `None` when no user rated both.
    pub fn deviation(&self, i: usize, j: usize) -> Option<f64> {
        let k = i * self.num_items + j;
        (self.count[k] > 0).then(|| self.dev_sum[k] as f64 / self.count[k] as f64)
    }

    /// `sum_j (dev(i,j) + r_uj) c_ij / sum_j c_ij` over the user's rated items
    /// `j != i`; the item mean when no such item co-occurs with `i`.
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        let base = item * self.num_items;
        let mut num: i64 = 0;
        let mut den: i64 = 0;
        for &(j, r) in &self.user_rows[user] {
            if j == item {
                continue;
            }
            let c = self.count[base + j] as i64;
            num += self.dev_sum[base + j] as i64 + r as i64 * c;
            den += c;
        }
        if den == 0 {
            self.item_mean[item]
        } else {
            num as f64 / den as f64
        }
    }

    pub fn score_user(&self, user: usize) -> Vec<f64> {
        (0..self.num_items).map(|i| self.predict(user, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Rating;
    use crate::seed;
    use rand::Rng as _;

    fn dense(rows: &[Vec<Option<u8>>]) -> RatingMatrix {
        let n = rows.len();
        let m = rows[0].len();
        let entries = rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| {
                row.iter()
                    .enumerate()
                    .filter_map(move |(i, r)| r.map(|value| Rating { user: u, item: i, value }))
            })
            .collect();
        RatingMatrix::new(
            (0..n).map(|u| format!("u{u}")).collect(),
            (0..m).map(|i| format!("i{i}")).collect(),
            entries,
            5,
        )
        .unwrap()
    }

    /// Direct double loop over item pairs, recomputing every deviation from
    /// the raw grid.
    fn brute_force(grid: &[Vec<Option<u8>>], u: usize, i: usize) -> Option<(i64, i64)> {
        let mut num = 0i64;
        let mut den = 0i64;
        for j in 0..grid[0].len() {
            let Some(ruj) = grid[u][j] else { continue };
            if j == i {
                continue;
            }
            let mut dev = 0i64;
            let mut c = 0i64;
            for row in grid {
                if let (Some(a), Some(b)) = (row[i], row[j]) {
                    dev += a as i64 - b as i64;
                    c += 1;
                }
            }
            num += dev + ruj as i64 * c;
            den += c;
        }
        (den > 0).then_some((num, den))
    }

    #[test]
    fn worked_fixture() {
        let grid = vec![
            vec![Some(5), Some(3), Some(2)],
            vec![Some(3), Some(4), None],
            vec![None, Some(2), Some(5)],
        ];
        let model = SlopeOne::fit(&dense(&grid));
        assert_eq!(model.deviation(0, 1), Some(0.5));
        assert_eq!(model.predict(2, 0), 13.0 / 3.0);
    }

    #[test]
    fn matches_brute_force_on_random_grids() {
        let mut rng = seed::rng(55);
        for case in 0..100 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=6);
            let density = if case % 2 == 0 { 1.0 } else { 0.7 };
            let mut grid: Vec<Vec<Option<u8>>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random_bool(density).then(|| rng.random_range(1..=5))).collect())
                .collect();
            grid[0][0] = Some(rng.random_range(1..=5));
            let model = SlopeOne::fit(&dense(&grid));
            for u in 0..n {
                for i in 0..m {
                    let got = model.predict(u, i);
                    if let Some((num, den)) = brute_force(&grid, u, i) {
                        assert_eq!(got, num as f64 / den as f64, "case {case} ({u}, {i})");
                    } else {
                        assert_eq!(got, model.item_mean[i], "case {case} ({u}, {i})");
                    }
                }
            }
        }
    }

    #[test]
    fn user_without_overlap_falls_back_to_item_mean() {
        let grid = vec![vec![Some(4), None], vec![Some(2), None], vec![None, Some(5)]];
        let model = SlopeOne::fit(&dense(&grid));
        assert_eq!(model.predict(2, 0), 3.0);
    }
}
