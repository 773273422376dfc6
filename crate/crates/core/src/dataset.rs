//! Rating data: loading, filtering, splitting, summary statistics and the
//! choice of target / selected items for an attack.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_RATING_MAX: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: u8,
}

/// Sparse users x items matrix of discrete ratings in `1..=rating_max`.
///
/// External IDs are kept as strings; everything internal uses dense indices.
/// Rows are stored CSR-style, sorted by item within a user.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    num_users: usize,
    num_items: usize,
    rating_max: u8,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
    row_ptr: Vec<usize>,
    cells: Vec<(usize, u8)>,
}

impl RatingMatrix {
    /// Builds a matrix from dense-indexed entries, validating every invariant.
    pub fn new(user_ids: Vec<String>, item_ids: Vec<String>, mut entries: Vec<Rating>, rating_max: u8) -> Result<Self> {
        let num_users = user_ids.len();
        let num_items = item_ids.len();
        check_bijection("user", &user_ids)?;
        check_bijection("item", &item_ids)?;
        for r in &entries {
            if r.user >= num_users || r.item >= num_items {
                return Err(Error::Validation(format!(
                    "entry ({}, {}) outside {}x{}",
                    r.user, r.item, num_users, num_items
                )));
            }
            if r.value < 1 || r.value > rating_max {
                return Err(Error::Validation(format!(
                    "rating {} for ({}, {}) outside [1, {}]",
                    r.value, user_ids[r.user], item_ids[r.item], rating_max
                )));
            }
        }
        entries.sort_unstable_by_key(|r| (r.user, r.item));
        if let Some(w) = entries.windows(2).find(|w| w[0].user == w[1].user && w[0].item == w[1].item) {
            return Err(Error::Validation(format!(
                "duplicate rating for user {} item {}",
                user_ids[w[0].user], item_ids[w[0].item]
            )));
        }
        let mut row_ptr = vec![0usize; num_users + 1];
        for r in &entries {
            row_ptr[r.user + 1] += 1;
        }
        for u in 0..num_users {
            row_ptr[u + 1] += row_ptr[u];
        }
        let cells = entries.iter().map(|r| (r.item, r.value)).collect();
        Ok(Self {
            num_users,
            num_items,
            rating_max,
            user_ids,
            item_ids,
            row_ptr,
            cells,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_ratings(&self) -> usize {
        self.cells.len()
    }

    pub fn rating_max(&self) -> u8 {
        self.rating_max
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.item_ids[item]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.iter().position(|x| x == id)
    }

    /// `(item, rating)` pairs of one user, sorted by item.
    pub fn user_row(&self, user: usize) -> &[(usize, u8)] {
        &self.cells[self.row_ptr[user]..self.row_ptr[user + 1]]
    }

    pub fn get(&self, user: usize, item: usize) -> Option<u8> {
        let row = self.user_row(user);
        row.binary_search_by_key(&item, |&(i, _)| i).ok().map(|k| row[k].1)
    }

    pub fn entries(&self) -> impl Iterator<Item = Rating> + '_ {
        (0..self.num_users).flat_map(move |u| self.user_row(u).iter().map(move |&(item, value)| Rating { user: u, item, value }))
    }

    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_items];
        for &(i, _) in &self.cells {
            counts[i] += 1;
        }
        counts
    }

    /// Users who rated each item.
    pub fn item_users(&self) -> Vec<Vec<(usize, u8)>> {
        let mut cols = vec![Vec::new(); self.num_items];
        for r in self.entries() {
            cols[r.item].push((r.user, r.value));
        }
        cols
    }

    /// Dense copy with zeros for unrated cells.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_users, self.num_items));
        for r in self.entries() {
            out[[r.user, r.item]] = r.value as f64;
        }
        out
    }

    /// Same user and item universe, different entries. Used by `split`.
    fn with_entries(&self, entries: Vec<Rating>) -> Result<Self> {
        Self::new(self.user_ids.clone(), self.item_ids.clone(), entries, self.rating_max)
    }

    /// Appends new users (e.g. injected fake profiles) after the existing ones.
    /// Item indices are shared with `self`.
    pub fn with_appended_users(&self, ids: &[String], rows: &[Vec<(usize, u8)>]) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::shape(format!("{} ids for {} rows", ids.len(), rows.len())));
        }
        let mut user_ids = self.user_ids.clone();
        user_ids.extend(ids.iter().cloned());
        let mut entries: Vec<Rating> = self.entries().collect();
        for (k, row) in rows.iter().enumerate() {
            let user = self.num_users + k;
            entries.extend(row.iter().map(|&(item, value)| Rating { user, item, value }));
        }
        Self::new(user_ids, self.item_ids.clone(), entries, self.rating_max)
    }

    /// Appends every user of `other` (matched to `self` by item id), e.g. a
    /// fake-profile file written by an attacker.
    pub fn with_users_of(&self, other: &RatingMatrix) -> Result<Self> {
        let mut rows = Vec::with_capacity(other.num_users());
        for u in 0..other.num_users() {
            let row = other
                .user_row(u)
                .iter()
                .map(|&(i, r)| {
                    let id = other.item_id(i);
                    self.item_index(id)
                        .map(|j| (j, r))
                        .ok_or_else(|| Error::Validation(format!("item {id} of user {} is unknown", other.user_id(u))))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let known: std::collections::HashSet<&str> = self.user_ids.iter().map(String::as_str).collect();
        if let Some(id) = other.user_ids().iter().find(|id| known.contains(id.as_str())) {
            return Err(Error::Validation(format!("user {id} already exists")));
        }
        self.with_appended_users(other.user_ids(), &rows)
    }

    /// Builds a matrix from `(user_id, item_id, rating)` triples, assigning dense
    /// indices in order of first appearance.
    pub fn from_triples<I, U, T>(triples: I, rating_max: u8) -> Result<Self>
    where
        I: IntoIterator<Item = (U, T, u8)>,
        U: Into<String>,
        T: Into<String>,
    {
        let mut users = IdMap::default();
        let mut items = IdMap::default();
        let entries: Vec<Rating> = triples
            .into_iter()
            .map(|(u, i, value)| Rating {
                user: users.index(u.into()),
                item: items.index(i.into()),
                value,
            })
            .collect();
        if entries.is_empty() {
            return Err(Error::EmptyMatrix("no ratings".into()));
        }
        Self::new(users.ids, items.ids, entries, rating_max)
    }
}

fn check_bijection(kind: &str, ids: &[String]) -> Result<()> {
    let mut seen = HashMap::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if let Some(prev) = seen.insert(id.as_str(), k) {
            return Err(Error::Validation(format!("{kind} id {id:?} maps to both {prev} and {k}")));
        }
    }
    Ok(())
}

#[derive(Default)]
struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    fn index(&mut self, id: String) -> usize {
        if let Some(&k) = self.index.get(&id) {
            return k;
        }
        let k = self.ids.len();
        self.index.insert(id.clone(), k);
        self.ids.push(id);
        k
    }
}

fn parse_rating(raw: &str, rating_max: u8, path: &Path, line: usize) -> Result<u8> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("rating {raw:?} is not a number"),
    })?;
    if value.fract() != 0.0 || value < 1.0 || value > rating_max as f64 {
        return Err(Error::Validation(format!(
            "{}:{line}: rating {raw} outside the discrete scale 1..={rating_max}",
            path.display()
        )));
    }
    Ok(value as u8)
}

/// Loads a MovieLens `u.data` style file: `user \t item \t rating \t timestamp`.
/// Timestamps are discarded.
pub fn load_movielens(path: impl AsRef<Path>) -> Result<RatingMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut triples = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 && fields.len() != 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let user = fields[0].trim();
        let item = fields[1].trim();
        if user.is_empty() || item.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "empty user or item id".into(),
            });
        }
        let rating = parse_rating(fields[2], DEFAULT_RATING_MAX, path, line_no)?;
        triples.push((user.to_string(), item.to_string(), rating));
    }
    if triples.is_empty() {
        return Err(Error::EmptyMatrix(format!("{} has no ratings", path.display())));
    }
    RatingMatrix::from_triples(triples, DEFAULT_RATING_MAX)
}

/// Loads comma-separated `user,item,rating` rows (extra columns are ignored).
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<RatingMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut triples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() < 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected user,item,rating; found {} fields", record.len()),
            });
        }
        let rating = parse_rating(&record[2], DEFAULT_RATING_MAX, path, line)?;
        triples.push((record[0].to_string(), record[1].to_string(), rating));
    }
    if triples.is_empty() {
        return Err(Error::EmptyMatrix(format!("{} has no ratings", path.display())));
    }
    RatingMatrix::from_triples(triples, DEFAULT_RATING_MAX)
}

/// Loads by extension: `.csv` as CSV, anything else as MovieLens. A CSV
/// whose first row has a non-numeric rating field is taken to have a header.
pub fn load_auto(path: impl AsRef<Path>) -> Result<RatingMatrix> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let mut first = String::new();
            std::io::BufRead::read_line(&mut std::io::BufReader::new(std::fs::File::open(path)?), &mut first)?;
            let header = first.split(',').nth(2).is_some_and(|f| f.trim().parse::<f64>().is_err());
            load_csv(path, header)
        }
        _ => load_movielens(path),
    }
}

/// Drops users with fewer than `min_user_ratings` ratings, then items left
/// without ratings, and reindexes densely. A single pass, not a fixed point.
pub fn filter(matrix: &RatingMatrix, min_user_ratings: usize) -> Result<RatingMatrix> {
    let keep_user: Vec<bool> = (0..matrix.num_users())
        .map(|u| matrix.user_row(u).len() >= min_user_ratings)
        .collect();
    let mut item_count = vec![0usize; matrix.num_items()];
    for r in matrix.entries().filter(|r| keep_user[r.user]) {
        item_count[r.item] += 1;
    }
    let mut user_map = vec![usize::MAX; matrix.num_users()];
    let mut user_ids = Vec::new();
    for u in (0..matrix.num_users()).filter(|&u| keep_user[u]) {
        user_map[u] = user_ids.len();
        user_ids.push(matrix.user_id(u).to_string());
    }
    let mut item_map = vec![usize::MAX; matrix.num_items()];
    let mut item_ids = Vec::new();
    for i in (0..matrix.num_items()).filter(|&i| item_count[i] > 0) {
        item_map[i] = item_ids.len();
        item_ids.push(matrix.item_id(i).to_string());
    }
    let entries: Vec<Rating> = matrix
        .entries()
        .filter(|r| keep_user[r.user])
        .map(|r| Rating {
            user: user_map[r.user],
            item: item_map[r.item],
            value: r.value,
        })
        .collect();
    if entries.is_empty() {
        return Err(Error::EmptyMatrix(format!("no users with at least {min_user_ratings} ratings")));
    }
    RatingMatrix::new(user_ids, item_ids, entries, matrix.rating_max())
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: RatingMatrix,
    pub test: RatingMatrix,
    pub seed: u64,
}

/// Shuffles all entries with a seeded RNG and takes the first
/// `floor(N * test_fraction)` as the test set. Both halves keep the source's
/// user and item universe so indices line up.
pub fn split(matrix: &RatingMatrix, test_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test_fraction must lie in (0, 1), got {test_fraction}")));
    }
    let mut entries: Vec<Rating> = matrix.entries().collect();
    entries.shuffle(&mut seed::rng(seed));
    let n_test = (entries.len() as f64 * test_fraction).floor() as usize;
    let train = entries.split_off(n_test);
    Ok(DatasetSplit {
        train: matrix.with_entries(train)?,
        test: matrix.with_entries(entries)?,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub num_users: usize,
    pub num_items: usize,
    pub num_ratings: usize,
    /// Fraction of missing cells, in [0, 1].
    pub sparsity: f64,
    pub global_mean: f64,
    /// Population standard deviation.
    pub global_std: f64,
    /// Per-item mean; 0 for items without ratings (check `item_count`).
    pub item_mean: Vec<f64>,
    pub item_std: Vec<f64>,
    pub item_count: Vec<usize>,
}

impl Stats {
    pub fn sparsity_percent(&self) -> f64 {
        100.0 * self.sparsity
    }

    pub fn mean_ratings_per_user(&self) -> f64 {
        self.num_ratings as f64 / self.num_users as f64
    }
}

pub fn stats(matrix: &RatingMatrix) -> Result<Stats> {
    if matrix.is_empty() {
        return Err(Error::EmptyMatrix("stats of an empty matrix".into()));
    }
    let n = matrix.num_ratings() as f64;
    let mut sum = 0.0;
    let mut item_sum = vec![0.0; matrix.num_items()];
    let mut item_count = vec![0usize; matrix.num_items()];
    for r in matrix.entries() {
        sum += r.value as f64;
        item_sum[r.item] += r.value as f64;
        item_count[r.item] += 1;
    }
    let global_mean = sum / n;
    let item_mean: Vec<f64> = item_sum
        .iter()
        .zip(&item_count)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect();
    let mut sq = 0.0;
    let mut item_sq = vec![0.0; matrix.num_items()];
    for r in matrix.entries() {
        let v = r.value as f64;
        sq += (v - global_mean).powi(2);
        item_sq[r.item] += (v - item_mean[r.item]).powi(2);
    }
    let item_std = item_sq
        .iter()
        .zip(&item_count)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { (s / c as f64).sqrt() })
        .collect();
    let cells = matrix.num_users() as f64 * matrix.num_items() as f64;
    Ok(Stats {
        num_users: matrix.num_users(),
        num_items: matrix.num_items(),
        num_ratings: matrix.num_ratings(),
        sparsity: 1.0 - n / cells,
        global_mean,
        global_std: (sq / n).sqrt(),
        item_mean,
        item_std,
        item_count,
    })
}

/// Samples `n` distinct item indices uniformly.
pub fn pick_targets(matrix: &RatingMatrix, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > matrix.num_items() {
        return Err(Error::invalid(format!("cannot pick {n} targets from {} items", matrix.num_items())));
    }
    let mut rng = seed::rng(seed);
    Ok(rand::seq::index::sample(&mut rng, matrix.num_items(), n).into_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionStrategy {
    /// Most-rated items first, ties by ascending index.
    #[default]
    Popular,
}

/// Picks `n` selected items by `strategy`, skipping anything in `exclude`
/// (normally the targets). Returned in rank order.
pub fn pick_selected(matrix: &RatingMatrix, n: usize, strategy: SelectionStrategy, exclude: &[usize]) -> Vec<usize> {
    match strategy {
        SelectionStrategy::Popular => {
            let counts = matrix.item_counts();
            let mut order: Vec<usize> = (0..matrix.num_items()).filter(|i| !exclude.contains(i)).collect();
            order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
            order.truncate(n);
            order
        }
    }
}

/// Attack size `A`, profile size `P`, selected items `S` and targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackBudget {
    pub attack_size: usize,
    pub profile_size: usize,
    pub selected: Vec<usize>,
    pub targets: Vec<usize>,
    pub rating_max: u8,
}

impl AttackBudget {
    pub fn new(attack_size: usize, profile_size: usize, selected: Vec<usize>, targets: Vec<usize>, rating_max: u8) -> Result<Self> {
        let budget = Self {
            attack_size,
            profile_size,
            selected,
            targets,
            rating_max,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attack_size == 0 {
            return Err(Error::invalid("attack size A must be >= 1"));
        }
        if self.profile_size == 0 {
            return Err(Error::invalid("profile size P must be >= 1"));
        }
        if self.targets.is_empty() {
            return Err(Error::invalid("at least one target item is required"));
        }
        if let Some(t) = self.targets.iter().find(|t| self.selected.contains(t)) {
            return Err(Error::invalid(format!("target {t} is also a selected item")));
        }
        Ok(())
    }

    /// Same budget aimed at a single target.
    pub fn for_target(&self, target: usize) -> Result<Self> {
        Self::new(
            self.attack_size,
            self.profile_size,
            self.selected.clone(),
            vec![target],
            self.rating_max,
        )
    }

    pub fn is_reserved(&self, item: usize) -> bool {
        self.targets.contains(&item) || self.selected.contains(&item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn tiny() -> RatingMatrix {
        RatingMatrix::from_triples(vec![("1", "1", 5), ("1", "2", 3), ("2", "1", 4)], 5).unwrap()
    }

    #[test]
    fn movielens_fixture() {
        let f = write_tmp("1\t1\t5\t881250949\n1\t2\t3\t881250950\n2\t1\t4\t881250951\n", ".data");
        let m = load_movielens(f.path()).unwrap();
        assert_eq!((m.num_users(), m.num_items(), m.num_ratings()), (2, 2, 3));
        assert_eq!(m.get(0, 1), Some(3));
        assert_eq!(m.get(1, 1), None);
    }

    #[test]
    fn movielens_errors() {
        let empty = write_tmp("", ".data");
        assert!(matches!(load_movielens(empty.path()), Err(Error::EmptyMatrix(_))));

        let bad = write_tmp("1\t1\t5\t0\n1 2 3 0\n", ".data");
        match load_movielens(bad.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let out_of_range = write_tmp("1\t1\t6\t0\n", ".data");
        assert!(matches!(load_movielens(out_of_range.path()), Err(Error::Validation(_))));

        let dup = write_tmp("1\t1\t5\t0\n1\t1\t4\t1\n", ".data");
        assert!(matches!(load_movielens(dup.path()), Err(Error::Validation(_))));
    }

    #[test]
    fn csv_loader() {
        let f = write_tmp("u1,i1,5\nu2,i1,4\n", ".csv");
        let m = load_csv(f.path(), false).unwrap();
        assert_eq!((m.num_users(), m.num_items()), (2, 1));

        let h = write_tmp("user,item,rating\nu1,i1,5\n", ".csv");
        let m = load_csv(h.path(), true).unwrap();
        assert_eq!(m.num_ratings(), 1);
        assert_eq!(m.user_id(0), "u1");

        let bad = write_tmp("u1,i1,five\n", ".csv");
        assert!(matches!(load_csv(bad.path(), false), Err(Error::Parse { .. })));
    }

    #[test]
    fn filter_drops_light_users_then_orphan_items() {
        // u_light has 14 ratings, one of them on an item nobody else rated.
        let mut triples = Vec::new();
        for i in 0..13 {
            triples.push(("light".to_string(), format!("i{i}"), 3u8));
        }
        triples.push(("light".into(), "orphan".into(), 3));
        for i in 0..15 {
            triples.push(("heavy".to_string(), format!("i{i}"), 4u8));
        }
        let m = RatingMatrix::from_triples(triples, 5).unwrap();
        let kept = filter(&m, 15).unwrap();
        assert_eq!(kept.num_users(), 1);
        assert_eq!(kept.user_id(0), "heavy");
        assert_eq!(kept.num_items(), 15);
        assert!(kept.item_index("orphan").is_none());
        assert_eq!(kept.num_ratings(), 15);

        assert!(matches!(filter(&m, 100), Err(Error::EmptyMatrix(_))));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let triples: Vec<_> = (0..100).map(|k| (format!("u{}", k / 10), format!("i{}", k % 10), 3u8)).collect();
        let m = RatingMatrix::from_triples(triples, 5).unwrap();
        let s = split(&m, 0.1, 9).unwrap();
        assert_eq!(s.test.num_ratings(), 10);
        assert_eq!(s.train.num_ratings(), 90);
        let again = split(&m, 0.1, 9).unwrap();
        assert_eq!(s.test, again.test);

        let s3 = split(&tiny(), 0.5, 1).unwrap();
        assert_eq!(s3.test.num_ratings(), 1);

        assert!(split(&m, 0.0, 1).is_err());
        assert!(split(&m, 1.0, 1).is_err());
    }

    #[test]
    fn stats_formulas() {
        let all5 = RatingMatrix::from_triples(vec![("a", "x", 5), ("b", "y", 5)], 5).unwrap();
        let s = stats(&all5).unwrap();
        assert_eq!((s.global_mean, s.global_std), (5.0, 0.0));
        assert_eq!(s.sparsity, 0.5);

        let m = RatingMatrix::from_triples(vec![("a", "x", 1), ("b", "x", 5), ("a", "y", 2)], 5).unwrap();
        let s = stats(&m).unwrap();
        assert_eq!(s.item_mean[0], 3.0);
        assert_eq!(s.item_std[0], 2.0);
        assert_eq!(s.item_std[1], 0.0);
        assert_eq!(s.item_count, vec![2, 1]);
    }

    #[test]
    fn targets_and_selected() {
        let triples: Vec<_> = (0..30).map(|k| (format!("u{k}"), format!("i{}", k % 7), 4u8)).collect();
        let m = RatingMatrix::from_triples(triples, 5).unwrap();
        let t = pick_targets(&m, 5, 3).unwrap();
        assert_eq!(t, pick_targets(&m, 5, 3).unwrap());
        let mut d = t.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), 5);
        let mut all = pick_targets(&m, 7, 0).unwrap();
        all.sort();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert!(pick_targets(&m, 8, 0).is_err());

        // items i0 and i1 have 5 ratings; i2.. have 4 -> tie broken by index
        assert_eq!(pick_selected(&m, 1, SelectionStrategy::Popular, &[]), vec![0]);
        assert_eq!(pick_selected(&m, 1, SelectionStrategy::Popular, &[0]), vec![1]);
    }

    #[test]
    fn budget_invariants() {
        assert!(AttackBudget::new(0, 5, vec![], vec![1], 5).is_err());
        assert!(AttackBudget::new(5, 0, vec![], vec![1], 5).is_err());
        assert!(AttackBudget::new(5, 5, vec![], vec![], 5).is_err());
        assert!(AttackBudget::new(5, 5, vec![1], vec![1], 5).is_err());
        assert!(AttackBudget::new(50, 90, vec![2, 3, 4], vec![1], 5).is_ok());
    }

    #[test]
    fn injection_appends_users() {
        let m = tiny();
        let p = m.with_appended_users(&["fake-0".into()], &[vec![(0, 5), (1, 1)]]).unwrap();
        assert_eq!(p.num_users(), 3);
        assert_eq!(p.user_row(2), &[(0, 5), (1, 1)]);
        assert_eq!(p.num_ratings(), 5);
    }

    #[test]
    fn appends_users_by_item_id() {
        let base = tiny();
        let extra = RatingMatrix::from_triples(vec![("f", "2", 5), ("f", "1", 1)], 5).unwrap();
        let m = base.with_users_of(&extra).unwrap();
        assert_eq!(m.num_users(), 3);
        assert_eq!(m.get(2, m.item_index("2").unwrap()), Some(5));
        assert!(base
            .with_users_of(&RatingMatrix::from_triples(vec![("g", "9", 5)], 5).unwrap())
            .is_err());
        assert!(base.with_users_of(&base).is_err());
    }
}
