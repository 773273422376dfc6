//! Victim recommenders attacked by the experiments: SVD, NMF, Slope-One,
//! user/item AutoRec and explicit-rating NeuMF, behind one fit / predict /
//! top-K interface.
//!
//! Every model is trained from scratch on whatever matrix it is given
//! (clean or poisoned) and is immutable afterwards. Predictions are not
//! clipped; only rankings are evaluated.

mod autorec;
mod mf;
mod neumf;
mod slope_one;

use serde::{Deserialize, Serialize};

pub use autorec::{AutoRec, AutoRecConfig, AutoRecOrientation};
pub use mf::{Nmf, NmfConfig, Svd, SvdConfig};
pub use neumf::{NeuMf, NeuMfConfig};
pub use slope_one::SlopeOne;

use crate::dataset::RatingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VictimKind {
    Svd,
    Nmf,
    SlopeOne,
    UAutoRec,
    IAutoRec,
    NeuMf,
}

impl VictimKind {
    pub const ALL: [VictimKind; 6] = [
        VictimKind::Svd,
        VictimKind::Nmf,
        VictimKind::SlopeOne,
        VictimKind::UAutoRec,
        VictimKind::IAutoRec,
        VictimKind::NeuMf,
    ];

    pub fn label(self) -> &'static str {
        match self {
            VictimKind::Svd => "svd",
            VictimKind::Nmf => "nmf",
            VictimKind::SlopeOne => "slopeone",
            VictimKind::UAutoRec => "uautorec",
            VictimKind::IAutoRec => "iautorec",
            VictimKind::NeuMf => "neumf",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        let norm: String = label
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL.into_iter().find(|k| k.label() == norm)
    }
}

/// A victim kind together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VictimSpec {
    Svd(SvdConfig),
    Nmf(NmfConfig),
    SlopeOne,
    UAutoRec(AutoRecConfig),
    IAutoRec(AutoRecConfig),
    NeuMf(NeuMfConfig),
}

impl VictimSpec {
    pub fn default_for(kind: VictimKind) -> Self {
        match kind {
            VictimKind::Svd => VictimSpec::Svd(SvdConfig::default()),
            VictimKind::Nmf => VictimSpec::Nmf(NmfConfig::default()),
            VictimKind::SlopeOne => VictimSpec::SlopeOne,
            VictimKind::UAutoRec => VictimSpec::UAutoRec(AutoRecConfig::default()),
            VictimKind::IAutoRec => VictimSpec::IAutoRec(AutoRecConfig::default()),
            VictimKind::NeuMf => VictimSpec::NeuMf(NeuMfConfig::default()),
        }
    }

    pub fn kind(&self) -> VictimKind {
        match self {
            VictimSpec::Svd(_) => VictimKind::Svd,
            VictimSpec::Nmf(_) => VictimKind::Nmf,
            VictimSpec::SlopeOne => VictimKind::SlopeOne,
            VictimSpec::UAutoRec(_) => VictimKind::UAutoRec,
            VictimSpec::IAutoRec(_) => VictimKind::IAutoRec,
            VictimSpec::NeuMf(_) => VictimKind::NeuMf,
        }
    }
}

/// A fitted victim. Only constructible through [`fit`], so prediction is
/// always preceded by training.
#[derive(Debug, Clone)]
pub enum VictimModel {
    Svd(Svd),
    Nmf(Nmf),
    SlopeOne(SlopeOne),
    AutoRec(AutoRec),
    NeuMf(NeuMf),
}

pub fn fit(spec: &VictimSpec, train: &RatingMatrix, seed: u64) -> Result<VictimModel> {
    if train.is_empty() {
        return Err(Error::EmptyMatrix("victim training matrix".into()));
    }
    Ok(match spec {
        VictimSpec::Svd(c) => VictimModel::Svd(Svd::fit(train, c, seed)?),
        VictimSpec::Nmf(c) => VictimModel::Nmf(Nmf::fit(train, c, seed)?),
        VictimSpec::SlopeOne => VictimModel::SlopeOne(SlopeOne::fit(train)),
        VictimSpec::UAutoRec(c) => VictimModel::AutoRec(AutoRec::fit(train, AutoRecOrientation::User, c, seed)?),
        VictimSpec::IAutoRec(c) => VictimModel::AutoRec(AutoRec::fit(train, AutoRecOrientation::Item, c, seed)?),
        VictimSpec::NeuMf(c) => VictimModel::NeuMf(NeuMf::fit(train, c, seed)?),
    })
}

impl VictimModel {
    pub fn num_users(&self) -> usize {
        match self {
            VictimModel::Svd(m) => m.num_users(),
            VictimModel::Nmf(m) => m.num_users(),
            VictimModel::SlopeOne(m) => m.num_users(),
            VictimModel::AutoRec(m) => m.num_users(),
            VictimModel::NeuMf(m) => m.num_users(),
        }
    }

    pub fn num_items(&self) -> usize {
        match self {
            VictimModel::Svd(m) => m.num_items(),
            VictimModel::Nmf(m) => m.num_items(),
            VictimModel::SlopeOne(m) => m.num_items(),
            VictimModel::AutoRec(m) => m.num_items(),
            VictimModel::NeuMf(m) => m.num_items(),
        }
    }

    fn check(&self, user: usize, item: Option<usize>) -> Result<()> {
        if user >= self.num_users() || item.is_some_and(|i| i >= self.num_items()) {
            return Err(Error::invalid(format!(
                "({user}, {item:?}) outside {}x{}",
                self.num_users(),
                self.num_items()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, user: usize, item: usize) -> Result<f64> {
        self.check(user, Some(item))?;
        Ok(match self {
            VictimModel::Svd(m) => m.predict(user, item),
            VictimModel::Nmf(m) => m.predict(user, item),
            VictimModel::SlopeOne(m) => m.predict(user, item),
            VictimModel::AutoRec(m) => m.predict(user, item),
            VictimModel::NeuMf(m) => m.predict(user, item),
        })
    }

    /// Scores of one user on every item.
    pub fn score_user(&self, user: usize) -> Result<Vec<f64>> {
        self.check(user, None)?;
        let scores = match self {
            VictimModel::Svd(m) => m.score_user(user),
            VictimModel::Nmf(m) => m.score_user(user),
            VictimModel::SlopeOne(m) => m.score_user(user),
            VictimModel::AutoRec(m) => m.score_user(user),
            VictimModel::NeuMf(m) => m.score_user(user),
        };
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("victim scores for user {user}")));
        }
        Ok(scores)
    }

    /// The `k` best items for `user` outside `exclude`.
    pub fn top_k(&self, user: usize, k: usize, exclude: &[usize]) -> Result<Vec<usize>> {
        let scores = self.score_user(user)?;
        let mut mask = vec![false; scores.len()];
        for &i in exclude {
            if i < mask.len() {
                mask[i] = true;
            }
        }
        top_k(&scores, k, &mask)
    }
}

/// Indices of the `k` highest scores whose `excluded` flag is false, best
/// first; ties go to the lower index. Fewer than `k` candidates yields a
/// shorter list.
pub fn top_k(scores: &[f64], k: usize, excluded: &[bool]) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("top-K needs K >= 1"));
    }
    let better = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|&i| !excluded.get(i).copied().unwrap_or(false)).collect();
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, better);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(better);
    Ok(candidates)
}

/// Stops when the loss improved by less than `tol` over the last `window`
/// recorded values.
#[derive(Debug, Clone)]
pub(crate) struct EarlyStop {
    window: usize,
    tol: f64,
    history: Vec<f64>,
}

impl EarlyStop {
    pub(crate) fn new(window: usize, tol: f64) -> Self {
        Self {
            window,
            tol,
            history: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, loss: f64) -> bool {
        self.history.push(loss);
        let n = self.history.len();
        n > self.window && self.history[n - 1 - self.window] - loss < self.tol
    }
}

pub(crate) fn diverged(kind: VictimKind, step: usize, loss: f64) -> Error {
    Error::diverged(format!("{} victim", kind.label()), step, loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_order_and_ties() {
        let s = [1.0, 2.0, 3.0];
        assert_eq!(top_k(&s, 2, &[false; 3]).unwrap(), vec![2, 1]);
        assert!(top_k(&s, 2, &[true; 3]).unwrap().is_empty());
        let tied = [5.0, 1.0, 5.0, 5.0];
        assert_eq!(top_k(&tied, 2, &[false; 4]).unwrap(), vec![0, 2]);
        assert_eq!(top_k(&tied, 10, &[false, false, true, false]).unwrap(), vec![0, 3, 1]);
        assert!(top_k(&s, 0, &[false; 3]).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for k in VictimKind::ALL {
            assert_eq!(VictimKind::from_label(k.label()), Some(k));
        }
        assert_eq!(VictimKind::from_label("Slope-One"), Some(VictimKind::SlopeOne));
        assert_eq!(VictimKind::from_label("NeuMF"), Some(VictimKind::NeuMf));
        assert_eq!(VictimKind::from_label("knn"), None);
    }

    #[test]
    fn every_victim_excludes_training_items() {
        let triples: Vec<(String, String, u8)> = (0..10)
            .flat_map(|u| {
                (0..7)
                    .filter(move |i| (u * 3 + i) % 4 != 0)
                    .map(move |i| (format!("u{u}"), format!("i{i}"), (1 + (u + 2 * i) % 5) as u8))
            })
            .collect();
        let train = RatingMatrix::from_triples(triples, 5).unwrap();
        for kind in VictimKind::ALL {
            let spec = match VictimSpec::default_for(kind) {
                VictimSpec::Svd(c) => VictimSpec::Svd(SvdConfig { epochs: 5, ..c }),
                VictimSpec::UAutoRec(c) => VictimSpec::UAutoRec(AutoRecConfig { epochs: 5, ..c }),
                VictimSpec::IAutoRec(c) => VictimSpec::IAutoRec(AutoRecConfig { epochs: 5, ..c }),
                VictimSpec::NeuMf(c) => VictimSpec::NeuMf(NeuMfConfig { epochs: 5, ..c }),
                other => other,
            };
            let model = fit(&spec, &train, 1).unwrap();
            assert_eq!(spec.kind(), kind);
            for u in 0..train.num_users() {
                let rated: Vec<usize> = train.user_row(u).iter().map(|&(i, _)| i).collect();
                let top = model.top_k(u, 3, &rated).unwrap();
                assert_eq!(top.len(), 3.min(7 - rated.len()), "{kind:?}");
                assert!(top.iter().all(|i| !rated.contains(i)), "{kind:?}");
            }
            assert!(model.predict(0, 7).is_err());
        }
    }

    #[test]
    fn early_stop_window() {
        let mut es = EarlyStop::new(2, 1e-6);
        assert!(!es.record(3.0));
        assert!(!es.record(2.0));
        assert!(!es.record(1.0));
        assert!(!es.record(0.5));
        assert!(!es.record(0.5));
        assert!(es.record(0.5));
    }
}
