use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{detect, hit_ratio, precision_recall, ExperimentReport};
use crate::attacks::{aia_attack, average_attack, bandwagon_attack, random_attack, segment_attack, AiaConfig, FakeProfileBatch};
use crate::dataset::{stats, AttackBudget, RatingMatrix};
use crate::error::{Error, Result};
use crate::legup::{legup_attack, LegUpConfig};
use crate::victims::{fit, VictimSpec};

/// An attacker and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttackerSpec {
    /// Injects nothing; the control arm.
    None,
    Random,
    Average,
    Segment,
    Bandwagon,
    Aia(AiaConfig),
    #[serde(rename = "legup")]
    LegUp(LegUpConfig),
}

/// Fake profiles plus any training curves the attacker produced.
#[derive(Debug, Clone)]
pub struct Generated {
    pub batch: FakeProfileBatch,
    pub losses: BTreeMap<String, Vec<f64>>,
}

impl AttackerSpec {
    pub const LABELS: [&'static str; 7] = ["none", "random", "average", "segment", "bandwagon", "aia", "legup"];

    pub fn label(&self) -> &'static str {
        match self {
            AttackerSpec::None => "none",
            AttackerSpec::Random => "random",
            AttackerSpec::Average => "average",
            AttackerSpec::Segment => "segment",
            AttackerSpec::Bandwagon => "bandwagon",
            AttackerSpec::Aia(_) => "aia",
            AttackerSpec::LegUp(_) => "legup",
        }
    }

    /// Default hyperparameters for a label.
    pub fn from_label(label: &str) -> Option<Self> {
        Some(match label.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "none" => AttackerSpec::None,
            "random" => AttackerSpec::Random,
            "average" => AttackerSpec::Average,
            "segment" => AttackerSpec::Segment,
            "bandwagon" => AttackerSpec::Bandwagon,
            "aia" => AttackerSpec::Aia(AiaConfig::default()),
            "legup" => AttackerSpec::LegUp(LegUpConfig::default()),
            _ => return None,
        })
    }

    pub fn generate(&self, train: &RatingMatrix, budget: &AttackBudget, seed: u64) -> Result<Generated> {
        let mut losses = BTreeMap::new();
        let batch = match self {
            AttackerSpec::None => FakeProfileBatch::new(train.num_items(), Vec::new(), "none", seed, None, budget.rating_max)?,
            AttackerSpec::Random => random_attack(&stats(train)?, budget, seed)?,
            AttackerSpec::Average => average_attack(&stats(train)?, budget, seed)?,
            AttackerSpec::Segment => segment_attack(train.num_items(), budget, seed)?,
            AttackerSpec::Bandwagon => bandwagon_attack(&stats(train)?, budget, seed)?,
            AttackerSpec::Aia(c) => {
                let out = aia_attack(train, budget, c, seed)?;
                losses.insert("promotion".into(), out.losses);
                out.batch
            }
            AttackerSpec::LegUp(c) => {
                let out = legup_attack(train, budget, c, seed)?;
                let h = out.model.history;
                if let Some(d) = h.discriminator {
                    losses.insert("discriminator".into(), d);
                }
                if let Some(a) = h.adversarial {
                    losses.insert("adversarial".into(), a);
                }
                losses.insert("generator".into(), h.generator);
                losses.insert("total".into(), h.total);
                out.batch
            }
        };
        Ok(Generated { batch, losses })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Users to flag; the number of injected fakes when unset.
    #[serde(alias = "m")]
    pub num_flag: Option<usize>,
    #[serde(alias = "k")]
    pub components: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            num_flag: None,
            components: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub attack: u64,
    pub victim: u64,
}

/// Everything one attacker x victim x target measurement needs.
#[derive(Debug, Clone)]
pub struct AttackCell<'a> {
    pub dataset: &'a str,
    pub train: &'a RatingMatrix,
    pub attacker: &'a AttackerSpec,
    /// Report label; the attacker's kind when unset.
    pub name: Option<&'a str>,
    pub victim: &'a VictimSpec,
    /// Must name exactly one target.
    pub budget: &'a AttackBudget,
    pub k: usize,
    pub detector: Option<DetectorConfig>,
    pub seeds: CellSeeds,
}

/// HR@K of a victim fitted on clean data.
pub fn baseline_hit_ratio(train: &RatingMatrix, victim: &VictimSpec, target: usize, k: usize, seed: u64) -> Result<f64> {
    hit_ratio(&fit(victim, train, seed)?, train, target, k)
}

/// Fits the victim on clean data (unless `hr_before` is supplied), injects
/// the attacker's profiles, refits from scratch with the same seed and
/// measures again; then runs the detector over the poisoned matrix.
pub fn run_attack_cell(cell: &AttackCell, hr_before: Option<f64>) -> Result<(ExperimentReport, Generated)> {
    let start = Instant::now();
    let generated = cell.attacker.generate(cell.train, cell.budget, cell.seeds.attack)?;
    let mut report = evaluate_cell(cell, &generated, hr_before)?;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((report, generated))
}

/// [`run_attack_cell`] for profiles generated elsewhere, e.g. shared by
/// several victims.
pub fn evaluate_cell(cell: &AttackCell, generated: &Generated, hr_before: Option<f64>) -> Result<ExperimentReport> {
    let start = Instant::now();
    let [target] = cell.budget.targets[..] else {
        return Err(Error::invalid(format!(
            "an attack cell has one target, got {:?}",
            cell.budget.targets
        )));
    };
    let hr_before = match hr_before {
        Some(h) => h,
        None => baseline_hit_ratio(cell.train, cell.victim, target, cell.k, cell.seeds.victim)?,
    };
    let poisoned = generated.batch.inject(cell.train)?;
    let victim = fit(cell.victim, &poisoned, cell.seeds.victim)?;
    let hr_after = hit_ratio(&victim, cell.train, target, cell.k)?;

    let (mut precision, mut recall) = (None, None);
    if let (Some(d), false) = (cell.detector, generated.batch.is_empty()) {
        let truth: Vec<usize> = (cell.train.num_users()..poisoned.num_users()).collect();
        let flag = d.num_flag.unwrap_or(truth.len()).min(poisoned.num_users());
        let found = detect(&poisoned, flag, d.components)?;
        let (p, r) = precision_recall(&found.flagged, &truth);
        if found.flagged.len() == truth.len() && p != r {
            return Err(Error::Validation(format!("precision {p} != recall {r} with equal set sizes")));
        }
        precision = Some(p);
        recall = Some(r);
    }

    let report = ExperimentReport {
        dataset: cell.dataset.to_string(),
        attacker: cell.name.unwrap_or(cell.attacker.label()).to_string(),
        victim: cell.victim.kind().label().to_string(),
        target: cell.train.item_id(target).to_string(),
        target_index: target,
        k: cell.k,
        hr_before,
        hr_after,
        num_fakes: generated.batch.len(),
        users_after: poisoned.num_users(),
        precision,
        recall,
        attack_seed: cell.seeds.attack,
        victim_seed: cell.seeds.victim,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        losses: generated.losses.clone(),
    };
    report.check()?;
    Ok(report)
}
