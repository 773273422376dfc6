use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::attacks::AiaConfig;
use crate::dataset::{self, pick_selected, pick_targets, AttackBudget, RatingMatrix, SelectionStrategy};
use crate::error::{Error, Result};
use crate::evaluation::{AttackerSpec, DetectorConfig, DEFAULT_K};
use crate::legup::LegUpConfig;
use crate::seed::derive_seed;
use crate::victims::{VictimKind, VictimSpec};

/// Attacker and victim labels that name real methods this crate does not
/// implement.
const OUT_OF_SCOPE: [&str; 5] = ["dcgan", "wgan", "svdpp", "svd++", "nuke"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    /// `.csv` as CSV, anything else as MovieLens.
    #[default]
    Auto,
    Movielens,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSection {
    pub path: PathBuf,
    pub format: DataFormat,
    /// Name used in reports; the file stem when unset.
    pub label: Option<String>,
    pub min_user_ratings: usize,
    pub test_fraction: f64,
    /// The master seed when unset.
    pub split_seed: Option<u64>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            format: DataFormat::Auto,
            label: None,
            min_user_ratings: 0,
            test_fraction: 0.1,
            split_seed: None,
        }
    }
}

/// An item id written either as a TOML string or integer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItemId {
    Int(i64),
    Str(String),
}

impl std::fmt::Display for ItemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ItemId::Int(i) => write!(f, "{i}"),
            ItemId::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BudgetSection {
    pub attack_size: i64,
    /// Rounded mean ratings per user of the train split when unset.
    pub profile_size: Option<i64>,
    /// Most popular items, targets excluded; ignored when `selected` is given.
    pub num_selected: usize,
    pub selected: Option<Vec<ItemId>>,
    /// Explicit target item ids; otherwise `num_targets` sampled ones.
    pub targets: Option<Vec<ItemId>>,
    pub num_targets: usize,
    /// Derived from the master seed when unset.
    pub target_seed: Option<u64>,
}

impl Default for BudgetSection {
    fn default() -> Self {
        Self {
            attack_size: 50,
            profile_size: None,
            num_selected: 3,
            selected: None,
            targets: None,
            num_targets: 5,
            target_seed: None,
        }
    }
}

/// The experiment file as written. Attacker and victim entries stay raw
/// tables until [`validate`] resolves them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub k: usize,
    pub dataset: DatasetSection,
    pub budget: BudgetSection,
    pub attackers: Vec<toml::Table>,
    pub victims: Vec<toml::Table>,
    pub detector: Option<DetectorConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            parallelism: 0,
            output_dir: PathBuf::from("legup-out"),
            k: DEFAULT_K,
            dataset: DatasetSection::default(),
            budget: BudgetSection::default(),
            attackers: Vec::new(),
            victims: Vec::new(),
            detector: None,
        }
    }
}

/// Deserializes `value`, reporting unknown keys as errors under `context`.
fn strict<T: DeserializeOwned>(value: toml::Value, context: &str, errors: &mut Vec<String>) -> Option<T> {
    let mut unknown = Vec::new();
    let out = serde_ignored::deserialize(value, |path| unknown.push(path.to_string()));
    for key in unknown {
        errors.push(format!("{context}: unknown key `{key}`"));
    }
    match out {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{context}: {}", e.to_string().trim()));
            None
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim().to_string()]))?;
        let mut errors = Vec::new();
        match strict(value, "config", &mut errors) {
            Some(c) if errors.is_empty() => Ok(c),
            _ => Err(Error::Config(errors)),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedAttacker {
    pub name: String,
    pub spec: AttackerSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedVictim {
    pub name: String,
    pub spec: VictimSpec,
}

/// A validated grid: data loaded and split, budget resolved, every
/// attacker and victim typed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub seed: u64,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub k: usize,
    pub dataset: String,
    pub train: RatingMatrix,
    pub test: RatingMatrix,
    /// All targets at once; cells use [`AttackBudget::for_target`].
    pub budget: AttackBudget,
    pub attackers: Vec<NamedAttacker>,
    pub victims: Vec<NamedVictim>,
    pub detector: Option<DetectorConfig>,
}

/// Resolves `kind` against `known`, returning the canonical label.
fn resolve_kind(table: &toml::Table, context: &str, known: impl Fn(&str) -> Option<String>, errors: &mut Vec<String>) -> Option<String> {
    let Some(kind) = table.get("kind").and_then(|v| v.as_str()) else {
        errors.push(format!("{context}: missing string field `kind`"));
        return None;
    };
    if OUT_OF_SCOPE.contains(&kind.to_ascii_lowercase().as_str()) {
        errors.push(format!("{context}: `{kind}` is unsupported (out of scope)"));
        return None;
    }
    let found = known(kind);
    if found.is_none() {
        errors.push(format!("{context}: unknown kind `{kind}`"));
    }
    found
}

/// Splits off `kind` and `name`, leaving the hyperparameters.
fn hyperparameters(table: &toml::Table) -> (Option<String>, toml::Value) {
    let mut rest = table.clone();
    rest.remove("kind");
    let name = rest.remove("name").and_then(|v| v.as_str().map(str::to_string));
    (name, toml::Value::Table(rest))
}

fn no_hyperparameters(params: &toml::Value, context: &str, errors: &mut Vec<String>) {
    if let Some(t) = params.as_table() {
        for key in t.keys() {
            errors.push(format!("{context}: unknown key `{key}`"));
        }
    }
}

fn parse_attacker(k: usize, table: &toml::Table, errors: &mut Vec<String>) -> Option<NamedAttacker> {
    let context = format!("attackers[{k}]");
    let label = resolve_kind(
        table,
        &context,
        |s| AttackerSpec::from_label(s).map(|a| a.label().to_string()),
        errors,
    )?;
    let (name, params) = hyperparameters(table);
    let spec = match label.as_str() {
        "aia" => AttackerSpec::Aia(strict::<AiaConfig>(params, &context, errors)?),
        "legup" => {
            let c: LegUpConfig = strict(params, &context, errors)?;
            errors.extend(c.problems().into_iter().map(|p| format!("{context}: {p}")));
            AttackerSpec::LegUp(c)
        }
        other => {
            no_hyperparameters(&params, &context, errors);
            AttackerSpec::from_label(other)?
        }
    };
    Some(NamedAttacker {
        name: name.unwrap_or(label),
        spec,
    })
}

fn parse_victim(k: usize, table: &toml::Table, errors: &mut Vec<String>) -> Option<NamedVictim> {
    let context = format!("victims[{k}]");
    let kind = resolve_kind(
        table,
        &context,
        |s| VictimKind::from_label(s).map(|v| v.label().to_string()),
        errors,
    )?;
    let kind = VictimKind::from_label(&kind)?;
    let (name, params) = hyperparameters(table);
    let spec = match kind {
        VictimKind::Svd => VictimSpec::Svd(strict(params, &context, errors)?),
        VictimKind::Nmf => VictimSpec::Nmf(strict(params, &context, errors)?),
        VictimKind::SlopeOne => {
            no_hyperparameters(&params, &context, errors);
            VictimSpec::SlopeOne
        }
        VictimKind::UAutoRec => VictimSpec::UAutoRec(strict(params, &context, errors)?),
        VictimKind::IAutoRec => VictimSpec::IAutoRec(strict(params, &context, errors)?),
        VictimKind::NeuMf => VictimSpec::NeuMf(strict(params, &context, errors)?),
    };
    Some(NamedVictim {
        name: name.unwrap_or_else(|| kind.label().to_string()),
        spec,
    })
}

fn duplicates<'a>(names: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            dup.insert(n);
        }
    }
    dup.into_iter().collect()
}

fn item_indices(train: &RatingMatrix, ids: &[ItemId], what: &str, errors: &mut Vec<String>) -> Vec<usize> {
    ids.iter()
        .filter_map(|id| {
            let idx = train.item_index(&id.to_string());
            if idx.is_none() {
                errors.push(format!("budget.{what}: item `{id}` is not in the train split"));
            }
            idx
        })
        .collect()
}

fn load_split(d: &DatasetSection, seed: u64) -> Result<dataset::DatasetSplit> {
    let full = match d.format {
        DataFormat::Auto => dataset::load_auto(&d.path)?,
        DataFormat::Movielens => dataset::load_movielens(&d.path)?,
        DataFormat::Csv => dataset::load_csv(&d.path, false)?,
    };
    let full = if d.min_user_ratings > 0 {
        dataset::filter(&full, d.min_user_ratings)?
    } else {
        full
    };
    dataset::split(&full, d.test_fraction, d.split_seed.unwrap_or(seed))
}

/// Checks the whole configuration, loading and splitting the data to
/// resolve the budget. Every problem found is reported together as
/// [`Error::Config`].
pub fn validate(config: &ExperimentConfig) -> Result<Experiment> {
    let mut errors = Vec::new();
    if config.k == 0 {
        errors.push("k must be >= 1".into());
    }
    let b = &config.budget;
    if b.attack_size <= 0 {
        errors.push(format!("budget.attack_size must be >= 1, got {}", b.attack_size));
    }
    if let Some(p) = b.profile_size.filter(|&p| p <= 0) {
        errors.push(format!("budget.profile_size must be >= 1, got {p}"));
    }
    if b.targets.is_none() && b.num_targets == 0 {
        errors.push("budget.num_targets must be >= 1".into());
    }
    if let Some(d) = config.detector {
        if d.components == 0 {
            errors.push("detector.components must be >= 1".into());
        }
    }

    if config.attackers.is_empty() {
        errors.push("no attackers configured".into());
    }
    let attackers: Vec<NamedAttacker> = config
        .attackers
        .iter()
        .enumerate()
        .filter_map(|(k, t)| parse_attacker(k, t, &mut errors))
        .collect();
    for d in duplicates(attackers.iter().map(|a| a.name.as_str())) {
        errors.push(format!("attacker name `{d}` is used twice; set distinct `name`s"));
    }
    if config.victims.is_empty() {
        errors.push("no victims configured".into());
    }
    let victims: Vec<NamedVictim> = config
        .victims
        .iter()
        .enumerate()
        .filter_map(|(k, t)| parse_victim(k, t, &mut errors))
        .collect();
    for d in duplicates(victims.iter().map(|v| v.name.as_str())) {
        errors.push(format!("victim name `{d}` is used twice; set distinct `name`s"));
    }

    let ds = &config.dataset;
    let mut data = None;
    if ds.path.as_os_str().is_empty() {
        errors.push("dataset.path is required".into());
    } else if !ds.path.is_file() {
        errors.push(format!("dataset.path {} does not exist", ds.path.display()));
    } else {
        match load_split(ds, config.seed) {
            Ok(s) => data = Some(s),
            Err(e) => errors.push(format!("dataset: {e}")),
        }
    }

    let mut budget = None;
    if let Some(split) = &data {
        let train = &split.train;
        let targets = match &b.targets {
            Some(ids) if ids.is_empty() => {
                errors.push("budget.targets is empty".into());
                Vec::new()
            }
            Some(ids) => item_indices(train, ids, "targets", &mut errors),
            None => {
                let seed = b.target_seed.unwrap_or_else(|| derive_seed(config.seed, &["targets"]));
                pick_targets(train, b.num_targets, seed).unwrap_or_else(|e| {
                    errors.push(format!("budget: {e}"));
                    Vec::new()
                })
            }
        };
        for d in duplicates(targets.iter().map(|&t| train.item_id(t))) {
            errors.push(format!("budget.targets lists `{d}` twice"));
        }
        let selected = match &b.selected {
            Some(ids) => item_indices(train, ids, "selected", &mut errors),
            None => pick_selected(train, b.num_selected, SelectionStrategy::Popular, &targets),
        };
        for t in targets.iter().filter(|t| selected.contains(t)) {
            errors.push(format!("target `{}` is also a selected item", train.item_id(*t)));
        }
        let profile_size = match b.profile_size {
            Some(p) => p.max(1) as usize,
            None => dataset::stats(train)
                .map(|s| s.mean_ratings_per_user().round() as usize)
                .unwrap_or(1),
        };
        if errors.is_empty() {
            let attack_size = b.attack_size as usize;
            match AttackBudget::new(attack_size, profile_size, selected, targets, train.rating_max()) {
                Ok(bud) => budget = Some(bud),
                Err(e) => errors.push(format!("budget: {e}")),
            }
        }
    }

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let split = data.expect("no errors implies data");
    let label = ds.label.clone().unwrap_or_else(|| {
        let stem = ds.path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
        // MovieLens ships every variant as u.data; the folder is more telling
        match (stem, ds.path.parent().and_then(|p| p.file_name()).and_then(|s| s.to_str())) {
            ("u", Some(dir)) => dir.to_string(),
            _ => stem.to_string(),
        }
    });
    Ok(Experiment {
        seed: config.seed,
        parallelism: config.parallelism,
        output_dir: config.output_dir.clone(),
        k: config.k,
        dataset: label,
        train: split.train,
        test: split.test,
        budget: budget.expect("no errors implies a budget"),
        attackers,
        victims,
        detector: config.detector,
    })
}
