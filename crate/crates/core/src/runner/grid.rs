use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::Experiment;
use crate::error::{Error, Result};
use crate::evaluation::{baseline_hit_ratio, evaluate_cell, AttackCell, CellSeeds, ExperimentReport, Generated};
use crate::seed::derive_seed;

/// A cell (or the shared work it depended on) that did not complete.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellFailure {
    pub attacker: String,
    pub victim: String,
    pub target: String,
    pub error: String,
}

impl std::fmt::Display for CellFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} x {} x {}: {}", self.attacker, self.victim, self.target, self.error)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Completed cells in grid order (target, attacker, victim).
    pub reports: Vec<ExperimentReport>,
    pub failures: Vec<CellFailure>,
    pub output_dir: PathBuf,
}

impl RunOutcome {
    /// 0 when every cell completed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

pub fn attack_seed(exp: &Experiment, attacker: &str, target: &str) -> u64 {
    derive_seed(exp.seed, &["attack", &exp.dataset, attacker, target])
}

pub fn victim_seed(exp: &Experiment, victim: &str, target: &str) -> u64 {
    derive_seed(exp.seed, &["victim", &exp.dataset, victim, target])
}

/// File-name-safe version of a label.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_log(dir: &Path, name: &str, lines: &[String]) {
    let path = dir.join(format!("{}.log", slug(name)));
    if let Err(e) = fs::write(&path, lines.join("\n") + "\n") {
        log::warn!("could not write {}: {e}", path.display());
    }
}

#[derive(Serialize)]
struct Plan<'a> {
    dataset: &'a str,
    seed: u64,
    k: usize,
    train_users: usize,
    train_items: usize,
    train_ratings: usize,
    attack_size: usize,
    profile_size: usize,
    selected: Vec<&'a str>,
    targets: Vec<&'a str>,
    attackers: Vec<&'a str>,
    victims: Vec<&'a str>,
}

enum Job {
    Generate(usize, usize),
    Baseline(usize, usize),
}

enum JobResult {
    Generated(usize, usize, Result<(Generated, f64), String>),
    Baseline(usize, usize, Result<f64, String>),
}

/// Runs every attacker x victim x target cell and writes `report.csv`,
/// `losses.json`, `plan.json`, `fakes/` and `logs/` under the output
/// directory. Cell failures are collected, not raised; only I/O problems
/// with the output directory itself are errors.
///
/// Profiles are generated once per (attacker, target) and the clean
/// baseline fitted once per (victim, target), so the victim seed is shared
/// by the before and after fits and by every attacker.
pub fn run(exp: &Experiment) -> Result<RunOutcome> {
    let out = exp.output_dir.clone();
    let logs = out.join("logs");
    let fakes = out.join("fakes");
    fs::create_dir_all(&logs)?;
    fs::create_dir_all(&fakes)?;

    let train = &exp.train;
    let targets = &exp.budget.targets;
    let tid = |t: usize| train.item_id(t);
    let plan = Plan {
        dataset: &exp.dataset,
        seed: exp.seed,
        k: exp.k,
        train_users: train.num_users(),
        train_items: train.num_items(),
        train_ratings: train.num_ratings(),
        attack_size: exp.budget.attack_size,
        profile_size: exp.budget.profile_size,
        selected: exp.budget.selected.iter().map(|&i| tid(i)).collect(),
        targets: targets.iter().map(|&i| tid(i)).collect(),
        attackers: exp.attackers.iter().map(|a| a.name.as_str()).collect(),
        victims: exp.victims.iter().map(|v| v.name.as_str()).collect(),
    };
    fs::write(
        out.join("plan.json"),
        serde_json::to_string_pretty(&plan).map_err(|e| Error::Format(e.to_string()))?,
    )?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(exp.parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;

    let mut jobs = Vec::new();
    for t in 0..targets.len() {
        jobs.extend((0..exp.attackers.len()).map(|a| Job::Generate(a, t)));
        jobs.extend((0..exp.victims.len()).map(|v| Job::Baseline(v, t)));
    }
    log::info!(
        "{}: {} attackers x {} victims x {} targets on {} threads",
        exp.dataset,
        exp.attackers.len(),
        exp.victims.len(),
        targets.len(),
        pool.current_num_threads()
    );

    let shared: Vec<JobResult> = pool.install(|| {
        jobs.par_iter()
            .map(|job| match *job {
                Job::Generate(a, t) => {
                    let attacker = &exp.attackers[a];
                    let seed = attack_seed(exp, &attacker.name, tid(targets[t]));
                    let start = Instant::now();
                    let res = exp
                        .budget
                        .for_target(targets[t])
                        .and_then(|b| attacker.spec.generate(train, &b, seed))
                        .map(|g| (g, start.elapsed().as_secs_f64()))
                        .map_err(|e| e.to_string());
                    let mut lines = vec![format!("generate {} for target {} (seed {seed})", attacker.name, tid(targets[t]))];
                    match &res {
                        Ok((g, secs)) => {
                            lines.push(format!("{} fake profiles in {secs:.2}s", g.batch.len()));
                            for (name, curve) in &g.losses {
                                if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
                                    lines.push(format!("{name}: {} values, first {first:.6}, last {last:.6}", curve.len()));
                                }
                            }
                        }
                        Err(e) => lines.push(format!("failed: {e}")),
                    }
                    write_log(&logs, &format!("generate__{}__{}", attacker.name, tid(targets[t])), &lines);
                    JobResult::Generated(a, t, res)
                }
                Job::Baseline(v, t) => {
                    let victim = &exp.victims[v];
                    let seed = victim_seed(exp, &victim.name, tid(targets[t]));
                    let res = baseline_hit_ratio(train, &victim.spec, targets[t], exp.k, seed).map_err(|e| e.to_string());
                    JobResult::Baseline(v, t, res)
                }
            })
            .collect()
    });

    let mut generated = BTreeMap::new();
    let mut baselines = BTreeMap::new();
    for r in shared {
        match r {
            JobResult::Generated(a, t, res) => {
                generated.insert((a, t), res);
            }
            JobResult::Baseline(v, t, res) => {
                baselines.insert((v, t), res);
            }
        }
    }

    for ((a, t), res) in &generated {
        if let Ok((g, _)) = res {
            let path = fakes.join(format!("{}__{}.csv", slug(&exp.attackers[*a].name), slug(tid(targets[*t]))));
            g.batch.write_csv(BufWriter::new(fs::File::create(path)?), train.item_ids())?;
        }
    }

    let mut cells = Vec::new();
    for t in 0..targets.len() {
        for a in 0..exp.attackers.len() {
            for v in 0..exp.victims.len() {
                cells.push((a, v, t));
            }
        }
    }
    let results: Vec<std::result::Result<ExperimentReport, CellFailure>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, v, t)| {
                let (attacker, victim) = (&exp.attackers[a], &exp.victims[v]);
                let target = tid(targets[t]);
                let fail = |error: String| CellFailure {
                    attacker: attacker.name.clone(),
                    victim: victim.name.clone(),
                    target: target.to_string(),
                    error,
                };
                let seeds = CellSeeds {
                    attack: attack_seed(exp, &attacker.name, target),
                    victim: victim_seed(exp, &victim.name, target),
                };
                let mut lines = vec![format!(
                    "cell {} x {} x {target} (attack seed {}, victim seed {})",
                    attacker.name, victim.name, seeds.attack, seeds.victim
                )];
                let res = match (&generated[&(a, t)], &baselines[&(v, t)]) {
                    (Err(e), _) => Err(fail(format!("generation failed: {e}"))),
                    (_, Err(e)) => Err(fail(format!("clean fit failed: {e}"))),
                    (Ok((g, gen_secs)), Ok(before)) => {
                        exp.budget
                            .for_target(targets[t])
                            .map_err(|e| fail(e.to_string()))
                            .and_then(|budget| {
                                let cell = AttackCell {
                                    dataset: &exp.dataset,
                                    train,
                                    attacker: &attacker.spec,
                                    name: Some(&attacker.name),
                                    victim: &victim.spec,
                                    budget: &budget,
                                    k: exp.k,
                                    detector: exp.detector,
                                    seeds,
                                };
                                let mut report = evaluate_cell(&cell, g, Some(*before)).map_err(|e| fail(e.to_string()))?;
                                report.victim = victim.name.clone();
                                report.wall_clock_secs += gen_secs;
                                Ok(report)
                            })
                    }
                };
                match &res {
                    Ok(r) => {
                        lines.push(format!(
                            "hr@{} before {:.6} after {:.6} with {} fakes",
                            r.k, r.hr_before, r.hr_after, r.num_fakes
                        ));
                        if let (Some(p), Some(rc)) = (r.precision, r.recall) {
                            lines.push(format!("detector precision {p:.4} recall {rc:.4}"));
                        }
                    }
                    Err(f) => {
                        lines.push(format!("failed: {}", f.error));
                        log::error!("{f}");
                    }
                }
                write_log(&logs, &format!("{}__{}__{target}", attacker.name, victim.name), &lines);
                res
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(f) => failures.push(f),
        }
    }
    write_reports(&out.join("report.csv"), &reports)?;

    let mut losses: BTreeMap<&str, BTreeMap<&str, &BTreeMap<String, Vec<f64>>>> = BTreeMap::new();
    for ((a, t), res) in &generated {
        if let Ok((g, _)) = res {
            if !g.losses.is_empty() {
                losses
                    .entry(exp.attackers[*a].name.as_str())
                    .or_default()
                    .insert(tid(targets[*t]), &g.losses);
            }
        }
    }
    fs::write(
        out.join("losses.json"),
        serde_json::to_string_pretty(&losses).map_err(|e| Error::Format(e.to_string()))?,
    )?;

    let failure_path = out.join("failures.txt");
    if failures.is_empty() {
        if failure_path.exists() {
            fs::remove_file(&failure_path)?;
        }
    } else {
        fs::write(&failure_path, failures.iter().map(|f| format!("{f}\n")).collect::<String>())?;
    }
    Ok(RunOutcome {
        reports,
        failures,
        output_dir: out,
    })
}

pub fn write_reports(path: &Path, reports: &[ExperimentReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(fs::File::create(path)?));
    if reports.is_empty() {
        // serialize() writes the header lazily; keep the file self-describing
        w.write_record(REPORT_COLUMNS)?;
    }
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_COLUMNS: [&str; 15] = [
    "dataset",
    "attacker",
    "victim",
    "target",
    "target_index",
    "k",
    "hr_before",
    "hr_after",
    "num_fakes",
    "users_after",
    "precision",
    "recall",
    "attack_seed",
    "victim_seed",
    "wall_clock_secs",
];

pub fn read_reports(path: &Path) -> Result<Vec<ExperimentReport>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
