use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::grid::read_reports;
use crate::error::{Error, Result};
use crate::evaluation::ExperimentReport;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AttackerTally {
    pub best: usize,
    pub top2: usize,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// Distinct (dataset, victim, target) cells ranked.
    pub cells: usize,
    pub attackers: BTreeMap<String, AttackerTally>,
}

/// Ranks attackers by `hr_after` within every (dataset, victim, target)
/// cell and counts first places and top-two finishes. Ties share the
/// better rank, so a rank is one plus the number of strictly better
/// attackers. Rows without fake profiles (the control arm) are skipped.
pub fn summarize(reports: &[ExperimentReport]) -> Summary {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<&ExperimentReport>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.num_fakes > 0) {
        groups.entry((&r.dataset, &r.victim, &r.target)).or_default().push(r);
    }
    let mut attackers: BTreeMap<String, AttackerTally> = BTreeMap::new();
    for rows in groups.values() {
        for r in rows {
            let rank = 1 + rows.iter().filter(|o| o.hr_after > r.hr_after).count();
            let tally = attackers.entry(r.attacker.clone()).or_default();
            tally.cells += 1;
            tally.best += (rank == 1) as usize;
            tally.top2 += (rank <= 2) as usize;
        }
    }
    Summary {
        cells: groups.len(),
        attackers,
    }
}

/// Every `report.csv` below `dir`, sorted by path.
pub fn find_reports(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "report.csv") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let files = find_reports(dir)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("no report.csv under {}", dir.display())));
    }
    let mut reports = Vec::new();
    for f in files {
        reports.extend(read_reports(&f)?);
    }
    Ok(summarize(&reports))
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<20} {:>6} {:>6} {:>6}", "attacker", "best", "top2", "cells")?;
        for (name, t) in &self.attackers {
            writeln!(f, "{name:<20} {:>6} {:>6} {:>6}", t.best, t.top2, t.cells)?;
        }
        write!(f, "{} ranked cells", self.cells)
    }
}
