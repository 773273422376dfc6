//! Config-driven experiment grids: a TOML file names the data, budget,
//! attackers, victims and detector; [`validate`] resolves it against the
//! data, [`run`] executes every attacker x victim x target cell and
//! [`summarize`] counts best and top-two finishes per attacker.
//!
//! ```toml
//! seed = 7
//! output_dir = "out/ml100k"
//!
//! [dataset]
//! path = "data/ml-100k/u.data"
//!
//! [budget]
//! attack_size = 50
//! num_targets = 5
//!
//! [[attackers]]
//! kind = "average"
//!
//! [[attackers]]
//! kind = "legup"
//! epochs = 40
//!
//! [[victims]]
//! kind = "svd"
//! ```

mod config;
mod grid;
mod summary;

pub use config::{validate, BudgetSection, DataFormat, DatasetSection, Experiment, ExperimentConfig, ItemId, NamedAttacker, NamedVictim};
pub use grid::{attack_seed, read_reports, run, victim_seed, write_reports, CellFailure, RunOutcome, REPORT_COLUMNS};
pub use summary::{find_reports, summarize, summarize_dir, AttackerTally, Summary};
