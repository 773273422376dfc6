use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use legup::dataset::{load_auto, stats, RatingMatrix};
use legup::evaluation::{detect, export_projection, precision_recall};
use legup::runner::{self, ExperimentConfig};
use legup::Error;

/// Shilling-attack experiments on rating data.
#[derive(Parser)]
#[command(name = "legup", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an experiment file and print the resolved grid.
    Validate { config: PathBuf },
    /// Run every attacker x victim x target cell of an experiment file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the file.
        #[arg(long, env = "LEGUP_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        /// Overrides `parallelism` from the file.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Count best and top-2 finishes over every report.csv below a directory.
    Summarize {
        dir: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Flag the m most suspicious users of a rating file.
    Detect {
        matrix: PathBuf,
        /// Users to flag.
        #[arg(short, long)]
        m: usize,
        /// Principal components.
        #[arg(short, long, default_value_t = 3)]
        k: usize,
        /// Fake profiles to append before detecting.
        #[arg(long)]
        inject: Option<PathBuf>,
    },
    /// Write 2-D PCA coordinates of every user as CSV.
    Project {
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        inject: Option<PathBuf>,
    },
}

fn load(matrix: &Path, inject: Option<&Path>) -> legup::Result<RatingMatrix> {
    for p in std::iter::once(matrix).chain(inject) {
        if !p.is_file() {
            return Err(Error::InvalidArgument(format!("{} does not exist", p.display())));
        }
    }
    let m = load_auto(matrix)?;
    match inject {
        Some(p) => m.with_users_of(&load_auto(p)?),
        None => Ok(m),
    }
}

fn is_fake(m: &RatingMatrix) -> Vec<bool> {
    m.user_ids().iter().map(|id| id.starts_with("fake-")).collect()
}

fn validated(path: &Path) -> Result<runner::Experiment, Error> {
    runner::validate(&ExperimentConfig::load(path)?)
}

fn execute(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Validate { config } => {
            let e = validated(&config)?;
            let s = stats(&e.train)?;
            println!(
                "dataset   {} (train: {} users, {} items, {} ratings)",
                e.dataset, s.num_users, s.num_items, s.num_ratings
            );
            println!(
                "budget    A={} P={} selected={:?}",
                e.budget.attack_size,
                e.budget.profile_size,
                ids(&e.train, &e.budget.selected)
            );
            println!("targets   {:?}", ids(&e.train, &e.budget.targets));
            println!("attackers {:?}", e.attackers.iter().map(|a| &a.name).collect::<Vec<_>>());
            println!("victims   {:?}", e.victims.iter().map(|v| &v.name).collect::<Vec<_>>());
            println!("cells     {}", e.attackers.len() * e.victims.len() * e.budget.targets.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            output_dir,
            parallelism,
        } => {
            let mut e = validated(&config)?;
            if let Some(dir) = output_dir {
                e.output_dir = dir;
            }
            if let Some(p) = parallelism {
                e.parallelism = p;
            }
            let outcome = runner::run(&e)?;
            println!(
                "{} cells written to {}",
                outcome.reports.len(),
                outcome.output_dir.join("report.csv").display()
            );
            for f in &outcome.failures {
                eprintln!("failed: {f}");
            }
            Ok(ExitCode::from(outcome.exit_code() as u8))
        }
        Command::Summarize { dir, json } => {
            let s = runner::summarize_dir(&dir)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&s).map_err(|e| Error::Format(e.to_string()))?);
            } else {
                println!("{s}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Detect { matrix, m, k, inject } => {
            let mat = load(&matrix, inject.as_deref())?;
            let found = detect(&mat, m, k)?;
            for &u in &found.flagged {
                println!("{}", mat.user_id(u));
            }
            let fake = is_fake(&mat);
            let truth: Vec<usize> = (0..mat.num_users()).filter(|&u| fake[u]).collect();
            if !truth.is_empty() {
                let (p, r) = precision_recall(&found.flagged, &truth);
                eprintln!(
                    "precision {p:.4} recall {r:.4} over {} fake users ({} components)",
                    truth.len(),
                    found.components
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Project { matrix, out, inject } => {
            let mat = load(&matrix, inject.as_deref())?;
            let file = std::io::BufWriter::new(std::fs::File::create(&out)?);
            export_projection(&mat, &is_fake(&mat), file)?;
            println!("{} users projected to {}", mat.num_users(), out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn ids<'a>(m: &'a RatingMatrix, items: &[usize]) -> Vec<&'a str> {
    items.iter().map(|&i| m.item_id(i)).collect()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
