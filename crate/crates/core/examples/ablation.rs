//! Leg-UP ablations on one target: simple vs autoencoder learner, rounding
//! vs learnable discretization, and no discriminator.
//!
//! cargo run --release --example ablation -- data/ml-100k/u.data

use legup::dataset::{filter, load_movielens, pick_selected, split, AttackBudget, SelectionStrategy};
use legup::evaluation::{baseline_hit_ratio, run_attack_cell, AttackCell, AttackerSpec, CellSeeds};
use legup::legup::{Discretization, LegUpConfig, PreferenceLearner};
use legup::surrogate::InnerLoopConfig;
use legup::victims::{VictimKind, VictimSpec};

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let train = split(&filter(&load_movielens(&path)?, 20)?, 0.1, 7)?.train;
    let target = train.item_index("22").expect("item 22");
    let selected = pick_selected(&train, 3, SelectionStrategy::Popular, &[target]);
    let budget = AttackBudget::new(50, 90, selected, vec![target], 5)?;
    let victim = VictimSpec::default_for(VictimKind::Svd);
    let seeds = CellSeeds { attack: 5, victim: 6 };

    let full = LegUpConfig {
        epochs: 30,
        inner: InnerLoopConfig {
            pretrain_steps: 200,
            inner_steps: 0,
            unroll_lr: 0.01,
            ..InnerLoopConfig::default()
        },
        ..LegUpConfig::default()
    };
    let variants = [
        ("full", full.clone()),
        (
            "simple learner",
            LegUpConfig {
                learner: PreferenceLearner::Simple,
                ..full.clone()
            },
        ),
        (
            "rounding",
            LegUpConfig {
                discretization: Discretization::Rounding,
                ..full.clone()
            },
        ),
        (
            "no discriminator",
            LegUpConfig {
                use_discriminator: false,
                ..full.clone()
            },
        ),
    ];
    let before = baseline_hit_ratio(&train, &victim, target, 10, seeds.victim)?;
    println!("clean HR@10 {before:.4}");
    for (name, config) in variants {
        let attacker = AttackerSpec::LegUp(config);
        let cell = AttackCell {
            dataset: "ml-100k",
            train: &train,
            attacker: &attacker,
            name: Some(name),
            victim: &victim,
            budget: &budget,
            k: 10,
            detector: None,
            seeds,
        };
        let (r, _) = run_attack_cell(&cell, Some(before))?;
        println!("{name:<18} HR@10 {:.4}  ({:.1}s)", r.hr_after, r.wall_clock_secs);
    }
    Ok(())
}
