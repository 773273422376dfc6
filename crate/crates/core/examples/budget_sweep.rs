//! HR@10 on SVD as the number of Average-attack fake users grows.
//!
//! cargo run --release --example budget_sweep -- data/ml-100k/u.data

use legup::dataset::{filter, load_movielens, split, AttackBudget};
use legup::evaluation::{baseline_hit_ratio, run_attack_cell, AttackCell, AttackerSpec, CellSeeds};
use legup::victims::{VictimKind, VictimSpec};

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let train = split(&filter(&load_movielens(&path)?, 20)?, 0.1, 7)?.train;
    let target = train.item_index("974").expect("item 974");
    let victim = VictimSpec::default_for(VictimKind::Svd);
    let seeds = CellSeeds { attack: 1, victim: 2 };
    let before = baseline_hit_ratio(&train, &victim, target, 10, seeds.victim)?;
    println!("{:>4} {:>8}", "A", "HR@10");
    println!("{:>4} {before:>8.4}", 0);
    for a in [10, 25, 50, 100] {
        let budget = AttackBudget::new(a, 90, vec![], vec![target], 5)?;
        let cell = AttackCell {
            dataset: "ml-100k",
            train: &train,
            attacker: &AttackerSpec::Average,
            name: None,
            victim: &victim,
            budget: &budget,
            k: 10,
            detector: None,
            seeds,
        };
        let (r, _) = run_attack_cell(&cell, Some(before))?;
        println!("{a:>4} {:>8.4}", r.hr_after);
    }
    Ok(())
}
