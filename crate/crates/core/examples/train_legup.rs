//! Train Leg-UP against one target on MovieLens 100K and measure the
//! HR@10 lift on an SVD victim.
//!
//! cargo run --release --example train_legup -- data/ml-100k/u.data

use legup::dataset::{filter, load_movielens, pick_selected, split, AttackBudget, SelectionStrategy};
use legup::evaluation::{run_attack_cell, AttackCell, AttackerSpec, CellSeeds};
use legup::legup::LegUpConfig;
use legup::surrogate::InnerLoopConfig;
use legup::victims::{VictimKind, VictimSpec};

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let train = split(&filter(&load_movielens(&path)?, 20)?, 0.1, 7)?.train;
    let target = train.item_index("22").expect("item 22");
    let selected = pick_selected(&train, 3, SelectionStrategy::Popular, &[target]);
    let budget = AttackBudget::new(50, 90, selected, vec![target], 5)?;

    // one unrolled step on a pretrained surrogate
    let config = LegUpConfig {
        epochs: 40,
        inner: InnerLoopConfig {
            pretrain_steps: 200,
            inner_steps: 0,
            unroll_lr: 0.01,
            ..InnerLoopConfig::default()
        },
        ..LegUpConfig::default()
    };
    let attacker = AttackerSpec::LegUp(config);
    let victim = VictimSpec::default_for(VictimKind::Svd);
    let cell = AttackCell {
        dataset: "ml-100k",
        train: &train,
        attacker: &attacker,
        name: None,
        victim: &victim,
        budget: &budget,
        k: 10,
        detector: None,
        seeds: CellSeeds { attack: 1, victim: 2 },
    };
    let (report, generated) = run_attack_cell(&cell, None)?;
    for (name, curve) in &generated.losses {
        let step = (curve.len() / 8).max(1);
        let shown: Vec<String> = curve.iter().step_by(step).map(|v| format!("{v:.1}")).collect();
        println!("{name:<14} {}", shown.join(" "));
    }
    println!(
        "HR@10 {:.4} -> {:.4} with {} fakes in {:.1}s",
        report.hr_before, report.hr_after, report.num_fakes, report.wall_clock_secs
    );
    Ok(())
}
