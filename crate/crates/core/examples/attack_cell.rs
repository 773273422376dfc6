//! One attack cell end to end: generate profiles, refit the victim on the
//! poisoned data, measure HR@10 and run the detector.
//!
//! cargo run --release --example attack_cell -- data/ml-100k/u.data bandwagon slopeone

use legup::dataset::{filter, load_movielens, pick_selected, split, AttackBudget, SelectionStrategy};
use legup::evaluation::{run_attack_cell, AttackCell, AttackerSpec, CellSeeds, DetectorConfig};
use legup::victims::{VictimKind, VictimSpec};
use legup::Error;

fn main() -> legup::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/ml-100k/u.data".into());
    let attacker = args.next().unwrap_or_else(|| "average".into());
    let victim = args.next().unwrap_or_else(|| "svd".into());
    let attacker = AttackerSpec::from_label(&attacker).ok_or_else(|| Error::InvalidArgument(format!("unknown attacker {attacker}")))?;
    let victim = VictimKind::from_label(&victim).ok_or_else(|| Error::InvalidArgument(format!("unknown victim {victim}")))?;

    let train = split(&filter(&load_movielens(&path)?, 20)?, 0.1, 7)?.train;
    let target = train.item_index("234").expect("item 234");
    let selected = pick_selected(&train, 3, SelectionStrategy::Popular, &[target]);
    let budget = AttackBudget::new(50, 90, selected, vec![target], 5)?;
    let victim = VictimSpec::default_for(victim);
    let cell = AttackCell {
        dataset: "ml-100k",
        train: &train,
        attacker: &attacker,
        name: None,
        victim: &victim,
        budget: &budget,
        k: 10,
        detector: Some(DetectorConfig::default()),
        seeds: CellSeeds { attack: 11, victim: 12 },
    };
    let (report, _) = run_attack_cell(&cell, None)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
