//! Generate Random, Average, Segment and Bandwagon profiles for one target
//! and show what a fake user looks like.
//!
//! cargo run --release --example heuristic_attacks -- data/ml-100k/u.data

use legup::attacks::{average_attack, bandwagon_attack, random_attack, segment_attack, FakeProfileBatch};
use legup::dataset::{filter, load_movielens, pick_selected, stats, AttackBudget, SelectionStrategy};

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let train = filter(&load_movielens(&path)?, 20)?;
    let st = stats(&train)?;
    let target = train.item_index("234").expect("item 234");
    let selected = pick_selected(&train, 3, SelectionStrategy::Popular, &[target]);
    let budget = AttackBudget::new(50, 90, selected, vec![target], 5)?;

    let batches: Vec<FakeProfileBatch> = vec![
        random_attack(&st, &budget, 1)?,
        average_attack(&st, &budget, 1)?,
        segment_attack(train.num_items(), &budget, 1)?,
        bandwagon_attack(&st, &budget, 1)?,
    ];
    for b in &batches {
        b.check_targets(&budget)?;
        let first: Vec<String> = b.rows[0]
            .iter()
            .take(8)
            .map(|&(i, r)| format!("{}:{r}", train.item_id(i)))
            .collect();
        let mean: f64 = b.rows.iter().flatten().map(|&(_, r)| r as f64).sum::<f64>() / b.rows.iter().map(Vec::len).sum::<usize>() as f64;
        println!(
            "{:<10} {} users, {} ratings each, mean {mean:.2}  [{} ...]",
            b.attacker,
            b.len(),
            b.rows[0].len(),
            first.join(" ")
        );
    }
    Ok(())
}
