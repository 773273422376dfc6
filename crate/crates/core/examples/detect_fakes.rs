//! Inject Average-attack profiles into MovieLens 100K and see how many the
//! PCA detector flags.
//!
//! cargo run --release --example detect_fakes -- data/ml-100k/u.data

use legup::attacks::average_attack;
use legup::dataset::{filter, load_movielens, stats, AttackBudget};
use legup::evaluation::{detect, precision_recall};

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let real = filter(&load_movielens(&path)?, 20)?;
    let target = real.item_index("974").expect("item 974");
    let budget = AttackBudget::new(50, 90, vec![], vec![target], 5)?;
    let batch = average_attack(&stats(&real)?, &budget, 3)?;
    let poisoned = batch.inject(&real)?;

    let truth: Vec<usize> = (real.num_users()..poisoned.num_users()).collect();
    for components in [1, 3, 10] {
        let found = detect(&poisoned, truth.len(), components)?;
        let (p, r) = precision_recall(&found.flagged, &truth);
        println!("{components:>2} components: precision {p:.3} recall {r:.3}");
    }
    Ok(())
}
