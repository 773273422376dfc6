//! Fit every victim recommender on MovieLens 100K, report test RMSE and the
//! clean HR@10 of three target items.
//!
//! cargo run --release --example victim_zoo -- data/ml-100k/u.data

use std::time::Instant;

use legup::dataset::{filter, load_movielens, split};
use legup::evaluation::hit_ratio;
use legup::victims::{fit, VictimKind, VictimSpec};

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let parts = split(&filter(&load_movielens(&path)?, 20)?, 0.1, 7)?;
    let targets: Vec<usize> = ["22", "234", "974"]
        .iter()
        .map(|id| parts.train.item_index(id).expect("target id"))
        .collect();
    for kind in VictimKind::ALL {
        let start = Instant::now();
        let model = fit(&VictimSpec::default_for(kind), &parts.train, 1)?;
        let mut se = 0.0;
        for r in parts.test.entries() {
            // both halves share the id universe, so indices line up
            let p = model.predict(r.user, r.item)?.clamp(1.0, 5.0);
            se += (p - r.value as f64).powi(2);
        }
        let rmse = (se / parts.test.num_ratings() as f64).sqrt();
        let hrs: Vec<String> = targets
            .iter()
            .map(|&t| hit_ratio(&model, &parts.train, t, 10).map(|h| format!("{h:.4}")))
            .collect::<legup::Result<_>>()?;
        println!(
            "{:<10} rmse {rmse:.4}  HR@10 {}  ({:.1}s)",
            kind.label(),
            hrs.join(" "),
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
