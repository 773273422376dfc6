//! Load MovieLens 100K, filter, split and print the summary statistics.
//!
//! cargo run --release --example dataset_stats -- data/ml-100k/u.data

use legup::dataset::{filter, load_movielens, pick_targets, split, stats};

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let full = filter(&load_movielens(&path)?, 20)?;
    let s = stats(&full)?;
    println!("users {} items {} ratings {}", s.num_users, s.num_items, s.num_ratings);
    println!(
        "sparsity {:.2}%  mean ratings per user {:.1}",
        s.sparsity_percent(),
        s.mean_ratings_per_user()
    );

    let parts = split(&full, 0.1, 7)?;
    println!(
        "train {} ratings, test {} ratings",
        parts.train.num_ratings(),
        parts.test.num_ratings()
    );
    let targets = pick_targets(&parts.train, 5, 42)?;
    let counts = parts.train.item_counts();
    for t in targets {
        println!("target {:>5}  {} ratings", parts.train.item_id(t), counts[t]);
    }
    Ok(())
}
