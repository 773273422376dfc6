//! Promote a target to the users who love the selected items: the Segment
//! heuristic against Leg-UP trained on in-segment users only, with HR@10
//! measured on that segment.
//!
//! cargo run --release --example in_segment -- data/ml-100k/u.data

use legup::attacks::segment_attack;
use legup::dataset::{filter, load_movielens, pick_selected, split, AttackBudget, RatingMatrix, SelectionStrategy};
use legup::evaluation::in_top_k;
use legup::legup::losses::in_segment_users;
use legup::legup::{legup_attack, LegUpConfig};
use legup::surrogate::InnerLoopConfig;
use legup::victims::{fit, VictimKind, VictimSpec};

/// HR@k over `users` that have not rated the target.
fn segment_hr(poisoned: &RatingMatrix, train: &RatingMatrix, users: &[usize], target: usize) -> legup::Result<f64> {
    let model = fit(&VictimSpec::default_for(VictimKind::Svd), poisoned, 2)?;
    let users: Vec<usize> = users.iter().copied().filter(|&u| train.get(u, target).is_none()).collect();
    let mut hits = 0;
    for &u in &users {
        let mut excluded = vec![false; train.num_items()];
        for &(i, _) in train.user_row(u) {
            excluded[i] = true;
        }
        hits += in_top_k(&model.score_user(u)?, target, 10, &excluded) as usize;
    }
    Ok(hits as f64 / users.len() as f64)
}

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let train = split(&filter(&load_movielens(&path)?, 20)?, 0.1, 7)?.train;
    let target = train.item_index("234").expect("item 234");
    let selected = pick_selected(&train, 3, SelectionStrategy::Popular, &[target]);
    let segment = in_segment_users(&train, &selected)?;
    println!("{} in-segment users", segment.len());
    let budget = AttackBudget::new(50, 90, selected, vec![target], 5)?;

    println!("clean     {:.4}", segment_hr(&train, &train, &segment, target)?);
    let heuristic = segment_attack(train.num_items(), &budget, 1)?;
    println!("segment   {:.4}", segment_hr(&heuristic.inject(&train)?, &train, &segment, target)?);
    let config = LegUpConfig {
        in_segment: true,
        epochs: 30,
        inner: InnerLoopConfig {
            pretrain_steps: 200,
            inner_steps: 0,
            unroll_lr: 0.01,
            ..InnerLoopConfig::default()
        },
        ..LegUpConfig::default()
    };
    let learned = legup_attack(&train, &budget, &config, 1)?.batch;
    println!("leg-up    {:.4}", segment_hr(&learned.inject(&train)?, &train, &segment, target)?);
    Ok(())
}
