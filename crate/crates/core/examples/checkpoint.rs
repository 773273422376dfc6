//! Train a small Leg-UP model, save it, load it back and check the restored
//! generator emits the same fake profiles.
//!
//! cargo run --release --example checkpoint -- data/ml-100k/u.data

use legup::dataset::{filter, load_movielens, pick_selected, AttackBudget, SelectionStrategy};
use legup::legup::{checkpoint, train, LegUpConfig};
use legup::surrogate::InnerLoopConfig;

fn main() -> legup::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/ml-100k/u.data".into());
    let real = filter(&load_movielens(&path)?, 20)?;
    let target = real.item_index("22").expect("item 22");
    let selected = pick_selected(&real, 3, SelectionStrategy::Popular, &[target]);
    let budget = AttackBudget::new(20, 90, selected, vec![target], 5)?;
    let config = LegUpConfig {
        epochs: 5,
        inner: InnerLoopConfig {
            pretrain_steps: 50,
            inner_steps: 0,
            unroll_lr: 0.01,
            ..InnerLoopConfig::default()
        },
        ..LegUpConfig::default()
    };
    let model = train(&real, &budget, &config, 9)?;

    let mut bytes = Vec::new();
    checkpoint::save(&mut bytes, &model.generator, model.discriminator.as_ref(), Some(&model.templates))?;
    println!("checkpoint: {} bytes", bytes.len());
    let restored = checkpoint::load(&mut bytes.as_slice())?;
    let templates = restored.templates.expect("templates were saved");
    let same = restored.generator.hard_ratings(&templates)? == model.generator.hard_ratings(&model.templates)?;
    println!("restored generator reproduces the profiles: {same}");
    Ok(())
}
