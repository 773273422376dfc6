//! Gradient of the promotion loss with respect to the fake ratings, taken
//! through one unrolled WRMF step, compared with finite differences.
//!
//! cargo run --release --example unrolled_gradient

use legup::surrogate::{RatingView, WrmfConfig, WrmfModel};
use ndarray::{array, Array2};

fn main() -> legup::Result<()> {
    // three real users, two fake users, four items; item 3 is the target
    let values = array![
        [5.0, 3.0, 0.0, 0.0],
        [4.0, 0.0, 4.0, 0.0],
        [0.0, 2.0, 5.0, 1.0],
        [3.0, 3.0, 3.0, 5.0],
        [2.0, 4.0, 1.0, 5.0],
    ];
    let observed = values.mapv(|v| (v > 0.0) as u8 as f64);
    let view = RatingView::new(values.clone(), observed.clone())?;
    let model = WrmfModel::new(
        5,
        4,
        WrmfConfig {
            dim: 2,
            init_std: 0.5,
            ..WrmfConfig::default()
        },
        3,
    )?;
    let (fakes, users, targets, lr) = (3..5, 0..3, [3usize], 0.05);

    let u = model.unrolled_attack_grad(&view, fakes.clone(), users.clone(), &targets, lr)?;
    println!("promotion loss {:.6}", u.loss);

    let h = 1e-6;
    let loss_at = |v: &Array2<f64>| -> legup::Result<f64> {
        let view = RatingView::new(v.clone(), observed.clone())?;
        Ok(model.unrolled_attack_grad(&view, fakes.clone(), users.clone(), &targets, lr)?.loss)
    };
    println!("{:>5} {:>5} {:>14} {:>14}", "fake", "item", "analytic", "numeric");
    for f in 0..2 {
        for i in 0..4 {
            let (mut up, mut down) = (values.clone(), values.clone());
            up[[3 + f, i]] += h;
            down[[3 + f, i]] -= h;
            let numeric = (loss_at(&up)? - loss_at(&down)?) / (2.0 * h);
            println!("{f:>5} {i:>5} {:>14.8} {numeric:>14.8}", u.grad[[f, i]]);
        }
    }
    Ok(())
}
