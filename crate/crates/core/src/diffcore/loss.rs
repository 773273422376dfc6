use ndarray::Array2;

use super::layers::{sigmoid, softmax_rows};
use crate::error::{Error, Result};

/// Probability clamp used by [`bce`].
pub const PROB_EPS: f64 = 1e-7;

fn same_shape(a: &Array2<f64>, b: &Array2<f64>, what: &str) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(Error::shape(format!("{what}: {:?} vs {:?}", a.dim(), b.dim())))
    }
}

/// Mean squared error over all entries, with its gradient w.r.t. `pred`.
pub fn mse(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    same_shape(pred, target, "mse")?;
    let n = pred.len().max(1) as f64;
    let diff = pred - target;
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((value, diff * (2.0 / n)))
}

/// Sum of squared errors over entries where `mask != 0`.
pub fn masked_sse(pred: &Array2<f64>, target: &Array2<f64>, mask: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    same_shape(pred, target, "masked_sse")?;
    same_shape(pred, mask, "masked_sse mask")?;
    let mut grad = pred - target;
    grad *= mask;
    let value = grad.iter().map(|d| d * d).sum::<f64>();
    grad *= 2.0;
    Ok((value, grad))
}

/// Binary cross-entropy `-(y ln p + (1-y) ln(1-p))` with `p` clamped to
/// `[PROB_EPS, 1-PROB_EPS]`; returns the value and `d/dp`.
pub fn bce(prob: f64, label: f64) -> (f64, f64) {
    let p = prob.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let value = -(label * p.ln() + (1.0 - label) * (1.0 - p).ln());
    let grad = -(label / p) + (1.0 - label) / (1.0 - p);
    (value, grad)
}

/// `ln sigmoid(z)` computed without overflow.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// BCE on a logit; returns the value and `d/dz`.
pub fn bce_with_logit(z: f64, label: f64) -> (f64, f64) {
    let value = -(label * log_sigmoid(z) + (1.0 - label) * log_sigmoid(-z));
    (value, sigmoid(z) - label)
}

/// `-sum_rows sum_t ln softmax(row)_t` for every target column `t`, with the
/// gradient w.r.t. `scores`.
pub fn softmax_nll(scores: &Array2<f64>, targets: &[usize]) -> Result<(f64, Array2<f64>)> {
    if let Some(&t) = targets.iter().find(|&&t| t >= scores.ncols()) {
        return Err(Error::shape(format!("target {t} outside {} columns", scores.ncols())));
    }
    let probs = softmax_rows(scores);
    let mut value = 0.0;
    for (row, prob) in scores.rows().into_iter().zip(probs.rows()) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for &t in targets {
            value += lse - row[t];
        }
        debug_assert!(prob.iter().all(|p| p.is_finite()));
    }
    let mut grad = probs * targets.len() as f64;
    for mut row in grad.rows_mut() {
        for &t in targets {
            row[t] -= 1.0;
        }
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::f64::consts::LN_2;

    #[test]
    fn mse_zero_at_target() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        let (v, g) = mse(&x, &x).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&d| d == 0.0));
        assert!(mse(&x, &array![[1.0]]).is_err());
    }

    #[test]
    fn bce_half() {
        let (v, _) = bce(0.5, 1.0);
        assert!((v - LN_2).abs() < 1e-12);
        let (v0, _) = bce(0.0, 1.0);
        assert!(v0.is_finite());
        let (vl, gl) = bce_with_logit(0.0, 1.0);
        assert!((vl - LN_2).abs() < 1e-12);
        assert!((gl + 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_nll_uniform() {
        let (v, g) = softmax_nll(&array![[0.0, 0.0]], &[0]).unwrap();
        assert!((v - LN_2).abs() < 1e-15);
        assert_eq!(g, array![[-0.5, 0.5]]);
        assert!(softmax_nll(&array![[0.0, 0.0]], &[2]).is_err());
    }

    #[test]
    fn masked_sse_ignores_unmasked() {
        let p = array![[1.0, 5.0]];
        let t = array![[3.0, 0.0]];
        let m = array![[1.0, 0.0]];
        let (v, g) = masked_sse(&p, &t, &m).unwrap();
        assert_eq!(v, 4.0);
        assert_eq!(g, array![[-4.0, 0.0]]);
    }
}
