use ndarray::Array2;

use crate::error::{Error, Result};

/// Compares an analytic gradient against central finite differences.
///
/// `f` returns `(value, gradient)` at a point. Every coordinate is perturbed by
/// `±step`; the result is the maximum of `|a - n| / max(1, |a|, |n|)`.
pub fn grad_check<F>(mut f: F, point: &Array2<f64>, step: f64) -> Result<f64>
where
    F: FnMut(&Array2<f64>) -> Result<(f64, Array2<f64>)>,
{
    if !(step > 0.0) {
        return Err(Error::invalid(format!("finite-difference step must be > 0, got {step}")));
    }
    let (value, analytic) = f(point)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("grad_check function value".into()));
    }
    if analytic.dim() != point.dim() {
        return Err(Error::shape(format!("gradient {:?} for point {:?}", analytic.dim(), point.dim())));
    }
    let mut probe = point.clone();
    let mut worst = 0.0f64;
    for idx in ndarray::indices(point.dim()) {
        let x0 = probe[idx];
        probe[idx] = x0 + step;
        let (up, _) = f(&probe)?;
        probe[idx] = x0 - step;
        let (down, _) = f(&probe)?;
        probe[idx] = x0;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("grad_check function value at {idx:?}")));
        }
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[idx];
        let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::{loss, Activation, Dense};
    use crate::seed;
    use ndarray::array;

    #[test]
    fn square() {
        let err = grad_check(|x| Ok((x[[0, 0]].powi(2), x.mapv(|v| 2.0 * v))), &array![[3.0]], 1e-5).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn relu_away_from_kink() {
        let err = grad_check(
            |x| {
                let v = x[[0, 0]];
                Ok((v.max(0.0), array![[if v > 0.0 { 1.0 } else { 0.0 }]]))
            },
            &array![[0.5]],
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn dense_tanh_mse_composite() {
        let mut rng = seed::rng(11);
        let mut layer = Dense::new(4, 3, &mut rng);
        let x = crate::diffcore::Tensor::normal(5, 4, 1.0, &mut rng).value;
        let target = crate::diffcore::Tensor::normal(5, 3, 0.5, &mut rng).value;
        let w0 = layer.weight.value.clone();
        let err = grad_check(
            |w| {
                layer.weight.value = w.clone();
                layer.weight.zero_grad();
                layer.bias.zero_grad();
                let z = layer.forward(&x)?;
                let y = Activation::Tanh.forward(&z);
                let (v, dy) = loss::mse(&y, &target)?;
                let dz = Activation::Tanh.backward(&y, &dy);
                layer.backward(&dz)?;
                Ok((v, layer.weight.grad_or_zeros()))
            },
            &w0,
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn non_finite_value_errors() {
        let r = grad_check(|x| Ok((f64::NAN, x.clone())), &array![[1.0]], 1e-5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert!(grad_check(|x| Ok((0.0, x.clone())), &array![[1.0]], 0.0).is_err());
    }
}
