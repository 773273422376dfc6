use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First-order optimizer over an ordered list of tensors.
///
/// Adam keeps one moment pair per slot, so the same tensors must be passed in
/// the same order on every step.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    moments: Vec<(Array2<f64>, Array2<f64>)>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be > 0, got {learning_rate}")));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = kind {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return Err(Error::invalid(format!(
                    "Adam needs 0 <= beta1, beta2 < 1 and eps > 0 (got {beta1}, {beta2}, {eps})"
                )));
            }
        }
        Ok(Self {
            kind,
            learning_rate,
            moments: Vec::new(),
            steps: 0,
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), learning_rate)
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one update from each tensor's accumulated gradient. Gradients
    /// are left in place; the caller zeroes them.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        let grads: Vec<Array2<f64>> = params.iter().map(|p| p.grad_or_zeros()).collect();
        let mut values: Vec<&mut Array2<f64>> = params.iter_mut().map(|p| &mut p.value).collect();
        self.step_arrays(&mut values, &grads)
    }

    /// Same as [`step`](Self::step) for bare arrays with explicit gradients.
    pub fn step_arrays(&mut self, values: &mut [&mut Array2<f64>], grads: &[Array2<f64>]) -> Result<()> {
        if values.len() != grads.len() {
            return Err(Error::shape(format!("{} params, {} grads", values.len(), grads.len())));
        }
        for (k, (v, g)) in values.iter().zip(grads).enumerate() {
            if v.dim() != g.dim() {
                return Err(Error::shape(format!("param {k}: {:?} vs grad {:?}", v.dim(), g.dim())));
            }
        }
        self.steps += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (v, g) in values.iter_mut().zip(grads) {
                    v.scaled_add(-lr, g);
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                if self.moments.is_empty() {
                    self.moments = grads
                        .iter()
                        .map(|g| (Array2::zeros(g.raw_dim()), Array2::zeros(g.raw_dim())))
                        .collect();
                } else if self.moments.len() != grads.len() {
                    return Err(Error::shape("Adam called with a different parameter list".to_string()));
                }
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((v, g), (m, s)) in values.iter_mut().zip(grads).zip(&mut self.moments) {
                    ndarray::Zip::from(&mut **v).and(g).and(m).and(s).for_each(|v, &g, m, s| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *s = beta2 * *s + (1.0 - beta2) * g * g;
                        let m_hat = *m / c1;
                        let s_hat = *s / c2;
                        *v -= lr * m_hat / (s_hat.sqrt() + eps);
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Optimizer::sgd(0.0).is_err());
        assert!(Optimizer::new(
            OptimizerKind::Adam {
                beta1: 1.0,
                beta2: 0.9,
                eps: 1e-8
            },
            0.1
        )
        .is_err());
    }

    #[test]
    fn sgd_step() {
        let mut t = Tensor::param(array![[1.0, 2.0]]);
        t.accumulate(&array![[0.5, -1.0]]).unwrap();
        Optimizer::sgd(0.1).unwrap().step(&mut [&mut t]).unwrap();
        assert_eq!(t.value, array![[0.95, 2.1]]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut t = Tensor::param(array![[0.0]]);
        t.accumulate(&array![[3.0]]).unwrap();
        Optimizer::adam(0.01).unwrap().step(&mut [&mut t]).unwrap();
        assert!((t.value[[0, 0]] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn adam_bit_reproducible() {
        let run = || {
            let mut t = Tensor::param(array![[0.3, -0.7]]);
            let mut opt = Optimizer::adam(0.05).unwrap();
            for k in 0..50 {
                t.zero_grad();
                let g = array![[(k as f64).sin(), 0.1 * k as f64]];
                t.accumulate(&g).unwrap();
                opt.step(&mut [&mut t]).unwrap();
            }
            t.value.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
