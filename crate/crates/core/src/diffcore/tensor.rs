use ndarray::Array2;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::seed::Rng;

/// A 2-D array of values with an optional same-shape gradient accumulator.
///
/// Vectors are stored as `1 x n` rows. Backward passes add into `grad`; the
/// caller zeroes it between optimizer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub value: Array2<f64>,
    pub grad: Option<Array2<f64>>,
}

impl Tensor {
    /// A constant (no gradient slot).
    pub fn constant(value: Array2<f64>) -> Self {
        Self { value, grad: None }
    }

    /// A trainable parameter with a zeroed gradient slot.
    pub fn param(value: Array2<f64>) -> Self {
        let grad = Some(Array2::zeros(value.raw_dim()));
        Self { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::param(Array2::zeros((rows, cols)))
    }

    /// Glorot-uniform initialised `fan_in x fan_out` parameter.
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        Self::param(Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng)))
    }

    pub fn normal(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Self {
        let dist = Normal::new(0.0, std).expect("non-negative std");
        Self::param(Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng)))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn zero_grad(&mut self) {
        match &mut self.grad {
            Some(g) => g.fill(0.0),
            None => self.grad = Some(Array2::zeros(self.value.raw_dim())),
        }
    }

    /// Adds `delta` into the gradient slot, creating it if needed.
    pub fn accumulate(&mut self, delta: &Array2<f64>) -> Result<()> {
        if delta.dim() != self.value.dim() {
            return Err(Error::shape(format!(
                "gradient {:?} for tensor {:?}",
                delta.dim(),
                self.value.dim()
            )));
        }
        match &mut self.grad {
            Some(g) => *g += delta,
            None => self.grad = Some(delta.clone()),
        }
        Ok(())
    }

    pub fn grad_or_zeros(&self) -> Array2<f64> {
        self.grad.clone().unwrap_or_else(|| Array2::zeros(self.value.raw_dim()))
    }

    pub fn check_finite(&self, name: &str) -> Result<()> {
        check_finite(&self.value, name)?;
        if let Some(g) = &self.grad {
            check_finite(g, &format!("{name}.grad"))?;
        }
        Ok(())
    }
}

pub fn check_finite(a: &Array2<f64>, name: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}
