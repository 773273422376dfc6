use ndarray::{Array2, Axis};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::seed::Rng;

/// `input (batch x in) . weight (in x out) + bias (1 x out)`.
pub fn dense_forward(input: &Array2<f64>, weight: &Array2<f64>, bias: &Array2<f64>) -> Result<Array2<f64>> {
    if input.ncols() != weight.nrows() {
        return Err(Error::shape(format!(
            "dense input {:?} against weight {:?}",
            input.dim(),
            weight.dim()
        )));
    }
    if bias.dim() != (1, weight.ncols()) {
        return Err(Error::shape(format!(
            "dense bias {:?} against weight {:?}",
            bias.dim(),
            weight.dim()
        )));
    }
    Ok(input.dot(weight) + bias)
}

/// Returns `(d_input, d_weight, d_bias)` for an upstream gradient `dout`.
pub fn dense_backward(input: &Array2<f64>, weight: &Array2<f64>, dout: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let d_input = dout.dot(&weight.t());
    let d_weight = input.t().dot(dout);
    let d_bias = dout.sum_axis(Axis(0)).insert_axis(Axis(0));
    (d_input, d_weight, d_bias)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn forward(self, x: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => x.clone(),
            Activation::Relu => x.mapv(relu),
            Activation::Tanh => x.mapv(f64::tanh),
            Activation::Sigmoid => x.mapv(sigmoid),
        }
    }

    /// Backward pass expressed through the forward *output*. ReLU's
    /// subgradient at 0 is 0.
    pub fn backward(self, output: &Array2<f64>, dout: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => dout.clone(),
            Activation::Relu => {
                let mut d = dout.clone();
                d.zip_mut_with(output, |g, &y| {
                    if y <= 0.0 {
                        *g = 0.0
                    }
                });
                d
            }
            Activation::Tanh => {
                let mut d = dout.clone();
                d.zip_mut_with(output, |g, &y| *g *= 1.0 - y * y);
                d
            }
            Activation::Sigmoid => {
                let mut d = dout.clone();
                d.zip_mut_with(output, |g, &y| *g *= y * (1.0 - y));
                d
            }
        }
    }
}

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with the row max subtracted first.
pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Affine layer with cached input for backward.
#[derive(Debug, Clone)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    input: Option<Array2<f64>>,
}

impl Dense {
    pub fn new(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Self {
        Self {
            weight: Tensor::glorot(fan_in, fan_out, rng),
            bias: Tensor::zeros(1, fan_out),
            input: None,
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Self {
        Self { weight, bias, input: None }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&mut self, input: &Array2<f64>) -> Result<Array2<f64>> {
        let out = dense_forward(input, &self.weight.value, &self.bias.value)?;
        self.input = Some(input.clone());
        Ok(out)
    }

    /// Forward without caching; for inference.
    pub fn apply(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        dense_forward(input, &self.weight.value, &self.bias.value)
    }

    pub fn backward(&mut self, dout: &Array2<f64>) -> Result<Array2<f64>> {
        let input = self
            .input
            .as_ref()
            .ok_or_else(|| Error::invalid("dense backward called before forward"))?;
        let (d_input, d_weight, d_bias) = dense_backward(input, &self.weight.value, dout);
        self.weight.accumulate(&d_weight)?;
        self.bias.accumulate(&d_bias)?;
        Ok(d_input)
    }
}

/// A stack of dense layers, each followed by an activation.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activations: Vec<Activation>,
    outputs: Vec<Array2<f64>>,
}

impl Mlp {
    /// `widths = [in, h1, ..., out]`, one activation per layer.
    pub fn new(widths: &[usize], activations: &[Activation], rng: &mut Rng) -> Self {
        assert_eq!(widths.len(), activations.len() + 1, "one activation per layer");
        let layers = widths.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Self {
            layers,
            activations: activations.to_vec(),
            outputs: Vec::new(),
        }
    }

    pub fn from_layers(layers: Vec<Dense>, activations: Vec<Activation>) -> Result<Self> {
        if layers.len() != activations.len() || layers.windows(2).any(|w| w[0].fan_out() != w[1].fan_in()) {
            return Err(Error::shape("layers do not chain".to_string()));
        }
        Ok(Self {
            layers,
            activations,
            outputs: Vec::new(),
        })
    }

    pub fn forward(&mut self, input: &Array2<f64>) -> Result<Array2<f64>> {
        self.outputs.clear();
        let mut x = input.clone();
        for (layer, act) in self.layers.iter_mut().zip(&self.activations) {
            x = act.forward(&layer.forward(&x)?);
            self.outputs.push(x.clone());
        }
        Ok(x)
    }

    pub fn apply(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        let mut x = input.clone();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            x = act.forward(&layer.apply(&x)?);
        }
        Ok(x)
    }

    /// Backpropagates `dout` (w.r.t. the final activation output), returning
    /// the gradient w.r.t. the input.
    pub fn backward(&mut self, dout: &Array2<f64>) -> Result<Array2<f64>> {
        if self.outputs.len() != self.layers.len() {
            return Err(Error::invalid("mlp backward called before forward"));
        }
        let mut g = dout.clone();
        for k in (0..self.layers.len()).rev() {
            g = self.activations[k].backward(&self.outputs[k], &g);
            g = self.layers[k].backward(&g)?;
        }
        Ok(g)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias]).collect()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.layers.iter().map(|l| l.weight.value.iter().map(|w| w * w).sum::<f64>()).sum()
    }

    /// Adds `scale * 2 * W` into each weight gradient (the L2 penalty's gradient).
    pub fn add_weight_decay(&mut self, scale: f64) -> Result<()> {
        for l in &mut self.layers {
            let d = &l.weight.value * (2.0 * scale);
            l.weight.accumulate(&d)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;

    #[test]
    fn dense_identity_and_bias() {
        let x = array![[1.0, -2.0], [3.0, 0.5]];
        let eye = Array2::eye(2);
        assert_eq!(dense_forward(&x, &eye, &Array2::zeros((1, 2))).unwrap(), x);
        let b = array![[0.25, -1.0]];
        let out = dense_forward(&x, &Array2::zeros((2, 2)), &b).unwrap();
        assert_eq!(out, array![[0.25, -1.0], [0.25, -1.0]]);
    }

    #[test]
    fn dense_hand_multiplied() {
        let x = array![[1.0, 2.0]];
        let w = array![[3.0, 4.0], [5.0, 6.0]];
        let b = array![[0.5, -0.5]];
        // [1*3 + 2*5 + 0.5, 1*4 + 2*6 - 0.5]
        assert_eq!(dense_forward(&x, &w, &b).unwrap(), array![[13.5, 15.5]]);
        assert!(dense_forward(&x, &array![[1.0, 2.0]], &b).is_err());
        assert!(dense_forward(&x, &w, &array![[1.0]]).is_err());
    }

    #[test]
    fn scalar_activations() {
        assert_eq!(f64::tanh(0.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(relu(-1.0), 0.0);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn softmax_values() {
        let u = softmax_rows(&array![[7.0, 7.0, 7.0, 7.0]]);
        assert!(u.iter().all(|&p| (p - 0.25).abs() < 1e-15));

        let s = softmax_rows(&array![[1.0, 2.0, 3.0]]);
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
        for (k, v) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((s[[0, k]] - v.exp() / z).abs() < 1e-12);
        }
        let big = softmax_rows(&array![[1000.0, 1001.0, -50.0]]);
        assert!((big.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relu_backward_zero_at_kink() {
        let out = array![[0.0, 2.0]];
        let g = Activation::Relu.backward(&out, &array![[1.0, 1.0]]);
        assert_eq!(g, array![[0.0, 1.0]]);
    }

    #[test]
    fn mlp_backward_before_forward_errors() {
        let mut rng = seed::rng(0);
        let mut mlp = Mlp::new(&[3, 2], &[Activation::Tanh], &mut rng);
        assert!(mlp.backward(&array![[1.0, 1.0]]).is_err());
    }
}
