use std::ops::Range;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::view::RatingView;
use super::wrmf::Unrolled;
use crate::diffcore::{loss, Activation, Mlp, Optimizer};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AutoRecSurrogateConfig {
    pub hidden: usize,
    pub lambda: f64,
    pub w_obs: f64,
    pub w_miss: f64,
    /// Relative size of the finite-difference probe used for the mixed
    /// second derivative (`eps = hvp_scale / |g|`).
    pub hvp_scale: f64,
}

impl Default for AutoRecSurrogateConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            lambda: 1e-5,
            w_obs: 1.0,
            w_miss: 0.05,
            hvp_scale: 1e-2,
        }
    }
}

/// Item-based AutoRec used as an alternative surrogate: every item column of
/// `X*` (one entry per user, fakes included) is encoded through a sigmoid
/// hidden layer and decoded linearly.
#[derive(Debug, Clone)]
pub struct ItemAutoRecSurrogate {
    pub net: Mlp,
    pub config: AutoRecSurrogateConfig,
}

struct RsGrad {
    loss: f64,
    params: Vec<Array2<f64>>,
    /// dL_RS / dX* (both as network input and as reconstruction target).
    values: Array2<f64>,
}

impl ItemAutoRecSurrogate {
    pub fn new(num_users: usize, config: AutoRecSurrogateConfig, seed: u64) -> Result<Self> {
        if config.hidden == 0 || config.lambda < 0.0 || config.w_obs <= 0.0 || config.w_miss < 0.0 {
            return Err(Error::invalid(
                "AutoRec surrogate needs hidden >= 1, lambda >= 0, w_obs > 0, w_miss >= 0",
            ));
        }
        let mut rng = seed::rng(seed);
        let net = Mlp::new(
            &[num_users, config.hidden, num_users],
            &[Activation::Sigmoid, Activation::Identity],
            &mut rng,
        );
        Ok(Self { net, config })
    }

    pub fn num_users(&self) -> usize {
        self.net.layers[0].fan_in()
    }

    fn check_view(&self, view: &RatingView) -> Result<()> {
        if view.num_users() != self.num_users() {
            return Err(Error::shape(format!(
                "AutoRec surrogate over {} users against view {:?}",
                self.num_users(),
                view.values.dim()
            )));
        }
        Ok(())
    }

    /// Scores for every user/item pair (`num_users x num_items`).
    pub fn predict_all(&self, view: &RatingView) -> Result<Array2<f64>> {
        self.check_view(view)?;
        Ok(self.net.apply(&view.values.t().to_owned())?.reversed_axes())
    }

    fn rs_grad(net: &Mlp, config: &AutoRecSurrogateConfig, view: &RatingView) -> Result<RsGrad> {
        let mut net = net.clone();
        net.zero_grad();
        let x = view.values.t().to_owned();
        let w = view.weights(config.w_obs, config.w_miss).reversed_axes();
        let y = net.forward(&x)?;
        let mut wr = &x - &y;
        wr *= &w;
        let data: f64 = wr.iter().zip((&x - &y).iter()).map(|(a, r)| a * r).sum();
        let loss = data + config.lambda * net.weight_sq_norm();
        let d_input = net.backward(&(&wr * -2.0))?;
        net.add_weight_decay(config.lambda)?;
        let values = (d_input + &wr * 2.0).reversed_axes();
        let params = net.params().iter().map(|p| p.grad_or_zeros()).collect();
        Ok(RsGrad { loss, params, values })
    }

    pub fn loss(&self, view: &RatingView) -> Result<f64> {
        self.check_view(view)?;
        Ok(Self::rs_grad(&self.net, &self.config, view)?.loss)
    }

    pub fn fit(&mut self, view: &RatingView, steps: usize, optimizer: &mut Optimizer) -> Result<Vec<f64>> {
        if steps == 0 {
            return Err(Error::invalid("surrogate fit needs steps >= 1"));
        }
        self.check_view(view)?;
        let mut history = Vec::with_capacity(steps);
        for step in 0..steps {
            let g = Self::rs_grad(&self.net, &self.config, view)?;
            if !g.loss.is_finite() {
                return Err(Error::diverged("AutoRec surrogate", step, g.loss));
            }
            history.push(g.loss);
            let mut values: Vec<&mut Array2<f64>> = self.net.params_mut().into_iter().map(|p| &mut p.value).collect();
            optimizer.step_arrays(&mut values, &g.params)?;
        }
        Ok(history)
    }

    pub fn sgd_step(&mut self, view: &RatingView, lr: f64) -> Result<f64> {
        let g = Self::rs_grad(&self.net, &self.config, view)?;
        for (p, d) in self.net.params_mut().into_iter().zip(&g.params) {
            p.value.scaled_add(-lr, d);
        }
        Ok(g.loss)
    }

    fn shifted(&self, direction: &[Array2<f64>], scale: f64) -> Mlp {
        let mut net = self.net.clone();
        for (p, d) in net.params_mut().into_iter().zip(direction) {
            p.value.scaled_add(scale, d);
        }
        net
    }

    /// Last-step-unrolled promotion gradient w.r.t. the fake rows.
    ///
    /// Unlike WRMF, `X*` is also the network input, so the gradient has a
    /// direct term at the unrolled parameters plus
    /// `-inner_lr * d/dX* <g, grad_G L_RS>`, where `g` is the promotion
    /// gradient w.r.t. the unrolled parameters. The mixed second derivative
    /// is taken by central differences of `dL_RS/dX*` at `G +/- eps g`.
    pub fn unrolled_attack_grad(
        &self,
        view: &RatingView,
        fake_rows: Range<usize>,
        eval_users: Range<usize>,
        targets: &[usize],
        inner_lr: f64,
    ) -> Result<Unrolled> {
        self.check_view(view)?;
        let first = Self::rs_grad(&self.net, &self.config, view)?;
        let unrolled = self.shifted(&first.params, -inner_lr);

        let mut net = unrolled;
        net.zero_grad();
        let x = view.values.t().to_owned();
        let y = net.forward(&x)?;
        let scores = y.t().slice(s![eval_users.clone(), ..]).to_owned();
        let (loss, d_scores) = loss::softmax_nll(&scores, targets)?;
        let mut dy = Array2::<f64>::zeros(y.raw_dim());
        dy.slice_mut(s![.., eval_users]).assign(&d_scores.t());
        let direct = net.backward(&dy)?.reversed_axes();
        let g: Vec<Array2<f64>> = net.params().iter().map(|p| p.grad_or_zeros()).collect();

        let g_norm = g.iter().map(|a| a.iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
        let mut grad = direct.slice(s![fake_rows.clone(), ..]).to_owned();
        if g_norm > 0.0 && inner_lr != 0.0 {
            let eps = self.config.hvp_scale / g_norm;
            let plus = Self::rs_grad(&self.shifted(&g, eps), &self.config, view)?.values;
            let minus = Self::rs_grad(&self.shifted(&g, -eps), &self.config, view)?.values;
            let hvp = (plus - minus) / (2.0 * eps);
            grad.scaled_add(-inner_lr, &hvp.slice(s![fake_rows, ..]));
        }
        if !loss.is_finite() || grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("AutoRec unrolled attack gradient".into()));
        }
        Ok(Unrolled { loss, grad })
    }
}
