use std::ops::Range;

use ndarray::{s, Array2, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::view::RatingView;
use crate::diffcore::{loss, Optimizer, Tensor};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// How the missing-entry term of the WRMF loss is evaluated during `fit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MissingMode {
    /// Every unobserved cell, every step.
    #[default]
    Dense,
    /// `per_user` uniformly drawn unobserved cells per user per step,
    /// re-weighted so the estimate is unbiased.
    Sampled { per_user: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WrmfConfig {
    pub dim: usize,
    pub lambda: f64,
    pub w_obs: f64,
    pub w_miss: f64,
    pub init_std: f64,
    pub missing: MissingMode,
}

impl Default for WrmfConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            lambda: 1e-5,
            w_obs: 1.0,
            w_miss: 0.05,
            init_std: 0.01,
            missing: MissingMode::Dense,
        }
    }
}

impl WrmfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("WRMF dim must be >= 1"));
        }
        if self.lambda < 0.0 || self.w_obs <= 0.0 || self.w_miss < 0.0 {
            return Err(Error::invalid(format!(
                "WRMF needs lambda >= 0, w_obs > 0, w_miss >= 0 (got {}, {}, {})",
                self.lambda, self.w_obs, self.w_miss
            )));
        }
        if let MissingMode::Sampled { per_user: 0 } = self.missing {
            return Err(Error::invalid("sampled missing mode needs per_user >= 1"));
        }
        Ok(())
    }
}

/// Weighted regularised matrix factorisation, trained by gradient descent so
/// that its last step can be differentiated.
#[derive(Debug, Clone, PartialEq)]
pub struct WrmfModel {
    /// User factors, `num_users x dim`.
    pub p: Array2<f64>,
    /// Item factors, `num_items x dim`.
    pub q: Array2<f64>,
    pub config: WrmfConfig,
}

impl WrmfModel {
    /// Factors drawn from `N(0, init_std^2)`.
    pub fn new(num_users: usize, num_items: usize, config: WrmfConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let p = Tensor::normal(num_users, config.dim, config.init_std, &mut rng).value;
        let q = Tensor::normal(num_items, config.dim, config.init_std, &mut rng).value;
        Ok(Self { p, q, config })
    }

    pub fn num_users(&self) -> usize {
        self.p.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.q.nrows()
    }

    fn check_view(&self, view: &RatingView) -> Result<()> {
        if view.num_users() != self.num_users() || view.num_items() != self.num_items() {
            return Err(Error::shape(format!(
                "WRMF {}x{} against view {:?}",
                self.num_users(),
                self.num_items(),
                view.values.dim()
            )));
        }
        Ok(())
    }

    /// Adds `extra` freshly initialised user rows (e.g. for injected profiles).
    pub fn grow_users(&mut self, extra: usize, seed: u64) {
        let mut rng = seed::rng(seed);
        let rows = Tensor::normal(extra, self.config.dim, self.config.init_std, &mut rng).value;
        self.p = ndarray::concatenate(ndarray::Axis(0), &[self.p.view(), rows.view()]).expect("same dim");
    }

    /// `X~ = P Q^T` for every user/item pair.
    pub fn predict_all(&self) -> Array2<f64> {
        self.p.dot(&self.q.t())
    }

    /// Weighted residual `E = W o (X* - P Q^T)`.
    fn weighted_residual(&self, view: &RatingView) -> Array2<f64> {
        let mut e = &view.values - &self.predict_all();
        e *= &view.weights(self.config.w_obs, self.config.w_miss);
        e
    }

    fn penalty(&self) -> f64 {
        self.config.lambda * (sq_norm(&self.p) + sq_norm(&self.q))
    }

    /// Full-sweep loss and gradients `(L, dL/dP, dL/dQ)`.
    pub fn loss_and_grad(&self, view: &RatingView) -> Result<(f64, Array2<f64>, Array2<f64>)> {
        self.check_view(view)?;
        let w = view.weights(self.config.w_obs, self.config.w_miss);
        let residual = &view.values - &self.predict_all();
        let data: f64 = Zip::from(&w).and(&residual).fold(0.0, |acc, &w, &r| acc + w * r * r);
        let e = residual * &w;
        let lambda2 = 2.0 * self.config.lambda;
        let gp = e.dot(&self.q) * -2.0 + &self.p * lambda2;
        let gq = e.t().dot(&self.p) * -2.0 + &self.q * lambda2;
        Ok((data + self.penalty(), gp, gq))
    }

    /// Sampled-negatives estimate of the loss and gradients.
    fn sampled_loss_and_grad(&self, view: &RatingView, per_user: usize, rng: &mut Rng) -> (f64, Array2<f64>, Array2<f64>) {
        let (w_obs, w_miss) = (self.config.w_obs, self.config.w_miss);
        let m = self.num_items();
        let mut gp = &self.p * (2.0 * self.config.lambda);
        let mut gq = &self.q * (2.0 * self.config.lambda);
        let mut data = 0.0;
        let mut cell = |u: usize, i: usize, weight: f64, gp: &mut Array2<f64>, gq: &mut Array2<f64>| {
            let pu = self.p.row(u);
            let qi = self.q.row(i);
            let r = view.values[[u, i]] - pu.dot(&qi);
            data += weight * r * r;
            let c = -2.0 * weight * r;
            gp.row_mut(u).scaled_add(c, &qi);
            gq.row_mut(i).scaled_add(c, &pu);
        };
        for u in 0..self.num_users() {
            let observed: Vec<usize> = (0..m).filter(|&i| view.observed[[u, i]] != 0.0).collect();
            for &i in &observed {
                cell(u, i, w_obs, &mut gp, &mut gq);
            }
            let n_missing = m - observed.len();
            if n_missing == 0 || w_miss == 0.0 {
                continue;
            }
            let weight = w_miss * n_missing as f64 / per_user as f64;
            let mut drawn = 0;
            while drawn < per_user {
                let i = rng.random_range(0..m);
                if view.observed[[u, i]] == 0.0 {
                    cell(u, i, weight, &mut gp, &mut gq);
                    drawn += 1;
                }
            }
        }
        (data + self.penalty(), gp, gq)
    }

    /// Gradient-descent training for `steps` full-batch steps. Returns the
    /// loss before each step. Deterministic given the model's initial state,
    /// the optimizer and `seed` (used only in sampled mode).
    pub fn fit(&mut self, view: &RatingView, steps: usize, optimizer: &mut Optimizer, seed: u64) -> Result<Vec<f64>> {
        if steps == 0 {
            return Err(Error::invalid("WRMF fit needs steps >= 1"));
        }
        self.check_view(view)?;
        let mut rng = seed::rng(seed);
        let mut history = Vec::with_capacity(steps);
        for step in 0..steps {
            let (loss, gp, gq) = match self.config.missing {
                MissingMode::Dense => self.loss_and_grad(view)?,
                MissingMode::Sampled { per_user } => self.sampled_loss_and_grad(view, per_user, &mut rng),
            };
            if !loss.is_finite() {
                return Err(Error::diverged("WRMF surrogate", step, loss));
            }
            history.push(loss);
            optimizer.step_arrays(&mut [&mut self.p, &mut self.q], &[gp, gq])?;
        }
        Ok(history)
    }

    /// One plain SGD step on the full-sweep loss, in place.
    pub fn sgd_step(&mut self, view: &RatingView, lr: f64) -> Result<f64> {
        let (loss, gp, gq) = self.loss_and_grad(view)?;
        self.p.scaled_add(-lr, &gp);
        self.q.scaled_add(-lr, &gq);
        Ok(loss)
    }

    /// Last-step-unrolled gradient of the promotion loss w.r.t. the fake rows.
    ///
    /// `self` is the surrogate after `T-1` inner steps and is held constant.
    /// One SGD step `G_T = G_{T-1} - inner_lr * grad L_RS(X*, G_{T-1})` is
    /// taken symbolically, the promotion loss (softmax NLL of the targets
    /// over all items, summed over `eval_users`) is evaluated at `G_T`, and
    /// the composite is differentiated w.r.t. the values of `fake_rows`.
    ///
    /// The returned gradient covers every cell of the fake rows under the
    /// view's fixed observed mask; callers keep only the cells they optimise.
    pub fn unrolled_attack_grad(
        &self,
        view: &RatingView,
        fake_rows: Range<usize>,
        eval_users: Range<usize>,
        targets: &[usize],
        inner_lr: f64,
    ) -> Result<Unrolled> {
        self.check_view(view)?;
        if fake_rows.end > self.num_users() || eval_users.end > self.num_users() {
            return Err(Error::shape("row range outside the surrogate".to_string()));
        }
        if fake_rows.start < eval_users.end && eval_users.start < fake_rows.end {
            return Err(Error::invalid("evaluation users must not overlap the fake rows"));
        }
        let eta = inner_lr;
        let lambda = self.config.lambda;
        let e = self.weighted_residual(view);
        let shrink = 1.0 - 2.0 * eta * lambda;

        // G_T restricted to what the loss touches: evaluated users' rows of P, all of Q.
        let e_eval = e.slice(s![eval_users.clone(), ..]);
        let p_eval = &self.p.slice(s![eval_users.clone(), ..]) * shrink + e_eval.dot(&self.q) * (2.0 * eta);
        let q_next = &self.q * shrink + e.t().dot(&self.p) * (2.0 * eta);

        let scores = p_eval.dot(&q_next.t());
        let (loss, d_scores) = loss::softmax_nll(&scores, targets)?;
        // dL/dQ_T, then Q_T[i] depends on fake cell (v, i) through 2*eta*W[v,i]*P[v].
        let d_q_next = d_scores.t().dot(&p_eval);
        let p_fake = self.p.slice(s![fake_rows.clone(), ..]);
        let mut grad = p_fake.dot(&d_q_next.t()) * (2.0 * eta);
        let w_fake = view
            .observed
            .slice(s![fake_rows, ..])
            .mapv(|m| self.config.w_miss + (self.config.w_obs - self.config.w_miss) * m);
        grad *= &w_fake;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("unrolled attack gradient".into()));
        }
        Ok(Unrolled { loss, grad })
    }
}

/// Promotion loss at the unrolled parameters and its gradient w.r.t. the
/// fake rows.
#[derive(Debug, Clone)]
pub struct Unrolled {
    pub loss: f64,
    pub grad: Array2<f64>,
}

fn sq_norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// Full-sweep WRMF loss:
/// `sum w_ui (X*_ui - P_u.Q_i)^2 + lambda (|P|^2 + |Q|^2)`.
pub fn wrmf_loss(model: &WrmfModel, view: &RatingView) -> Result<f64> {
    model.loss_and_grad(view).map(|(l, _, _)| l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::grad_check;
    use ndarray::array;

    fn one_by_one(x: f64, p: f64, q: f64, lambda: f64) -> (WrmfModel, RatingView) {
        let config = WrmfConfig {
            dim: 1,
            lambda,
            w_obs: 1.0,
            w_miss: 0.0,
            ..WrmfConfig::default()
        };
        let model = WrmfModel {
            p: array![[p]],
            q: array![[q]],
            config,
        };
        (model, RatingView::new(array![[x]], array![[1.0]]).unwrap())
    }

    #[test]
    fn loss_examples() {
        let (m, v) = one_by_one(4.0, 2.0, 2.0, 0.0);
        assert_eq!(wrmf_loss(&m, &v).unwrap(), 0.0);
        let (m, v) = one_by_one(4.0, 3.0, 1.0, 0.0);
        assert_eq!(wrmf_loss(&m, &v).unwrap(), 1.0);
        // data term 1 plus lambda * (|P|^2 + |Q|^2) = 0.1 * 2
        let (m, v) = one_by_one(2.0, 1.0, 1.0, 0.1);
        assert!((wrmf_loss(&m, &v).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn observed_only_equals_brute_force_sse() {
        let mut rng = seed::rng(5);
        for case in 0..5 {
            let values = Array2::from_shape_fn((10, 10), |_| {
                if rng.random::<f64>() < 0.4 {
                    rng.random_range(1..=5) as f64
                } else {
                    0.0
                }
            });
            let view = RatingView::new(values.clone(), values.mapv(|v| (v != 0.0) as u8 as f64)).unwrap();
            let config = WrmfConfig {
                dim: 3,
                lambda: 0.0,
                w_obs: 1.0,
                w_miss: 0.0,
                ..WrmfConfig::default()
            };
            let model = WrmfModel::new(10, 10, WrmfConfig { init_std: 0.7, ..config }, case).unwrap();
            let mut brute = 0.0;
            for u in 0..10 {
                for i in 0..10 {
                    if values[[u, i]] != 0.0 {
                        let mut dot = 0.0;
                        for k in 0..3 {
                            dot += model.p[[u, k]] * model.q[[i, k]];
                        }
                        brute += (values[[u, i]] - dot).powi(2);
                    }
                }
            }
            let got = wrmf_loss(&model, &view).unwrap();
            assert!((got - brute).abs() <= 1e-12 * brute.max(1.0), "{got} vs {brute}");
        }
    }

    #[test]
    fn predict_all_matches_dot_products() {
        let (mut m, _) = one_by_one(0.0, 2.0, 3.0, 0.0);
        assert_eq!(m.predict_all(), array![[6.0]]);
        m.p.fill(0.0);
        assert_eq!(m.predict_all(), array![[0.0]]);

        // integer factors: every summation order is exact
        let mut model = WrmfModel::new(
            5,
            5,
            WrmfConfig {
                dim: 4,
                init_std: 3.0,
                ..WrmfConfig::default()
            },
            2,
        )
        .unwrap();
        model.p.mapv_inplace(f64::round);
        model.q.mapv_inplace(f64::round);
        let scores = model.predict_all();
        for u in 0..5 {
            for i in 0..5 {
                let dot: f64 = (0..4).map(|k| model.p[[u, k]] * model.q[[i, k]]).sum();
                assert_eq!(scores[[u, i]], dot);
            }
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = seed::rng(17);
        let values = Array2::from_shape_fn((6, 5), |_| {
            if rng.random::<f64>() < 0.5 {
                rng.random_range(1..=5) as f64
            } else {
                0.0
            }
        });
        let view = RatingView::from_matrix_values(values);
        let config = WrmfConfig {
            dim: 3,
            lambda: 0.1,
            w_miss: 0.05,
            init_std: 0.5,
            ..WrmfConfig::default()
        };
        let base = WrmfModel::new(6, 5, config, 3).unwrap();
        for point in 0..5u64 {
            let start = WrmfModel::new(6, 5, config, 100 + point).unwrap();
            let mut m = base.clone();
            m.q = start.q.clone();
            let err_p = grad_check(
                |p| {
                    m.p = p.clone();
                    let (l, gp, _) = m.loss_and_grad(&view)?;
                    Ok((l, gp))
                },
                &start.p,
                1e-6,
            )
            .unwrap();
            m.p = start.p.clone();
            let err_q = grad_check(
                |q| {
                    m.q = q.clone();
                    let (l, _, gq) = m.loss_and_grad(&view)?;
                    Ok((l, gq))
                },
                &start.q,
                1e-6,
            )
            .unwrap();
            assert!(err_p <= 1e-4 && err_q <= 1e-4, "{err_p} {err_q}");
        }
    }

    #[test]
    fn fit_rank_one_fixture() {
        let u = [1.0, 2.0, 1.5, 0.5];
        let v = [2.0, 1.0, 2.5, 3.0];
        let values = Array2::from_shape_fn((4, 4), |(a, b)| u[a] * v[b]);
        let view = RatingView::new(values.clone(), Array2::ones((4, 4))).unwrap();
        let config = WrmfConfig {
            dim: 2,
            lambda: 0.0,
            w_miss: 0.0,
            init_std: 0.01,
            ..WrmfConfig::default()
        };
        let mut model = WrmfModel::new(4, 4, config, 1).unwrap();
        let mut opt = Optimizer::adam(0.02).unwrap();
        model.fit(&view, 2000, &mut opt, 0).unwrap();
        let err = (&model.predict_all() - &values).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        assert!(err <= 0.05, "max error {err}");

        let mut again = WrmfModel::new(4, 4, config, 1).unwrap();
        again.fit(&view, 2000, &mut Optimizer::adam(0.02).unwrap(), 0).unwrap();
        assert_eq!(again, model);

        assert!(model.fit(&view, 0, &mut opt, 0).is_err());
    }

    #[test]
    fn fit_reports_divergence() {
        let values = array![[5.0, 4.0], [3.0, 5.0]];
        let view = RatingView::from_matrix_values(values);
        let config = WrmfConfig {
            dim: 2,
            init_std: 1.0,
            ..WrmfConfig::default()
        };
        let mut model = WrmfModel::new(2, 2, config, 0).unwrap();
        let err = model.fit(&view, 200, &mut Optimizer::sgd(10.0).unwrap(), 0).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn sampled_mode_trains() {
        let u = [1.0, 2.0, 1.5, 0.5, 1.0, 2.0];
        let values = Array2::from_shape_fn((6, 8), |(a, b)| if (a + b) % 3 == 0 { 0.0 } else { u[a] * 2.0 });
        let view = RatingView::from_matrix_values(values);
        let config = WrmfConfig {
            dim: 4,
            missing: MissingMode::Sampled { per_user: 2 },
            ..WrmfConfig::default()
        };
        let mut model = WrmfModel::new(6, 8, config, 4).unwrap();
        let hist = model.fit(&view, 300, &mut Optimizer::adam(0.05).unwrap(), 9).unwrap();
        assert!(hist.last().unwrap() < &hist[0]);
    }
}
