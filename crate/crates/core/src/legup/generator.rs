use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::discretize::{cumulative, hard_rating, soft_rating, tau_from_logits, Discretization, LEVELS, ROUNDING_THRESHOLDS};
use super::templates::TemplateBatch;
use crate::diffcore::{sigmoid, Activation, Mlp, Tensor};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PreferenceLearner {
    /// One free parameter per item, squashed by a sigmoid.
    Simple,
    /// ReLU encoder and tanh decoder over the template row.
    #[default]
    #[serde(alias = "ae")]
    AutoEncoder,
}

/// Preference learner plus discretization layer.
#[derive(Debug, Clone)]
pub struct Generator {
    pub learner: PreferenceLearner,
    pub discretization: Discretization,
    pub xi: f64,
    /// `1 x num_items`, used by the simple learner.
    pub omega: Tensor,
    /// `num_items -> hidden -> num_items`, used by the autoencoder learner.
    pub ae: Option<Mlp>,
    /// `A x 5`; thresholds are the cumulative row-softmax.
    pub tau_logits: Tensor,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct GenForward {
    pub mask: Array2<f64>,
    /// Preferences in (0, 1) on the template support, zero elsewhere.
    pub preferences: Array2<f64>,
    /// Differentiable ratings in [1, 5] on the support, zero elsewhere.
    pub soft: Array2<f64>,
    dsoft_dx: Array2<f64>,
    dsoft_dcum: Vec<Array2<f64>>,
    tau: Array2<f64>,
}

impl Generator {
    pub fn new(
        learner: PreferenceLearner,
        discretization: Discretization,
        num_items: usize,
        attack_size: usize,
        hidden: usize,
        xi: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(xi > 0.0 && xi < 0.5) {
            return Err(Error::invalid(format!("xi must lie in (0, 0.5), got {xi}")));
        }
        if num_items == 0 || attack_size == 0 || hidden == 0 {
            return Err(Error::invalid("generator needs items, fake users and hidden units"));
        }
        let mut rng = seed::rng(seed);
        let ae = (learner == PreferenceLearner::AutoEncoder)
            .then(|| Mlp::new(&[num_items, hidden, num_items], &[Activation::Relu, Activation::Tanh], &mut rng));
        Ok(Self {
            learner,
            discretization,
            xi,
            omega: Tensor::zeros(1, num_items),
            ae,
            tau_logits: Tensor::zeros(attack_size, LEVELS),
        })
    }

    pub fn num_items(&self) -> usize {
        self.omega.value.ncols()
    }

    pub fn attack_size(&self) -> usize {
        self.tau_logits.value.nrows()
    }

    pub fn tau(&self) -> Array2<f64> {
        tau_from_logits(&self.tau_logits.value)
    }

    /// Interior cumulative thresholds per fake user.
    pub fn thresholds(&self) -> Vec<[f64; LEVELS - 1]> {
        match self.discretization {
            Discretization::Learnable => {
                let tau = self.tau();
                tau.rows().into_iter().map(|r| cumulative(&r.to_vec())).collect()
            }
            Discretization::Rounding => vec![ROUNDING_THRESHOLDS; self.attack_size()],
        }
    }

    fn check(&self, templates: &TemplateBatch) -> Result<()> {
        if templates.values.dim() != (self.attack_size(), self.num_items()) {
            return Err(Error::shape(format!(
                "templates {:?} for a generator of {} fake users x {} items",
                templates.values.dim(),
                self.attack_size(),
                self.num_items()
            )));
        }
        Ok(())
    }

    fn ae(&self) -> Result<&Mlp> {
        self.ae
            .as_ref()
            .ok_or_else(|| Error::invalid("autoencoder learner without a network"))
    }

    fn to_preferences(&self, decoded: Option<Array2<f64>>, mask: &Array2<f64>) -> Array2<f64> {
        let full = match decoded {
            Some(y) => y.mapv(|v| (v + 1.0) / 2.0),
            None => {
                let row = self.omega.value.mapv(sigmoid);
                row.broadcast(mask.raw_dim()).expect("1 x m row").to_owned()
            }
        };
        full * mask
    }

    /// Preferences without caching anything.
    pub fn preferences(&self, templates: &TemplateBatch) -> Result<Array2<f64>> {
        self.check(templates)?;
        let decoded = match self.learner {
            PreferenceLearner::Simple => None,
            PreferenceLearner::AutoEncoder => Some(self.ae()?.apply(&templates.values)?),
        };
        Ok(self.to_preferences(decoded, &templates.mask()))
    }

    pub fn forward(&mut self, templates: &TemplateBatch) -> Result<GenForward> {
        self.check(templates)?;
        let mask = templates.mask();
        let decoded = match (self.learner, self.ae.as_mut()) {
            (PreferenceLearner::Simple, _) => None,
            (PreferenceLearner::AutoEncoder, Some(ae)) => Some(ae.forward(&templates.values)?),
            (PreferenceLearner::AutoEncoder, None) => return Err(Error::invalid("autoencoder learner without a network")),
        };
        let preferences = self.to_preferences(decoded, &mask);
        let cums = self.thresholds();
        let (a, m) = mask.dim();
        let mut soft = Array2::zeros((a, m));
        let mut dsoft_dx = Array2::zeros((a, m));
        let mut dsoft_dcum = vec![Array2::zeros((a, m)); LEVELS - 1];
        for v in 0..a {
            for i in 0..m {
                if mask[[v, i]] == 0.0 {
                    continue;
                }
                let (value, dx, dcum) = soft_rating(preferences[[v, i]], &cums[v], self.xi);
                soft[[v, i]] = value;
                dsoft_dx[[v, i]] = dx;
                for (k, d) in dcum.iter().enumerate() {
                    dsoft_dcum[k][[v, i]] = *d;
                }
            }
        }
        Ok(GenForward {
            mask,
            preferences,
            soft,
            dsoft_dx,
            dsoft_dcum,
            tau: self.tau(),
        })
    }

    /// Accumulates parameter gradients for an upstream gradient on `soft`.
    pub fn backward(&mut self, fwd: &GenForward, d_soft: &Array2<f64>) -> Result<()> {
        if d_soft.dim() != fwd.soft.dim() {
            return Err(Error::shape(format!(
                "generator gradient {:?} vs output {:?}",
                d_soft.dim(),
                fwd.soft.dim()
            )));
        }
        let d_soft = d_soft * &fwd.mask;
        let d_pref = &d_soft * &fwd.dsoft_dx;
        match self.learner {
            PreferenceLearner::Simple => {
                let p = self.omega.value.mapv(sigmoid);
                let d = d_pref.sum_axis(Axis(0)).insert_axis(Axis(0)) * &p * &p.mapv(|v| 1.0 - v);
                self.omega.accumulate(&d)?;
            }
            PreferenceLearner::AutoEncoder => {
                let ae = self
                    .ae
                    .as_mut()
                    .ok_or_else(|| Error::invalid("autoencoder learner without a network"))?;
                ae.backward(&(d_pref * 0.5))?;
            }
        }
        if self.discretization == Discretization::Learnable {
            let a = d_soft.nrows();
            let mut d_logits = Array2::zeros((a, LEVELS));
            for v in 0..a {
                // d/dcum_k, then d/dtau_j = sum over k >= j of d/dcum_k
                let dcum: Vec<f64> = (0..LEVELS - 1).map(|k| d_soft.row(v).dot(&fwd.dsoft_dcum[k].row(v))).collect();
                let mut dtau = [0.0; LEVELS];
                let mut acc = 0.0;
                for k in (0..LEVELS - 1).rev() {
                    acc += dcum[k];
                    dtau[k] = acc;
                }
                let tau = fwd.tau.row(v);
                let dot: f64 = (0..LEVELS).map(|j| dtau[j] * tau[j]).sum();
                for j in 0..LEVELS {
                    d_logits[[v, j]] = tau[j] * (dtau[j] - dot);
                }
            }
            self.tau_logits.accumulate(&d_logits)?;
        }
        Ok(())
    }

    /// Tensors that receive gradient under the current switches.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        match self.learner {
            PreferenceLearner::Simple => out.push(&mut self.omega),
            PreferenceLearner::AutoEncoder => {
                if let Some(ae) = self.ae.as_mut() {
                    out.extend(ae.params_mut());
                }
            }
        }
        if self.discretization == Discretization::Learnable {
            out.push(&mut self.tau_logits);
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Discrete ratings on the template support, as `(item, rating)` rows.
    pub fn hard_ratings(&self, templates: &TemplateBatch) -> Result<Vec<Vec<(usize, u8)>>> {
        let pref = self.preferences(templates)?;
        let cums = self.thresholds();
        let mask = templates.mask();
        Ok((0..self.attack_size())
            .map(|v| {
                (0..self.num_items())
                    .filter(|&i| mask[[v, i]] != 0.0)
                    .map(|i| (i, hard_rating(pref[[v, i]], &cums[v])))
                    .collect()
            })
            .collect())
    }
}
