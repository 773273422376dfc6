use ndarray::{Array1, Array2};

use crate::diffcore::loss::log_sigmoid;
use crate::diffcore::{sigmoid, Activation, Mlp};
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_DISCRIMINATOR_WIDTHS: [usize; 2] = [512, 128];

/// MLP scoring how likely a full profile row (zeros for unrated) is real.
#[derive(Debug, Clone)]
pub struct Discriminator {
    /// Ends in a single linear logit; the probability is its sigmoid.
    pub net: Mlp,
}

impl Discriminator {
    pub fn new(num_items: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if num_items == 0 || hidden.contains(&0) {
            return Err(Error::invalid("discriminator widths must be >= 1"));
        }
        let mut widths = vec![num_items];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Identity);
        let mut rng = seed::rng(seed);
        Ok(Self {
            net: Mlp::new(&widths, &acts, &mut rng),
        })
    }

    pub fn num_items(&self) -> usize {
        self.net.layers[0].fan_in()
    }

    pub fn logits(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        Ok(self.net.apply(rows)?.column(0).to_owned())
    }

    /// Probability that each row is a real profile.
    pub fn probabilities(&self, rows: &Array2<f64>) -> Result<Array1<f64>> {
        Ok(self.logits(rows)?.mapv(sigmoid))
    }

    pub fn discriminate(&self, row: &[f64]) -> Result<f64> {
        let x = Array2::from_shape_vec((1, row.len()), row.to_vec()).map_err(|e| Error::shape(e.to_string()))?;
        Ok(self.probabilities(&x)?[0])
    }

    /// `mean log D(real) + mean log(1 - D(fake))`, the quantity the
    /// discriminator maximises. Leaves the gradient of its negation in the
    /// network.
    pub fn loss_and_grad(&mut self, real: &Array2<f64>, fake: &Array2<f64>) -> Result<f64> {
        self.net.zero_grad();
        let zr = self.net.forward(real)?;
        let value_real: f64 = zr.iter().map(|&z| log_sigmoid(z)).sum::<f64>() / real.nrows() as f64;
        // d(-log sigmoid(z))/dz = sigmoid(z) - 1
        let dr = zr.mapv(|z| (sigmoid(z) - 1.0) / real.nrows() as f64);
        self.net.backward(&dr)?;
        let zf = self.net.forward(fake)?;
        let value_fake: f64 = zf.iter().map(|&z| log_sigmoid(-z)).sum::<f64>() / fake.nrows() as f64;
        // d(-log(1 - sigmoid(z)))/dz = sigmoid(z)
        let df = zf.mapv(|z| sigmoid(z) / fake.nrows() as f64);
        self.net.backward(&df)?;
        Ok(value_real + value_fake)
    }

    /// `mean log(1 - D(fake))` and its gradient w.r.t. the fake rows. The
    /// network's own gradient slots are cleared afterwards.
    pub fn adversarial(&mut self, fake: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
        self.net.zero_grad();
        let z = self.net.forward(fake)?;
        let n = fake.nrows() as f64;
        let value = z.iter().map(|&v| log_sigmoid(-v)).sum::<f64>() / n;
        let d_input = self.net.backward(&z.mapv(|v| -sigmoid(v) / n))?;
        self.net.zero_grad();
        Ok((value, d_input))
    }
}
