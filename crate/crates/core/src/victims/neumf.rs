use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{diverged, EarlyStop, VictimKind};
use crate::dataset::{Rating, RatingMatrix};
use crate::diffcore::{Activation, Dense, Mlp, Optimizer, Tensor};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuMfConfig {
    pub embedding: usize,
    /// Hidden widths of the MLP tower; its input is the two concatenated
    /// MLP embeddings.
    pub mlp_layers: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_std: f64,
}

impl Default for NeuMfConfig {
    fn default() -> Self {
        Self {
            embedding: 8,
            mlp_layers: vec![16, 8],
            lr: 0.001,
            epochs: 20,
            batch_size: 256,
            init_std: 0.01,
        }
    }
}

/// NeuMF for explicit ratings: a GMF branch (elementwise product of
/// embeddings) and an MLP branch, concatenated into a linear head and
/// trained on RMSE.
#[derive(Debug, Clone)]
pub struct NeuMf {
    pub gmf_user: Tensor,
    pub gmf_item: Tensor,
    pub mlp_user: Tensor,
    pub mlp_item: Tensor,
    pub tower: Mlp,
    pub head: Dense,
    /// Mean batch RMSE per epoch.
    pub losses: Vec<f64>,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    users: Vec<usize>,
    items: Vec<usize>,
    gu: Array2<f64>,
    gi: Array2<f64>,
}

fn scatter_add(t: &mut Tensor, rows: &[usize], delta: ndarray::ArrayView2<f64>) {
    let grad = t.grad.get_or_insert_with(|| Array2::zeros(t.value.raw_dim()));
    for (k, &r) in rows.iter().enumerate() {
        let mut row = grad.row_mut(r);
        row += &delta.row(k);
    }
}

impl NeuMf {
    pub fn new(num_users: usize, num_items: usize, config: &NeuMfConfig, global_mean: f64, seed: u64) -> Result<Self> {
        let e = config.embedding;
        if e == 0
            || config.mlp_layers.iter().any(|&w| w == 0)
            || config.epochs == 0
            || config.batch_size == 0
            || !(config.lr > 0.0)
            || !(config.init_std > 0.0)
        {
            return Err(Error::invalid("NeuMF needs positive widths, epochs, batch_size, lr and init_std"));
        }
        let mut rng = seed::rng(seed);
        let std = config.init_std;
        let gmf_user = Tensor::normal(num_users, e, std, &mut rng);
        let gmf_item = Tensor::normal(num_items, e, std, &mut rng);
        let mlp_user = Tensor::normal(num_users, e, std, &mut rng);
        let mlp_item = Tensor::normal(num_items, e, std, &mut rng);
        let mut widths = vec![2 * e];
        widths.extend(&config.mlp_layers);
        let acts = vec![Activation::Relu; config.mlp_layers.len()];
        let tower = Mlp::new(&widths, &acts, &mut rng);
        let mut head = Dense::new(e + widths.last().copied().unwrap_or(2 * e), 1, &mut rng);
        head.bias.value.fill(global_mean);
        Ok(Self {
            gmf_user,
            gmf_item,
            mlp_user,
            mlp_item,
            tower,
            head,
            losses: Vec::new(),
            cache: None,
        })
    }

    fn embedding_dim(&self) -> usize {
        self.gmf_user.value.ncols()
    }

    fn head_input(&self, users: &[usize], items: &[usize], tower_out: &Array2<f64>) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
        let gu = self.gmf_user.value.select(Axis(0), users);
        let gi = self.gmf_item.value.select(Axis(0), items);
        let z = concatenate(Axis(1), &[(&gu * &gi).view(), tower_out.view()]).expect("same batch");
        (z, gu, gi)
    }

    fn tower_input(&self, users: &[usize], items: &[usize]) -> Array2<f64> {
        let mu = self.mlp_user.value.select(Axis(0), users);
        let mi = self.mlp_item.value.select(Axis(0), items);
        concatenate(Axis(1), &[mu.view(), mi.view()]).expect("same batch")
    }

    /// Predictions without caching.
    pub fn predict_pairs(&self, users: &[usize], items: &[usize]) -> Result<Array1<f64>> {
        let h = self.tower.apply(&self.tower_input(users, items))?;
        let (z, _, _) = self.head_input(users, items, &h);
        Ok(self.head.apply(&z)?.column(0).to_owned())
    }

    fn forward(&mut self, users: &[usize], items: &[usize]) -> Result<Array1<f64>> {
        let input = self.tower_input(users, items);
        let h = self.tower.forward(&input)?;
        let (z, gu, gi) = self.head_input(users, items, &h);
        let out = self.head.forward(&z)?.column(0).to_owned();
        self.cache = Some(Cache {
            users: users.to_vec(),
            items: items.to_vec(),
            gu,
            gi,
        });
        Ok(out)
    }

    fn backward(&mut self, dout: &Array1<f64>) -> Result<()> {
        let cache = self.cache.take().ok_or_else(|| Error::invalid("NeuMF backward before forward"))?;
        let e = self.embedding_dim();
        let dz = self.head.backward(&dout.clone().insert_axis(Axis(1)))?;
        let dg = dz.slice(s![.., ..e]);
        let d_in = self.tower.backward(&dz.slice(s![.., e..]).to_owned())?;
        scatter_add(&mut self.gmf_user, &cache.users, (&dg * &cache.gi).view());
        scatter_add(&mut self.gmf_item, &cache.items, (&dg * &cache.gu).view());
        scatter_add(&mut self.mlp_user, &cache.users, d_in.slice(s![.., ..e]));
        scatter_add(&mut self.mlp_item, &cache.items, d_in.slice(s![.., e..]));
        Ok(())
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = vec![&mut self.gmf_user, &mut self.gmf_item, &mut self.mlp_user, &mut self.mlp_item];
        p.extend(self.tower.params_mut());
        p.push(&mut self.head.weight);
        p.push(&mut self.head.bias);
        p
    }

    /// RMSE of one batch; leaves parameter gradients behind.
    pub(crate) fn batch_loss(&mut self, batch: &[Rating]) -> Result<f64> {
        for p in self.params_mut() {
            p.zero_grad();
        }
        let users: Vec<usize> = batch.iter().map(|r| r.user).collect();
        let items: Vec<usize> = batch.iter().map(|r| r.item).collect();
        let pred = self.forward(&users, &items)?;
        let resid: Array1<f64> = pred.iter().zip(batch).map(|(p, r)| p - r.value as f64).collect();
        let n = batch.len() as f64;
        let rmse = (resid.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        let dout = if rmse > 0.0 {
            resid / (n * rmse)
        } else {
            Array1::zeros(batch.len())
        };
        self.backward(&dout)?;
        Ok(rmse)
    }

    pub fn fit(train: &RatingMatrix, config: &NeuMfConfig, seed: u64) -> Result<Self> {
        let mean = train.entries().map(|r| r.value as f64).sum::<f64>() / train.num_ratings() as f64;
        let mut model = Self::new(train.num_users(), train.num_items(), config, mean, seed)?;
        let mut rng = seed::rng(seed ^ 0x6e65_756d_66);
        let mut entries: Vec<Rating> = train.entries().collect();
        let mut opt = Optimizer::adam(config.lr)?;
        let mut stop = EarlyStop::new(50, 1e-6);
        for epoch in 0..config.epochs {
            entries.shuffle(&mut rng);
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in entries.chunks(config.batch_size) {
                let loss = model.batch_loss(chunk)?;
                if !loss.is_finite() {
                    return Err(diverged(VictimKind::NeuMf, epoch, loss));
                }
                opt.step(&mut model.params_mut())?;
                total += loss;
                batches += 1;
            }
            let loss = total / batches as f64;
            model.losses.push(loss);
            if stop.record(loss) {
                break;
            }
        }
        Ok(model)
    }

    pub fn num_users(&self) -> usize {
        self.gmf_user.value.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.gmf_item.value.nrows()
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.predict_pairs(&[user], &[item]).map(|v| v[0]).unwrap_or(f64::NAN)
    }

    pub fn score_user(&self, user: usize) -> Vec<f64> {
        let m = self.num_items();
        let items: Vec<usize> = (0..m).collect();
        self.predict_pairs(&vec![user; m], &items)
            .map(|v| v.to_vec())
            .unwrap_or_else(|_| vec![f64::NAN; m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::grad_check;

    fn batch() -> Vec<Rating> {
        [(0, 1, 5), (1, 0, 2), (2, 2, 4), (0, 2, 1), (1, 1, 3)]
            .iter()
            .map(|&(user, item, value)| Rating { user, item, value })
            .collect()
    }

    fn check(select: fn(&mut NeuMf) -> &mut Tensor) {
        let cfg = NeuMfConfig {
            init_std: 0.5,
            ..NeuMfConfig::default()
        };
        let base = NeuMf::new(3, 3, &cfg, 3.0, 11).unwrap();
        let mut probe = base.clone();
        let point = select(&mut probe).value.clone();
        let err = grad_check(
            |w| {
                let mut m = base.clone();
                select(&mut m).value = w.clone();
                let loss = m.batch_loss(&batch())?;
                Ok((loss, select(&mut m).grad_or_zeros()))
            },
            &point,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn grad_check_gmf_embeddings() {
        check(|m| &mut m.gmf_user);
        check(|m| &mut m.gmf_item);
    }

    #[test]
    fn grad_check_mlp_embeddings_and_tower() {
        check(|m| &mut m.mlp_item);
        check(|m| &mut m.tower.layers[0].weight);
        check(|m| &mut m.head.weight);
    }

    #[test]
    fn training_lowers_rmse_and_scores_are_consistent() {
        let triples: Vec<(String, String, u8)> = (0..12)
            .flat_map(|u| {
                (0..8)
                    .filter(move |i| (u + i) % 3 != 0)
                    .map(move |i| (format!("u{u}"), format!("i{i}"), (1 + (u * i) % 5) as u8))
            })
            .collect();
        let train = RatingMatrix::from_triples(triples, 5).unwrap();
        let cfg = NeuMfConfig {
            epochs: 150,
            batch_size: 16,
            lr: 0.01,
            ..NeuMfConfig::default()
        };
        let m = NeuMf::fit(&train, &cfg, 2).unwrap();
        assert!(
            m.losses.last().unwrap() < &(0.8 * m.losses[0]),
            "{:?}",
            (m.losses[0], m.losses.last())
        );
        let s = m.score_user(3);
        assert!((s[5] - m.predict(3, 5)).abs() < 1e-12);
    }
}
