//! Flat binary snapshot of trained Leg-UP parameters.
//!
//! Layout (little endian): `b"LGUP"`, `u32` version, `u8` learner,
//! `u8` discretization, `f64` xi, `u32` tensor count, then per tensor a
//! `u32`-prefixed UTF-8 name, `u64` rows, `u64` cols and `rows * cols` f64
//! values in row-major order.

use std::io::{Read, Write};

use ndarray::Array2;

use super::discretize::Discretization;
use super::discriminator::Discriminator;
use super::generator::{Generator, PreferenceLearner};
use super::templates::TemplateBatch;
use crate::diffcore::{Activation, Dense, Mlp, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LGUP";
pub const VERSION: u32 = 1;

/// What a checkpoint restores: enough to regenerate the fake profiles.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub generator: Generator,
    pub discriminator: Option<Discriminator>,
    pub templates: Option<TemplateBatch>,
}

fn put_tensor(w: &mut impl Write, name: &str, a: &Array2<f64>) -> Result<()> {
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for v in a.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn get_tensor(r: &mut impl Read) -> Result<(String, Array2<f64>)> {
    let len = u32::from_le_bytes(read_array(r)?) as usize;
    let mut name = vec![0u8; len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name).map_err(|_| Error::Format("checkpoint tensor name is not UTF-8".into()))?;
    let rows = u64::from_le_bytes(read_array(r)?) as usize;
    let cols = u64::from_le_bytes(read_array(r)?) as usize;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format(format!("tensor {name} too large")))?;
    let mut data = Vec::with_capacity(count.min(1 << 24));
    for _ in 0..count {
        data.push(f64::from_le_bytes(read_array(r)?));
    }
    let a = Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::shape(e.to_string()))?;
    Ok((name, a))
}

fn mlp_tensors(prefix: &str, net: &Mlp) -> Vec<(String, Array2<f64>)> {
    net.layers
        .iter()
        .enumerate()
        .flat_map(|(k, l)| {
            [
                (format!("{prefix}.{k}.weight"), l.weight.value.clone()),
                (format!("{prefix}.{k}.bias"), l.bias.value.clone()),
            ]
        })
        .collect()
}

pub fn save(
    w: &mut impl Write,
    generator: &Generator,
    discriminator: Option<&Discriminator>,
    templates: Option<&TemplateBatch>,
) -> Result<()> {
    let mut tensors = vec![
        ("omega".to_string(), generator.omega.value.clone()),
        ("tau_logits".to_string(), generator.tau_logits.value.clone()),
    ];
    if let Some(ae) = &generator.ae {
        tensors.extend(mlp_tensors("ae", ae));
    }
    if let Some(d) = discriminator {
        tensors.extend(mlp_tensors("disc", &d.net));
    }
    if let Some(t) = templates {
        tensors.push(("templates.values".into(), t.values.clone()));
        let src = Array2::from_shape_fn((1, t.len()), |(_, k)| t.source_users[k] as f64);
        tensors.push(("templates.source".into(), src));
    }
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[generator.learner as u8, generator.discretization as u8])?;
    w.write_all(&generator.xi.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, a) in &tensors {
        put_tensor(w, name, a)?;
    }
    Ok(())
}

fn take_mlp(tensors: &mut Vec<(String, Array2<f64>)>, prefix: &str, acts: impl Fn(usize, usize) -> Activation) -> Result<Option<Mlp>> {
    let mut layers = Vec::new();
    loop {
        let k = layers.len();
        let (w, b) = (format!("{prefix}.{k}.weight"), format!("{prefix}.{k}.bias"));
        let (Some(wi), Some(bi)) = (tensors.iter().position(|t| t.0 == w), tensors.iter().position(|t| t.0 == b)) else {
            break;
        };
        let weight = tensors[wi].1.clone();
        let bias = tensors[bi].1.clone();
        tensors.retain(|t| t.0 != w && t.0 != b);
        if bias.dim() != (1, weight.ncols()) {
            return Err(Error::shape(format!(
                "{prefix}.{k}: bias {:?} for weight {:?}",
                bias.dim(),
                weight.dim()
            )));
        }
        layers.push(Dense::from_parts(Tensor::param(weight), Tensor::param(bias)));
    }
    if layers.is_empty() {
        return Ok(None);
    }
    let n = layers.len();
    Mlp::from_layers(layers, (0..n).map(|k| acts(k, n)).collect()).map(Some)
}

pub fn load(r: &mut impl Read) -> Result<Checkpoint> {
    if &read_array::<4>(r)? != MAGIC {
        return Err(Error::Format("not a Leg-UP checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let [learner, disc] = read_array::<2>(r)?;
    let learner = match learner {
        0 => PreferenceLearner::Simple,
        1 => PreferenceLearner::AutoEncoder,
        x => return Err(Error::Format(format!("unknown learner tag {x}"))),
    };
    let discretization = match disc {
        0 => Discretization::Learnable,
        1 => Discretization::Rounding,
        x => return Err(Error::Format(format!("unknown discretization tag {x}"))),
    };
    let xi = f64::from_le_bytes(read_array(r)?);
    let count = u32::from_le_bytes(read_array(r)?);
    let mut tensors = Vec::new();
    for _ in 0..count {
        tensors.push(get_tensor(r)?);
    }
    let mut take = |name: &str| -> Option<Array2<f64>> {
        let k = tensors.iter().position(|t| t.0 == name)?;
        Some(tensors.remove(k).1)
    };
    let missing = |name: &str| Error::Format(format!("checkpoint lacks tensor {name}"));
    let omega = take("omega").ok_or_else(|| missing("omega"))?;
    let tau_logits = take("tau_logits").ok_or_else(|| missing("tau_logits"))?;
    let templates = match (take("templates.values"), take("templates.source")) {
        (Some(values), Some(src)) => Some(TemplateBatch {
            values,
            source_users: src.iter().map(|&v| v as usize).collect(),
        }),
        _ => None,
    };
    let ae = take_mlp(&mut tensors, "ae", |k, _| if k == 0 { Activation::Relu } else { Activation::Tanh })?;
    let disc = take_mlp(&mut tensors, "disc", |k, n| {
        if k + 1 == n {
            Activation::Identity
        } else {
            Activation::Relu
        }
    })?;
    if learner == PreferenceLearner::AutoEncoder && ae.is_none() {
        return Err(missing("ae.0.weight"));
    }
    let generator = Generator {
        learner,
        discretization,
        xi,
        omega: Tensor::param(omega),
        ae,
        tau_logits: Tensor::param(tau_logits),
    };
    Ok(Checkpoint {
        generator,
        discriminator: disc.map(|net| Discriminator { net }),
        templates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip() {
        let mut g = Generator::new(PreferenceLearner::AutoEncoder, Discretization::Learnable, 6, 3, 4, 0.1, 5).unwrap();
        g.tau_logits.value[[1, 2]] = 0.75;
        g.omega.value[[0, 3]] = -2.0;
        let d = Discriminator::new(6, &[5, 2], 1).unwrap();
        let t = TemplateBatch {
            values: array![[5.0, 0.0, 1.0, 0.0, 0.0, 2.0], [0.0; 6], [3.0, 3.0, 0.0, 0.0, 4.0, 0.0]],
            source_users: vec![4, 0, 9],
        };
        let mut buf = Vec::new();
        save(&mut buf, &g, Some(&d), Some(&t)).unwrap();
        assert_eq!(&buf[..4], b"LGUP");
        let c = load(&mut buf.as_slice()).unwrap();
        assert_eq!(c.generator.tau_logits.value, g.tau_logits.value);
        assert_eq!(c.generator.omega.value, g.omega.value);
        assert_eq!(c.generator.preferences(&t).unwrap(), g.preferences(&t).unwrap());
        assert_eq!(c.generator.hard_ratings(&t).unwrap(), g.hard_ratings(&t).unwrap());
        assert_eq!(
            c.discriminator.unwrap().probabilities(&t.values).unwrap(),
            d.probabilities(&t.values).unwrap()
        );
        assert_eq!(c.templates.unwrap(), t);

        let mut buf2 = Vec::new();
        let s = Generator::new(PreferenceLearner::Simple, Discretization::Rounding, 6, 3, 4, 0.05, 5).unwrap();
        save(&mut buf2, &s, None, None).unwrap();
        let c = load(&mut buf2.as_slice()).unwrap();
        assert!(c.discriminator.is_none() && c.generator.ae.is_none() && c.templates.is_none());
        assert_eq!(
            (c.generator.learner, c.generator.discretization, c.generator.xi),
            (PreferenceLearner::Simple, Discretization::Rounding, 0.05)
        );
    }

    #[test]
    fn rejects_foreign_bytes() {
        assert!(load(&mut &b"NOPE\x01\x00\x00\x00"[..]).is_err());
        let mut buf = Vec::new();
        let g = Generator::new(PreferenceLearner::Simple, Discretization::Learnable, 2, 1, 1, 0.1, 0).unwrap();
        save(&mut buf, &g, None, None).unwrap();
        buf[4] = 9;
        assert!(load(&mut buf.as_slice()).is_err());
        buf[4] = 1;
        buf.truncate(buf.len() - 3);
        assert!(load(&mut buf.as_slice()).is_err());
    }
}
