use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use crate::dataset::RatingMatrix;
use crate::error::{Error, Result};

/// Leading principal directions of the rows of `x` (no centering applied
/// here): eigenvalues in decreasing order and the matching unit directions
/// in column space, one column each.
///
/// Works on whichever Gram matrix is smaller, `x x^T` or `x^T x`.
pub fn principal_directions(x: &Array2<f64>, k: usize) -> (Vec<f64>, Array2<f64>) {
    let (n, m) = x.dim();
    let k = k.min(n).min(m);
    let row_side = n <= m;
    let gram = if row_side { x.dot(&x.t()) } else { x.t().dot(x) };
    let d = gram.nrows();
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, gram.as_slice().expect("standard layout")));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(k);
    let mut dirs = Array2::zeros((m, k));
    for (j, &c) in order.iter().take(k).enumerate() {
        let lambda = eig.eigenvalues[c].max(0.0);
        let vec = Array1::from_iter(eig.eigenvectors.column(c).iter().copied());
        let mut dir = if row_side {
            // v = X^T u / sqrt(lambda)
            if lambda > 0.0 {
                x.t().dot(&vec) / lambda.sqrt()
            } else {
                Array1::zeros(m)
            }
        } else {
            vec
        };
        // deterministic sign: largest-magnitude entry positive
        let pivot = dir.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            dir.mapv_inplace(|v| -v);
        }
        dirs.column_mut(j).assign(&dir);
        values.push(lambda);
    }
    (values, dirs)
}

fn zscore_rows(matrix: &RatingMatrix) -> Array2<f64> {
    let mut z = matrix.to_dense();
    for mut row in z.rows_mut() {
        let mean = row.mean().unwrap_or(0.0);
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64;
        let sd = var.sqrt();
        row.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
    z
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Flagged user indices, ascending.
    pub flagged: Vec<usize>,
    /// Per-user sum of squared loadings on the leading components.
    pub scores: Vec<f64>,
    /// Components actually used (reduced when the covariance is degenerate).
    pub components: usize,
}

/// PCA detector over users-as-variables: z-score every user row, take the
/// leading principal components of the user-user covariance, and flag the
/// `num_flag` users with the smallest squared loadings on them.
pub fn detect(matrix: &RatingMatrix, num_flag: usize, components: usize) -> Result<Detection> {
    let n = matrix.num_users();
    if num_flag > n {
        return Err(Error::invalid(format!("cannot flag {num_flag} of {n} users")));
    }
    if components == 0 {
        return Err(Error::invalid("detector needs at least one component"));
    }
    if num_flag == 0 {
        return Ok(Detection {
            flagged: Vec::new(),
            scores: vec![0.0; n],
            components: 0,
        });
    }
    // Users are the variables and items the observations: the user-user
    // covariance is Z Z^T, and a user's loading on component j is the
    // user-space eigenvector entry (Z v_j)_u / sqrt(lambda_j).
    let z = zscore_rows(matrix);
    let (values, dirs) = principal_directions(&z, components);
    let top = values.first().copied().unwrap_or(0.0);
    let rank = values.iter().filter(|&&l| l > top * 1e-10 && l > 0.0).count();
    let used = components.min(rank);
    if used < components {
        log::warn!("covariance has rank {rank}; using {used} of {components} components");
    }
    if used == 0 {
        return Err(Error::Validation("all user rows are constant; nothing to decompose".into()));
    }
    let coeffs = z.dot(&dirs.slice(ndarray::s![.., ..used]));
    let scores: Vec<f64> = coeffs
        .axis_iter(Axis(0))
        .map(|row| row.iter().zip(&values).map(|(c, l)| c * c / l).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut flagged = order[..num_flag].to_vec();
    flagged.sort_unstable();
    Ok(Detection {
        flagged,
        scores,
        components: used,
    })
}

/// `(|F & T| / |F|, |F & T| / |T|)`, with 0 for an empty denominator.
pub fn precision_recall(flagged: &[usize], truth: &[usize]) -> (f64, f64) {
    let truth: std::collections::BTreeSet<usize> = truth.iter().copied().collect();
    let flagged: std::collections::BTreeSet<usize> = flagged.iter().copied().collect();
    let hit = flagged.intersection(&truth).count() as f64;
    let p = if flagged.is_empty() { 0.0 } else { hit / flagged.len() as f64 };
    let r = if truth.is_empty() { 0.0 } else { hit / truth.len() as f64 };
    (p, r)
}

/// Coordinates of every user on the first two principal components of the
/// column-centred rating rows.
pub fn projection(matrix: &RatingMatrix) -> Result<Array2<f64>> {
    if matrix.num_users() < 2 {
        return Err(Error::invalid("projection needs at least two users"));
    }
    let mut x = matrix.to_dense();
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    x -= &mean;
    let (_, dirs) = principal_directions(&x, 2);
    let mut coords = Array2::zeros((matrix.num_users(), 2));
    coords.slice_mut(ndarray::s![.., ..dirs.ncols()]).assign(&x.dot(&dirs));
    Ok(coords)
}

/// Writes `user_id,x,y,is_fake` for every user.
pub fn export_projection<W: Write>(matrix: &RatingMatrix, is_fake: &[bool], out: W) -> Result<Array2<f64>> {
    if is_fake.len() != matrix.num_users() {
        return Err(Error::shape(format!("{} labels for {} users", is_fake.len(), matrix.num_users())));
    }
    let coords = projection(matrix)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "x", "y", "is_fake"])?;
    for (u, fake) in is_fake.iter().enumerate() {
        w.write_record([
            matrix.user_id(u).to_string(),
            coords[[u, 0]].to_string(),
            coords[[u, 1]].to_string(),
            (*fake as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    /// Four taste groups of real users plus ten copies of one flat profile
    /// that only spikes on a single item.
    pub(crate) fn clone_fixture() -> RatingMatrix {
        let mut rng = crate::seed::rng(11);
        let mut t = Vec::new();
        for u in 0..180 {
            let g = u % 4;
            for i in 0..60 {
                if rng.random_bool(0.9) {
                    let base: f64 = if i % 4 == g { 4.5 } else { 1.5 };
                    let r = (base + rng.random_range(-0.8..0.8)).round().clamp(1.0, 5.0) as u8;
                    t.push((format!("u{u}"), format!("i{i}"), r));
                }
            }
        }
        for c in 0..10 {
            for i in 0..60 {
                t.push((format!("clone{c}"), format!("i{i}"), if i == 7 { 5 } else { 3 }));
            }
        }
        RatingMatrix::from_triples(t, 5).unwrap()
    }

    #[test]
    fn flags_the_clones() {
        let m = clone_fixture();
        let truth: Vec<usize> = (0..m.num_users()).filter(|&u| m.user_id(u).starts_with("clone")).collect();
        let d = detect(&m, 10, 3).unwrap();
        let (p, r) = precision_recall(&d.flagged, &truth);
        assert_eq!(p, r);
        assert!(r >= 0.8, "recall {r}");
    }

    #[test]
    fn degenerate_inputs() {
        let m = clone_fixture();
        assert!(detect(&m, 0, 3).unwrap().flagged.is_empty());
        assert_eq!(
            detect(&m, m.num_users(), 3).unwrap().flagged,
            (0..m.num_users()).collect::<Vec<_>>()
        );
        assert!(detect(&m, m.num_users() + 1, 3).is_err());
        // two distinct rows: rank 1 after z-scoring, k is reduced
        let t = [
            ("a", "x", 1u8),
            ("a", "y", 5),
            ("b", "x", 5),
            ("b", "y", 1),
            ("c", "x", 1),
            ("c", "y", 5),
        ];
        let small = RatingMatrix::from_triples(t.iter().map(|&(u, i, r)| (u.to_string(), i.to_string(), r)), 5).unwrap();
        assert_eq!(detect(&small, 1, 3).unwrap().components, 1);
    }

    #[test]
    fn precision_recall_cases() {
        assert_eq!(precision_recall(&[1, 2], &[1, 2]), (1.0, 1.0));
        assert_eq!(precision_recall(&[1, 2], &[3]), (0.0, 0.0));
        assert_eq!(precision_recall(&[], &[3]), (0.0, 0.0));
        assert_eq!(precision_recall(&[1, 2, 3, 4], &[2]), (0.25, 1.0));
        let mut rng = crate::seed::rng(3);
        for _ in 0..200 {
            let n = rng.random_range(1..12);
            let f = rand::seq::index::sample(&mut rng, 30, n).into_vec();
            let t = rand::seq::index::sample(&mut rng, 30, n).into_vec();
            let (p, r) = precision_recall(&f, &t);
            assert_eq!(p, r);
        }
    }

    #[test]
    fn projection_export() {
        let m = clone_fixture();
        let fake: Vec<bool> = (0..m.num_users()).map(|u| m.user_id(u).starts_with("clone")).collect();
        let mut buf = Vec::new();
        let coords = export_projection(&m, &fake, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("user_id,x,y,is_fake"));
        assert_eq!(lines.count(), m.num_users());
        let clones: Vec<usize> = (0..m.num_users()).filter(|&u| fake[u]).collect();
        for &c in &clones[1..] {
            assert_eq!(coords.row(c), coords.row(clones[0]));
        }
    }

    #[test]
    fn directions_match_either_gram_route() {
        let mut rng = crate::seed::rng(8);
        let wide = Array2::from_shape_fn((4, 9), |_| rng.random_range(-1.0..1.0));
        let tall = wide.t().to_owned();
        let (lw, dw) = principal_directions(&wide, 2);
        let (lt, _) = principal_directions(&tall, 2);
        for j in 0..2 {
            assert!((lw[j] - lt[j]).abs() < 1e-10);
            let v = dw.column(j);
            assert!((v.dot(&v) - 1.0).abs() < 1e-10);
            // eigen-equation X^T X v = lambda v
            let lhs = wide.t().dot(&wide.dot(&v));
            let err = (&lhs - &(&v * lw[j])).mapv(f64::abs).sum();
            assert!(err < 1e-9, "{err}");
        }
    }
}
