use ndarray::Array2;

use crate::dataset::RatingMatrix;
use crate::diffcore::loss::softmax_nll;
use crate::error::{Error, Result};

/// Promotion loss: summed over users (rows of `scores`) and targets, the
/// negative log-softmax probability of each target.
pub fn generation_direct(scores: &Array2<f64>, targets: &[usize]) -> Result<f64> {
    softmax_nll(scores, targets).map(|(v, _)| v)
}

/// Demotion counterpart of [`generation_direct`].
pub fn generation_direct_nuke(scores: &Array2<f64>, targets: &[usize]) -> Result<f64> {
    generation_direct(scores, targets).map(|v| -v)
}

/// Squared reconstruction error of the soft ratings over the templates'
/// nonzero cells, with its gradient w.r.t. `soft`.
pub fn generation_indirect(soft: &Array2<f64>, templates: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if soft.dim() != templates.dim() {
        return Err(Error::shape(format!(
            "soft ratings {:?} vs templates {:?}",
            soft.dim(),
            templates.dim()
        )));
    }
    let mut grad = Array2::zeros(soft.raw_dim());
    let mut value = 0.0;
    ndarray::Zip::from(&mut grad).and(soft).and(templates).for_each(|g, &s, &t| {
        if t != 0.0 {
            value += (s - t) * (s - t);
            *g = 2.0 * (s - t);
        }
    });
    Ok((value, grad))
}

/// `mean log D(real) + mean log(1 - D(fake))` from probabilities.
pub fn discrimination(real_probs: &[f64], fake_probs: &[f64]) -> Result<f64> {
    if real_probs.is_empty() || fake_probs.is_empty() {
        return Err(Error::invalid("discrimination needs real and fake probabilities"));
    }
    let real = real_probs.iter().map(|p| p.ln()).sum::<f64>() / real_probs.len() as f64;
    let fake = fake_probs.iter().map(|p| (1.0 - p).ln()).sum::<f64>() / fake_probs.len() as f64;
    Ok(real + fake)
}

/// Users who rated every selected item at least 4.
pub fn in_segment_users(real: &RatingMatrix, selected: &[usize]) -> Result<Vec<usize>> {
    if let Some(&s) = selected.iter().find(|&&s| s >= real.num_items()) {
        return Err(Error::invalid(format!("selected item {s} outside {} items", real.num_items())));
    }
    let users: Vec<usize> = (0..real.num_users())
        .filter(|&u| selected.iter().all(|&s| real.get(u, s).is_some_and(|r| r >= 4)))
        .collect();
    if users.is_empty() {
        return Err(Error::Validation(
            "no user rated all selected items 4 or higher; choose different selected items".into(),
        ));
    }
    Ok(users)
}

/// [`generation_direct`] summed over the in-segment rows only.
pub fn in_segment_loss(scores: &Array2<f64>, targets: &[usize], segment: &[usize]) -> Result<f64> {
    if segment.is_empty() {
        return Err(Error::Validation(
            "empty in-segment user set; choose different selected items".into(),
        ));
    }
    if let Some(&u) = segment.iter().find(|&&u| u >= scores.nrows()) {
        return Err(Error::shape(format!("segment user {u} outside {} rows", scores.nrows())));
    }
    generation_direct(&scores.select(ndarray::Axis(0), segment), targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        let x = array![[5.0, 0.0, 3.0], [0.0, 1.0, 2.0]];
        assert_eq!(generation_indirect(&x, &x).unwrap().0, 0.0);
        assert!((discrimination(&[0.5], &[0.5]).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        let uniform = Array2::zeros((1, 4));
        assert!((generation_direct(&uniform, &[2]).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(
            generation_direct_nuke(&uniform, &[2]).unwrap(),
            -generation_direct(&uniform, &[2]).unwrap()
        );
    }

    #[test]
    fn indirect_ignores_cells_outside_templates() {
        let soft = array![[4.5, 2.0], [1.0, 3.0]];
        let tmpl = array![[5.0, 0.0], [0.0, 1.0]];
        let (v, g) = generation_indirect(&soft, &tmpl).unwrap();
        assert!((v - (0.25 + 4.0)).abs() < 1e-15);
        assert_eq!(g, array![[-1.0, 0.0], [0.0, 4.0]]);
    }

    fn segment_fixture() -> RatingMatrix {
        let t = [
            ("a", "s1", 5u8),
            ("a", "s2", 4),
            ("a", "x", 1),
            ("b", "s1", 5),
            ("b", "s2", 3),
            ("c", "s1", 4),
            ("c", "s2", 4),
        ];
        RatingMatrix::from_triples(t.iter().map(|&(u, i, r)| (u.to_string(), i.to_string(), r)), 5).unwrap()
    }

    #[test]
    fn segment_membership() {
        let m = segment_fixture();
        let s: Vec<usize> = ["s1", "s2"].iter().map(|i| m.item_index(i).unwrap()).collect();
        let seg = in_segment_users(&m, &s).unwrap();
        let ids: Vec<&str> = seg.iter().map(|&u| m.user_id(u)).collect();
        assert_eq!(ids, ["a", "c"]);
        let x = m.item_index("x").unwrap();
        let err = in_segment_users(&m, &[x]).unwrap_err().to_string();
        assert!(err.contains("different selected items"), "{err}");
    }

    #[test]
    fn segment_loss_restricts_the_sum() {
        let scores = array![[1.0, 2.0, 0.5], [0.0, -1.0, 3.0], [0.2, 0.2, 0.2]];
        let all = generation_direct(&scores, &[1]).unwrap();
        assert_eq!(in_segment_loss(&scores, &[1], &[0, 1, 2]).unwrap(), all);
        let single = in_segment_loss(&scores, &[1], &[1]).unwrap();
        let lse = (0f64.exp() + (-1f64).exp() + 3f64.exp()).ln();
        assert!((single - (lse + 1.0)).abs() < 1e-12);
        assert!(in_segment_loss(&scores, &[1], &[]).is_err());
    }

    proptest! {
        #[test]
        fn direct_loss_is_shift_invariant(
            rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..5),
            shifts in prop::collection::vec(-100.0f64..100.0, 5),
            target in 0usize..6,
        ) {
            let n = rows.len();
            let scores = Array2::from_shape_vec((n, 6), rows.concat()).unwrap();
            let mut shifted = scores.clone();
            for (u, mut row) in shifted.rows_mut().into_iter().enumerate() {
                row += shifts[u];
            }
            let a = generation_direct(&scores, &[target]).unwrap();
            let b = generation_direct(&shifted, &[target]).unwrap();
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }
}
