use std::ops::Range;

use ndarray::{s, Array2};

use crate::dataset::RatingMatrix;
use crate::error::{Error, Result};

/// Dense `X*` for surrogate training: rating values plus a 0/1 mask of
/// observed cells.
///
/// Fake rows may carry continuous values while a generator is optimising
/// them; the mask is what decides which cells count as observed, not the
/// value being non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingView {
    pub values: Array2<f64>,
    pub observed: Array2<f64>,
}

impl RatingView {
    pub fn from_matrix(matrix: &RatingMatrix) -> Self {
        let values = matrix.to_dense();
        let observed = values.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 });
        Self { values, observed }
    }

    /// Treats every non-zero value as observed.
    pub fn from_matrix_values(values: Array2<f64>) -> Self {
        let observed = values.mapv(|v| if v != 0.0 { 1.0 } else { 0.0 });
        Self { values, observed }
    }

    pub fn new(values: Array2<f64>, observed: Array2<f64>) -> Result<Self> {
        if values.dim() != observed.dim() {
            return Err(Error::shape(format!("view values {:?} vs mask {:?}", values.dim(), observed.dim())));
        }
        Ok(Self { values, observed })
    }

    pub fn num_users(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_items(&self) -> usize {
        self.values.ncols()
    }

    /// `concat(self, fake)`: appends fake rows below the existing ones.
    pub fn with_fake_rows(&self, values: &Array2<f64>, observed: &Array2<f64>) -> Result<Self> {
        if values.ncols() != self.num_items() || values.dim() != observed.dim() {
            return Err(Error::shape(format!(
                "fake rows {:?} / mask {:?} for {} items",
                values.dim(),
                observed.dim(),
                self.num_items()
            )));
        }
        let stack = |a: &Array2<f64>, b: &Array2<f64>| {
            ndarray::concatenate(ndarray::Axis(0), &[a.view(), b.view()]).expect("column counts checked")
        };
        Ok(Self {
            values: stack(&self.values, values),
            observed: stack(&self.observed, observed),
        })
    }

    /// Overwrites the values of an existing block of rows in place.
    pub fn set_rows(&mut self, rows: Range<usize>, values: &Array2<f64>) -> Result<()> {
        if rows.end > self.num_users() || values.dim() != (rows.len(), self.num_items()) {
            return Err(Error::shape(format!(
                "cannot write {:?} into rows {:?} of {:?}",
                values.dim(),
                rows,
                self.values.dim()
            )));
        }
        self.values.slice_mut(s![rows, ..]).assign(values);
        Ok(())
    }

    /// Per-cell weights: `w_obs` on observed cells and `w_miss` elsewhere.
    pub fn weights(&self, w_obs: f64, w_miss: f64) -> Array2<f64> {
        self.observed.mapv(|m| w_miss + (w_obs - w_miss) * m)
    }
}
