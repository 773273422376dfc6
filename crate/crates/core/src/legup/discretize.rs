//! Threshold-based discretization of preferences in (0, 1) into 1..=5
//! ratings, and the piecewise-linear surrogate for the step function that
//! lets gradients flow through it.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::diffcore::softmax_rows;

/// Number of rating levels; `LEVELS - 1` interior thresholds.
pub const LEVELS: usize = 5;

/// Fixed cumulative thresholds of the plain rounding rule.
pub const ROUNDING_THRESHOLDS: [f64; LEVELS - 1] = [0.2, 0.4, 0.6, 0.8];

pub const DEFAULT_XI: f64 = 0.1;

/// The step function: 1 when `x > tau`.
pub fn heaviside(x: f64, tau: f64) -> f64 {
    if x > tau {
        1.0
    } else {
        0.0
    }
}

struct Pieces {
    tau_m: f64,
    /// `d tau_m / d tau`.
    dtau_m: f64,
    lo: f64,
    hi: f64,
}

fn pieces(tau: f64) -> Pieces {
    let (tau_m, dtau_m) = if tau <= 0.5 { (tau, 1.0) } else { (1.0 - tau, -1.0) };
    Pieces {
        tau_m,
        dtau_m,
        lo: tau - tau_m / 2.0,
        hi: tau + tau_m / 2.0,
    }
}

/// Three-segment linear stand-in for the step function, continuous on
/// [0, 1], with `H'(0) = 0`, `H'(tau) = 0.5` and `H'(1) = 1`. Outside the
/// central band of half-width `tau_m / 2` the slope is `xi`-flat.
pub fn heaviside_soft(x: f64, tau: f64, xi: f64) -> f64 {
    let p = pieces(tau);
    if x < p.lo {
        x * xi / p.lo
    } else if x > p.hi {
        xi * (x - p.hi) / (1.0 - p.hi) + 1.0 - xi
    } else {
        (x - tau) * (1.0 - 2.0 * xi) / p.tau_m + 0.5
    }
}

/// `(dH'/dx, dH'/dtau)`.
pub fn heaviside_soft_grad(x: f64, tau: f64, xi: f64) -> (f64, f64) {
    let p = pieces(tau);
    if x < p.lo {
        let dlo = 1.0 - p.dtau_m / 2.0;
        (xi / p.lo, -x * xi / (p.lo * p.lo) * dlo)
    } else if x > p.hi {
        let dhi = 1.0 + p.dtau_m / 2.0;
        let span = 1.0 - p.hi;
        (xi / span, xi * (x - 1.0) / (span * span) * dhi)
    } else {
        let slope = 1.0 - 2.0 * xi;
        (slope / p.tau_m, slope * (-p.tau_m - (x - tau) * p.dtau_m) / (p.tau_m * p.tau_m))
    }
}

/// Row-softmax of `A x 5` logits.
pub fn tau_from_logits(logits: &Array2<f64>) -> Array2<f64> {
    softmax_rows(logits)
}

/// Interior cumulative thresholds `tau_1, tau_1 + tau_2, ...` of one row.
pub fn cumulative(tau_row: &[f64]) -> [f64; LEVELS - 1] {
    let mut out = [0.0; LEVELS - 1];
    let mut acc = 0.0;
    for (k, slot) in out.iter_mut().enumerate() {
        acc += tau_row[k];
        *slot = acc;
    }
    out
}

/// `1 + #{k : x > cum_k}`: rating `r` iff `x` falls in the `r`-th segment.
pub fn hard_rating(x: f64, cum: &[f64; LEVELS - 1]) -> u8 {
    1 + cum.iter().filter(|&&c| x > c).count() as u8
}

/// `1 + sum_k H'(x, cum_k)` with its derivative in `x` and in each `cum_k`.
pub fn soft_rating(x: f64, cum: &[f64; LEVELS - 1], xi: f64) -> (f64, f64, [f64; LEVELS - 1]) {
    let mut value = 1.0;
    let mut dx = 0.0;
    let mut dcum = [0.0; LEVELS - 1];
    for (k, &c) in cum.iter().enumerate() {
        value += heaviside_soft(x, c, xi);
        let (gx, gc) = heaviside_soft_grad(x, c, xi);
        dx += gx;
        dcum[k] = gc;
    }
    (value, dx, dcum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    /// Per-fake-user thresholds learned through `H'`.
    #[default]
    Learnable,
    /// Fixed uniform thresholds.
    Rounding,
}
