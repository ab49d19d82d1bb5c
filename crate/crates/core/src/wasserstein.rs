//! Exact squared L2 Wasserstein distances between quantile functions.
//!
//! For one-dimensional distributions `d²_W(a, b) = ∫₀¹ (Q_a − Q_b)² dp`.
//! After registration both functions are linear on the same segments, so
//! the integral has a closed form per segment. The distance splits into a
//! mean term `(ā − b̄)²` and a dispersion term `d²_W(a − ā, b − b̄)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{segment_sq_integral, union_grid, QuantileFunction};
use crate::topology::{kernel, MapGrid};
use crate::weights::WeightMatrix;

/// Mean and dispersion parts of a squared Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceComponents {
    /// Squared difference of the means.
    pub mean: f64,
    /// Squared distance between the centered quantile functions.
    pub dispersion: f64,
}

impl DistanceComponents {
    pub fn total(&self) -> f64 {
        self.mean + self.dispersion
    }
}

/// `∫ (a(p) − b(p) − shift)² dp` over the knots of the registered pair.
fn registered_sq(a: &QuantileFunction, b: &QuantileFunction, shift: f64) -> f64 {
    if a.probs() == b.probs() {
        let diff: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x - y - shift)
            .collect();
        return segment_sq_integral(a.probs(), &diff);
    }
    let grid = union_grid([a, b]);
    let va = a.resample(&grid);
    let vb = b.resample(&grid);
    let diff: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x - y - shift).collect();
    segment_sq_integral(&grid, &diff)
}

pub fn w2_squared(a: &QuantileFunction, b: &QuantileFunction) -> f64 {
    registered_sq(a, b, 0.0)
}

pub fn decompose(a: &QuantileFunction, b: &QuantileFunction) -> DistanceComponents {
    let shift = a.mean() - b.mean();
    DistanceComponents {
        mean: shift * shift,
        dispersion: registered_sq(a, b, shift),
    }
}

fn check_rows(yi: &[QuantileFunction], gm: &[QuantileFunction]) -> Result<()> {
    if yi.len() != gm.len() {
        return Err(Error::DimensionMismatch {
            expected: yi.len(),
            found: gm.len(),
        });
    }
    Ok(())
}

/// `Σ_j d²_W(y_ij, g_mj)`.
pub fn mv_w2_squared(yi: &[QuantileFunction], gm: &[QuantileFunction]) -> Result<f64> {
    check_rows(yi, gm)?;
    Ok(yi.iter().zip(gm).map(|(a, b)| w2_squared(a, b)).sum())
}

/// Weighted distance `Σ_j (λ_{·j,M} dM_j + λ_{·j,V} dV_j)`, using the weights
/// of neuron `m` for cluster-wise schemes.
pub fn adaptive_distance(
    yi: &[QuantileFunction],
    gm: &[QuantileFunction],
    weights: &WeightMatrix,
    m: usize,
) -> Result<f64> {
    check_rows(yi, gm)?;
    if weights.variables() != yi.len() {
        return Err(Error::SchemeMismatch(format!(
            "weights cover {} variables, rows have {}",
            weights.variables(),
            yi.len()
        )));
    }
    if weights.scheme().is_cluster_wise() && m >= weights.neurons() {
        return Err(Error::IndexOutOfRange {
            index: m,
            len: weights.neurons(),
        });
    }
    Ok(yi
        .iter()
        .zip(gm)
        .enumerate()
        .map(|(j, (a, b))| {
            let c = decompose(a, b);
            let (lm, lv) = weights.component_weights(m, j);
            lm * c.mean + lv * c.dispersion
        })
        .sum())
}

/// Kernel-smoothed distance of `yi` to the winner neuron `m`:
/// `Σ_h K^T(d(m, h)) · dist(y_i, g_h)`, where `dist` is the plain or the
/// adaptive distance depending on `weights`.
///
/// `prototypes[h]` is the row of neuron `h`.
pub fn generalized_distance(
    yi: &[QuantileFunction],
    m: usize,
    prototypes: &[&[QuantileFunction]],
    grid: &MapGrid,
    radius: f64,
    weights: Option<&WeightMatrix>,
) -> Result<f64> {
    if prototypes.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: prototypes.len(),
        });
    }
    let mut acc = 0.0;
    for (h, gh) in prototypes.iter().enumerate() {
        let k = kernel(grid.neuron_distance(m, h)?, radius)?;
        let d = match weights {
            Some(w) => adaptive_distance(yi, gh, w, h)?,
            None => mv_w2_squared(yi, gh)?,
        };
        acc += k * d;
    }
    Ok(acc)
}
