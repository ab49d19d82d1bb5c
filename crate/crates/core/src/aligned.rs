//! Columns of a table re-expressed on one shared probability grid.
//!
//! Every cell of column `j` is resampled onto the union of the column's
//! knots. Kernel-weighted barycenters of those cells live on the same grid,
//! so distances between data and prototypes reduce to a segment-wise sum
//! without further merging.

use crate::quantile::{segment_mean, union_grid, QuantileFunction};
use crate::table::DistributionalTable;

#[derive(Debug, Clone)]
pub(crate) struct AlignedColumn {
    pub probs: Vec<f64>,
    /// Segment widths, `probs[k + 1] - probs[k]`.
    pub widths: Vec<f64>,
    /// `n × len` values, row-major.
    pub values: Vec<f64>,
    pub means: Vec<f64>,
}

impl AlignedColumn {
    pub fn from_cells<'a>(cells: impl Iterator<Item = &'a QuantileFunction> + Clone) -> Self {
        let probs = union_grid(cells.clone());
        let widths = probs.windows(2).map(|w| w[1] - w[0]).collect();
        let mut values = Vec::new();
        let mut means = Vec::new();
        for q in cells {
            let v = q.resample(&probs);
            means.push(segment_mean(&probs, &v));
            values.extend(v);
        }
        Self {
            probs,
            widths,
            values,
            means,
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let u = self.len();
        &self.values[i * u..(i + 1) * u]
    }

    /// `∫ (a − b − shift)²` for two value vectors on this grid.
    #[inline]
    pub fn sq_distance(&self, a: &[f64], b: &[f64], shift: f64) -> f64 {
        let mut acc = 0.0;
        let mut d0 = a[0] - b[0] - shift;
        for k in 0..self.widths.len() {
            let d1 = a[k + 1] - b[k + 1] - shift;
            let h = self.widths[k];
            if h > 0.0 {
                acc += h * (d0 * d0 + d0 * d1 + d1 * d1);
            }
            d0 = d1;
        }
        acc / 3.0
    }

    /// Removes rows `n..` and returns their values and means.
    pub fn split_off_rows(&mut self, n: usize) -> (Vec<f64>, Vec<f64>) {
        let tail_values = self.values.split_off(n * self.len());
        let tail_means = self.means.split_off(n);
        (tail_values, tail_means)
    }

    pub fn to_quantile(&self, values: &[f64]) -> QuantileFunction {
        let mut v = values.to_vec();
        for k in 1..v.len() {
            if v[k] < v[k - 1] {
                v[k] = v[k - 1];
            }
        }
        QuantileFunction::new(self.probs.clone(), v)
            .expect("aligned values form a valid quantile function")
    }
}

pub(crate) fn align_table(table: &DistributionalTable) -> Vec<AlignedColumn> {
    (0..table.n_variables())
        .map(|j| AlignedColumn::from_cells(table.column(j)))
        .collect()
}
