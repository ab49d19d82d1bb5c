//! Objects described by distributional variables.

use crate::error::{Error, Result};
use crate::quantile::{barycenter, QuantileFunction};
use crate::wasserstein::w2_squared;

/// `N` objects by `P` distributional variables, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionalTable {
    objects: Vec<String>,
    variables: Vec<String>,
    cells: Vec<QuantileFunction>,
    labels: Option<Vec<String>>,
}

impl DistributionalTable {
    pub fn new(
        objects: Vec<String>,
        variables: Vec<String>,
        cells: Vec<QuantileFunction>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if objects.is_empty() || variables.is_empty() {
            return Err(Error::InvalidConfig(
                "a table needs at least one object and one variable".into(),
            ));
        }
        let expected = objects.len() * variables.len();
        if cells.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: cells.len(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != objects.len() {
                return Err(Error::LengthMismatch {
                    left: objects.len(),
                    right: l.len(),
                });
            }
        }
        Ok(Self {
            objects,
            variables,
            cells,
            labels,
        })
    }

    /// Builds a table from rows of cells.
    pub fn from_rows(
        objects: Vec<String>,
        variables: Vec<String>,
        rows: Vec<Vec<QuantileFunction>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let p = variables.len();
        if let Some(row) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: row.len(),
            });
        }
        Self::new(
            objects,
            variables,
            rows.into_iter().flatten().collect(),
            labels,
        )
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn n_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != self.objects.len() {
                return Err(Error::LengthMismatch {
                    left: self.objects.len(),
                    right: l.len(),
                });
            }
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn cell(&self, i: usize, j: usize) -> &QuantileFunction {
        &self.cells[i * self.variables.len() + j]
    }

    pub fn row(&self, i: usize) -> &[QuantileFunction] {
        let p = self.variables.len();
        &self.cells[i * p..(i + 1) * p]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &QuantileFunction> + Clone + '_ {
        self.cells.iter().skip(j).step_by(self.variables.len())
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }
}

/// Fréchet standard deviation of column `j`:
/// `sqrt( (1/N) Σ_i d²_W(y_ij, ȳ_j) )`, with `ȳ_j` the barycenter of the column.
///
/// Returns 0 for a column of identical distributions.
pub fn variable_std(table: &DistributionalTable, j: usize) -> Result<f64> {
    if j >= table.n_variables() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: table.n_variables(),
        });
    }
    let column: Vec<&QuantileFunction> = table.column(j).collect();
    let n = column.len();
    let center = barycenter(&column, &vec![1.0; n])?;
    let ss: f64 = column.iter().map(|q| w2_squared(q, &center)).sum();
    Ok((ss / n as f64).sqrt())
}

/// Divides every column by its Fréchet standard deviation.
pub fn standardize(table: &DistributionalTable) -> Result<DistributionalTable> {
    let (scaled, _) = standardize_with_scales(table)?;
    Ok(scaled)
}

/// Like [`standardize`], also returning the per-variable divisors.
pub fn standardize_with_scales(
    table: &DistributionalTable,
) -> Result<(DistributionalTable, Vec<f64>)> {
    let p = table.n_variables();
    let mut scales = Vec::with_capacity(p);
    for j in 0..p {
        let s = variable_std(table, j)?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::ZeroDispersion {
                variable: table.variables[j].clone(),
            });
        }
        scales.push(s);
    }
    let cells = table
        .cells
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let s = scales[k % p];
            QuantileFunction::new(
                q.probs().to_vec(),
                q.values().iter().map(|v| v / s).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let out = DistributionalTable {
        objects: table.objects.clone(),
        variables: table.variables.clone(),
        cells,
        labels: table.labels.clone(),
    };
    Ok((out, scales))
}
