//! Dense evaluation of the map criterion on aligned columns.
//!
//! The engine keeps, for a fixed table and grid, the prototypes on the
//! column grids and the `N × M × P` tensor of distance components. All
//! training steps and the state-dependent validity indexes are computed from
//! it.

use crate::aligned::{align_table, AlignedColumn};
use crate::error::{Error, Result};
use crate::table::DistributionalTable;
use crate::topology::MapGrid;
use crate::train::Prototypes;
use crate::weights::{Scheme, WeightMatrix};

/// Relative floor applied to weighting-step dispersions.
pub const DISPERSION_FLOOR: f64 = 1e-12;

pub(crate) struct Engine<'g> {
    grid: &'g MapGrid,
    cols: Vec<AlignedColumn>,
    n: usize,
    m: usize,
    p: usize,
    /// Per variable: `M × U_j` prototype values.
    protos: Vec<Vec<f64>>,
    proto_means: Vec<Vec<f64>>,
    /// `[(i * M + h) * P + j] -> (dM, dV)`.
    comps: Vec<(f64, f64)>,
    radius: f64,
    kernel: Vec<f64>,
}

impl<'g> Engine<'g> {
    pub fn new(table: &DistributionalTable, grid: &'g MapGrid) -> Self {
        let cols = align_table(table);
        Self::from_columns(cols, table.n_objects(), grid)
    }

    fn from_columns(cols: Vec<AlignedColumn>, n: usize, grid: &'g MapGrid) -> Self {
        let m = grid.len();
        let p = cols.len();
        let protos = cols.iter().map(|c| vec![0.0; m * c.len()]).collect();
        Self {
            grid,
            cols,
            n,
            m,
            p,
            protos,
            proto_means: vec![vec![0.0; m]; p],
            comps: vec![(0.0, 0.0); n * m * p],
            radius: f64::NAN,
            kernel: Vec::new(),
        }
    }

    /// Engine over data plus externally supplied prototypes, aligned on the
    /// union of both knot sets.
    pub fn with_prototypes(
        table: &DistributionalTable,
        grid: &'g MapGrid,
        prototypes: &Prototypes,
    ) -> Result<Self> {
        if prototypes.neurons() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: prototypes.neurons(),
            });
        }
        if prototypes.variables() != table.n_variables() {
            return Err(Error::DimensionMismatch {
                expected: table.n_variables(),
                found: prototypes.variables(),
            });
        }
        let n = table.n_objects();
        let mut cols = Vec::with_capacity(table.n_variables());
        let mut tails = Vec::with_capacity(table.n_variables());
        for j in 0..table.n_variables() {
            let mut col = AlignedColumn::from_cells(table.column(j).chain(prototypes.column(j)));
            tails.push(col.split_off_rows(n));
            cols.push(col);
        }
        let mut engine = Self::from_columns(cols, n, grid);
        for (j, (values, means)) in tails.into_iter().enumerate() {
            engine.protos[j] = values;
            engine.proto_means[j] = means;
        }
        engine.update_components();
        Ok(engine)
    }

    pub fn set_radius(&mut self, radius: f64) -> Result<()> {
        self.kernel = self.grid.kernel_matrix(radius)?;
        self.radius = radius;
        Ok(())
    }

    /// Copies data rows into the prototypes.
    pub fn seed_prototypes(&mut self, rows: &[usize]) {
        for (j, col) in self.cols.iter().enumerate() {
            let u = col.len();
            for (h, &i) in rows.iter().enumerate() {
                self.protos[j][h * u..(h + 1) * u].copy_from_slice(col.row(i));
                self.proto_means[j][h] = col.means[i];
            }
        }
        self.update_components();
    }

    pub fn update_components(&mut self) {
        let (m, p) = (self.m, self.p);
        for i in 0..self.n {
            for j in 0..p {
                let col = &self.cols[j];
                let u = col.len();
                let y = col.row(i);
                let ym = col.means[i];
                for h in 0..m {
                    let g = &self.protos[j][h * u..(h + 1) * u];
                    let shift = ym - self.proto_means[j][h];
                    let dv = col.sq_distance(y, g, shift).max(0.0);
                    self.comps[(i * m + h) * p + j] = (shift * shift, dv);
                }
            }
        }
    }

    /// `N × M` matrix of plain or adaptive distances `d(y_i, g_h)`.
    pub fn base_distances(&self, weights: Option<&WeightMatrix>) -> Vec<f64> {
        let (m, p) = (self.m, self.p);
        let mut out = vec![0.0; self.n * m];
        for i in 0..self.n {
            for h in 0..m {
                let base = (i * m + h) * p;
                let mut acc = 0.0;
                for j in 0..p {
                    let (dm, dv) = self.comps[base + j];
                    match weights {
                        Some(w) => {
                            let (lm, lv) = w.component_weights(h, j);
                            acc += lm * dm + lv * dv;
                        }
                        None => acc += dm + dv,
                    }
                }
                out[i * m + h] = acc;
            }
        }
        out
    }

    /// `N × M` matrix of generalized distances `Σ_h K(d(r, h)) d(y_i, g_h)`.
    pub fn smooth(&self, base: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; self.n * m];
        for i in 0..self.n {
            let row = &base[i * m..(i + 1) * m];
            for r in 0..m {
                let k = &self.kernel[r * m..(r + 1) * m];
                out[i * m + r] = k.iter().zip(row).map(|(a, b)| a * b).sum();
            }
        }
        out
    }

    pub fn generalized(&self, weights: Option<&WeightMatrix>) -> Vec<f64> {
        self.smooth(&self.base_distances(weights))
    }

    pub fn criterion(&self, weights: Option<&WeightMatrix>, assignment: &[usize]) -> f64 {
        let g = self.generalized(weights);
        assignment
            .iter()
            .enumerate()
            .map(|(i, &r)| g[i * self.m + r])
            .sum()
    }

    /// Best matching unit of every object; ties go to the lowest index.
    pub fn assign(&self, weights: Option<&WeightMatrix>) -> Vec<usize> {
        let g = self.generalized(weights);
        (0..self.n)
            .map(|i| argmin(&g[i * self.m..(i + 1) * self.m]))
            .collect()
    }

    /// Kernel weights `K(d(r, m))` rescaled per target neuron `m` so that the
    /// largest weight over occupied neurons `r` is one. Representation and
    /// cluster-wise weighting are invariant to this per-neuron scaling, and
    /// it keeps far neurons from underflowing to zero mass.
    fn stabilized_kernel(&self, counts: &[usize]) -> Vec<f64> {
        let m = self.m;
        let two_t2 = 2.0 * self.radius * self.radius;
        let mut out = vec![0.0; m * m];
        for h in 0..m {
            let dmin2 = (0..m)
                .filter(|&r| counts[r] > 0)
                .map(|r| {
                    let d = self.grid.distance_unchecked(r, h);
                    d * d
                })
                .fold(f64::INFINITY, f64::min);
            for r in 0..m {
                if counts[r] > 0 {
                    let d = self.grid.distance_unchecked(r, h);
                    out[r * m + h] = (-(d * d - dmin2) / two_t2).exp();
                }
            }
        }
        out
    }

    fn counts(&self, assignment: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.m];
        for &r in assignment {
            c[r] += 1;
        }
        c
    }

    /// Kernel-weighted barycenters for every neuron and variable.
    pub fn represent(&mut self, assignment: &[usize]) -> Result<()> {
        let m = self.m;
        let counts = self.counts(assignment);
        let ks = self.stabilized_kernel(&counts);
        for j in 0..self.p {
            let col = &self.cols[j];
            let u = col.len();
            // Per-neuron sums of member rows.
            let mut sums = vec![0.0; m * u];
            let mut mean_sums = vec![0.0; m];
            for (i, &r) in assignment.iter().enumerate() {
                for (s, v) in sums[r * u..(r + 1) * u].iter_mut().zip(col.row(i)) {
                    *s += v;
                }
                mean_sums[r] += col.means[i];
            }
            let protos = &mut self.protos[j];
            let means = &mut self.proto_means[j];
            for h in 0..m {
                let mut mass = 0.0;
                let target = &mut protos[h * u..(h + 1) * u];
                target.fill(0.0);
                let mut mean_acc = 0.0;
                for r in 0..m {
                    if counts[r] == 0 {
                        continue;
                    }
                    let w = ks[r * m + h];
                    if w == 0.0 {
                        continue;
                    }
                    mass += w * counts[r] as f64;
                    mean_acc += w * mean_sums[r];
                    for (t, s) in target.iter_mut().zip(&sums[r * u..(r + 1) * u]) {
                        *t += w * s;
                    }
                }
                if mass.is_nan() || mass <= 0.0 {
                    return Err(Error::ZeroKernelMass { neuron: h });
                }
                for t in target.iter_mut() {
                    *t /= mass;
                }
                for k in 1..u {
                    if target[k] < target[k - 1] {
                        target[k] = target[k - 1];
                    }
                }
                means[h] = mean_acc / mass;
            }
        }
        self.update_components();
        Ok(())
    }

    /// Optimal relevance weights for the current prototypes and partition.
    /// Returns the weights and the number of dispersions that hit the floor.
    pub fn weigh(&self, scheme: Scheme, assignment: &[usize]) -> (WeightMatrix, usize) {
        let (m, p) = (self.m, self.p);
        let kernel: Vec<f64> = if scheme.is_cluster_wise() {
            self.stabilized_kernel(&self.counts(assignment))
        } else {
            self.kernel.clone()
        };
        // Kernel-weighted dispersions per neuron and variable component.
        let mut sm = vec![0.0; m * p];
        let mut sv = vec![0.0; m * p];
        for (i, &r) in assignment.iter().enumerate() {
            for h in 0..m {
                let k = kernel[r * m + h];
                if k == 0.0 {
                    continue;
                }
                let base = (i * m + h) * p;
                for j in 0..p {
                    let (dm, dv) = self.comps[base + j];
                    sm[h * p + j] += k * dm;
                    sv[h * p + j] += k * dv;
                }
            }
        }
        let mut clamped = 0;
        let values = match scheme {
            Scheme::GlobalVariable => {
                let mut d: Vec<f64> = (0..p)
                    .map(|j| (0..m).map(|h| sm[h * p + j] + sv[h * p + j]).sum())
                    .collect();
                clamped += product_to_one(&mut d);
                d
            }
            Scheme::GlobalComponent => {
                let mut d: Vec<f64> = (0..p)
                    .flat_map(|j| {
                        let a: f64 = (0..m).map(|h| sm[h * p + j]).sum();
                        let b: f64 = (0..m).map(|h| sv[h * p + j]).sum();
                        [a, b]
                    })
                    .collect();
                clamped += product_to_one(&mut d);
                d
            }
            Scheme::ClusterVariable => {
                let mut out = Vec::with_capacity(m * p);
                for h in 0..m {
                    let mut d: Vec<f64> = (0..p).map(|j| sm[h * p + j] + sv[h * p + j]).collect();
                    clamped += product_to_one(&mut d);
                    out.extend(d);
                }
                out
            }
            Scheme::ClusterComponent => {
                let mut out = Vec::with_capacity(2 * m * p);
                for h in 0..m {
                    let mut d: Vec<f64> = (0..p)
                        .flat_map(|j| [sm[h * p + j], sv[h * p + j]])
                        .collect();
                    clamped += product_to_one(&mut d);
                    out.extend(d);
                }
                out
            }
        };
        (WeightMatrix::from_raw(scheme, m, p, values), clamped)
    }

    pub fn prototypes(&self) -> Prototypes {
        let mut cells = Vec::with_capacity(self.m * self.p);
        for h in 0..self.m {
            for j in 0..self.p {
                let u = self.cols[j].len();
                cells.push(self.cols[j].to_quantile(&self.protos[j][h * u..(h + 1) * u]));
            }
        }
        Prototypes::from_cells(self.m, self.p, cells)
    }
}

/// Replaces dispersions `d` in place by `λ_k = (∏ d)^(1/n) / d_k`.
///
/// Dispersions below `DISPERSION_FLOOR × Σ d` are raised to that floor; a
/// group with no dispersion at all gets unit weights. Returns the number of
/// floored entries.
pub(crate) fn product_to_one(d: &mut [f64]) -> usize {
    let total: f64 = d.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        let n = d.len();
        d.fill(1.0);
        return n;
    }
    let floor = DISPERSION_FLOOR * total;
    let mut clamped = 0;
    for v in d.iter_mut() {
        if *v < floor {
            *v = floor;
            clamped += 1;
        }
    }
    let mean_log = d.iter().map(|v| v.ln()).sum::<f64>() / d.len() as f64;
    for v in d.iter_mut() {
        *v = (mean_log - v.ln()).exp();
    }
    clamped
}

pub(crate) fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v < row[best] {
            best = k;
        }
    }
    best
}
