//! Hexagonal neuron lattices, the Gaussian neighbourhood kernel and the
//! radius schedule.
//!
//! Neurons are indexed row-major. Neuron `(r, c)` sits at
//! `x = c + 0.5 * (r odd)`, `y = r * √3/2`, so every interior neuron has six
//! neighbours at unit distance. A toroidal map wraps both axes with period
//! `(cols, rows * √3/2)`; this needs an even number of rows so that the row
//! offsets line up across the seam.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_PITCH: f64 = 0.866_025_403_784_438_6; // √3 / 2
const ADJACENCY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Planar,
    Toroidal,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Planar => "planar",
            Topology::Toroidal => "toroidal",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "planar" => Ok(Topology::Planar),
            "toroidal" | "torus" => Ok(Topology::Toroidal),
            other => Err(Error::InvalidConfig(format!("unknown topology `{other}`"))),
        }
    }
}

/// How the topological distance between two neurons is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronMetric {
    /// Euclidean distance between positions in the hexagonal embedding.
    #[default]
    Euclidean,
    /// Number of hops along the six-neighbour lattice.
    GridPath,
}

impl FromStr for NeuronMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euclidean" => Ok(NeuronMetric::Euclidean),
            "grid-path" | "gridpath" | "path" => Ok(NeuronMetric::GridPath),
            other => Err(Error::InvalidConfig(format!(
                "unknown neuron metric `{other}`"
            ))),
        }
    }
}

/// A hexagonal map with precomputed distance and adjacency tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MapGrid {
    rows: usize,
    cols: usize,
    topology: Topology,
    metric: NeuronMetric,
    positions: Vec<(f64, f64)>,
    distances: Vec<f64>,
    adjacency: Vec<bool>,
}

impl MapGrid {
    pub fn new(rows: usize, cols: usize, topology: Topology) -> Result<Self> {
        Self::with_metric(rows, cols, topology, NeuronMetric::Euclidean)
    }

    pub fn with_metric(
        rows: usize,
        cols: usize,
        topology: Topology,
        metric: NeuronMetric,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidGrid(format!(
                "maps need at least 2 rows and 2 columns, got {rows}x{cols}"
            )));
        }
        if topology == Topology::Toroidal && (rows % 2 != 0 || cols % 2 != 0) {
            return Err(Error::ToroidalParity { rows, cols });
        }
        let m = rows * cols;
        let positions: Vec<(f64, f64)> = (0..m)
            .map(|k| {
                let (r, c) = (k / cols, k % cols);
                let offset = if r % 2 == 1 { 0.5 } else { 0.0 };
                (c as f64 + offset, r as f64 * ROW_PITCH)
            })
            .collect();
        let period = (cols as f64, rows as f64 * ROW_PITCH);

        let mut euclid = vec![0.0; m * m];
        for a in 0..m {
            for b in (a + 1)..m {
                let d = embedded_distance(positions[a], positions[b], topology, period);
                euclid[a * m + b] = d;
                euclid[b * m + a] = d;
            }
        }
        let adjacency: Vec<bool> = (0..m * m)
            .map(|k| k / m != k % m && euclid[k] <= 1.0 + ADJACENCY_SLACK)
            .collect();
        let distances = match metric {
            NeuronMetric::Euclidean => euclid,
            NeuronMetric::GridPath => hop_distances(m, &adjacency),
        };
        Ok(Self {
            rows,
            cols,
            topology,
            metric,
            positions,
            distances,
            adjacency,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn metric(&self) -> NeuronMetric {
        self.metric
    }

    /// Number of neurons `M`.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, m: usize) -> (f64, f64) {
        self.positions[m]
    }

    pub fn row_col(&self, m: usize) -> (usize, usize) {
        (m / self.cols, m % self.cols)
    }

    fn check(&self, m: usize) -> Result<()> {
        if m >= self.len() {
            Err(Error::IndexOutOfRange {
                index: m,
                len: self.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn neuron_distance(&self, r: usize, m: usize) -> Result<f64> {
        self.check(r)?;
        self.check(m)?;
        Ok(self.distances[r * self.len() + m])
    }

    pub fn adjacent(&self, r: usize, m: usize) -> Result<bool> {
        self.check(r)?;
        self.check(m)?;
        Ok(self.adjacency[r * self.len() + m])
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, r: usize, m: usize) -> f64 {
        self.distances[r * self.len() + m]
    }

    #[inline]
    pub(crate) fn adjacent_unchecked(&self, r: usize, m: usize) -> bool {
        self.adjacency[r * self.len() + m]
    }

    pub fn neighbors(&self, m: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&h| self.adjacency[m * self.len() + h])
            .collect()
    }

    /// Largest topological distance between two neurons.
    pub fn diameter(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    /// `M × M` kernel values `K^T(d(m, h))`.
    pub fn kernel_matrix(&self, radius: f64) -> Result<Vec<f64>> {
        self.distances.iter().map(|&d| kernel(d, radius)).collect()
    }
}

fn embedded_distance(a: (f64, f64), b: (f64, f64), topology: Topology, period: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    match topology {
        Topology::Planar => dx.hypot(dy),
        Topology::Toroidal => {
            let mut best = f64::INFINITY;
            for sx in [-1.0, 0.0, 1.0] {
                for sy in [-1.0, 0.0, 1.0] {
                    best = best.min((dx + sx * period.0).hypot(dy + sy * period.1));
                }
            }
            best
        }
    }
}

fn hop_distances(m: usize, adjacency: &[bool]) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; m * m];
    let mut queue = VecDeque::new();
    for src in 0..m {
        out[src * m + src] = 0.0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = out[src * m + u];
            for v in 0..m {
                if adjacency[u * m + v] && out[src * m + v].is_infinite() {
                    out[src * m + v] = du + 1.0;
                    queue.push_back(v);
                }
            }
        }
    }
    out
}

/// Gaussian neighbourhood kernel `exp(-d² / (2 T²))`.
pub fn kernel(dist: f64, radius: f64) -> Result<f64> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::NonPositiveRadius(radius));
    }
    Ok((-(dist * dist) / (2.0 * radius * radius)).exp())
}

/// Radius bounds and epoch count for training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub t_max: f64,
    pub t_min: f64,
    pub n_iter: usize,
}

impl KernelParams {
    pub fn new(t_max: f64, t_min: f64, n_iter: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_min.is_finite()) {
            return Err(Error::NonPositiveRadius(t_min));
        }
        if !(t_max >= t_min && t_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial radius {t_max} must be at least the final radius {t_min}"
            )));
        }
        if n_iter == 0 {
            return Err(Error::InvalidConfig(
                "at least one epoch is required".into(),
            ));
        }
        Ok(Self {
            t_max,
            t_min,
            n_iter,
        })
    }
}

/// `T(t) = T_max (T_min / T_max)^(t / n_iter)`.
pub fn radius_schedule(t: usize, params: &KernelParams) -> f64 {
    let frac = t.min(params.n_iter) as f64 / params.n_iter as f64;
    params.t_max * (params.t_min / params.t_max).powf(frac)
}

/// Radii for which the kernel equals 0.1 at half the map diameter and 0.01
/// between neighbours.
pub fn radii_for_diameter(diameter: f64) -> (f64, f64) {
    let half = 0.5 * diameter;
    let t_max = (-(half * half) / (2.0 * 0.1f64.ln())).sqrt();
    let t_min = (-1.0 / (2.0 * 0.01f64.ln())).sqrt();
    (t_max, t_min)
}

/// `(T_max, T_min)` for a grid; see [`radii_for_diameter`].
pub fn default_radii(grid: &MapGrid) -> (f64, f64) {
    radii_for_diameter(grid.diameter())
}

/// Map size near `5 √N` neurons with even sides and a 1:2 aspect ratio.
///
/// Returns `(rows, cols)` with `cols = 2 rows`, `rows` even, choosing the
/// candidate whose neuron count is closest to the target (the smaller map
/// on a tie).
pub fn suggest_map_size(n_objects: usize) -> (usize, usize) {
    let target = 5.0 * (n_objects.max(1) as f64).sqrt();
    let mut best = (2, 4);
    let mut best_gap = f64::INFINITY;
    let mut rows = 2;
    loop {
        let size = (2 * rows * rows) as f64;
        let gap = (size - target).abs();
        if gap < best_gap {
            best = (rows, 2 * rows);
            best_gap = gap;
        }
        if size > target {
            break;
        }
        rows += 2;
    }
    best
}
