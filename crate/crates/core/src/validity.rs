//! Internal and external validity indexes for trained maps.
//!
//! Silhouettes are computed on squared L2 Wasserstein distances, or on the
//! trained adaptive distances when relevance weights are supplied. With
//! cluster-wise weights the distance from an object to a member of cluster
//! `B` uses the weights of `B`. A singleton cluster gives its object a
//! score of 0.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::aligned::{align_table, AlignedColumn};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::table::DistributionalTable;
use crate::topology::MapGrid;
use crate::train::{Prototypes, TrainedMap};
use crate::wasserstein::{adaptive_distance, mv_w2_squared};
use crate::weights::WeightMatrix;

/// Fraction of objects whose best and second-best matching units, under
/// the generalized distance at `radius`, are not adjacent.
pub fn topographic_error(
    table: &DistributionalTable,
    prototypes: &Prototypes,
    weights: Option<&WeightMatrix>,
    grid: &MapGrid,
    radius: f64,
) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::TooFewNeurons);
    }
    let mut engine = Engine::with_prototypes(table, grid, prototypes)?;
    engine.set_radius(radius)?;
    let g = engine.generalized(weights);
    let m = grid.len();
    let mut errors = 0usize;
    for i in 0..table.n_objects() {
        let (best, second) = two_smallest(&g[i * m..(i + 1) * m]);
        if !grid.adjacent_unchecked(best, second) {
            errors += 1;
        }
    }
    Ok(errors as f64 / table.n_objects() as f64)
}

fn two_smallest(row: &[f64]) -> (usize, usize) {
    let mut best = 0;
    for k in 1..row.len() {
        if row[k] < row[best] {
            best = k;
        }
    }
    let mut second = usize::MAX;
    for k in 0..row.len() {
        if k != best && (second == usize::MAX || row[k] < row[second]) {
            second = k;
        }
    }
    (best, second)
}

/// `N × N` matrix with entry `(i, k)` the distance from object `i` to
/// object `k`. Adaptive distances use the weights of `k`'s neuron.
pub fn pairwise_dissimilarities(
    table: &DistributionalTable,
    weights: Option<&WeightMatrix>,
    assignment: &[usize],
) -> Result<Vec<f64>> {
    let n = table.n_objects();
    check_len(n, assignment.len())?;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            out[i * n + k] = match weights {
                Some(w) => adaptive_distance(table.row(i), table.row(k), w, assignment[k])?,
                None => mv_w2_squared(table.row(i), table.row(k))?,
            };
        }
    }
    Ok(out)
}

fn check_len(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

fn score(a: f64, b: f64) -> f64 {
    let denom = a.max(b);
    if denom > 0.0 {
        (b - a) / denom
    } else {
        0.0
    }
}

/// Silhouette value with objects that have no eligible comparison cluster
/// left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSilhouette {
    /// Mean score over the scored objects; `None` when every object was
    /// skipped.
    pub value: Option<f64>,
    pub skipped: usize,
}

struct Clusters {
    members: Vec<Vec<usize>>,
    occupied: Vec<usize>,
}

impl Clusters {
    fn new(assignment: &[usize], neurons: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); neurons];
        for (i, &m) in assignment.iter().enumerate() {
            if m >= neurons {
                return Err(Error::IndexOutOfRange {
                    index: m,
                    len: neurons,
                });
            }
            members[m].push(i);
        }
        let occupied: Vec<usize> = (0..neurons).filter(|&m| !members[m].is_empty()).collect();
        if occupied.len() < 2 {
            return Err(Error::SingleCluster);
        }
        Ok(Self { members, occupied })
    }
}

fn neuron_count(assignment: &[usize]) -> usize {
    assignment.iter().copied().max().map_or(0, |m| m + 1)
}

/// Generic silhouette loop: `a(i, A)` and `b(i, B)` supply the own-cluster
/// and other-cluster dissimilarities; `eligible(A, B)` filters comparison
/// clusters; `singleton_zero` applies the singleton convention.
fn silhouette_core(
    clusters: &Clusters,
    assignment: &[usize],
    singleton_zero: bool,
    eligible: impl Fn(usize, usize) -> bool,
    a: impl Fn(usize, usize) -> f64,
    b: impl Fn(usize, usize) -> f64,
) -> PartialSilhouette {
    let mut sum = 0.0;
    let mut scored = 0usize;
    let mut skipped = 0usize;
    for (i, &own) in assignment.iter().enumerate() {
        let mut best = f64::INFINITY;
        for &other in &clusters.occupied {
            if other != own && eligible(own, other) {
                best = best.min(b(i, other));
            }
        }
        if best == f64::INFINITY {
            skipped += 1;
            continue;
        }
        scored += 1;
        if singleton_zero && clusters.members[own].len() == 1 {
            continue;
        }
        sum += score(a(i, own), best);
    }
    PartialSilhouette {
        value: (scored > 0).then(|| sum / scored as f64),
        skipped,
    }
}

fn mean_to(dist: &[f64], n: usize, i: usize, members: &[usize], exclude_self: bool) -> f64 {
    let s: f64 = members
        .iter()
        .filter(|&&k| k != i)
        .map(|&k| dist[i * n + k])
        .sum();
    let count = if exclude_self {
        members.len() - 1
    } else {
        members.len()
    };
    s / count as f64
}

/// Silhouette from a full `N × N` dissimilarity matrix.
pub fn silhouette(dist: &[f64], assignment: &[usize]) -> Result<f64> {
    let n = assignment.len();
    check_len(n * n, dist.len())?;
    let clusters = Clusters::new(assignment, neuron_count(assignment))?;
    let s = silhouette_core(
        &clusters,
        assignment,
        true,
        |_, _| true,
        |i, a| mean_to(dist, n, i, &clusters.members[a], true),
        |i, b| mean_to(dist, n, i, &clusters.members[b], false),
    );
    Ok(s.value.unwrap_or(0.0))
}

/// Silhouette from a dissimilarity matrix, ignoring comparison clusters
/// whose neurons are adjacent to the object's own neuron.
pub fn silhouette_topo_naive(
    dist: &[f64],
    assignment: &[usize],
    grid: &MapGrid,
) -> Result<PartialSilhouette> {
    let n = assignment.len();
    check_len(n * n, dist.len())?;
    let clusters = Clusters::new(assignment, grid.len())?;
    Ok(silhouette_core(
        &clusters,
        assignment,
        true,
        |a, b| !grid.adjacent_unchecked(a, b),
        |i, a| mean_to(dist, n, i, &clusters.members[a], true),
        |i, b| mean_to(dist, n, i, &clusters.members[b], false),
    ))
}

/// Per-cluster centroids and sums of squares of both distance components,
/// which give every object-to-cluster mean distance in closed form.
struct ClusterMoments {
    cols: Vec<AlignedColumn>,
    /// `[m][j]` centroid values on column `j`'s grid.
    centroid: Vec<Vec<Vec<f64>>>,
    centroid_mean: Vec<Vec<f64>>,
    /// `[m][j] -> (SSE of mean component, SSE of dispersion component)`.
    sse: Vec<Vec<(f64, f64)>>,
    sizes: Vec<usize>,
}

impl ClusterMoments {
    fn new(table: &DistributionalTable, clusters: &Clusters) -> Self {
        let cols = align_table(table);
        let mcount = clusters.members.len();
        let p = cols.len();
        let mut centroid = vec![vec![Vec::new(); p]; mcount];
        let mut centroid_mean = vec![vec![0.0; p]; mcount];
        let mut sse = vec![vec![(0.0, 0.0); p]; mcount];
        for &m in &clusters.occupied {
            let members = &clusters.members[m];
            let inv = 1.0 / members.len() as f64;
            for (j, col) in cols.iter().enumerate() {
                let mut c = vec![0.0; col.len()];
                let mut cm = 0.0;
                for &i in members {
                    for (t, v) in c.iter_mut().zip(col.row(i)) {
                        *t += v;
                    }
                    cm += col.means[i];
                }
                c.iter_mut().for_each(|t| *t *= inv);
                cm *= inv;
                let mut s = (0.0, 0.0);
                for &i in members {
                    let shift = col.means[i] - cm;
                    s.0 += shift * shift;
                    s.1 += col.sq_distance(col.row(i), &c, shift);
                }
                centroid[m][j] = c;
                centroid_mean[m][j] = cm;
                sse[m][j] = s;
            }
        }
        Self {
            cols,
            centroid,
            centroid_mean,
            sse,
            sizes: clusters.members.iter().map(Vec::len).collect(),
        }
    }

    /// Weighted distance components of object `i` to the centroid of `m`,
    /// and the cluster's weighted sum of squares.
    fn to_centroid(&self, i: usize, m: usize, weights: Option<&WeightMatrix>) -> (f64, f64) {
        let mut d = 0.0;
        let mut sse = 0.0;
        for (j, col) in self.cols.iter().enumerate() {
            let (lm, lv) = weights.map_or((1.0, 1.0), |w| w.component_weights(m, j));
            let shift = col.means[i] - self.centroid_mean[m][j];
            let dv = col.sq_distance(col.row(i), &self.centroid[m][j], shift);
            d += lm * shift * shift + lv * dv;
            let (sm, sv) = self.sse[m][j];
            sse += lm * sm + lv * sv;
        }
        (d, sse)
    }

    /// Mean distance from `i` to the other members of its own cluster `a`.
    fn within(&self, i: usize, a: usize, weights: Option<&WeightMatrix>) -> f64 {
        let n = self.sizes[a] as f64;
        let (d, sse) = self.to_centroid(i, a, weights);
        ((n * d + sse) / (n - 1.0)).max(0.0)
    }

    /// Mean distance from `i` to the members of cluster `b`.
    fn between(&self, i: usize, b: usize, weights: Option<&WeightMatrix>) -> f64 {
        let (d, sse) = self.to_centroid(i, b, weights);
        d + sse / self.sizes[b] as f64
    }
}

fn check_weights(weights: Option<&WeightMatrix>, table: &DistributionalTable) -> Result<()> {
    if let Some(w) = weights {
        if w.variables() != table.n_variables() {
            return Err(Error::SchemeMismatch(format!(
                "weights cover {} variables, table has {}",
                w.variables(),
                table.n_variables()
            )));
        }
    }
    Ok(())
}

fn cluster_count(assignment: &[usize], weights: Option<&WeightMatrix>) -> usize {
    let used = neuron_count(assignment);
    match weights {
        Some(w) if w.scheme().is_cluster_wise() => used.max(w.neurons()),
        _ => used,
    }
}

fn check_cluster_weights(assignment: &[usize], weights: Option<&WeightMatrix>) -> Result<()> {
    if let Some(w) = weights {
        if w.scheme().is_cluster_wise() {
            if let Some(&m) = assignment.iter().find(|&&m| m >= w.neurons()) {
                return Err(Error::IndexOutOfRange {
                    index: m,
                    len: w.neurons(),
                });
            }
        }
    }
    Ok(())
}

/// Silhouette in `O(N · M)` distance evaluations, using the identities
/// `a(i) = (n_A d(i, ȳ_A) + SSE_A) / (n_A − 1)` and
/// `b(i) = d(i, ȳ_B) + SSE_B / n_B` for squared Euclidean distances between
/// quantile functions.
pub fn silhouette_fast(
    table: &DistributionalTable,
    assignment: &[usize],
    weights: Option<&WeightMatrix>,
) -> Result<f64> {
    check_len(table.n_objects(), assignment.len())?;
    check_weights(weights, table)?;
    check_cluster_weights(assignment, weights)?;
    let clusters = Clusters::new(assignment, cluster_count(assignment, weights))?;
    let moments = ClusterMoments::new(table, &clusters);
    let s = silhouette_core(
        &clusters,
        assignment,
        true,
        |_, _| true,
        |i, a| moments.within(i, a, weights),
        |i, b| moments.between(i, b, weights),
    );
    Ok(s.value.unwrap_or(0.0))
}

/// Silhouette ignoring comparison clusters adjacent to the object's neuron.
pub fn silhouette_topo(
    table: &DistributionalTable,
    assignment: &[usize],
    grid: &MapGrid,
    weights: Option<&WeightMatrix>,
) -> Result<PartialSilhouette> {
    check_len(table.n_objects(), assignment.len())?;
    check_weights(weights, table)?;
    check_cluster_weights(assignment, weights)?;
    let clusters = Clusters::new(assignment, grid.len())?;
    let moments = ClusterMoments::new(table, &clusters);
    Ok(silhouette_core(
        &clusters,
        assignment,
        true,
        |a, b| !grid.adjacent_unchecked(a, b),
        |i, a| moments.within(i, a, weights),
        |i, b| moments.between(i, b, weights),
    ))
}

fn prototype_distances(
    table: &DistributionalTable,
    prototypes: &Prototypes,
    weights: Option<&WeightMatrix>,
) -> Result<Vec<f64>> {
    if prototypes.variables() != table.n_variables() {
        return Err(Error::DimensionMismatch {
            expected: table.n_variables(),
            found: prototypes.variables(),
        });
    }
    let m = prototypes.neurons();
    let mut out = vec![0.0; table.n_objects() * m];
    for i in 0..table.n_objects() {
        for h in 0..m {
            out[i * m + h] = match weights {
                Some(w) => adaptive_distance(table.row(i), prototypes.row(h), w, h)?,
                None => mv_w2_squared(table.row(i), prototypes.row(h))?,
            };
        }
    }
    Ok(out)
}

fn simplified(
    table: &DistributionalTable,
    prototypes: &Prototypes,
    assignment: &[usize],
    weights: Option<&WeightMatrix>,
    eligible: impl Fn(usize, usize) -> bool,
) -> Result<PartialSilhouette> {
    check_len(table.n_objects(), assignment.len())?;
    check_weights(weights, table)?;
    let m = prototypes.neurons();
    let clusters = Clusters::new(assignment, m)?;
    let d = prototype_distances(table, prototypes, weights)?;
    Ok(silhouette_core(
        &clusters,
        assignment,
        false,
        eligible,
        |i, a| d[i * m + a],
        |i, b| d[i * m + b],
    ))
}

/// Silhouette with distances to cluster prototypes in place of mean
/// distances to cluster members.
pub fn silhouette_simplified(
    table: &DistributionalTable,
    prototypes: &Prototypes,
    assignment: &[usize],
    weights: Option<&WeightMatrix>,
) -> Result<f64> {
    let s = simplified(table, prototypes, assignment, weights, |_, _| true)?;
    Ok(s.value.unwrap_or(0.0))
}

/// Simplified silhouette ignoring comparison clusters adjacent to the
/// object's neuron.
pub fn silhouette_simplified_topo(
    table: &DistributionalTable,
    prototypes: &Prototypes,
    assignment: &[usize],
    grid: &MapGrid,
    weights: Option<&WeightMatrix>,
) -> Result<PartialSilhouette> {
    if prototypes.neurons() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: prototypes.neurons(),
        });
    }
    simplified(table, prototypes, assignment, weights, |a, b| {
        !grid.adjacent_unchecked(a, b)
    })
}

/// `M × K` contingency counts with row and column totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    pub counts: Vec<Vec<u64>>,
    pub row_totals: Vec<u64>,
    pub col_totals: Vec<u64>,
    pub n: u64,
}

impl Contingency {
    /// Rows are the blocks of `clusters`, columns the blocks of `classes`,
    /// both in order of first appearance.
    pub fn new<A: Hash + Eq, B: Hash + Eq>(classes: &[A], clusters: &[B]) -> Result<Self> {
        check_len(classes.len(), clusters.len())?;
        if classes.len() < 2 {
            return Err(Error::TooFewObjects {
                required: 2,
                found: classes.len(),
            });
        }
        let rows = index_of(clusters);
        let cols = index_of(classes);
        let nr = rows.iter().max().map_or(0, |m| m + 1);
        let nc = cols.iter().max().map_or(0, |k| k + 1);
        let mut counts = vec![vec![0u64; nc]; nr];
        for (&r, &c) in rows.iter().zip(&cols) {
            counts[r][c] += 1;
        }
        let row_totals = counts.iter().map(|r| r.iter().sum()).collect();
        let col_totals = (0..nc).map(|c| counts.iter().map(|r| r[c]).sum()).collect();
        Ok(Self {
            counts,
            row_totals,
            col_totals,
            n: classes.len() as u64,
        })
    }
}

fn index_of<T: Hash + Eq>(items: &[T]) -> Vec<usize> {
    let mut ids: HashMap<&T, usize> = HashMap::new();
    items
        .iter()
        .map(|x| {
            let next = ids.len();
            *ids.entry(x).or_insert(next)
        })
        .collect()
}

fn pairs(n: u64) -> i128 {
    let n = n as i128;
    n * (n - 1) / 2
}

/// Adjusted Rand index. Returns 1 when the index is undefined because both
/// partitions have the same trivial structure.
pub fn ari<A: Hash + Eq, B: Hash + Eq>(classes: &[A], clusters: &[B]) -> Result<f64> {
    let t = Contingency::new(classes, clusters)?;
    let joint: i128 = t.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let a: i128 = t.row_totals.iter().map(|&c| pairs(c)).sum();
    let b: i128 = t.col_totals.iter().map(|&c| pairs(c)).sum();
    let total = pairs(t.n);
    let num = 2 * (total * joint - a * b);
    let den = total * (a + b) - 2 * a * b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmiOutcome {
    pub value: f64,
    /// Both partitions have a single block, so the index is 0 by convention.
    pub degenerate: bool,
}

/// Normalized mutual information with arithmetic-mean entropy
/// normalization and natural logarithms.
pub fn nmi_detailed<A: Hash + Eq, B: Hash + Eq>(
    classes: &[A],
    clusters: &[B],
) -> Result<NmiOutcome> {
    let t = Contingency::new(classes, clusters)?;
    let n = t.n as f64;
    let entropy = |totals: &[u64]| -> f64 {
        totals
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_rows = entropy(&t.row_totals);
    let h_cols = entropy(&t.col_totals);
    if t.row_totals.len() == 1 && t.col_totals.len() == 1 {
        return Ok(NmiOutcome {
            value: 0.0,
            degenerate: true,
        });
    }
    let mut info = 0.0;
    for (r, row) in t.counts.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count > 0 {
                let nmk = count as f64;
                info +=
                    nmk / n * (n * nmk / (t.row_totals[r] as f64 * t.col_totals[c] as f64)).ln();
            }
        }
    }
    let denom = 0.5 * (h_rows + h_cols);
    let value = if denom > 0.0 {
        (info / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(NmiOutcome {
        value,
        degenerate: false,
    })
}

pub fn nmi<A: Hash + Eq, B: Hash + Eq>(classes: &[A], clusters: &[B]) -> Result<f64> {
    Ok(nmi_detailed(classes, clusters)?.value)
}

/// `(1/N) Σ_m max_k n_mk` over clusters `m`.
pub fn purity<A: Hash + Eq, B: Hash + Eq>(classes: &[A], clusters: &[B]) -> Result<f64> {
    let t = Contingency::new(classes, clusters)?;
    let majority: u64 = t
        .counts
        .iter()
        .map(|r| r.iter().copied().max().unwrap_or(0))
        .sum();
    Ok(majority as f64 / t.n as f64)
}

/// Every index for one trained map.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IndexReport {
    pub topographic_error: Option<f64>,
    pub silhouette: Option<f64>,
    pub silhouette_topo: Option<f64>,
    pub silhouette_topo_skipped: usize,
    pub silhouette_simplified: Option<f64>,
    pub silhouette_simplified_topo: Option<f64>,
    pub silhouette_simplified_topo_skipped: usize,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub nmi_degenerate: bool,
    pub purity: Option<f64>,
}

impl IndexReport {
    /// Fills the external indexes from class labels.
    pub fn with_labels<A: Hash + Eq>(
        mut self,
        classes: &[A],
        assignment: &[usize],
    ) -> Result<Self> {
        self.ari = Some(ari(classes, assignment)?);
        let n = nmi_detailed(classes, assignment)?;
        self.nmi = Some(n.value);
        self.nmi_degenerate = n.degenerate;
        self.purity = Some(purity(classes, assignment)?);
        Ok(self)
    }
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::SingleCluster) | Err(Error::TooFewNeurons) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Internal indexes of a map state on the data it was trained on.
pub fn internal_indexes(
    data: &DistributionalTable,
    prototypes: &Prototypes,
    weights: Option<&WeightMatrix>,
    grid: &MapGrid,
    radius: f64,
    assignment: &[usize],
) -> Result<IndexReport> {
    let mut report = IndexReport {
        topographic_error: optional(topographic_error(data, prototypes, weights, grid, radius))?,
        silhouette: optional(silhouette_fast(data, assignment, weights))?,
        silhouette_simplified: optional(silhouette_simplified(
            data, prototypes, assignment, weights,
        ))?,
        ..IndexReport::default()
    };
    if let Some(s) = optional(silhouette_topo(data, assignment, grid, weights))? {
        report.silhouette_topo = s.value;
        report.silhouette_topo_skipped = s.skipped;
    }
    if let Some(s) = optional(silhouette_simplified_topo(
        data, prototypes, assignment, grid, weights,
    ))? {
        report.silhouette_simplified_topo = s.value;
        report.silhouette_simplified_topo_skipped = s.skipped;
    }
    Ok(report)
}

/// Internal indexes of `map` on `table` (in original units), plus external
/// indexes when `labels` is given.
pub fn evaluate_map(
    table: &DistributionalTable,
    map: &TrainedMap,
    labels: Option<&[String]>,
) -> Result<IndexReport> {
    let data = map.training_table(table)?;
    let a = map.assignment.as_slice();
    let report = internal_indexes(
        &data,
        &map.prototypes,
        map.weights.as_ref(),
        &map.grid,
        map.final_radius(),
        a,
    )?;
    match labels {
        Some(l) => report.with_labels(l, a),
        None => Ok(report),
    }
}
