//! Shared generators for the integration tests.
#![allow(dead_code)]

use distsom_core::{DistributionalTable, HistogramSpec, QuantileFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Random increasing sequence of `k + 1` values starting at `start`.
fn increasing(rng: &mut ChaCha8Rng, k: usize, start: f64, step: (f64, f64)) -> Vec<f64> {
    let mut v = vec![start];
    for _ in 0..k {
        let last = *v.last().unwrap();
        v.push(last + rng.gen_range(step.0..step.1));
    }
    v
}

/// Random histogram quantile function with 1..=`max_bins` bins.
pub fn random_quantile(rng: &mut ChaCha8Rng, max_bins: usize) -> QuantileFunction {
    let k = rng.gen_range(1..=max_bins);
    let start = rng.gen_range(-5.0..5.0);
    let breaks = increasing(rng, k, start, (0.05, 2.0));
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    QuantileFunction::from_histogram(&HistogramSpec::new(breaks, weights).unwrap())
}

/// Random quantile function, sometimes with a jump or a flat piece.
pub fn random_quantile_with_jumps(rng: &mut ChaCha8Rng, max_knots: usize) -> QuantileFunction {
    let n = rng.gen_range(2..=max_knots.max(2));
    let mut probs: Vec<f64> = (0..n - 2).map(|_| rng.gen_range(0.0..1.0)).collect();
    probs.push(0.0);
    probs.push(1.0);
    probs.sort_by(f64::total_cmp);
    probs.dedup();
    if probs.len() > 3 && rng.gen_bool(0.3) {
        let k = rng.gen_range(1..probs.len() - 1);
        probs.insert(k, probs[k]);
    }
    let mut values = Vec::with_capacity(probs.len());
    let mut v = rng.gen_range(-3.0..3.0);
    for (k, _) in probs.iter().enumerate() {
        if k > 0 {
            v += if rng.gen_bool(0.15) {
                0.0
            } else {
                rng.gen_range(0.0..2.0)
            };
        }
        values.push(v);
    }
    QuantileFunction::new(probs, values).unwrap()
}

pub fn random_table(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DistributionalTable {
    let cells = (0..n * p).map(|_| random_quantile(rng, 4)).collect();
    DistributionalTable::new(
        (0..n).map(|i| format!("o{i}")).collect(),
        (0..p).map(|j| format!("v{j}")).collect(),
        cells,
        None,
    )
    .unwrap()
}

/// Object of cluster `c` for variable `j`: a three-bin histogram around the
/// cluster centre, with a jittered location and a jittered shape.
fn cluster_cell(rng: &mut ChaCha8Rng, centre: f64, width: f64, spread: f64) -> QuantileFunction {
    let jitter = Normal::new(0.0, spread).unwrap();
    let lo = centre - 1.5 * width + jitter.sample(rng);
    let widths: Vec<f64> = (0..3)
        .map(|_| width * (1.0 + 0.1 * rng.gen_range(-1.0..1.0)))
        .collect();
    let mut breaks = vec![lo];
    for w in &widths {
        let last = *breaks.last().unwrap();
        breaks.push(last + w);
    }
    QuantileFunction::from_histogram(&HistogramSpec::new(breaks, vec![0.25, 0.5, 0.25]).unwrap())
}

pub const CLUSTER_WIDTHS: [f64; 3] = [0.25, 0.4, 0.55];

pub const CLUSTER_CENTRES: [[f64; 2]; 3] = [[0.0, 0.0], [10.0, -10.0], [-10.0, 10.0]];

/// `n` objects in three equal clusters over two variables; cluster
/// centres are 10 apart on each variable and the within-cluster spread is
/// well below a tenth of that.
pub fn three_clusters(rng: &mut ChaCha8Rng, n: usize) -> DistributionalTable {
    let mut ids = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut cells = Vec::with_capacity(2 * n);
    for i in 0..n {
        let c = i % 3;
        for centre in CLUSTER_CENTRES[c] {
            cells.push(cluster_cell(rng, centre, CLUSTER_WIDTHS[c], 0.15));
        }
        ids.push(format!("o{i}"));
        labels.push(format!("c{c}"));
    }
    DistributionalTable::new(ids, vec!["x".into(), "y".into()], cells, Some(labels)).unwrap()
}

/// A small random training problem: table, planar grid, random partition
/// and prototypes drawn from the data, and a radius.
pub struct Instance {
    pub table: DistributionalTable,
    pub grid: distsom_core::MapGrid,
    pub assignment: Vec<usize>,
    pub prototypes: distsom_core::Prototypes,
    pub radius: f64,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    use distsom_core::{MapGrid, Prototypes, Topology};
    let (rows, cols) = [(2, 2), (2, 3), (3, 2)][rng.gen_range(0..3)];
    let grid = MapGrid::new(rows, cols, Topology::Planar).unwrap();
    let m = grid.len();
    let n = rng.gen_range(m.max(8)..=30);
    let p = rng.gen_range(1..=3);
    let table = random_table(rng, n, p);
    let assignment: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
    let cells = (0..m)
        .flat_map(|_| {
            let i = rng.gen_range(0..n);
            table.row(i).to_vec()
        })
        .collect();
    let prototypes = Prototypes::new(m, p, cells).unwrap();
    Instance {
        radius: rng.gen_range(0.3..2.0),
        table,
        grid,
        assignment,
        prototypes,
    }
}

/// Kernel `exp(-d²/(2T²))` between two neurons, computed from scratch.
pub fn kernel_between(grid: &distsom_core::MapGrid, r: usize, m: usize, radius: f64) -> f64 {
    let d = grid.neuron_distance(r, m).unwrap();
    (-(d * d) / (2.0 * radius * radius)).exp()
}

/// `Σ_i Σ_h K(f(i), h) d_Λ(y_i, g_h)` evaluated directly with the distance
/// functions.
pub fn direct_criterion(
    inst: &Instance,
    prototypes: &distsom_core::Prototypes,
    weights: Option<&distsom_core::WeightMatrix>,
    assignment: &[usize],
) -> f64 {
    let rows = prototypes.rows();
    (0..inst.table.n_objects())
        .map(|i| {
            distsom_core::generalized_distance(
                inst.table.row(i),
                assignment[i],
                &rows,
                &inst.grid,
                inst.radius,
                weights,
            )
            .unwrap()
        })
        .sum()
}

/// Values of `q` perturbed by `eps`: a global shift, and each knot moved
/// up or down where monotonicity allows.
pub fn perturbations(q: &QuantileFunction, eps: f64) -> Vec<QuantileFunction> {
    let mut out = Vec::new();
    for s in [-eps, eps] {
        out.push(q.shifted(s));
    }
    let v = q.values();
    for k in 0..v.len() {
        for s in [-eps, eps] {
            let mut w = v.to_vec();
            w[k] += s;
            if w.windows(2).all(|p| p[0] <= p[1]) {
                out.push(QuantileFunction::new(q.probs().to_vec(), w).unwrap());
            }
        }
    }
    out
}

/// Checks that no perturbation of any prototype lowers the kernel-weighted
/// sum of squared distances it minimizes. Returns the worst relative gain.
pub fn representation_gain(inst: &Instance) -> f64 {
    use distsom_core::{representation_step, w2_squared};
    let mut worst = f64::NEG_INFINITY;
    for m in 0..inst.grid.len() {
        let weights: Vec<f64> = inst
            .assignment
            .iter()
            .map(|&r| kernel_between(&inst.grid, r, m, inst.radius))
            .collect();
        for j in 0..inst.table.n_variables() {
            let g =
                representation_step(&inst.table, &inst.assignment, &inst.grid, inst.radius, m, j)
                    .unwrap();
            let objective = |q: &QuantileFunction| -> f64 {
                inst.table
                    .column(j)
                    .zip(&weights)
                    .map(|(y, w)| w * w2_squared(y, q))
                    .sum()
            };
            let base = objective(&g);
            for eps in [1e-3, 1e-2] {
                for q in perturbations(&g, eps) {
                    worst = worst.max((base - objective(&q)) / base.max(1e-300));
                }
            }
        }
    }
    worst
}

/// Checks that no product-preserving rescaling of two weights in a group
/// lowers the criterion. Returns the worst relative gain over all schemes.
pub fn weighting_gain(inst: &Instance) -> f64 {
    use distsom_core::{weighting_step, Scheme, WeightMatrix};
    let mut worst = f64::NEG_INFINITY;
    for scheme in Scheme::ALL {
        let out = weighting_step(
            &inst.table,
            &inst.prototypes,
            &inst.assignment,
            &inst.grid,
            inst.radius,
            scheme,
        )
        .unwrap();
        let w = out.weights;
        let base = direct_criterion(inst, &inst.prototypes, Some(&w), &inst.assignment);
        let width = w.width();
        for g in 0..w.groups() {
            for a in 0..width {
                for b in 0..width {
                    if a == b {
                        continue;
                    }
                    for c in [0.5, 2.0] {
                        let mut v = w.values().to_vec();
                        v[g * width + a] *= c;
                        v[g * width + b] /= c;
                        let moved =
                            WeightMatrix::new(scheme, w.neurons(), w.variables(), v).unwrap();
                        let j = direct_criterion(
                            inst,
                            &inst.prototypes,
                            Some(&moved),
                            &inst.assignment,
                        );
                        worst = worst.max((base - j) / base.max(1e-300));
                    }
                }
            }
        }
    }
    worst
}

/// Checks that moving any single object to another neuron never lowers
/// the criterion after the assignment step. Returns the worst relative gain.
pub fn assignment_gain(inst: &Instance) -> f64 {
    use distsom_core::{assignment_step, Scheme, WeightMatrix};
    let mut worst = f64::NEG_INFINITY;
    let p = inst.table.n_variables();
    let m = inst.grid.len();
    let unit = WeightMatrix::unit(Scheme::ClusterComponent, m, p);
    for weights in [None, Some(&unit)] {
        let f = assignment_step(
            &inst.table,
            &inst.prototypes,
            weights,
            &inst.grid,
            inst.radius,
        )
        .unwrap()
        .0;
        let base = direct_criterion(inst, &inst.prototypes, weights, &f);
        for i in 0..f.len() {
            for r in 0..m {
                if r == f[i] {
                    continue;
                }
                let mut g = f.clone();
                g[i] = r;
                let j = direct_criterion(inst, &inst.prototypes, weights, &g);
                worst = worst.max((base - j) / base.max(1e-300));
            }
        }
    }
    worst
}

/// Distance from `yi` to `yk`, where `yk` belongs to neuron `h`.
pub fn object_distance(
    yi: &[QuantileFunction],
    yk: &[QuantileFunction],
    weights: Option<&distsom_core::WeightMatrix>,
    h: usize,
) -> f64 {
    let mut s = 0.0;
    for j in 0..yi.len() {
        let c = distsom_core::decompose(&yi[j], &yk[j]);
        let (lm, lv) = weights.map_or((1.0, 1.0), |w| w.component_weights(h, j));
        s += lm * c.mean + lv * c.dispersion;
    }
    s
}

fn oracle_score(a: f64, b: f64) -> f64 {
    if a.max(b) > 0.0 {
        (b - a) / a.max(b)
    } else {
        0.0
    }
}

/// Silhouette from all pairwise distances. With `grid`, clusters adjacent
/// to the object's own are not compared against and objects left with
/// no comparison cluster are skipped. Returns the mean over scored objects
/// and the number skipped.
pub fn oracle_silhouette(
    table: &DistributionalTable,
    assignment: &[usize],
    weights: Option<&distsom_core::WeightMatrix>,
    grid: Option<&distsom_core::MapGrid>,
) -> (Option<f64>, usize) {
    let n = table.n_objects();
    let clusters: std::collections::BTreeSet<usize> = assignment.iter().copied().collect();
    let (mut sum, mut scored, mut skipped) = (0.0, 0usize, 0usize);
    for i in 0..n {
        let own = assignment[i];
        let mean_to = |c: usize| -> (f64, usize) {
            let mut s = 0.0;
            let mut count = 0;
            for (k, &fk) in assignment.iter().enumerate() {
                if k != i && fk == c {
                    s += object_distance(table.row(i), table.row(k), weights, c);
                    count += 1;
                }
            }
            (s, count)
        };
        let mut b = f64::INFINITY;
        for &c in &clusters {
            if c == own || grid.is_some_and(|g| g.adjacent(own, c).unwrap()) {
                continue;
            }
            let (s, count) = mean_to(c);
            b = b.min(s / count as f64);
        }
        if b.is_infinite() {
            skipped += 1;
            continue;
        }
        scored += 1;
        let (s, count) = mean_to(own);
        if count > 0 {
            sum += oracle_score(s / count as f64, b);
        }
    }
    ((scored > 0).then(|| sum / scored as f64), skipped)
}

/// Silhouette against prototypes, with the same `grid` convention.
pub fn oracle_simplified(
    table: &DistributionalTable,
    prototypes: &distsom_core::Prototypes,
    assignment: &[usize],
    weights: Option<&distsom_core::WeightMatrix>,
    grid: Option<&distsom_core::MapGrid>,
) -> (Option<f64>, usize) {
    let clusters: std::collections::BTreeSet<usize> = assignment.iter().copied().collect();
    let (mut sum, mut scored, mut skipped) = (0.0, 0usize, 0usize);
    for (i, &own) in assignment.iter().enumerate() {
        let d = |c: usize| object_distance(table.row(i), prototypes.row(c), weights, c);
        let b = clusters
            .iter()
            .filter(|&&c| c != own && !grid.is_some_and(|g| g.adjacent(own, c).unwrap()))
            .map(|&c| d(c))
            .fold(f64::INFINITY, f64::min);
        if b.is_infinite() {
            skipped += 1;
            continue;
        }
        scored += 1;
        sum += oracle_score(d(own), b);
    }
    ((scored > 0).then(|| sum / scored as f64), skipped)
}

/// ARI from pair counts over all object pairs.
pub fn oracle_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for k in i + 1..a.len() {
            match (a[i] == a[k], b[i] == b[k]) {
                (true, true) => ss += 1,
                (true, false) => sd += 1,
                (false, true) => ds += 1,
                (false, false) => dd += 1,
            }
        }
    }
    let num = 2 * (ss * dd - sd * ds);
    let den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// NMI as `2 I / (H(a) + H(b))` with probabilities counted directly.
pub fn oracle_nmi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let count = |f: &dyn Fn(usize) -> bool| (0..a.len()).filter(|&i| f(i)).count() as f64;
    let la: std::collections::BTreeSet<usize> = a.iter().copied().collect();
    let lb: std::collections::BTreeSet<usize> = b.iter().copied().collect();
    let h = |labels: &std::collections::BTreeSet<usize>, v: &[usize]| -> f64 {
        labels
            .iter()
            .map(|&l| {
                let p = count(&|i| v[i] == l) / n;
                -p * p.ln()
            })
            .sum()
    };
    let mut mi = 0.0;
    for &x in &la {
        for &y in &lb {
            let pxy = count(&|i| a[i] == x && b[i] == y) / n;
            if pxy > 0.0 {
                let px = count(&|i| a[i] == x) / n;
                let py = count(&|i| b[i] == y) / n;
                mi += pxy * (pxy / (px * py)).ln();
            }
        }
    }
    let (ha, hb) = (h(&la, a), h(&lb, b));
    if ha + hb == 0.0 {
        0.0
    } else {
        2.0 * mi / (ha + hb)
    }
}

/// Purity: majority class count per cluster, summed, over N.
pub fn oracle_purity(classes: &[usize], clusters: &[usize]) -> f64 {
    let set: std::collections::BTreeSet<usize> = clusters.iter().copied().collect();
    let mut total = 0;
    for &c in &set {
        let mut best = 0;
        for &k in classes {
            let n = (0..classes.len())
                .filter(|&i| clusters[i] == c && classes[i] == k)
                .count();
            best = best.max(n);
        }
        total += best;
    }
    total as f64 / classes.len() as f64
}

/// Value of `q` at `p` by linear interpolation between its knots (left
/// limit at a jump).
pub fn oracle_eval(q: &QuantileFunction, p: f64) -> f64 {
    let (probs, values) = (q.probs(), q.values());
    let k = probs.partition_point(|&x| x < p).clamp(1, probs.len() - 1);
    let (p0, p1) = (probs[k - 1], probs[k]);
    if p1 == p0 {
        return values[k - 1];
    }
    values[k - 1] + (values[k] - values[k - 1]) * (p - p0) / (p1 - p0)
}

/// Midpoint rule for `∫₀¹ (Q_a − Q_b)² dp` with `points` nodes.
pub fn quadrature_w2(a: &QuantileFunction, b: &QuantileFunction, points: usize) -> f64 {
    let h = 1.0 / points as f64;
    (0..points)
        .map(|k| {
            let p = (k as f64 + 0.5) * h;
            let d = oracle_eval(a, p) - oracle_eval(b, p);
            d * d
        })
        .sum::<f64>()
        * h
}
