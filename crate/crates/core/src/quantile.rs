//! Piecewise-linear quantile functions.
//!
//! A [`QuantileFunction`] is the canonical representation of one distributional
//! cell. It is stored as a list of knots `(p, Q(p))` and evaluated by linear
//! interpolation. Two knots may share a probability level: this encodes a jump
//! of the quantile function, which is how a histogram with an empty interior
//! bin is represented exactly. All integrals are computed segment by segment,
//! so zero-length segments contribute nothing.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Histogram given as bin edges plus relative frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    breaks: Vec<f64>,
    weights: Vec<f64>,
}

/// Allowed absolute deviation of histogram weights from a unit sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

impl HistogramSpec {
    pub fn new(breaks: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 || breaks.len() != weights.len() + 1 {
            return Err(Error::HistogramShape {
                breaks: breaks.len(),
                weights: weights.len(),
            });
        }
        if let Some(index) = breaks.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFiniteInput(format!("histogram break {index}")));
        }
        if let Some(index) = breaks.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneBreaks { index: index + 1 });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeight { index });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::WeightsNotNormalized { sum });
        }
        Ok(Self { breaks, weights })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Inverse CDF of a one-dimensional distribution, linear between knots.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction {
    probs: Vec<f64>,
    values: Vec<f64>,
}

impl QuantileFunction {
    /// Builds a quantile function from knots.
    ///
    /// `probs` must start at 0, end at 1 and be non-decreasing; a level may be
    /// repeated once to encode a jump. `values` must be finite and
    /// non-decreasing.
    pub fn new(probs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_knots(&probs, &values)?;
        Ok(Self { probs, values })
    }

    /// Point mass at `c`.
    pub fn dirac(c: f64) -> Self {
        Self {
            probs: vec![0.0, 1.0],
            values: vec![c, c],
        }
    }

    /// Uniform distribution on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![lo, hi])
    }

    /// Exact inverse CDF of a histogram with uniform density inside each bin.
    ///
    /// Knots sit at the cumulative weights. An empty bin produces a jump
    /// (two knots at the same level); empty bins at either end are trimmed.
    pub fn from_histogram(h: &HistogramSpec) -> Self {
        let total: f64 = h.weights.iter().sum();
        let mut points = Vec::with_capacity(h.breaks.len());
        points.push((0.0, h.breaks[0]));
        let mut cum = 0.0;
        for (w, &b) in h.weights.iter().zip(&h.breaks[1..]) {
            cum += w;
            points.push((cum / total, b));
        }
        if let Some(last) = points.last_mut() {
            last.0 = 1.0;
        }

        let mut probs = Vec::with_capacity(points.len());
        let mut values = Vec::with_capacity(points.len());
        let mut i = 0;
        while i < points.len() {
            let p = points[i].0;
            let mut j = i;
            while j + 1 < points.len() && points[j + 1].0 == p {
                j += 1;
            }
            if i == j || p == 0.0 {
                probs.push(p);
                values.push(points[j].1);
            } else if p == 1.0 {
                probs.push(p);
                values.push(points[i].1);
            } else {
                probs.extend([p, p]);
                values.extend([points[i].1, points[j].1]);
            }
            i = j + 1;
        }
        Self { probs, values }
    }

    /// Quantile function of the equi-depth histogram of `samples`.
    ///
    /// Bin edges are the empirical quantiles at levels `k / bins`, using
    /// linear interpolation between order statistics. Every bin carries
    /// `1 / bins` of the mass.
    pub fn from_samples(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        if bins == 0 {
            return Err(Error::InvalidConfig("bin count must be at least 1".into()));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteInput(format!("sample {i}")));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let probs: Vec<f64> = (0..=bins).map(|k| k as f64 / bins as f64).collect();
        let values = probs
            .iter()
            .map(|&p| empirical_quantile(&sorted, p))
            .collect();
        Ok(Self { probs, values })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn knot_count(&self) -> usize {
        self.probs.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.values.first() == self.values.last()
    }

    /// `Q(p)`; at a jump this is the left limit, `inf { x : F(x) >= p }`.
    pub fn eval(&self, p: f64) -> f64 {
        self.eval_left(p)
    }

    pub fn eval_left(&self, p: f64) -> f64 {
        let i = self.probs.partition_point(|&x| x < p);
        if i >= self.probs.len() {
            return *self.values.last().unwrap();
        }
        if self.probs[i] == p || i == 0 {
            return self.values[i];
        }
        self.interpolate(i - 1, i, p)
    }

    pub fn eval_right(&self, p: f64) -> f64 {
        let j = self.probs.partition_point(|&x| x <= p);
        if j == 0 {
            return self.values[0];
        }
        if self.probs[j - 1] == p || j >= self.probs.len() {
            return self.values[j - 1];
        }
        self.interpolate(j - 1, j, p)
    }

    fn interpolate(&self, a: usize, b: usize, p: f64) -> f64 {
        let (p0, p1) = (self.probs[a], self.probs[b]);
        let (v0, v1) = (self.values[a], self.values[b]);
        v0 + (v1 - v0) * (p - p0) / (p1 - p0)
    }

    /// `∫₀¹ Q(p) dp`, exact for piecewise-linear `Q`.
    pub fn mean(&self) -> f64 {
        segment_mean(&self.probs, &self.values)
    }

    /// `∫₀¹ (Q(p) - mean)² dp`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let centered: Vec<f64> = self.values.iter().map(|v| v - m).collect();
        segment_sq_integral(&self.probs, &centered)
    }

    /// Same knots, values shifted so that the mean is zero.
    pub fn center(&self) -> Self {
        self.shifted(-self.mean())
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            probs: self.probs.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    /// Multiplies every value by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidQuantile(format!(
                "scale factor must be finite and non-negative, got {c}"
            )));
        }
        Ok(Self {
            probs: self.probs.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        })
    }

    /// Values of this function on a registered probability grid.
    ///
    /// The grid must contain every level where this function jumps twice;
    /// for a level that appears twice, the first copy receives the left
    /// limit and the second the right limit.
    pub fn resample(&self, grid: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.len());
        let mut k = 0;
        while k < grid.len() {
            let p = grid[k];
            if k + 1 < grid.len() && grid[k + 1] == p {
                out.push(self.eval_left(p));
                out.push(self.eval_right(p));
                k += 2;
            } else {
                out.push(self.eval_left(p));
                k += 1;
            }
        }
        out
    }

    /// Re-expresses this function on `grid` (see [`resample`](Self::resample)).
    pub fn refine(&self, grid: &[f64]) -> Self {
        Self {
            probs: grid.to_vec(),
            values: self.resample(grid),
        }
    }
}

fn validate_knots(probs: &[f64], values: &[f64]) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidQuantile(msg));
    if probs.len() != values.len() {
        return bad(format!(
            "{} probability levels but {} values",
            probs.len(),
            values.len()
        ));
    }
    if probs.len() < 2 {
        return bad("at least two knots are required".into());
    }
    if probs[0] != 0.0 || probs[probs.len() - 1] != 1.0 {
        return bad("probability levels must start at 0 and end at 1".into());
    }
    if let Some(i) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return bad(format!("probability level {i} outside [0, 1]"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return bad(format!("value {i} is not finite"));
    }
    for i in 1..probs.len() {
        if probs[i] < probs[i - 1] {
            return bad(format!("probability levels decrease at knot {i}"));
        }
        if i >= 2 && probs[i] == probs[i - 1] && probs[i - 1] == probs[i - 2] {
            return bad(format!(
                "probability level repeated more than twice at knot {i}"
            ));
        }
        if values[i] < values[i - 1] {
            return bad(format!("values decrease at knot {i}"));
        }
    }
    Ok(())
}

/// Linear-interpolation empirical quantile of sorted data (the usual
/// "type 7" estimator: `h = (n - 1) p`).
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Smallest probability grid on which every input can be represented
/// exactly: the union of all knot levels, with a level doubled wherever any
/// input jumps.
pub fn union_grid<'a, I>(functions: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a QuantileFunction>,
{
    let mut levels: BTreeMap<u64, u8> = BTreeMap::new();
    for q in functions {
        let mut k = 0;
        while k < q.probs.len() {
            let p = q.probs[k];
            let mult = if k + 1 < q.probs.len() && q.probs[k + 1] == p {
                2
            } else {
                1
            };
            // Non-negative floats order like their bit patterns.
            let key = (p + 0.0).to_bits();
            let entry = levels.entry(key).or_insert(0);
            *entry = (*entry).max(mult);
            k += mult as usize;
        }
    }
    let mut grid = Vec::with_capacity(levels.len() + 4);
    for (bits, mult) in levels {
        let p = f64::from_bits(bits);
        for _ in 0..mult {
            grid.push(p);
        }
    }
    grid
}

/// Re-expresses both functions on the union of their knots. Each output is
/// pointwise identical to its input.
pub fn register(
    a: &QuantileFunction,
    b: &QuantileFunction,
) -> (QuantileFunction, QuantileFunction) {
    if a.probs == b.probs {
        return (a.clone(), b.clone());
    }
    let grid = union_grid([a, b]);
    (a.refine(&grid), b.refine(&grid))
}

/// Weighted Wasserstein barycenter: the weighted pointwise average of the
/// quantile functions, exact on their union grid.
pub fn barycenter(functions: &[&QuantileFunction], weights: &[f64]) -> Result<QuantileFunction> {
    if functions.is_empty() {
        return Err(Error::EmptySample);
    }
    if functions.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: functions.len(),
            found: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::NonFiniteInput(format!("barycenter weight {i}")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroKernelMass { neuron: 0 });
    }
    let grid = union_grid(functions.iter().copied());
    let mut acc = vec![0.0; grid.len()];
    for (q, &w) in functions.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (a, v) in acc.iter_mut().zip(q.resample(&grid)) {
            *a += w * v;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    // Rounding can break monotonicity by an ulp between equal neighbours.
    for k in 1..acc.len() {
        if acc[k] < acc[k - 1] {
            acc[k] = acc[k - 1];
        }
    }
    Ok(QuantileFunction {
        probs: grid,
        values: acc,
    })
}

/// `∫ v(p) dp` for values `v` linear between `probs`.
pub(crate) fn segment_mean(probs: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..probs.len() {
        let h = probs[k] - probs[k - 1];
        if h > 0.0 {
            acc += 0.5 * h * (values[k - 1] + values[k]);
        }
    }
    acc
}

/// `∫ d(p)² dp` for `d` linear between `probs`.
pub(crate) fn segment_sq_integral(probs: &[f64], diff: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 1..probs.len() {
        let h = probs[k] - probs[k - 1];
        if h > 0.0 {
            let (d0, d1) = (diff[k - 1], diff[k]);
            acc += h * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(probs: &[f64], values: &[f64]) -> QuantileFunction {
        QuantileFunction::new(probs.to_vec(), values.to_vec()).unwrap()
    }

    #[test]
    fn single_bin_is_identity() {
        let h = HistogramSpec::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let f = QuantileFunction::from_histogram(&h);
        assert_eq!(f.probs(), &[0.0, 1.0]);
        assert_eq!(f.values(), &[0.0, 1.0]);
    }

    #[test]
    fn two_bins_place_knot_at_cumulative_weight() {
        let h = HistogramSpec::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.5]).unwrap();
        let f = QuantileFunction::from_histogram(&h);
        assert_eq!(f.probs(), &[0.0, 0.5, 1.0]);
        assert_eq!(f.values(), &[0.0, 1.0, 3.0]);
    }

    #[test]
    fn median_of_three_bin_histogram() {
        let h = HistogramSpec::new(vec![0.0, 2.0, 4.0, 10.0], vec![0.25, 0.5, 0.25]).unwrap();
        let f = QuantileFunction::from_histogram(&h);
        assert!((f.eval(0.5) - 3.0).abs() < 1e-15);
        // Bisection on the histogram CDF as an independent check.
        let cdf = |x: f64| -> f64 {
            let b = h.breaks();
            let mut acc = 0.0;
            for (k, w) in h.weights().iter().enumerate() {
                if x >= b[k + 1] {
                    acc += w;
                } else if x > b[k] {
                    acc += w * (x - b[k]) / (b[k + 1] - b[k]);
                }
            }
            acc
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((f.eval(0.5) - lo).abs() < 1e-12);
    }

    #[test]
    fn empty_interior_bin_becomes_jump() {
        let h = HistogramSpec::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.5, 0.0, 0.5]).unwrap();
        let f = QuantileFunction::from_histogram(&h);
        assert_eq!(f.probs(), &[0.0, 0.5, 0.5, 1.0]);
        assert_eq!(f.values(), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(f.eval_left(0.5), 1.0);
        assert_eq!(f.eval_right(0.5), 2.0);
        assert!((f.mean() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn empty_edge_bins_are_trimmed() {
        let h = HistogramSpec::new(vec![-1.0, 0.0, 1.0, 5.0], vec![0.0, 1.0, 0.0]).unwrap();
        let f = QuantileFunction::from_histogram(&h);
        assert_eq!(f.probs(), &[0.0, 1.0]);
        assert_eq!(f.values(), &[0.0, 1.0]);
    }

    #[test]
    fn histogram_errors() {
        assert!(matches!(
            HistogramSpec::new(vec![0.0, 1.0, 1.0], vec![0.5, 0.5]),
            Err(Error::NonMonotoneBreaks { index: 2 })
        ));
        assert!(matches!(
            HistogramSpec::new(vec![0.0, 1.0, 3.0], vec![0.5, 0.6]),
            Err(Error::WeightsNotNormalized { .. })
        ));
        assert!(matches!(
            HistogramSpec::new(vec![0.0, 1.0, 3.0], vec![1.5, -0.5]),
            Err(Error::InvalidWeight { index: 1 })
        ));
        assert!(matches!(
            HistogramSpec::new(vec![0.0, 1.0], vec![0.5, 0.5]),
            Err(Error::HistogramShape { .. })
        ));
    }

    #[test]
    fn knot_validation() {
        assert!(QuantileFunction::new(vec![0.0], vec![1.0]).is_err());
        assert!(QuantileFunction::new(vec![0.1, 1.0], vec![0.0, 1.0]).is_err());
        assert!(QuantileFunction::new(vec![0.0, 0.6, 0.5, 1.0], vec![0.0, 1.0, 2.0, 3.0]).is_err());
        assert!(QuantileFunction::new(vec![0.0, 0.5, 1.0], vec![0.0, 2.0, 1.0]).is_err());
        assert!(QuantileFunction::new(vec![0.0, 0.5, 0.5, 0.5, 1.0], vec![0.0; 5]).is_err());
        assert!(QuantileFunction::new(vec![0.0, 1.0], vec![0.0, f64::NAN]).is_err());
        assert!(QuantileFunction::new(vec![0.0, 0.5, 0.5, 1.0], vec![0.0, 1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let f = QuantileFunction::from_samples(&[5.0; 4], 2).unwrap();
        assert!(f.is_degenerate());
        for p in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(f.eval(p), 5.0);
        }
    }

    #[test]
    fn sample_edges_use_linear_estimator() {
        let f = QuantileFunction::from_samples(&[3.0, 1.0, 0.0, 2.0], 2).unwrap();
        // h = 3 p: p = .5 falls halfway between the 2nd and 3rd order statistics.
        assert_eq!(f.probs(), &[0.0, 0.5, 1.0]);
        assert_eq!(f.values(), &[0.0, 1.5, 3.0]);
    }

    #[test]
    fn equi_depth_bins_hold_equal_shares() {
        let samples: Vec<f64> = (1..=125).map(f64::from).collect();
        let f = QuantileFunction::from_samples(&samples, 10).unwrap();
        let edges = f.values();
        assert_eq!(edges.len(), 11);
        let mut total = 0;
        for k in 0..10 {
            let count = samples
                .iter()
                .filter(|&&x| x >= edges[k] && (x < edges[k + 1] || (k == 9 && x <= edges[k + 1])))
                .count();
            total += count;
            assert!(
                (count as f64 - 12.5).abs() <= 0.5 + 1e-12,
                "bin {k} holds {count}"
            );
        }
        assert_eq!(total, 125);
    }

    #[test]
    fn sample_errors() {
        assert!(matches!(
            QuantileFunction::from_samples(&[], 3),
            Err(Error::EmptySample)
        ));
        assert!(QuantileFunction::from_samples(&[1.0], 0).is_err());
        assert!(QuantileFunction::from_samples(&[1.0, f64::INFINITY], 2).is_err());
    }

    #[test]
    fn register_adds_interpolated_knot() {
        let a = q(&[0.0, 1.0], &[0.0, 2.0]);
        let b = q(&[0.0, 0.5, 1.0], &[0.0, 1.0, 5.0]);
        let (ra, rb) = register(&a, &b);
        assert_eq!(ra.probs(), &[0.0, 0.5, 1.0]);
        assert_eq!(ra.values(), &[0.0, 1.0, 2.0]);
        assert_eq!(rb, b);
    }

    #[test]
    fn register_identical_grids_is_identity() {
        let a = q(&[0.0, 0.3, 1.0], &[0.0, 1.0, 2.0]);
        let b = q(&[0.0, 0.3, 1.0], &[4.0, 5.0, 9.0]);
        let (ra, rb) = register(&a, &b);
        assert_eq!(ra, a);
        assert_eq!(rb, b);
    }

    #[test]
    fn register_preserves_jumps() {
        let a = q(&[0.0, 0.5, 0.5, 1.0], &[0.0, 1.0, 2.0, 3.0]);
        let b = q(&[0.0, 0.25, 1.0], &[0.0, 1.0, 2.0]);
        let (ra, rb) = register(&a, &b);
        assert_eq!(ra.probs(), &[0.0, 0.25, 0.5, 0.5, 1.0]);
        assert_eq!(rb.probs(), ra.probs());
        assert_eq!(rb.values()[2], rb.values()[3]);
        for k in 0..=200 {
            let p = k as f64 / 200.0;
            assert_eq!(ra.eval_left(p), a.eval_left(p));
            assert_eq!(ra.eval_right(p), a.eval_right(p));
            assert!((rb.eval(p) - b.eval(p)).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_examples() {
        assert_eq!(q(&[0.0, 1.0], &[0.0, 1.0]).mean(), 0.5);
        assert_eq!(QuantileFunction::dirac(3.5).mean(), 3.5);
        let f = q(&[0.0, 0.5, 1.0], &[0.0, 1.0, 3.0]);
        assert!((f.mean() - 1.25).abs() < 1e-15);
        // Midpoint-rule quadrature as a cross-check.
        let n = 100_000;
        let quad: f64 = (0..n)
            .map(|k| f.eval((k as f64 + 0.5) / n as f64))
            .sum::<f64>()
            / n as f64;
        assert!((quad - 1.25).abs() < 1e-9);
    }

    #[test]
    fn centering() {
        let c = q(&[0.0, 1.0], &[0.0, 1.0]).center();
        assert_eq!(c.values(), &[-0.5, 0.5]);
        let d = QuantileFunction::dirac(7.0).center();
        assert_eq!(d.values(), &[0.0, 0.0]);
    }

    #[test]
    fn barycenter_of_diracs() {
        let a = QuantileFunction::dirac(0.0);
        let b = QuantileFunction::dirac(2.0);
        assert_eq!(
            barycenter(&[&a, &b], &[1.0, 1.0]).unwrap().values(),
            &[1.0, 1.0]
        );
        assert_eq!(
            barycenter(&[&a, &b], &[3.0, 1.0]).unwrap().values(),
            &[0.5, 0.5]
        );
        assert!(barycenter(&[&a, &b], &[0.0, 0.0]).is_err());
    }
}
