//! Batch SOM training for distributional data, with and without adaptive
//! distances.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::quantile::{barycenter, QuantileFunction};
use crate::table::{standardize_with_scales, DistributionalTable};
use crate::topology::{default_radii, radius_schedule, KernelParams, MapGrid};
use crate::weights::{Scheme, WeightMatrix};

/// Default number of epochs.
pub const DEFAULT_EPOCHS: usize = 50;

/// Default cap on the repeat cycles of the final iteration.
pub const DEFAULT_MAX_FINAL_CYCLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "scheme")]
pub enum Method {
    #[serde(rename = "DBSOM")]
    Dbsom,
    #[serde(rename = "ADBSOM")]
    Adbsom(Scheme),
}

impl Method {
    pub fn scheme(self) -> Option<Scheme> {
        match self {
            Method::Dbsom => None,
            Method::Adbsom(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub method: Method,
    pub n_iter: usize,
    /// Initial radius; derived from the grid when absent.
    pub t_max: Option<f64>,
    /// Final radius; derived from the grid when absent.
    pub t_min: Option<f64>,
    pub seed: u64,
    /// Divide every variable by its Fréchet standard deviation first.
    pub standardize: bool,
    pub max_final_cycles: usize,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            n_iter: DEFAULT_EPOCHS,
            t_max: None,
            t_min: None,
            seed: 0,
            standardize: false,
            max_final_cycles: DEFAULT_MAX_FINAL_CYCLES,
        }
    }

    pub fn kernel_params(&self, grid: &MapGrid) -> Result<KernelParams> {
        let (dmax, dmin) = default_radii(grid);
        KernelParams::new(
            self.t_max.unwrap_or(dmax),
            self.t_min.unwrap_or(dmin),
            self.n_iter,
        )
    }
}

/// `M × P` prototype quantile functions, neuron-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    neurons: usize,
    variables: usize,
    cells: Vec<QuantileFunction>,
}

impl Prototypes {
    pub fn new(neurons: usize, variables: usize, cells: Vec<QuantileFunction>) -> Result<Self> {
        if cells.len() != neurons * variables {
            return Err(Error::DimensionMismatch {
                expected: neurons * variables,
                found: cells.len(),
            });
        }
        Ok(Self::from_cells(neurons, variables, cells))
    }

    pub(crate) fn from_cells(
        neurons: usize,
        variables: usize,
        cells: Vec<QuantileFunction>,
    ) -> Self {
        Self {
            neurons,
            variables,
            cells,
        }
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn cells(&self) -> &[QuantileFunction] {
        &self.cells
    }

    pub fn cell(&self, m: usize, j: usize) -> &QuantileFunction {
        &self.cells[m * self.variables + j]
    }

    pub fn row(&self, m: usize) -> &[QuantileFunction] {
        &self.cells[m * self.variables..(m + 1) * self.variables]
    }

    pub fn rows(&self) -> Vec<&[QuantileFunction]> {
        (0..self.neurons).map(|m| self.row(m)).collect()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = &QuantileFunction> + Clone + '_ {
        self.cells.iter().skip(j).step_by(self.variables)
    }
}

/// Best matching unit of every object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of objects per neuron.
    pub fn counts(&self, neurons: usize) -> Vec<usize> {
        let mut c = vec![0; neurons];
        for &m in &self.0 {
            c[m] += 1;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// One pass of the decreasing-radius schedule.
    Epoch,
    /// A repeat cycle at the final radius.
    FinalCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    pub index: usize,
    pub radius: f64,
    pub criterion: f64,
}

/// Snapshot handed to a training observer after every step triple.
#[derive(Debug, Clone, Copy)]
pub struct TrainEvent<'a> {
    pub record: EpochRecord,
    pub weights: Option<&'a WeightMatrix>,
    /// Dispersions that hit the floor in this weighting step.
    pub clamped: usize,
    pub assignment: &'a [usize],
}

#[derive(Debug, Clone)]
pub struct TrainedMap {
    pub grid: MapGrid,
    pub prototypes: Prototypes,
    /// `None` for DBSOM, where every weight is one.
    pub weights: Option<WeightMatrix>,
    pub assignment: Assignment,
    pub history: Vec<EpochRecord>,
    /// Whether the final iteration reached an assignment fixpoint before
    /// the cycle cap.
    pub converged: bool,
    pub config: TrainConfig,
    pub kernel: KernelParams,
    pub restart: usize,
    /// Total number of floored dispersions over all weighting steps.
    pub clamped_dispersions: usize,
    /// Per-variable divisors when the data was standardized.
    pub scales: Option<Vec<f64>>,
}

impl TrainedMap {
    /// Criterion value at the end of training.
    pub fn criterion(&self) -> f64 {
        self.history.last().map(|r| r.criterion).unwrap_or(f64::NAN)
    }

    pub fn final_radius(&self) -> f64 {
        self.kernel.t_min
    }

    pub fn final_cycles(&self) -> impl Iterator<Item = &EpochRecord> {
        self.history.iter().filter(|r| r.phase == Phase::FinalCycle)
    }

    /// The table in the units the map was trained on.
    pub fn training_table(&self, table: &DistributionalTable) -> Result<DistributionalTable> {
        match &self.scales {
            None => Ok(table.clone()),
            Some(scales) => apply_scales(table, scales),
        }
    }
}

/// Divides column `j` of `table` by `scales[j]`.
pub fn apply_scales(table: &DistributionalTable, scales: &[f64]) -> Result<DistributionalTable> {
    if scales.len() != table.n_variables() {
        return Err(Error::DimensionMismatch {
            expected: table.n_variables(),
            found: scales.len(),
        });
    }
    let rows = (0..table.n_objects())
        .map(|i| {
            table
                .row(i)
                .iter()
                .zip(scales)
                .map(|(q, s)| {
                    QuantileFunction::new(
                        q.probs().to_vec(),
                        q.values().iter().map(|v| v / s).collect(),
                    )
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    DistributionalTable::from_rows(
        table.objects().to_vec(),
        table.variables().to_vec(),
        rows,
        table.labels().map(<[String]>::to_vec),
    )
}

fn check_finite(table: &DistributionalTable) -> Result<()> {
    for i in 0..table.n_objects() {
        for (j, q) in table.row(i).iter().enumerate() {
            if q.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteInput(format!(
                    "object `{}`, variable `{}`",
                    table.objects()[i],
                    table.variables()[j]
                )));
            }
        }
    }
    Ok(())
}

struct Prepared {
    table: DistributionalTable,
    scales: Option<Vec<f64>>,
    kernel: KernelParams,
}

fn prepare(table: &DistributionalTable, grid: &MapGrid, config: &TrainConfig) -> Result<Prepared> {
    if grid.len() > table.n_objects() {
        return Err(Error::TooManyNeurons {
            neurons: grid.len(),
            objects: table.n_objects(),
        });
    }
    if config.max_final_cycles == 0 {
        return Err(Error::InvalidConfig(
            "the final iteration needs at least one cycle".into(),
        ));
    }
    check_finite(table)?;
    let kernel = config.kernel_params(grid)?;
    let (table, scales) = if config.standardize {
        let (t, s) = standardize_with_scales(table)?;
        (t, Some(s))
    } else {
        (table.clone(), None)
    };
    Ok(Prepared {
        table,
        scales,
        kernel,
    })
}

/// Generator for restart `restart`: one ChaCha8 stream per restart.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn run(
    prep: &Prepared,
    grid: &MapGrid,
    config: &TrainConfig,
    restart: usize,
    observer: &mut dyn FnMut(&TrainEvent<'_>),
) -> Result<TrainedMap> {
    let table = &prep.table;
    let kp = prep.kernel;
    let m = grid.len();
    let p = table.n_variables();
    let scheme = config.method.scheme();

    let mut rng = restart_rng(config.seed, restart);
    let rows = sample(&mut rng, table.n_objects(), m).into_vec();

    let mut engine = Engine::new(table, grid);
    engine.seed_prototypes(&rows);
    let mut weights = scheme.map(|s| WeightMatrix::unit(s, m, p));
    engine.set_radius(kp.t_max)?;
    let mut assignment = engine.assign(weights.as_ref());

    let mut history = Vec::with_capacity(kp.n_iter + 1);
    let mut clamped_total = 0;

    let step = |engine: &mut Engine<'_>,
                weights: &mut Option<WeightMatrix>,
                assignment: &mut Vec<usize>|
     -> Result<usize> {
        engine.represent(assignment)?;
        let mut clamped = 0;
        if let Some(s) = scheme {
            let (w, c) = engine.weigh(s, assignment);
            *weights = Some(w);
            clamped = c;
        }
        *assignment = engine.assign(weights.as_ref());
        Ok(clamped)
    };

    for t in 0..kp.n_iter {
        let radius = radius_schedule(t, &kp);
        engine.set_radius(radius)?;
        let clamped = step(&mut engine, &mut weights, &mut assignment)?;
        clamped_total += clamped;
        let record = EpochRecord {
            phase: Phase::Epoch,
            index: t,
            radius,
            criterion: engine.criterion(weights.as_ref(), &assignment),
        };
        history.push(record);
        observer(&TrainEvent {
            record,
            weights: weights.as_ref(),
            clamped,
            assignment: &assignment,
        });
    }

    engine.set_radius(kp.t_min)?;
    let mut converged = false;
    for cycle in 0..config.max_final_cycles {
        let before = assignment.clone();
        let clamped = step(&mut engine, &mut weights, &mut assignment)?;
        clamped_total += clamped;
        let criterion = engine.criterion(weights.as_ref(), &assignment);
        if !criterion.is_finite() {
            return Err(Error::NonFiniteInput("criterion diverged".into()));
        }
        let record = EpochRecord {
            phase: Phase::FinalCycle,
            index: cycle,
            radius: kp.t_min,
            criterion,
        };
        history.push(record);
        observer(&TrainEvent {
            record,
            weights: weights.as_ref(),
            clamped,
            assignment: &assignment,
        });
        if assignment == before {
            converged = true;
            break;
        }
    }

    Ok(TrainedMap {
        grid: grid.clone(),
        prototypes: engine.prototypes(),
        weights,
        assignment: Assignment(assignment),
        history,
        converged,
        config: config.clone(),
        kernel: kp,
        restart,
        clamped_dispersions: clamped_total,
        scales: prep.scales.clone(),
    })
}

/// One training run (restart 0).
pub fn train(
    table: &DistributionalTable,
    grid: &MapGrid,
    config: &TrainConfig,
) -> Result<TrainedMap> {
    train_observed(table, grid, config, 0, &mut |_| {})
}

/// One training run for restart `restart`, reporting every step to `observer`.
pub fn train_observed(
    table: &DistributionalTable,
    grid: &MapGrid,
    config: &TrainConfig,
    restart: usize,
    observer: &mut dyn FnMut(&TrainEvent<'_>),
) -> Result<TrainedMap> {
    let prep = prepare(table, grid, config)?;
    run(&prep, grid, config, restart, observer)
}

/// Runs `restarts` independent trainings in parallel and keeps the one with
/// the lowest final criterion (lowest restart index on ties).
pub fn multi_restart(
    table: &DistributionalTable,
    grid: &MapGrid,
    config: &TrainConfig,
    restarts: usize,
) -> Result<TrainedMap> {
    if restarts == 0 {
        return Err(Error::InvalidConfig(
            "at least one restart is required".into(),
        ));
    }
    let prep = prepare(table, grid, config)?;
    let runs = (0..restarts)
        .into_par_iter()
        .map(|r| run(&prep, grid, config, r, &mut |_| {}))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<TrainedMap> = None;
    for run in runs {
        match &best {
            Some(b)
                if run.criterion().partial_cmp(&b.criterion())
                    != Some(std::cmp::Ordering::Less) => {}
            _ => best = Some(run),
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Training state used by the stand-alone step functions.
#[derive(Debug, Clone, Copy)]
pub struct MapState<'a> {
    pub prototypes: &'a Prototypes,
    pub weights: Option<&'a WeightMatrix>,
    pub assignment: &'a [usize],
}

fn check_state(table: &DistributionalTable, grid: &MapGrid, assignment: &[usize]) -> Result<()> {
    if assignment.len() != table.n_objects() {
        return Err(Error::DimensionMismatch {
            expected: table.n_objects(),
            found: assignment.len(),
        });
    }
    if let Some(&m) = assignment.iter().find(|&&m| m >= grid.len()) {
        return Err(Error::IndexOutOfRange {
            index: m,
            len: grid.len(),
        });
    }
    Ok(())
}

fn check_weights(
    weights: Option<&WeightMatrix>,
    grid: &MapGrid,
    table: &DistributionalTable,
) -> Result<()> {
    if let Some(w) = weights {
        if w.variables() != table.n_variables() || w.neurons() != grid.len() {
            return Err(Error::SchemeMismatch(format!(
                "weights for {} neurons and {} variables, map has {} and {}",
                w.neurons(),
                w.variables(),
                grid.len(),
                table.n_variables()
            )));
        }
    }
    Ok(())
}

/// `Σ_i d^T(y_i, g_{f(i)})` with plain or adaptive distances.
pub fn criterion(
    table: &DistributionalTable,
    state: MapState<'_>,
    grid: &MapGrid,
    radius: f64,
) -> Result<f64> {
    check_state(table, grid, state.assignment)?;
    check_weights(state.weights, grid, table)?;
    let mut engine = Engine::with_prototypes(table, grid, state.prototypes)?;
    engine.set_radius(radius)?;
    Ok(engine.criterion(state.weights, state.assignment))
}

/// Kernel-weighted barycenter of column `j`, the optimal prototype of
/// neuron `m` for the partition `assignment`.
pub fn representation_step(
    table: &DistributionalTable,
    assignment: &[usize],
    grid: &MapGrid,
    radius: f64,
    m: usize,
    j: usize,
) -> Result<QuantileFunction> {
    check_state(table, grid, assignment)?;
    if m >= grid.len() {
        return Err(Error::IndexOutOfRange {
            index: m,
            len: grid.len(),
        });
    }
    if j >= table.n_variables() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: table.n_variables(),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::NonPositiveRadius(radius));
    }
    // Weights relative to the nearest occupied neuron; the barycenter is
    // invariant to a common factor.
    let d2: Vec<f64> = assignment
        .iter()
        .map(|&r| grid.distance_unchecked(r, m).powi(2))
        .collect();
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d2
        .iter()
        .map(|d| (-(d - dmin) / (2.0 * radius * radius)).exp())
        .collect();
    let cells: Vec<&QuantileFunction> = table.column(j).collect();
    barycenter(&cells, &w).map_err(|e| match e {
        Error::ZeroKernelMass { .. } => Error::ZeroKernelMass { neuron: m },
        other => other,
    })
}

/// Optimal weights at fixed prototypes and partition, and how many
/// dispersions had to be floored.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingOutcome {
    pub weights: WeightMatrix,
    pub clamped: usize,
}

impl WeightingOutcome {
    pub fn degenerate(&self) -> bool {
        self.clamped > 0
    }
}

pub fn weighting_step(
    table: &DistributionalTable,
    prototypes: &Prototypes,
    assignment: &[usize],
    grid: &MapGrid,
    radius: f64,
    scheme: Scheme,
) -> Result<WeightingOutcome> {
    check_state(table, grid, assignment)?;
    let mut engine = Engine::with_prototypes(table, grid, prototypes)?;
    engine.set_radius(radius)?;
    let (weights, clamped) = engine.weigh(scheme, assignment);
    Ok(WeightingOutcome { weights, clamped })
}

/// Best matching units at fixed prototypes and weights.
pub fn assignment_step(
    table: &DistributionalTable,
    prototypes: &Prototypes,
    weights: Option<&WeightMatrix>,
    grid: &MapGrid,
    radius: f64,
) -> Result<Assignment> {
    check_weights(weights, grid, table)?;
    let mut engine = Engine::with_prototypes(table, grid, prototypes)?;
    engine.set_radius(radius)?;
    Ok(Assignment(engine.assign(weights)))
}
