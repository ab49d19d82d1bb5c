//! End-to-end runs: load, train, evaluate and write artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    align_labels, load_artifacts, load_labels, load_table, read_json, write_artifacts,
    write_atomic, write_json, MapArtifacts, TableFormat, REPORT_FILE,
};
use crate::svg::{counts_svg, weight_maps};
use crate::table::DistributionalTable;
use crate::topology::{suggest_map_size, MapGrid, NeuronMetric, Topology};
use crate::train::{
    apply_scales, multi_restart, Method, TrainConfig, TrainedMap, DEFAULT_EPOCHS,
    DEFAULT_MAX_FINAL_CYCLES,
};
use crate::validity::{evaluate_map, internal_indexes, IndexReport};
use crate::weights::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Algorithm {
    #[default]
    #[serde(rename = "DBSOM", alias = "dbsom")]
    Dbsom,
    #[serde(rename = "ADBSOM", alias = "adbsom")]
    Adbsom,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DBSOM" => Ok(Algorithm::Dbsom),
            "ADBSOM" => Ok(Algorithm::Adbsom),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

fn default_restarts() -> usize {
    20
}

/// Options of a training run. Every field has a default so a config file
/// may set any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub scheme: Option<Scheme>,
    pub standardize: bool,
    /// Map rows; with `cols`, chosen from the table size when absent.
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub topology: Topology,
    pub metric: NeuronMetric,
    pub n_iter: usize,
    pub t_max: Option<f64>,
    pub t_min: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
    pub max_final_cycles: usize,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Class labels (`id,label` CSV) for the external indexes; labels
    /// stored in the table are used otherwise.
    pub labels: Option<PathBuf>,
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Dbsom,
            scheme: None,
            standardize: false,
            rows: None,
            cols: None,
            topology: Topology::Planar,
            metric: NeuronMetric::Euclidean,
            n_iter: DEFAULT_EPOCHS,
            t_max: None,
            t_min: None,
            restarts: default_restarts(),
            seed: 0,
            max_final_cycles: DEFAULT_MAX_FINAL_CYCLES,
            input: None,
            output: None,
            labels: None,
            svg: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.algorithm, self.scheme) {
            (Algorithm::Adbsom, None) => {
                return Err(Error::InvalidConfig("ADBSOM needs a weight scheme".into()))
            }
            (Algorithm::Dbsom, Some(s)) => {
                return Err(Error::InvalidConfig(format!(
                    "DBSOM does not take a weight scheme (got {s})"
                )))
            }
            _ => {}
        }
        if self.rows.is_some() != self.cols.is_some() {
            return Err(Error::InvalidConfig(
                "set both rows and cols, or neither".into(),
            ));
        }
        if self.n_iter == 0 {
            return Err(Error::InvalidConfig("n_iter must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.max_final_cycles == 0 {
            return Err(Error::InvalidConfig(
                "max_final_cycles must be at least 1".into(),
            ));
        }
        for (name, v) in [("t_max", self.t_max), ("t_min", self.t_min)] {
            if let Some(t) = v {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "{name} must be positive, got {t}"
                    )));
                }
            }
        }
        if let (Some(a), Some(b)) = (self.t_max, self.t_min) {
            if a < b {
                return Err(Error::InvalidConfig(format!(
                    "t_max ({a}) is smaller than t_min ({b})"
                )));
            }
        }
        Ok(())
    }

    pub fn method(&self) -> Method {
        match self.scheme {
            Some(s) if self.algorithm == Algorithm::Adbsom => Method::Adbsom(s),
            _ => Method::Dbsom,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            method: self.method(),
            n_iter: self.n_iter,
            t_max: self.t_max,
            t_min: self.t_min,
            seed: self.seed,
            standardize: self.standardize,
            max_final_cycles: self.max_final_cycles,
        }
    }

    pub fn grid_for(&self, n_objects: usize) -> Result<MapGrid> {
        let (rows, cols) = match (self.rows, self.cols) {
            (Some(r), Some(c)) => (r, c),
            _ => suggest_map_size(n_objects),
        };
        MapGrid::with_metric(rows, cols, self.topology, self.metric)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub map: TrainedMap,
    pub report: IndexReport,
    pub written: Vec<PathBuf>,
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("missing {what}")))
}

fn table_labels(table: &DistributionalTable, labels: Option<&Path>) -> Result<Option<Vec<String>>> {
    match labels {
        Some(path) => Ok(Some(align_labels(table.objects(), &load_labels(path)?)?)),
        None => Ok(table.labels().map(<[String]>::to_vec)),
    }
}

/// Trains on `table` and writes every artifact into `output`.
pub fn run_table(
    config: &RunConfig,
    table: &DistributionalTable,
    output: &Path,
) -> Result<RunOutcome> {
    config.validate()?;
    let grid = config.grid_for(table.n_objects())?;
    let map = multi_restart(table, &grid, &config.train_config(), config.restarts)?;
    let labels = table_labels(table, config.labels.as_deref())?;
    let report = evaluate_map(table, &map, labels.as_deref())?;
    write_artifacts(output, &map, table, config.restarts)?;
    write_json(&output.join(REPORT_FILE), &report)?;
    let mut written: Vec<PathBuf> = ["map.json", "prototypes.json", "weights.json", REPORT_FILE]
        .iter()
        .map(|f| output.join(f))
        .collect();
    if config.svg {
        written.extend(write_svgs(&load_artifacts(output)?, output)?);
    }
    Ok(RunOutcome {
        map,
        report,
        written,
    })
}

/// Loads `config.input` and trains into `config.output`.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let input = required(&config.input, "input table")?;
    let output = required(&config.output, "output directory")?;
    let table = load_table(input, TableFormat::from_path(input))?;
    run_table(config, &table, output)
}

/// Recomputes the report of a written map with external indexes against
/// `labels`. Internal indexes are recomputed when `table` is given, else
/// taken from an existing report in `map_dir`.
pub fn evaluate(map_dir: &Path, labels: &Path, table: Option<&Path>) -> Result<IndexReport> {
    let art = load_artifacts(map_dir)?;
    let aligned = align_labels(&art.map.objects, &load_labels(labels)?)?;
    let base = match table {
        Some(path) => {
            let t = load_table(path, TableFormat::from_path(path))?;
            if t.objects() != art.map.objects.as_slice() {
                return Err(Error::parse(
                    path.display().to_string(),
                    "table objects differ from the objects of the map",
                ));
            }
            let data = match &art.map.training.scales {
                Some(s) => apply_scales(&t, s)?,
                None => t,
            };
            internal_indexes(
                &data,
                &art.prototypes,
                art.weights.as_ref(),
                &art.grid,
                art.map.training.t_min,
                &art.map.bmu,
            )?
        }
        None => {
            let existing = map_dir.join(REPORT_FILE);
            if existing.exists() {
                read_json(&existing)?
            } else {
                IndexReport::default()
            }
        }
    };
    let report = base.with_labels(&aligned, &art.map.bmu)?;
    write_json(&map_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

fn write_svgs(art: &MapArtifacts, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::new();
    let path = out.join("counts.svg");
    write_atomic(&path, counts_svg(&art.grid, &art.map.counts).as_bytes())?;
    written.push(path);
    if let Some(w) = &art.weights {
        for (name, svg) in weight_maps(&art.grid, w, &art.map.variables) {
            let path = out.join(name);
            write_atomic(&path, svg.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Renders `counts.svg` and the weight maps of the map in `map_dir`.
pub fn export_svg(map_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let art = load_artifacts(map_dir)?;
    write_svgs(&art, out)
}
