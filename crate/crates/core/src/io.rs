//! Reading and writing tables and training artifacts.
//!
//! JSON is the canonical table format. Each cell is either a quantile
//! function `{"probs": [...], "values": [...]}` or a histogram
//! `{"breaks": [...], "weights": [...]}`. The CSV form has a header
//! `id[,label],var1,...` and cells `b0;b1;...;bk|w1;...;wk`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile::{HistogramSpec, QuantileFunction};
use crate::table::DistributionalTable;
use crate::topology::{MapGrid, NeuronMetric, Topology};
use crate::train::{Assignment, EpochRecord, Prototypes, TrainedMap};
use crate::weights::{Scheme, WeightMatrix};

pub const MAP_FILE: &str = "map.json";
pub const PROTOTYPES_FILE: &str = "prototypes.json";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Json,
    Csv,
}

impl TableFormat {
    /// Guesses the format from the file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => TableFormat::Csv,
            _ => TableFormat::Json,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellRecord {
    Quantile { probs: Vec<f64>, values: Vec<f64> },
    Histogram { breaks: Vec<f64>, weights: Vec<f64> },
}

impl CellRecord {
    pub fn to_quantile(&self) -> Result<QuantileFunction> {
        match self {
            CellRecord::Quantile { probs, values } => {
                QuantileFunction::new(probs.clone(), values.clone())
            }
            CellRecord::Histogram { breaks, weights } => {
                let h = HistogramSpec::new(breaks.clone(), weights.clone())?;
                Ok(QuantileFunction::from_histogram(&h))
            }
        }
    }
}

impl From<&QuantileFunction> for CellRecord {
    fn from(q: &QuantileFunction) -> Self {
        CellRecord::Quantile {
            probs: q.probs().to_vec(),
            values: q.values().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFile {
    pub variables: Vec<String>,
    pub objects: Vec<ObjectRecord>,
}

impl TableFile {
    pub fn from_table(table: &DistributionalTable) -> Self {
        let labels = table.labels();
        let objects = (0..table.n_objects())
            .map(|i| ObjectRecord {
                id: table.objects()[i].clone(),
                label: labels.map(|l| l[i].clone()),
                cells: table.row(i).iter().map(CellRecord::from).collect(),
            })
            .collect();
        Self {
            variables: table.variables().to_vec(),
            objects,
        }
    }

    pub fn into_table(self) -> Result<DistributionalTable> {
        let p = self.variables.len();
        let has_labels = self.objects.iter().any(|o| o.label.is_some());
        let mut ids = Vec::with_capacity(self.objects.len());
        let mut labels = Vec::new();
        let mut cells = Vec::with_capacity(self.objects.len() * p);
        for (row, o) in self.objects.into_iter().enumerate() {
            if o.cells.len() != p {
                return Err(Error::parse(
                    format!("object {row} (`{}`)", o.id),
                    format!("expected {p} cells, found {}", o.cells.len()),
                ));
            }
            for (j, c) in o.cells.iter().enumerate() {
                cells.push(
                    c.to_quantile()
                        .map_err(|e| violation(&o.id, &self.variables[j], e))?,
                );
            }
            if has_labels {
                match o.label {
                    Some(l) => labels.push(l),
                    None => return Err(Error::MissingLabel(o.id)),
                }
            }
            ids.push(o.id);
        }
        check_unique(&ids)?;
        DistributionalTable::new(ids, self.variables, cells, has_labels.then_some(labels))
    }
}

fn violation(object: &str, variable: &str, e: Error) -> Error {
    Error::InvariantViolation {
        object: object.to_string(),
        variable: variable.to_string(),
        source: Box::new(e),
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashMap::with_capacity(ids.len());
    for (k, id) in ids.iter().enumerate() {
        if let Some(first) = seen.insert(id.as_str(), k) {
            return Err(Error::parse(
                format!("object {k}"),
                format!("duplicate object id `{id}` (first at object {first})"),
            ));
        }
    }
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::parse(format!("{}:{}:{}", path.display(), e.line(), e.column()), e)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

pub fn load_table(path: &Path, format: TableFormat) -> Result<DistributionalTable> {
    match format {
        TableFormat::Json => read_json::<TableFile>(path)?.into_table(),
        TableFormat::Csv => {
            let text = read_to_string(path)?;
            parse_csv_table(&text, &path.display().to_string())
        }
    }
}

/// Parses a table from CSV text; `origin` prefixes error locations.
pub fn parse_csv_table(text: &str, origin: &str) -> Result<DistributionalTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse(format!("{origin}:1"), e))?
        .clone();
    if header.is_empty() || !header[0].eq_ignore_ascii_case("id") {
        return Err(Error::parse(
            format!("{origin}:1"),
            "first column must be `id`",
        ));
    }
    let has_label = header
        .get(1)
        .is_some_and(|h| h.eq_ignore_ascii_case("label"));
    let first_var = if has_label { 2 } else { 1 };
    let variables: Vec<String> = header.iter().skip(first_var).map(str::to_string).collect();
    if variables.is_empty() {
        return Err(Error::parse(format!("{origin}:1"), "no variable columns"));
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut cells = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::parse(format!("{origin}:{line}"), e))?;
        if record.len() != header.len() {
            return Err(Error::parse(
                format!("{origin}:{line}"),
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        let id = record[0].to_string();
        for (j, var) in variables.iter().enumerate() {
            let field = &record[first_var + j];
            let location = format!("{origin}:{line}, field `{var}`");
            let (breaks, weights) = parse_csv_cell(field).map_err(|m| Error::parse(location, m))?;
            let q = HistogramSpec::new(breaks, weights)
                .map(|h| QuantileFunction::from_histogram(&h))
                .map_err(|e| violation(&id, var, e))?;
            cells.push(q);
        }
        if has_label {
            labels.push(record[1].to_string());
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(Error::parse(origin.to_string(), "table has no rows"));
    }
    check_unique(&ids)?;
    DistributionalTable::new(ids, variables, cells, has_label.then_some(labels))
}

fn parse_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(';')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        })
        .collect()
}

/// Splits `b0;...;bk|w1;...;wk` into breaks and weights.
pub fn parse_csv_cell(field: &str) -> std::result::Result<(Vec<f64>, Vec<f64>), String> {
    let (b, w) = field
        .split_once('|')
        .ok_or_else(|| format!("cell `{field}` lacks the `|` between breaks and weights"))?;
    Ok((parse_numbers(b)?, parse_numbers(w)?))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_table(path: &Path, table: &DistributionalTable) -> Result<()> {
    write_json(path, &TableFile::from_table(table))
}

/// Result of windowed aggregation of raw samples.
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub table: DistributionalTable,
    /// Objects whose trailing samples did not fill a window, with the
    /// number of samples dropped per variable.
    pub dropped: Vec<(String, usize)>,
}

struct Series {
    label: Option<String>,
    /// Per variable, in order of first appearance.
    values: BTreeMap<usize, Vec<f64>>,
}

/// Builds one row per object and non-overlapping window of `window`
/// samples from a long CSV with columns `<id columns...>,variable,value`.
///
/// An optional `label` column is carried to the rows of its object. Each
/// cell is the equi-depth histogram of the window with `bins` bins.
pub fn aggregate_samples(path: &Path, window: usize, bins: usize) -> Result<Aggregation> {
    let text = read_to_string(path)?;
    aggregate_samples_str(&text, &path.display().to_string(), window, bins)
}

pub fn aggregate_samples_str(
    text: &str,
    origin: &str,
    window: usize,
    bins: usize,
) -> Result<Aggregation> {
    if bins == 0 || window < bins {
        return Err(Error::InvalidConfig(format!(
            "window ({window}) must hold at least as many samples as bins ({bins}), and bins must be positive"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse(format!("{origin}:1"), e))?
        .clone();
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(var_col), Some(val_col)) = (find("variable"), find("value")) else {
        return Err(Error::parse(
            format!("{origin}:1"),
            "header needs `variable` and `value` columns",
        ));
    };
    let label_col = find("label");
    let id_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != var_col && c != val_col && Some(c) != label_col)
        .collect();
    if id_cols.is_empty() {
        return Err(Error::parse(format!("{origin}:1"), "no object id columns"));
    }

    let mut variables: Vec<String> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut series: HashMap<String, Series> = HashMap::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::parse(format!("{origin}:{line}"), e))?;
        let id = id_cols
            .iter()
            .map(|&c| &record[c])
            .collect::<Vec<_>>()
            .join("/");
        let var = record[var_col].to_string();
        let value: f64 = record[val_col].parse().map_err(|_| {
            Error::parse(
                format!("{origin}:{line}"),
                format!("`{}` is not a number", &record[val_col]),
            )
        })?;
        if !value.is_finite() {
            return Err(Error::NonFiniteInput(format!("{origin}:{line}")));
        }
        let j = *var_index.entry(var.clone()).or_insert_with(|| {
            variables.push(var);
            variables.len() - 1
        });
        let label = label_col.map(|c| record[c].to_string());
        let s = series.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Series {
                label: label.clone(),
                values: BTreeMap::new(),
            }
        });
        if s.label != label {
            return Err(Error::parse(
                format!("{origin}:{line}"),
                format!("object `{id}` has conflicting labels"),
            ));
        }
        s.values.entry(j).or_default().push(value);
    }
    if order.is_empty() {
        return Err(Error::parse(origin.to_string(), "no samples"));
    }

    let p = variables.len();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut cells = Vec::new();
    let mut dropped = Vec::new();
    for id in &order {
        let s = &series[id];
        let lengths: Vec<usize> = (0..p)
            .map(|j| s.values.get(&j).map_or(0, Vec::len))
            .collect();
        if lengths.iter().any(|&l| l != lengths[0]) {
            return Err(Error::RaggedSeries { object: id.clone() });
        }
        let len = lengths[0];
        let full = len / window;
        if len % window > 0 {
            dropped.push((id.clone(), len % window));
        }
        for w in 0..full {
            for j in 0..p {
                let chunk = &s.values[&j][w * window..(w + 1) * window];
                cells.push(QuantileFunction::from_samples(chunk, bins)?);
            }
            ids.push(format!("{id}#{w}"));
            if let Some(l) = &s.label {
                labels.push(l.clone());
            }
        }
    }
    if ids.is_empty() {
        return Err(Error::TooFewObjects {
            required: 1,
            found: 0,
        });
    }
    let labels = label_col.map(|_| labels);
    let table = DistributionalTable::new(ids, variables, cells, labels)?;
    Ok(Aggregation { table, dropped })
}

/// Two-column CSV `id,label`.
pub fn load_labels(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_to_string(path)?;
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(format!("{origin}:{}", k + 2), e))?;
        if record.len() < 2 {
            return Err(Error::parse(
                format!("{origin}:{}", k + 2),
                "expected `id,label`",
            ));
        }
        out.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(out)
}

/// Orders `labels` by `objects`, rejecting unknown and missing ids.
pub fn align_labels(objects: &[String], labels: &[(String, String)]) -> Result<Vec<String>> {
    let index: HashMap<&str, usize> = objects
        .iter()
        .enumerate()
        .map(|(i, o)| (o.as_str(), i))
        .collect();
    let mut out: Vec<Option<String>> = vec![None; objects.len()];
    for (id, label) in labels {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| Error::UnknownObjectId(id.clone()))?;
        out[i] = Some(label.clone());
    }
    out.into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::MissingLabel(objects[i].clone())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub rows: usize,
    pub cols: usize,
    pub topology: Topology,
    pub metric: NeuronMetric,
}

impl GridRecord {
    pub fn to_grid(&self) -> Result<MapGrid> {
        MapGrid::with_metric(self.rows, self.cols, self.topology, self.metric)
    }
}

impl From<&MapGrid> for GridRecord {
    fn from(g: &MapGrid) -> Self {
        Self {
            rows: g.rows(),
            cols: g.cols(),
            topology: g.topology(),
            metric: g.metric(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    /// `DBSOM` or `ADBSOM`.
    pub algorithm: String,
    pub scheme: Option<Scheme>,
    pub standardize: bool,
    pub n_iter: usize,
    pub t_max: f64,
    pub t_min: f64,
    pub seed: u64,
    pub restarts: usize,
    pub restart: usize,
    pub max_final_cycles: usize,
    pub converged: bool,
    pub clamped_dispersions: usize,
    pub criterion: f64,
    pub scales: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub grid: GridRecord,
    pub training: TrainingRecord,
    pub variables: Vec<String>,
    pub objects: Vec<String>,
    pub bmu: Vec<usize>,
    pub counts: Vec<usize>,
    pub history: Vec<EpochRecord>,
}

impl MapFile {
    pub fn new(map: &TrainedMap, table: &DistributionalTable, restarts: usize) -> Self {
        let c = &map.config;
        Self {
            grid: GridRecord::from(&map.grid),
            training: TrainingRecord {
                algorithm: if c.method.scheme().is_some() {
                    "ADBSOM"
                } else {
                    "DBSOM"
                }
                .into(),
                scheme: c.method.scheme(),
                standardize: c.standardize,
                n_iter: c.n_iter,
                t_max: map.kernel.t_max,
                t_min: map.kernel.t_min,
                seed: c.seed,
                restarts,
                restart: map.restart,
                max_final_cycles: c.max_final_cycles,
                converged: map.converged,
                clamped_dispersions: map.clamped_dispersions,
                criterion: map.criterion(),
                scales: map.scales.clone(),
            },
            variables: table.variables().to_vec(),
            objects: table.objects().to_vec(),
            bmu: map.assignment.0.clone(),
            counts: map.assignment.counts(map.grid.len()),
            history: map.history.clone(),
        }
    }

    pub fn assignment(&self) -> Assignment {
        Assignment(self.bmu.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRecord {
    pub neuron: usize,
    pub row: usize,
    pub col: usize,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypesFile {
    pub variables: Vec<String>,
    pub neurons: Vec<NeuronRecord>,
}

impl PrototypesFile {
    pub fn new(prototypes: &Prototypes, grid: &MapGrid, variables: &[String]) -> Self {
        let neurons = (0..prototypes.neurons())
            .map(|m| {
                let (row, col) = grid.row_col(m);
                NeuronRecord {
                    neuron: m,
                    row,
                    col,
                    cells: prototypes.row(m).iter().map(CellRecord::from).collect(),
                }
            })
            .collect();
        Self {
            variables: variables.to_vec(),
            neurons,
        }
    }

    pub fn to_prototypes(&self) -> Result<Prototypes> {
        let p = self.variables.len();
        let mut cells = Vec::with_capacity(self.neurons.len() * p);
        for (m, n) in self.neurons.iter().enumerate() {
            if n.neuron != m || n.cells.len() != p {
                return Err(Error::parse(
                    format!("neuron {m}"),
                    "neurons must be listed in order with one cell per variable",
                ));
            }
            for (j, c) in n.cells.iter().enumerate() {
                cells.push(
                    c.to_quantile()
                        .map_err(|e| violation(&format!("neuron {m}"), &self.variables[j], e))?,
                );
            }
        }
        Prototypes::new(self.neurons.len(), p, cells)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    /// `none` for maps trained without adaptive distances, else `P1`..`P4`.
    pub scheme: String,
    /// `global` (one row) or `cluster` (one row per neuron).
    pub scope: String,
    pub variables: Vec<String>,
    /// Column labels: a variable name, or `name:mean` / `name:dispersion`.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl WeightsFile {
    pub fn new(weights: Option<&WeightMatrix>, variables: &[String]) -> Self {
        match weights {
            None => Self {
                scheme: "none".into(),
                scope: "global".into(),
                variables: variables.to_vec(),
                columns: variables.to_vec(),
                rows: vec![vec![1.0; variables.len()]],
            },
            Some(w) => {
                let columns = if w.scheme().is_component_wise() {
                    variables
                        .iter()
                        .flat_map(|v| [format!("{v}:mean"), format!("{v}:dispersion")])
                        .collect()
                } else {
                    variables.to_vec()
                };
                Self {
                    scheme: w.scheme().code().into(),
                    scope: if w.scheme().is_cluster_wise() {
                        "cluster"
                    } else {
                        "global"
                    }
                    .into(),
                    variables: variables.to_vec(),
                    columns,
                    rows: (0..w.groups()).map(|g| w.group(g).to_vec()).collect(),
                }
            }
        }
    }

    /// The weight matrix, or `None` for scheme `none`.
    pub fn to_weights(&self, neurons: usize) -> Result<Option<WeightMatrix>> {
        if self.scheme == "none" {
            return Ok(None);
        }
        let scheme: Scheme = self.scheme.parse()?;
        let values = self.rows.iter().flatten().copied().collect();
        WeightMatrix::new(scheme, neurons, self.variables.len(), values).map(Some)
    }
}

/// Everything needed to use a trained map after it was written.
#[derive(Debug, Clone)]
pub struct MapArtifacts {
    pub map: MapFile,
    pub grid: MapGrid,
    pub prototypes: Prototypes,
    pub weights: Option<WeightMatrix>,
}

pub fn write_artifacts(
    dir: &Path,
    map: &TrainedMap,
    table: &DistributionalTable,
    restarts: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(MAP_FILE), &MapFile::new(map, table, restarts))?;
    write_json(
        &dir.join(PROTOTYPES_FILE),
        &PrototypesFile::new(&map.prototypes, &map.grid, table.variables()),
    )?;
    write_json(
        &dir.join(WEIGHTS_FILE),
        &WeightsFile::new(map.weights.as_ref(), table.variables()),
    )
}

pub fn load_artifacts(dir: &Path) -> Result<MapArtifacts> {
    let map: MapFile = read_json(&dir.join(MAP_FILE))?;
    let grid = map.grid.to_grid()?;
    let prototypes = read_json::<PrototypesFile>(&dir.join(PROTOTYPES_FILE))?.to_prototypes()?;
    let weights = read_json::<WeightsFile>(&dir.join(WEIGHTS_FILE))?.to_weights(grid.len())?;
    if prototypes.neurons() != grid.len() || map.bmu.len() != map.objects.len() {
        return Err(Error::parse(
            dir.display().to_string(),
            "artifacts disagree on map or table size",
        ));
    }
    if let Some(&m) = map.bmu.iter().find(|&&m| m >= grid.len()) {
        return Err(Error::IndexOutOfRange {
            index: m,
            len: grid.len(),
        });
    }
    Ok(MapArtifacts {
        map,
        grid,
        prototypes,
        weights,
    })
}
