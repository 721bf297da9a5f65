//! JSON and CSV formats.
//!
//! Matrices are nested row-major arrays; non-finite entries (unvisited rows
//! of an empirical estimate) are written as `null`. Objects are emitted with
//! sorted keys and every float with 17 significant digits, so repeated runs
//! produce byte-identical files and parsing a written file is lossless.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graph::{DistanceMatrix, Graph};
use crate::matrix::Matrix;
use crate::reconstruct::ReconstructionResult;
use crate::recovery::CanonicalRepresentative;
use crate::simulate::EmpiricalData;
use crate::walk::{Conductivity, ObservationData, DEFAULT_ALPHA, DEFAULT_THETA};

/// Environment variable consulted when no seed is given explicitly.
pub const SEED_ENV: &str = "FRACWALK_SEED";

/// On-disk graph description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub observable: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl GraphFile {
    pub fn from_graph(g: &Graph, gamma: Option<&Conductivity>) -> Self {
        Self {
            n: g.n(),
            observable: g.observable_count(),
            edges: g.edges().map(|(x, y)| [x, y]).collect(),
            gamma: gamma.map(|c| c.values().to_vec()),
            alpha: None,
            theta: None,
        }
    }

    pub fn build(&self) -> Result<(Graph, Option<Conductivity>)> {
        let g = Graph::new(self.n, self.observable, self.edges.iter().map(|e| (e[0], e[1])))?;
        let gamma = match &self.gamma {
            None => None,
            Some(v) if v.len() != self.n => {
                return Err(Error::DimensionMismatch(format!(
                    "gamma has {} entries for {} vertices",
                    v.len(),
                    self.n
                )))
            }
            Some(v) => Some(Conductivity::new(v.clone())?),
        };
        Ok((g, gamma))
    }
}

pub fn parse_graph_str(text: &str) -> Result<GraphFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("graph file: {e}")))
}

/// Reads and validates a graph file.
pub fn parse_graph(path: &Path) -> Result<(Graph, Option<Conductivity>)> {
    parse_graph_str(&read(path)?)?.build()
}

pub fn write_graph(g: &Graph, gamma: Option<&Conductivity>) -> String {
    to_json(&to_value(&GraphFile::from_graph(g, gamma)))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

pub fn matrix_to_value(m: &Matrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn matrix_from_value(v: &Value) -> Result<Matrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::Parse("matrix must be an array of rows".into()))?;
    let mut data = Vec::new();
    let mut ncols = None;
    for (i, row) in rows.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::Parse(format!("row {i} is not an array")))?;
        if *ncols.get_or_insert(row.len()) != row.len() {
            return Err(Error::Parse(format!("row {i} has {} entries", row.len())));
        }
        for (j, x) in row.iter().enumerate() {
            data.push(match x {
                Value::Null => f64::NAN,
                _ => x
                    .as_f64()
                    .ok_or_else(|| Error::Parse(format!("entry ({i},{j}) is not a number")))?,
            });
        }
    }
    Ok(Matrix::from_row_slice(rows.len(), ncols.unwrap_or(0), &data))
}

/// Comma-separated rows; blank lines and lines starting with `#` are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number {:?}", t.trim())))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged CSV matrix".into()));
    }
    Ok(Matrix::from_row_slice(rows.len(), ncols, &rows.concat()))
}

/// A bare matrix, or an object holding one under `key`. Files ending in
/// `.csv` are read as CSV.
pub fn read_matrix(path: &Path, key: &str) -> Result<Matrix> {
    let text = read(path)?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        return parse_matrix_csv(&text);
    }
    let v: Value = serde_json::from_str(&text)?;
    match &v {
        Value::Object(map) => matrix_from_value(
            map.get(key)
                .ok_or_else(|| Error::Parse(format!("missing field {key:?}")))?,
        ),
        _ => matrix_from_value(&v),
    }
}

pub fn observation_data_to_value(d: &ObservationData) -> Value {
    json!({
        "observable": d.observable,
        "horizon": d.horizon(),
        "mats": d.mats.iter().map(matrix_to_value).collect::<Vec<_>>(),
    })
}

pub fn observation_data_from_value(v: &Value) -> Result<ObservationData> {
    let mats = v
        .get("mats")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("missing array field \"mats\"".into()))?
        .iter()
        .map(matrix_from_value)
        .collect::<Result<Vec<_>>>()?;
    let observable = match v.get("observable") {
        Some(n) => n
            .as_u64()
            .ok_or_else(|| Error::Parse("\"observable\" must be an integer".into()))? as usize,
        None => mats.first().map_or(0, |m| m.nrows()),
    };
    if observable == 0 {
        return Err(Error::EmptyObservableSet);
    }
    if let Some(i) = mats.iter().position(|m| m.shape() != (observable, observable)) {
        return Err(Error::DimensionMismatch(format!(
            "matrix {} has shape {:?}, expected {observable}×{observable}",
            i + 1,
            mats[i].shape()
        )));
    }
    Ok(ObservationData { observable, mats })
}

pub fn read_observation_data(path: &Path) -> Result<ObservationData> {
    let v: Value = serde_json::from_str(&read(path)?)?;
    observation_data_from_value(&v)
}

pub fn empirical_to_value(e: &EmpiricalData) -> Value {
    let mut v = observation_data_to_value(&e.estimate);
    v["visit_counts"] = json!(e.visit_counts);
    v["noise_floor"] = json!(e.noise_floor());
    v
}

pub fn canonical_to_value(rep: &CanonicalRepresentative) -> Value {
    json!({
        "N": rep.observable,
        "r": rep.rank,
        "Q": matrix_to_value(&rep.q),
        "R1": matrix_to_value(&rep.r1),
        "R2": matrix_to_value(&rep.r2),
    })
}

pub fn canonical_from_value(v: &Value) -> Result<CanonicalRepresentative> {
    let get = |k: &str| v.get(k).ok_or_else(|| Error::Parse(format!("missing field {k:?}")));
    let int = |k: &str| -> Result<usize> {
        get(k)?
            .as_u64()
            .map(|x| x as usize)
            .ok_or_else(|| Error::Parse(format!("{k:?} must be an integer")))
    };
    let rep = CanonicalRepresentative {
        observable: int("N")?,
        rank: int("r")?,
        q: matrix_from_value(get("Q")?)?,
        r1: matrix_from_value(get("R1")?)?,
        r2: matrix_from_value(get("R2")?)?,
    };
    let s = rep.size();
    if rep.q.shape() != (s, s) {
        return Err(Error::DimensionMismatch(format!("Q has shape {:?}, expected {s}×{s}", rep.q.shape())));
    }
    Ok(rep)
}

pub fn distances_to_value(d: &DistanceMatrix) -> Value {
    json!(d.to_rows())
}

pub fn reconstruction_to_value(r: &ReconstructionResult) -> Value {
    json!({
        "n": r.distances.n(),
        "distances": distances_to_value(&r.distances),
        "edges": r.edges.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>(),
        "leaves": r.leaves,
        "neighbours": r.neighbours,
        "sigma1": r.sigma1,
        "sigma2": r.sigma2,
        "scale_convention": r.scale_convention,
    })
}

pub fn report_to_value<T: Serialize>(report: &T) -> Value {
    to_value(report)
}

/// Writes floats as `{:.16e}`, i.e. with 17 significant digits.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Deterministic JSON text with a trailing newline. Object keys come out
/// sorted because `Value` maps are ordered.
pub fn to_json(v: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats);
    v.serialize(&mut ser).expect("writing to memory cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("JSON is UTF-8")
}

/// Settings shared by the commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub theta: f64,
    pub rank_tol: f64,
    pub int_tol: f64,
    pub seed: u64,
    pub steps: usize,
    pub horizon: usize,
    pub burn_in: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            theta: DEFAULT_THETA,
            rank_tol: crate::DEFAULT_RANK_TOL,
            int_tol: crate::DEFAULT_INT_TOL,
            seed: 0,
            steps: 1_000_000,
            horizon: 3,
            burn_in: crate::simulate::DEFAULT_BURN_IN,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("rank_tol", self.rank_tol)?;
        positive("int_tol", self.int_tol)?;
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta must be nonnegative, got {}", self.theta)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("steps must be positive".into()));
        }
        Ok(())
    }

    /// Recovery needs three steps of data.
    pub fn validate_for_recovery(&self) -> Result<()> {
        self.validate()?;
        if self.horizon < 3 {
            return Err(Error::InsufficientData(format!(
                "horizon {} is below 3",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// The explicit seed, else `FRACWALK_SEED`, else `None`.
pub fn resolve_seed(explicit: Option<u64>) -> Result<Option<u64>> {
    if explicit.is_some() {
        return Ok(explicit);
    }
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidParameter(format!("{SEED_ENV}={s:?} is not a u64"))),
        Err(_) => Ok(None),
    }
}
