//! Scenario files, schema `cqlqg.scenario/v1`.
//!
//! Matrices are nested row arrays. Every plant matrix, controller gain and
//! `R` is either one matrix (constant over the grid) or a list of `N + 1`
//! matrices, one per node.

use std::path::Path;

use cqlqg_core::bvp::{Problem, Regularization, SolverConfig};
use cqlqg_core::dynamics::TimeGrid;
use cqlqg_core::model::{
    ControllerParams, ControllerSchedule, CostWeights, Dimensions, Interpolate, PlantMatrices, QuantumPlant, Sampled,
};
use cqlqg_core::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCENARIO_SCHEMA: &str = "cqlqg.scenario/v1";

pub type Rows = Vec<Vec<f64>>;

/// One matrix, or one matrix per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Constant(Rows),
    PerNode(Vec<Rows>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsSpec {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub p1: usize,
    pub p2: usize,
    pub r: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub a: Series,
    pub b: Series,
    pub c: Series,
    pub d: Series,
    pub e: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub f: Rows,
    pub g: Rows,
}

/// Controller gains for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub b: Series,
    pub e: Series,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub relaxation: f64,
    pub max_iterations: usize,
    pub gain_tolerance: f64,
    pub regularization: Regularization,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Series>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            relaxation: c.relaxation,
            max_iterations: c.max_iterations,
            gain_tolerance: c.gain_tolerance,
            regularization: c.regularization,
            r: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub dims: DimsSpec,
    pub grid: GridSpec,
    pub plant: PlantSpec,
    pub k1: Rows,
    pub d: Rows,
    pub weights: WeightsSpec,
    pub p0: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub seed: u64,
}

fn matrix(rows: &Rows, name: &str) -> Result<Matrix, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(CliError::Validation(format!("{name} is empty")));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Validation(format!("{name} has rows of different lengths")));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &Matrix) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl Series {
    fn sampled(&self, name: &str, steps: usize) -> Result<Sampled<Matrix>, CliError> {
        let s = match self {
            Series::Constant(r) => Sampled::constant(matrix(r, name)?),
            Series::PerNode(list) => {
                let ms = list
                    .iter()
                    .enumerate()
                    .map(|(k, r)| matrix(r, &format!("{name}[{k}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                Sampled::per_node(ms).map_err(|e| CliError::Validation(format!("{name}: {e}")))?
            }
        };
        s.check_len(steps).map_err(|e| CliError::Validation(format!("{name}: {e}")))?;
        Ok(s)
    }

    fn from_sampled(s: &Sampled<Matrix>) -> Self {
        if s.is_constant() {
            Series::Constant(rows(&s.samples()[0]))
        } else {
            Series::PerNode(s.samples().iter().map(rows).collect())
        }
    }
}

/// All-constant inputs stay constant; otherwise every input is expanded to
/// the nodes.
fn zip_nodes<T: Clone + Interpolate>(parts: &[Sampled<Matrix>], steps: usize, build: impl Fn(&[Matrix]) -> T) -> Sampled<T> {
    if parts.iter().all(Sampled::is_constant) {
        let first: Vec<Matrix> = parts.iter().map(|p| p.samples()[0].clone()).collect();
        return Sampled::constant(build(&first));
    }
    let expanded: Vec<Vec<Matrix>> = parts.iter().map(|p| p.expand(steps)).collect();
    let nodes = (0..=steps)
        .map(|k| {
            let at: Vec<Matrix> = expanded.iter().map(|e| e[k].clone()).collect();
            build(&at)
        })
        .collect();
    Sampled::per_node(nodes).expect("at least one node")
}

impl Scenario {
    pub fn dimensions(&self) -> Result<Dimensions, CliError> {
        let DimsSpec { n, m1, m2, p1, p2, r } = self.dims;
        Ok(Dimensions::new(n, m1, m2, p1, p2, r)?)
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        Ok(TimeGrid::new(self.grid.horizon, self.grid.steps)?)
    }

    pub fn plant_series(&self) -> Result<Sampled<PlantMatrices>, CliError> {
        let steps = self.grid.steps;
        let p = &self.plant;
        let parts = [
            p.a.sampled("plant.a", steps)?,
            p.b.sampled("plant.b", steps)?,
            p.c.sampled("plant.c", steps)?,
            p.d.sampled("plant.d", steps)?,
            p.e.sampled("plant.e", steps)?,
        ];
        Ok(zip_nodes(&parts, steps, |m| PlantMatrices {
            a: m[0].clone(),
            b: m[1].clone(),
            c: m[2].clone(),
            d: m[3].clone(),
            e: m[4].clone(),
        }))
    }

    pub fn k1(&self) -> Result<Matrix, CliError> {
        matrix(&self.k1, "k1")
    }

    pub fn coupling(&self) -> Result<Matrix, CliError> {
        matrix(&self.d, "d")
    }

    pub fn p0(&self) -> Result<Matrix, CliError> {
        matrix(&self.p0, "p0")
    }

    pub fn weights(&self) -> Result<CostWeights, CliError> {
        Ok(CostWeights {
            f: matrix(&self.weights.f, "weights.f")?,
            g: matrix(&self.weights.g, "weights.g")?,
        })
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let dims = self.dimensions()?;
        let plant = QuantumPlant::new(self.plant_series()?, self.k1()?, &dims)?;
        Ok(Problem::new(dims, plant, self.coupling()?, self.weights()?, self.p0()?, self.grid()?)?)
    }

    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        let config = SolverConfig {
            relaxation: s.relaxation,
            max_iterations: s.max_iterations,
            gain_tolerance: s.gain_tolerance,
            regularization: s.regularization,
            r_schedule: s.r.as_ref().map(|r| r.sampled("solver.r", self.grid.steps)).transpose()?,
        };
        config.validate()?;
        Ok(config)
    }

    /// The controller schedule of the `controller` section with `R` from the
    /// solver section.
    pub fn controller(&self) -> Result<Option<ControllerSchedule>, CliError> {
        let Some(spec) = &self.controller else {
            return Ok(None);
        };
        let steps = self.grid.steps;
        let n = self.dims.n;
        let r = match &self.solver.r {
            Some(r) => r.sampled("solver.r", steps)?,
            None => Sampled::constant(Matrix::zeros(n, n)),
        };
        let parts = [spec.b.sampled("controller.b", steps)?, spec.e.sampled("controller.e", steps)?, r];
        Ok(Some(zip_nodes(&parts, steps, |m| ControllerParams {
            b: m[0].clone(),
            e: m[1].clone(),
            r: m[2].clone(),
        })))
    }

    /// Scenario describing `problem` under `config`.
    pub fn from_problem(problem: &Problem, config: &SolverConfig, seed: u64) -> Self {
        let Dimensions { n, m1, m2, p1, p2, r } = problem.dims;
        let plant = &problem.plant.matrices;
        let series = |f: fn(&PlantMatrices) -> &Matrix| Series::from_sampled(&plant.map(|m| f(m).clone()));
        Self {
            schema: SCENARIO_SCHEMA.into(),
            dims: DimsSpec { n, m1, m2, p1, p2, r },
            grid: GridSpec {
                horizon: problem.grid.horizon(),
                steps: problem.grid.steps(),
            },
            plant: PlantSpec {
                a: series(|m| &m.a),
                b: series(|m| &m.b),
                c: series(|m| &m.c),
                d: series(|m| &m.d),
                e: series(|m| &m.e),
            },
            k1: rows(&problem.plant.k1),
            d: rows(&problem.d),
            weights: WeightsSpec {
                f: rows(&problem.weights.f),
                g: rows(&problem.weights.g),
            },
            p0: rows(&problem.p0),
            controller: None,
            solver: SolverSpec {
                relaxation: config.relaxation,
                max_iterations: config.max_iterations,
                gain_tolerance: config.gain_tolerance,
                regularization: config.regularization,
                r: config.r_schedule.as_ref().map(Series::from_sampled),
            },
            seed,
        }
    }
}

/// The acceptance scenario with seed 1 and default solver settings.
pub fn template() -> Scenario {
    let problem = cqlqg_core::scenarios::scenario(1).expect("built-in scenario is valid");
    Scenario::from_problem(&problem, &SolverConfig::default(), 1)
}

/// Applies `path=value` overrides. Path segments are object keys or array
/// indices separated by dots; values are JSON, or plain strings otherwise.
pub fn apply_overrides(doc: &mut Value, sets: &[String]) -> Result<(), CliError> {
    for set in sets {
        let (path, raw) = set
            .split_once('=')
            .ok_or_else(|| CliError::Override(format!("{set}: expected path=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut target = &mut *doc;
        let segments: Vec<&str> = path.split('.').collect();
        if segments.iter().any(|s| s.is_empty()) {
            return Err(CliError::Override(format!("{set}: empty path segment")));
        }
        for (i, seg) in segments.iter().enumerate() {
            let last = i + 1 == segments.len();
            target = match target {
                Value::Object(map) => {
                    if last {
                        map.insert(seg.to_string(), value.clone());
                        break;
                    }
                    map.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(items) => {
                    let idx: usize = seg
                        .parse()
                        .map_err(|_| CliError::Override(format!("{set}: '{seg}' is not an array index")))?;
                    let len = items.len();
                    let slot = items
                        .get_mut(idx)
                        .ok_or_else(|| CliError::Override(format!("{set}: index {idx} out of range (length {len})")))?;
                    if last {
                        *slot = value.clone();
                        break;
                    }
                    slot
                }
                _ => {
                    let prefix = segments[..i].join(".");
                    return Err(CliError::Override(format!("{set}: '{prefix}' is not an object or array")));
                }
            };
        }
    }
    Ok(())
}

/// Typed scenario from a JSON document; errors carry the field path.
pub fn from_value(doc: Value) -> Result<Scenario, CliError> {
    let scenario: Scenario =
        serde_path_to_error::deserialize(doc).map_err(|e| CliError::Parse(format!("{}: {}", e.path(), e.inner())))?;
    if scenario.schema != SCENARIO_SCHEMA {
        return Err(CliError::Parse(format!(
            "schema: expected \"{SCENARIO_SCHEMA}\", found \"{}\"",
            scenario.schema
        )));
    }
    Ok(scenario)
}

pub fn parse(text: &str, sets: &[String]) -> Result<Scenario, CliError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    apply_overrides(&mut doc, sets)?;
    from_value(doc)
}

pub fn load(path: &Path, sets: &[String]) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text, sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn template_round_trips() {
        let t = template();
        let text = serde_json::to_string_pretty(&t).unwrap();
        let back = parse(&text, &[]).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.problem().unwrap(), cqlqg_core::scenarios::scenario(1).unwrap());
    }

    #[test]
    fn overrides_edit_nested_values() {
        let mut doc = json!({"grid": {"steps": 10}, "k1": [[0.0, 1.0], [-1.0, 0.0]]});
        let sets = ["grid.steps=40".to_string(), "k1.0.1=2.5".into(), "solver.regularization=fail".into()];
        apply_overrides(&mut doc, &sets).unwrap();
        assert_eq!(doc["grid"]["steps"], json!(40));
        assert_eq!(doc["k1"][0][1], json!(2.5));
        assert_eq!(doc["solver"]["regularization"], json!("fail"));
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let mut doc = json!({"k1": [[0.0]], "seed": 1});
        for bad in ["k1", "k1.x=1", "k1.5=1", "seed.a=1", "a..b=1"] {
            assert!(matches!(apply_overrides(&mut doc, &[bad.into()]), Err(CliError::Override(_))), "{bad}");
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let mut doc = serde_json::to_value(template()).unwrap();
        doc["grid"]["steps"] = json!("many");
        let err = from_value(doc).unwrap_err().to_string();
        assert!(err.contains("grid.steps"), "{err}");
        let mut doc = serde_json::to_value(template()).unwrap();
        doc["schema"] = json!("other/v0");
        assert!(from_value(doc).unwrap_err().to_string().contains("schema"));
    }

    #[test]
    fn per_node_series_expand_constants() {
        let mut s = template();
        s.grid.steps = 3;
        let a = match &s.plant.a {
            Series::Constant(r) => r.clone(),
            Series::PerNode(_) => unreachable!(),
        };
        s.plant.a = Series::PerNode(vec![a; 4]);
        let plant = s.plant_series().unwrap();
        assert_eq!(plant.samples().len(), 4);
        assert_eq!(plant.node(3).b, plant.node(0).b);
        s.plant.a = Series::PerNode(vec![vec![vec![0.0; 2]; 2]; 2]);
        assert!(matches!(s.plant_series(), Err(CliError::Validation(_))));
    }

    #[test]
    fn ragged_matrices_are_rejected() {
        assert!(matrix(&vec![vec![1.0, 2.0], vec![3.0]], "x").is_err());
        assert!(matrix(&vec![], "x").is_err());
    }
}
