//! CSV tables and JSON reports.
//!
//! - `trajectory.csv`: `node, t`, upper triangles of `P` and `Q` row by row
//!   (`p_i_j`, `q_i_j` with `i ≤ j`, 1-based), `cost_to_date`.
//! - `gains.csv`: `node, t`, column-stacked `b` and `e` (`b_i_j`, `e_i_j`).
//! - `summary.csv`: `cost, iterations, converged`; the last two are empty
//!   for `simulate`.
//!
//! Numbers carry 17 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use cqlqg_core::dynamics::{TimeGrid, Trajectory};
use cqlqg_core::model::ControllerParams;
use cqlqg_core::Matrix;
use serde::Serialize;

use crate::error::CliError;

pub const REPORT_SCHEMA: &str = "cqlqg.report/v1";

pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(header).map_err(csv_error(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_error(path))?;
    }
    w.flush().map_err(write_error(path))
}

fn upper_names(prefix: &str, order: usize) -> impl Iterator<Item = String> + '_ {
    (0..order).flat_map(move |i| (i..order).map(move |j| format!("{prefix}_{}_{}", i + 1, j + 1)))
}

fn upper_values(m: &Matrix) -> impl Iterator<Item = String> + '_ {
    let order = m.nrows();
    (0..order).flat_map(move |i| (i..order).map(move |j| number(m[(i, j)])))
}

fn stacked_names(prefix: &str, m: &Matrix) -> Vec<String> {
    let (rows, cols) = m.shape();
    (0..cols)
        .flat_map(|j| (0..rows).map(move |i| format!("{prefix}_{}_{}", i + 1, j + 1)))
        .collect()
}

pub fn write_trajectory(dir: &Path, grid: &TimeGrid, traj: &Trajectory) -> Result<PathBuf, CliError> {
    let path = dir.join("trajectory.csv");
    let order = traj.p[0].nrows();
    let header: Vec<String> = ["node".to_string(), "t".into()]
        .into_iter()
        .chain(upper_names("p", order))
        .chain(upper_names("q", order))
        .chain(["cost_to_date".to_string()])
        .collect();
    let rows = (0..traj.p.len()).map(|k| {
        [k.to_string(), number(grid.time(k))]
            .into_iter()
            .chain(upper_values(&traj.p[k]))
            .chain(upper_values(&traj.q[k]))
            .chain([number(traj.cost_to_date[k])])
            .collect()
    });
    write_table(&path, &header, rows)?;
    Ok(path)
}

pub fn write_gains(dir: &Path, grid: &TimeGrid, gains: &[ControllerParams]) -> Result<PathBuf, CliError> {
    let path = dir.join("gains.csv");
    let header: Vec<String> = ["node".to_string(), "t".into()]
        .into_iter()
        .chain(stacked_names("b", &gains[0].b))
        .chain(stacked_names("e", &gains[0].e))
        .collect();
    let rows = gains.iter().enumerate().map(|(k, g)| {
        [k.to_string(), number(grid.time(k))]
            .into_iter()
            .chain(g.b.iter().map(|&x| number(x)))
            .chain(g.e.iter().map(|&x| number(x)))
            .collect()
    });
    write_table(&path, &header, rows)?;
    Ok(path)
}

pub fn write_summary(dir: &Path, cost: f64, iterations: Option<usize>, converged: Option<bool>) -> Result<PathBuf, CliError> {
    let path = dir.join("summary.csv");
    let header = ["cost".to_string(), "iterations".into(), "converged".into()];
    let row = vec![
        number(cost),
        iterations.map(|i| i.to_string()).unwrap_or_default(),
        converged.map(|c| c.to_string()).unwrap_or_default(),
    ];
    write_table(&path, &header, std::iter::once(row))?;
    Ok(path)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: &'static str,
    command: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// `<dir>/<command>.json` with the schema id and command name.
pub fn write_report<T: Serialize>(dir: &Path, command: &str, body: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("{command}.json"));
    let text = serde_json::to_string_pretty(&Envelope {
        schema: REPORT_SCHEMA,
        command,
        body,
    })
    .map_err(|e| CliError::Write {
        path: path.clone(),
        source: e.into(),
    })?;
    fs::write(&path, text + "\n").map_err(write_error(&path))?;
    Ok(path)
}
