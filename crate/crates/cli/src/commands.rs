use std::fs;
use std::path::{Path, PathBuf};

use cqlqg_core::bvp::{evaluate_candidate, solve_cqlqg, PLANT_PR_TOL};
use cqlqg_core::model::{initial_covariance_margin, initial_theta, realize_controller, validate_controller_pr, validate_plant_pr, PrResidual};
use cqlqg_core::verify::run_suite;
use serde::Serialize;

use crate::error::{CliError, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK};
use crate::output::{write_gains, write_report, write_summary, write_trajectory};
use crate::scenario::{self, Scenario};
use crate::{Cli, Command};

/// Worst residuals over the grid samples.
#[derive(Debug, Serialize)]
pub struct PrSummary {
    pub max_res1: f64,
    pub max_res2: f64,
    pub failing_nodes: Vec<usize>,
    pub pass: bool,
}

impl PrSummary {
    fn from_residuals(res: &[PrResidual]) -> Self {
        let failing_nodes: Vec<usize> = res.iter().enumerate().filter(|(_, r)| !r.pass).map(|(k, _)| k).collect();
        Self {
            max_res1: res.iter().map(|r| r.res1).fold(0.0, f64::max),
            max_res2: res.iter().map(|r| r.res2).fold(0.0, f64::max),
            pass: failing_nodes.is_empty(),
            failing_nodes,
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct ValidateReport {
    pub pass: bool,
    pub plant_pr: Option<PrSummary>,
    pub initial_covariance_margin: Option<f64>,
    pub controller_pr: Option<PrSummary>,
    pub errors: Vec<String>,
}

fn note<T>(errors: &mut Vec<String>, r: Result<T, CliError>) -> Option<T> {
    r.map_err(|e| errors.push(e.to_string())).ok()
}

pub fn validate(s: &Scenario) -> ValidateReport {
    let mut report = ValidateReport::default();
    let errors = &mut report.errors;
    let dims = note(errors, s.dimensions());
    let plant = note(errors, s.plant_series());
    let k1 = note(errors, s.k1());
    let d = note(errors, s.coupling());
    let p0 = note(errors, s.p0());
    note(errors, s.grid());
    note(errors, s.weights());
    note(errors, s.solver_config());
    let controller = note(errors, s.controller()).flatten();

    if let (Some(dims), Some(plant), Some(k1), Some(d)) = (&dims, &plant, &k1, &d) {
        let ccr = dims.ccr();
        let res: Result<Vec<_>, _> =
            plant.samples().iter().map(|m| validate_plant_pr(m, k1, d, &ccr, PLANT_PR_TOL)).collect();
        report.plant_pr = note(errors, res.map_err(CliError::from)).map(|r| PrSummary::from_residuals(&r));
        if let Some(p0) = &p0 {
            if p0.shape() == (2 * dims.n, 2 * dims.n) && k1.shape() == (dims.n, dims.n) {
                let theta0 = initial_theta(k1, &ccr.j0);
                report.initial_covariance_margin = note(errors, initial_covariance_margin(p0, &theta0).map_err(CliError::from));
            }
        }
        if let Some(ctrl) = &controller {
            let steps = s.grid.steps;
            let res: Result<Vec<_>, cqlqg_core::Error> = (0..=steps)
                .map(|k| {
                    let realized = realize_controller(ctrl.node(k), &plant.node(k).d, d, &ccr)?;
                    validate_controller_pr(&realized, &plant.node(k).d, &ccr, PLANT_PR_TOL)
                })
                .collect();
            report.controller_pr = note(errors, res.map_err(CliError::from)).map(|r| PrSummary::from_residuals(&r));
        }
    }
    if errors.is_empty() {
        note(errors, s.problem());
    }
    report.pass = report.errors.is_empty()
        && report.plant_pr.as_ref().is_some_and(|r| r.pass)
        && report.controller_pr.as_ref().is_none_or(|r| r.pass);
    report
}

#[derive(Serialize)]
struct SimulateReport {
    cost: f64,
    theta_drift: f64,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    solve: &'a cqlqg_core::bvp::SolveReport,
    suite: &'a cqlqg_core::verify::SuiteReport,
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    let dir = cli
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("--out is required".into()))?;
    fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.clone(),
        source,
    })?;
    Ok(dir)
}

fn load(cli: &Cli) -> Result<Scenario, CliError> {
    let path: &Path = cli
        .scenario
        .as_deref()
        .ok_or_else(|| CliError::Usage("--scenario is required".into()))?;
    let s = scenario::load(path, &cli.set)?;
    log::info!("loaded {} ({} steps)", path.display(), s.grid.steps);
    Ok(s)
}

fn theta_drift(theta: &[cqlqg_core::Matrix]) -> f64 {
    theta.iter().map(|t| (t - &theta[0]).norm()).fold(0.0, f64::max)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8, CliError> {
    if cli.emit_template {
        let mut doc = serde_json::to_value(scenario::template()).expect("template serializes");
        scenario::apply_overrides(&mut doc, &cli.set)?;
        let s = scenario::from_value(doc)?;
        println!("{}", serde_json::to_string_pretty(&s).expect("template serializes"));
        return Ok(EXIT_OK);
    }
    let s = load(cli)?;
    let dir = out_dir(cli)?;
    match cli.command {
        Command::Validate => {
            let report = validate(&s);
            write_report(&dir, "validate", &report)?;
            for e in &report.errors {
                eprintln!("{e}");
            }
            println!("validate: {}", if report.pass { "pass" } else { "fail" });
            Ok(if report.pass { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Simulate => {
            let problem = s.problem()?;
            let schedule = s
                .controller()?
                .ok_or_else(|| CliError::Validation("simulate needs a controller section".into()))?;
            let (cost, traj) = evaluate_candidate(&problem, &schedule)?;
            write_trajectory(&dir, &problem.grid, &traj)?;
            write_gains(&dir, &problem.grid, &traj.gains)?;
            write_summary(&dir, cost, None, None)?;
            write_report(&dir, "simulate", &SimulateReport {
                cost,
                theta_drift: theta_drift(&traj.theta),
            })?;
            println!("cost {cost:.6e}");
            Ok(EXIT_OK)
        }
        Command::Optimize => {
            let problem = s.problem()?;
            let solution = solve_cqlqg(&problem, &s.solver_config()?)?;
            let report = &solution.report;
            write_trajectory(&dir, &problem.grid, &solution.trajectory)?;
            write_gains(&dir, &problem.grid, &solution.trajectory.gains)?;
            write_summary(&dir, report.cost, Some(report.iterations), Some(report.converged))?;
            write_report(&dir, "optimize", report)?;
            println!(
                "cost {:.6e} after {} iterations ({})",
                report.cost,
                report.iterations,
                if report.converged { "converged" } else { "not converged" }
            );
            Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Verify => {
            let problem = s.problem()?;
            let (solution, suite) = run_suite(&problem, &s.solver_config()?, s.seed)?;
            let report = &solution.report;
            write_trajectory(&dir, &problem.grid, &solution.trajectory)?;
            write_gains(&dir, &problem.grid, &solution.trajectory.gains)?;
            write_summary(&dir, report.cost, Some(report.iterations), Some(report.converged))?;
            write_report(&dir, "verify", &VerifyReport {
                solve: report,
                suite: &suite,
            })?;
            for c in suite.checks.iter().chain(&suite.negative_controls) {
                println!(
                    "{:<28} {:>12.3e} {:>10.1e} {}",
                    c.name,
                    c.residual,
                    c.tolerance,
                    if c.pass { "pass" } else { "fail" }
                );
            }
            Ok(if !report.converged {
                EXIT_NOT_CONVERGED
            } else if suite.pass {
                EXIT_OK
            } else {
                EXIT_INVALID
            })
        }
    }
}
