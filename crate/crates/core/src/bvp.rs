//! Split boundary value problem: `P` runs forward from `P0`, `Q` runs backward
//! from `Q_T = 0`, and the gains couple them pointwise. Solved by damped
//! fixed-point iteration on the gain trajectory.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{theta_drift, ClosedLoopPath, TimeGrid, Trajectory};
use crate::error::{mismatch, Error, Result};
use crate::foundations::{symmetric_eigenvalues, Matrix};
use crate::gains::{gain_b, gain_e, synthesize_gains, BlockView};
use crate::model::{
    check_initial_covariance, check_shape, initial_theta, ClosedLoop, validate_plant_pr, CcrSet, ControllerParams,
    ControllerSchedule, CostWeights, Dimensions, QuantumPlant, Sampled,
};
use crate::operators::SolveMode;

/// Tolerance of the plant PR check performed by [`Problem::new`].
pub const PLANT_PR_TOL: f64 = 1e-9;

/// Tolerance of `P0 + iΘ0/2 ≽ 0`.
pub const COVARIANCE_TOL: f64 = 1e-12;

/// Handling of indefinite gain operators at interior nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    Fail,
    #[default]
    Pseudo,
}

impl Regularization {
    fn mode(self) -> SolveMode {
        match self {
            Self::Fail => SolveMode::Exact,
            Self::Pseudo => SolveMode::Pseudo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub relaxation: f64,
    pub max_iterations: usize,
    pub gain_tolerance: f64,
    pub regularization: Regularization,
    /// Symmetric `R` per node; zero when absent.
    pub r_schedule: Option<Sampled<Matrix>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            relaxation: 0.5,
            max_iterations: 200,
            gain_tolerance: 1e-8,
            regularization: Regularization::Pseudo,
            r_schedule: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if !(self.gain_tolerance > 0.0) {
            return Err(Error::InvalidConfig("gain tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// `R` at every node.
    pub fn r_nodes(&self, n: usize, steps: usize) -> Result<Vec<Matrix>> {
        match &self.r_schedule {
            None => Ok(vec![Matrix::zeros(n, n); steps + 1]),
            Some(r) => {
                r.check_len(steps)?;
                for m in r.samples() {
                    check_shape("R", m, (n, n))?;
                }
                Ok(r.expand(steps))
            }
        }
    }
}

/// A validated synthesis problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub dims: Dimensions,
    pub plant: QuantumPlant,
    /// `p2 × m2` controller-to-plant coupling
    pub d: Matrix,
    pub weights: CostWeights,
    pub p0: Matrix,
    pub grid: TimeGrid,
}

impl Problem {
    pub fn new(
        dims: Dimensions,
        plant: QuantumPlant,
        d: Matrix,
        weights: CostWeights,
        p0: Matrix,
        grid: TimeGrid,
    ) -> Result<Self> {
        dims.validate()?;
        let problem = Self {
            dims,
            plant,
            d,
            weights,
            p0,
            grid,
        };
        problem.check_shapes()?;
        let ccr = dims.ccr();
        for (k, m) in problem.plant.matrices.samples().iter().enumerate() {
            let res = validate_plant_pr(m, &problem.plant.k1, &problem.d, &ccr, PLANT_PR_TOL)?;
            if !res.pass {
                return Err(Error::Precondition(format!(
                    "plant sample {k} is not physically realizable (residuals {:.3e}, {:.3e})",
                    res.res1, res.res2
                )));
            }
        }
        if (&problem.p0 - problem.p0.transpose()).norm() > 1e-12 * (1.0 + problem.p0.norm()) {
            return Err(Error::Precondition("P0 is not symmetric".into()));
        }
        if !check_initial_covariance(&problem.p0, &problem.theta0(), COVARIANCE_TOL)? {
            return Err(Error::Precondition("P0 + iΘ0/2 is not positive semidefinite".into()));
        }
        Ok(problem)
    }

    fn check_shapes(&self) -> Result<()> {
        let Dimensions { n, m2, p2, .. } = self.dims;
        for m in self.plant.matrices.samples() {
            m.check_shapes(&self.dims)?;
        }
        self.plant.matrices.check_len(self.grid.steps())?;
        check_shape("d", &self.d, (p2, m2))?;
        self.weights.check_shapes(&self.dims)?;
        check_shape("P0", &self.p0, (2 * n, 2 * n))
    }

    pub fn ccr(&self) -> CcrSet {
        self.dims.ccr()
    }

    /// `diag(K1, J0)`.
    pub fn theta0(&self) -> Matrix {
        initial_theta(&self.plant.k1, &self.dims.ccr().j0)
    }

    /// Singular-value ratio of `d`.
    pub fn d_condition(&self) -> f64 {
        let sv = self.d.singular_values();
        if sv.min() > 0.0 {
            sv.max() / sv.min()
        } else {
            f64::INFINITY
        }
    }

    /// Integrates the closed loop of a candidate controller schedule.
    pub fn evaluate(&self, schedule: &ControllerSchedule) -> Result<Trajectory> {
        for m in schedule.samples() {
            m.check_shapes(&self.dims)?;
        }
        let ccr = self.ccr();
        let steps = self.grid.steps();
        let path = ClosedLoopPath::build(&self.plant, schedule, &self.d, &self.weights, &ccr, steps)?;
        Trajectory::integrate(&path, &self.p0, &self.theta0(), &ccr.j, &self.grid, schedule.expand(steps))
    }
}

/// Cost and trajectory of a given controller schedule, without optimization.
pub fn evaluate_candidate(problem: &Problem, schedule: &ControllerSchedule) -> Result<(f64, Trajectory)> {
    let traj = problem.evaluate(schedule)?;
    Ok((traj.cost, traj))
}

/// Per-node diagnostics of the final iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeDiagnostics {
    /// `‖𝐇(H22)‖ / (1 + ‖H22‖)`
    pub skew_residual: f64,
    pub m_min_eig: f64,
    pub n_min_eig: f64,
    pub definite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    /// The iteration stopped because an iterate overflowed.
    pub diverged: bool,
    pub iterations: usize,
    pub final_gain_delta: f64,
    pub cost: f64,
    pub cost_history: Vec<f64>,
    /// Cost history is non-increasing after the first iteration.
    pub cost_monotone: bool,
    pub nodes: Vec<NodeDiagnostics>,
    /// Interior nodes where `𝔐` or `𝔑` was not positive definite.
    pub indefinite_nodes: Vec<usize>,
    pub max_skew_residual: f64,
    pub theta_drift: f64,
    pub min_p_eigenvalue: f64,
    pub d_condition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub report: SolveReport,
}

impl Solution {
    /// Turns a non-converged solve into [`Error::NotConverged`].
    pub fn into_converged(self) -> Result<Self> {
        if self.report.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.report.iterations,
                gain_delta: self.report.final_gain_delta,
            })
        }
    }
}

/// Optimal gains at every node for the Gramians of `traj`.
///
/// At the terminal node `Q` vanishes. There `b⋄` is taken at `Q = 0` and
/// `e⋄`, which is invariant under scaling of `Q`, at its left limit, obtained
/// from `Q ≈ (T − t)𝒞ᵀ𝒞` with `𝒞` built from the gains of `traj`.
pub fn gain_map(
    problem: &Problem,
    traj: &Trajectory,
    regularization: Regularization,
) -> Result<Vec<(ControllerParams, NodeDiagnostics)>> {
    let steps = problem.grid.steps();
    let (ps, qs) = (&traj.p, &traj.q);
    if ps.len() != steps + 1 || qs.len() != steps + 1 || traj.gains.len() != steps + 1 {
        return Err(mismatch("trajectories must have N + 1 nodes"));
    }
    let ccr = problem.ccr();
    let r0 = Matrix::zeros(problem.dims.n, problem.dims.n);
    (0..=steps)
        .into_par_iter()
        .map(|k| {
            let plant = problem.plant.matrices.node(k);
            let blocks = BlockView::new(&ps[k], &qs[k])?;
            if k < steps {
                let gp = synthesize_gains(&blocks, plant, &problem.weights, &problem.d, &ccr, regularization.mode())?;
                let diag = NodeDiagnostics {
                    skew_residual: gp.skew_residual,
                    m_min_eig: gp.m_min_eig,
                    n_min_eig: gp.n_min_eig,
                    definite: gp.positive_definite(),
                };
                return Ok((gp.params(r0.clone()), diag));
            }
            let output = ClosedLoop::from_params(plant, &traj.gains[k], &problem.d, &problem.weights, &ccr)?.output_weight();
            let limit = BlockView::new(&ps[k], &output)?;
            let e = gain_e(&limit, plant, &ccr, SolveMode::Pseudo)?;
            let b = gain_b(&blocks, plant, &problem.weights, &problem.d, &ccr, SolveMode::Pseudo)?;
            let diag = NodeDiagnostics {
                skew_residual: limit.skew_hamiltonian_residual(&ccr.j0),
                m_min_eig: e.min_eigenvalue,
                n_min_eig: b.min_eigenvalue,
                definite: e.positive_definite && b.positive_definite,
            };
            Ok((ControllerParams { b: b.gain, e: e.gain, r: r0.clone() }, diag))
        })
        .collect()
}

fn gain_delta(a: &[ControllerParams], b: &[ControllerParams]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (&x.b - &y.b).norm() + (&x.e - &y.e).norm())
        .fold(0.0, f64::max)
}

fn with_r(gains: &[ControllerParams], r: &[Matrix]) -> Vec<ControllerParams> {
    gains
        .iter()
        .zip(r)
        .map(|(g, r)| ControllerParams {
            r: r.clone(),
            ..g.clone()
        })
        .collect()
}

/// Damped fixed-point iteration from zero gains.
///
/// A solve that exhausts `max_iterations` returns its last iterate with
/// `converged = false`. An iterate that overflows ends the solve with the
/// previous finite iterate, `converged = false` and `diverged = true`.
pub fn solve_cqlqg(problem: &Problem, config: &SolverConfig) -> Result<Solution> {
    let zero = vec![ControllerParams::zeros(&problem.dims); problem.grid.steps() + 1];
    solve_from(problem, config, zero)
}

/// As [`solve_cqlqg`], starting from the given gains (their `R` is ignored).
pub fn solve_from(problem: &Problem, config: &SolverConfig, initial: Vec<ControllerParams>) -> Result<Solution> {
    config.validate()?;
    let steps = problem.grid.steps();
    if initial.len() != steps + 1 {
        return Err(Error::LengthMismatch {
            expected: steps + 1,
            actual: initial.len(),
        });
    }
    let r = config.r_nodes(problem.dims.n, steps)?;
    let lambda = config.relaxation;
    let mut gains = initial;
    let mut history = Vec::new();
    let mut last: Option<(Trajectory, Vec<NodeDiagnostics>, f64)> = None;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let schedule = Sampled::per_node(with_r(&gains, &r))?;
        let traj = match problem.evaluate(&schedule) {
            Ok(traj) => traj,
            Err(Error::NonFiniteState { node }) if last.is_some() => {
                log::warn!("iterate {iterations} blew up at node {node}; reporting the last finite iterate");
                let (traj, diagnostics, delta) = last.expect("checked");
                let mut report = build_report(problem, &traj, diagnostics, history, iterations - 1, delta, false);
                report.diverged = true;
                return Ok(Solution {
                    trajectory: traj,
                    report,
                });
            }
            Err(e) => return Err(e),
        };
        history.push(traj.cost);
        let optimal = gain_map(problem, &traj, config.regularization)?;
        let target: Vec<ControllerParams> = optimal.iter().map(|(g, _)| g.clone()).collect();
        let delta = gain_delta(&target, &gains);
        log::debug!("iteration {iterations}: cost {:.12e}, gain delta {delta:.3e}", traj.cost);
        let converged = delta <= config.gain_tolerance;
        let diagnostics: Vec<NodeDiagnostics> = optimal.iter().map(|(_, d)| *d).collect();
        if converged || iterations >= config.max_iterations {
            if !converged {
                log::warn!("no convergence after {iterations} iterations (gain delta {delta:.3e})");
            }
            let report = build_report(problem, &traj, diagnostics, history, iterations, delta, converged);
            return Ok(Solution {
                trajectory: traj,
                report,
            });
        }
        gains = gains
            .iter()
            .zip(&target)
            .map(|(old, new)| ControllerParams {
                b: &old.b * (1.0 - lambda) + &new.b * lambda,
                e: &old.e * (1.0 - lambda) + &new.e * lambda,
                r: old.r.clone(),
            })
            .collect();
        last = Some((traj, diagnostics, delta));
    }
}

fn build_report(
    problem: &Problem,
    traj: &Trajectory,
    nodes: Vec<NodeDiagnostics>,
    cost_history: Vec<f64>,
    iterations: usize,
    final_gain_delta: f64,
    converged: bool,
) -> SolveReport {
    let steps = problem.grid.steps();
    let cost_monotone = cost_history
        .windows(2)
        .skip(1)
        .all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
    let indefinite_nodes = nodes
        .iter()
        .enumerate()
        .filter(|(k, d)| *k < steps && !d.definite)
        .map(|(k, _)| k)
        .collect();
    let max_skew_residual = nodes.iter().map(|d| d.skew_residual).fold(0.0, f64::max);
    let min_p_eigenvalue = traj
        .p
        .iter()
        .map(|p| symmetric_eigenvalues(p)[0])
        .fold(f64::INFINITY, f64::min);
    SolveReport {
        converged,
        diverged: false,
        iterations,
        final_gain_delta,
        cost: traj.cost,
        cost_history,
        cost_monotone,
        nodes,
        indefinite_nodes,
        max_skew_residual,
        theta_drift: theta_drift(&traj.theta),
        min_p_eigenvalue,
        d_condition: problem.d_condition(),
    }
}
