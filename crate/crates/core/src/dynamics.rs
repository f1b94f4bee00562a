//! Covariance and Gramian dynamics of the closed loop on a uniform grid.
//!
//! All integrators are classical fixed-step RK4. Stage coefficients come from
//! a [`ClosedLoopPath`], which carries the closed loop at every node and every
//! half step.

use rayon::prelude::*;

use crate::error::{mismatch, Error, Result};
use crate::foundations::{all_finite, antisymmetrize, symmetric_eigenvalues, symmetrize, CcrMatrix, Matrix};
use crate::model::{
    theta_rhs, CcrSet, ClosedLoop, ControllerParams, ControllerSchedule, CostWeights, QuantumPlant,
};

/// PSD violations of `P` below this bound are reported.
pub const PSD_DIAGNOSTIC_TOL: f64 = 1e-8;

/// Uniform grid `t_k = k·T/N` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidConfig("grid needs at least one step".into()));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.step() * k as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Closed-loop coefficients at the `N + 1` nodes and `N` half steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopPath {
    nodes: Vec<ClosedLoop>,
    midpoints: Vec<ClosedLoop>,
}

impl ClosedLoopPath {
    pub fn new(nodes: Vec<ClosedLoop>, midpoints: Vec<ClosedLoop>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::LengthMismatch {
                expected: 2,
                actual: nodes.len(),
            });
        }
        if midpoints.len() + 1 != nodes.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len() - 1,
                actual: midpoints.len(),
            });
        }
        Ok(Self { nodes, midpoints })
    }

    pub fn constant(loop_: ClosedLoop, steps: usize) -> Self {
        Self {
            nodes: vec![loop_.clone(); steps + 1],
            midpoints: vec![loop_; steps],
        }
    }

    /// Realizes the controller schedule against the plant at every node and
    /// half step. Plant samples and controller parameters are interpolated
    /// linearly before realization so each half-step loop is itself PR.
    pub fn build(
        plant: &QuantumPlant,
        schedule: &ControllerSchedule,
        d: &Matrix,
        weights: &CostWeights,
        ccr: &CcrSet,
        steps: usize,
    ) -> Result<Self> {
        plant.matrices.check_len(steps)?;
        schedule.check_len(steps)?;
        let nodes = (0..=steps)
            .into_par_iter()
            .map(|k| {
                ClosedLoop::from_params(plant.matrices.node(k), schedule.node(k), d, weights, ccr)
            })
            .collect::<Result<Vec<_>>>()?;
        let midpoints = (0..steps)
            .into_par_iter()
            .map(|k| {
                ClosedLoop::from_params(
                    &plant.matrices.midpoint(k),
                    &schedule.midpoint(k),
                    d,
                    weights,
                    ccr,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes, midpoints })
    }

    pub fn steps(&self) -> usize {
        self.midpoints.len()
    }

    pub fn node(&self, k: usize) -> &ClosedLoop {
        &self.nodes[k]
    }

    pub fn midpoint(&self, k: usize) -> &ClosedLoop {
        &self.midpoints[k]
    }

    pub fn nodes(&self) -> &[ClosedLoop] {
        &self.nodes
    }

    fn check_grid(&self, grid: &TimeGrid) -> Result<()> {
        if self.steps() != grid.steps() {
            return Err(Error::LengthMismatch {
                expected: grid.steps(),
                actual: self.steps(),
            });
        }
        Ok(())
    }
}

/// One RK4 step from `x` with stage coefficients `(start, mid, end)`.
fn rk4_step<F>(x: &Matrix, h: f64, start: &ClosedLoop, mid: &ClosedLoop, end: &ClosedLoop, f: F) -> Matrix
where
    F: Fn(&ClosedLoop, &Matrix) -> Matrix,
{
    let k1 = f(start, x);
    let k2 = f(mid, &(x + &k1 * (h / 2.0)));
    let k3 = f(mid, &(x + &k2 * (h / 2.0)));
    let k4 = f(end, &(x + &k3 * h));
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

fn checked(x: Matrix, node: usize) -> Result<Matrix> {
    if all_finite(&x) {
        Ok(x)
    } else {
        Err(Error::NonFiniteState { node })
    }
}

/// `𝒜P + P𝒜ᵀ + ℬℬᵀ`.
pub fn p_rhs(cl: &ClosedLoop, p: &Matrix) -> Matrix {
    let ap = &cl.a_cl * p;
    &ap + ap.transpose() + cl.diffusion()
}

/// `−𝒜ᵀQ − Q𝒜 − 𝒞ᵀ𝒞`.
pub fn q_rhs(cl: &ClosedLoop, q: &Matrix) -> Matrix {
    let qa = q * &cl.a_cl;
    -(&qa + qa.transpose() + cl.output_weight())
}

/// Forward integration of the covariance Lyapunov equation from `P0`.
pub fn integrate_p(path: &ClosedLoopPath, p0: &Matrix, grid: &TimeGrid) -> Result<Vec<Matrix>> {
    path.check_grid(grid)?;
    let order = path.node(0).a_cl.nrows();
    if p0.shape() != (order, order) {
        return Err(mismatch(format!("P0 must be {order}x{order}")));
    }
    let h = grid.step();
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(checked(p0.clone(), 0)?);
    for k in 0..grid.steps() {
        let next = rk4_step(&out[k], h, path.node(k), path.midpoint(k), path.node(k + 1), p_rhs);
        out.push(checked(symmetrize(&next), k + 1)?);
    }
    Ok(out)
}

/// Backward integration of the observability Gramian from `Q_T = 0`.
pub fn integrate_q(path: &ClosedLoopPath, grid: &TimeGrid) -> Result<Vec<Matrix>> {
    path.check_grid(grid)?;
    let order = path.node(0).a_cl.nrows();
    let n = grid.steps();
    let h = grid.step();
    let mut out = vec![Matrix::zeros(order, order); n + 1];
    // reversed time s = T − t turns the backward equation into dQ/ds = −q_rhs
    let rev = |cl: &ClosedLoop, q: &Matrix| -q_rhs(cl, q);
    for k in (0..n).rev() {
        let next = rk4_step(&out[k + 1], h, path.node(k + 1), path.midpoint(k), path.node(k), rev);
        out[k] = checked(symmetrize(&next), k)?;
    }
    Ok(out)
}

/// Forward integration of the closed-loop CCR matrix `Θ`.
pub fn integrate_theta(
    path: &ClosedLoopPath,
    theta0: &Matrix,
    j: &CcrMatrix,
    grid: &TimeGrid,
) -> Result<Vec<Matrix>> {
    path.check_grid(grid)?;
    let order = path.node(0).a_cl.nrows();
    if theta0.shape() != (order, order) || path.node(0).b_cl.ncols() != j.order() {
        return Err(mismatch("Θ0 or J is not conformable with the closed loop"));
    }
    let h = grid.step();
    let f = |cl: &ClosedLoop, x: &Matrix| theta_rhs(x, &cl.a_cl, &cl.b_cl, j);
    let mut out = Vec::with_capacity(grid.steps() + 1);
    out.push(checked(theta0.clone(), 0)?);
    for k in 0..grid.steps() {
        let next = rk4_step(&out[k], h, path.node(k), path.midpoint(k), path.node(k + 1), f);
        out.push(checked(antisymmetrize(&next), k + 1)?);
    }
    Ok(out)
}

/// Largest node deviation `‖Θ_k − Θ_0‖`.
pub fn theta_drift(thetas: &[Matrix]) -> f64 {
    thetas
        .iter()
        .map(|t| (t - &thetas[0]).norm())
        .fold(0.0, f64::max)
}

/// Hankelian `H = QP`.
pub fn hankelian(q: &Matrix, p: &Matrix) -> Result<Matrix> {
    if q.shape() != p.shape() || !q.is_square() {
        return Err(mismatch("Q and P must be square of the same order"));
    }
    Ok(q * p)
}

/// `[H, 𝒜ᵀ] + Qℬℬᵀ − 𝒞ᵀ𝒞P`.
pub fn hankelian_rhs(h: &Matrix, cl: &ClosedLoop, q: &Matrix, p: &Matrix) -> Matrix {
    let at = cl.a_cl.transpose();
    h * &at - &at * h + q * cl.diffusion() - cl.output_weight() * p
}

/// Integrand `⟨𝒞ᵀ𝒞, P⟩` at every node.
pub fn cost_density(ps: &[Matrix], path: &ClosedLoopPath) -> Vec<f64> {
    ps.iter()
        .zip(path.nodes())
        .map(|(p, cl)| {
            let cp = &cl.c_cl * p;
            cp.dot(&cl.c_cl)
        })
        .collect()
}

/// Running trapezoidal integral of the cost density; entry `k` covers `[0, t_k]`.
pub fn cost_to_date(ps: &[Matrix], path: &ClosedLoopPath, grid: &TimeGrid) -> Vec<f64> {
    let density = cost_density(ps, path);
    let h = grid.step();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(density.len());
    out.push(0.0);
    for w in density.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Running cost integrated with the RK4 stages of the `P` step.
pub fn stage_cost_to_date(ps: &[Matrix], path: &ClosedLoopPath, grid: &TimeGrid) -> Vec<f64> {
    let h = grid.step();
    let density = |cl: &ClosedLoop, p: &Matrix| (&cl.c_cl * p).dot(&cl.c_cl);
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(ps.len());
    out.push(0.0);
    for k in 0..path.steps() {
        let (start, mid, end) = (path.node(k), path.midpoint(k), path.node(k + 1));
        let p = &ps[k];
        let k1 = p_rhs(start, p);
        let p2 = p + &k1 * (h / 2.0);
        let k2 = p_rhs(mid, &p2);
        let p3 = p + &k2 * (h / 2.0);
        let k3 = p_rhs(mid, &p3);
        let p4 = p + &k3 * h;
        acc += h / 6.0 * (density(start, p) + 2.0 * density(mid, &p2) + 2.0 * density(mid, &p3) + density(end, &p4));
        out.push(acc);
    }
    out
}

/// Trapezoidal approximation of `∫₀ᵀ ⟨𝒞ᵀ𝒞, P⟩ dt`.
pub fn lqg_cost(ps: &[Matrix], path: &ClosedLoopPath, grid: &TimeGrid) -> f64 {
    cost_to_date(ps, path, grid).last().copied().unwrap_or(0.0)
}

/// Smallest eigenvalue of `P` over all nodes with its node index.
pub fn min_psd_eigenvalue(ps: &[Matrix]) -> (usize, f64) {
    ps.iter()
        .enumerate()
        .map(|(k, p)| (k, symmetric_eigenvalues(p)[0]))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

/// Gramians, CCR matrix and cost of a closed loop over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub p: Vec<Matrix>,
    pub q: Vec<Matrix>,
    pub theta: Vec<Matrix>,
    pub cost: f64,
    pub cost_to_date: Vec<f64>,
    pub gains: Vec<ControllerParams>,
}

impl Trajectory {
    /// Integrates `P`, `Q` and `Θ` along `path` and accumulates the cost.
    pub fn integrate(
        path: &ClosedLoopPath,
        p0: &Matrix,
        theta0: &Matrix,
        j: &CcrMatrix,
        grid: &TimeGrid,
        gains: Vec<ControllerParams>,
    ) -> Result<Self> {
        let p = integrate_p(path, p0, grid)?;
        let q = integrate_q(path, grid)?;
        let theta = integrate_theta(path, theta0, j, grid)?;
        let cost_to_date = stage_cost_to_date(&p, path, grid);
        let (node, min_eig) = min_psd_eigenvalue(&p);
        if min_eig < -PSD_DIAGNOSTIC_TOL {
            log::warn!("P loses positive semidefiniteness at node {node} (eigenvalue {min_eig:.3e})");
        }
        Ok(Self {
            cost: *cost_to_date.last().unwrap_or(&0.0),
            p,
            q,
            theta,
            cost_to_date,
            gains,
        })
    }

    pub fn hankelians(&self) -> Vec<Matrix> {
        self.q.iter().zip(&self.p).map(|(q, p)| q * p).collect()
    }
}
