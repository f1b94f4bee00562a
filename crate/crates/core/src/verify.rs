//! Executable certificates for the structural properties of the synthesis
//! problem. Each check returns a [`CheckResult`]; [`run_suite`] also runs a
//! negative control per check with an injected defect that must fail.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::bvp::{gain_map, solve_cqlqg, Problem, Regularization, Solution, SolverConfig};
use crate::dynamics::{theta_drift, Trajectory};
use crate::error::{mismatch, Error, Result};
use crate::foundations::{
    block, canonical_ccr, hamiltonian_part, random_symplectic, skew_hamiltonian_part, symmetrize, CcrMatrix, Matrix,
};
use crate::gains::{control_hamiltonian, minimized_hamiltonian, synthesize_gains, BlockView};
use crate::model::{
    congruence_by_controller_transform, realize_controller, split_blocks, validate_controller_pr, ControllerParams,
    ControllerSchedule, Sampled,
};
use crate::operators::SolveMode;
use crate::random::{random_matrix, random_psd, random_symmetric, seeded_rng};

pub const SYMPLECTIC_COST_TOL: f64 = 1e-7;
pub const SKEW_HAMILTONIAN_TOL: f64 = 1e-6;
pub const R_SPREAD_TOL: f64 = 1e-9;
pub const PDE_TOL: f64 = 1e-6;
pub const PDE_STEP: f64 = 1e-5;
pub const VSHAPE_COST_TOL: f64 = 1e-6;
pub const BLOCK_INVARIANT_TOL: f64 = 1e-10;
pub const CCR_TOL: f64 = 1e-8;
pub const STATIONARITY_TOL: f64 = 1e-6;
pub const HJE_TOL: f64 = 1e-8;
pub const LOCAL_OPTIMALITY_TOL: f64 = 1e-8;

/// Outcome of one check. `pass` iff `residual ≤ tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub context: BTreeMap<String, f64>,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            context: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.context.insert(key.to_string(), value);
        self
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

/// Cost of `schedule` versus the cost after the controller change of
/// coordinates `ξ ↦ σξ` together with `P0 ↦ SP0Sᵀ`, `S = diag(I, σ)`.
pub fn check_symplectic_invariance_with(
    problem: &Problem,
    schedule: &ControllerSchedule,
    sigma: &Matrix,
) -> Result<CheckResult> {
    let n = problem.dims.n;
    if sigma.shape() != (n, n) {
        return Err(mismatch("σ must be n × n"));
    }
    let moved: Vec<ControllerParams> = schedule
        .samples()
        .iter()
        .map(|p| p.transform(sigma))
        .collect::<Result<_>>()?;
    let moved = Sampled::per_node(moved)?;
    let mut transformed = problem.clone();
    transformed.p0 = congruence_by_controller_transform(&problem.p0, sigma);
    let cost = problem.evaluate(schedule)?.cost;
    let moved_cost = transformed.evaluate(&moved)?.cost;
    let ccr = problem.ccr();
    let mut pr = 0.0f64;
    for (k, params) in moved.samples().iter().enumerate() {
        let plant_d = &problem.plant.matrices.node(k).d;
        let ctrl = realize_controller(params, plant_d, &problem.d, &ccr)?;
        let res = validate_controller_pr(&ctrl, plant_d, &ccr, 1e-12)?;
        pr = pr.max(res.res1).max(res.res2);
    }
    Ok(
        CheckResult::new("symplectic_invariance", relative_gap(moved_cost, cost), SYMPLECTIC_COST_TOL)
            .with("cost", cost)
            .with("transformed_cost", moved_cost)
            .with("transformed_pr_residual", pr),
    )
}

/// [`check_symplectic_invariance_with`] for `σ = random_symplectic(seed)`.
pub fn check_symplectic_invariance(
    problem: &Problem,
    schedule: &ControllerSchedule,
    seed: u64,
    scale: f64,
) -> Result<CheckResult> {
    let sigma = random_symplectic(seed, problem.dims.n, scale)?;
    Ok(check_symplectic_invariance_with(problem, schedule, &sigma)?.with("seed", seed as f64))
}

/// Worst relative Hamiltonian part of `H22` over the nodes.
pub fn check_skew_hamiltonian_h22(traj: &Trajectory, j0: &CcrMatrix) -> Result<CheckResult> {
    let n = j0.order();
    let mut worst = (0usize, 0.0f64);
    for (k, (p, q)) in traj.p.iter().zip(&traj.q).enumerate() {
        if p.shape() != (2 * n, 2 * n) {
            return Err(mismatch("trajectory order does not match J0"));
        }
        let h22 = block(&(q * p), n, n, n, n);
        let r = hamiltonian_part(&h22, j0).norm() / (1.0 + h22.norm());
        if r > worst.1 {
            worst = (k, r);
        }
    }
    Ok(CheckResult::new("skew_hamiltonian_h22", worst.1, SKEW_HAMILTONIAN_TOL).with("worst_node", worst.0 as f64))
}

/// Spread of `Π` over ten random symmetric `R` at fixed `(b, e)`.
pub fn check_r_independence(problem: &Problem, p: &Matrix, q: &Matrix, params: &ControllerParams, node: usize, seed: u64) -> Result<CheckResult> {
    let ccr = problem.ccr();
    let plant = problem.plant.matrices.node(node);
    let mut rng = seeded_rng(seed);
    let mut values = vec![control_hamiltonian(p, params, q, plant, &problem.weights, &problem.d, &ccr)?];
    for _ in 0..10 {
        let moved = ControllerParams {
            r: random_symmetric(&mut rng, problem.dims.n, 1.0),
            ..params.clone()
        };
        values.push(control_hamiltonian(p, &moved, q, plant, &problem.weights, &problem.d, &ccr)?);
    }
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CheckResult::new("r_independence", (max - min) / (1.0 + values[0].abs()), R_SPREAD_TOL)
        .with("hamiltonian", values[0])
        .with("node", node as f64))
}

/// `Q` with `Q21 = Q12ᵀ` replaced by the solution of `Q21P12 + Q22P22 = W`,
/// `W` the skew-Hamiltonian part of `H22`, so that `H22` of the result is
/// exactly skew-Hamiltonian. Needs `P12` nonsingular.
pub fn skew_hamiltonian_q(p: &Matrix, q: &Matrix, j0: &CcrMatrix) -> Result<Matrix> {
    let n = j0.order();
    let [[_, p12], [_, p22]] = split_blocks(p);
    let [[q11, _], [q21, q22]] = split_blocks(q);
    let w = skew_hamiltonian_part(&(&q21 * &p12 + &q22 * &p22), j0);
    let inv = p12
        .try_inverse()
        .ok_or_else(|| Error::Precondition("P12 is singular".into()))?;
    let q21 = (w - &q22 * &p22) * inv;
    let mut out = Matrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&q11);
    out.view_mut((n, 0), (n, n)).copy_from(&q21);
    out.view_mut((0, n), (n, n)).copy_from(&q21.transpose());
    out.view_mut((n, n), (n, n)).copy_from(&q22);
    Ok(out)
}

/// `sup_t ‖Θ_t − Θ_0‖_F`.
pub fn check_ccr_preservation(traj: &Trajectory) -> CheckResult {
    CheckResult::new("ccr_preservation", theta_drift(&traj.theta), CCR_TOL)
}

fn hamiltonian_gradient(problem: &Problem, p: &Matrix, q: &Matrix, params: &ControllerParams, node: usize) -> Result<(f64, f64)> {
    let ccr = problem.ccr();
    let plant = problem.plant.matrices.node(node);
    let pi = |u: &ControllerParams| control_hamiltonian(p, u, q, plant, &problem.weights, &problem.d, &ccr);
    let base = pi(params)?;
    let h = 1e-5 * (1.0 + params.b.norm() + params.e.norm());
    let mut worst = 0.0f64;
    for which in 0..2 {
        let len = if which == 0 { params.b.len() } else { params.e.len() };
        for i in 0..len {
            let mut up = params.clone();
            let mut down = params.clone();
            let (u, d) = if which == 0 { (&mut up.b, &mut down.b) } else { (&mut up.e, &mut down.e) };
            u[i] += h;
            d[i] -= h;
            worst = worst.max(((pi(&up)? - pi(&down)?) / (2.0 * h)).abs());
        }
    }
    Ok((worst, base))
}

/// Central-difference gradient of `Π` in every gain entry at `params`,
/// relative to `1 + |Π|`.
pub fn check_gain_stationarity_at(problem: &Problem, p: &Matrix, q: &Matrix, params: &ControllerParams, node: usize) -> Result<CheckResult> {
    let (gradient, pi) = hamiltonian_gradient(problem, p, q, params, node)?;
    Ok(CheckResult::new("gain_stationarity", gradient / (1.0 + pi.abs()), STATIONARITY_TOL)
        .with("node", node as f64)
        .with("hamiltonian", pi))
}

/// Stationarity of `Π` at freshly synthesized gains, worst over `nodes`.
pub fn check_gain_stationarity(problem: &Problem, traj: &Trajectory, nodes: &[usize]) -> Result<CheckResult> {
    let ccr = problem.ccr();
    let mut worst: Option<CheckResult> = None;
    for &k in nodes {
        let blocks = BlockView::new(&traj.p[k], &traj.q[k])?;
        let plant = problem.plant.matrices.node(k);
        let gp = synthesize_gains(&blocks, plant, &problem.weights, &problem.d, &ccr, SolveMode::Exact)?;
        let r = check_gain_stationarity_at(problem, &traj.p[k], &traj.q[k], &gp.params(traj.gains[k].r.clone()), k)?;
        if worst.as_ref().is_none_or(|w| r.residual > w.residual) {
            worst = Some(r);
        }
    }
    worst.ok_or_else(|| Error::Precondition("no nodes to check".into()))
}

/// `|min Π − Π(gains)|/(1 + |Π|)` at every interior node, where `min Π` is
/// the closed-form minimized Hamiltonian.
pub fn check_hje_consistency_with(problem: &Problem, traj: &Trajectory, gains: &[ControllerParams]) -> Result<CheckResult> {
    let ccr = problem.ccr();
    let steps = problem.grid.steps();
    if gains.len() != steps + 1 {
        return Err(Error::LengthMismatch {
            expected: steps + 1,
            actual: gains.len(),
        });
    }
    let mut worst = (0usize, 0.0f64);
    for k in 0..steps {
        let (p, q) = (&traj.p[k], &traj.q[k]);
        let plant = problem.plant.matrices.node(k);
        let blocks = BlockView::new(p, q)?;
        let min = minimized_hamiltonian(&blocks, plant, &problem.weights, &problem.d, &ccr, SolveMode::Pseudo)?;
        let pi = control_hamiltonian(p, &gains[k], q, plant, &problem.weights, &problem.d, &ccr)?;
        let gap = relative_gap(min, pi);
        if gap > worst.1 {
            worst = (k, gap);
        }
    }
    Ok(CheckResult::new("hje_consistency", worst.1, HJE_TOL).with("worst_node", worst.0 as f64))
}

/// [`check_hje_consistency_with`] at the gains synthesized from `traj`.
pub fn check_hje_consistency(problem: &Problem, traj: &Trajectory) -> Result<CheckResult> {
    let gains: Vec<ControllerParams> = gain_map(problem, traj, Regularization::Pseudo)?
        .into_iter()
        .zip(&traj.gains)
        .map(|((g, _), old)| ControllerParams { r: old.r.clone(), ..g })
        .collect();
    check_hje_consistency_with(problem, traj, &gains)
}

/// Largest gain change when the gain map is re-applied to a trajectory.
pub fn check_fixed_point(problem: &Problem, traj: &Trajectory, tolerance: f64) -> Result<CheckResult> {
    let target = gain_map(problem, traj, Regularization::Pseudo)?;
    let delta = target
        .iter()
        .zip(&traj.gains)
        .map(|((g, _), u)| (&g.b - &u.b).norm() + (&g.e - &u.e).norm())
        .fold(0.0, f64::max);
    Ok(CheckResult::new("fixed_point", delta, tolerance))
}

/// Random relative perturbations of the whole gain trajectory; the residual
/// is the largest cost decrease relative to the cost.
pub fn check_local_optimality(problem: &Problem, traj: &Trajectory, seed: u64, draws: usize, size: f64) -> Result<CheckResult> {
    let mut rng = seeded_rng(seed);
    let cost = traj.cost;
    let mut worst = f64::NEG_INFINITY;
    let mut min_increase = f64::INFINITY;
    for _ in 0..draws {
        let perturbed: Vec<ControllerParams> = traj
            .gains
            .iter()
            .map(|g| {
                let (nb, ne) = (g.b.norm().max(1e-12), g.e.norm().max(1e-12));
                let db = random_matrix(&mut rng, g.b.nrows(), g.b.ncols(), 1.0);
                let de = random_matrix(&mut rng, g.e.nrows(), g.e.ncols(), 1.0);
                ControllerParams {
                    b: &g.b + db * (size * nb / (1.0 + g.b.len() as f64).sqrt()),
                    e: &g.e + de * (size * ne / (1.0 + g.e.len() as f64).sqrt()),
                    r: g.r.clone(),
                }
            })
            .collect();
        let moved = problem.evaluate(&Sampled::per_node(perturbed)?)?.cost;
        worst = worst.max((cost - moved) / cost.abs().max(f64::MIN_POSITIVE));
        min_increase = min_increase.min(moved - cost);
    }
    Ok(CheckResult::new("local_optimality", worst.max(0.0), LOCAL_OPTIMALITY_TOL)
        .with("draws", draws as f64)
        .with("worst_relative_decrease", worst)
        .with("min_increase", min_increase))
}

/// `P11`, `P12P22⁻¹P21`, `P12J0P21`: the invariants of `P ↦ SPSᵀ`.
pub fn block_invariants(p: &Matrix, j0: &CcrMatrix) -> Result<[Matrix; 3]> {
    let [[p11, p12], [p21, p22]] = split_blocks(p);
    let inv = p22
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("P22 is singular".into()))?;
    Ok([p11, &p12 * inv * &p21, &p12 * j0.matrix() * &p21])
}

/// Block invariants of `P0` and `SP0Sᵀ`, relative to `1 + ‖invariant‖`.
pub fn check_block_invariants(p0: &Matrix, sigma: &Matrix, j0: &CcrMatrix) -> Result<CheckResult> {
    let before = block_invariants(p0, j0)?;
    let after = block_invariants(&congruence_by_controller_transform(p0, sigma), j0)?;
    let residual = before
        .iter()
        .zip(&after)
        .map(|(a, b)| (a - b).norm() / (1.0 + a.norm()))
        .fold(0.0, f64::max);
    Ok(CheckResult::new("vshape_block_invariants", residual, BLOCK_INVARIANT_TOL))
}

/// Converged costs from `P0` and `SP0Sᵀ` and the block invariants.
pub fn check_vshape_invariance(problem: &Problem, config: &SolverConfig, sigma: &Matrix) -> Result<[CheckResult; 2]> {
    let j0 = problem.ccr().j0;
    let invariants = check_block_invariants(&problem.p0, sigma, &j0)?;
    let mut moved = problem.clone();
    moved.p0 = congruence_by_controller_transform(&problem.p0, sigma);
    let mut moved_config = config.clone();
    if let Some(r) = &config.r_schedule {
        let inv = sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Precondition("σ is singular".into()))?;
        moved_config.r_schedule = Some(r.map(|r| inv.transpose() * r * &inv));
    }
    let a = solve_cqlqg(problem, config)?.into_converged()?;
    let b = solve_cqlqg(&moved, &moved_config)?.into_converged()?;
    let cost = CheckResult::new(
        "vshape_converged_cost",
        relative_gap(b.report.cost, a.report.cost),
        VSHAPE_COST_TOL,
    )
    .with("cost", a.report.cost)
    .with("transformed_cost", b.report.cost);
    Ok([invariants, cost])
}

/// A real function of `(X, Y)` with `X` square and `Y` symmetric.
pub struct ScalarField<'a> {
    f: Box<dyn Fn(&Matrix, &Matrix) -> f64 + Sync + 'a>,
}

impl<'a> ScalarField<'a> {
    pub fn new(f: impl Fn(&Matrix, &Matrix) -> f64 + Sync + 'a) -> Self {
        Self { f: Box::new(f) }
    }

    pub fn evaluate(&self, x: &Matrix, y: &Matrix) -> f64 {
        (self.f)(x, y)
    }
}

/// Central-difference gradient in `X`, step `step·(1 + ‖X‖)`.
pub fn partial_x(v: &ScalarField, x: &Matrix, y: &Matrix, step: f64) -> Matrix {
    let h = step * (1.0 + x.norm());
    Matrix::from_fn(x.nrows(), x.ncols(), |i, j| {
        let mut up = x.clone();
        let mut down = x.clone();
        up[(i, j)] += h;
        down[(i, j)] -= h;
        (v.evaluate(&up, y) - v.evaluate(&down, y)) / (2.0 * h)
    })
}

/// Symmetric gradient in `Y` from symmetric perturbations, step `step·(1 + ‖Y‖)`.
pub fn partial_y(v: &ScalarField, x: &Matrix, y: &Matrix, step: f64) -> Matrix {
    let h = step * (1.0 + y.norm());
    let n = y.nrows();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut up = y.clone();
            let mut down = y.clone();
            up[(i, j)] += h;
            down[(i, j)] -= h;
            if i != j {
                up[(j, i)] += h;
                down[(j, i)] -= h;
            }
            let slope = (v.evaluate(x, &up) - v.evaluate(x, &down)) / (2.0 * h);
            if i == j {
                g[(i, i)] = slope;
            } else {
                g[(i, j)] = slope / 2.0;
                g[(j, i)] = slope / 2.0;
            }
        }
    }
    g
}

/// `M(v) = ½Xᵀ∂_X v + Y∂_Y v` by central differences.
pub fn pde_operator_m(v: &ScalarField, x: &Matrix, y: &Matrix, step: f64) -> Matrix {
    x.transpose() * partial_x(v, x, y, step) * 0.5 + y * partial_y(v, x, y, step)
}

/// Which identity a PDE residual measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeForm {
    /// `M(V) = 0`
    Full,
    /// `𝐒(Xᵀ∂_X V J0) = 0`
    XOnly,
    /// `𝐒(M(V)J0) = 0`
    Symplectic,
}

/// Residual of `form` at `(X, Y)`, relative to `1 + ‖½Xᵀ∂_X V‖ + ‖Y∂_Y V‖`.
pub fn pde_residual(v: &ScalarField, form: PdeForm, x: &Matrix, y: &Matrix, step: f64) -> Result<f64> {
    let n = x.nrows();
    if n % 2 != 0 || !x.is_square() || y.shape() != (n, n) {
        return Err(mismatch("PDE checks need square X, Y of even order"));
    }
    let j0 = canonical_ccr(n / 2);
    let xt_dx = x.transpose() * partial_x(v, x, y, step) * 0.5;
    match form {
        PdeForm::XOnly => {
            let r = symmetrize(&(&xt_dx * 2.0 * j0.matrix()));
            Ok(r.norm() / (1.0 + 2.0 * xt_dx.norm()))
        }
        PdeForm::Full | PdeForm::Symplectic => {
            let y_dy = y * partial_y(v, x, y, step);
            let m = &xt_dx + &y_dy;
            let r = if form == PdeForm::Full {
                m
            } else {
                symmetrize(&(m * j0.matrix()))
            };
            Ok(r.norm() / (1.0 + xt_dx.norm() + y_dy.norm()))
        }
    }
}

/// `f(W) = ⟨L, W⟩ + q(W) + κ·q(W)²` with `q(W) = tr(AWBW)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    pub linear: Matrix,
    pub left: Matrix,
    pub right: Matrix,
    pub quartic: f64,
}

impl MatrixPolynomial {
    /// `f = tr`.
    pub fn trace(n: usize) -> Self {
        Self {
            linear: Matrix::identity(n, n),
            left: Matrix::zeros(n, n),
            right: Matrix::zeros(n, n),
            quartic: 0.0,
        }
    }

    /// `f(W) = tr(W²)`.
    pub fn trace_square(n: usize) -> Self {
        Self {
            linear: Matrix::zeros(n, n),
            left: Matrix::identity(n, n),
            right: Matrix::identity(n, n),
            quartic: 0.0,
        }
    }

    /// Seeded coefficients; quartic term only when `quartic` is set.
    pub fn random(seed: u64, n: usize, quartic: bool) -> Self {
        let mut rng = seeded_rng(seed);
        Self {
            linear: random_matrix(&mut rng, n, n, 1.0),
            left: random_matrix(&mut rng, n, n, 0.5),
            right: random_matrix(&mut rng, n, n, 0.5),
            quartic: if quartic { rng.random_range(0.05..0.2) } else { 0.0 },
        }
    }

    pub fn evaluate(&self, w: &Matrix) -> f64 {
        let q = (&self.left * w * &self.right * w).trace();
        self.linear.dot(w) + q + self.quartic * q * q
    }
}

fn inverse_or_nan(y: &Matrix) -> Matrix {
    y.clone()
        .try_inverse()
        .unwrap_or_else(|| Matrix::from_element(y.nrows(), y.ncols(), f64::NAN))
}

/// `V = f(XY⁻¹Xᵀ)`.
pub fn partsol1_field(f: &MatrixPolynomial) -> ScalarField<'_> {
    ScalarField::new(move |x, y| f.evaluate(&(x * inverse_or_nan(y) * x.transpose())))
}

/// `V = f(XJ0Xᵀ)`.
pub fn partsol2_field(f: &MatrixPolynomial, j0: CcrMatrix) -> ScalarField<'_> {
    ScalarField::new(move |x, _| f.evaluate(&(x * j0.matrix() * x.transpose())))
}

/// `V = f(X(Y⁻¹ + J0)Xᵀ)`.
pub fn gensol_field(f: &MatrixPolynomial, j0: CcrMatrix) -> ScalarField<'_> {
    ScalarField::new(move |x, y| f.evaluate(&(x * (inverse_or_nan(y) + j0.matrix()) * x.transpose())))
}

/// A generic evaluation point: `X` near the identity, `Y ≻ 0`.
pub fn pde_point(seed: u64, n: usize) -> (Matrix, Matrix) {
    let mut rng = seeded_rng(seed);
    let x = Matrix::identity(n, n) + random_matrix(&mut rng, n, n, 0.5);
    let y = random_psd(&mut rng, n, 0.5);
    (x, y)
}

/// The three solution families at order `n`, each with a quadratic and a
/// quartic test function.
pub fn check_appendix_a(seed: u64, n: usize) -> Result<Vec<CheckResult>> {
    let j0 = canonical_ccr(n / 2);
    let (x, y) = pde_point(seed, n);
    let mut out = Vec::new();
    for (degree, quartic) in [("quadratic", false), ("quartic", true)] {
        let f = MatrixPolynomial::random(seed.wrapping_add(1), n, quartic);
        let cases = [
            ("partsol1", partsol1_field(&f), PdeForm::Full),
            ("partsol2", partsol2_field(&f, j0.clone()), PdeForm::XOnly),
            ("gensol", gensol_field(&f, j0.clone()), PdeForm::Symplectic),
        ];
        for (name, v, form) in cases {
            let r = pde_residual(&v, form, &x, &y, PDE_STEP)?;
            out.push(CheckResult::new(format!("appendix_a_{name}_{degree}_n{n}"), r, PDE_TOL));
        }
    }
    Ok(out)
}

/// Wrong combinations fed to the same residuals: `f(XYXᵀ)`, `f(XXᵀ)`,
/// `f(X(Y + J0)Xᵀ)`. All must fail.
pub fn appendix_a_negative_controls(seed: u64, n: usize) -> Result<Vec<CheckResult>> {
    let j0 = canonical_ccr(n / 2);
    let (x, y) = pde_point(seed, n);
    let f = MatrixPolynomial::random(seed.wrapping_add(1), n, true);
    let cases = [
        ("partsol1", ScalarField::new(|x: &Matrix, y: &Matrix| f.evaluate(&(x * y * x.transpose()))), PdeForm::Full),
        ("partsol2", ScalarField::new(|x: &Matrix, _: &Matrix| f.evaluate(&(x * x.transpose()))), PdeForm::XOnly),
        (
            "gensol",
            ScalarField::new(|x: &Matrix, y: &Matrix| f.evaluate(&(x * (y + j0.matrix()) * x.transpose()))),
            PdeForm::Symplectic,
        ),
    ];
    cases
        .into_iter()
        .map(|(name, v, form)| {
            let r = pde_residual(&v, form, &x, &y, PDE_STEP)?;
            Ok(CheckResult::new(format!("appendix_a_{name}_control_n{n}"), r, PDE_TOL))
        })
        .collect()
}

/// All checks on one scenario plus their negative controls.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub negative_controls: Vec<CheckResult>,
    /// Every check passes and every negative control fails.
    pub pass: bool,
}

impl SuiteReport {
    fn new(checks: Vec<CheckResult>, negative_controls: Vec<CheckResult>) -> Self {
        let pass = checks.iter().all(|c| c.pass) && negative_controls.iter().all(|c| !c.pass);
        Self {
            checks,
            negative_controls,
            pass,
        }
    }
}

fn corrupt_h22(traj: &Trajectory, n: usize, size: f64) -> Trajectory {
    let mut bad = traj.clone();
    // Q22 += εI adds εP22 to H22, whose Hamiltonian part is nonzero
    for q in bad.q.iter_mut() {
        for i in n..2 * n {
            q[(i, i)] += size;
        }
    }
    bad
}

/// Solves the scenario and runs every certificate on the converged solution.
/// A solve that does not converge yields a failing `bvp_convergence` check
/// and skips the trajectory-level checks.
pub fn run_suite(problem: &Problem, config: &SolverConfig, seed: u64) -> Result<(Solution, SuiteReport)> {
    let n = problem.dims.n;
    let ccr = problem.ccr();
    let solution = solve_cqlqg(problem, config)?;
    let report = &solution.report;
    let mut checks = vec![
        CheckResult::new("bvp_convergence", report.final_gain_delta, config.gain_tolerance)
            .with("iterations", report.iterations as f64)
            .with("cost", report.cost),
    ];
    let mut controls = Vec::new();
    for order in [2, 4] {
        checks.extend(check_appendix_a(seed, order)?);
        controls.extend(appendix_a_negative_controls(seed, order)?);
    }
    let sigma = random_symplectic(seed, n, 0.5)?;
    let not_symplectic = &sigma * 1.1;
    checks.push(check_block_invariants(&problem.p0, &sigma, &ccr.j0)?);
    controls.push(check_block_invariants(&problem.p0, &not_symplectic, &ccr.j0)?);
    if !report.converged {
        return Ok((solution, SuiteReport::new(checks, controls)));
    }
    let traj = &solution.trajectory;
    let steps = problem.grid.steps();
    let schedule = Sampled::per_node(traj.gains.clone())?;
    let mid = steps / 2;

    checks.push(check_fixed_point(problem, traj, config.gain_tolerance)?);
    let mut shifted = traj.clone();
    shifted.gains.iter_mut().for_each(|g| g.e *= 1.0 + 1e-3);
    controls.push(check_fixed_point(problem, &shifted, config.gain_tolerance)?);

    checks.push(check_ccr_preservation(traj));
    let mut drifted = traj.clone();
    if let Some(last) = drifted.theta.last_mut() {
        last[(0, 1)] += 1e-4;
        last[(1, 0)] -= 1e-4;
    }
    controls.push(check_ccr_preservation(&drifted));

    checks.push(check_skew_hamiltonian_h22(traj, &ccr.j0)?);
    let corrupted = corrupt_h22(traj, n, 1e-2);
    controls.push(check_skew_hamiltonian_h22(&corrupted, &ccr.j0)?);

    let blocks = BlockView::new(&traj.p[mid], &traj.q[mid])?;
    let plant = problem.plant.matrices.node(mid);
    let gp = synthesize_gains(&blocks, plant, &problem.weights, &problem.d, &ccr, SolveMode::Pseudo)?;
    let params = gp.params(traj.gains[mid].r.clone());
    let q_skew = skew_hamiltonian_q(&traj.p[mid], &traj.q[mid], &ccr.j0)?;
    checks.push(
        check_r_independence(problem, &traj.p[mid], &q_skew, &params, mid, seed)?
            .with("q_adjustment", (&q_skew - &traj.q[mid]).norm() / traj.q[mid].norm()),
    );
    controls.push(check_r_independence(problem, &traj.p[mid], &corrupted.q[mid], &params, mid, seed)?);

    let nodes: Vec<usize> = (0..steps).step_by((steps / 10).max(1)).collect();
    checks.push(check_gain_stationarity(problem, traj, &nodes)?);
    let mut off = params.clone();
    off.b *= 1.0 + 1e-2;
    off.e *= 1.0 + 1e-2;
    controls.push(check_gain_stationarity_at(problem, &traj.p[mid], &traj.q[mid], &off, mid)?);

    checks.push(check_hje_consistency(problem, traj)?);
    let scaled: Vec<ControllerParams> = traj
        .gains
        .iter()
        .map(|g| ControllerParams {
            b: &g.b * 1.01,
            e: &g.e * 1.01,
            r: g.r.clone(),
        })
        .collect();
    controls.push(check_hje_consistency_with(problem, traj, &scaled)?);

    checks.push(check_symplectic_invariance(problem, &schedule, seed, 0.5)?);
    controls.push(check_symplectic_invariance_with(problem, &schedule, &not_symplectic)?);

    checks.push(check_local_optimality(problem, traj, seed, 200, 1e-3)?);
    let detuned: Vec<ControllerParams> = traj
        .gains
        .iter()
        .map(|g| ControllerParams {
            b: &g.b * 1.1,
            e: &g.e * 1.1,
            r: g.r.clone(),
        })
        .collect();
    let detuned = problem.evaluate(&Sampled::per_node(detuned)?)?;
    controls.push(check_local_optimality(problem, &detuned, seed, 20, 1e-3)?);

    let [_, cost] = check_vshape_invariance(problem, config, &sigma)?;
    checks.push(cost);
    let skewed = &sigma * 1.05;
    controls.push(match check_vshape_invariance(problem, config, &skewed) {
        Ok([_, cost]) => cost,
        Err(Error::NotConverged { .. }) => CheckResult::new("vshape_converged_cost", f64::INFINITY, VSHAPE_COST_TOL),
        Err(e) => return Err(e),
    });

    Ok((solution, SuiteReport::new(checks, controls)))
}
