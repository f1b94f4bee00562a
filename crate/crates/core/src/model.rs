//! Plant and controller data model at the level of first and second moments.
//!
//! A physically realizable (PR) controller is parameterized by the triple
//! `(b, e, R)` with `R` symmetric; the state matrix `a` and output matrix `c`
//! follow from the PR conditions. Time-varying data are sampled on a uniform
//! grid and linearly interpolated at half steps.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{mismatch, Error, Result};
use crate::foundations::{
    all_finite, block, block2, canonical_ccr, hermitian_min_eigenvalue, CcrMatrix, Matrix,
};

/// Relative asymmetry of `R` that [`realize_controller`] tolerates.
pub const R_SYMMETRY_TOL: f64 = 1e-12;

/// Dimensions `(n, m1, m2, p1, p2, r)`; `n`, `m1`, `m2` are even.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dimensions {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub p1: usize,
    pub p2: usize,
    pub r: usize,
}

impl Dimensions {
    pub fn new(n: usize, m1: usize, m2: usize, p1: usize, p2: usize, r: usize) -> Result<Self> {
        let dims = Self { n, m1, m2, p1, p2, r };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.n, self.m1, self.m2, self.p1, self.p2, self.r];
        if all.contains(&0) {
            return Err(Error::InvalidDimensions(format!("all dimensions must be positive: {self:?}")));
        }
        for (name, v) in [("n", self.n), ("m1", self.m1), ("m2", self.m2)] {
            if v % 2 != 0 {
                return Err(Error::InvalidDimensions(format!("{name} = {v} must be even")));
            }
        }
        Ok(())
    }

    pub fn nu(&self) -> usize {
        self.n / 2
    }

    pub fn mu1(&self) -> usize {
        self.m1 / 2
    }

    pub fn mu2(&self) -> usize {
        self.m2 / 2
    }

    pub fn ccr(&self) -> CcrSet {
        CcrSet {
            j0: canonical_ccr(self.nu()),
            j1: canonical_ccr(self.mu1()),
            j2: canonical_ccr(self.mu2()),
            j: canonical_ccr(self.mu1() + self.mu2()),
        }
    }
}

/// The canonical CCR matrices of the controller state (`J₀`), plant noise
/// (`J₁`), controller noise (`J₂`) and combined noise (`J`).
#[derive(Debug, Clone, PartialEq)]
pub struct CcrSet {
    pub j0: CcrMatrix,
    pub j1: CcrMatrix,
    pub j2: CcrMatrix,
    pub j: CcrMatrix,
}

/// Linear interpolation between grid samples.
pub trait Interpolate: Sized {
    /// `(1 − w)·self + w·other`.
    fn lerp(&self, other: &Self, w: f64) -> Self;
}

impl Interpolate for Matrix {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        self * (1.0 - w) + other * w
    }
}

/// Affine combination `Σ wᵢ·xᵢ / Σ wᵢ` built from successive `lerp`s.
fn affine<T: Interpolate + Clone>(terms: &[(f64, &T)]) -> T {
    let mut acc = terms[0].1.clone();
    let mut total = terms[0].0;
    for &(w, x) in &terms[1..] {
        total += w;
        acc = acc.lerp(x, w / total);
    }
    acc
}

/// A quantity sampled on the grid nodes: one sample (constant over the
/// horizon) or one per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled<T> {
    samples: Vec<T>,
}

impl<T: Clone + Interpolate> Sampled<T> {
    pub fn constant(value: T) -> Self {
        Self {
            samples: vec![value],
        }
    }

    pub fn per_node(samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::LengthMismatch {
                expected: 1,
                actual: 0,
            });
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn is_constant(&self) -> bool {
        self.samples.len() == 1
    }

    /// Accepts one sample or exactly `steps + 1`.
    pub fn check_len(&self, steps: usize) -> Result<()> {
        let len = self.samples.len();
        if len == 1 || len == steps + 1 {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: steps + 1,
                actual: len,
            })
        }
    }

    pub fn node(&self, k: usize) -> &T {
        if self.is_constant() {
            &self.samples[0]
        } else {
            &self.samples[k]
        }
    }

    /// Value halfway between nodes `k` and `k + 1`, from the cubic through the
    /// four nearest samples (quadratic for three, linear for two).
    pub fn midpoint(&self, k: usize) -> T {
        if self.is_constant() {
            self.samples[0].clone()
        } else {
            let s = &self.samples;
            match s.len() {
                2 => s[k].lerp(&s[k + 1], 0.5),
                3 if k == 0 => affine(&[(3.0, &s[0]), (6.0, &s[1]), (-1.0, &s[2])]),
                3 => affine(&[(-1.0, &s[0]), (6.0, &s[1]), (3.0, &s[2])]),
                _ if k == 0 => affine(&[(5.0, &s[0]), (15.0, &s[1]), (-5.0, &s[2]), (1.0, &s[3])]),
                len if k + 2 == len => affine(&[(1.0, &s[k - 2]), (-5.0, &s[k - 1]), (15.0, &s[k]), (5.0, &s[k + 1])]),
                _ => affine(&[(-1.0, &s[k - 1]), (9.0, &s[k]), (9.0, &s[k + 1]), (-1.0, &s[k + 2])]),
            }
        }
    }

    pub fn map<U, F: FnMut(&T) -> U>(&self, f: F) -> Sampled<U> {
        Sampled {
            samples: self.samples.iter().map(f).collect(),
        }
    }

    /// Expands to `steps + 1` explicit samples.
    pub fn expand(&self, steps: usize) -> Vec<T> {
        (0..=steps).map(|k| self.node(k).clone()).collect()
    }
}

/// Plant state-space matrices at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantMatrices {
    /// `n × n`
    pub a: Matrix,
    /// `n × m1`
    pub b: Matrix,
    /// `p1 × n`
    pub c: Matrix,
    /// `p1 × m1`
    pub d: Matrix,
    /// `n × p2`
    pub e: Matrix,
}

impl PlantMatrices {
    pub fn zeros(dims: &Dimensions) -> Self {
        let Dimensions { n, m1, p1, p2, .. } = *dims;
        Self {
            a: Matrix::zeros(n, n),
            b: Matrix::zeros(n, m1),
            c: Matrix::zeros(p1, n),
            d: Matrix::zeros(p1, m1),
            e: Matrix::zeros(n, p2),
        }
    }

    pub fn check_shapes(&self, dims: &Dimensions) -> Result<()> {
        let Dimensions { n, m1, p1, p2, .. } = *dims;
        check_shape("A", &self.a, (n, n))?;
        check_shape("B", &self.b, (n, m1))?;
        check_shape("C", &self.c, (p1, n))?;
        check_shape("D", &self.d, (p1, m1))?;
        check_shape("E", &self.e, (n, p2))
    }
}

impl Interpolate for PlantMatrices {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        Self {
            a: self.a.lerp(&other.a, w),
            b: self.b.lerp(&other.b, w),
            c: self.c.lerp(&other.c, w),
            d: self.d.lerp(&other.d, w),
            e: self.e.lerp(&other.e, w),
        }
    }
}

/// Time-sampled plant with its (constant) CCR matrix `K1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPlant {
    pub matrices: Sampled<PlantMatrices>,
    pub k1: Matrix,
}

impl QuantumPlant {
    pub fn new(matrices: Sampled<PlantMatrices>, k1: Matrix, dims: &Dimensions) -> Result<Self> {
        for m in matrices.samples() {
            m.check_shapes(dims)?;
        }
        check_k1(&k1, dims.n)?;
        Ok(Self { matrices, k1 })
    }

    pub fn constant(matrices: PlantMatrices, k1: Matrix, dims: &Dimensions) -> Result<Self> {
        Self::new(Sampled::constant(matrices), k1, dims)
    }
}

fn check_k1(k1: &Matrix, n: usize) -> Result<()> {
    check_shape("K1", k1, (n, n))?;
    let asym = (k1 + k1.transpose()).norm();
    if asym > 1e-12 * (1.0 + k1.norm()) || k1.clone().lu().determinant().abs() < 1e-12 {
        return Err(Error::SingularK1);
    }
    Ok(())
}

pub(crate) fn check_shape(name: &str, m: &Matrix, shape: (usize, usize)) -> Result<()> {
    if m.shape() != shape {
        return Err(mismatch(format!(
            "{name} is {}x{}, expected {}x{}",
            m.nrows(),
            m.ncols(),
            shape.0,
            shape.1
        )));
    }
    if !all_finite(m) {
        return Err(Error::Precondition(format!("{name} has non-finite entries")));
    }
    Ok(())
}

/// Performance weights `F` (`r × n`) and `G` (`r × p2`).
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub f: Matrix,
    pub g: Matrix,
}

impl CostWeights {
    pub fn zeros(dims: &Dimensions) -> Self {
        Self {
            f: Matrix::zeros(dims.r, dims.n),
            g: Matrix::zeros(dims.r, dims.p2),
        }
    }

    pub fn check_shapes(&self, dims: &Dimensions) -> Result<()> {
        check_shape("F", &self.f, (dims.r, dims.n))?;
        check_shape("G", &self.g, (dims.r, dims.p2))
    }
}

/// Controller parameter triple `(b, e, R)` at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    /// `n × m2` noise gain
    pub b: Matrix,
    /// `n × p1` observation gain
    pub e: Matrix,
    /// `n × n` symmetric Hamiltonian parameter
    pub r: Matrix,
}

impl ControllerParams {
    pub fn zeros(dims: &Dimensions) -> Self {
        Self {
            b: Matrix::zeros(dims.n, dims.m2),
            e: Matrix::zeros(dims.n, dims.p1),
            r: Matrix::zeros(dims.n, dims.n),
        }
    }

    pub fn check_shapes(&self, dims: &Dimensions) -> Result<()> {
        check_shape("b", &self.b, (dims.n, dims.m2))?;
        check_shape("e", &self.e, (dims.n, dims.p1))?;
        check_shape("R", &self.r, (dims.n, dims.n))
    }

    /// Symplectic change of controller coordinates `ξ ↦ σξ`:
    /// `b ↦ σb`, `e ↦ σe`, `R ↦ σ⁻ᵀRσ⁻¹`.
    pub fn transform(&self, sigma: &Matrix) -> Result<Self> {
        let inv = sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Precondition("transformation matrix is singular".into()))?;
        Ok(Self {
            b: sigma * &self.b,
            e: sigma * &self.e,
            r: inv.transpose() * &self.r * &inv,
        })
    }
}

impl Interpolate for ControllerParams {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        Self {
            b: self.b.lerp(&other.b, w),
            e: self.e.lerp(&other.e, w),
            r: self.r.lerp(&other.r, w),
        }
    }
}

/// Controller parameters over the horizon.
pub type ControllerSchedule = Sampled<ControllerParams>;

/// Controller state-space matrices at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerRealization {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub e: Matrix,
}

/// Residual norms of a pair of PR conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrResidual {
    pub res1: f64,
    pub res2: f64,
    pub pass: bool,
}

/// Plant PR residuals: `‖AK1 + K1Aᵀ + BJ1Bᵀ + EdJ2dᵀEᵀ‖` and `‖CK1 + DJ1Bᵀ‖`.
/// Each passes against `tol·(1 + Σ‖term‖)`.
pub fn validate_plant_pr(
    plant: &PlantMatrices,
    k1: &Matrix,
    d: &Matrix,
    ccr: &CcrSet,
    tol: f64,
) -> Result<PrResidual> {
    let PlantMatrices { a, b, c, d: dp, e } = plant;
    if a.nrows() != k1.nrows() || d.ncols() != ccr.j2.order() || e.ncols() != d.nrows() {
        return Err(mismatch("plant, K1 and d are not conformable"));
    }
    if b.ncols() != ccr.j1.order() || dp.ncols() != ccr.j1.order() {
        return Err(mismatch("B and D must have m1 columns"));
    }
    let (j1, j2) = (ccr.j1.matrix(), ccr.j2.matrix());
    let terms1 = [
        a * k1,
        k1 * a.transpose(),
        b * j1 * b.transpose(),
        e * d * j2 * d.transpose() * e.transpose(),
    ];
    let terms2 = [c * k1, dp * j1 * b.transpose()];
    Ok(residual_pair(&terms1, &terms2, tol))
}

/// Controller PR residuals: `‖aJ0 + J0aᵀ + eDJ1Dᵀeᵀ + bJ2bᵀ‖` and `‖cJ0 + dJ2bᵀ‖`.
pub fn validate_controller_pr(
    ctrl: &ControllerRealization,
    plant_d: &Matrix,
    ccr: &CcrSet,
    tol: f64,
) -> Result<PrResidual> {
    let ControllerRealization { a, b, c, d, e } = ctrl;
    if a.nrows() != ccr.j0.order() || e.ncols() != plant_d.nrows() || b.ncols() != ccr.j2.order() {
        return Err(mismatch("controller matrices are not conformable"));
    }
    let (j0, j1, j2) = (ccr.j0.matrix(), ccr.j1.matrix(), ccr.j2.matrix());
    let terms1 = [
        a * j0,
        j0 * a.transpose(),
        e * plant_d * j1 * plant_d.transpose() * e.transpose(),
        b * j2 * b.transpose(),
    ];
    let terms2 = [c * j0, d * j2 * b.transpose()];
    Ok(residual_pair(&terms1, &terms2, tol))
}

fn residual_pair(terms1: &[Matrix], terms2: &[Matrix], tol: f64) -> PrResidual {
    let sum = |ts: &[Matrix]| {
        let total = ts[1..].iter().fold(ts[0].clone(), |acc, t| acc + t);
        let scale: f64 = ts.iter().map(|t| t.norm()).sum();
        (total.norm(), scale)
    };
    let (res1, s1) = sum(terms1);
    let (res2, s2) = sum(terms2);
    PrResidual {
        res1,
        res2,
        pass: res1 <= tol * (1.0 + s1) && res2 <= tol * (1.0 + s2),
    }
}

/// Builds a constant PR plant from `(B, D, E, d, K1, R_plant)`:
/// `C = −DJ1BᵀK1⁻¹` and `A = −ΛK1⁻¹/2 + K1R_plant` with
/// `Λ = BJ1Bᵀ + EdJ2dᵀEᵀ`.
pub fn make_pr_plant(
    b: &Matrix,
    d_plant: &Matrix,
    e: &Matrix,
    d: &Matrix,
    k1: &Matrix,
    r_plant: &Matrix,
    dims: &Dimensions,
) -> Result<QuantumPlant> {
    let Dimensions { n, m1, m2, p1, p2, .. } = *dims;
    check_k1(k1, n)?;
    check_shape("B", b, (n, m1))?;
    check_shape("D", d_plant, (p1, m1))?;
    check_shape("E", e, (n, p2))?;
    check_shape("d", d, (p2, m2))?;
    check_shape("R_plant", r_plant, (n, n))?;
    let ccr = dims.ccr();
    let k1_inv = k1.clone().try_inverse().ok_or(Error::SingularK1)?;
    let lambda = b * ccr.j1.matrix() * b.transpose()
        + e * d * ccr.j2.matrix() * d.transpose() * e.transpose();
    let a = -(&lambda * &k1_inv) * 0.5 + k1 * r_plant;
    let c = -(d_plant * ccr.j1.matrix() * b.transpose() * &k1_inv);
    QuantumPlant::constant(
        PlantMatrices {
            a,
            b: b.clone(),
            c,
            d: d_plant.clone(),
            e: e.clone(),
        },
        k1.clone(),
        dims,
    )
}

/// PR controller from its parameter triple:
/// `a = (eDJ1Dᵀeᵀ + bJ2bᵀ)J0/2 + J0R` and `c = dJ2bᵀJ0`.
pub fn realize_controller(
    params: &ControllerParams,
    plant_d: &Matrix,
    d: &Matrix,
    ccr: &CcrSet,
) -> Result<ControllerRealization> {
    let ControllerParams { b, e, r } = params;
    let (j0, j1, j2) = (ccr.j0.matrix(), ccr.j1.matrix(), ccr.j2.matrix());
    if r.shape() != j0.shape()
        || b.nrows() != j0.nrows()
        || e.nrows() != j0.nrows()
        || b.ncols() != j2.nrows()
        || e.ncols() != plant_d.nrows()
        || d.ncols() != j2.nrows()
    {
        return Err(mismatch("controller parameters are not conformable"));
    }
    let asym = (r - r.transpose()).norm();
    if asym > R_SYMMETRY_TOL * (1.0 + r.norm()) {
        return Err(Error::NonSymmetricR(asym));
    }
    let skew = (e * plant_d * j1 * plant_d.transpose() * e.transpose() + b * j2 * b.transpose()) * j0 * 0.5;
    Ok(ControllerRealization {
        a: skew + j0 * r,
        b: b.clone(),
        c: d * j2 * b.transpose() * j0,
        d: d.clone(),
        e: e.clone(),
    })
}

/// Closed-loop matrices `(𝒜, ℬ, 𝒞)` at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    /// `2n × 2n`
    pub a_cl: Matrix,
    /// `2n × (m1 + m2)`
    pub b_cl: Matrix,
    /// `r × 2n`
    pub c_cl: Matrix,
}

impl ClosedLoop {
    /// Realizes the controller from `params` and assembles the loop.
    pub fn from_params(
        plant: &PlantMatrices,
        params: &ControllerParams,
        d: &Matrix,
        weights: &CostWeights,
        ccr: &CcrSet,
    ) -> Result<Self> {
        let ctrl = realize_controller(params, &plant.d, d, ccr)?;
        assemble_closed_loop(plant, &ctrl, weights)
    }

    /// `ℬℬᵀ`
    pub fn diffusion(&self) -> Matrix {
        &self.b_cl * self.b_cl.transpose()
    }

    /// `𝒞ᵀ𝒞`
    pub fn output_weight(&self) -> Matrix {
        self.c_cl.transpose() * &self.c_cl
    }
}

/// `𝒜 = [[A, Ec], [eC, a]]`, `ℬ = [[B, Ed], [eD, b]]`, `𝒞 = [F, Gc]`.
pub fn assemble_closed_loop(
    plant: &PlantMatrices,
    ctrl: &ControllerRealization,
    weights: &CostWeights,
) -> Result<ClosedLoop> {
    let n = plant.a.nrows();
    let conformable = ctrl.a.shape() == (n, n)
        && ctrl.c.ncols() == n
        && plant.e.ncols() == ctrl.c.nrows()
        && ctrl.e.ncols() == plant.c.nrows()
        && ctrl.d.nrows() == plant.e.ncols()
        && ctrl.b.ncols() == ctrl.d.ncols()
        && weights.f.shape() == (weights.g.nrows(), n)
        && weights.g.ncols() == ctrl.c.nrows();
    if !conformable {
        return Err(mismatch("plant, controller and weights are not conformable"));
    }
    Ok(ClosedLoop {
        a_cl: block2(&plant.a, &(&plant.e * &ctrl.c), &(&ctrl.e * &plant.c), &ctrl.a),
        b_cl: block2(&plant.b, &(&plant.e * &ctrl.d), &(&ctrl.e * &plant.d), &ctrl.b),
        c_cl: hstack(&weights.f, &(&weights.g * &ctrl.c)),
    })
}

fn hstack(left: &Matrix, right: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    out
}

/// Partitioned realization of the equivalent classical plant.
///
/// Inputs split into noise (`m1 + m2` channels) and control (`p2`); outputs
/// into the controlled signal (`r`) and observations (`m2 + p1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPlant {
    pub state: Matrix,
    pub noise_input: Matrix,
    pub control_input: Matrix,
    pub controlled_state: Matrix,
    pub controlled_noise: Matrix,
    pub controlled_control: Matrix,
    pub observed_state: Matrix,
    pub observed_noise: Matrix,
    pub observed_control: Matrix,
}

impl ClassicalPlant {
    /// The full block array, rows `[state; controlled; observed]`, columns
    /// `[state | noise | control]`.
    pub fn to_block_matrix(&self) -> Matrix {
        let rows = [
            [&self.state, &self.noise_input, &self.control_input],
            [&self.controlled_state, &self.controlled_noise, &self.controlled_control],
            [&self.observed_state, &self.observed_noise, &self.observed_control],
        ];
        let height: usize = rows.iter().map(|r| r[0].nrows()).sum();
        let width: usize = rows[0].iter().map(|m| m.ncols()).sum();
        let mut out = Matrix::zeros(height, width);
        let mut r0 = 0;
        for row in rows {
            let mut c0 = 0;
            for m in row {
                out.view_mut((r0, c0), m.shape()).copy_from(m);
                c0 += m.ncols();
            }
            r0 += row[0].nrows();
        }
        out
    }
}

/// Equivalent classical plant driven by an `(m1 + m2)`-dimensional standard
/// Wiener process with a noiseless controller.
pub fn equivalent_classical_plant(
    plant: &PlantMatrices,
    d: &Matrix,
    weights: &CostWeights,
) -> Result<ClassicalPlant> {
    let PlantMatrices { a, b, c, d: dp, e } = plant;
    let (n, m1, p1, p2) = (a.nrows(), b.ncols(), c.nrows(), e.ncols());
    let (m2, r) = (d.ncols(), weights.f.nrows());
    if d.nrows() != p2 || weights.g.shape() != (r, p2) || weights.f.ncols() != n {
        return Err(mismatch("plant, d and weights are not conformable"));
    }
    let mut observed_noise = Matrix::zeros(m2 + p1, m1 + m2);
    observed_noise
        .view_mut((0, m1), (m2, m2))
        .copy_from(&Matrix::identity(m2, m2));
    observed_noise.view_mut((m2, 0), (p1, m1)).copy_from(dp);
    let mut observed_state = Matrix::zeros(m2 + p1, n);
    observed_state.view_mut((m2, 0), (p1, n)).copy_from(c);
    Ok(ClassicalPlant {
        state: a.clone(),
        noise_input: hstack(b, &(e * d)),
        control_input: e.clone(),
        controlled_state: weights.f.clone(),
        controlled_noise: Matrix::zeros(r, m1 + m2),
        controlled_control: weights.g.clone(),
        observed_state,
        observed_noise,
        observed_control: Matrix::zeros(m2 + p1, p2),
    })
}

/// `𝒜Θ + Θ𝒜ᵀ + ℬJℬᵀ`.
pub fn theta_rhs(theta: &Matrix, a_cl: &Matrix, b_cl: &Matrix, j: &CcrMatrix) -> Matrix {
    a_cl * theta + theta * a_cl.transpose() + b_cl * j.matrix() * b_cl.transpose()
}

/// Initial closed-loop CCR matrix `diag(K1, J0)`.
pub fn initial_theta(k1: &Matrix, j0: &CcrMatrix) -> Matrix {
    let n = k1.nrows();
    block2(k1, &Matrix::zeros(n, n), &Matrix::zeros(n, n), j0.matrix())
}

/// Minimum eigenvalue of the Hermitian matrix `P0 + iΘ0/2`.
pub fn initial_covariance_margin(p0: &Matrix, theta0: &Matrix) -> Result<f64> {
    hermitian_min_eigenvalue(p0, &(theta0 * 0.5))
}

/// `P0 + iΘ0/2 ≽ −tol`.
pub fn check_initial_covariance(p0: &Matrix, theta0: &Matrix, tol: f64) -> Result<bool> {
    Ok(initial_covariance_margin(p0, theta0)? >= -tol)
}

/// Splits an order-`2n` matrix into its four `n × n` blocks.
pub fn split_blocks(m: &Matrix) -> [[Matrix; 2]; 2] {
    let n = m.nrows() / 2;
    [
        [block(m, 0, 0, n, n), block(m, 0, n, n, n)],
        [block(m, n, 0, n, n), block(m, n, n, n, n)],
    ]
}

/// Transforms a closed-loop covariance by `S = diag(I, σ)`.
pub fn congruence_by_controller_transform(p: &Matrix, sigma: &Matrix) -> Matrix {
    let n = sigma.nrows();
    let s = block2(
        &DMatrix::identity(n, n),
        &Matrix::zeros(n, n),
        &Matrix::zeros(n, n),
        sigma,
    );
    &s * p * s.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foundations::{classify, hamiltonian_part, skew_hamiltonian_part};
    use crate::random::{random_matrix, random_symmetric, seeded_rng};
    use rand::Rng;

    fn dims2() -> Dimensions {
        Dimensions::new(2, 2, 2, 2, 2, 2).unwrap()
    }

    fn random_params<R: Rng>(rng: &mut R, dims: &Dimensions) -> ControllerParams {
        ControllerParams {
            b: random_matrix(rng, dims.n, dims.m2, 1.0),
            e: random_matrix(rng, dims.n, dims.p1, 1.0),
            r: random_symmetric(rng, dims.n, 1.0),
        }
    }

    fn random_plant<R: Rng>(rng: &mut R, dims: &Dimensions) -> (QuantumPlant, Matrix) {
        let d = random_matrix(rng, dims.p2, dims.m2, 1.0);
        let k1 = dims.ccr().j0.matrix().clone();
        let plant = make_pr_plant(
            &random_matrix(rng, dims.n, dims.m1, 1.0),
            &random_matrix(rng, dims.p1, dims.m1, 1.0),
            &random_matrix(rng, dims.n, dims.p2, 1.0),
            &d,
            &k1,
            &random_symmetric(rng, dims.n, 1.0),
            dims,
        )
        .unwrap();
        (plant, d)
    }

    #[test]
    fn dimensions_validation() {
        assert!(Dimensions::new(3, 2, 2, 2, 2, 2).is_err());
        assert!(Dimensions::new(2, 1, 2, 2, 2, 2).is_err());
        assert!(Dimensions::new(2, 2, 2, 0, 2, 2).is_err());
        let d = Dimensions::new(4, 2, 6, 1, 3, 1).unwrap();
        assert_eq!((d.nu(), d.mu1(), d.mu2()), (2, 1, 3));
        assert_eq!(d.ccr().j.order(), 8);
    }

    #[test]
    fn zero_plant_is_pr() {
        let dims = dims2();
        let ccr = dims.ccr();
        let plant = PlantMatrices::zeros(&dims);
        let res = validate_plant_pr(&plant, ccr.j0.matrix(), &Matrix::zeros(2, 2), &ccr, 1e-12).unwrap();
        assert_eq!((res.res1, res.res2), (0.0, 0.0));
        assert!(res.pass);
    }

    #[test]
    fn make_pr_plant_examples() {
        let dims = dims2();
        let ccr = dims.ccr();
        let z = Matrix::zeros(2, 2);
        let plant = make_pr_plant(&z, &z, &z, &z, ccr.j0.matrix(), &z, &dims).unwrap();
        let m = plant.matrices.node(0);
        assert_eq!(m.a, z);
        assert_eq!(m.c, z);

        let mut rng = seeded_rng(10);
        for _ in 0..50 {
            let (plant, d) = random_plant(&mut rng, &dims);
            let res = validate_plant_pr(plant.matrices.node(0), &plant.k1, &d, &ccr, 1e-12).unwrap();
            assert!(res.res1 < 1e-12 && res.res2 < 1e-12, "{res:?}");
        }

        // R_plant only shifts A by K1 R_plant
        let b = random_matrix(&mut rng, 2, 2, 1.0);
        let r = random_symmetric(&mut rng, 2, 1.0);
        let p0 = make_pr_plant(&b, &z, &b, &b, ccr.j0.matrix(), &z, &dims).unwrap();
        let p1 = make_pr_plant(&b, &z, &b, &b, ccr.j0.matrix(), &r, &dims).unwrap();
        let shift = &p1.matrices.node(0).a - &p0.matrices.node(0).a;
        assert!((shift - ccr.j0.matrix() * &r).norm() < 1e-14);
        let res = validate_plant_pr(p1.matrices.node(0), &p1.k1, &b, &ccr, 1e-12).unwrap();
        assert!(res.pass);

        assert_eq!(
            make_pr_plant(&b, &z, &b, &b, &z, &z, &dims).unwrap_err(),
            Error::SingularK1
        );
    }

    #[test]
    fn perturbed_plant_fails() {
        let dims = dims2();
        let ccr = dims.ccr();
        let mut rng = seeded_rng(11);
        let (plant, d) = random_plant(&mut rng, &dims);
        let mut m = plant.matrices.node(0).clone();
        let eps = 1e-3;
        m.a += Matrix::identity(2, 2) * eps;
        let res = validate_plant_pr(&m, &plant.k1, &d, &ccr, 1e-10).unwrap();
        // δA = εI contributes εK1 + K1(εI)ᵀ = 2εK1
        let oracle = 2.0 * eps * plant.k1.norm();
        assert!((res.res1 - oracle).abs() < 1e-12);
        assert!(!res.pass);
    }

    #[test]
    fn realize_controller_examples() {
        let dims = dims2();
        let ccr = dims.ccr();
        let z = Matrix::zeros(2, 2);
        let zero = ControllerParams::zeros(&dims);
        let ctrl = realize_controller(&zero, &z, &z, &ccr).unwrap();
        assert_eq!(ctrl.a, z);
        assert_eq!(ctrl.c, z);

        let mut rng = seeded_rng(12);
        let r = random_symmetric(&mut rng, 2, 1.0);
        let params = ControllerParams { r: r.clone(), ..zero.clone() };
        let ctrl = realize_controller(&params, &z, &z, &ccr).unwrap();
        assert_eq!(ctrl.a, ccr.j0.matrix() * &r);
        assert!(classify(&ctrl.a, &ccr.j0, 1e-12).unwrap().hamiltonian);

        let bad = ControllerParams {
            r: random_matrix(&mut rng, 2, 2, 1.0),
            ..zero
        };
        assert!(matches!(
            realize_controller(&bad, &z, &z, &ccr),
            Err(Error::NonSymmetricR(_))
        ));
    }

    #[test]
    fn realized_controllers_are_pr_and_decompose() {
        let dims = Dimensions::new(4, 2, 2, 2, 2, 2).unwrap();
        let ccr = dims.ccr();
        let mut rng = seeded_rng(13);
        for _ in 0..200 {
            let params = random_params(&mut rng, &dims);
            let dp = random_matrix(&mut rng, 2, 2, 1.0);
            let d = random_matrix(&mut rng, 2, 2, 1.0);
            let ctrl = realize_controller(&params, &dp, &d, &ccr).unwrap();
            let res = validate_controller_pr(&ctrl, &dp, &ccr, 1e-12).unwrap();
            assert!(res.res1 < 1e-12 && res.res2 < 1e-12, "{res:?}");
            let j0r = ccr.j0.matrix() * &params.r;
            // a − J0R is skew-Hamiltonian, J0R is Hamiltonian
            assert!(hamiltonian_part(&(&ctrl.a - &j0r), &ccr.j0).norm() < 1e-12);
            assert!(skew_hamiltonian_part(&j0r, &ccr.j0).norm() < 1e-12);
        }
    }

    #[test]
    fn perturbed_controller_fails_pr() {
        let dims = dims2();
        let ccr = dims.ccr();
        let mut rng = seeded_rng(14);
        let params = random_params(&mut rng, &dims);
        let dp = random_matrix(&mut rng, 2, 2, 1.0);
        let mut ctrl = realize_controller(&params, &dp, &dp, &ccr).unwrap();
        let s = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        ctrl.a += &s * 1e-3;
        let res = validate_controller_pr(&ctrl, &dp, &ccr, 1e-10).unwrap();
        let oracle = (&s * ccr.j0.matrix() + ccr.j0.matrix() * &s).norm() * 1e-3;
        assert!((res.res1 - oracle).abs() < 1e-12);
        assert!(!res.pass);

        let zero = ControllerRealization {
            a: Matrix::zeros(2, 2),
            b: Matrix::zeros(2, 2),
            c: Matrix::zeros(2, 2),
            d: Matrix::zeros(2, 2),
            e: Matrix::zeros(2, 2),
        };
        let res = validate_controller_pr(&zero, &dp, &ccr, 1e-12).unwrap();
        assert_eq!((res.res1, res.res2), (0.0, 0.0));
    }

    #[test]
    fn closed_loop_blocks() {
        let dims = dims2();
        let ccr = dims.ccr();
        let mut rng = seeded_rng(15);
        let (plant, d) = random_plant(&mut rng, &dims);
        let pm = plant.matrices.node(0);
        let weights = CostWeights {
            f: random_matrix(&mut rng, 2, 2, 1.0),
            g: random_matrix(&mut rng, 2, 2, 1.0),
        };
        let zero = realize_controller(&ControllerParams::zeros(&dims), &pm.d, &d, &ccr).unwrap();
        let cl = assemble_closed_loop(pm, &zero, &weights).unwrap();
        let [[a11, a12], [a21, a22]] = split_blocks(&cl.a_cl);
        assert_eq!(a11, pm.a);
        assert_eq!((a12.norm(), a21.norm(), a22.norm()), (0.0, 0.0, 0.0));
        assert_eq!(cl.c_cl.columns(0, 2).into_owned(), weights.f);
        assert_eq!(cl.c_cl.columns(2, 2).norm(), 0.0);

        let params = random_params(&mut rng, &dims);
        let ctrl = realize_controller(&params, &pm.d, &d, &ccr).unwrap();
        let cl = assemble_closed_loop(pm, &ctrl, &weights).unwrap();
        let [[_, a12], [a21, a22]] = split_blocks(&cl.a_cl);
        let expected12 = &pm.e * &d * ccr.j2.matrix() * params.b.transpose() * ccr.j0.matrix();
        assert!((a12 - expected12).norm() < 1e-14);
        assert_eq!(a21, &params.e * &pm.c);
        assert_eq!(a22, ctrl.a);
        assert_eq!(cl.b_cl.view((0, 0), (2, 2)).into_owned(), pm.b);
        assert_eq!(cl.b_cl.view((0, 2), (2, 2)).into_owned(), &pm.e * &d);
        assert_eq!(cl.b_cl.view((2, 0), (2, 2)).into_owned(), &params.e * &pm.d);
        assert_eq!(cl.b_cl.view((2, 2), (2, 2)).into_owned(), params.b);
        assert_eq!(cl.c_cl.columns(2, 2).into_owned(), &weights.g * &ctrl.c);
    }

    #[test]
    fn closed_loop_is_linear_in_blocks() {
        let dims = dims2();
        let mut rng = seeded_rng(16);
        let rand_ctrl = |rng: &mut crate::random::SeededRng| ControllerRealization {
            a: random_matrix(rng, 2, 2, 1.0),
            b: random_matrix(rng, 2, 2, 1.0),
            c: random_matrix(rng, 2, 2, 1.0),
            d: random_matrix(rng, 2, 2, 1.0),
            e: random_matrix(rng, 2, 2, 1.0),
        };
        let c1 = rand_ctrl(&mut rng);
        let c2 = rand_ctrl(&mut rng);
        let mut plant = PlantMatrices::zeros(&dims);
        plant.a = random_matrix(&mut rng, 2, 2, 1.0);
        let weights = CostWeights::zeros(&dims);
        // 𝒜 and ℬ are affine in the controller blocks with (A, B) fixed
        let mix = ControllerRealization {
            a: &c1.a + &c2.a,
            b: &c1.b + &c2.b,
            c: &c1.c + &c2.c,
            d: &c1.d + &c2.d,
            e: &c1.e + &c2.e,
        };
        let l1 = assemble_closed_loop(&plant, &c1, &weights).unwrap();
        let l2 = assemble_closed_loop(&plant, &c2, &weights).unwrap();
        let lm = assemble_closed_loop(&plant, &mix, &weights).unwrap();
        let zero = assemble_closed_loop(&plant, &ControllerRealization {
            a: Matrix::zeros(2, 2),
            b: Matrix::zeros(2, 2),
            c: Matrix::zeros(2, 2),
            d: Matrix::zeros(2, 2),
            e: Matrix::zeros(2, 2),
        }, &weights)
        .unwrap();
        assert!((&lm.a_cl - (&l1.a_cl + &l2.a_cl - &zero.a_cl)).norm() < 1e-14);
        assert!((&lm.b_cl - (&l1.b_cl + &l2.b_cl - &zero.b_cl)).norm() < 1e-14);
    }

    #[test]
    fn classical_plant_blocks() {
        let dims = dims2();
        let zero = equivalent_classical_plant(&PlantMatrices::zeros(&dims), &Matrix::zeros(2, 2), &CostWeights::zeros(&dims)).unwrap();
        let full = zero.to_block_matrix();
        assert_eq!(full.shape(), (2 + 2 + 4, 2 + 4 + 2));
        assert_eq!(full.norm_squared(), 2.0);
        assert_eq!(zero.observed_noise.view((0, 2), (2, 2)).into_owned(), Matrix::identity(2, 2));
        assert_eq!(zero.noise_input.ncols(), dims.m1 + dims.m2);

        let mut rng = seeded_rng(17);
        let (plant, d) = random_plant(&mut rng, &dims);
        let pm = plant.matrices.node(0);
        let w = CostWeights {
            f: random_matrix(&mut rng, 2, 2, 1.0),
            g: random_matrix(&mut rng, 2, 2, 1.0),
        };
        let cp = equivalent_classical_plant(pm, &d, &w).unwrap();
        assert_eq!(cp.state, pm.a);
        assert_eq!(cp.noise_input.columns(0, 2).into_owned(), pm.b);
        assert_eq!(cp.noise_input.columns(2, 2).into_owned(), &pm.e * &d);
        assert_eq!(cp.control_input, pm.e);
        assert_eq!(cp.controlled_state, w.f);
        assert_eq!(cp.controlled_control, w.g);
        assert_eq!(cp.observed_state.rows(2, 2).into_owned(), pm.c);
        assert_eq!(cp.observed_noise.view((2, 0), (2, 2)).into_owned(), pm.d);
    }

    #[test]
    fn theta_rhs_vanishes_for_pr_loops() {
        let dims = Dimensions::new(4, 2, 2, 2, 2, 3).unwrap();
        let ccr = dims.ccr();
        let mut rng = seeded_rng(18);
        for _ in 0..20 {
            let (plant, d) = random_plant(&mut rng, &dims);
            let w = CostWeights {
                f: random_matrix(&mut rng, 3, 4, 1.0),
                g: random_matrix(&mut rng, 3, 2, 1.0),
            };
            let params = random_params(&mut rng, &dims);
            let cl = ClosedLoop::from_params(plant.matrices.node(0), &params, &d, &w, &ccr).unwrap();
            let theta0 = initial_theta(&plant.k1, &ccr.j0);
            let rhs = theta_rhs(&theta0, &cl.a_cl, &cl.b_cl, &ccr.j);
            assert!(rhs.norm() < 1e-12, "{}", rhs.norm());

            let mut bad = cl.clone();
            bad.a_cl[(4, 4)] += 1e-3;
            let rhs = theta_rhs(&theta0, &bad.a_cl, &bad.b_cl, &ccr.j);
            assert!(rhs.norm() > 1e-4);
            assert!((&rhs + rhs.transpose()).norm() < 1e-13);
        }
        let z = Matrix::zeros(8, 8);
        let theta = initial_theta(ccr.j0.matrix(), &ccr.j0);
        assert_eq!(theta_rhs(&theta, &z, &Matrix::zeros(8, 4), &ccr.j), z);
    }

    #[test]
    fn initial_covariance_examples() {
        let j0 = canonical_ccr(2);
        let theta = j0.matrix().clone();
        // eigenvalues of I + iJ/2 are 1 ± 1/2
        assert!((initial_covariance_margin(&Matrix::identity(4, 4), &theta).unwrap() - 0.5).abs() < 1e-14);
        assert!(check_initial_covariance(&Matrix::identity(4, 4), &theta, 0.0).unwrap());
        assert!(!check_initial_covariance(&Matrix::zeros(4, 4), &theta, 1e-12).unwrap());
        assert!(check_initial_covariance(&(Matrix::identity(4, 4) * 0.1), &Matrix::zeros(4, 4), 0.0).unwrap());
    }

    #[test]
    fn controller_transform_is_equivalent() {
        let dims = Dimensions::new(4, 2, 2, 2, 2, 2).unwrap();
        let ccr = dims.ccr();
        let mut rng = seeded_rng(19);
        let sigma = crate::foundations::random_symplectic(4, 4, 0.5).unwrap();
        let sigma_inv = sigma.clone().try_inverse().unwrap();
        let params = random_params(&mut rng, &dims);
        let dp = random_matrix(&mut rng, 2, 2, 1.0);
        let d = random_matrix(&mut rng, 2, 2, 1.0);
        let ctrl = realize_controller(&params, &dp, &d, &ccr).unwrap();
        let moved = realize_controller(&params.transform(&sigma).unwrap(), &dp, &d, &ccr).unwrap();
        assert!((&moved.a - &sigma * &ctrl.a * &sigma_inv).norm() < 1e-12);
        assert!((&moved.c - &ctrl.c * &sigma_inv).norm() < 1e-12);
        assert!(validate_controller_pr(&moved, &dp, &ccr, 1e-12).unwrap().pass);
    }

    #[test]
    fn sampled_interpolation() {
        let s = Sampled::per_node(vec![Matrix::zeros(1, 1), Matrix::identity(1, 1) * 2.0]).unwrap();
        assert_eq!(s.midpoint(0)[(0, 0)], 1.0);
        assert!(s.check_len(1).is_ok());
        assert!(s.check_len(2).is_err());
        let c = Sampled::constant(Matrix::identity(1, 1));
        assert!(c.check_len(7).is_ok());
        assert_eq!(c.node(5), &Matrix::identity(1, 1));
        assert_eq!(c.expand(3).len(), 4);
    }

    #[test]
    fn midpoints_reproduce_polynomials() {
        let check = |f: &dyn Fn(f64) -> f64, len: usize| {
            let samples = (0..len).map(|k| Matrix::from_element(1, 1, f(k as f64))).collect();
            let s = Sampled::per_node(samples).unwrap();
            for k in 0..len - 1 {
                assert!((s.midpoint(k)[(0, 0)] - f(k as f64 + 0.5)).abs() < 1e-12, "len {len} k {k}");
            }
        };
        let quadratic = |t: f64| 0.3 - t + 2.0 * t * t;
        let cubic = |t: f64| quadratic(t) - 0.7 * t * t * t;
        check(&quadratic, 3);
        check(&cubic, 4);
        check(&cubic, 7);
    }
}
