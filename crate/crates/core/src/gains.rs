//! Optimal controller gains from the Gramians at one time instant.
//!
//! The control Hamiltonian `Π = ⟨𝒞ᵀ𝒞, P⟩ + ⟨Q, 𝒜P + P𝒜ᵀ + ℬℬᵀ⟩` is a sum of
//! two quadratics, one in the noise gain `b` and one in the observation gain
//! `e`. Their Hessians are the operators `𝔑` and `𝔐`.
//!
//! Gains are obtained from the self-adjoint parts of `𝔐` and `𝔑`. These
//! coincide with the operators themselves whenever `H22` is skew-Hamiltonian,
//! and otherwise still yield the exact minimizers of `Π`.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{mismatch, Error, Result};
use crate::foundations::{antisymmetrize, devectorize, hamiltonian_part, symmetrize, vectorize, CcrMatrix, Matrix, DEFAULT_TOL};
use crate::model::{split_blocks as split_square, CcrSet, ClosedLoop, ControllerParams, CostWeights, PlantMatrices};
use crate::operators::{GradeROperator, SolveMode, PSEUDO_THRESHOLD};

/// Relative size of `𝐇(H22)` above which a node is flagged.
pub const SKEW_HAMILTONIAN_FLAG_TOL: f64 = 1e-6;

/// `n × n` blocks of `P`, `Q` and `H = QP`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockView {
    pub p11: Matrix,
    pub p12: Matrix,
    pub p21: Matrix,
    pub p22: Matrix,
    pub q11: Matrix,
    pub q21: Matrix,
    pub q22: Matrix,
    pub h11: Matrix,
    pub h12: Matrix,
    pub h21: Matrix,
    pub h22: Matrix,
}

impl BlockView {
    pub fn new(p: &Matrix, q: &Matrix) -> Result<Self> {
        if p.shape() != q.shape() || !p.is_square() || p.nrows() % 2 != 0 {
            return Err(mismatch("P and Q must be square of the same even order"));
        }
        let h = q * p;
        let [[p11, p12], [p21, p22]] = split_square(p);
        let [[q11, _], [q21, q22]] = split_square(q);
        let [[h11, h12], [h21, h22]] = split_square(&h);
        Ok(Self {
            p11,
            p12,
            p21,
            p22,
            q11,
            q21,
            q22,
            h11,
            h12,
            h21,
            h22,
        })
    }

    /// `‖𝐇(H22)‖ / (1 + ‖H22‖)`.
    pub fn skew_hamiltonian_residual(&self, j0: &CcrMatrix) -> f64 {
        hamiltonian_part(&self.h22, j0).norm() / (1.0 + self.h22.norm())
    }
}

/// `𝔐 = ⟦H22J0, DJ1Dᵀ | Q22, DDᵀ⟧` on `n × p1` matrices.
pub fn operator_m(blocks: &BlockView, plant_d: &Matrix, ccr: &CcrSet) -> GradeROperator {
    let dd = plant_d * plant_d.transpose();
    let dj1d = plant_d * ccr.j1.matrix() * plant_d.transpose();
    GradeROperator::new(vec![
        (&blocks.h22 * ccr.j0.matrix(), dj1d),
        (blocks.q22.clone(), dd),
    ])
    .expect("pairs share shapes")
}

/// `𝔑 = ⟦H22J0, J2 | Q22, I | J0P22J0, J2dᵀGᵀGdJ2⟧` on `n × m2` matrices.
pub fn operator_n(blocks: &BlockView, d: &Matrix, g: &Matrix, ccr: &CcrSet) -> GradeROperator {
    let (j0, j2) = (ccr.j0.matrix(), ccr.j2.matrix());
    let gd = g * d;
    let m2 = j2.nrows();
    GradeROperator::new(vec![
        (&blocks.h22 * j0, j2.clone()),
        (blocks.q22.clone(), Matrix::identity(m2, m2)),
        (j0 * &blocks.p22 * j0, j2 * gd.transpose() * &gd * j2),
    ])
    .expect("pairs share shapes")
}

/// Linear part of `Π` in `e`: `H21Cᵀ + Q21BDᵀ`.
pub fn rhs_e(blocks: &BlockView, plant: &PlantMatrices) -> Matrix {
    &blocks.h21 * plant.c.transpose() + &blocks.q21 * &plant.b * plant.d.transpose()
}

/// Linear part of `Π` in `b`: `Q21Ed + J0(H12ᵀE + P21FᵀG)dJ2`.
pub fn rhs_b(blocks: &BlockView, plant: &PlantMatrices, weights: &CostWeights, d: &Matrix, ccr: &CcrSet) -> Matrix {
    let j0 = ccr.j0.matrix();
    &blocks.q21 * &plant.e * d
        + j0 * (blocks.h12.transpose() * &plant.e + &blocks.p21 * weights.f.transpose() * &weights.g)
            * d
            * ccr.j2.matrix()
}

/// Solution of `op(X) = −rhs` with the self-adjoint part of `op`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSolve {
    pub gain: Matrix,
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

fn solve_gain(op: &GradeROperator, rhs: &Matrix, mode: SolveMode) -> Result<GainSolve> {
    let sym = op.self_adjoint_part()?;
    let spectrum = sym.definiteness();
    let min_eigenvalue = spectrum.min_eigenvalue();
    let positive_definite = min_eigenvalue > 0.0;
    if mode == SolveMode::Exact && !positive_definite {
        return Err(Error::IndefiniteOperator { min_eigenvalue });
    }
    let gain = if positive_definite {
        sym.solve(&(-rhs), mode)?
    } else {
        positive_part_solve(&sym, &(-rhs))?
    };
    Ok(GainSolve {
        gain,
        min_eigenvalue,
        positive_definite,
    })
}

/// Minimum-norm minimizer of `½⟨X, 𝔖(X)⟩ − ⟨Y, X⟩` over the span of the
/// positive eigenvectors of a self-adjoint `𝔖`.
fn positive_part_solve(sym: &GradeROperator, y: &Matrix) -> Result<Matrix> {
    let (p, q) = sym.domain_shape();
    let eig = symmetrize(&sym.to_matrix()).symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    let rhs = vectorize(y);
    let mut x = DVector::zeros(p * q);
    if scale > 0.0 {
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda > PSEUDO_THRESHOLD * scale {
                let v = eig.eigenvectors.column(i);
                x += v * (v.dot(&rhs) / lambda);
            }
        }
    }
    devectorize(&x, p, q)
}

/// `e⋄ = −𝔐⁻¹(H21Cᵀ + Q21BDᵀ)`.
pub fn gain_e(blocks: &BlockView, plant: &PlantMatrices, ccr: &CcrSet, mode: SolveMode) -> Result<GainSolve> {
    solve_gain(&operator_m(blocks, &plant.d, ccr), &rhs_e(blocks, plant), mode)
}

/// `b⋄ = −𝔑⁻¹(Q21Ed + J0(H12ᵀE + P21FᵀG)dJ2)`.
pub fn gain_b(
    blocks: &BlockView,
    plant: &PlantMatrices,
    weights: &CostWeights,
    d: &Matrix,
    ccr: &CcrSet,
    mode: SolveMode,
) -> Result<GainSolve> {
    solve_gain(&operator_n(blocks, d, &weights.g, ccr), &rhs_b(blocks, plant, weights, d, ccr), mode)
}

/// Both optimal gains at one node together with their operators.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPair {
    pub e: Matrix,
    pub b: Matrix,
    pub m_op: GradeROperator,
    pub n_op: GradeROperator,
    pub m_min_eig: f64,
    pub n_min_eig: f64,
    /// `‖𝐇(H22)‖ / (1 + ‖H22‖)`
    pub skew_residual: f64,
}

impl GainPair {
    pub fn positive_definite(&self) -> bool {
        self.m_min_eig > 0.0 && self.n_min_eig > 0.0
    }

    /// Controller parameters `(b⋄, e⋄, R)`.
    pub fn params(&self, r: Matrix) -> ControllerParams {
        ControllerParams {
            b: self.b.clone(),
            e: self.e.clone(),
            r,
        }
    }
}

pub fn synthesize_gains(
    blocks: &BlockView,
    plant: &PlantMatrices,
    weights: &CostWeights,
    d: &Matrix,
    ccr: &CcrSet,
    mode: SolveMode,
) -> Result<GainPair> {
    let m_op = operator_m(blocks, &plant.d, ccr);
    let n_op = operator_n(blocks, d, &weights.g, ccr);
    let e = solve_gain(&m_op, &rhs_e(blocks, plant), mode)?;
    let b = solve_gain(&n_op, &rhs_b(blocks, plant, weights, d, ccr), mode)?;
    let skew_residual = blocks.skew_hamiltonian_residual(&ccr.j0);
    if skew_residual > SKEW_HAMILTONIAN_FLAG_TOL {
        log::debug!("H22 deviates from skew-Hamiltonian structure by {skew_residual:.3e}");
    }
    Ok(GainPair {
        e: e.gain,
        b: b.gain,
        m_op,
        n_op,
        m_min_eig: e.min_eigenvalue,
        n_min_eig: b.min_eigenvalue,
        skew_residual,
    })
}

/// `Π = ⟨𝒞ᵀ𝒞, P⟩ + ⟨Q, 𝒜P + P𝒜ᵀ + ℬℬᵀ⟩` for the controller `params`.
pub fn control_hamiltonian(
    p: &Matrix,
    params: &ControllerParams,
    q: &Matrix,
    plant: &PlantMatrices,
    weights: &CostWeights,
    d: &Matrix,
    ccr: &CcrSet,
) -> Result<f64> {
    let cl = ClosedLoop::from_params(plant, params, d, weights, ccr)?;
    hamiltonian_of_loop(p, q, &cl)
}

pub fn hamiltonian_of_loop(p: &Matrix, q: &Matrix, cl: &ClosedLoop) -> Result<f64> {
    let order = cl.a_cl.nrows();
    if p.shape() != (order, order) || q.shape() != (order, order) {
        return Err(mismatch(format!("P and Q must be {order}x{order}")));
    }
    let ap = &cl.a_cl * p;
    let lyap = &ap + ap.transpose() + cl.diffusion();
    Ok(cl.output_weight().dot(p) + q.dot(&lyap))
}

/// `⟨FᵀF, P11⟩ + 2⟨H11, A⟩ + ⟨Q11, BBᵀ + EddᵀEᵀ⟩ − ‖g_b‖²_{𝔑⁻¹} − ‖g_e‖²_{𝔐⁻¹}`.
pub fn minimized_hamiltonian(
    blocks: &BlockView,
    plant: &PlantMatrices,
    weights: &CostWeights,
    d: &Matrix,
    ccr: &CcrSet,
    mode: SolveMode,
) -> Result<f64> {
    let ge = rhs_e(blocks, plant);
    let gb = rhs_b(blocks, plant, weights, d, ccr);
    let e = solve_gain(&operator_m(blocks, &plant.d, ccr), &ge, mode)?;
    let b = solve_gain(&operator_n(blocks, d, &weights.g, ccr), &gb, mode)?;
    let ed = &plant.e * d;
    let noise = &plant.b * plant.b.transpose() + &ed * ed.transpose();
    let ftf = weights.f.transpose() * &weights.f;
    // ⟨g, 𝔒⁻¹g⟩ = −⟨g, X⋄⟩ with X⋄ = −𝔒⁻¹g
    Ok(ftf.dot(&blocks.p11) + 2.0 * blocks.h11.dot(&plant.a) + blocks.q11.dot(&noise)
        + gb.dot(&b.gain)
        + ge.dot(&e.gain))
}

/// Sufficient conditions for positive definiteness of `𝔐` and `𝔑`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WellPosedness {
    /// `D` has full row rank.
    pub rank_ok: bool,
    pub q22_nonsingular: bool,
    pub q22_condition: f64,
    /// `𝐫(Q22⁻¹·Anti(H22J0))`, reported only for nonsingular `Q22`.
    pub spectral_radius: Option<f64>,
}

impl WellPosedness {
    pub fn holds(&self) -> bool {
        self.rank_ok && self.spectral_radius.is_some_and(|r| r < 1.0)
    }
}

pub fn well_posedness(blocks: &BlockView, plant_d: &Matrix, j0: &CcrMatrix) -> WellPosedness {
    let rank_ok = plant_d.nrows() <= plant_d.ncols() && plant_d.rank(DEFAULT_TOL * (1.0 + plant_d.norm())) == plant_d.nrows();
    let sv = blocks.q22.singular_values();
    let q22_condition = if sv.min() > 0.0 { sv.max() / sv.min() } else { f64::INFINITY };
    let q22_nonsingular = q22_condition < 1e12;
    let spectral_radius = if q22_nonsingular {
        blocks.q22.clone().lu().solve(&antisymmetrize(&(&blocks.h22 * j0.matrix()))).map(|m| {
            m.complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        })
    } else {
        None
    };
    WellPosedness {
        rank_ok,
        q22_nonsingular,
        q22_condition,
        spectral_radius,
    }
}
