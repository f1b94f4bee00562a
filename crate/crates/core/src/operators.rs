//! Special linear operators `⟦α₁,β₁ | … | α_r,β_r⟧(X) = Σ αₖ X βₖ` on matrix
//! spaces, their Frobenius adjoints, matricization and inversion through
//! column-stacking vectorization.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{mismatch, Error, Result};
use crate::foundations::{antisymmetrize, devectorize, kron, symmetrize, vectorize, Matrix, DEFAULT_TOL};

/// Condition estimate above which exact inversion is refused.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// Relative singular-value threshold of the pseudo-inverse.
pub const PSEUDO_THRESHOLD: f64 = 1e-10;

/// Inversion policy of [`GradeROperator::solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Exact,
    Pseudo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    BothSymmetric,
    BothAntisymmetric,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfAdjointCertificate {
    pub is_self_adjoint: bool,
    pub per_pair_kind: Vec<PairKind>,
}

/// Spectrum summary returned by [`GradeROperator::definiteness`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Definiteness {
    pub certificate: SelfAdjointCertificate,
    /// Ascending. Real parts when the operator is not self-adjoint.
    pub eigenvalues: Vec<f64>,
}

impl Definiteness {
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.certificate.is_self_adjoint && self.min_eigenvalue() > 0.0
    }
}

/// Operator `X ↦ Σₖ αₖ X βₖ` mapping `p×q` matrices to `s×t` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GradeROperator {
    pairs: Vec<(Matrix, Matrix)>,
}

impl GradeROperator {
    pub fn new(pairs: Vec<(Matrix, Matrix)>) -> Result<Self> {
        let Some((a0, b0)) = pairs.first() else {
            return Err(Error::InvalidDimensions("operator needs at least one pair".into()));
        };
        let (ashape, bshape) = (a0.shape(), b0.shape());
        if let Some(k) = pairs
            .iter()
            .position(|(a, b)| a.shape() != ashape || b.shape() != bshape)
        {
            return Err(mismatch(format!("pair {k} disagrees with the first pair's shapes")));
        }
        Ok(Self { pairs })
    }

    pub fn single(alpha: Matrix, beta: Matrix) -> Self {
        Self {
            pairs: vec![(alpha, beta)],
        }
    }

    pub fn pairs(&self) -> &[(Matrix, Matrix)] {
        &self.pairs
    }

    pub fn grade(&self) -> usize {
        self.pairs.len()
    }

    /// `(p, q)`.
    pub fn domain_shape(&self) -> (usize, usize) {
        let (a, b) = &self.pairs[0];
        (a.ncols(), b.nrows())
    }

    /// `(s, t)`.
    pub fn codomain_shape(&self) -> (usize, usize) {
        let (a, b) = &self.pairs[0];
        (a.nrows(), b.ncols())
    }

    pub fn is_square(&self) -> bool {
        self.domain_shape() == self.codomain_shape()
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.shape() != self.domain_shape() {
            return Err(mismatch(format!(
                "operator domain {:?}, argument {:?}",
                self.domain_shape(),
                x.shape()
            )));
        }
        let (s, t) = self.codomain_shape();
        Ok(self
            .pairs
            .iter()
            .fold(Matrix::zeros(s, t), |acc, (a, b)| acc + a * x * b))
    }

    /// `⟦α,β⟧† = ⟦αᵀ,βᵀ⟧`, pairwise.
    pub fn adjoint(&self) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|(a, b)| (a.transpose(), b.transpose()))
                .collect(),
        }
    }

    /// `(𝔒 + 𝔒†)/2` for an operator on a single matrix space.
    ///
    /// Each pair splits as `⟦Sα,Sβ⟧ + ⟦Aα,Aβ⟧ + (mixed terms)`, and the mixed
    /// terms are anti-self-adjoint, so the result keeps only certified pairs.
    /// Pairs whose symmetric or antisymmetric part vanishes are dropped.
    pub fn self_adjoint_part(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(mismatch("self-adjoint part needs equal domain and codomain"));
        }
        let mut pairs = Vec::with_capacity(2 * self.pairs.len());
        for (a, b) in &self.pairs {
            let (sa, sb) = (symmetrize(a), symmetrize(b));
            let (aa, ab) = (antisymmetrize(a), antisymmetrize(b));
            if sa.norm() > 0.0 && sb.norm() > 0.0 {
                pairs.push((sa, sb));
            }
            if aa.norm() > 0.0 && ab.norm() > 0.0 {
                pairs.push((aa, ab));
            }
        }
        if pairs.is_empty() {
            let (p, q) = self.domain_shape();
            pairs.push((Matrix::zeros(p, p), Matrix::zeros(q, q)));
        }
        Ok(Self { pairs })
    }

    /// `γ = Σ βₖᵀ ⊗ αₖ`, so that `vec(𝔒(X)) = γ vec(X)`.
    pub fn to_matrix(&self) -> Matrix {
        let (s, t) = self.codomain_shape();
        let (p, q) = self.domain_shape();
        self.pairs
            .iter()
            .fold(Matrix::zeros(s * t, p * q), |acc, (a, b)| {
                acc + kron(&b.transpose(), a)
            })
    }

    pub fn certificate(&self, tol: f64) -> SelfAdjointCertificate {
        let per_pair_kind: Vec<PairKind> = self
            .pairs
            .iter()
            .map(|(a, b)| {
                if !a.is_square() || !b.is_square() {
                    return PairKind::Neither;
                }
                let sym = |m: &Matrix| (m - m.transpose()).norm() <= tol * (1.0 + m.norm());
                let anti = |m: &Matrix| (m + m.transpose()).norm() <= tol * (1.0 + m.norm());
                if sym(a) && sym(b) {
                    PairKind::BothSymmetric
                } else if anti(a) && anti(b) {
                    PairKind::BothAntisymmetric
                } else {
                    PairKind::Neither
                }
            })
            .collect();
        SelfAdjointCertificate {
            is_self_adjoint: self.is_square() && per_pair_kind.iter().all(|k| *k != PairKind::Neither),
            per_pair_kind,
        }
    }

    /// Spectrum of the matricization. For certified self-adjoint operators the
    /// symmetric part of `γ` is diagonalized; otherwise the real parts of the
    /// eigenvalues of `γ` are reported.
    pub fn definiteness(&self) -> Definiteness {
        let certificate = self.certificate(DEFAULT_TOL);
        let gamma = self.to_matrix();
        let mut eigenvalues: Vec<f64> = if certificate.is_self_adjoint {
            symmetrize(&gamma).symmetric_eigenvalues().iter().copied().collect()
        } else {
            gamma.complex_eigenvalues().iter().map(|z| z.re).collect()
        };
        eigenvalues.sort_by(f64::total_cmp);
        Definiteness {
            certificate,
            eigenvalues,
        }
    }

    /// Solves `𝔒(X) = Y` through `γ`.
    pub fn solve(&self, y: &Matrix, mode: SolveMode) -> Result<Matrix> {
        if !self.is_square() {
            return Err(mismatch("only operators with equal domain and codomain can be inverted"));
        }
        if y.shape() != self.codomain_shape() {
            return Err(mismatch(format!(
                "right-hand side {:?} against codomain {:?}",
                y.shape(),
                self.codomain_shape()
            )));
        }
        let (p, q) = self.domain_shape();
        let gamma = self.to_matrix();
        let rhs = vectorize(y);
        let svd = gamma.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let x: DVector<f64> = match mode {
            SolveMode::Exact => {
                let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
                if !(condition <= SINGULAR_CONDITION) {
                    return Err(Error::SingularOperator { condition });
                }
                gamma
                    .lu()
                    .solve(&rhs)
                    .ok_or(Error::SingularOperator { condition })?
            }
            SolveMode::Pseudo => {
                if smax == 0.0 {
                    DVector::zeros(p * q)
                } else {
                    svd.solve(&rhs, PSEUDO_THRESHOLD * smax)
                        .map_err(|e| Error::Precondition(e.to_string()))?
                }
            }
        };
        devectorize(&x, p, q)
    }

    /// Condition estimate `σ_max/σ_min` of `γ`.
    pub fn condition(&self) -> f64 {
        let sv = self.to_matrix().singular_values();
        let smin = sv.min();
        if smin > 0.0 {
            sv.max() / smin
        } else {
            f64::INFINITY
        }
    }
}
