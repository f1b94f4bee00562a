//! Matrix algebra shared by every other module: canonical CCR matrices,
//! subspace projections, the Frobenius inner product, Kronecker products and
//! column-stacking vectorization, matrix exponentials and symplectic matrices.
//!
//! Matrices are dense `nalgebra::DMatrix<f64>` values. All structural
//! tolerances are relative: a residual passes when it is at most
//! `tol * (1 + ‖operand‖_F)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{mismatch, Error, Result};
use crate::random::{random_symmetric, seeded_rng};

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

/// Default relative tolerance for structural checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Canonical antisymmetric matrix `I_μ ⊗ [[0, 1], [-1, 0]]` of order `2μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CcrMatrix {
    half_dim: usize,
    matrix: Matrix,
}

impl CcrMatrix {
    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn order(&self) -> usize {
        2 * self.half_dim
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

/// Builds `I_{half_dim} ⊗ 𝐉`.
///
/// Panics if `half_dim` is zero.
pub fn canonical_ccr(half_dim: usize) -> CcrMatrix {
    assert!(half_dim >= 1, "canonical_ccr requires half_dim >= 1");
    let order = 2 * half_dim;
    let mut matrix = Matrix::zeros(order, order);
    for k in 0..half_dim {
        matrix[(2 * k, 2 * k + 1)] = 1.0;
        matrix[(2 * k + 1, 2 * k)] = -1.0;
    }
    CcrMatrix { half_dim, matrix }
}

/// Target subspace of [`project`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Subspace {
    Symmetric,
    Antisymmetric,
    Hamiltonian,
    SkewHamiltonian,
}

/// `(N + Nᵀ)/2`.
pub fn symmetrize(n: &Matrix) -> Matrix {
    (n + n.transpose()) * 0.5
}

/// `(N − Nᵀ)/2`.
pub fn antisymmetrize(n: &Matrix) -> Matrix {
    (n - n.transpose()) * 0.5
}

/// Orthogonal projection onto Hamiltonian matrices, `(N + J₀NᵀJ₀)/2`.
///
/// Panics on shape mismatch; use [`project`] for a checked version.
pub fn hamiltonian_part(n: &Matrix, j0: &CcrMatrix) -> Matrix {
    let j = j0.matrix();
    (n + j * n.transpose() * j) * 0.5
}

/// Complement of [`hamiltonian_part`], `N − 𝐇(N) = (N − J₀NᵀJ₀)/2`.
pub fn skew_hamiltonian_part(n: &Matrix, j0: &CcrMatrix) -> Matrix {
    n - hamiltonian_part(n, j0)
}

/// Orthogonal projection of a square matrix onto one of the four structured
/// subspaces. The Hamiltonian variants require `j0` of matching order.
pub fn project(n: &Matrix, subspace: Subspace, j0: Option<&CcrMatrix>) -> Result<Matrix> {
    if !n.is_square() {
        return Err(mismatch(format!(
            "projection needs a square matrix, got {}x{}",
            n.nrows(),
            n.ncols()
        )));
    }
    match subspace {
        Subspace::Symmetric => Ok(symmetrize(n)),
        Subspace::Antisymmetric => Ok(antisymmetrize(n)),
        Subspace::Hamiltonian | Subspace::SkewHamiltonian => {
            let j0 = j0.ok_or_else(|| {
                Error::Precondition("Hamiltonian projections need a CCR matrix".into())
            })?;
            if j0.order() != n.nrows() {
                return Err(mismatch(format!(
                    "matrix of order {} against CCR matrix of order {}",
                    n.nrows(),
                    j0.order()
                )));
            }
            Ok(if subspace == Subspace::Hamiltonian {
                hamiltonian_part(n, j0)
            } else {
                skew_hamiltonian_part(n, j0)
            })
        }
    }
}

/// Frobenius inner product `Tr(XᵀY)`.
pub fn frobenius(x: &Matrix, y: &Matrix) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(mismatch(format!(
            "frobenius of {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(x.dot(y))
}

/// Kronecker product `A ⊗ B`, so that `vec(αXβ) = (βᵀ ⊗ α) vec(X)`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vectorize(x: &Matrix) -> DVector<f64> {
    // nalgebra storage is column-major, which is exactly column stacking
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &DVector<f64>, rows: usize, cols: usize) -> Result<Matrix> {
    if v.len() != rows * cols {
        return Err(Error::LengthMismatch {
            expected: rows * cols,
            actual: v.len(),
        });
    }
    Ok(Matrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Matrix exponential (Padé approximation with scaling and squaring).
pub fn matrix_exp(n: &Matrix) -> Result<Matrix> {
    if !n.is_square() {
        return Err(mismatch("matrix exponential of a non-square matrix"));
    }
    Ok(n.exp())
}

/// Seeded symplectic matrix `exp(J₀R)` with `R` symmetric, entries of `R`
/// uniform in `[-scale, scale]`.
pub fn random_symplectic(seed: u64, order: usize, scale: f64) -> Result<Matrix> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::InvalidDimensions(format!(
            "symplectic matrices need a positive even order, got {order}"
        )));
    }
    let j0 = canonical_ccr(order / 2);
    let mut rng = seeded_rng(seed);
    let r = random_symmetric(&mut rng, order, 1.0) * scale;
    matrix_exp(&(j0.matrix() * r))
}

/// A seeded random Hamiltonian matrix `J₀R`.
pub fn random_hamiltonian<R: Rng>(rng: &mut R, j0: &CcrMatrix, scale: f64) -> Matrix {
    j0.matrix() * random_symmetric(rng, j0.order(), scale)
}

/// Structural flags reported by [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Classification {
    pub symmetric: bool,
    pub antisymmetric: bool,
    pub hamiltonian: bool,
    pub skew_hamiltonian: bool,
    pub symplectic: bool,
}

/// Tests each defining identity against `tol * (1 + ‖N‖_F)`.
pub fn classify(n: &Matrix, j0: &CcrMatrix, tol: f64) -> Result<Classification> {
    if !n.is_square() || n.nrows() != j0.order() {
        return Err(mismatch(format!(
            "classify needs a square matrix of order {}",
            j0.order()
        )));
    }
    let j = j0.matrix();
    let nt = n.transpose();
    let bound = tol * (1.0 + n.norm());
    Ok(Classification {
        symmetric: (n - &nt).norm() <= bound,
        antisymmetric: (n + &nt).norm() <= bound,
        hamiltonian: (n * j + j * &nt).norm() <= bound,
        skew_hamiltonian: (n * j - j * &nt).norm() <= bound,
        symplectic: (n * j * &nt - j).norm() <= bound,
    })
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of the Hermitian matrix `re + i·im`, computed through
/// the real symmetric embedding `[[re, −im], [im, re]]`.
pub fn hermitian_min_eigenvalue(re: &Matrix, im: &Matrix) -> Result<f64> {
    if !re.is_square() || re.shape() != im.shape() {
        return Err(mismatch("hermitian parts must be square and of equal shape"));
    }
    let n = re.nrows();
    let mut embed = Matrix::zeros(2 * n, 2 * n);
    embed.view_mut((0, 0), (n, n)).copy_from(re);
    embed.view_mut((n, n), (n, n)).copy_from(re);
    embed.view_mut((0, n), (n, n)).copy_from(&(-im));
    embed.view_mut((n, 0), (n, n)).copy_from(im);
    Ok(symmetric_eigenvalues(&embed)[0])
}

/// Extracts the `(row, col)` block of size `rows × cols`.
pub fn block(m: &Matrix, row: usize, col: usize, rows: usize, cols: usize) -> Matrix {
    m.view((row, col), (rows, cols)).into_owned()
}

/// Assembles a 2×2 block matrix.
pub fn block2(m11: &Matrix, m12: &Matrix, m21: &Matrix, m22: &Matrix) -> Matrix {
    let (r1, c1) = m11.shape();
    let (r2, c2) = m22.shape();
    debug_assert_eq!(m12.shape(), (r1, c2));
    debug_assert_eq!(m21.shape(), (r2, c1));
    let mut out = Matrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(m11);
    out.view_mut((0, c1), (r1, c2)).copy_from(m12);
    out.view_mut((r1, 0), (r2, c1)).copy_from(m21);
    out.view_mut((r1, c1), (r2, c2)).copy_from(m22);
    out
}

pub(crate) fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_antisymmetric, random_matrix};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn canonical_ccr_blocks() {
        let j = canonical_ccr(1);
        assert_eq!(j.matrix(), &mat(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        let j2 = canonical_ccr(2);
        let expected = mat(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                -1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, -1.0, 0.0,
            ],
        );
        assert_eq!(j2.matrix(), &expected);
        for mu in 1..5 {
            let j = canonical_ccr(mu);
            let m = j.matrix();
            assert_eq!(m + m.transpose(), Matrix::zeros(2 * mu, 2 * mu));
            assert!((m * m + Matrix::identity(2 * mu, 2 * mu)).norm() < 1e-15);
        }
    }

    #[test]
    fn projection_examples() {
        let j = canonical_ccr(1);
        let i2 = Matrix::identity(2, 2);
        let h = project(&i2, Subspace::Hamiltonian, Some(&j)).unwrap();
        assert_eq!(h, Matrix::zeros(2, 2));
        let hj = project(j.matrix(), Subspace::Hamiltonian, Some(&j)).unwrap();
        assert_eq!(&hj, j.matrix());
        let s = project(&mat(2, 2, &[0.0, 2.0, 0.0, 0.0]), Subspace::Symmetric, None).unwrap();
        assert_eq!(s, mat(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn projection_errors() {
        let j = canonical_ccr(1);
        assert!(project(&Matrix::zeros(2, 3), Subspace::Symmetric, None).is_err());
        assert!(project(&Matrix::zeros(4, 4), Subspace::Hamiltonian, Some(&j)).is_err());
        assert!(project(&Matrix::zeros(2, 2), Subspace::SkewHamiltonian, None).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let j = canonical_ccr(1);
        let i2 = Matrix::identity(2, 2);
        assert_eq!(frobenius(&i2, &i2).unwrap(), 2.0);
        assert_eq!(frobenius(j.matrix(), j.matrix()).unwrap(), 2.0);
        let mut rng = seeded_rng(3);
        let z = random_symmetric(&mut rng, 4, 1.0);
        let w = random_antisymmetric(&mut rng, 4, 1.0);
        assert!(frobenius(&z, &w).unwrap().abs() < 1e-15);
        assert!(frobenius(&i2, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn kron_examples() {
        let i2 = Matrix::identity(2, 2);
        assert_eq!(kron(&i2, &i2), Matrix::identity(4, 4));
        let j = canonical_ccr(1);
        assert_eq!(&kron(j.matrix(), &Matrix::identity(1, 1)), j.matrix());
    }

    #[test]
    fn vectorize_examples() {
        let x = mat(2, 2, &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vectorize(&x).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vectorize(&Matrix::zeros(3, 2)), DVector::zeros(6));
        let mut rng = seeded_rng(5);
        let y = random_matrix(&mut rng, 3, 5, 1.0);
        assert_eq!(devectorize(&vectorize(&y), 3, 5).unwrap(), y);
        assert_eq!(
            devectorize(&DVector::zeros(5), 2, 3),
            Err(Error::LengthMismatch {
                expected: 6,
                actual: 5
            })
        );
    }

    #[test]
    fn matrix_exp_examples() {
        assert_eq!(matrix_exp(&Matrix::zeros(3, 3)).unwrap(), Matrix::identity(3, 3));
        let d = Matrix::from_diagonal(&DVector::from_vec(vec![2f64.ln(), 3f64.ln()]));
        let e = matrix_exp(&d).unwrap();
        assert_relative_eq!(e, mat(2, 2, &[2.0, 0.0, 0.0, 3.0]), epsilon = 1e-14);
        let mut rng = seeded_rng(11);
        for _ in 0..10 {
            let n = random_matrix(&mut rng, 4, 4, 1.0);
            let n = &n * (10.0 / n.norm());
            let (ep, em) = (matrix_exp(&n).unwrap(), matrix_exp(&(-&n)).unwrap());
            let residual = (&ep * &em - Matrix::identity(4, 4)).norm() / (ep.norm() * em.norm());
            assert!(residual < 1e-12, "residual {residual}");
        }
    }

    #[test]
    fn exp_of_hamiltonian_is_symplectic() {
        let j0 = canonical_ccr(2);
        let mut rng = seeded_rng(2);
        for _ in 0..10 {
            let tau = random_hamiltonian(&mut rng, &j0, 1.0);
            let sigma = matrix_exp(&(tau * 0.7)).unwrap();
            let res = (&sigma * j0.matrix() * sigma.transpose() - j0.matrix()).norm();
            assert!(res < 1e-10, "{res}");
        }
    }

    #[test]
    fn random_symplectic_properties() {
        assert_eq!(random_symplectic(1, 4, 0.0).unwrap(), Matrix::identity(4, 4));
        assert!(random_symplectic(1, 3, 1.0).is_err());
        let j0 = canonical_ccr(2);
        for seed in 0..20 {
            let s = random_symplectic(seed, 4, 0.5).unwrap();
            let res = (&s * j0.matrix() * s.transpose() - j0.matrix()).norm();
            assert!(res < 1e-10);
            assert!((s.determinant() - 1.0).abs() < 1e-8);
            assert!(classify(&s, &j0, 1e-10).unwrap().symplectic);
        }
        assert_eq!(random_symplectic(9, 4, 0.5), random_symplectic(9, 4, 0.5));
    }

    #[test]
    fn classify_examples() {
        let j = canonical_ccr(1);
        let c = classify(j.matrix(), &j, 1e-12).unwrap();
        assert!(c.hamiltonian && c.antisymmetric && !c.symmetric);
        let c = classify(&Matrix::identity(2, 2), &j, 1e-12).unwrap();
        assert!(c.skew_hamiltonian && c.symmetric && !c.hamiltonian);
    }

    #[test]
    fn hermitian_embedding() {
        let j0 = canonical_ccr(2);
        let min = hermitian_min_eigenvalue(&Matrix::identity(4, 4), &(j0.matrix() * 0.5)).unwrap();
        assert!((min - 0.5).abs() < 1e-14);
    }

    fn square_strategy(order: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-3.0f64..3.0, order * order)
            .prop_map(move |v| Matrix::from_vec(order, order, v))
    }

    proptest! {
        #[test]
        fn projections_are_idempotent(n in square_strategy(4)) {
            let j0 = canonical_ccr(2);
            for s in [Subspace::Symmetric, Subspace::Antisymmetric, Subspace::Hamiltonian, Subspace::SkewHamiltonian] {
                let once = project(&n, s, Some(&j0)).unwrap();
                let twice = project(&once, s, Some(&j0)).unwrap();
                prop_assert!((twice - &once).norm() <= 1e-14 * (1.0 + once.norm()));
            }
        }

        #[test]
        fn hamiltonian_decomposition_is_orthogonal(n in square_strategy(4)) {
            let j0 = canonical_ccr(2);
            let h = hamiltonian_part(&n, &j0);
            let k = skew_hamiltonian_part(&n, &j0);
            prop_assert!((&h + &k - &n).norm() <= 1e-15 * (1.0 + n.norm()));
            prop_assert!(frobenius(&h, &k).unwrap().abs() <= 1e-13 * (1.0 + n.norm_squared()));
        }

        #[test]
        fn kron_vectorization_identity(seed in 0u64..1000) {
            let mut rng = seeded_rng(seed);
            let alpha = random_matrix(&mut rng, 3, 2, 1.0);
            let x = random_matrix(&mut rng, 2, 4, 1.0);
            let beta = random_matrix(&mut rng, 4, 3, 1.0);
            let lhs = vectorize(&(&alpha * &x * &beta));
            let rhs = kron(&beta.transpose(), &alpha) * vectorize(&x);
            prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + alpha.norm() * x.norm() * beta.norm()));
        }
    }

    #[test]
    fn kron_identity_against_direct_expansion() {
        // entrywise expansion of αXβ, independent of nalgebra's kronecker
        let mut rng = seeded_rng(77);
        for _ in 0..20 {
            let alpha = random_matrix(&mut rng, 2, 2, 1.0);
            let x = random_matrix(&mut rng, 2, 2, 1.0);
            let beta = random_matrix(&mut rng, 2, 2, 1.0);
            let mut direct = Matrix::zeros(2, 2);
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            direct[(i, j)] += alpha[(i, k)] * x[(k, l)] * beta[(l, j)];
                        }
                    }
                }
            }
            let via_kron = kron(&beta.transpose(), &alpha) * vectorize(&x);
            assert!((vectorize(&direct) - via_kron).norm() < 1e-13);
        }
    }
}
