//! Seeded two-mode benchmark scenarios.
//!
//! Each scenario couples a single-mode plant (`n = 2`) to a single-mode
//! controller through two-dimensional noise, output and cost channels. The
//! plant and controller start in a two-mode squeezed vacuum, which
//! correlates them from the outset.

use nalgebra::DVector;

use crate::bvp::Problem;
use crate::dynamics::TimeGrid;
use crate::error::Result;
use crate::foundations::{block2, Matrix};
use crate::model::{make_pr_plant, CostWeights, Dimensions};
use crate::random::{random_matrix, random_symmetric, seeded_rng};

/// Seeds of the acceptance scenario set.
pub const ACCEPTANCE_SEEDS: [u64; 5] = [1, 3, 4, 5, 9];

/// Parameters of the scenario family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioFamily {
    /// Two-mode squeezing parameter of `P0`.
    pub squeezing: f64,
    /// Margin added to the squeezed-vacuum covariance.
    pub covariance_margin: f64,
    pub g_scale: f64,
    pub f_scale: f64,
    /// Size of the controller-to-plant coupling `E`.
    pub e_scale: f64,
    /// Oscillator frequency in the plant Hamiltonian `R = ω·I + ΔR`.
    pub frequency: f64,
    /// Size of the random symmetric `ΔR`.
    pub hamiltonian_spread: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for ScenarioFamily {
    fn default() -> Self {
        Self {
            squeezing: 0.7,
            covariance_margin: 0.01,
            g_scale: 2.0,
            f_scale: 1.0,
            e_scale: 0.3,
            frequency: 1.0,
            hamiltonian_spread: 0.2,
            horizon: 1.0,
            steps: 200,
        }
    }
}

/// Covariance of a two-mode squeezed vacuum of the plant and controller
/// modes, `[[cI, sZ], [sZ, cI]]` with `c = cosh(2r)/2`, `s = sinh(2r)/2`.
pub fn two_mode_squeezed(squeezing: f64) -> Matrix {
    let c = (2.0 * squeezing).cosh() / 2.0;
    let s = (2.0 * squeezing).sinh() / 2.0;
    let i2 = Matrix::identity(2, 2);
    let z = Matrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
    block2(&(&i2 * c), &(&z * s), &(&z * s), &(&i2 * c))
}

impl ScenarioFamily {
    pub fn dims() -> Dimensions {
        Dimensions {
            n: 2,
            m1: 2,
            m2: 2,
            p1: 2,
            p2: 2,
            r: 2,
        }
    }

    /// The scenario drawn with `seed`.
    pub fn generate(&self, seed: u64) -> Result<Problem> {
        let dims = Self::dims();
        let ccr = dims.ccr();
        let mut rng = seeded_rng(seed);
        let i2 = Matrix::identity(2, 2);
        let d = &i2 + random_matrix(&mut rng, 2, 2, 0.2);
        let b = random_matrix(&mut rng, 2, 2, 1.0);
        let plant_d = &i2 + random_matrix(&mut rng, 2, 2, 0.2);
        let e = random_matrix(&mut rng, 2, 2, self.e_scale);
        let r = random_symmetric(&mut rng, 2, self.hamiltonian_spread) + &i2 * self.frequency;
        let plant = make_pr_plant(&b, &plant_d, &e, &d, ccr.j0.matrix(), &r, &dims)?;
        let f = &i2 * self.f_scale + random_matrix(&mut rng, 2, 2, 0.5 * self.f_scale);
        let g = &i2 * self.g_scale + random_matrix(&mut rng, 2, 2, 0.5 * self.g_scale);
        let p0 = two_mode_squeezed(self.squeezing) + Matrix::identity(4, 4) * self.covariance_margin;
        Problem::new(
            dims,
            plant,
            d,
            CostWeights { f, g },
            p0,
            TimeGrid::new(self.horizon, self.steps)?,
        )
    }
}

/// Member `seed` of the default family.
pub fn scenario(seed: u64) -> Result<Problem> {
    ScenarioFamily::default().generate(seed)
}

/// The acceptance scenario set.
pub fn acceptance_set() -> Result<Vec<Problem>> {
    ACCEPTANCE_SEEDS.iter().map(|&s| scenario(s)).collect()
}
