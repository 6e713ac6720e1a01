//! Numerical Riesz potential theory on point clouds.
//!
//! Continuum sets are replaced by node clouds with per-node spacing
//! ([`geometry`]), the Riesz kernel gets a spacing-scaled diagonal
//! ([`kernel`]), and every projection in the energy metric becomes a
//! nonnegative quadratic program ([`nnqp`]). On top of this sit inner
//! balayage ([`balayage`]), equilibrium measures and capacities
//! ([`equilibrium`]), Kelvin transforms ([`kelvin`]) and shell-capacity
//! series ([`wiener`]). The [`cli`] module drives experiments from JSON
//! configs.

pub mod balayage;
pub mod cli;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod geometry;
pub mod kelvin;
pub mod kernel;
pub mod nnqp;
pub mod report;
pub mod wiener;

pub use error::{Error, Result};
pub use geometry::{NodeTag, Point, PointCloud, Profile, RefinementLadder, RotationBodySpec};
pub use kernel::{DiscreteMeasure, KernelModel, RieszParams};
pub use nnqp::SolverSettings;

/// Kernel and solver settings shared by every operation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Setup {
    pub model: KernelModel,
    pub solver: SolverSettings,
}

impl Setup {
    pub fn new(model: KernelModel, solver: SolverSettings) -> Result<Self> {
        solver.validate()?;
        Ok(Setup { model, solver })
    }

    /// Newtonian kernel in R^3, β = 0.5, default solver settings.
    pub fn newtonian() -> Self {
        Setup { model: KernelModel::newtonian(), solver: SolverSettings::default() }
    }

    /// Riesz kernel of order `alpha` in R^n with β = 0.5.
    pub fn riesz(n: usize, alpha: f64) -> Result<Self> {
        Ok(Setup { model: KernelModel::new(RieszParams::new(n, alpha)?, kernel::DEFAULT_BETA)?, solver: SolverSettings::default() })
    }

    pub fn tol(&self) -> f64 {
        self.solver.tol
    }
}
