//! Spectral numerics for forced time-periodic solutions of Hamiltonian PDEs
//! on the circle with smoothing (convolution-regularized) nonlinearities.
//!
//! The crate is organized around the complexified coefficient picture: the
//! state is a sequence û(n) on which the quadratic part acts diagonally with
//! eigenvalues a·n^d and the nonlinear part acts through collocation grids.
//! On top of that sit a continued-fraction engine quantifying how resonant
//! the chosen periods are, a harmonic-balance solver for twisted-periodic
//! orbits, and a mode-wise boundary-value solver for connecting curves.

pub mod bigreal;
pub mod diophantine;
pub mod dynamics;
pub mod error;
pub mod floer;
pub mod grid;
pub mod nonlinearity;
pub mod params;
pub mod periodic;
pub mod report;
pub mod spectral;
pub mod util;

pub use error::{Error, Result};
pub use params::{EquationKind, ModelParams, RatioSpec};
pub use spectral::{Gauge, Params, SpaceTimeField, SpectralField};
