//! Phonon dynamics in one-dimensional arrays of optically bound, levitated
//! nanospheres.
//!
//! The crate goes from dipole binding forces ([`optical_binding`]) to a
//! rotating-wave hopping model ([`lattice`]), evolves the correlation matrix
//! of the open lattice ([`dynamics`]), extracts prethermalization observables
//! ([`thermo`]) and computes nonreciprocal scattering off a gain-loss pair
//! ([`scattering`]).
//!
//! The dimensionless modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

pub mod config;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lattice;
pub mod optical_binding;
pub mod scalar;
pub mod scattering;
pub mod thermo;

pub use error::{Error, Result};
pub use scalar::{Complex, Real};

pub type CouplingModel = lattice::CouplingModel<f64>;
pub type CorrelationState = lattice::CorrelationState<f64>;
pub type DissipationSpec = lattice::DissipationSpec<f64>;
pub type EvolutionSettings = dynamics::EvolutionSettings<f64>;
pub type TrajectorySample = dynamics::TrajectorySample<f64>;
pub type SpectralPropagator = dynamics::SpectralPropagator<f64>;
pub type AsymmetrySeries = thermo::AsymmetrySeries<f64>;
pub type GgePrediction = thermo::GgePrediction<f64>;
pub type ScatteringSolution = scattering::ScatteringSolution<f64>;
pub type AsymmetryMap = scattering::AsymmetryMap<f64>;
