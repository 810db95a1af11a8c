//! Spin-1/2 wave packets crossing a Stern-Gerlach field gradient.
//!
//! The crate covers the classical spin ensemble, the closed-form
//! path-integral propagator and the entangled spinor Gaussian it produces,
//! z-resolved density matrices, the disentangled mean-field ansatz, a
//! split-step Fourier grid propagator used as an independent check, and a
//! set of experiments built on top (collapse-point backtracking, beam
//! recombination, multilayer splitting).
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.
//!
//! Sign convention: the moment is `mu = -mu_b sigma`, so the spin-up
//! component ([`Branch::Plus`]) sees the potential `+mu_b B' z` inside the
//! field and deflects toward `-z`.

// `!(a > b)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod classical;
pub mod density;
pub mod error;
pub mod experiments;
pub mod histogram;
pub mod io;
pub mod meanfield;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod scalar;

pub use error::{Error, Result};
pub use model::{derive_timing, kick_velocity, Branch};
pub use scalar::{Cplx, Real};

pub type UnitSystem = model::UnitSystem<f64>;
pub type Apparatus = model::Apparatus<f64>;
pub type GaussianPacket = model::GaussianPacket<f64>;
pub type Timing = model::Timing<f64>;
pub type BinSpec = histogram::BinSpec<f64>;
pub type Histogram = histogram::Histogram<f64>;
pub type ClassicalState = classical::ClassicalState<f64>;
pub type SpinorField = analytic::SpinorField<f64>;
pub type ZKernelParams = analytic::ZKernelParams<f64>;
pub type DensityMatrixZ = density::DensityMatrixZ<f64>;
pub type MeanFieldState = meanfield::MeanFieldState<f64>;
pub type Grid1D = oracle::Grid1D<f64>;
pub type GridState = oracle::GridState<f64>;
pub type OracleReport = oracle::OracleReport<f64>;
pub type CollapseReport = experiments::CollapseReport<f64>;
pub type LayerStack = experiments::LayerStack<f64>;
pub type SandwichReport = experiments::SandwichReport<f64>;
pub type BimodalityReport = experiments::BimodalityReport<f64>;
