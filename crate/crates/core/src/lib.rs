//! Pareto-optimal transmit beamforming for the K-user MISO interference
//! channel with interference treated as noise.
//!
//! The rate region is parametrized by interference-temperature (IT) levels
//! `Γ_kj`, the interference power base station `k` is allowed to cause at
//! mobile station `j`. For a fixed IT vector every base station solves its own
//! IT-constrained rate maximization ([`cr_solver::solve_cr`]); pairs of base
//! stations then trade IT levels until no pair can improve both of its rates
//! ([`decentralized::run`]).
//!
//! Modules:
//! - [`model`]: network description, rates, SINR, MRT/ZF baselines.
//! - [`cr_solver`]: closed-form inner solution and ellipsoid dual search.
//! - [`pareto`]: IT extraction, sensitivity matrices, 2-user boundary sweeps.
//! - [`decentralized`]: the pairwise IT-update protocol simulator.
//! - [`oracle`]: brute-force ground truth for small instances.
//! - [`random`]: the portable seeded channel generator.

pub mod cr_solver;
pub mod decentralized;
mod error;
mod linalg;
pub mod model;
pub mod oracle;
pub mod pareto;
pub mod random;

pub use error::{Error, Result};
pub use model::{NetworkInstance, RateTuple, TransmitState};

/// Complex scalar used for channels and beamformers.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
