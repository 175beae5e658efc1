//! Large-system analysis of multi-cell zero-forcing beamforming with
//! cooperation clusters, plus a finite-dimensional Monte Carlo engine to
//! check the asymptotic formulas.
//!
//! The usual pipeline is: build a [`geometry::NetworkLayout`], reduce one
//! cluster to a [`geometry::ClusterProblem`], then solve the asymptotic gains
//! ([`asymptotic`]), allocate power ([`allocation`]) and optimize user
//! fractions ([`scheduler`]).

pub mod acceptance;
pub mod allocation;
pub mod asymptotic;
pub mod csit;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod montecarlo;
pub mod reference;
pub mod scheduler;

pub use error::{Error, Result};
