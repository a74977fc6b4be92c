//! Multi-area DC power-system state estimation.
//!
//! The crate models a DC (linear) state-estimation problem over a bus/branch
//! network and solves it four ways in a simulated multi-area setting:
//!
//! - [`splitting`]: Jacobi-like matrix-splitting fixed-point iteration,
//! - [`gossip`]: randomized pairwise gradient iteration,
//! - [`decomposition`]: per-area penalty-coupled local least squares,
//! - [`admm`]: consensus ADMM over shared boundary states.
//!
//! All four converge to the centralized weighted-least-squares solution of
//! [`wls`]. Runs are driven by the [`governor`], which implements a global
//! stopping rule plus optional per-state freezing that suppresses further
//! transmission of converged states. [`partitioner`] optimizes the bus-to-area
//! assignment under a cut-cost objective, and [`baddata`] performs a
//! chi-square sensitivity sweep over single-measurement perturbations.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the CLI
//! live in the companion `dse-cli` crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod admm;
pub mod baddata;
pub mod chi2;
pub mod clock;
pub mod decomposition;
pub mod error;
pub mod gossip;
pub mod governor;
pub mod network;
pub mod partitioner;
pub mod runner;
pub mod spectral;
pub mod splitting;
pub mod wls;

pub use clock::{Clock, NullClock};
pub use error::Error;
pub use governor::{GovernorConfig, Mode, SolverTrace};
pub use network::{
    AreaView, Branch, Bus, Measurement, MeasurementConfig, MeasurementKind, MeasurementModel,
    Network, Partition, StateVector,
};
pub use runner::{Method, SolverParams};
