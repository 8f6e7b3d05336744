//! Controllability Gramians and energy-constrained actuator selection for
//! linear network systems.
//!
//! Given network dynamics `dx/dt = A x + B u` where `B = diag(δ)` selects a
//! subset Δ of nodes as actuators, this crate computes per-node controllability
//! Gramians, evaluates the average-energy metric `tr((W_Δ + εI)^{-1})`, and
//! solves two placement problems with supermodular greedy algorithms wrapped in
//! bisection schemes:
//!
//! * **minimal actuators**: fewest nodes such that `tr(W_Δ^{-1}) ≤ (1+c)·E`;
//! * **budgeted energy**: at most `r` nodes minimizing `tr(W_Δ^{-1})` up to the
//!   same `(1+c)` certification factor.
//!
//! Both come with a logarithmic approximation certificate (the greedy bound
//! `F`) and per-run controllability certificates. Module layout:
//!
//! * [`linalg`] — dense kernels: matrix exponential, Lyapunov solvers, robust
//!   trace-of-perturbed-inverse evaluation.
//! * [`system`] — systems, actuator sets, per-node Gramians, energy metrics.
//! * [`placement`] — greedy + bisection placement algorithms and certificates.
//! * [`baselines`] — brute-force oracles and the naive budgeted greedy.
//! * [`instances`] — chain, Erdős–Rényi, and hitting-set benchmark families.
//! * [`io`] — JSON schemas for systems, Gramian caches, and run records.

pub mod baselines;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod placement;
pub mod system;

pub use baselines::{BaselineError, OracleResult};
pub use instances::InstanceError;
pub use io::{InstanceDescriptor, IoError, RunRecord};
pub use linalg::{LinalgError, PsdMatrix};
pub use placement::{PlacementError, PlacementResult};
pub use system::{ActuatorSet, Horizon, LinearSystem, NodeGramianSet, SystemError};


