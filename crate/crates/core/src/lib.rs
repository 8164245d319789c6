//! Finite-horizon density steering for Gaussian mixtures over discrete-time
//! linear systems.
//!
//! The pipeline: build the lifted block matrices of an LTV system, solve the
//! pairwise Gaussian mean/covariance steering problems in closed form, fill
//! the r × t cost matrix, solve a transportation LP for the mixing weights,
//! and assemble a randomized state-feedback policy whose terminal state
//! distribution is the desired Gaussian mixture. Monte-Carlo simulation
//! validates the synthesized policy empirically.

pub mod error;
pub mod gmm;
pub mod io;
pub mod linalg;
pub mod policy;
pub mod sim;
pub mod steering;
pub mod system;
pub mod transport;

pub use error::{Result, SteeringError};
pub use gmm::{em_fit, em_fit_with_trace, log_likelihood, Gaussian, Gmm};
pub use policy::{synthesize, GmmPolicy, SteeringLaw, Synthesis};
pub use sim::{evaluate_cost, mc_report_from_trajectories, monte_carlo, rollout, McReport, Trajectory};
pub use steering::{pair_cost, solve_cov, solve_mean, CovSteeringSolution, MeanSteeringSolution};
pub use system::{null_basis, LiftedMatrices, LtvSystem, QuadraticCost};
pub use transport::{mixing_weights, solve_transport, TransportPlan};
