//! Regularized Wasserstein distributionally robust optimization on grids.
//!
//! The worst-case expectation `sup { E_Q f : W_c(P, Q) <= rho }` is solved
//! through its one-dimensional dual in the multiplier `lambda`. Three
//! regularizations are provided: a cost penalty ([`dual`]), a KL penalty
//! relative to a Gaussian-like reference coupling ([`entropic`]) and general
//! phi-divergence penalties ([`phi`]). [`approx`] measures how far the
//! regularized values sit from the unregularized one.
//!
//! All measures live on a shared regular [`Grid`]; couplings are dense
//! row-major `n x n` matrices.

pub mod approx;
pub mod cost;
pub mod dual;
pub mod entropic;
pub mod error;
pub mod instances;
pub mod lp;
pub mod measures;
pub mod objective;
pub mod ot;
mod par;
pub mod phi;
pub mod scalar;
pub mod softmax;

pub use cost::{build_reference, calibrate_sigma, CostSpec, Norm, ReferenceCoupling};
pub use dual::{solve_cost_reg, DualSolution, ProblemSpec};
pub use entropic::{solve_entropic, EntropicSolution, RegParams};
pub use error::{Result, WdroError};
pub use measures::{Coupling, DiscreteMeasure, Grid};
pub use objective::Objective;
pub use phi::{solve_phi_dual, PhiSpec};
