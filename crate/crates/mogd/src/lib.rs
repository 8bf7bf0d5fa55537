//! Surrogate-assisted multi-objective optimization for expensive black-box
//! problems with disconnected Pareto fronts.
//!
//! The optimization loop fits one Gaussian-process surrogate per objective,
//! searches the surrogate landscape with multiple-gradient descent (a common
//! descent direction from the minimum-norm point in the convex hull of the
//! per-objective mean gradients), and spends the expensive-evaluation budget
//! on the candidates with the largest individual hypervolume contribution.
//!
//! Module map:
//! - [`core`]: bounds, solutions, the evaluation archive, Pareto dominance,
//!   nondominated filtering, crowding-distance truncation.
//! - [`doe`]: Latin hypercube sampling.
//! - [`surrogate`]: GP regression (RBF kernel, log-marginal-likelihood fit,
//!   mean/variance prediction, analytic mean gradient).
//! - [`mgd`]: min-norm weights, the three-case direction rule, the bounded
//!   descent step, and the candidate-search loop.
//! - [`hv`]: exact 2-D hypervolume, per-point contributions, batch selection.
//! - [`problems`]: ZDT3 / DTLZ7 / WFG2 (two objectives) plus parametrized
//!   disconnection variants and true-front samplers.
//! - [`stats`]: Wilcoxon signed-rank, Vargha-Delaney A12, Scott-Knott ranks.
//! - [`runner`]: the full optimization loop, run persistence, and reports.

pub mod core;
pub mod doe;
pub mod hv;
pub mod mgd;
pub mod problems;
pub mod runner;
pub mod stats;
pub mod surrogate;

pub use crate::core::{Archive, Bounds, CandidateSet, Solution};
pub use crate::problems::Problem;
pub use crate::runner::{ExperimentConfig, RunRecord};
