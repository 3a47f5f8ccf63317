//! Numerical laboratory for the constant-step subgradient method on locally
//! Lipschitz functions.
//!
//! - [`catalog`]: test functions with exact values and Clarke subdifferentials
//! - [`engine`]: discrete iterates x_{k+1} = x_k − α s_k and their interpolation
//! - [`flow`]: subgradient flow x' ∈ −∂f(x), energy identity, discrete/continuous deviation
//! - [`prober`]: empirical discrete Lyapunov stability probes and convex bounds
//! - [`counterexample`]: the unstable non-strict minimum of |x₁|^{3/2}|x₂|^{3/2}
//! - [`report`]: byte-deterministic CSV/JSON output

pub mod catalog;
pub mod counterexample;
pub mod engine;
pub mod error;
pub mod flow;
pub mod min_norm;
pub mod prober;
pub mod report;
pub mod rng;
pub mod vector;

pub use catalog::{list_catalog, CatalogFunction, FunctionId, SubdifferentialSet};
pub use engine::{run, step, Ball, InterpolatedPath, RunOptions, SelectionPolicy, Trajectory};
pub use error::{Error, Result};
pub use flow::{integrate_flow, FlowSolution};
pub use vector::Vector;
