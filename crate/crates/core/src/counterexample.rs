//! Checks for the instability of the non-strict minimum (1, 0) of
//! f(x₁, x₂) = |x₁|^{3/2}|x₂|^{3/2}.
//!
//! Off the axes S = {x₁x₂ = 0} the subgradient step has the closed form
//!
//! ```text
//! x₁⁺ = x₁ − (3/2)·α·|x₁|^{1/2}|x₂|^{3/2}·sign(x₁)
//! x₂⁺ = x₂ − (3/2)·α·|x₁|^{3/2}|x₂|^{1/2}·sign(x₂)
//! ```
//!
//! While x₁ ≥ ½ and 0 < |x₂| ≤ α²/32 one step at least doubles |x₂|, so x₂
//! cannot settle at 0 and the x₁ decrements sum to infinity: every off-S start
//! eventually leaves B((1,0), ε) for ε ≤ ½.

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{CatalogFunction, FunctionId};
use crate::engine::{run_summary, Ball, RunOptions, SelectionPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::rng::{sample_ball, stream_rng};
use crate::vector::Vector;

pub const DEFAULT_STEP_SIZES: [f64; 4] = [0.01, 0.05, 0.1, 0.3];
pub const DEFAULT_K_MAX: usize = 100_000;

pub fn cross_function() -> CatalogFunction {
    CatalogFunction::new(FunctionId::Cross, 2).expect("cross is 2-D")
}

fn on_null_set(x: &Vector) -> bool {
    x[0] == 0.0 || x[1] == 0.0
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// The explicit off-S update.
pub fn cross_update(x: &Vector, alpha: f64) -> Result<Vector> {
    x.ensure_dim(2)?;
    x.ensure_finite()?;
    if on_null_set(x) {
        return Err(Error::OnNullSet([x[0], x[1]]));
    }
    let (x1, x2) = (x[0], x[1]);
    let (a1, a2) = (x1.abs(), x2.abs());
    let (r1, r2) = (a1.sqrt(), a2.sqrt());
    Ok(Vector::from([
        x1 - alpha * (1.5 * r1 * (a2 * r2) * sign(x1)),
        x2 - alpha * (1.5 * (a1 * r1) * r2 * sign(x2)),
    ]))
}

/// Whether one update from `x` at least doubles |x₂|, for x₁ ≥ ½ and
/// 0 < |x₂| ≤ α²/32.
pub fn doubling_check(x: &Vector, alpha: f64) -> Result<bool> {
    x.ensure_dim(2)?;
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::PreconditionViolated("alpha must be positive".into()));
    }
    let (x1, x2) = (x[0], x[1]);
    if x1.is_nan() || x1 < 0.5 {
        return Err(Error::PreconditionViolated(format!("x1 = {x1} < 1/2")));
    }
    if !(x2 != 0.0 && x2.abs() <= alpha * alpha / 32.0) {
        return Err(Error::PreconditionViolated(format!(
            "need 0 < |x2| <= alpha^2/32, got |x2| = {}",
            x2.abs()
        )));
    }
    let next = cross_update(x, alpha)?;
    Ok(next[1].abs() >= 2.0 * x2.abs())
}

/// x₁ strictly decreasing along a cross trajectory that stays off S with x₁ > 0.
pub fn monotone_drift_check(traj: &Trajectory) -> Result<bool> {
    if traj.fn_id() != FunctionId::Cross {
        return Err(Error::PreconditionViolated(format!(
            "trajectory is on `{}`, not cross",
            traj.fn_id()
        )));
    }
    if let Some(p) = traj.points.iter().find(|p| on_null_set(p)) {
        return Err(Error::PreconditionViolated(format!(
            "iterate {p:?} lies on S"
        )));
    }
    if let Some(p) = traj.points.iter().find(|p| p[0] <= 0.0) {
        return Err(Error::PreconditionViolated(format!(
            "iterate {p:?} has x1 <= 0"
        )));
    }
    Ok(traj.points.windows(2).all(|w| w[1][0] < w[0][0]))
}

#[derive(Debug, Clone)]
pub struct EscapeConfig {
    /// In (0, ½].
    pub epsilon: f64,
    pub alpha: f64,
    pub samples: usize,
    pub k_max: usize,
    pub seed: u64,
    /// Replaces the ball sampler when set (`samples` is then ignored).
    pub initial_points: Option<Vec<Vector>>,
}

impl EscapeConfig {
    pub fn new(epsilon: f64, alpha: f64, samples: usize, k_max: usize, seed: u64) -> Self {
        Self {
            epsilon,
            alpha,
            samples,
            k_max,
            seed,
            initial_points: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub x0: Vector,
    pub on_null_set: bool,
    pub exit_index: Option<usize>,
    /// Some later iterate landed exactly on S.
    pub hit_null_set: bool,
    /// Every step taken from x₁ ≥ ½, 0 < |x₂| ≤ α²/32 at least doubled |x₂|.
    pub doubling_held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeStats {
    pub epsilon: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    #[serde(rename = "K_max")]
    pub k_max: usize,
    pub seed: u64,
    pub escaped_count: usize,
    #[serde(rename = "stuck_on_S_count")]
    pub stuck_on_s_count: usize,
    pub max_exit_index: Option<usize>,
    /// Off-S starts that stayed inside for all K_max steps; surfaced, not discarded.
    pub non_escaping: Vec<usize>,
    #[serde(skip)]
    pub outcomes: Vec<SampleOutcome>,
}

impl EscapeStats {
    pub fn off_s_count(&self) -> usize {
        self.samples - self.stuck_on_s_count
    }
}

pub fn escape_experiment(cfg: &EscapeConfig) -> Result<EscapeStats> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1/2], got {}",
            cfg.epsilon
        )));
    }
    if cfg.k_max == 0 {
        return Err(Error::InvalidParameter("K_max must be >= 1".into()));
    }
    let center = Vector::from([1.0, 0.0]);
    let ball = Ball::new(center.clone(), cfg.epsilon)?;
    let starts: Vec<Vector> = match &cfg.initial_points {
        Some(points) => points.clone(),
        None => (0..cfg.samples)
            .map(|i| sample_ball(&mut stream_rng(cfg.seed, i as u64), &center, cfg.epsilon))
            .collect(),
    };
    if starts.is_empty() {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let f = cross_function();
    let alpha = cfg.alpha;
    let small = alpha * alpha / 32.0;

    let outcomes: Vec<SampleOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map(|(index, x0)| {
            if on_null_set(&x0) {
                return Ok(SampleOutcome {
                    index,
                    x0,
                    on_null_set: true,
                    exit_index: None,
                    hit_null_set: false,
                    doubling_held: true,
                });
            }
            let opts = RunOptions::new(alpha, cfg.k_max)
                .policy(SelectionPolicy::MinimalNorm)
                .seed(cfg.seed)
                .stream(index as u64)
                .stop(ball.clone());
            let mut hit_null_set = false;
            let mut doubling_held = true;
            let mut prev: Option<(f64, f64)> = None;
            let outcome = run_summary(&f, &x0, &opts, |_, x| {
                hit_null_set |= on_null_set(x);
                if let Some((p1, p2)) = prev {
                    if p1 >= 0.5 && p2 != 0.0 && p2.abs() <= small && x[1].abs() < 2.0 * p2.abs() {
                        doubling_held = false;
                    }
                }
                prev = Some((x[0], x[1]));
            })?;
            Ok(SampleOutcome {
                index,
                x0,
                on_null_set: false,
                exit_index: outcome.exit_index,
                hit_null_set,
                doubling_held,
            })
        })
        .collect::<Result<_>>()?;

    let escaped: Vec<usize> = outcomes.iter().filter_map(|o| o.exit_index).collect();
    Ok(EscapeStats {
        epsilon: cfg.epsilon,
        alpha,
        samples: outcomes.len(),
        k_max: cfg.k_max,
        seed: cfg.seed,
        escaped_count: escaped.len(),
        stuck_on_s_count: outcomes.iter().filter(|o| o.on_null_set).count(),
        max_exit_index: escaped.iter().copied().max(),
        non_escaping: outcomes
            .iter()
            .filter(|o| !o.on_null_set && o.exit_index.is_none())
            .map(|o| o.index)
            .collect(),
        outcomes,
    })
}
