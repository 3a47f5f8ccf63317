//! Empirical probing of discrete Lyapunov stability.
//!
//! A point x* is stable when every ε-ball around it admits δ and ᾱ such that
//! all iterates started in B(x*, δ) with any step α ≤ ᾱ stay in B(x*, ε). The
//! definition quantifies over infinitely many iterates and every subgradient
//! selection, so a probe can only ever report "no escape *observed*" for a
//! finite sample, a finite horizon and one selection policy. An escape, on the
//! other hand, is a concrete replayable witness.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogFunction, FunctionDescriptor, FunctionId};
use crate::engine::{run, run_summary, Ball, RunOptions, SelectionPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::flow::floor_ratio;
use crate::rng::{probe_stream, sample_ball, stream_rng, LIPSCHITZ_STREAM, LOCAL_MIN_STREAM};
use crate::vector::Vector;

/// Multiplier applied to the sampled subgradient-norm maximum.
pub const LIPSCHITZ_SAFETY: f64 = 1.1;
/// Number of ⌈T/α⌉ blocks in the default iteration budget.
pub const HORIZON_REPETITIONS: usize = 50;
/// Ball samples used for the Lipschitz estimate inside [`probe`].
pub const PROBE_LIPSCHITZ_SAMPLES: usize = 1000;
pub const DEFAULT_PROBE_SAMPLES: usize = 100;
/// Upper bound on the derived budget when the Lipschitz estimate is tiny.
pub const MAX_DEFAULT_ITERS: usize = 10_000_000;
/// f(x) < f(x*) − this counts as a strictly lower value.
pub const LOCAL_MIN_TOL: f64 = 1e-12;

const DELTA_FRACTIONS: [f64; 4] = [0.5, 0.25, 0.125, 0.0625];
const ALPHA_FRACTIONS: [f64; 4] = [0.2, 0.1, 0.05, 0.01];

/// Trajectory selection randomness lives on a different key than the
/// initial-point sampler so the two never share a stream.
fn selection_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// `1.1 · max ‖s‖` over s ∈ ∂f(x), x sampled uniformly in B(center, radius)
/// (the center itself is always included).
pub fn estimate_lipschitz(
    f: &CatalogFunction,
    center: &Vector,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    center.ensure_dim(f.dim())?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidParameter("radius must be positive".into()));
    }
    let mut rng = stream_rng(seed, LIPSCHITZ_STREAM);
    let mut best = f.subdifferential(center, 0.0)?.max_generator_norm();
    for _ in 0..samples {
        let x = sample_ball(&mut rng, center, radius);
        best = best.max(f.subdifferential(&x, 0.0)?.max_generator_norm());
    }
    Ok(LIPSCHITZ_SAFETY * best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityQuery {
    pub function: FunctionId,
    pub dim: usize,
    pub x_star: Vector,
    pub epsilon: f64,
    /// Strictly decreasing, every entry < epsilon.
    pub delta_grid: Vec<f64>,
    /// Strictly decreasing.
    pub alpha_grid: Vec<f64>,
    pub samples: usize,
    /// Fixed budget; `None` derives ⌈T/α⌉·50 per step size with T = ε/(3L).
    pub max_iters: Option<usize>,
    pub policy: SelectionPolicy,
    pub seed: u64,
}

impl StabilityQuery {
    /// δ ∈ ε·{1/2, 1/4, 1/8, 1/16}, α ∈ {0.2, 0.1, 0.05, 0.01}·ε/L with L
    /// estimated on B(x*, ε).
    pub fn with_default_grids(
        f: &CatalogFunction,
        x_star: Vector,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        check_epsilon(epsilon)?;
        let lipschitz = estimate_lipschitz(f, &x_star, epsilon, PROBE_LIPSCHITZ_SAMPLES, seed)?;
        Ok(Self {
            function: f.id(),
            dim: f.dim(),
            x_star,
            epsilon,
            delta_grid: default_delta_grid(epsilon),
            alpha_grid: default_alpha_grid(epsilon, lipschitz),
            samples: DEFAULT_PROBE_SAMPLES,
            max_iters: None,
            policy: SelectionPolicy::default(),
            seed,
        })
    }

    pub fn catalog_function(&self) -> Result<CatalogFunction> {
        CatalogFunction::new(self.function, self.dim)
    }

    fn validate(&self) -> Result<CatalogFunction> {
        let f = self
            .catalog_function()
            .map_err(|e| Error::InvalidQuery(e.to_string()))?;
        let bad = |msg: &str| Err(Error::InvalidQuery(msg.to_string()));
        if self.x_star.dim() != self.dim || !self.x_star.is_finite() {
            return bad("x_star must be finite with the function's dimension");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.delta_grid.is_empty() || self.alpha_grid.is_empty() {
            return bad("grids must be nonempty");
        }
        if !strictly_decreasing_positive(&self.delta_grid) {
            return bad("delta grid must be positive and strictly decreasing");
        }
        if !strictly_decreasing_positive(&self.alpha_grid) {
            return bad("alpha grid must be positive and strictly decreasing");
        }
        if self.delta_grid[0] >= self.epsilon {
            return bad("every delta must be < epsilon");
        }
        if self.samples == 0 || self.max_iters == Some(0) {
            return bad("samples and max_iters must be >= 1");
        }
        Ok(f)
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )))
    }
}

fn strictly_decreasing_positive(grid: &[f64]) -> bool {
    grid.iter().all(|&v| v > 0.0 && v.is_finite()) && grid.windows(2).all(|w| w[0] > w[1])
}

pub fn default_delta_grid(epsilon: f64) -> Vec<f64> {
    DELTA_FRACTIONS.iter().map(|c| c * epsilon).collect()
}

pub fn default_alpha_grid(epsilon: f64, lipschitz: f64) -> Vec<f64> {
    let scale = epsilon / lipschitz.max(f64::EPSILON);
    ALPHA_FRACTIONS.iter().map(|c| c * scale).collect()
}

/// ⌈T/α⌉·R with T = ε/(3L).
pub fn default_iters(epsilon: f64, lipschitz: f64, alpha: f64) -> usize {
    let horizon = epsilon / (3.0 * lipschitz.max(f64::EPSILON));
    let blocks = (horizon / alpha).ceil().max(1.0);
    if blocks >= (MAX_DEFAULT_ITERS / HORIZON_REPETITIONS) as f64 {
        MAX_DEFAULT_ITERS
    } else {
        blocks as usize * HORIZON_REPETITIONS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub epsilon: f64,
    pub delta: f64,
    pub alpha_bar: f64,
    pub samples: usize,
    /// Largest iteration budget among the certified step sizes.
    pub max_iters: usize,
    pub policy: SelectionPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscapeWitness {
    pub x0: Vector,
    pub alpha: f64,
    pub delta: f64,
    pub exit_index: usize,
    pub exit_distance: f64,
    pub delta_index: usize,
    pub alpha_index: usize,
    pub sample_index: usize,
    /// Relative path of the witness CSV, filled in by whoever writes it.
    pub trajectory_csv: Option<String>,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

impl EscapeWitness {
    /// Replays the recorded run and checks it is bit-identical and still exits.
    pub fn replays(&self, x_star: &Vector, epsilon: f64) -> bool {
        match self.trajectory.replay() {
            Ok(t) => {
                t == self.trajectory
                    && t.points
                        .get(self.exit_index)
                        .is_some_and(|p| p.distance(x_star) > epsilon)
            }
            Err(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StabilityVerdict {
    NoEscapeObserved { certificate: Certificate },
    EscapeWitnessed { witness: Box<EscapeWitness> },
}

impl StabilityVerdict {
    pub fn is_escape(&self) -> bool {
        matches!(self, StabilityVerdict::EscapeWitnessed { .. })
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            StabilityVerdict::NoEscapeObserved { certificate } => Some(certificate),
            StabilityVerdict::EscapeWitnessed { .. } => None,
        }
    }

    pub fn witness(&self) -> Option<&EscapeWitness> {
        match self {
            StabilityVerdict::EscapeWitnessed { witness } => Some(witness),
            StabilityVerdict::NoEscapeObserved { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub delta: f64,
    pub alpha: f64,
    pub max_iters: usize,
    pub samples: usize,
    pub escapes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub query: StabilityQuery,
    pub function: FunctionDescriptor,
    #[serde(flatten)]
    pub verdict: StabilityVerdict,
    pub cells: Vec<CellReport>,
    pub lipschitz_estimate: f64,
}

pub fn probe(q: &StabilityQuery) -> Result<ProbeReport> {
    let f = q.validate()?;
    let lipschitz = estimate_lipschitz(&f, &q.x_star, q.epsilon, PROBE_LIPSCHITZ_SAMPLES, q.seed)?;
    let na = q.alpha_grid.len();
    let budgets: Vec<usize> = q
        .alpha_grid
        .iter()
        .map(|&a| {
            q.max_iters
                .unwrap_or_else(|| default_iters(q.epsilon, lipschitz, a))
        })
        .collect();
    let ball = Ball::new(q.x_star.clone(), q.epsilon)?;

    let tasks: Vec<(usize, usize, usize)> = (0..q.delta_grid.len())
        .flat_map(|d| (0..na).flat_map(move |a| (0..q.samples).map(move |s| (d, a, s))))
        .collect();
    let setup = |d: usize, a: usize, s: usize| {
        let stream = probe_stream(d * na + a, s);
        let x0 = sample_ball(&mut stream_rng(q.seed, stream), &q.x_star, q.delta_grid[d]);
        let opts = RunOptions::new(q.alpha_grid[a], budgets[a])
            .policy(q.policy)
            .seed(selection_seed(q.seed))
            .stream(stream)
            .stop(ball.clone());
        (x0, opts)
    };
    let exits: Vec<Option<usize>> = tasks
        .par_iter()
        .map(|&(d, a, s)| {
            let (x0, opts) = setup(d, a, s);
            run_summary(&f, &x0, &opts, |_, _| {}).map(|o| o.exit_index)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(q.delta_grid.len() * na);
    for (d, &delta) in q.delta_grid.iter().enumerate() {
        for (a, &alpha) in q.alpha_grid.iter().enumerate() {
            let base = (d * na + a) * q.samples;
            cells.push(CellReport {
                delta,
                alpha,
                max_iters: budgets[a],
                samples: q.samples,
                escapes: exits[base..base + q.samples].iter().flatten().count(),
            });
        }
    }

    let certified = (0..q.delta_grid.len()).find_map(|d| {
        let row = &cells[d * na..(d + 1) * na];
        // smallest alpha index whose whole tail is escape-free
        let first_clean = (0..na).rev().take_while(|&a| row[a].escapes == 0).last()?;
        Some((d, first_clean))
    });

    let verdict = match certified {
        Some((d, a)) => StabilityVerdict::NoEscapeObserved {
            certificate: Certificate {
                epsilon: q.epsilon,
                delta: q.delta_grid[d],
                alpha_bar: q.alpha_grid[a],
                samples: q.samples,
                max_iters: budgets[a..].iter().copied().max().unwrap(),
                policy: q.policy,
            },
        },
        None => {
            let i = exits
                .iter()
                .position(Option::is_some)
                .expect("no certificate implies some escape");
            let (d, a, s) = tasks[i];
            let (x0, opts) = setup(d, a, s);
            let trajectory = run(&f, &x0, &opts)?;
            let exit_index = trajectory
                .first_exit(&q.x_star, q.epsilon)
                .expect("summary and recorded run agree");
            StabilityVerdict::EscapeWitnessed {
                witness: Box::new(EscapeWitness {
                    exit_distance: trajectory.points[exit_index].distance(&q.x_star),
                    x0,
                    alpha: q.alpha_grid[a],
                    delta: q.delta_grid[d],
                    exit_index,
                    delta_index: d,
                    alpha_index: a,
                    sample_index: s,
                    trajectory_csv: None,
                    trajectory,
                }),
            }
        }
    };

    Ok(ProbeReport {
        query: q.clone(),
        function: f.descriptor(),
        verdict,
        cells,
        lipschitz_estimate: lipschitz,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LocalMinVerdict {
    ConsistentWithLocalMin {
        samples: usize,
    },
    CounterexamplePoint {
        x: Vector,
        value: f64,
        center_value: f64,
    },
}

impl LocalMinVerdict {
    pub fn is_consistent(&self) -> bool {
        matches!(self, LocalMinVerdict::ConsistentWithLocalMin { .. })
    }
}

/// Samples B(x*, radius) looking for f(x) < f(x*) − 1e−12.
pub fn local_min_check(
    f: &CatalogFunction,
    x_star: &Vector,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<LocalMinVerdict> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    let center_value = f.evaluate(x_star)?;
    let ball = Ball::new(x_star.clone(), radius)?;
    let mut rng = stream_rng(seed, LOCAL_MIN_STREAM);
    for _ in 0..samples {
        let x = sample_ball(&mut rng, &ball.center, ball.radius);
        let value = f.evaluate(&x)?;
        if value < center_value - LOCAL_MIN_TOL {
            return Ok(LocalMinVerdict::CounterexamplePoint {
                x,
                value,
                center_value,
            });
        }
    }
    Ok(LocalMinVerdict::ConsistentWithLocalMin { samples })
}

/// Classical constant-step guarantees for convex f, measured on one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub function: FunctionDescriptor,
    pub x0: Vector,
    pub alpha: f64,
    pub epsilon: f64,
    pub steps: usize,
    /// Largest subgradient norm seen along the trajectory.
    pub c: f64,
    pub inf_value: f64,
    pub initial_distance: f64,
    /// min f(x_k) − inf f over the second half of the run.
    pub liminf_gap: f64,
    /// c²α/2
    pub bound_c2a2: f64,
    pub liminf_within_bound: bool,
    /// ⌊d(x0, X)² / (αε)⌋
    pub iters_budget: usize,
    /// min f(x_k) − inf f over k ≤ min(budget, steps)
    pub min_gap_within_budget: f64,
    /// min gap within budget ≤ c²α/2 + ε
    pub achieved_within_budget: bool,
    pub beta: Option<f64>,
    /// c√α/√(2β), when β is registered and α ≤ 1/(2β)
    pub dist_bound: Option<f64>,
    pub terminal_distance: f64,
    pub dist_within_bound: Option<bool>,
}

pub fn convex_bounds_report(
    f: &CatalogFunction,
    x0: &Vector,
    alpha: f64,
    epsilon: f64,
    steps: usize,
    policy: SelectionPolicy,
    seed: u64,
) -> Result<BoundReport> {
    if !f.id().convex() {
        return Err(Error::NotConvex(f.id().to_string()));
    }
    check_epsilon(epsilon)?;
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    let minimizers = f.known_minimizers();
    let inf_value = f.evaluate(&minimizers[0])?;
    let dist = |x: &Vector| {
        minimizers
            .iter()
            .map(|m| m.distance(x))
            .fold(f64::INFINITY, f64::min)
    };

    let traj = run(
        f,
        x0,
        &RunOptions::new(alpha, steps).policy(policy).seed(seed),
    )?;
    if let Some(k) = traj.diverged_at {
        return Err(Error::NonFiniteState { index: k });
    }
    let mut c: f64 = 0.0;
    let mut gaps = Vec::with_capacity(traj.points.len());
    for p in &traj.points {
        c = c.max(f.subdifferential(p, 0.0)?.max_generator_norm());
        gaps.push(f.evaluate(p)? - inf_value);
    }
    let k_final = traj.steps();
    let liminf_gap = gaps[k_final / 2..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let bound_c2a2 = c * c * alpha / 2.0;
    let initial_distance = dist(x0);
    let iters_budget = floor_ratio(initial_distance * initial_distance, alpha * epsilon);
    let min_gap_within_budget = gaps[..=iters_budget.min(k_final)]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);

    let beta = f.id().quadratic_growth();
    let dist_bound = beta
        .filter(|b| alpha <= 1.0 / (2.0 * b))
        .map(|b| c * alpha.sqrt() / (2.0 * b).sqrt());
    let terminal_distance = dist(traj.points.last().unwrap());

    Ok(BoundReport {
        function: f.descriptor(),
        x0: x0.clone(),
        alpha,
        epsilon,
        steps: k_final,
        c,
        inf_value,
        initial_distance,
        liminf_gap,
        bound_c2a2,
        liminf_within_bound: liminf_gap <= bound_c2a2,
        iters_budget,
        min_gap_within_budget,
        achieved_within_budget: min_gap_within_budget <= bound_c2a2 + epsilon,
        beta,
        dist_bound,
        terminal_distance,
        dist_within_bound: dist_bound.map(|b| terminal_distance <= b),
    })
}
