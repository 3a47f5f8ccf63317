//! Constant-step subgradient iteration x_{k+1} = x_k − α s_k, s_k ∈ ∂f(x_k).
//!
//! The inclusion leaves the choice of s_k open; [`SelectionPolicy`] makes it
//! explicit. Runs are pure functions of their inputs: the seed and stream id
//! fully determine any randomness, so a [`Trajectory`] can be replayed bit for
//! bit.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{CatalogFunction, FunctionId};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamRng};
use crate::vector::Vector;

/// How a subgradient is picked from conv(generators).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    MinimalNorm,
    /// A uniformly random generator (extreme point); consumes one draw per step.
    RandomExtreme,
    /// Generator `i mod len`.
    FixedIndex(usize),
}

impl SelectionPolicy {
    pub fn select<R: Rng + ?Sized>(
        &self,
        set: &crate::catalog::SubdifferentialSet,
        rng: &mut R,
    ) -> Vector {
        let gens = set.generators();
        match *self {
            SelectionPolicy::MinimalNorm => set.minimal_norm_element(),
            SelectionPolicy::RandomExtreme => {
                let i = rng.random_range(0..gens.len());
                gens[i].clone()
            }
            SelectionPolicy::FixedIndex(i) => gens[i % gens.len()].clone(),
        }
    }
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionPolicy::MinimalNorm => f.write_str("minimal_norm"),
            SelectionPolicy::RandomExtreme => f.write_str("random_extreme"),
            SelectionPolicy::FixedIndex(i) => write!(f, "fixed_index:{i}"),
        }
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimal_norm" => Ok(SelectionPolicy::MinimalNorm),
            "random_extreme" => Ok(SelectionPolicy::RandomExtreme),
            _ => s
                .strip_prefix("fixed_index:")
                .and_then(|i| i.parse().ok())
                .map(SelectionPolicy::FixedIndex)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown policy `{s}`"))),
        }
    }
}

/// Closed ball B(center, radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vector,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        center.ensure_finite()?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.distance(&self.center) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub alpha: f64,
    pub steps: usize,
    pub policy: SelectionPolicy,
    pub seed: u64,
    pub stream: u64,
    /// Halt at the first iterate outside this ball (that iterate is kept).
    pub stop: Option<Ball>,
}

impl RunOptions {
    pub fn new(alpha: f64, steps: usize) -> Self {
        Self {
            alpha,
            steps,
            policy: SelectionPolicy::default(),
            seed: 0,
            stream: 0,
            stop: None,
        }
    }

    pub fn policy(mut self, policy: SelectionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn stop(mut self, ball: Ball) -> Self {
        self.stop = Some(ball);
        self
    }

    fn validate(&self, f: &CatalogFunction, x0: &Vector) -> Result<()> {
        check_alpha(self.alpha)?;
        x0.ensure_dim(f.dim())?;
        x0.ensure_finite()?;
        if let Some(ball) = &self.stop {
            ball.center.ensure_dim(f.dim())?;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "step size must be positive and finite, got {alpha}"
        )))
    }
}

/// One step: picks s ∈ ∂f(x) per `policy` and returns (x − α s, s).
///
/// Fails with [`Error::NonFiniteState`] (index 1) if the new point diverges.
pub fn step<R: Rng + ?Sized>(
    f: &CatalogFunction,
    x: &Vector,
    alpha: f64,
    policy: SelectionPolicy,
    rng: &mut R,
) -> Result<(Vector, Vector)> {
    check_alpha(alpha)?;
    let set = f.subdifferential(x, 0.0)?;
    let s = policy.select(&set, rng);
    let next = x.sub_scaled(alpha, &s);
    if next.is_diverged() {
        return Err(Error::NonFiniteState { index: 1 });
    }
    Ok((next, s))
}

/// Discrete iterate sequence with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub function: CatalogFunction,
    pub alpha: f64,
    pub policy: SelectionPolicy,
    pub seed: u64,
    pub stream: u64,
    pub requested_steps: usize,
    pub stop: Option<Ball>,
    /// x_0, …, x_K
    pub points: Vec<Vector>,
    /// s_0, …, s_{K−1} with points[k+1] = points[k] − alpha·s_k
    pub chosen_subgradients: Vec<Vector>,
    /// Index of the first iterate that overflowed; that iterate is not stored.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn fn_id(&self) -> FunctionId {
        self.function.id()
    }

    /// Number of completed steps K (points holds K + 1 iterates).
    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            alpha: self.alpha,
            steps: self.requested_steps,
            policy: self.policy,
            seed: self.seed,
            stream: self.stream,
            stop: self.stop.clone(),
        }
    }

    pub fn replay(&self) -> Result<Trajectory> {
        run(&self.function, &self.points[0], &self.options())
    }

    pub fn first_exit(&self, center: &Vector, radius: f64) -> Option<usize> {
        first_exit(self, center, radius)
    }
}

/// Iterates `opts.steps` times, stopping early on ball exit or divergence.
pub fn run(f: &CatalogFunction, x0: &Vector, opts: &RunOptions) -> Result<Trajectory> {
    opts.validate(f, x0)?;
    let mut rng = stream_rng(opts.seed, opts.stream);
    let mut points = Vec::with_capacity(opts.steps.min(1 << 20) + 1);
    let mut subgrads = Vec::with_capacity(opts.steps.min(1 << 20));
    let mut diverged_at = None;
    points.push(x0.clone());
    for k in 0..opts.steps {
        let x = &points[k];
        if opts.stop.as_ref().is_some_and(|b| !b.contains(x)) {
            break;
        }
        match step(f, x, opts.alpha, opts.policy, &mut rng) {
            Ok((next, s)) => {
                points.push(next);
                subgrads.push(s);
            }
            Err(Error::NonFiniteState { .. }) => {
                diverged_at = Some(k + 1);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trajectory {
        function: *f,
        alpha: opts.alpha,
        policy: opts.policy,
        seed: opts.seed,
        stream: opts.stream,
        requested_steps: opts.steps,
        stop: opts.stop.clone(),
        points,
        chosen_subgradients: subgrads,
        diverged_at,
    })
}

/// Summary of a run that does not keep its iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Index of the first iterate outside the stop ball.
    pub exit_index: Option<usize>,
    pub diverged_at: Option<usize>,
    /// Steps actually taken.
    pub steps_taken: usize,
    pub last: Vector,
}

/// Same iteration as [`run`] (same RNG consumption, same stopping rule) but
/// only reports where it stopped. `visit(k, x_k)` sees every iterate.
pub fn run_summary(
    f: &CatalogFunction,
    x0: &Vector,
    opts: &RunOptions,
    mut visit: impl FnMut(usize, &Vector),
) -> Result<RunOutcome> {
    opts.validate(f, x0)?;
    let mut rng: StreamRng = stream_rng(opts.seed, opts.stream);
    let mut x = x0.clone();
    visit(0, &x);
    let mut outcome = RunOutcome {
        exit_index: None,
        diverged_at: None,
        steps_taken: 0,
        last: x0.clone(),
    };
    for k in 0..opts.steps {
        if opts.stop.as_ref().is_some_and(|b| !b.contains(&x)) {
            outcome.exit_index = Some(k);
            break;
        }
        match step(f, &x, opts.alpha, opts.policy, &mut rng) {
            Ok((next, _)) => {
                x = next;
                outcome.steps_taken = k + 1;
                visit(k + 1, &x);
            }
            Err(Error::NonFiniteState { .. }) => {
                outcome.diverged_at = Some(k + 1);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if outcome.exit_index.is_none() && outcome.diverged_at.is_none() {
        if let Some(b) = &opts.stop {
            if !b.contains(&x) {
                outcome.exit_index = Some(outcome.steps_taken);
            }
        }
    }
    outcome.last = x;
    Ok(outcome)
}

/// Smallest k with ‖points[k] − center‖ > radius.
pub fn first_exit(traj: &Trajectory, center: &Vector, radius: f64) -> Option<usize> {
    traj.points.iter().position(|p| p.distance(center) > radius)
}

/// Piecewise-linear interpolation x̄ of a trajectory with nodes at t = αk.
#[derive(Debug, Clone)]
pub struct InterpolatedPath {
    trajectory: Trajectory,
    horizon: f64,
}

impl InterpolatedPath {
    pub fn new(trajectory: Trajectory, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self {
            trajectory,
            horizon,
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Right end of the domain, min(T, α·K).
    pub fn end(&self) -> f64 {
        let alpha = self.trajectory.alpha;
        self.horizon.min(alpha * self.trajectory.steps() as f64)
    }

    /// Node times αk that fall inside the domain.
    pub fn node_times(&self) -> Vec<f64> {
        let end = self.end();
        let alpha = self.trajectory.alpha;
        (0..=self.trajectory.steps())
            .map(|k| k as f64 * alpha)
            .take_while(|&t| t <= end * (1.0 + 1e-12))
            .map(|t| t.min(end))
            .collect()
    }

    pub fn interpolate(&self, t: f64) -> Result<Vector> {
        let end = self.end();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::OutOfHorizon { t, end });
        }
        let t = t.min(end);
        let alpha = self.trajectory.alpha;
        let pts = &self.trajectory.points;
        let last = pts.len() - 1;
        let s = t / alpha;
        let nearest = s.round();
        if (s - nearest).abs() <= 1e-9 && (nearest as usize) <= last {
            return Ok(pts[nearest as usize].clone());
        }
        let k = (s.floor() as usize).min(last.saturating_sub(1));
        let theta = (t - alpha * k as f64) / alpha;
        Ok(pts[k].sub_scaled(-theta, &pts[k + 1].sub(&pts[k])))
    }
}
