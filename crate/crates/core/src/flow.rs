//! Subgradient flow x'(t) ∈ −∂f(x(t)), integrated with a fine fixed-step
//! Euler polygon that always follows the minimal-norm subgradient.
//!
//! When a step would overshoot a kink (no sufficient decrease), kinks within
//! one step's reach are treated as active, so the polygon slides along a
//! nonsmooth valley or stops inside an h-ball of a nonsmooth minimum instead
//! of chattering across it.

use serde::Serialize;

use crate::catalog::CatalogFunction;
use crate::engine::InterpolatedPath;
use crate::error::{Error, Result};
use crate::vector::Vector;

/// Numerical solution on [0, T] at nodes t_j = j·h (plus T if it is not a node).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSolution {
    pub function: CatalogFunction,
    pub x0: Vector,
    pub horizon: f64,
    pub node_step: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// argmin ‖v‖ over ∂f(states[j])
    pub min_norm_subgrads: Vec<Vector>,
    pub f_values: Vec<f64>,
}

impl FlowSolution {
    pub fn final_state(&self) -> &Vector {
        self.states.last().expect("solution has at least one node")
    }

    /// Linear interpolation between nodes; `t` is clamped to [0, T].
    pub fn state_at(&self, t: f64) -> Vector {
        let t = t.clamp(0.0, self.horizon);
        let j = self.times.partition_point(|&s| s <= t);
        if j == 0 {
            return self.states[0].clone();
        }
        let j = j - 1;
        if self.times[j] == t || j + 1 == self.times.len() {
            return self.states[j].clone();
        }
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let theta = (t - t0) / (t1 - t0);
        self.states[j].sub_scaled(-theta, &self.states[j + 1].sub(&self.states[j]))
    }

    /// max_j (f_{j+1} − f_j), positive when f increased somewhere.
    pub fn max_f_increase(&self) -> f64 {
        self.f_values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Node count n with n·h ≈ T, tolerant to T/h landing a hair below an integer.
pub(crate) fn floor_ratio(num: f64, den: f64) -> usize {
    let r = num / den;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        r.floor() as usize
    }
}

pub fn integrate_flow(
    f: &CatalogFunction,
    x0: &Vector,
    horizon: f64,
    h: f64,
) -> Result<FlowSolution> {
    x0.ensure_dim(f.dim())?;
    x0.ensure_finite()?;
    if !(h > 0.0 && horizon.is_finite() && h <= horizon * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < h <= T, got h = {h}, T = {horizon}"
        )));
    }
    let n = floor_ratio(horizon, h);
    let mut times: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
    let last = times.last_mut().unwrap();
    if (*last - horizon).abs() <= 1e-9 * h {
        *last = horizon;
    } else if *last < horizon {
        times.push(horizon);
    }

    let mut states = Vec::with_capacity(times.len());
    let mut subgrads = Vec::with_capacity(times.len());
    let mut f_values = Vec::with_capacity(times.len());
    let mut x = x0.clone();
    for j in 0..times.len() {
        let dt = times.get(j + 1).map_or(h, |next| next - times[j]);
        let g = sliding_direction(f, &x, dt)?;
        f_values.push(f.value_unchecked(&x));
        if j + 1 < times.len() {
            let next = x.sub_scaled(times[j + 1] - times[j], &g);
            if next.is_diverged() {
                return Err(Error::NonFiniteState { index: j + 1 });
            }
            states.push(std::mem::replace(&mut x, next));
        } else {
            states.push(x.clone());
        }
        subgrads.push(g);
    }

    Ok(FlowSolution {
        function: *f,
        x0: x0.clone(),
        horizon,
        node_step: h,
        times,
        states,
        min_norm_subgrads: subgrads,
        f_values,
    })
}

/// Minimal-norm subgradient, unless that step overshoots a kink (no
/// sufficient decrease), in which case kinks within reach count as active.
fn sliding_direction(f: &CatalogFunction, x: &Vector, dt: f64) -> Result<Vector> {
    let exact = f.subdifferential(x, 0.0)?;
    let g = exact.minimal_norm_element();
    let trial = x.sub_scaled(dt, &g);
    if trial.is_diverged()
        || f.value_unchecked(&trial) <= f.value_unchecked(x) - 0.5 * dt * g.norm_sq()
    {
        return Ok(g);
    }
    let reach = dt * exact.max_generator_norm();
    Ok(f.subdifferential(x, reach)?.minimal_norm_element())
}

/// | f(x(T)) − f(x(0)) + ∫₀ᵀ d(0, ∂f(x(τ)))² dτ |, trapezoidal quadrature on the nodes.
pub fn energy_residual(sol: &FlowSolution) -> f64 {
    let sq: Vec<f64> = sol.min_norm_subgrads.iter().map(Vector::norm_sq).collect();
    let integral: f64 = sol
        .times
        .windows(2)
        .zip(sq.windows(2))
        .map(|(t, g)| 0.5 * (t[1] - t[0]) * (g[0] + g[1]))
        .sum();
    let drop = sol.f_values.last().unwrap() - sol.f_values[0];
    (drop + integral).abs()
}

/// Flow of ½‖x‖²: x(t) = e^{−t} x0.
pub fn exact_flow_quadratic(x0: &Vector, t: f64) -> Result<Vector> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    Ok(x0.scale((-t).exp()))
}

/// Sup distance between a discrete interpolation and a flow solution.
///
/// The comparison is against the minimal-norm-selection solution only; where
/// the inclusion has several solutions no claim is made about the others.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub alpha: f64,
    pub h: f64,
    pub horizon: f64,
    pub sup_dev: f64,
    pub t_argmax: f64,
    pub reference: &'static str,
}

pub fn sup_deviation(path: &InterpolatedPath, sol: &FlowSolution) -> Result<DeviationReport> {
    let end = path.end();
    if (end - sol.horizon).abs() > 1e-9 * sol.horizon.max(1.0) {
        return Err(Error::HorizonMismatch {
            path: end,
            flow: sol.horizon,
        });
    }
    let mut grid: Vec<f64> = path.node_times();
    grid.extend(sol.times.iter().copied().filter(|&t| t <= end));
    grid.push(end);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut sup_dev = 0.0;
    let mut t_argmax = 0.0;
    for t in grid {
        let d = path.interpolate(t)?.distance(&sol.state_at(t));
        if d > sup_dev {
            sup_dev = d;
            t_argmax = t;
        }
    }
    Ok(DeviationReport {
        alpha: path.trajectory().alpha,
        h: sol.node_step,
        horizon: end,
        sup_dev,
        t_argmax,
        reference: "minimal_norm_selection",
    })
}
