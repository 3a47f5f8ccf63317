//! Minimum-norm point of the convex hull of finitely many points.
//!
//! One and two generators are solved in closed form (the second by projecting
//! the origin onto a segment). Larger sets go through Wolfe's minimum-norm-point
//! algorithm: a sequence of major cycles that add the generator most aligned
//! against the current iterate, and minor cycles that drop generators whose
//! affine-minimizer weight turns non-positive.

use nalgebra::{DMatrix, DVector};

use crate::vector::Vector;

/// Optimality / weight tolerance.
pub const TOLERANCE: f64 = 1e-12;

/// Result of a minimum-norm solve: the point and its barycentric weights over
/// the input generators.
#[derive(Debug, Clone)]
pub struct MinNormPoint {
    pub point: Vector,
    pub weights: Vec<f64>,
}

/// argmin{ ||v|| : v in conv(generators) }.
///
/// Panics when `generators` is empty or the dimensions disagree.
pub fn min_norm_point(generators: &[Vector]) -> MinNormPoint {
    assert!(!generators.is_empty(), "convex hull of an empty set");
    let dim = generators[0].dim();
    assert!(
        generators.iter().all(|g| g.dim() == dim),
        "generators of mixed dimension"
    );
    match generators {
        [p] => MinNormPoint {
            point: p.clone(),
            weights: vec![1.0],
        },
        [p, q] => segment(p, q),
        _ => wolfe(generators),
    }
}

/// Euclidean distance from `v` to conv(generators).
pub fn distance_to_hull(generators: &[Vector], v: &Vector) -> f64 {
    let shifted: Vec<Vector> = generators.iter().map(|g| g.sub(v)).collect();
    min_norm_point(&shifted).point.norm()
}

fn segment(p: &Vector, q: &Vector) -> MinNormPoint {
    let d = q.sub(p);
    let dd = d.norm_sq();
    let lambda = if dd == 0.0 {
        0.0
    } else {
        (-p.dot(&d) / dd).clamp(0.0, 1.0)
    };
    let point = if lambda == 0.0 {
        p.clone()
    } else if lambda == 1.0 {
        q.clone()
    } else {
        Vector::combination(&[p, q], &[1.0 - lambda, lambda])
    };
    MinNormPoint {
        point,
        weights: vec![1.0 - lambda, lambda],
    }
}

fn wolfe(generators: &[Vector]) -> MinNormPoint {
    let m = generators.len();
    let cap = 10 * m * m;
    let max_sq = generators
        .iter()
        .map(Vector::norm_sq)
        .fold(0.0_f64, f64::max);

    let start = (0..m)
        .min_by(|&a, &b| generators[a].norm_sq().total_cmp(&generators[b].norm_sq()))
        .unwrap();
    let mut active = vec![start];
    let mut lambda = vec![1.0];
    let mut x = generators[start].clone();
    let mut iterations = 0;

    'major: while iterations < cap {
        iterations += 1;
        let (j, xp) = (0..m)
            .map(|j| (j, x.dot(&generators[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let xx = x.norm_sq();
        if xx - xp <= TOLERANCE * max_sq.max(xx) || active.contains(&j) {
            break;
        }
        active.push(j);
        lambda.push(0.0);

        loop {
            iterations += 1;
            let Some(mu) = affine_minimizer(generators, &active) else {
                break 'major;
            };
            if mu.iter().all(|&w| w > TOLERANCE) {
                lambda = mu;
                break;
            }
            // Walk from lambda toward mu until the first weight hits zero.
            let mut theta = f64::INFINITY;
            let mut leaving = 0;
            for (i, (&l, &u)) in lambda.iter().zip(&mu).enumerate() {
                if u <= TOLERANCE {
                    let t = if l - u > 0.0 { l / (l - u) } else { 0.0 };
                    if t < theta {
                        theta = t;
                        leaving = i;
                    }
                }
            }
            let theta = theta.min(1.0);
            for (l, u) in lambda.iter_mut().zip(&mu) {
                *l = theta * u + (1.0 - theta) * *l;
            }
            lambda[leaving] = 0.0;
            let mut k = 0;
            while k < active.len() {
                if lambda[k] <= TOLERANCE {
                    active.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            if active.len() == 1 || iterations >= cap {
                break;
            }
        }
        let pts: Vec<&Vector> = active.iter().map(|&i| &generators[i]).collect();
        x = Vector::combination(&pts, &lambda);
    }

    let mut weights = vec![0.0; m];
    for (&i, &l) in active.iter().zip(&lambda) {
        weights[i] = l;
    }
    MinNormPoint { point: x, weights }
}

/// Minimizer of ||sum mu_i p_i|| subject to sum mu_i = 1 over the active set.
///
/// Written as p_0 + D t with D = [p_i - p_0], solved as a least-squares
/// problem in t (SVD, minimum-norm solution if D is rank deficient).
fn affine_minimizer(generators: &[Vector], active: &[usize]) -> Option<Vec<f64>> {
    let base = &generators[active[0]];
    let dim = base.dim();
    let k = active.len();
    let d = DMatrix::<f64>::from_fn(dim, k - 1, |r, c| generators[active[c + 1]][r] - base[r]);
    let rhs = DVector::<f64>::from_fn(dim, |r, _| -base[r]);
    let svd = d.svd(true, true);
    let cutoff = 1e-13 * svd.singular_values.max();
    let t = svd.solve(&rhs, cutoff).ok()?;
    let mut mu = Vec::with_capacity(k);
    mu.push(1.0 - t.sum());
    mu.extend(t.iter().copied());
    if mu.iter().all(|w| w.is_finite()) {
        Some(mu)
    } else {
        None
    }
}
