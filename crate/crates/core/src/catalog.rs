//! Fixed catalog of locally Lipschitz test functions with closed-form values
//! and Clarke subdifferentials.
//!
//! Every subdifferential is returned as a finite generator list whose convex
//! hull is the Clarke set. A coordinate or piece counts as active (sitting on a
//! kink) when its defining quantity has magnitude `<= active_tol`; with
//! `active_tol = 0` the set is the exact one at the floating-point input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::min_norm::{distance_to_hull, min_norm_point};
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionId {
    /// ½‖x‖²
    Quad,
    /// ‖x‖₁
    AbsSum,
    /// |x₁|^{3/2}|x₂|^{3/2}; every point of {x₁x₂ = 0} is a non-strict local minimum.
    Cross,
    /// x² sin(1/x), 0 at 0. Not semi-algebraic.
    Wiggle,
    /// |x₁| + x₂²
    VeeBowl,
    /// −‖x‖
    NegNorm,
}

impl FunctionId {
    pub const ALL: [FunctionId; 6] = [
        FunctionId::Quad,
        FunctionId::AbsSum,
        FunctionId::Cross,
        FunctionId::Wiggle,
        FunctionId::VeeBowl,
        FunctionId::NegNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionId::Quad => "quad",
            FunctionId::AbsSum => "abs_sum",
            FunctionId::Cross => "cross",
            FunctionId::Wiggle => "wiggle",
            FunctionId::VeeBowl => "vee_bowl",
            FunctionId::NegNorm => "neg_norm",
        }
    }

    pub fn dim_policy(self) -> DimPolicy {
        match self {
            FunctionId::Quad | FunctionId::AbsSum | FunctionId::NegNorm => DimPolicy::Any,
            FunctionId::Cross | FunctionId::VeeBowl => DimPolicy::Fixed(2),
            FunctionId::Wiggle => DimPolicy::Fixed(1),
        }
    }

    pub fn semialgebraic(self) -> bool {
        !matches!(self, FunctionId::Wiggle)
    }

    pub fn convex(self) -> bool {
        matches!(
            self,
            FunctionId::Quad | FunctionId::AbsSum | FunctionId::VeeBowl
        )
    }

    /// β with f(x) − inf f ≥ β·d(x, X)² globally, when registered.
    pub fn quadratic_growth(self) -> Option<f64> {
        match self {
            FunctionId::Quad => Some(0.5),
            _ => None,
        }
    }

    fn default_dim(self) -> usize {
        match self.dim_policy() {
            DimPolicy::Any => 2,
            DimPolicy::Fixed(d) => d,
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownFunction(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimPolicy {
    Any,
    Fixed(usize),
}

/// A catalog function instantiated at a concrete dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogFunction {
    id: FunctionId,
    dim: usize,
}

/// `{id, dim, semialgebraic, convex}` as embedded in reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDescriptor {
    pub id: FunctionId,
    pub dim: usize,
    pub semialgebraic: bool,
    pub convex: bool,
}

/// One row of [`list_catalog`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub id: FunctionId,
    /// `"any"` or the fixed dimension.
    #[serde(serialize_with = "serialize_dim_policy")]
    pub dim: DimPolicy,
    pub semialgebraic: bool,
    pub convex: bool,
    /// Known minimizers at the entry's default dimension (for any-dim entries, the origin).
    pub known_minimizers: Option<Vec<Vector>>,
    pub quadratic_growth: Option<f64>,
}

fn serialize_dim_policy<S: serde::Serializer>(
    p: &DimPolicy,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match p {
        DimPolicy::Any => s.serialize_str("any"),
        DimPolicy::Fixed(d) => s.serialize_u64(*d as u64),
    }
}

pub fn list_catalog() -> Vec<CatalogEntry> {
    FunctionId::ALL
        .into_iter()
        .map(|id| {
            let f = CatalogFunction::with_default_dim(id);
            let mins = f.known_minimizers();
            CatalogEntry {
                id,
                dim: id.dim_policy(),
                semialgebraic: id.semialgebraic(),
                convex: id.convex(),
                known_minimizers: (!mins.is_empty()).then_some(mins),
                quadratic_growth: id.quadratic_growth(),
            }
        })
        .collect()
}

impl CatalogFunction {
    pub fn new(id: FunctionId, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if let DimPolicy::Fixed(expected) = id.dim_policy() {
            if expected != dim {
                return Err(Error::DimensionMismatch { expected, got: dim });
            }
        }
        Ok(Self { id, dim })
    }

    pub fn with_default_dim(id: FunctionId) -> Self {
        Self {
            id,
            dim: id.default_dim(),
        }
    }

    pub fn id(&self) -> FunctionId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn descriptor(&self) -> FunctionDescriptor {
        FunctionDescriptor {
            id: self.id,
            dim: self.dim,
            semialgebraic: self.id.semialgebraic(),
            convex: self.id.convex(),
        }
    }

    /// Minimizers used for d(x, X); empty when the minimizer set is not a finite list.
    pub fn known_minimizers(&self) -> Vec<Vector> {
        if self.id.convex() {
            vec![Vector::zeros(self.dim)]
        } else {
            Vec::new()
        }
    }

    pub fn evaluate(&self, x: &Vector) -> Result<f64> {
        x.ensure_dim(self.dim)?;
        x.ensure_finite()?;
        Ok(self.value_unchecked(x))
    }

    pub(crate) fn value_unchecked(&self, x: &Vector) -> f64 {
        match self.id {
            FunctionId::Quad => 0.5 * x.norm_sq(),
            FunctionId::AbsSum => x.iter().map(|c| c.abs()).sum(),
            FunctionId::Cross => {
                let (a1, a2) = (x[0].abs(), x[1].abs());
                (a1 * a1.sqrt()) * (a2 * a2.sqrt())
            }
            FunctionId::Wiggle => {
                let t = x[0];
                if t == 0.0 {
                    0.0
                } else {
                    t * t * (1.0 / t).sin()
                }
            }
            FunctionId::VeeBowl => x[0].abs() + x[1] * x[1],
            FunctionId::NegNorm => -x.norm(),
        }
    }

    pub fn subdifferential(&self, x: &Vector, active_tol: f64) -> Result<SubdifferentialSet> {
        x.ensure_dim(self.dim)?;
        x.ensure_finite()?;
        if active_tol.is_nan() || active_tol < 0.0 {
            return Err(Error::InvalidParameter("active_tol must be >= 0".into()));
        }
        Ok(SubdifferentialSet::from_generators(
            x.clone(),
            self.generators(x, active_tol),
        ))
    }

    fn generators(&self, x: &Vector, tol: f64) -> Vec<Vector> {
        let dim = self.dim;
        match self.id {
            FunctionId::Quad => vec![x.clone()],
            FunctionId::AbsSum => {
                let active: Vec<usize> = (0..dim).filter(|&i| x[i].abs() <= tol).collect();
                let base = x.map(|c| if c > 0.0 { 1.0 } else { -1.0 });
                (0..1usize << active.len())
                    .map(|mask| {
                        let mut coords = base.coords().to_vec();
                        for (bit, &i) in active.iter().enumerate() {
                            coords[i] = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                        }
                        Vector::from_slice(&coords)
                    })
                    .collect()
            }
            FunctionId::Cross => vec![cross_gradient(x[0], x[1])],
            FunctionId::Wiggle => {
                let t = x[0];
                if t.abs() <= tol {
                    // conv of limiting derivatives -cos(1/t) as t -> 0
                    vec![Vector::from(-1.0), Vector::from(1.0)]
                } else {
                    vec![Vector::from(2.0 * t * (1.0 / t).sin() - (1.0 / t).cos())]
                }
            }
            FunctionId::VeeBowl => {
                let g2 = 2.0 * x[1];
                if x[0].abs() <= tol {
                    vec![Vector::from([-1.0, g2]), Vector::from([1.0, g2])]
                } else {
                    vec![Vector::from([x[0].signum(), g2])]
                }
            }
            FunctionId::NegNorm => {
                let r = x.norm();
                if r <= tol {
                    // ±e_i: extreme points of the unit ball (exact for dim 1)
                    (0..dim)
                        .flat_map(|i| [Vector::unit(dim, i, -1.0), Vector::unit(dim, i, 1.0)])
                        .collect()
                } else {
                    vec![x.scale(-1.0 / r)]
                }
            }
        }
    }
}

/// ∇ of |x₁|^{3/2}|x₂|^{3/2}; continuous everywhere, zero on both axes.
fn cross_gradient(x1: f64, x2: f64) -> Vector {
    let (a1, a2) = (x1.abs(), x2.abs());
    let (r1, r2) = (a1.sqrt(), a2.sqrt());
    Vector::from([
        1.5 * r1 * (a2 * r2) * sign(x1),
        1.5 * (a1 * r1) * r2 * sign(x2),
    ])
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Clarke subdifferential at `point` as the convex hull of `generators`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubdifferentialSet {
    point: Vector,
    generators: Vec<Vector>,
}

impl SubdifferentialSet {
    /// Duplicates are dropped, first occurrence kept.
    pub fn from_generators(point: Vector, generators: Vec<Vector>) -> Self {
        assert!(!generators.is_empty(), "subdifferential needs a generator");
        let mut unique: Vec<Vector> = Vec::with_capacity(generators.len());
        for g in generators {
            if !unique.contains(&g) {
                unique.push(g);
            }
        }
        Self {
            point,
            generators: unique,
        }
    }

    pub fn point(&self) -> &Vector {
        &self.point
    }

    pub fn generators(&self) -> &[Vector] {
        &self.generators
    }

    pub fn is_singleton(&self) -> bool {
        self.generators.len() == 1
    }

    pub fn minimal_norm_element(&self) -> Vector {
        min_norm_point(&self.generators).point
    }

    pub fn distance_to(&self, v: &Vector) -> f64 {
        distance_to_hull(&self.generators, v)
    }

    pub fn contains(&self, v: &Vector, tol: f64) -> bool {
        self.distance_to(v) <= tol
    }

    pub fn max_generator_norm(&self) -> f64 {
        self.generators.iter().map(Vector::norm).fold(0.0, f64::max)
    }
}

/// Free-function form of [`SubdifferentialSet::minimal_norm_element`].
pub fn minimal_norm_element(set: &SubdifferentialSet) -> Vector {
    set.minimal_norm_element()
}
