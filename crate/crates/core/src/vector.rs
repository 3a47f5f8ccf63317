use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Iterates blowing past this magnitude are treated as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e100;

/// A point of R^n. Small dimensions are stored inline.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(SmallVec<[f64; 4]>);

impl Vector {
    pub fn new(coords: impl Into<Vec<f64>>) -> Result<Self> {
        let coords = coords.into();
        if coords.is_empty() {
            return Err(Error::InvalidParameter("vector must have dim >= 1".into()));
        }
        Ok(Self(SmallVec::from_vec(coords)))
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        assert!(!coords.is_empty(), "vector must have dim >= 1");
        Self(SmallVec::from_slice(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector must have dim >= 1");
        Self(SmallVec::from_elem(0.0, dim))
    }

    pub fn unit(dim: usize, i: usize, sign: f64) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = sign;
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// True when some coordinate is NaN/Inf or exceeds [`DIVERGENCE_THRESHOLD`].
    pub fn is_diverged(&self) -> bool {
        self.0
            .iter()
            .any(|c| !c.is_finite() || c.abs() > DIVERGENCE_THRESHOLD)
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteInput)
        }
    }

    pub fn ensure_dim(&self, expected: usize) -> Result<()> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            })
        }
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self - scale * dir`, coordinate-wise.
    pub fn sub_scaled(&self, scale: f64, dir: &Vector) -> Vector {
        Self(
            self.0
                .iter()
                .zip(dir.0.iter())
                .map(|(x, d)| x - scale * d)
                .collect(),
        )
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Self(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Self(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Vector {
        Self(self.0.iter().map(|x| s * x).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Self(self.0.iter().map(|&x| f(x)).collect())
    }

    /// Affine combination `sum_i w_i p_i`; weights and points must have equal length.
    pub fn combination(points: &[&Vector], weights: &[f64]) -> Vector {
        debug_assert_eq!(points.len(), weights.len());
        let mut out = Self::zeros(points[0].dim());
        for (p, w) in points.iter().zip(weights) {
            for (o, c) in out.0.iter_mut().zip(p.0.iter()) {
                *o += w * c;
            }
        }
        out
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl From<f64> for Vector {
    fn from(x: f64) -> Self {
        Self::from_slice(&[x])
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(coords: [f64; N]) -> Self {
        Self::from_slice(&coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_vector_rejected() {
        assert!(Vector::new(Vec::new()).is_err());
    }

    #[test]
    fn divergence_flag() {
        assert!(Vector::from([1e101, 0.0]).is_diverged());
        assert!(Vector::from([f64::NAN]).is_diverged());
        assert!(!Vector::from([1e99, -1e99]).is_diverged());
    }

    #[test]
    fn json_is_a_plain_array() {
        let v = Vector::from([1.0, -0.5]);
        assert_eq!(serde_json::to_string(&v).unwrap(), "[1.0,-0.5]");
        let back: Vector = serde_json::from_str("[1.0,-0.5]").unwrap();
        assert_eq!(back, v);
    }
}
