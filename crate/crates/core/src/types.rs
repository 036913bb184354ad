//! Vectors, labels, examples and halfspace hypotheses.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norm::{check_finite, dot};

/// A finite, nonempty real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("vector must have dimension >= 1".into()));
        }
        check_finite(&coords)?;
        Ok(Self(coords))
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d >= 1, "vector must have dimension >= 1");
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

/// A binary label in `{-1, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_sign(s: f64) -> Self {
        if s > 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    pub fn from_i64(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::InvalidData(format!("label must be -1 or 1, got {other}"))),
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// `{-1, +1} -> {0, 1}`.
    pub fn as_binary(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => 0.0,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub x: Vector,
    pub y: Label,
}

impl LabeledExample {
    pub fn new(x: Vector, y: Label) -> Self {
        Self { x, y }
    }

    pub fn from_parts(x: Vec<f64>, y: Label) -> Result<Self> {
        Ok(Self { x: Vector::new(x)?, y })
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }
}

/// `x ↦ sign(⟨w, x⟩ + bias)` with `w ≠ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    w: Vector,
    #[serde(default)]
    bias: f64,
}

impl Halfspace {
    pub fn new(w: Vector, bias: f64) -> Result<Self> {
        if w.iter().all(|&c| c == 0.0) {
            return Err(Error::InvalidHypothesis("weight vector is zero".into()));
        }
        if !bias.is_finite() {
            return Err(Error::InvalidHypothesis(format!("bias is not finite ({bias})")));
        }
        Ok(Self { w, bias })
    }

    pub fn homogeneous(w: Vec<f64>) -> Result<Self> {
        Self::new(Vector::new(w)?, 0.0)
    }

    pub fn weights(&self) -> &Vector {
        &self.w
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn dim(&self) -> usize {
        self.w.dim()
    }

    /// `⟨w, x⟩ + bias`.
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        Label::from_sign(self.score(x))
    }

    pub fn negated(&self) -> Self {
        Self {
            w: Vector(self.w.iter().map(|c| -c).collect()),
            bias: -self.bias,
        }
    }

    /// Positive rescaling; `factor` must be > 0.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite());
        Self {
            w: Vector(self.w.iter().map(|c| c * factor).collect()),
            bias: self.bias * factor,
        }
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
