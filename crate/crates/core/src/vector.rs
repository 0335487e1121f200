//! Dense vector helpers over `&[f64]` and the stacked state used by the
//! third-order system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

pub(crate) fn check_dim(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: v.len() });
    }
    Ok(())
}

/// A point of H³: position, velocity and acceleration of the trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleVec {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v3: Vec<f64>,
}

impl TripleVec {
    pub fn new(v1: Vec<f64>, v2: Vec<f64>, v3: Vec<f64>) -> Result<Self> {
        if v1.is_empty() {
            return Err(Error::InvalidArgument("TripleVec needs dimension >= 1".into()));
        }
        check_dim(v1.len(), &v2)?;
        check_dim(v1.len(), &v3)?;
        Ok(Self { v1, v2, v3 })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            v1: vec![0.0; dim],
            v2: vec![0.0; dim],
            v3: vec![0.0; dim],
        }
    }

    /// Position `w` with zero velocity and acceleration.
    pub fn at_rest(w: Vec<f64>) -> Self {
        let n = w.len();
        Self {
            v1: w,
            v2: vec![0.0; n],
            v3: vec![0.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.v1.len()
    }

    pub fn norm(&self) -> f64 {
        (norm_sq(&self.v1) + norm_sq(&self.v2) + norm_sq(&self.v3)).sqrt()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.dim());
        out.extend_from_slice(&self.v1);
        out.extend_from_slice(&self.v2);
        out.extend_from_slice(&self.v3);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        debug_assert_eq!(flat.len() % 3, 0);
        let n = flat.len() / 3;
        Self {
            v1: flat[..n].to_vec(),
            v2: flat[n..2 * n].to_vec(),
            v3: flat[2 * n..].to_vec(),
        }
    }

    pub fn sub(&self, other: &TripleVec) -> TripleVec {
        TripleVec {
            v1: sub(&self.v1, &other.v1),
            v2: sub(&self.v2, &other.v2),
            v3: sub(&self.v3, &other.v3),
        }
    }
}
