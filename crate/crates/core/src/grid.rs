//! Functions on the circle `R/Z`, parametrized by `[0, 1)`.
//!
//! [`GridFunction`] stores node values on a uniform grid and evaluates
//! between nodes by circular piecewise-linear interpolation. Anything that
//! can be evaluated pointwise implements [`CircleFunction`], which is what
//! the operators take as potentials and observables.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Default number of grid nodes.
pub const DEFAULT_GRID: usize = 4096;

/// Reduces `x` to its representative in `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let y = x - x.floor();
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Distance on the circle of length one.
#[inline]
pub fn circle_dist(x: f64, y: f64) -> f64 {
    let d = wrap(x - y);
    d.min(1.0 - d)
}

/// Whether the unique shortest circle path between `x` and `y` crosses 0.
///
/// Antipodal pairs (two shortest paths) report `false`.
#[inline]
pub fn path_crosses_zero(x: f64, y: f64) -> bool {
    let (x, y) = (wrap(x), wrap(y));
    (x - y).abs() > 0.5
}

/// A real function on the circle.
pub trait CircleFunction: Send + Sync {
    fn eval(&self, x: f64) -> f64;
}

impl<F> CircleFunction for F
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Shared handle to a potential or observable.
pub type Potential = Arc<dyn CircleFunction>;

/// Locates `x` on an `n`-node grid: returns the left node and the
/// fractional offset towards the next node.
#[inline]
pub fn locate(x: f64, n: usize) -> (usize, f64) {
    let s = wrap(x) * n as f64;
    let i = s.floor();
    let frac = s - i;
    let i = i as usize;
    if i >= n {
        (0, 0.0)
    } else {
        (i, frac)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid function needs at least 2 nodes, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid value at node {i} is not finite"
            )));
        }
        Ok(Self { values })
    }

    /// Samples `f` at the nodes `i / n`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(i as f64 / n as f64)).collect();
        Self { values }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { values: vec![c; n] }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.values.len() as f64
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Piecewise-linear interpolation, exact at nodes.
    #[inline]
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.values.len();
        let (i, t) = locate(x, n);
        let j = if i + 1 == n { 0 } else { i + 1 };
        self.values[i] * (1.0 - t) + self.values[j] * t
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(self.len(), other.len()));
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lebesgue integral of the interpolant (the node average).
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Sup-norm distance to another grid function of the same size.
    pub fn sup_dist(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(self.len(), other.len()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

impl CircleFunction for GridFunction {
    fn eval(&self, x: f64) -> f64 {
        self.interpolate(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_distance_wraps() {
        assert!((circle_dist(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert!((circle_dist(0.2, 0.4) - 0.2).abs() < 1e-15);
        assert_eq!(circle_dist(0.3, 0.3), 0.0);
        assert!((circle_dist(0.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn crossing_detection() {
        assert!(path_crosses_zero(0.1, 0.9));
        assert!(!path_crosses_zero(0.2, 0.4));
        assert!(!path_crosses_zero(0.0, 0.5));
    }

    #[test]
    fn interpolation_exact_at_nodes_and_linear_between() {
        let g = GridFunction::from_fn(8, |x| (x * 8.0).powi(2));
        for i in 0..8 {
            assert_eq!(g.interpolate(g.node(i)), g.values()[i]);
        }
        // between nodes 2 and 3: values 4 and 9
        assert!((g.interpolate(2.5 / 8.0) - 6.5).abs() < 1e-12);
        // wraps from the last node to node 0
        assert!((g.interpolate(7.5 / 8.0) - 24.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_or_nonfinite() {
        assert!(GridFunction::new(vec![1.0]).is_err());
        assert!(GridFunction::new(vec![1.0, f64::NAN]).is_err());
    }
}
