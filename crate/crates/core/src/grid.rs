//! Uniform grids on `I = [-1, 1]` and on the fixed rectangle `[-1, 1] x [0, 1]`.

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 33;
pub const MIN_ETA_NODES: usize = 5;

/// Uniform grid on `[-1, 1]` with an odd node count so that `x = 0` is a node.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        if n % 2 == 0 {
            return Err(Error::EvenGrid(n));
        }
        if n < MIN_NODES {
            return Err(Error::GridTooSmall {
                got: n,
                min: MIN_NODES,
            });
        }
        let h = 2.0 / (n - 1) as f64;
        let mid = (n - 1) / 2;
        let mut nodes = vec![0.0; n];
        // Left half by arithmetic, right half by exact negation.
        for (i, x) in nodes.iter_mut().enumerate().take(mid) {
            *x = -1.0 + i as f64 * h;
        }
        nodes[0] = -1.0;
        nodes[mid] = 0.0;
        for i in 0..mid {
            nodes[n - 1 - i] = -nodes[i];
        }
        Ok(Grid1D { n, h, nodes })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Index of the node `x = 0`.
    pub fn mid(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Number of interior nodes (the unknowns of the membrane problem).
    pub fn interior(&self) -> usize {
        self.n - 2
    }

    /// Evaluate `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// Composite trapezoidal rule over all nodes.
    pub fn trapezoid(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        let inner: f64 = values[1..self.n - 1].iter().sum();
        self.h * (inner + 0.5 * (values[0] + values[self.n - 1]))
    }
}

/// Tensor grid on the transformed rectangle; `eta = 0` is the ground plate,
/// `eta = 1` the membrane.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub base: Grid1D,
    m: usize,
    k: f64,
    eta: Vec<f64>,
}

impl Grid2D {
    pub fn new(base: Grid1D, m: usize) -> Result<Self> {
        if m < MIN_ETA_NODES {
            return Err(Error::GridTooSmall {
                got: m,
                min: MIN_ETA_NODES,
            });
        }
        let k = 1.0 / (m - 1) as f64;
        let mut eta: Vec<f64> = (0..m).map(|j| j as f64 * k).collect();
        eta[m - 1] = 1.0;
        Ok(Grid2D { base, m, k, eta })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Lexicographic index with `eta` running fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    pub fn len(&self) -> usize {
        self.base.n() * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// True when `v[i] == v[n-1-i]` bitwise for all `i`.
pub fn is_even(v: &[f64]) -> bool {
    let n = v.len();
    (0..n / 2).all(|i| v[i].to_bits() == v[n - 1 - i].to_bits())
}

/// Replace `v` by its even part `(v + Pv)/2`, `P` the mirror permutation.
pub fn symmetrize(v: &mut [f64]) {
    let n = v.len();
    for i in 0..n / 2 {
        let s = 0.5 * (v[i] + v[n - 1 - i]);
        v[i] = s;
        v[n - 1 - i] = s;
    }
}
