//! Uniform grids on the unit interval and unit square with homogeneous
//! Dirichlet data, the finite-difference Laplacian `L_h`, and the discrete
//! inner products
//!
//! ```text
//! (u, v)_H := h^d · uᵀ L_h v      (u, v)_2 := h^d · Σ uᵢ vᵢ      |u|_p^p := h^d · Σ |uᵢ|^p
//! ```
//!
//! Two-dimensional fields are stored row-major with the `x` index fastest:
//! node `(i, j)` lives at `j * n + i` and sits at `((i + 1) h, (j + 1) h)`.

mod eigen;
pub mod io;
mod poisson;

use std::fmt;

pub use eigen::{eigenpairs, EigenPair};
pub use poisson::{solve_poisson, DirectPoisson};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::invalid("dimension", "must be 1 or 2"));
        }
        if n < 3 {
            return Err(Error::invalid("n", "must be ≥ 3"));
        }
        Ok(Grid { dim, n })
    }

    pub fn line(n: usize) -> Result<Self> {
        Grid::new(1, n)
    }

    pub fn square(n: usize) -> Result<Self> {
        Grid::new(2, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of interior nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `1/h = n + 1`, an exact integer in floating point.
    pub fn inv_h(&self) -> f64 {
        (self.n + 1) as f64
    }

    pub fn h(&self) -> f64 {
        1.0 / self.inv_h()
    }

    /// Quadrature weight `h^d`.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.inv_h().powi(self.dim as i32)
    }

    /// Physical coordinates of a node; `y` is zero in one dimension.
    pub fn coords(&self, index: usize) -> (f64, f64) {
        let h = self.h();
        match self.dim {
            1 => ((index + 1) as f64 * h, 0.0),
            _ => {
                let (i, j) = (index % self.n, index / self.n);
                ((i + 1) as f64 * h, (j + 1) as f64 * h)
            }
        }
    }

    /// Index of the node closest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> usize {
        let snap = |t: f64| -> usize {
            let k = (t * self.inv_h()).round() as i64 - 1;
            k.clamp(0, self.n as i64 - 1) as usize
        };
        match self.dim {
            1 => snap(x),
            _ => snap(y) * self.n + snap(x),
        }
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(*self, *other))
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} n={}", self.dim, self.n)
    }
}

/// Node values of a discrete function on the interior of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} entries, got {}", grid.len(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        Ok(Field { grid, values })
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &Field) {
        assert_eq!(self.grid, x.grid, "axpy on mismatched grids");
        for (s, &xv) in self.values.iter_mut().zip(&x.values) {
            *s += a * xv;
        }
    }

    /// `a * x + b * y`.
    pub fn combine(a: f64, x: &Field, b: f64, y: &Field) -> Field {
        assert_eq!(x.grid, y.grid, "combine on mismatched grids");
        let values = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(&xv, &yv)| a * xv + b * yv)
            .collect();
        Field::from_raw(x.grid, values)
    }

    pub fn sub(&self, other: &Field) -> Field {
        Field::combine(1.0, self, -1.0, other)
    }

    pub fn add(&self, other: &Field) -> Field {
        Field::combine(1.0, self, 1.0, other)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Unweighted Euclidean dot product of the node vectors.
    pub(crate) fn dot(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// `L_h u`: the 3-point (1D) or 5-point (2D) stencil of `-Δ` scaled by `1/h²`.
pub fn laplacian(u: &Field) -> Field {
    let grid = u.grid;
    let mut out = vec![0.0; grid.len()];
    apply_stencil(grid, &u.values, &mut out);
    Field::from_raw(grid, out)
}

/// [`laplacian`] with an explicit grid check.
pub fn laplacian_apply(grid: &Grid, u: &Field) -> Result<Field> {
    grid.ensure_same(&u.grid)?;
    Ok(laplacian(u))
}

pub(crate) fn apply_stencil(grid: Grid, u: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let s = grid.inv_h() * grid.inv_h();
    match grid.dim {
        1 => {
            for i in 0..n {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                out[i] = s * (2.0 * u[i] - left - right);
            }
        }
        _ => {
            for j in 0..n {
                for i in 0..n {
                    let k = j * n + i;
                    let mut acc = 4.0 * u[k];
                    if i > 0 {
                        acc -= u[k - 1];
                    }
                    if i + 1 < n {
                        acc -= u[k + 1];
                    }
                    if j > 0 {
                        acc -= u[k - n];
                    }
                    if j + 1 < n {
                        acc -= u[k + n];
                    }
                    out[k] = s * acc;
                }
            }
        }
    }
}

/// `(u, v)_2 = h^d Σ uᵢ vᵢ`.
pub fn inner_l2(u: &Field, v: &Field) -> Result<f64> {
    u.grid.ensure_same(&v.grid)?;
    Ok(u.grid.cell_volume() * u.dot(v))
}

/// `(u, v)_H = h^d uᵀ L_h v`, the discrete `∫ ∇u·∇v`.
pub fn inner_h(u: &Field, v: &Field) -> Result<f64> {
    u.grid.ensure_same(&v.grid)?;
    Ok(h_inner(u, v))
}

pub(crate) fn h_inner(u: &Field, v: &Field) -> f64 {
    debug_assert_eq!(u.grid, v.grid);
    let lv = laplacian(v);
    u.grid.cell_volume() * u.dot(&lv)
}

pub fn norm_h(u: &Field) -> f64 {
    h_inner(u, u).max(0.0).sqrt()
}

pub fn norm_l2(u: &Field) -> f64 {
    (u.grid.cell_volume() * u.dot(u)).sqrt()
}

/// Discrete `L^p` norm; `p < 1` is rejected.
pub fn norm_lp(u: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::invalid("p", "must be ≥ 1"));
    }
    let sum: f64 = u.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((u.grid.cell_volume() * sum).powf(1.0 / p))
}
