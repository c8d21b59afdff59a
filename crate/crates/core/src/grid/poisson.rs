use std::f64::consts::PI;

use super::{apply_stencil, Field, Grid};
use crate::error::{Error, Result};

/// Conjugate-gradient solve of `L_h v = rhs` to `‖L_h v − rhs‖₂ ≤ tol·‖rhs‖₂`.
///
/// The iteration cap is `10·m`; running into it is an error.
pub fn solve_poisson(grid: &Grid, rhs: &Field, tol: f64) -> Result<Field> {
    grid.ensure_same(&rhs.grid())?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    let m = grid.len();
    let b = rhs.values();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; m];
    if b_norm == 0.0 {
        return Ok(Field::from_raw(*grid, x));
    }
    let target = tol * b_norm;
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; m];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let cap = 10 * m;
    for _ in 0..cap {
        if rr.sqrt() <= target {
            return Ok(Field::from_raw(*grid, x));
        }
        apply_stencil(*grid, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rr / pap;
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_next: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_next / rr;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
        rr = rr_next;
    }
    // The recursive residual drifts; confirm against the true one before failing.
    apply_stencil(*grid, &x, &mut ap);
    let true_res = ap
        .iter()
        .zip(b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if true_res <= target {
        return Ok(Field::from_raw(*grid, x));
    }
    Err(Error::NoConvergence {
        solver: "conjugate gradient",
        iterations: cap,
        residual: true_res / b_norm,
    })
}

/// Direct solver for `L_h v = rhs`, exact up to rounding.
///
/// One dimension uses a precomputed tridiagonal (Thomas) factorization; two
/// dimensions diagonalize `L_h` with the discrete sine transform, applied as
/// dense `n × n` products on both sides of the node matrix.
#[derive(Clone, Debug)]
pub struct DirectPoisson {
    grid: Grid,
    inner: Inner,
}

#[derive(Clone, Debug)]
enum Inner {
    Line {
        /// Modified super-diagonal of the unit-scaled tridiagonal matrix.
        upper: Vec<f64>,
        /// Reciprocal pivots.
        inv_pivot: Vec<f64>,
    },
    Square {
        sine: Vec<f64>,
        /// `1 / (s (μ_a + μ_b))` for each transformed entry.
        inv_eig: Vec<f64>,
    },
}

impl DirectPoisson {
    pub fn new(grid: Grid) -> Self {
        let n = grid.n();
        let inner = match grid.dim() {
            1 => {
                let mut upper = vec![0.0; n];
                let mut inv_pivot = vec![0.0; n];
                let mut prev = 0.0;
                for i in 0..n {
                    let pivot = 2.0 + prev;
                    inv_pivot[i] = 1.0 / pivot;
                    upper[i] = -inv_pivot[i];
                    prev = upper[i];
                }
                Inner::Line { upper, inv_pivot }
            }
            _ => {
                let np1 = grid.inv_h();
                let mut sine = vec![0.0; n * n];
                for a in 0..n {
                    for b in 0..n {
                        sine[a * n + b] = (PI * ((a + 1) * (b + 1)) as f64 / np1).sin();
                    }
                }
                let s = np1 * np1;
                let mu: Vec<f64> = (1..=n)
                    .map(|k| 2.0 - 2.0 * (PI * k as f64 / np1).cos())
                    .collect();
                let c2 = (2.0 / np1).powi(2);
                let mut inv_eig = vec![0.0; n * n];
                for a in 0..n {
                    for b in 0..n {
                        // Fold the inverse-transform normalization in here.
                        inv_eig[a * n + b] = c2 / (s * (mu[a] + mu[b]));
                    }
                }
                Inner::Square { sine, inv_eig }
            }
        };
        DirectPoisson { grid, inner }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        self.grid.ensure_same(&rhs.grid())?;
        Ok(self.solve_unchecked(rhs))
    }

    pub(crate) fn solve_unchecked(&self, rhs: &Field) -> Field {
        let n = self.grid.n();
        let b = rhs.values();
        let values = match &self.inner {
            Inner::Line { upper, inv_pivot } => {
                let s = self.grid.inv_h() * self.grid.inv_h();
                let mut y = vec![0.0; n];
                let mut prev = 0.0;
                for i in 0..n {
                    y[i] = (b[i] / s + prev) * inv_pivot[i];
                    prev = y[i];
                }
                for i in (0..n - 1).rev() {
                    y[i] -= upper[i] * y[i + 1];
                }
                y
            }
            Inner::Square { sine, inv_eig } => {
                let t = mat_mul(sine, b, n);
                let mut hat = mat_mul(&t, sine, n);
                for (h, w) in hat.iter_mut().zip(inv_eig) {
                    *h *= w;
                }
                let t = mat_mul(sine, &hat, n);
                mat_mul(&t, sine, n)
            }
        };
        Field::from_raw(self.grid, values)
    }
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            let brow = &b[k * n..(k + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}
