use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{laplacian, norm_h, DirectPoisson, Field, Grid};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EigenPair {
    pub value: f64,
    /// Normalized to `norm_h = 1`.
    pub vector: Field,
}

const MAX_PAIRS: usize = 4;
const MAX_ITERATIONS: usize = 20_000;
const RESIDUAL_TARGET: f64 = 1e-10;
const RESIDUAL_ACCEPT: f64 = 1e-8;

/// The `k` smallest Dirichlet eigenpairs of `L_h`, ascending, by inverse
/// iteration with deflation.
///
/// `e₁` is sign-fixed to be strictly positive. On the square the second
/// eigenvalue is double; the returned `e₂` is the member of that eigenspace
/// closest to `sin(2πx) sin(πy)`, signed positive at the node nearest
/// `(¼, ½)`.
pub fn eigenpairs(grid: &Grid, k: usize) -> Result<Vec<EigenPair>> {
    if k == 0 || k > MAX_PAIRS {
        return Err(Error::invalid("k", format!("must be in 1..={MAX_PAIRS}")));
    }
    let solver = DirectPoisson::new(*grid);
    // One extra pair on the square so a λ₂ = λ₃ cluster is seen whole.
    let want = if grid.dim() == 2 && k >= 2 { k + 1 } else { k }.min(grid.len());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let mut basis: Vec<Field> = Vec::with_capacity(want);
    let mut values = Vec::with_capacity(want);
    for _ in 0..want {
        let (lambda, v) = inverse_iteration(&solver, &basis, &mut rng)?;
        values.push(lambda);
        basis.push(v);
    }

    if grid.dim() == 2 && want >= 3 && (values[1] - values[2]).abs() <= 1e-8 * values[1] {
        let template = Field::from_fn(*grid, |x, y| (2.0 * PI * x).sin() * (PI * y).sin());
        let (a, b) = (template.dot(&basis[1]), template.dot(&basis[2]));
        let e2 = Field::combine(a, &basis[1], b, &basis[2]);
        let e3 = Field::combine(b, &basis[1], -a, &basis[2]);
        basis[1] = e2;
        basis[2] = e3;
    }

    let mut pairs = Vec::with_capacity(k);
    for (idx, (value, v)) in values.into_iter().zip(basis).take(k).enumerate() {
        let mut v = v.scaled(1.0 / norm_h(&v));
        let anchor = match (idx, grid.dim()) {
            (0, _) => None,
            (1, 2) => Some(grid.nearest(0.25, 0.5)),
            (2, 2) => Some(grid.nearest(0.5, 0.25)),
            _ => None,
        };
        let flip = match anchor {
            Some(node) => v.values()[node] < 0.0,
            None if idx == 0 => v.values().iter().sum::<f64>() < 0.0,
            None => leading_component(&v) < 0.0,
        };
        if flip {
            v = v.scaled(-1.0);
        }
        pairs.push(EigenPair { value, vector: v });
    }
    Ok(pairs)
}

fn leading_component(v: &Field) -> f64 {
    let mut best = 0.0f64;
    for &x in v.values() {
        if x.abs() > best.abs() * (1.0 + 1e-9) {
            best = x;
        }
    }
    best
}

fn deflate(v: &mut Field, basis: &[Field]) {
    // Gram–Schmidt, twice.
    for _ in 0..2 {
        for b in basis {
            let c = v.dot(b) / b.dot(b);
            v.axpy(-c, b);
        }
    }
}

fn inverse_iteration(
    solver: &DirectPoisson,
    basis: &[Field],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Field)> {
    let grid = solver.grid();
    let mut v = Field::from_raw(
        grid,
        (0..grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    );
    deflate(&mut v, basis);
    let mut last_residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        v = solver.solve_unchecked(&v);
        deflate(&mut v, basis);
        let norm = v.dot(&v).sqrt();
        v = v.scaled(1.0 / norm);
        let lv = laplacian(&v);
        let lambda = v.dot(&lv);
        // Residual measured for the H-normalized vector.
        let scale = 1.0 / norm_h(&v);
        let res = lv
            .values()
            .iter()
            .zip(v.values())
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
            * scale;
        last_residual = res;
        if res <= RESIDUAL_TARGET {
            return Ok((lambda, v));
        }
    }
    if last_residual <= RESIDUAL_ACCEPT {
        let lambda = v.dot(&laplacian(&v));
        return Ok((lambda, v));
    }
    Err(Error::NoConvergence {
        solver: "inverse iteration",
        iterations: MAX_ITERATIONS,
        residual: last_residual,
    })
}
