//! Newton refinement of near-critical fields.
//!
//! The Jacobian of `u ↦ u − A(u)` is self-adjoint in the H-inner product, so
//! each Newton system is solved by MINRES on the symmetric operator
//! `L_h − f′(u)` preconditioned by `L_h⁻¹`. The preconditioned residual norm
//! is exactly the H-norm of the Newton residual.

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{laplacian, Field};

/// Solves `(L_h − diag(d)) x = b` with preconditioner `L_h⁻¹`.
pub(crate) fn minres(
    m: &EnergyModel,
    d: &[f64],
    b: &Field,
    rtol: f64,
    max_iterations: usize,
) -> Result<Field> {
    let grid = m.grid();
    let apply = |v: &Field| -> Field {
        let mut out = laplacian(v);
        for (o, (x, di)) in out.values_mut().iter_mut().zip(v.values().iter().zip(d)) {
            *o -= di * x;
        }
        out
    };
    let mut x = Field::zeros(grid);
    let mut r1 = b.clone();
    let mut y = m.solve(&r1)?;
    let beta1_sq = r1.dot(&y);
    if beta1_sq <= 0.0 {
        return Ok(x);
    }
    let beta1 = beta1_sq.sqrt();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = Field::zeros(grid);
    let mut w2 = Field::zeros(grid);
    let mut r2 = r1.clone();
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let v = y.scaled(1.0 / beta);
        y = apply(&v);
        if iterations >= 2 {
            y.axpy(-beta / oldb, &r1);
        }
        let alfa = v.dot(&y);
        y.axpy(-alfa / beta, &r2);
        r1 = r2;
        r2 = y;
        y = m.solve(&r2)?;
        oldb = beta;
        let beta_sq = r2.dot(&y);
        if beta_sq < 0.0 {
            return Err(Error::Solver("preconditioner lost definiteness".into()));
        }
        beta = beta_sq.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = std::mem::replace(&mut w2, w);
        let mut next = v;
        next.axpy(-oldeps, &w1);
        next.axpy(-delta, &w2);
        w = next.scaled(1.0 / gamma);
        x.axpy(phi, &w);

        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    Ok(x)
}

#[derive(Clone, Debug)]
pub struct PolishOutcome {
    pub field: Field,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

const MAX_NEWTON: usize = 40;

/// Newton iteration on `u − A(u) = 0` with residual backtracking, stopping
/// once `‖u − A(u)‖_H ≤ target`.
pub fn newton_polish(m: &EnergyModel, u0: &Field, target: f64) -> Result<PolishOutcome> {
    let nl = m.nonlinearity();
    let mut u = u0.clone();
    let mut residual = m.residual(&u)?;
    let mut iterations = 0;
    while residual > target && iterations < MAX_NEWTON {
        iterations += 1;
        let d: Vec<f64> = u.values().iter().map(|&v| nl.derivative(v)).collect();
        let rhs = laplacian(&u).sub(&m.nonlinear_term(&u));
        let step = minres(m, &d, &rhs, 1e-12, 4 * m.grid().len().max(50))?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = u.clone();
            cand.axpy(-t, &step);
            if let Ok(r) = m.residual(&cand) {
                if r < residual {
                    u = cand;
                    residual = r;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(PolishOutcome {
        converged: residual <= target,
        field: u,
        residual,
        iterations,
    })
}
