//! Descending flows of `I`.
//!
//! [`descent_step`] and [`integrate_flow`] follow the raw field `−(u − A(u))`
//! with Armijo backtracking. [`cutoff`] and [`deformation`] build the
//! normalized, cut-off flow `η` used to push sublevel sets down past a
//! critical-point-free energy band.

pub mod cutoff;
pub mod deformation;

use std::fmt::Write as _;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{h_inner, norm_h, Field};

pub use cutoff::{cutoff_g, CutoffSpec};
pub use deformation::{
    band_samples, deformation_eta, estimate_beta, ray_point, BetaEstimate, DeformationVariant,
    EtaOptions, EtaOutcome, EtaStop,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    pub dt: f64,
    pub backtrack: f64,
    pub residual_tol: f64,
    pub max_steps: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            dt: 0.5,
            backtrack: 0.5,
            residual_tol: 1e-8,
            max_steps: 200_000,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::invalid("dt", "must be in (0, 1]"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid("backtrack", "must be in (0, 1)"));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::invalid("residual_tol", "must be > 0"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be ≥ 1"));
        }
        Ok(())
    }
}

/// The map `u ↦ B(u)` whose fixed points are the critical points. The
/// default is the solution operator `A` itself.
pub trait PseudoGradient: Sync {
    fn apply(&self, m: &EnergyModel, u: &Field) -> Result<Field>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SolutionOperator;

impl PseudoGradient for SolutionOperator {
    fn apply(&self, m: &EnergyModel, u: &Field) -> Result<Field> {
        m.operator_a(u)
    }
}

/// `u − dt·(u − A(u))`, no safeguards.
pub fn euler_step(m: &EnergyModel, u: &Field, dt: f64) -> Result<Field> {
    let a = m.operator_a(u)?;
    Ok(Field::combine(1.0 - dt, u, dt, &a))
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub field: Field,
    /// Step actually taken (0 when stagnated).
    pub dt: f64,
    pub energy_before: f64,
    pub energy: f64,
    /// `‖u − A(u)‖_H` at the starting point.
    pub residual: f64,
    pub stagnated: bool,
}

const MIN_DT: f64 = 1e-12;

/// Energy comparisons tolerate this many ulps of `|I|`.
pub(crate) fn rounding_slack(energy: f64) -> f64 {
    4.0 * f64::EPSILON * energy.abs()
}

/// One Euler step of `u' = −(u − A(u))` with Armijo backtracking on
/// `I(u′) ≤ I(u) − (dt/4)‖u − A(u)‖²`.
pub fn descent_step(m: &EnergyModel, u: &Field, fp: &FlowParams) -> Result<StepOutcome> {
    let a = m.operator_a(u)?;
    let grad = u.sub(&a);
    let residual = norm_h(&grad);
    let e0 = m.energy(u)?;
    let mut dt = fp.dt;
    while dt >= MIN_DT {
        let mut next = u.clone();
        next.axpy(-dt, &grad);
        if let Ok(e1) = m.energy(&next) {
            if e1 <= e0 - 0.25 * dt * residual * residual + rounding_slack(e0) {
                return Ok(StepOutcome {
                    field: next,
                    dt,
                    energy_before: e0,
                    energy: e1,
                    residual,
                    stagnated: false,
                });
            }
        }
        dt *= fp.backtrack;
    }
    Ok(StepOutcome {
        field: u.clone(),
        dt: 0.0,
        energy_before: e0,
        energy: e0,
        residual,
        stagnated: true,
    })
}

/// H-orthonormal basis of the span of `vectors` (near-dependent ones are
/// dropped).
pub(crate) fn h_orthonormalize(vectors: &[Field]) -> Vec<Field> {
    let mut basis: Vec<Field> = Vec::new();
    for v in vectors {
        let scale = norm_h(v);
        let mut w = v.clone();
        for b in &basis {
            w.axpy(-h_inner(&w, b), b);
        }
        let n = norm_h(&w);
        if n > 1e-8 * scale {
            basis.push(w.scaled(1.0 / n));
        }
    }
    basis
}

/// Armijo step along the H-gradient with its components on the
/// H-orthonormal `frame` removed. Returns `u` unchanged on stagnation.
pub(crate) fn normal_step(
    m: &EnergyModel,
    u: &Field,
    e0: f64,
    frame: &[Field],
    fp: &FlowParams,
) -> Result<Field> {
    let mut g = m.gradient_h(u)?;
    for b in frame {
        g.axpy(-h_inner(&g, b), b);
    }
    let slope = h_inner(&g, &g);
    let mut dt = fp.dt;
    while dt >= MIN_DT {
        let mut next = u.clone();
        next.axpy(-dt, &g);
        if let Ok(e1) = m.energy(&next) {
            if e1 <= e0 - 0.25 * dt * slope + rounding_slack(e0) {
                return Ok(next);
            }
        }
        dt *= fp.backtrack;
    }
    Ok(u.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Converged,
    Diverged,
    Stagnated,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub energy: f64,
    pub residual: f64,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct FlowRun {
    pub field: Field,
    pub status: FlowStatus,
    pub trace: Vec<TraceRow>,
}

impl FlowRun {
    pub fn steps(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }
}

pub const DIVERGENCE_NORM: f64 = 1e6;

/// Iterates [`descent_step`] until the residual drops to `fp.residual_tol`.
/// Row `k` of the trace holds the state after `k` steps and the step size
/// that produced it.
pub fn integrate_flow(m: &EnergyModel, u0: &Field, fp: &FlowParams) -> Result<FlowRun> {
    fp.validate()?;
    let mut u = u0.clone();
    let mut trace = Vec::new();
    let mut last_dt = 0.0;
    for step in 0..=fp.max_steps {
        if norm_h(&u) > DIVERGENCE_NORM || !u.is_finite() {
            return Ok(FlowRun {
                field: u,
                status: FlowStatus::Diverged,
                trace,
            });
        }
        let outcome = match descent_step(m, &u, fp) {
            Ok(o) => o,
            Err(Error::NonFinite(_)) => {
                return Ok(FlowRun {
                    field: u,
                    status: FlowStatus::Diverged,
                    trace,
                })
            }
            Err(e) => return Err(e),
        };
        trace.push(TraceRow {
            step,
            energy: outcome.energy_before,
            residual: outcome.residual,
            dt: last_dt,
        });
        let status = if outcome.residual <= fp.residual_tol {
            Some(FlowStatus::Converged)
        } else if outcome.stagnated {
            Some(FlowStatus::Stagnated)
        } else if step == fp.max_steps {
            Some(FlowStatus::BudgetExhausted)
        } else {
            None
        };
        if let Some(status) = status {
            return Ok(FlowRun {
                field: u,
                status,
                trace,
            });
        }
        last_dt = outcome.dt;
        u = outcome.field;
    }
    unreachable!("loop returns at the step budget")
}

/// `step,energy,residual,dt` rows.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("step,energy,residual,dt\n");
    for r in trace {
        writeln!(out, "{},{:e},{:e},{:e}", r.step, r.energy, r.residual, r.dt).unwrap();
    }
    out
}
