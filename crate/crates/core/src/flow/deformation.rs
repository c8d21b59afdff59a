//! The deformation `η(t, u)`: the normalized flow `dτ/ds = −g(τ) V(τ)`,
//! `V = (τ − B(τ))/‖τ − B(τ)‖`, run for time `(16ε/β)·t`.

use rand::Rng;

use super::cutoff::{ramp, CutoffSpec};
use super::{rounding_slack, PseudoGradient, SolutionOperator};
use crate::cones::{distance_to_w, in_w_radius, ConeParams};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::grid::{norm_h, Field};
use crate::sampling::{random_unit_field, substream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DeformationVariant {
    /// Frozen only outside the energy band (and near known critical points).
    #[default]
    Standard,
    /// Additionally frozen on `W_{ε₁}`, ramping up to full speed at `ε₂`.
    TwoRadius,
}

#[derive(Clone, Copy)]
pub struct EtaOptions<'a> {
    pub variant: DeformationVariant,
    /// Residual floor on the band; sets the horizon `16ε/β`.
    pub beta: f64,
    pub max_substeps: usize,
    pub pseudo_gradient: &'a dyn PseudoGradient,
}

impl EtaOptions<'static> {
    pub fn new(beta: f64) -> Self {
        EtaOptions {
            variant: DeformationVariant::Standard,
            beta,
            max_substeps: 100_000,
            pseudo_gradient: &SolutionOperator,
        }
    }
}

impl<'a> EtaOptions<'a> {
    pub fn with_variant(mut self, variant: DeformationVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_pseudo_gradient<'b>(self, b: &'b dyn PseudoGradient) -> EtaOptions<'b> {
        EtaOptions {
            variant: self.variant,
            beta: self.beta,
            max_substeps: self.max_substeps,
            pseudo_gradient: b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaStop {
    HorizonReached,
    /// The cutoff vanished; the trajectory is stationary from here on.
    Frozen,
    /// Step budget ran out with `I ≤ c − ε` already reached.
    TargetReached,
    BudgetExhausted,
    /// Backtracking shrank the substep below resolution.
    Underflow,
}

#[derive(Clone, Debug)]
pub struct EtaOutcome {
    pub field: Field,
    pub horizon: f64,
    /// Flow time actually integrated.
    pub time: f64,
    pub substeps: usize,
    pub stop: EtaStop,
}

fn cutoff_value(
    tau: &Field,
    level: f64,
    cs: &CutoffSpec,
    cp: &ConeParams,
    variant: DeformationVariant,
) -> Result<f64> {
    let mut g = cs.energy_ramp(level);
    if g > 0.0 && !cs.known_critical.is_empty() {
        g *= cs.distance_ramp(cs.critical_distance(tau));
    }
    if g > 0.0 && variant == DeformationVariant::TwoRadius {
        g *= ramp(distance_to_w(tau, cp.mode())?, cp.eps1(), cp.eps2());
    }
    Ok(g)
}

pub fn deformation_eta(
    m: &EnergyModel,
    u: &Field,
    cs: &CutoffSpec,
    cp: &ConeParams,
    t: f64,
    opts: &EtaOptions<'_>,
) -> Result<EtaOutcome> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid("t", "must be in [0, 1]"));
    }
    if !(opts.beta > 0.0) {
        return Err(Error::invalid("beta", "must be > 0"));
    }
    let horizon = 16.0 * cs.eps / opts.beta * t;
    let mut tau = u.clone();
    let mut s = 0.0;
    let mut substeps = 0;
    let finish = |tau: Field, s: f64, substeps: usize, stop: EtaStop| EtaOutcome {
        field: tau,
        horizon,
        time: s,
        substeps,
        stop,
    };
    loop {
        if s >= horizon {
            return Ok(finish(tau, s, substeps, EtaStop::HorizonReached));
        }
        let level = m.energy(&tau)?;
        if substeps >= opts.max_substeps {
            let stop = if level <= cs.c - cs.eps {
                EtaStop::TargetReached
            } else {
                EtaStop::BudgetExhausted
            };
            return Ok(finish(tau, s, substeps, stop));
        }
        let g = cutoff_value(&tau, level, cs, cp, opts.variant)?;
        if g == 0.0 {
            return Ok(finish(tau, s, substeps, EtaStop::Frozen));
        }
        let r = tau.sub(&opts.pseudo_gradient.apply(m, &tau)?);
        let rn = norm_h(&r);
        if rn == 0.0 {
            return Ok(finish(tau, s, substeps, EtaStop::Frozen));
        }
        // Step fraction g·ds/‖r‖ stays ≤ 1: τ' lies on the segment [τ, B(τ)].
        let mut ds = (horizon - s).min(rn / g);
        let max_drop = 0.25 * (cs.eps_prime - cs.eps);
        let next = loop {
            let mut cand = tau.clone();
            cand.axpy(-g * ds / rn, &r);
            if let Ok(e) = m.energy(&cand) {
                if e <= level + rounding_slack(level) && level - e <= max_drop {
                    break cand;
                }
            }
            ds *= 0.5;
            if ds < 1e-14 * horizon {
                return Ok(finish(tau, s, substeps, EtaStop::Underflow));
            }
        };
        tau = next;
        s += ds;
        substeps += 1;
    }
}

/// A point `t·v`, `t > 0`, on the descending branch of the ray energy with
/// `I(t·v) = target`; `None` if the ray never climbs to `target`.
pub fn ray_point(m: &EnergyModel, v: &Field, target: f64) -> Result<Option<Field>> {
    let energy_at = |t: f64| -> Result<f64> {
        match m.energy(&v.scaled(t)) {
            Err(Error::NonFinite(_)) => Ok(f64::NEG_INFINITY),
            other => other,
        }
    };
    let grid_t = |k: i32| 1e-3 * 2f64.powf(k as f64 / 4.0);
    let mut seen_above = false;
    for k in 0..240 {
        let t = grid_t(k);
        let e = energy_at(t)?;
        if e >= target {
            seen_above = true;
        } else if seen_above {
            let (mut lo, mut hi) = (grid_t(k - 1), t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if energy_at(mid)? >= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            return Ok(Some(v.scaled(0.5 * (lo + hi))));
        }
    }
    Ok(None)
}

/// Up to `count` ray points with energies drawn uniformly from
/// `[lo, hi]`, skipping those within `exclude` of the cones.
/// Attempt `i` uses substream `(seed, i)`; at most `20·count` attempts.
pub fn band_samples(
    m: &EnergyModel,
    levels: (f64, f64),
    exclude: Option<(f64, &ConeParams)>,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Field>> {
    let grid = m.grid();
    let mut found = Vec::with_capacity(count);
    let mut next = 0usize;
    while found.len() < count && next < 20 * count {
        let batch = count - found.len();
        let start = next;
        let results = map_range(exec, batch, |j| -> Result<Option<Field>> {
            let mut rng = substream(seed, (start + j) as u64);
            let v = random_unit_field(grid, &mut rng);
            let target = levels.0 + (levels.1 - levels.0) * rng.random::<f64>();
            let Some(u) = ray_point(m, &v, target)? else {
                return Ok(None);
            };
            if let Some((radius, cp)) = exclude {
                if in_w_radius(&u, radius, cp.mode())? {
                    return Ok(None);
                }
            }
            Ok(Some(u))
        });
        next += batch;
        for r in results {
            if let Some(u) = r? {
                found.push(u);
            }
        }
    }
    Ok(found)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaEstimate {
    /// `max(raw_min, BETA_FLOOR)`, or the floor when nothing was sampled.
    pub beta: f64,
    pub raw_min: f64,
    pub samples: usize,
    pub floor_used: bool,
}

pub const BETA_FLOOR: f64 = 1e-6;
pub const BETA_SAMPLES: usize = 200;

/// Smallest residual over band samples outside `W_{ε₁}`.
pub fn estimate_beta(
    m: &EnergyModel,
    cs: &CutoffSpec,
    cp: &ConeParams,
    seed: u64,
    exec: Execution,
) -> Result<BetaEstimate> {
    let points = band_samples(
        m,
        (cs.c - cs.eps_prime, cs.c + cs.eps_prime),
        Some((cp.eps1(), cp)),
        BETA_SAMPLES,
        seed,
        exec,
    )?;
    let residuals = map_range(exec, points.len(), |i| m.residual(&points[i]));
    let mut raw_min = f64::INFINITY;
    for r in residuals {
        raw_min = raw_min.min(r?);
    }
    let floor_used = !(raw_min >= BETA_FLOOR);
    Ok(BetaEstimate {
        beta: if floor_used { BETA_FLOOR } else { raw_min },
        raw_min,
        samples: points.len(),
        floor_used,
    })
}
