//! The cutoff `g: E → [0, 1]`, equal to 1 on the energy band `[c−ε, c+ε]`
//! away from known critical points and 0 outside `[c−ε′, c+ε′]` or within
//! `δ/4` of one.

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{norm_h, Field};

#[derive(Clone, Debug)]
pub struct CutoffSpec {
    pub c: f64,
    pub eps: f64,
    pub eps_prime: f64,
    pub delta: f64,
    /// Critical points found so far at this level.
    pub known_critical: Vec<Field>,
}

impl CutoffSpec {
    pub fn new(c: f64, eps: f64, eps_prime: f64, delta: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::invalid("c", "must be finite"));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("eps", "must be > 0"));
        }
        if !(eps_prime > eps) || !eps_prime.is_finite() {
            return Err(Error::invalid("eps_prime", "must exceed eps"));
        }
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", "must be > 0"));
        }
        Ok(CutoffSpec {
            c,
            eps,
            eps_prime,
            delta,
            known_critical: Vec::new(),
        })
    }

    pub fn with_known_critical(mut self, fields: Vec<Field>) -> Self {
        self.known_critical = fields;
        self
    }

    /// Piecewise-linear in `I`: 0 outside `[c−ε′, c+ε′]`, 1 on `[c−ε, c+ε]`.
    pub fn energy_ramp(&self, level: f64) -> f64 {
        let off = (level - self.c).abs();
        if off <= self.eps {
            1.0
        } else if off >= self.eps_prime {
            0.0
        } else {
            (self.eps_prime - off) / (self.eps_prime - self.eps)
        }
    }

    /// Piecewise-linear in the distance: 0 below `δ/4`, 1 above `δ/2`.
    pub fn distance_ramp(&self, distance: f64) -> f64 {
        ramp(distance, 0.25 * self.delta, 0.5 * self.delta)
    }

    /// Slopes of the two ramps, bounding `|g(u) − g(v)|` by
    /// `K_I·|I(u) − I(v)| + K_d·‖u − v‖`.
    pub fn lipschitz_constants(&self) -> (f64, f64) {
        (1.0 / (self.eps_prime - self.eps), 4.0 / self.delta)
    }

    /// Smallest H-distance to a known critical point (∞ if none).
    pub fn critical_distance(&self, u: &Field) -> f64 {
        self.known_critical
            .iter()
            .map(|k| norm_h(&u.sub(k)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn in_band(&self, level: f64) -> bool {
        (level - self.c).abs() < self.eps_prime
    }
}

/// 0 at or below `lo`, 1 at or above `hi`, linear between.
pub(crate) fn ramp(x: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        0.0
    } else if x >= hi {
        1.0
    } else {
        (x - lo) / (hi - lo)
    }
}

pub fn cutoff_g(m: &EnergyModel, u: &Field, cs: &CutoffSpec) -> Result<f64> {
    let e = cs.energy_ramp(m.energy(u)?);
    if e == 0.0 || cs.known_critical.is_empty() {
        return Ok(e);
    }
    Ok(e * cs.distance_ramp(cs.critical_distance(u)))
}
