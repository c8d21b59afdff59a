//! Minimax solvers: cone-restricted mountain-pass paths for the positive and
//! negative solutions, and deformed half-disk (or quarter-disk) surfaces for
//! the sign-changing one, with the sphere-intersection witness that certifies
//! linking at runtime.
//!
//! Reported levels are upper bounds on the minimax values over the full
//! admissible classes; they are certified as critical levels by the residual
//! of the returned field.

mod linking;
mod mesh;
mod newton;
mod path;
mod surface;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{norm_h, Field, Grid};
use crate::sampling::random_unit_field;

pub use linking::verify_linking;
pub use mesh::{Surface, SurfaceVariant, VertexTag, MAX_MESH_LEVEL, MIN_MESH_LEVEL};
pub use newton::{newton_polish, PolishOutcome};
pub use path::{mountain_pass, Path, DEFAULT_PATH_NODES, MIN_PATH_NODES};
pub use surface::{sign_changing_solve, SurfaceSolver};

pub const LEVEL_LABEL: &str = "minimax estimate (upper bound, stationary)";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Classification {
    Positive,
    Negative,
    SignChanging,
    /// Zero, or one-signed with vanishing nodes.
    Trivial,
}

impl Classification {
    pub fn of(u: &Field) -> Self {
        let (lo, hi) = (u.min(), u.max());
        if lo > 0.0 {
            Classification::Positive
        } else if hi < 0.0 {
            Classification::Negative
        } else if lo < 0.0 && hi > 0.0 {
            Classification::SignChanging
        } else {
            Classification::Trivial
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Positive => "positive",
            Classification::Negative => "negative",
            Classification::SignChanging => "sign_changing",
            Classification::Trivial => "trivial",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub sweep: usize,
    pub sup_level: f64,
    pub maximizer_residual: f64,
    pub excluded_count: usize,
}

pub fn sweep_trace_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("sweep,sup_level,maximizer_residual,excluded_count\n");
    for r in rows {
        writeln!(
            out,
            "{},{:e},{:e},{}",
            r.sweep, r.sup_level, r.maximizer_residual, r.excluded_count
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug)]
pub struct CriticalPointReport {
    pub label: &'static str,
    pub level: f64,
    pub field: Field,
    pub residual: f64,
    pub classification: Classification,
    /// Descent sweeps before polishing.
    pub iterations: usize,
    pub polish_iterations: usize,
    /// Radius `R` of the initial path or surface.
    pub radius: f64,
    pub trace: Vec<SweepRow>,
}

impl CriticalPointReport {
    pub fn to_text(&self) -> String {
        format!(
            "label: {}\nlevel: {:e}\nresidual: {:e}\nclassification: {}\niterations: {}\npolish_iterations: {}\nradius: {:e}\n",
            self.label,
            self.level,
            self.residual,
            self.classification.as_str(),
            self.iterations,
            self.polish_iterations,
            self.radius
        )
    }
}

const R_CAP: f64 = (1u64 << 20) as f64;

fn grow_radius(mut negative_at: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    let mut r = 1.0;
    while !negative_at(r)? {
        r *= 2.0;
        if r > R_CAP {
            return Err(Error::Solver(
                "radius cap 2^20 exceeded: energy never turns negative along the direction".into(),
            ));
        }
    }
    Ok(2.0 * r)
}

/// Doubles `R` from 1 until `I(R·direction) < 0`, then doubles once more.
pub fn choose_r(m: &EnergyModel, direction: &Field) -> Result<f64> {
    let norm = norm_h(direction);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("direction", "must have unit H-norm"));
    }
    grow_radius(|r| Ok(m.energy(&direction.scaled(r))? < 0.0))
}

pub const ARC_SAMPLES: usize = 64;

/// Like [`choose_r`], but requires `I < 0` at 64 points of the arc
/// `R(cos θ a + sin θ b)`, `θ ∈ [0, span]`.
pub fn choose_r_arc(m: &EnergyModel, a: &Field, b: &Field, span: f64) -> Result<f64> {
    grow_radius(|r| {
        for j in 0..ARC_SAMPLES {
            let theta = span * j as f64 / (ARC_SAMPLES - 1) as f64;
            let u = Field::combine(r * theta.cos(), a, r * theta.sin(), b);
            if m.energy(&u)? >= 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlphaRho {
    pub rho: f64,
    pub alpha: f64,
    /// Largest `h^d ΣF(uᵢ)` over the sampled unit fields.
    pub c_emb: f64,
}

const ALPHA_SAMPLES: usize = 500;
const ALPHA_SEED: u64 = 0xa1fa;

/// Sphere radius `ρ` and level `α` with `I > α` on the sphere, estimated
/// from `ρ²/2 − C·ρᵖ` with `C` sampled over random unit fields.
pub fn estimate_alpha_rho(m: &EnergyModel) -> Result<AlphaRho> {
    let grid = m.grid();
    let nl = m.nonlinearity();
    let mut rng = ChaCha8Rng::seed_from_u64(ALPHA_SEED);
    let mut c_emb = 0.0f64;
    for _ in 0..ALPHA_SAMPLES {
        let u = random_unit_field(grid, &mut rng);
        let s: f64 = u.values().iter().map(|&v| nl.primitive(v)).sum();
        c_emb = c_emb.max(grid.cell_volume() * s);
    }
    let p = nl.p();
    let bound = |rho: f64| 0.5 * rho * rho - c_emb * rho.powf(p);
    let (mut rho, mut best) = (0.0, f64::NEG_INFINITY);
    for k in 0..=4000 {
        let r = 10f64.powf(-6.0 + 12.0 * k as f64 / 4000.0);
        let b = bound(r);
        if b > best {
            best = b;
            rho = r;
        }
    }
    let alpha = 0.5 * best;
    if !(alpha > 0.0) {
        return Err(Error::Solver(format!(
            "sphere lower bound is not positive (alpha = {alpha:e})"
        )));
    }
    Ok(AlphaRho { rho, alpha, c_emb })
}

/// A nonnegative bump on the left 40% of the domain and a nonpositive one
/// on the right 40%, each of unit H-norm.
pub fn disjoint_bumps(grid: &Grid) -> Result<(Field, Field)> {
    if grid.n() < 7 {
        return Err(Error::invalid("n", "must be ≥ 7 for disjoint bumps"));
    }
    let hat = |t: f64, a: f64, b: f64| {
        if t > a && t < b {
            (t - a) * (b - t)
        } else {
            0.0
        }
    };
    let dim = grid.dim();
    let profile = move |x: f64, y: f64, a: f64, b: f64| {
        let across = if dim == 2 { hat(y, 0.0, 1.0) } else { 1.0 };
        hat(x, a, b) * across
    };
    let left = Field::from_fn(*grid, |x, y| profile(x, y, 0.0, 0.4));
    let right = Field::from_fn(*grid, |x, y| -profile(x, y, 0.6, 1.0));
    Ok((
        left.scaled(1.0 / norm_h(&left)),
        right.scaled(1.0 / norm_h(&right)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Nonlinearity;
    use crate::grid::{eigenpairs, inner_h};

    fn model(grid: Grid) -> EnergyModel {
        EnergyModel::new(grid, Nonlinearity::odd_power(4.0).unwrap())
    }

    #[test]
    fn radius_matches_quartic_threshold() {
        let g = Grid::line(255).unwrap();
        let m = model(g);
        let e1 = eigenpairs(&g, 1).unwrap().remove(0).vector;
        let l4: f64 = e1.values().iter().map(|v| v.powi(4)).sum::<f64>() * g.h();
        let threshold = (2.0 / l4).sqrt();
        let mut expected = 1.0;
        while expected <= threshold {
            expected *= 2.0;
        }
        let r = choose_r(&m, &e1).unwrap();
        assert_eq!(r, 2.0 * expected);
        assert_eq!(choose_r(&m, &e1.scaled(-1.0)).unwrap(), r);
        assert!(m.energy(&e1.scaled(0.1)).unwrap() > 0.0);
    }

    #[test]
    fn radius_needs_unit_direction() {
        let g = Grid::line(15).unwrap();
        let e1 = eigenpairs(&g, 1).unwrap().remove(0).vector;
        assert!(choose_r(&model(g), &e1.scaled(2.0)).is_err());
    }

    #[test]
    fn alpha_is_positive_with_interior_maximizer() {
        let g = Grid::square(32).unwrap();
        let est = estimate_alpha_rho(&model(g)).unwrap();
        assert!(est.c_emb > 0.0);
        assert!(est.alpha > 0.0);
        // The maximizer of ρ²/2 − Cρ⁴ is ρ = (4C)^{-1/2}.
        let rho = (4.0 * est.c_emb).powf(-0.5);
        assert!((est.rho / rho - 1.0).abs() < 0.01);
        assert!((est.alpha - rho * rho / 8.0).abs() < 1e-3 * est.alpha);
    }

    #[test]
    fn bumps_are_disjoint_and_h_orthogonal() {
        for g in [
            Grid::line(7).unwrap(),
            Grid::line(64).unwrap(),
            Grid::square(20).unwrap(),
        ] {
            let (a, b) = disjoint_bumps(&g).unwrap();
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x * y == 0.0));
            assert!(a.min() >= 0.0 && b.max() <= 0.0);
            assert!((norm_h(&a) - 1.0).abs() < 1e-12);
            assert!((norm_h(&b) - 1.0).abs() < 1e-12);
            assert_eq!(inner_h(&a, &b).unwrap(), 0.0);
        }
        assert!(disjoint_bumps(&Grid::line(6).unwrap()).is_err());
    }

    #[test]
    fn classification_rules() {
        let g = Grid::line(5).unwrap();
        let f = |v: Vec<f64>| Field::from_values(g, v).unwrap();
        assert_eq!(
            Classification::of(&f(vec![1.0; 5])),
            Classification::Positive
        );
        assert_eq!(
            Classification::of(&f(vec![-1.0; 5])),
            Classification::Negative
        );
        assert_eq!(
            Classification::of(&f(vec![1.0, 2.0, 0.0, -1.0, -2.0])),
            Classification::SignChanging
        );
        assert_eq!(
            Classification::of(&Field::zeros(g)),
            Classification::Trivial
        );
    }
}
