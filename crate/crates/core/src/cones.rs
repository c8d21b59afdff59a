//! Positive and negative cones `P^±`, their closed ε-neighborhoods, the
//! exclusion set `W_ε = P̄_ε⁺ ∪ P̄_ε⁻`, and an empirical probe of the
//! contraction `d(A(u), P⁻) ≤ ½ d(u, P⁻)` near the cone.
//!
//! Distances are in the H-norm. The surrogate distance to `P^±` is the
//! H-norm of the offending part of `u`, an upper bound for the exact distance;
//! the exact one solves a small obstacle problem.

use std::fmt;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::grid::{apply_stencil, norm_h, Field};
use crate::sampling::{random_smooth_field, random_unit_field, substream};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn opposite(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceMode {
    #[default]
    Surrogate,
    Exact,
}

/// Cone neighborhood radii: `eps2 = eps`, `eps1 = eps / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeParams {
    eps: f64,
    mode: DistanceMode,
}

pub const DEFAULT_CONE_EPS: f64 = 1e-2;

impl ConeParams {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid("eps", "must be > 0"));
        }
        Ok(ConeParams {
            eps,
            mode: DistanceMode::Surrogate,
        })
    }

    pub fn with_mode(mut self, mode: DistanceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eps1(&self) -> f64 {
        self.eps / 2.0
    }

    pub fn eps2(&self) -> f64 {
        self.eps
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }
}

impl Default for ConeParams {
    fn default() -> Self {
        ConeParams::new(DEFAULT_CONE_EPS).unwrap()
    }
}

/// Nodewise `max(u, 0)`.
pub fn positive_part(u: &Field) -> Field {
    u.map(|v| v.max(0.0))
}

/// Nodewise `min(u, 0)`.
pub fn negative_part(u: &Field) -> Field {
    u.map(|v| v.min(0.0))
}

/// Nodewise projection onto `P^sign`.
pub fn project(u: &Field, sign: Sign) -> Field {
    match sign {
        Sign::Plus => positive_part(u),
        Sign::Minus => negative_part(u),
    }
}

/// `‖u − P^sign u‖_H`: the H-norm of the part of `u` with the wrong sign.
pub fn surrogate_distance(u: &Field, sign: Sign) -> f64 {
    match sign {
        Sign::Plus => norm_h(&negative_part(u)),
        Sign::Minus => norm_h(&positive_part(u)),
    }
}

pub fn cone_distance(u: &Field, sign: Sign, cp: &ConeParams) -> Result<f64> {
    match cp.mode {
        DistanceMode::Surrogate => Ok(surrogate_distance(u, sign)),
        DistanceMode::Exact => exact_distance(u, sign),
    }
}

/// `min(d(u, P⁺), d(u, P⁻))`.
pub fn distance_to_w(u: &Field, mode: DistanceMode) -> Result<f64> {
    let cp = ConeParams { eps: 1.0, mode };
    Ok(cone_distance(u, Sign::Plus, &cp)?.min(cone_distance(u, Sign::Minus, &cp)?))
}

/// Membership in the closed set `W_{eps2}`.
pub fn in_w(u: &Field, cp: &ConeParams) -> Result<bool> {
    in_w_radius(u, cp.eps2(), cp.mode)
}

pub fn in_w_radius(u: &Field, radius: f64, mode: DistanceMode) -> Result<bool> {
    Ok(distance_to_w(u, mode)? <= radius)
}

/// Largest grid accepted by [`exact_distance`].
pub const EXACT_MAX_NODES: usize = 64 * 64;
const EXACT_MAX_ITERATIONS: usize = 200_000;

/// `min_{w ∈ P^sign} ‖u − w‖_H` by accelerated projected gradient with
/// restart, started from the nodewise projection so the result never exceeds
/// the surrogate.
pub fn exact_distance(u: &Field, sign: Sign) -> Result<f64> {
    let grid = u.grid();
    let m = grid.len();
    if m > EXACT_MAX_NODES {
        return Err(Error::invalid(
            "grid",
            format!("exact cone distance needs at most {EXACT_MAX_NODES} nodes"),
        ));
    }
    let proj = |x: f64| match sign {
        Sign::Plus => x.max(0.0),
        Sign::Minus => x.min(0.0),
    };
    let uv = u.values();
    let lipschitz = 4.0 * grid.dim() as f64 * grid.inv_h() * grid.inv_h();
    let step = 1.0 / lipschitz;
    let objective = |w: &[f64], scratch: &mut Vec<f64>| -> f64 {
        let diff: Vec<f64> = w.iter().zip(uv).map(|(a, b)| a - b).collect();
        apply_stencil(grid, &diff, scratch);
        0.5 * diff
            .iter()
            .zip(scratch.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
    };

    let mut scratch = vec![0.0; m];
    let mut w: Vec<f64> = uv.iter().map(|&x| proj(x)).collect();
    let mut best = objective(&w, &mut scratch);
    let mut f_prev = best;
    let mut y = w.clone();
    let mut t = 1.0f64;
    let mut diff = vec![0.0; m];
    let mut grad = vec![0.0; m];
    let scale = uv.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut converged = best == 0.0;
    let mut iterations = 0;
    while !converged && iterations < EXACT_MAX_ITERATIONS {
        iterations += 1;
        for k in 0..m {
            diff[k] = y[k] - uv[k];
        }
        apply_stencil(grid, &diff, &mut grad);
        let w_next: Vec<f64> = (0..m).map(|k| proj(y[k] - step * grad[k])).collect();
        let f_next = objective(&w_next, &mut scratch);
        if f_next > f_prev + 1e-14 * f_prev.abs() {
            // Adaptive restart: drop momentum, retry from the last iterate.
            if t == 1.0 {
                converged = true;
                break;
            }
            t = 1.0;
            y.clone_from(&w);
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for k in 0..m {
            y[k] = w_next[k] + beta * (w_next[k] - w[k]);
        }
        w = w_next;
        t = t_next;
        f_prev = f_next;
        best = best.min(f_next);
        // KKT residual of the projected gradient step at w.
        for k in 0..m {
            diff[k] = w[k] - uv[k];
        }
        apply_stencil(grid, &diff, &mut grad);
        let kkt = (0..m).fold(0.0f64, |a, k| {
            a.max((w[k] - proj(w[k] - step * grad[k])).abs())
        });
        converged = kkt <= 1e-13 * scale;
    }
    if !converged {
        return Err(Error::NoConvergence {
            solver: "obstacle projection",
            iterations,
            residual: f_prev,
        });
    }
    Ok((2.0 * grid.cell_volume() * best).max(0.0).sqrt())
}

/// `d(A(u), P⁻) / d(u, P⁻)` with surrogate distances; 0 when both vanish.
pub fn contraction_ratio(model: &EnergyModel, u: &Field) -> Result<f64> {
    let du = surrogate_distance(u, Sign::Minus);
    let da = surrogate_distance(&model.operator_a(u)?, Sign::Minus);
    if du == 0.0 {
        return Ok(if da == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(da / du)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub eps: f64,
    pub samples: usize,
    pub seed: u64,
    /// Largest `d(A(u), P⁻)/d(u, P⁻)` over the samples at `eps`.
    pub max_ratio: f64,
    /// Largest `d(A(u), P⁻)` over the samples at `eps`.
    pub max_image_distance: f64,
    /// Every image stayed in `P̄_eps⁻`.
    pub invariant: bool,
    /// Largest radius found by bisection with `max_ratio ≤ ½`.
    pub eps0_empirical: f64,
    pub eps_above_eps0: bool,
}

impl ProbeReport {
    pub fn to_text(&self) -> String {
        format!(
            "max_ratio: {:e}\neps0_empirical: {:e}\nsamples: {}\nseed: {}\neps: {:e}\nmax_image_distance: {:e}\ninvariant: {}\neps_above_eps0: {}\n",
            self.max_ratio,
            self.eps0_empirical,
            self.samples,
            self.seed,
            self.eps,
            self.max_image_distance,
            self.invariant,
            self.eps_above_eps0
        )
    }
}

struct ProbeSample {
    base: Field,
    direction: Field,
    fraction: f64,
}

const EPS0_LOWER: f64 = 1e-8;
const EPS0_UPPER: f64 = 1e4;

/// Samples `u = w + δv` with `w ∈ P⁻`, `‖w‖ ≤ 2`, `v` a unit direction and `δ`
/// chosen so `d(u, P⁻) ∈ (0, eps]`; then measures how `A` shrinks the
/// distance. Sample `i` draws from substream `(seed, i)`.
pub fn contraction_probe(
    model: &EnergyModel,
    cp: &ConeParams,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<ProbeReport> {
    if samples < 50 {
        return Err(Error::invalid("samples", "must be ≥ 50"));
    }
    let grid = model.grid();
    let draws: Vec<ProbeSample> = (0..samples)
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let z = random_smooth_field(grid, &mut rng);
            let w = z.map(|v| -v.abs());
            let radius = 2.0 * (1.0 - rng.random::<f64>());
            let w = w.scaled(radius / norm_h(&w).max(1e-300));
            let direction = random_unit_field(grid, &mut rng);
            let fraction = 1.0 - rng.random::<f64>();
            ProbeSample {
                base: w,
                direction,
                fraction,
            }
        })
        .collect();

    let evaluate = |eps: f64| -> Result<(f64, f64)> {
        let results = map_range(exec, draws.len(), |i| -> Result<(f64, f64)> {
            let s = &draws[i];
            let u = place_sample(s, eps);
            let du = surrogate_distance(&u, Sign::Minus);
            let da = surrogate_distance(&model.operator_a(&u)?, Sign::Minus);
            let ratio = if du == 0.0 {
                if da == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                da / du
            };
            Ok((ratio, da))
        });
        let mut max_ratio = 0.0f64;
        let mut max_da = 0.0f64;
        for r in results {
            let (ratio, da) = r?;
            max_ratio = max_ratio.max(ratio);
            max_da = max_da.max(da);
        }
        Ok((max_ratio, max_da))
    };

    let (max_ratio, max_image_distance) = evaluate(cp.eps())?;

    let eps0 = if evaluate(EPS0_UPPER)?.0 <= 0.5 {
        EPS0_UPPER
    } else if evaluate(EPS0_LOWER)?.0 > 0.5 {
        0.0
    } else {
        let (mut lo, mut hi) = (EPS0_LOWER.ln(), EPS0_UPPER.ln());
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if evaluate(mid.exp())?.0 <= 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo.exp()
    };

    Ok(ProbeReport {
        eps: cp.eps(),
        samples,
        seed,
        max_ratio,
        max_image_distance,
        invariant: max_image_distance <= cp.eps(),
        eps0_empirical: eps0,
        eps_above_eps0: cp.eps() > eps0,
    })
}

/// Cone samples at radius `eps`, reproducible from `(seed, i)`.
pub fn cone_samples(model: &EnergyModel, eps: f64, samples: usize, seed: u64) -> Vec<Field> {
    let grid = model.grid();
    (0..samples)
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let z = random_smooth_field(grid, &mut rng);
            let w = z.map(|v| -v.abs());
            let radius = 2.0 * (1.0 - rng.random::<f64>());
            let w = w.scaled(radius / norm_h(&w).max(1e-300));
            let direction = random_unit_field(grid, &mut rng);
            let fraction = 1.0 - rng.random::<f64>();
            place_sample(
                &ProbeSample {
                    base: w,
                    direction,
                    fraction,
                },
                eps,
            )
        })
        .collect()
}

/// `w + δv` with `‖(w + δv)⁺‖_H` at `fraction · eps`, found by bisection.
fn place_sample(s: &ProbeSample, eps: f64) -> Field {
    let target = s.fraction * eps;
    let dist = |delta: f64| {
        let mut u = s.base.clone();
        u.axpy(delta, &s.direction);
        surrogate_distance(&u, Sign::Minus)
    };
    let mut hi = target;
    let mut found = false;
    for _ in 0..80 {
        if dist(hi) >= target {
            found = true;
            break;
        }
        hi *= 2.0;
    }
    if !found {
        return s.base.clone();
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if dist(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let pick = if dist(hi) <= eps { hi } else { lo };
    let mut u = s.base.clone();
    u.axpy(pick, &s.direction);
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Nonlinearity;
    use crate::grid::{eigenpairs, Grid};
    use crate::sampling::random_field;

    fn e1(grid: Grid) -> Field {
        eigenpairs(&grid, 1).unwrap().remove(0).vector
    }

    #[test]
    fn parts_reconstruct_exactly() {
        let g = Grid::square(9).unwrap();
        let u = random_field(g, &mut substream(2, 0));
        let sum = positive_part(&u).add(&negative_part(&u));
        assert_eq!(sum, u);
    }

    #[test]
    fn principal_eigenfunction_is_in_the_positive_cone() {
        let g = Grid::line(31).unwrap();
        let e = e1(g);
        assert_eq!(positive_part(&e), e);
        assert_eq!(negative_part(&e), Field::zeros(g));
        assert_eq!(positive_part(&e.scaled(-1.0)), Field::zeros(g));
        let exact = ConeParams::default().with_mode(DistanceMode::Exact);
        for cp in [ConeParams::default(), exact] {
            assert_eq!(cone_distance(&e, Sign::Plus, &cp).unwrap(), 0.0);
            assert!(in_w(&e, &cp).unwrap());
            assert!(in_w(&Field::zeros(g), &cp).unwrap());
        }
    }

    #[test]
    fn negative_eigenfunction_is_unit_distance_from_positive_cone() {
        let g = Grid::line(31).unwrap();
        let u = e1(g).scaled(-1.0);
        assert!((surrogate_distance(&u, Sign::Plus) - 1.0).abs() < 1e-12);
        assert!((exact_distance(&u, Sign::Plus).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn exact_below_surrogate_on_mixed_fields() {
        let g = Grid::line(31).unwrap();
        let mut rng = substream(11, 0);
        for _ in 0..5 {
            let u = random_smooth_field(g, &mut rng);
            for sign in [Sign::Plus, Sign::Minus] {
                let s = surrogate_distance(&u, sign);
                let e = exact_distance(&u, sign).unwrap();
                assert!(e <= s);
                if s > 0.0 {
                    assert!(e < s, "{e} vs {s}");
                }
            }
        }
    }

    #[test]
    fn exact_mode_has_a_size_guard() {
        let g = Grid::square(65).unwrap();
        assert!(exact_distance(&Field::zeros(g), Sign::Plus).is_err());
    }

    #[test]
    fn second_eigenfunction_is_outside_w() {
        let g = Grid::line(63).unwrap();
        let e2 = eigenpairs(&g, 2).unwrap().remove(1).vector;
        let cp = ConeParams::new(1e-2).unwrap();
        assert!(!in_w(&e2.scaled(0.5), &cp).unwrap());
    }

    #[test]
    fn nonpositive_field_maps_into_negative_cone() {
        let g = Grid::square(16).unwrap();
        let m = EnergyModel::new(g, Nonlinearity::odd_power(4.0).unwrap());
        let u = random_smooth_field(g, &mut substream(4, 0)).map(|v| -v.abs() * 3.0);
        assert_eq!(contraction_ratio(&m, &u).unwrap(), 0.0);
        assert!(m.operator_a(&u).unwrap().values().iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn huge_radius_is_flagged() {
        let g = Grid::line(31).unwrap();
        let m = EnergyModel::new(g, Nonlinearity::odd_power(4.0).unwrap());
        let cp = ConeParams::new(10.0).unwrap();
        let report = contraction_probe(&m, &cp, 50, 3, Execution::Sequential).unwrap();
        assert!(report.eps0_empirical < 10.0);
        assert!(report.eps_above_eps0);
        assert!(report.max_ratio > 0.5);
    }

    #[test]
    fn probe_requires_enough_samples() {
        let g = Grid::line(7).unwrap();
        let m = EnergyModel::new(g, Nonlinearity::odd_power(4.0).unwrap());
        assert!(
            contraction_probe(&m, &ConeParams::default(), 10, 0, Execution::Sequential).is_err()
        );
    }
}
