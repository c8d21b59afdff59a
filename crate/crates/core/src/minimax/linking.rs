//! Witness search for `(g(B) ∩ ∂B_ρ) \ W ≠ ∅`.

use std::fmt::Write as _;

use super::mesh::Surface;
use crate::cones::{distance_to_w, in_w, ConeParams};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{norm_h, Field};

const SPHERE_TOL: f64 = 1e-6;
const SUBDIVISIONS: usize = 4;

/// Point of `(1−λ)a + λb` with `|‖u‖ − ρ| ≤ 1e−6`, given that the norms of
/// the endpoints straddle `ρ`.
fn sphere_crossing(a: &Field, b: &Field, rho: f64) -> Field {
    let below_a = norm_h(a) < rho;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut u = a.clone();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        u = Field::combine(1.0 - mid, a, mid, b);
        let n = norm_h(&u);
        if (n - rho).abs() <= SPHERE_TOL {
            break;
        }
        if (n < rho) == below_a {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    u
}

struct Crossing {
    from: Field,
    to: Field,
    label: String,
}

/// Scans mesh edges in ascending order for crossings of the sphere `∂B_ρ`
/// and returns the first crossing point outside `W_{ε₂}`. If every edge
/// crossing lies in `W`, the edges of a 4×4 barycentric subdivision of each
/// triangle are scanned too.
pub fn verify_linking(s: &Surface, rho: f64, cp: &ConeParams, m: &EnergyModel) -> Result<Field> {
    if !(rho > 0.0 && rho < s.radius()) {
        return Err(Error::invalid("rho", "must be in (0, R)"));
    }
    let grid = m.grid();
    for u in s.images() {
        grid.ensure_same(&u.grid())?;
    }
    let norms: Vec<f64> = s.images().iter().map(norm_h).collect();
    let straddles = |na: f64, nb: f64| (na < rho) != (nb < rho);
    let mut rejected: Vec<(String, f64)> = Vec::new();
    let mut check = |c: Crossing| -> Result<Option<Field>> {
        let u = sphere_crossing(&c.from, &c.to, rho);
        if !in_w(&u, cp)? {
            return Ok(Some(u));
        }
        rejected.push((c.label, distance_to_w(&u, cp.mode())?));
        Ok(None)
    };

    for (a, b) in s.edges() {
        if straddles(norms[a], norms[b]) {
            let c = Crossing {
                from: s.image(a).clone(),
                to: s.image(b).clone(),
                label: format!("edge ({a},{b})"),
            };
            if let Some(u) = check(c)? {
                return Ok(u);
            }
        }
    }

    let k = SUBDIVISIONS;
    for (t, [a, b, c]) in s.triangles().enumerate() {
        let point = |i: usize, j: usize| -> Field {
            let (wa, wb) = (i as f64 / k as f64, j as f64 / k as f64);
            let mut u = Field::combine(wa, s.image(a), wb, s.image(b));
            u.axpy(1.0 - wa - wb, s.image(c));
            u
        };
        for i in 0..=k {
            for j in 0..=k - i {
                let p = point(i, j);
                let np = norm_h(&p);
                let mut next = Vec::new();
                if i < k && j + i < k {
                    next.push((i + 1, j));
                    next.push((i, j + 1));
                }
                if i > 0 && j < k {
                    next.push((i - 1, j + 1));
                }
                for (ii, jj) in next {
                    let q = point(ii, jj);
                    if straddles(np, norm_h(&q)) {
                        let cr = Crossing {
                            from: p.clone(),
                            to: q,
                            label: format!("triangle {t} sub-edge ({i},{j})-({ii},{jj})"),
                        };
                        if let Some(u) = check(cr)? {
                            return Ok(u);
                        }
                    }
                }
            }
        }
    }

    let mut msg = format!("{} sphere crossings, all inside W", rejected.len());
    for (label, d) in rejected.iter().take(10) {
        write!(msg, "; {label}: distance to W {d:e}").unwrap();
    }
    Err(Error::Linking(msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Nonlinearity;
    use crate::grid::{eigenpairs, Grid};
    use crate::minimax::SurfaceVariant;

    fn setup() -> (EnergyModel, Field, Field) {
        let g = Grid::line(63).unwrap();
        let m = EnergyModel::new(g, Nonlinearity::odd_power(4.0).unwrap());
        let mut e = eigenpairs(&g, 2).unwrap();
        let e2 = e.pop().unwrap().vector;
        (m, e.pop().unwrap().vector, e2)
    }

    #[test]
    fn identity_surface_has_witness() {
        let (m, e1, e2) = setup();
        let rho = 1.5;
        let s = Surface::new(SurfaceVariant::GammaS, 2.0 * rho, &e1, &e2, 3).unwrap();
        let cp = ConeParams::default();
        let w = verify_linking(&s, rho, &cp, &m).unwrap();
        assert!((norm_h(&w) - rho).abs() <= 1e-6);
        assert!(!in_w(&w, &cp).unwrap());
    }

    #[test]
    fn shrunken_surface_has_no_crossing() {
        let (m, e1, e2) = setup();
        let rho = 1.5;
        let mut s = Surface::new(SurfaceVariant::GammaS, 2.0 * rho, &e1, &e2, 3).unwrap();
        s.scale_images(0.2);
        let err = verify_linking(&s, rho, &ConeParams::default(), &m).unwrap_err();
        assert!(matches!(err, Error::Linking(_)));
    }
}
