//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, LU};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use signflow::grid::{Field, Grid};
use signflow::sampling::random_smooth_field;

/// `-Δ_h` assembled entry by entry from node coordinates.
pub fn dense_laplacian(grid: &Grid) -> DMatrix<f64> {
    let n = grid.n();
    let m = grid.len();
    let s = grid.inv_h() * grid.inv_h();
    let mut k = DMatrix::zeros(m, m);
    let index = |i: usize, j: usize| if grid.dim() == 1 { i } else { j * n + i };
    let rows = if grid.dim() == 1 { 1 } else { n };
    for j in 0..rows {
        for i in 0..n {
            let p = index(i, j);
            k[(p, p)] = 2.0 * grid.dim() as f64 * s;
            let mut link = |q: usize| k[(p, q)] = -s;
            if i > 0 {
                link(index(i - 1, j));
            }
            if i + 1 < n {
                link(index(i + 1, j));
            }
            if grid.dim() == 2 {
                if j > 0 {
                    link(index(i, j - 1));
                }
                if j + 1 < n {
                    link(index(i, j + 1));
                }
            }
        }
    }
    k
}

pub fn to_vector(u: &Field) -> DVector<f64> {
    DVector::from_column_slice(u.values())
}

/// Dense problem data: `K = -Δ_h`, its LU factors and the weight `h^d`.
pub struct Dense {
    pub grid: Grid,
    pub k: DMatrix<f64>,
    pub lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub weight: f64,
}

impl Dense {
    pub fn new(grid: Grid) -> Self {
        let k = dense_laplacian(&grid);
        let lu = k.clone().lu();
        Dense {
            grid,
            k,
            lu,
            weight: grid.cell_volume(),
        }
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.lu.solve(rhs).expect("K is nonsingular")
    }

    pub fn inner_h(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.weight * u.dot(&(&self.k * v))
    }

    /// `‖u − K⁻¹ f(u)‖_H` for `f(u) = |u|^{p−2} u`.
    pub fn residual(&self, u: &DVector<f64>, p: f64) -> f64 {
        let fu = u.map(|v| v.abs().powf(p - 2.0) * v);
        let r = u - self.solve(&fu);
        self.inner_h(&r, &r).max(0.0).sqrt()
    }

    pub fn energy(&self, u: &DVector<f64>, p: f64) -> f64 {
        0.5 * self.inner_h(u, u) - self.weight * u.iter().map(|v| v.abs().powf(p)).sum::<f64>() / p
    }
}

pub struct NehariMinimizer {
    pub level: f64,
    /// Minimizer scaled onto the Nehari set.
    pub field: DVector<f64>,
    pub residual: f64,
}

/// Minimizes `J(u) = max_t I(tu) = (½ − 1/p)·(a^{p/2}/b)^{2/(p−2)}`, with
/// `a = ‖u‖²_H` and `b = |u|_p^p`, by preconditioned gradient descent with
/// backtracking from several random smooth starts. The best minimizer is
/// returned.
pub fn nehari_ground_state(grid: Grid, p: f64, starts: usize, seed: u64) -> NehariMinimizer {
    let d = Dense::new(grid);
    let ab = |u: &DVector<f64>| {
        let a = d.inner_h(u, u);
        let b = d.weight * u.iter().map(|v| v.abs().powf(p)).sum::<f64>();
        (a, b)
    };
    let j = |u: &DVector<f64>| {
        let (a, b) = ab(u);
        (0.5 - 1.0 / p) * (a.powf(0.5 * p) / b).powf(2.0 / (p - 2.0))
    };
    let mut best: Option<NehariMinimizer> = None;
    for s in 0..starts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
        let mut u = to_vector(&random_smooth_field(grid, &mut rng));
        let mut ju = j(&u);
        for _ in 0..20_000 {
            let (a, b) = ab(&u);
            let t = (a / b).powf(1.0 / (p - 2.0));
            let scaled = &u * t;
            let fu = scaled.map(|v| v.abs().powf(p - 2.0) * v);
            let dir = d.solve(&fu) - &scaled;
            if d.inner_h(&dir, &dir).sqrt() <= 1e-11 {
                u = scaled;
                break;
            }
            let mut tau = 1.0;
            loop {
                let cand = &scaled + &dir * tau;
                let jc = j(&cand);
                if jc <= ju * (1.0 + 1e-13) || tau < 1e-12 {
                    u = cand;
                    ju = jc;
                    break;
                }
                tau *= 0.5;
            }
        }
        let (a, b) = ab(&u);
        let field = &u * (a / b).powf(1.0 / (p - 2.0));
        let level = j(&field);
        let residual = d.residual(&field, p);
        if best.as_ref().is_none_or(|m| level < m.level) {
            best = Some(NehariMinimizer {
                level,
                field,
                residual,
            });
        }
    }
    best.expect("at least one start")
}

/// Solution of `−u″ = |u|^{p−2}u`, `u(0) = u(1) = 0`, with one interior
/// zero, found by shooting on `u′(0)`.
pub struct ShootingSolution {
    pub slope: f64,
    /// Values at the interior nodes `x_j = j·h`.
    pub nodes: Vec<f64>,
    /// `∫ ½u′² − |u|^p/p` by the trapezoid rule on the RK4 mesh.
    pub energy: f64,
}

const SUBSTEPS_PER_CELL: usize = 64;

fn rk4(p: f64, state: [f64; 2], dx: f64) -> [f64; 2] {
    let rhs = |s: [f64; 2]| [s[1], -(s[0].abs().powf(p - 2.0) * s[0])];
    let k1 = rhs(state);
    let k2 = rhs([state[0] + 0.5 * dx * k1[0], state[1] + 0.5 * dx * k1[1]]);
    let k3 = rhs([state[0] + 0.5 * dx * k2[0], state[1] + 0.5 * dx * k2[1]]);
    let k4 = rhs([state[0] + dx * k3[0], state[1] + dx * k3[1]]);
    [
        state[0] + dx / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        state[1] + dx / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Position of the second zero of the trajectory with `u′(0) = slope`,
/// located by linear interpolation; `None` if it lies beyond `x = 2`.
fn second_zero(p: f64, slope: f64, dx: f64) -> Option<f64> {
    let mut s = [0.0, slope];
    let mut x = 0.0;
    let mut crossings = 0;
    while x < 2.0 {
        let next = rk4(p, s, dx);
        if s[0] != 0.0 && s[0].signum() != next[0].signum() {
            crossings += 1;
            if crossings == 2 {
                return Some(x + dx * s[0] / (s[0] - next[0]));
            }
        }
        s = next;
        x += dx;
    }
    None
}

pub fn shoot_one_node(n: usize, p: f64) -> ShootingSolution {
    let h = 1.0 / (n + 1) as f64;
    let dx = h / SUBSTEPS_PER_CELL as f64;
    // Larger slopes bring the second zero closer to the origin.
    let (mut lo, mut hi) = (1e-2f64, 1e6f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        match second_zero(p, mid, dx) {
            Some(z) if z < 1.0 => hi = mid,
            _ => lo = mid,
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let slope = (lo * hi).sqrt();
    let mut s = [0.0, slope];
    let mut nodes = Vec::with_capacity(n);
    let integrand = |s: [f64; 2]| 0.5 * s[1] * s[1] - s[0].abs().powf(p) / p;
    let mut energy = 0.5 * integrand(s);
    let steps = (n + 1) * SUBSTEPS_PER_CELL;
    for step in 1..=steps {
        s = rk4(p, s, dx);
        let w = if step == steps { 0.5 } else { 1.0 };
        energy += w * integrand(s);
        if step.is_multiple_of(SUBSTEPS_PER_CELL) && step < steps {
            nodes.push(s[0]);
        }
    }
    ShootingSolution {
        slope,
        nodes,
        energy: energy * dx,
    }
}
