//! Mountain-pass paths inside a cone (string method).

use super::newton::newton_polish;
use super::{
    choose_r, estimate_alpha_rho, Classification, CriticalPointReport, SweepRow, LEVEL_LABEL,
};
use crate::cones::{cone_distance, project, ConeParams, Sign};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::flow::{h_orthonormalize, normal_step, FlowParams};
use crate::grid::{eigenpairs, norm_h, Field};

pub const MIN_PATH_NODES: usize = 17;
pub const DEFAULT_PATH_NODES: usize = 33;
const STABLE_SWEEPS: usize = 50;
const STABLE_TOL: f64 = 1e-10;
/// Fraction of `FlowParams::dt` used for node steps.
const STEP_SCALE: f64 = 0.2;

/// Nodes of a discrete path from `0` to `±R·e₁`.
#[derive(Clone, Debug)]
pub struct Path {
    pub sign: Sign,
    pub radius: f64,
    pub nodes: Vec<Field>,
}

impl Path {
    /// `t ↦ t·end`, sampled at `k` equally spaced `t`.
    pub fn straight(sign: Sign, radius: f64, end: &Field, k: usize) -> Self {
        let nodes = (0..k)
            .map(|i| end.scaled(i as f64 / (k - 1) as f64))
            .collect();
        Path {
            sign,
            radius,
            nodes,
        }
    }

    pub fn levels(&self, m: &EnergyModel, exec: Execution) -> Result<Vec<f64>> {
        map_range(exec, self.nodes.len(), |i| m.energy(&self.nodes[i]))
            .into_iter()
            .collect()
    }

    /// Redistributes interior nodes to equal H-arc-length spacing along the
    /// current polyline; endpoints are untouched.
    pub fn reparametrize(&mut self) {
        let k = self.nodes.len();
        let mut cumulative = vec![0.0; k];
        for i in 1..k {
            cumulative[i] = cumulative[i - 1] + norm_h(&self.nodes[i].sub(&self.nodes[i - 1]));
        }
        let total = cumulative[k - 1];
        if !(total > 0.0) {
            return;
        }
        let mut fresh = Vec::with_capacity(k);
        fresh.push(self.nodes[0].clone());
        let mut seg = 0;
        for j in 1..k - 1 {
            let target = total * j as f64 / (k - 1) as f64;
            while seg < k - 2 && cumulative[seg + 1] < target {
                seg += 1;
            }
            let len = cumulative[seg + 1] - cumulative[seg];
            let t = if len > 0.0 {
                ((target - cumulative[seg]) / len).clamp(0.0, 1.0)
            } else {
                0.0
            };
            fresh.push(Field::combine(
                1.0 - t,
                &self.nodes[seg],
                t,
                &self.nodes[seg + 1],
            ));
        }
        fresh.push(self.nodes[k - 1].clone());
        self.nodes = fresh;
    }

    /// Point at polyline parameter `s ∈ [0, k−1]`.
    fn at(&self, s: f64) -> Field {
        let i = (s.floor() as usize).min(self.nodes.len() - 2);
        let t = s - i as f64;
        Field::combine(1.0 - t, &self.nodes[i], t, &self.nodes[i + 1])
    }
}

fn argmax(levels: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &l) in levels.iter().enumerate() {
        if l > best.1 {
            best = (i, l);
        }
    }
    best
}

/// Golden-section maximization of `I` on the two segments around node `k`.
fn polyline_peak(m: &EnergyModel, path: &Path, k: usize) -> Result<Field> {
    let last = (path.nodes.len() - 1) as f64;
    let (mut a, mut b) = ((k as f64 - 1.0).max(0.0), (k as f64 + 1.0).min(last));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = m.energy(&path.at(x1))?;
    let mut f2 = m.energy(&path.at(x2))?;
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = m.energy(&path.at(x2))?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = m.energy(&path.at(x1))?;
        }
    }
    Ok(path.at(0.5 * (a + b)))
}

/// Cone-restricted mountain pass from `0` to `±R·e₁`: each sweep takes one
/// descent step normal to the path per interior node above `α/2`, projects
/// onto the cone,
/// re-spaces the nodes and records the highest node. Once the top level has been flat for
/// 50 sweeps, the peak is refined by Newton to `fp.residual_tol`.
pub fn mountain_pass(
    m: &EnergyModel,
    sign: Sign,
    fp: &FlowParams,
    cp: &ConeParams,
    k: usize,
    exec: Execution,
) -> Result<CriticalPointReport> {
    fp.validate()?;
    if k < MIN_PATH_NODES {
        return Err(Error::invalid(
            "path_nodes",
            format!("must be ≥ {MIN_PATH_NODES}"),
        ));
    }
    let grid = m.grid();
    let e1 = eigenpairs(&grid, 1)?.remove(0).vector;
    let direction = e1.scaled(sign.factor());
    let radius = choose_r(m, &direction)?;
    let mut path = Path::straight(sign, radius, &direction.scaled(radius), k);
    // Nodes at or below half the sphere level are out of the band and stay put.
    let floor = 0.5 * estimate_alpha_rho(m)?.alpha;
    let mut levels = path.levels(m, exec)?;
    let node_fp = FlowParams {
        dt: STEP_SCALE * fp.dt,
        ..*fp
    };

    let mut trace = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut peak = None;
    for sweep in 1..=fp.max_steps {
        let moved = map_range(exec, k - 2, |i| -> Result<Field> {
            let node = &path.nodes[i + 1];
            if levels[i + 1] <= floor {
                return Ok(node.clone());
            }
            let tangent = h_orthonormalize(&[path.nodes[i + 2].sub(&path.nodes[i])]);
            let out = normal_step(m, node, levels[i + 1], &tangent, &node_fp)?;
            Ok(project(&out, sign))
        });
        for (i, node) in moved.into_iter().enumerate() {
            path.nodes[i + 1] = node?;
        }
        path.reparametrize();
        levels = path.levels(m, exec)?;
        let (top, level) = argmax(&levels);
        if level <= 1e-10 {
            return Err(Error::Solver(
                "path collapsed onto the trivial solution".into(),
            ));
        }
        let residual = m.residual(&path.nodes[top])?;
        trace.push(SweepRow {
            sweep,
            sup_level: level,
            maximizer_residual: residual,
            excluded_count: 0,
        });
        history.push(level);
        if history.len() > STABLE_SWEEPS {
            let window = &history[history.len() - STABLE_SWEEPS - 1..];
            let hi = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = window.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi - lo <= STABLE_TOL * level.abs().max(1.0) {
                peak = Some(top);
                break;
            }
        }
    }
    let Some(top) = peak else {
        return Err(Error::Solver(format!(
            "mountain pass: sweep budget {} exhausted",
            fp.max_steps
        )));
    };
    if cone_distance(&path.nodes[top], sign, cp)? > cp.eps2() {
        return Err(Error::Solver("path left the cone neighborhood".into()));
    }

    let target = 0.01 * fp.residual_tol;
    let expected = match sign {
        Sign::Plus => Classification::Positive,
        Sign::Minus => Classification::Negative,
    };
    let starts = [polyline_peak(m, &path, top)?, path.nodes[top].clone()];
    let mut last_failure = String::new();
    for start in &starts {
        let polished = newton_polish(m, start, target)?;
        let class = Classification::of(&polished.field);
        if polished.residual <= fp.residual_tol && class == expected {
            return Ok(CriticalPointReport {
                label: LEVEL_LABEL,
                level: m.energy(&polished.field)?,
                residual: polished.residual,
                classification: class,
                field: polished.field,
                iterations: trace.len(),
                polish_iterations: polished.iterations,
                radius,
                trace,
            });
        }
        last_failure = format!(
            "residual {:e}, classification {}",
            polished.residual,
            class.as_str()
        );
    }
    Err(Error::Solver(format!(
        "mountain pass: refinement of the path peak failed ({last_failure})"
    )))
}
