//! Sign-changing minimax by deforming a pinned surface.

use super::linking::verify_linking;
use super::mesh::{Surface, SurfaceVariant};
use super::newton::newton_polish;
use super::{
    choose_r_arc, disjoint_bumps, estimate_alpha_rho, AlphaRho, Classification,
    CriticalPointReport, SweepRow, LEVEL_LABEL,
};
use crate::cones::{distance_to_w, project, ConeParams};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, map_range, Execution};
use crate::flow::{h_orthonormalize, normal_step, FlowParams};
use crate::grid::{eigenpairs, Field};

const PATIENCE: usize = 50;
const LINKING_PERIOD: usize = 100;
const CANDIDATES: usize = 5;

#[derive(Clone, Copy, Debug)]
struct VertexState {
    level: f64,
    /// Distance to `W` in the configured mode.
    w_distance: f64,
}

#[derive(Clone, Debug)]
struct Candidate {
    vertex: usize,
    residual: f64,
    field: Field,
}

/// State of a surface deformation: the mesh, cached vertex energies and
/// cone distances, the sweep trace and the best near-critical maximizers.
pub struct SurfaceSolver<'m> {
    m: &'m EnergyModel,
    fp: FlowParams,
    cp: ConeParams,
    exec: Execution,
    surface: Surface,
    bounds: AlphaRho,
    states: Vec<VertexState>,
    sweeps: usize,
    trace: Vec<SweepRow>,
    candidates: Vec<Candidate>,
    best_residual: f64,
    last_improvement: usize,
}

impl<'m> SurfaceSolver<'m> {
    /// Builds the initial surface: `x·e₁ + y·e₂` on the half-disk, or
    /// `x·α₁ + y·α₂` on the quarter-disk, with `R` large enough that `I < 0`
    /// on the arc.
    pub fn new(
        m: &'m EnergyModel,
        variant: SurfaceVariant,
        fp: &FlowParams,
        cp: &ConeParams,
        mesh_level: u32,
        exec: Execution,
    ) -> Result<Self> {
        fp.validate()?;
        let grid = m.grid();
        let (a, b) = match variant {
            SurfaceVariant::GammaSDoublePrime => disjoint_bumps(&grid)?,
            _ => {
                let mut e = eigenpairs(&grid, 2)?;
                let e2 = e.pop().unwrap().vector;
                (e.pop().unwrap().vector, e2)
            }
        };
        let radius = choose_r_arc(m, &a, &b, variant.span())?;
        let surface = Surface::new(variant, radius, &a, &b, mesh_level)?;
        Self::with_surface(m, surface, fp, cp, exec)
    }

    /// Starts from a prepared surface.
    pub fn with_surface(
        m: &'m EnergyModel,
        surface: Surface,
        fp: &FlowParams,
        cp: &ConeParams,
        exec: Execution,
    ) -> Result<Self> {
        let bounds = estimate_alpha_rho(m)?;
        if bounds.rho >= surface.radius() {
            return Err(Error::Solver(format!(
                "surface radius {:e} does not exceed the sphere radius {:e}",
                surface.radius(),
                bounds.rho
            )));
        }
        let mut solver = SurfaceSolver {
            m,
            fp: *fp,
            cp: *cp,
            exec,
            surface,
            bounds,
            states: Vec::new(),
            sweeps: 0,
            trace: Vec::new(),
            candidates: Vec::new(),
            best_residual: f64::INFINITY,
            last_improvement: 0,
        };
        let all: Vec<usize> = (0..solver.surface.len()).collect();
        solver.states = solver.evaluate(&all)?;
        Ok(solver)
    }

    pub fn surface(&self) -> &Surface {
        &self.surface
    }

    pub fn alpha_rho(&self) -> AlphaRho {
        self.bounds
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn trace(&self) -> &[SweepRow] {
        &self.trace
    }

    fn evaluate(&self, indices: &[usize]) -> Result<Vec<VertexState>> {
        map_indexed(self.exec, indices, |_, &i| -> Result<VertexState> {
            let u = self.surface.image(i);
            Ok(VertexState {
                level: self.m.energy(u)?,
                w_distance: distance_to_w(u, self.cp.mode())?,
            })
        })
        .into_iter()
        .collect()
    }

    fn in_w(&self, i: usize) -> bool {
        self.states[i].w_distance <= self.cp.eps2()
    }

    /// Vertices that take a descent step this sweep: not pinned by the
    /// variant, outside `W_{ε₁}`, and above half the sphere level.
    fn movable(&self) -> Vec<usize> {
        let variant = self.surface.variant();
        (0..self.surface.len())
            .filter(|&i| {
                let st = self.states[i];
                !variant.pins(self.surface.tag(i))
                    && st.w_distance > self.cp.eps1()
                    && st.level > 0.5 * self.bounds.alpha
            })
            .collect()
    }

    /// Least-squares partial derivatives of the image map at vertex `i`
    /// with respect to the two mesh parameters, fitted over its neighbors.
    fn tangents(&self, i: usize) -> Vec<Field> {
        let (x0, y0) = self.surface.param(i);
        let u0 = self.surface.image(i);
        let mut gram = [[0.0; 2]; 2];
        let mut moments = [Field::zeros(self.m.grid()), Field::zeros(self.m.grid())];
        for j in self.surface.neighbors(i) {
            let (x, y) = self.surface.param(j);
            let d = [x - x0, y - y0];
            let du = self.surface.image(j).sub(u0);
            for a in 0..2 {
                for b in 0..2 {
                    gram[a][b] += d[a] * d[b];
                }
                moments[a].axpy(d[a], &du);
            }
        }
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        if !(det.abs() > 0.0) {
            return Vec::new();
        }
        let inv = [
            [gram[1][1] / det, -gram[0][1] / det],
            [-gram[1][0] / det, gram[0][0] / det],
        ];
        (0..2)
            .map(|a| Field::combine(inv[a][0], &moments[0], inv[a][1], &moments[1]))
            .collect()
    }

    /// Highest vertex outside `W_{ε₂}` and the number of vertices inside.
    pub fn sup_outside_w(&self) -> Result<(usize, f64, usize)> {
        let mut best: Option<(usize, f64)> = None;
        let mut excluded = 0;
        for i in 0..self.surface.len() {
            if self.in_w(i) {
                excluded += 1;
                continue;
            }
            let level = self.states[i].level;
            if best.is_none_or(|(_, l)| level > l) {
                best = Some((i, level));
            }
        }
        match best {
            Some((i, level)) => Ok((i, level, excluded)),
            None => Err(Error::Solver(
                "exclusion set swallowed surface (eps too large or R too small)".into(),
            )),
        }
    }

    /// One deformation sweep followed by the sup scan, local refinement and
    /// (every 100 sweeps) the linking check.
    pub fn sweep(&mut self) -> Result<SweepRow> {
        let variant = self.surface.variant();
        let movable = self.movable();
        let moved = map_indexed(self.exec, &movable, |_, &i| -> Result<Field> {
            let frame = h_orthonormalize(&self.tangents(i));
            let out = normal_step(
                self.m,
                self.surface.image(i),
                self.states[i].level,
                &frame,
                &self.fp,
            )?;
            Ok(match variant.leg_sign(self.surface.tag(i)) {
                Some(sign) => project(&out, sign),
                None => out,
            })
        });
        for (&i, u) in movable.iter().zip(moved) {
            self.surface.set_image(i, u?);
        }
        let fresh = self.evaluate(&movable)?;
        for (&i, st) in movable.iter().zip(fresh) {
            self.states[i] = st;
        }
        self.sweeps += 1;

        let (top, level, excluded) = self.sup_outside_w()?;
        let residual = self.m.residual(self.surface.image(top))?;
        self.record_candidate(top, residual);
        let row = SweepRow {
            sweep: self.sweeps,
            sup_level: level,
            maximizer_residual: residual,
            excluded_count: excluded,
        };
        self.trace.push(row);

        let neighbors = self.surface.neighbors(top);
        if !neighbors.is_empty() && neighbors.iter().all(|&j| self.in_w(j)) {
            let added = self.surface.refine_around(top);
            let states = self.evaluate(&added)?;
            self.states.extend(states);
        }
        if self.sweeps.is_multiple_of(LINKING_PERIOD) {
            verify_linking(&self.surface, self.bounds.rho, &self.cp, self.m)?;
        }
        Ok(row)
    }

    fn record_candidate(&mut self, vertex: usize, residual: f64) {
        if residual < self.best_residual {
            self.best_residual = residual;
            self.last_improvement = self.sweeps;
        }
        let field = self.surface.image(vertex).clone();
        match self.candidates.iter_mut().find(|c| c.vertex == vertex) {
            Some(c) if residual < c.residual => {
                c.residual = residual;
                c.field = field;
            }
            Some(_) => {}
            None => self.candidates.push(Candidate {
                vertex,
                residual,
                field,
            }),
        }
        self.candidates.sort_by(|a, b| {
            a.residual
                .total_cmp(&b.residual)
                .then(a.vertex.cmp(&b.vertex))
        });
        self.candidates.truncate(CANDIDATES);
    }

    /// Sweeps until the smallest maximizer residual seen has not improved
    /// for 50 sweeps, then refines the best maximizers by Newton and returns
    /// the first sign-changing critical point above `α`.
    pub fn run(mut self) -> Result<CriticalPointReport> {
        while self.sweeps < self.fp.max_steps {
            self.sweep()?;
            if self.sweeps - self.last_improvement >= PATIENCE {
                break;
            }
        }
        if self.sweeps - self.last_improvement < PATIENCE {
            return Err(Error::Solver(format!(
                "sign-changing solve: sweep budget {} exhausted",
                self.fp.max_steps
            )));
        }
        let target = 0.01 * self.fp.residual_tol;
        let polished = map_range(self.exec, self.candidates.len(), |k| {
            newton_polish(self.m, &self.candidates[k].field, target)
        });
        let mut failures = Vec::new();
        for p in polished {
            let p = p?;
            let class = Classification::of(&p.field);
            let level = self.m.energy(&p.field)?;
            if p.residual <= self.fp.residual_tol
                && class == Classification::SignChanging
                && level >= self.bounds.alpha
            {
                return Ok(CriticalPointReport {
                    label: LEVEL_LABEL,
                    level,
                    field: p.field,
                    residual: p.residual,
                    classification: class,
                    iterations: self.sweeps,
                    polish_iterations: p.iterations,
                    radius: self.surface.radius(),
                    trace: self.trace,
                });
            }
            failures.push(format!(
                "{} at level {level:e}, residual {:e}",
                class.as_str(),
                p.residual
            ));
        }
        Err(Error::Solver(format!(
            "no sign-changing critical point among refined maximizers: {}",
            failures.join("; ")
        )))
    }
}

pub fn sign_changing_solve(
    m: &EnergyModel,
    variant: SurfaceVariant,
    fp: &FlowParams,
    cp: &ConeParams,
    mesh_level: u32,
    exec: Execution,
) -> Result<CriticalPointReport> {
    SurfaceSolver::new(m, variant, fp, cp, mesh_level, exec)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::Nonlinearity;
    use crate::grid::Grid;

    #[test]
    fn small_surface_finds_nodal_solution() {
        let g = Grid::line(31).unwrap();
        let m = EnergyModel::new(g, Nonlinearity::odd_power(4.0).unwrap());
        let cp = ConeParams::default();
        let fp = FlowParams::default();
        let report = sign_changing_solve(
            &m,
            SurfaceVariant::GammaS,
            &fp,
            &cp,
            3,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(report.classification, Classification::SignChanging);
        assert!(report.residual <= fp.residual_tol);
        assert!(report.level >= estimate_alpha_rho(&m).unwrap().alpha);
    }

    #[test]
    fn radius_inside_sphere_rejected() {
        let g = Grid::line(31).unwrap();
        let m = EnergyModel::new(g, Nonlinearity::odd_power(4.0).unwrap());
        let mut e = eigenpairs(&g, 2).unwrap();
        let e2 = e.pop().unwrap().vector;
        let s = Surface::new(
            SurfaceVariant::GammaS,
            1.0,
            &e.pop().unwrap().vector,
            &e2,
            3,
        )
        .unwrap();
        let fp = FlowParams::default();
        let err =
            SurfaceSolver::with_surface(&m, s, &fp, &ConeParams::default(), Execution::Sequential);
        assert!(err.is_err());
    }
}
