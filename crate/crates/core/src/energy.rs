//! The energy functional `I(u) = ½‖u‖² − ∫F(u)`, its gradient and the solution
//! operator `A(u) = (−Δ)⁻¹ f(u)` on a [`Grid`].
//!
//! With the discrete H-inner product `(u, v)_H = h^d uᵀ L_h v`, the
//! H-representation of `I′(u)` is exactly `u − A(u)`, so
//! `I′(u)(u − A(u)) = ‖u − A(u)‖²` holds up to the Poisson tolerance.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{h_inner, laplacian, norm_h, solve_poisson, DirectPoisson, Field, Grid};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonlinearityKind {
    OddPower,
    Custom,
}

/// Pointwise nonlinearity `f` with primitive `F`, growth exponent `p` and
/// Ambrosetti–Rabinowitz constant `μ`.
///
/// `μ` only enters [`validate_ar`]; no solver reads it.
#[derive(Clone)]
pub struct Nonlinearity {
    p: f64,
    mu: f64,
    rule: Rule,
}

#[derive(Clone)]
enum Rule {
    OddPower,
    Custom {
        f: ScalarFn,
        primitive: ScalarFn,
        derivative: Option<ScalarFn>,
    },
    #[cfg(test)]
    Linear(f64),
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("kind", &self.kind())
            .field("p", &self.p)
            .field("mu", &self.mu)
            .finish()
    }
}

impl Nonlinearity {
    /// `f(u) = |u|^{p−2} u`, `F(u) = |u|^p / p`, with `μ = p`.
    pub fn odd_power(p: f64) -> Result<Self> {
        Self::odd_power_with_mu(p, p)
    }

    pub fn odd_power_with_mu(p: f64, mu: f64) -> Result<Self> {
        check_exponents(p, mu)?;
        if mu > p {
            return Err(Error::invalid("mu", "must be ≤ p for odd_power"));
        }
        Ok(Nonlinearity {
            p,
            mu,
            rule: Rule::OddPower,
        })
    }

    /// A user-supplied `f` and primitive `F`; both must vanish at 0.
    pub fn custom(
        p: f64,
        mu: f64,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        primitive: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_exponents(p, mu)?;
        if f(0.0) != 0.0 {
            return Err(Error::invalid("f", "must satisfy f(0) = 0"));
        }
        if primitive(0.0) != 0.0 {
            return Err(Error::invalid("F", "must satisfy F(0) = 0"));
        }
        Ok(Nonlinearity {
            p,
            mu,
            rule: Rule::Custom {
                f: Arc::new(f),
                primitive: Arc::new(primitive),
                derivative: None,
            },
        })
    }

    /// Supplies `f′` for a custom nonlinearity; otherwise it is differenced.
    pub fn with_derivative(mut self, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        if let Rule::Custom { derivative, .. } = &mut self.rule {
            *derivative = Some(Arc::new(df));
        }
        self
    }

    /// `f(u) = λu`, exempt from the growth checks. Test builds only.
    #[cfg(test)]
    pub(crate) fn linear(lambda: f64) -> Self {
        Nonlinearity {
            p: 2.0,
            mu: 2.0,
            rule: Rule::Linear(lambda),
        }
    }

    pub fn kind(&self) -> NonlinearityKind {
        match self.rule {
            Rule::OddPower => NonlinearityKind::OddPower,
            _ => NonlinearityKind::Custom,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Known to satisfy `f(−u) = −f(u)`.
    pub fn is_odd(&self) -> bool {
        matches!(self.rule, Rule::OddPower)
    }

    pub fn f(&self, u: f64) -> f64 {
        match &self.rule {
            Rule::OddPower => abs_pow(u, self.p - 2.0) * u,
            Rule::Custom { f, .. } => f(u),
            #[cfg(test)]
            Rule::Linear(l) => l * u,
        }
    }

    pub fn primitive(&self, u: f64) -> f64 {
        match &self.rule {
            Rule::OddPower => abs_pow(u, self.p) / self.p,
            Rule::Custom { primitive, .. } => primitive(u),
            #[cfg(test)]
            Rule::Linear(l) => 0.5 * l * u * u,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match &self.rule {
            Rule::OddPower => (self.p - 1.0) * abs_pow(u, self.p - 2.0),
            Rule::Custom {
                derivative: Some(df),
                ..
            } => df(u),
            Rule::Custom { f, .. } => {
                let s = 1e-6 * u.abs().max(1.0);
                (f(u + s) - f(u - s)) / (2.0 * s)
            }
            #[cfg(test)]
            Rule::Linear(l) => *l,
        }
    }
}

fn check_exponents(p: f64, mu: f64) -> Result<()> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::invalid("p", "must be > 2"));
    }
    if !(mu > 2.0) || !mu.is_finite() {
        return Err(Error::invalid("mu", "must be > 2"));
    }
    Ok(())
}

fn abs_pow(u: f64, e: f64) -> f64 {
    let a = u.abs();
    if e == e.trunc() && e.abs() < 64.0 {
        a.powi(e as i32)
    } else {
        a.powf(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArWitness {
    pub u: f64,
    /// `μ F(u)`.
    pub mu_primitive: f64,
    /// `u f(u)`.
    pub u_f: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArReport {
    pub pass: bool,
    /// `μF(u) ≤ u f(u)` and `F(u) > 0` at every sample.
    pub ar_pass: bool,
    /// `|f(u)|/|u| < 1e-3` at `|u| = 1e-6`.
    pub small_ratio_pass: bool,
    pub small_ratio: f64,
    /// Sample with the largest relative excess `(μF − uf)/max(|uf|, tiny)`.
    pub worst: Option<ArWitness>,
    pub worst_excess: f64,
    pub samples: usize,
}

/// Samples the growth conditions at log-spaced `±u` in `[1e-6, range]`.
pub fn validate_ar(nl: &Nonlinearity, sample_count: usize, range: f64) -> Result<ArReport> {
    if sample_count < 100 {
        return Err(Error::invalid("sample_count", "must be ≥ 100"));
    }
    if !(range > 1e-6) {
        return Err(Error::invalid("range", "must exceed 1e-6"));
    }
    let half = sample_count.div_ceil(2);
    let (lo, hi) = (1e-6f64.ln(), range.ln());
    let mut ar_pass = true;
    let mut worst = None;
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 0..half {
        let mag = (lo + (hi - lo) * k as f64 / (half - 1).max(1) as f64).exp();
        for u in [mag, -mag] {
            let mu_f = nl.mu() * nl.primitive(u);
            let u_f = u * nl.f(u);
            let excess = (mu_f - u_f) / u_f.abs().max(f64::MIN_POSITIVE);
            let ok = nl.primitive(u) > 0.0 && mu_f <= u_f * (1.0 + 1e-12);
            if !ok {
                ar_pass = false;
            }
            if excess > worst_excess || worst.is_none() {
                worst_excess = excess;
                worst = Some(ArWitness {
                    u,
                    mu_primitive: mu_f,
                    u_f,
                });
            }
        }
    }
    let small_ratio = [1e-6f64, -1e-6]
        .iter()
        .map(|&u| (nl.f(u) / u).abs())
        .fold(0.0, f64::max);
    let small_ratio_pass = small_ratio < 1e-3;
    Ok(ArReport {
        pass: ar_pass && small_ratio_pass,
        ar_pass,
        small_ratio_pass,
        small_ratio,
        worst,
        worst_excess,
        samples: 2 * half,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PoissonMethod {
    /// Tridiagonal elimination (1D) or sine-transform diagonalization (2D).
    #[default]
    Direct,
    ConjugateGradient,
}

/// Grid, nonlinearity and Poisson settings; immutable once built.
#[derive(Clone, Debug)]
pub struct EnergyModel {
    grid: Grid,
    nl: Nonlinearity,
    poisson_tol: f64,
    method: PoissonMethod,
    direct: Arc<DirectPoisson>,
}

pub const DEFAULT_POISSON_TOL: f64 = 1e-10;

impl EnergyModel {
    pub fn new(grid: Grid, nl: Nonlinearity) -> Self {
        EnergyModel {
            grid,
            nl,
            poisson_tol: DEFAULT_POISSON_TOL,
            method: PoissonMethod::Direct,
            direct: Arc::new(DirectPoisson::new(grid)),
        }
    }

    pub fn with_poisson_tol(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol <= 1e-6) {
            return Err(Error::invalid("poisson_tol", "must be in (0, 1e-6]"));
        }
        self.poisson_tol = tol;
        Ok(self)
    }

    pub fn with_poisson_method(mut self, method: PoissonMethod) -> Self {
        self.method = method;
        self
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn poisson_tol(&self) -> f64 {
        self.poisson_tol
    }

    fn check(&self, u: &Field) -> Result<()> {
        self.grid.ensure_same(&u.grid())
    }

    /// `(−Δ_h)⁻¹ rhs`.
    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        self.check(rhs)?;
        match self.method {
            PoissonMethod::Direct => Ok(self.direct.solve_unchecked(rhs)),
            PoissonMethod::ConjugateGradient => solve_poisson(&self.grid, rhs, self.poisson_tol),
        }
    }

    /// Nodewise `f(u)`.
    pub fn nonlinear_term(&self, u: &Field) -> Field {
        u.map(|v| self.nl.f(v))
    }

    /// `I_h(u) = ½ (u, u)_H − h^d Σ F(uᵢ)`.
    pub fn energy(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let quad = 0.5 * h_inner(u, u);
        let pot: f64 = u.values().iter().map(|&v| self.nl.primitive(v)).sum();
        let value = quad - self.grid.cell_volume() * pot;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFinite("energy"))
        }
    }

    /// `A(u) = (−Δ_h)⁻¹ f(u)`.
    pub fn operator_a(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        let rhs = self.nonlinear_term(u);
        if !rhs.is_finite() {
            return Err(Error::NonFinite("f(u)"));
        }
        self.solve(&rhs)
    }

    /// H-representation of `I′(u)`: `u − A(u)`.
    pub fn gradient_h(&self, u: &Field) -> Result<Field> {
        Ok(u.sub(&self.operator_a(u)?))
    }

    /// `‖I′(u)‖ = ‖u − A(u)‖_H`.
    pub fn residual(&self, u: &Field) -> Result<f64> {
        Ok(norm_h(&self.gradient_h(u)?))
    }

    /// `I′(u) w = h^d Σ (L_h u − f(u))ᵢ wᵢ`, evaluated without `A`.
    pub fn derivative(&self, u: &Field, w: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(w)?;
        let lu = laplacian(u);
        let sum: f64 = lu
            .values()
            .iter()
            .zip(u.values())
            .zip(w.values())
            .map(|((l, &uv), wv)| (l - self.nl.f(uv)) * wv)
            .sum();
        Ok(self.grid.cell_volume() * sum)
    }

    /// `(I′(u)(u − A(u)), ‖u − A(u)‖²)`.
    pub fn lemma_a_identity(&self, u: &Field) -> Result<(f64, f64)> {
        let g = self.gradient_h(u)?;
        let lhs = self.derivative(u, &g)?;
        let rhs = h_inner(&g, &g);
        Ok((lhs, rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{eigenpairs, inner_h};
    use crate::sampling::{random_smooth_field, substream};

    fn model(grid: Grid) -> EnergyModel {
        EnergyModel::new(grid, Nonlinearity::odd_power(4.0).unwrap())
    }

    #[test]
    fn odd_power_passes_ar_with_equality() {
        let nl = Nonlinearity::odd_power(4.0).unwrap();
        let report = validate_ar(&nl, 200, 1e3).unwrap();
        assert!(report.pass, "{report:?}");
        assert!(report.worst_excess.abs() < 1e-12);
    }

    #[test]
    fn linear_growth_rejected() {
        assert!(Nonlinearity::custom(3.0, 2.0, |u| u, |u| 0.5 * u * u).is_err());
        assert!(Nonlinearity::odd_power(2.0).is_err());
        assert!(Nonlinearity::odd_power_with_mu(4.0, 5.0).is_err());
    }

    #[test]
    fn ar_violation_has_witness() {
        // f(u) = |u|^{1/2} u is homogeneous of degree 5/2, so μ = 3 overshoots.
        let nl = Nonlinearity::custom(
            2.5,
            3.0,
            |u| u.abs().sqrt() * u,
            |u| u.abs().powf(2.5) / 2.5,
        )
        .unwrap();
        let report = validate_ar(&nl, 100, 10.0).unwrap();
        assert!(!report.pass);
        let w = report.worst.unwrap();
        assert!(w.mu_primitive > w.u_f);
    }

    #[test]
    fn energy_of_zero_and_scaled_eigenfunction() {
        let g = Grid::square(15).unwrap();
        let m = model(g);
        assert_eq!(m.energy(&Field::zeros(g)).unwrap(), 0.0);
        let e1 = eigenpairs(&g, 1).unwrap().remove(0).vector;
        let l4 = crate::grid::norm_lp(&e1, 4.0).unwrap().powi(4);
        for t in [0.1f64, 1.0, 3.0] {
            let expected = t * t / 2.0 - t.powi(4) / 4.0 * l4;
            let got = m.energy(&e1.scaled(t)).unwrap();
            assert!((got - expected).abs() < 1e-10 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn energy_of_sine_matches_quadrature() {
        let g = Grid::line(255).unwrap();
        let u = Field::from_fn(g, |x, _| (std::f64::consts::PI * x).sin());
        let expected = std::f64::consts::PI.powi(2) / 4.0 - 0.25 * 0.375;
        let got = model(g).energy(&u).unwrap();
        assert!((got - expected).abs() / expected < 1e-2);
    }

    #[test]
    fn operator_a_basics() {
        let g = Grid::square(15).unwrap();
        let m = model(g);
        assert_eq!(m.operator_a(&Field::zeros(g)).unwrap(), Field::zeros(g));
        let pair = eigenpairs(&g, 1).unwrap().remove(0);
        let linear = EnergyModel::new(g, Nonlinearity::linear(pair.value));
        let a = linear.operator_a(&pair.vector).unwrap();
        assert!(norm_h(&a.sub(&pair.vector)) < 1e-10);
    }

    #[test]
    fn gradient_is_zero_at_zero() {
        let g = Grid::line(20).unwrap();
        assert_eq!(
            model(g).gradient_h(&Field::zeros(g)).unwrap(),
            Field::zeros(g)
        );
    }

    #[test]
    fn operator_norm_identity() {
        let g = Grid::square(12).unwrap();
        let m = model(g);
        let mut rng = substream(3, 0);
        let u = random_smooth_field(g, &mut rng).scaled(20.0);
        let grad = m.gradient_h(&u).unwrap();
        let gn = norm_h(&grad);
        for _ in 0..10 {
            let w = crate::sampling::random_unit_field(g, &mut rng);
            assert!(m.derivative(&u, &w).unwrap() <= gn + 1e-10);
        }
        let w = grad.scaled(1.0 / gn);
        assert!((m.derivative(&u, &w).unwrap() - gn).abs() < 1e-8 * (1.0 + gn));
        assert!((inner_h(&grad, &w).unwrap() - gn).abs() < 1e-8 * (1.0 + gn));
    }

    #[test]
    fn poisson_tol_range() {
        let g = Grid::line(8).unwrap();
        assert!(model(g).with_poisson_tol(1e-5).is_err());
        assert!(model(g).with_poisson_tol(0.0).is_err());
        assert!(model(g).with_poisson_tol(1e-8).is_ok());
    }

    #[test]
    fn cg_and_direct_agree() {
        let g = Grid::square(10).unwrap();
        let u = random_smooth_field(g, &mut substream(5, 1)).scaled(5.0);
        let direct = model(g).operator_a(&u).unwrap();
        let cg = model(g)
            .with_poisson_method(PoissonMethod::ConjugateGradient)
            .operator_a(&u)
            .unwrap();
        assert!(norm_h(&direct.sub(&cg)) < 1e-8 * (1.0 + norm_h(&direct)));
    }
}
