//! Runtime checks behind `verify-lemmas` and `deform-demo`.

use crate::cones::{
    cone_samples, contraction_probe, surrogate_distance, ConeParams, ProbeReport, Sign,
};
use crate::energy::{validate_ar, EnergyModel};
use crate::error::Result;
use crate::exec::{map_range, Execution};
use crate::flow::{
    band_samples, deformation_eta, estimate_beta, BetaEstimate, CutoffSpec, EtaOptions,
    PseudoGradient, SolutionOperator,
};
use crate::grid::{eigenpairs, inner_h, norm_h, Field};
use crate::sampling::{random_field, random_smooth_field, random_unit_field, substream};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckEntry {
    pub name: &'static str,
    pub pass: bool,
    /// The statistic compared against the threshold (meaning per check).
    pub worst: f64,
}

impl CheckEntry {
    fn new(name: &'static str, pass: bool, worst: f64) -> Self {
        CheckEntry { name, pass, worst }
    }
}

const IDENTITY_SAMPLES: usize = 100;
const PAIR_SAMPLES: usize = 20;
const FD_STEP: f64 = 1e-5;

fn fold_max(values: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    let mut worst = 0.0f64;
    for v in values {
        worst = worst.max(v?);
    }
    Ok(worst)
}

/// Largest `|I′(u)(u−A(u)) − ‖u−A(u)‖²| / (1 + ‖u−A(u)‖²)` over nodewise
/// random fields.
pub fn descent_identity(m: &EnergyModel, seed: u64, exec: Execution) -> Result<CheckEntry> {
    let worst = fold_max(map_range(exec, IDENTITY_SAMPLES, |i| {
        let u = random_field(m.grid(), &mut substream(seed, i as u64));
        let (lhs, rhs) = m.lemma_a_identity(&u)?;
        Ok((lhs - rhs).abs() / (1.0 + rhs))
    }))?;
    Ok(CheckEntry::new("descent_identity", worst <= 1e-10, worst))
}

/// `(g, w)_H ≤ ‖g‖_H` for unit `w` (to 1e-10), with equality at
/// `w = g/‖g‖` (to 1e-8). Reports the larger relative defect.
pub fn gradient_norm(m: &EnergyModel, seed: u64, exec: Execution) -> Result<CheckEntry> {
    let rows = map_range(exec, PAIR_SAMPLES, |i| -> Result<(f64, f64)> {
        let mut rng = substream(seed, i as u64);
        let u = random_smooth_field(m.grid(), &mut rng).scaled(4.0);
        let g = m.gradient_h(&u)?;
        let norm = norm_h(&g);
        let scale = norm.max(1.0);
        let mut excess = 0.0f64;
        for _ in 0..10 {
            let w = random_unit_field(m.grid(), &mut rng);
            excess = excess.max((inner_h(&g, &w)? - norm) / scale);
        }
        let defect = if norm > 0.0 {
            (inner_h(&g, &g.scaled(1.0 / norm))? - norm).abs() / scale
        } else {
            0.0
        };
        Ok((excess, defect))
    });
    let (mut excess, mut defect) = (0.0f64, 0.0f64);
    for r in rows {
        let (e, d) = r?;
        excess = excess.max(e);
        defect = defect.max(d);
    }
    Ok(CheckEntry::new(
        "gradient_norm",
        excess <= 1e-10 && defect <= 1e-8,
        excess.max(defect),
    ))
}

/// Central differences of `I` against `(gradient_h(u), w)_H`.
pub fn finite_difference(m: &EnergyModel, seed: u64, exec: Execution) -> Result<CheckEntry> {
    let worst = fold_max(map_range(exec, PAIR_SAMPLES, |i| {
        let mut rng = substream(seed, i as u64);
        let u = random_smooth_field(m.grid(), &mut rng);
        let w = random_smooth_field(m.grid(), &mut rng);
        let mut up = u.clone();
        up.axpy(FD_STEP, &w);
        let mut down = u.clone();
        down.axpy(-FD_STEP, &w);
        let fd = (m.energy(&up)? - m.energy(&down)?) / (2.0 * FD_STEP);
        let exact = inner_h(&m.gradient_h(&u)?, &w)?;
        Ok((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE))
    }))?;
    Ok(CheckEntry::new("finite_difference", worst <= 1e-6, worst))
}

/// The pseudo-gradient inequalities for `B`: `½‖u−B‖ ≤ ‖u−A‖ ≤ 2‖u−B‖`
/// and `I′(u)(u−B(u)) ≥ ½‖u−A(u)‖²`. Reports the smallest
/// `I′(u)(u−B(u)) / ‖u−A(u)‖²`.
pub fn pseudo_gradient(
    m: &EnergyModel,
    b: &dyn PseudoGradient,
    seed: u64,
    exec: Execution,
) -> Result<CheckEntry> {
    let rows = map_range(exec, PAIR_SAMPLES, |i| -> Result<(bool, f64)> {
        let u = random_smooth_field(m.grid(), &mut substream(seed, i as u64)).scaled(4.0);
        let ua = u.sub(&m.operator_a(&u)?);
        let ub = u.sub(&b.apply(m, &u)?);
        let (ra, rb) = (norm_h(&ua), norm_h(&ub));
        let bracket = 0.5 * rb <= ra && ra <= 2.0 * rb;
        let ratio = if ra > 0.0 {
            m.derivative(&u, &ub)? / (ra * ra)
        } else {
            1.0
        };
        Ok((bracket, ratio))
    });
    let (mut pass, mut worst) = (true, f64::INFINITY);
    for r in rows {
        let (bracket, ratio) = r?;
        pass &= bracket;
        worst = worst.min(ratio);
    }
    Ok(CheckEntry::new(
        "pseudo_gradient",
        pass && worst >= 0.5,
        worst,
    ))
}

/// `A(u) ≤ 0` nodewise whenever `u ≤ 0`; reports the largest value of `A(u)`.
pub fn sign_preservation(m: &EnergyModel, seed: u64, exec: Execution) -> Result<CheckEntry> {
    let mut worst = f64::NEG_INFINITY;
    for v in map_range(exec, IDENTITY_SAMPLES, |i| -> Result<f64> {
        let u = random_field(m.grid(), &mut substream(seed, i as u64)).map(|v| -v.abs());
        Ok(m.operator_a(&u)?.max())
    }) {
        worst = worst.max(v?);
    }
    Ok(CheckEntry::new("sign_preservation", worst <= 0.0, worst))
}

pub const PROBE_SAMPLES: usize = 100;

/// Contraction and invariance of `P̄_ε⁻` under `A` at half the empirical
/// radius `ε₀` located by a first probe at `cp.eps`.
pub fn cone_checks(
    m: &EnergyModel,
    cp: &ConeParams,
    seed: u64,
    exec: Execution,
) -> Result<(ProbeReport, Vec<CheckEntry>)> {
    let first = contraction_probe(m, cp, PROBE_SAMPLES, seed, exec)?;
    if !(first.eps0_empirical > 0.0) {
        return Ok((
            first,
            vec![
                CheckEntry::new("cone_contraction", false, f64::INFINITY),
                CheckEntry::new("cone_invariance", false, f64::INFINITY),
            ],
        ));
    }
    let half = ConeParams::new(0.5 * first.eps0_empirical)?.with_mode(cp.mode());
    let probe = contraction_probe(m, &half, PROBE_SAMPLES, seed, exec)?;
    let checks = vec![
        CheckEntry::new("cone_contraction", probe.max_ratio <= 0.5, probe.max_ratio),
        CheckEntry::new(
            "cone_invariance",
            probe.invariant,
            probe.max_image_distance / probe.eps,
        ),
    ];
    Ok((probe, checks))
}

pub fn growth_conditions(m: &EnergyModel) -> Result<CheckEntry> {
    let report = validate_ar(m.nonlinearity(), 1000, 1e3)?;
    Ok(CheckEntry::new(
        "growth_conditions",
        report.pass,
        report.worst_excess,
    ))
}

#[derive(Clone, Debug)]
pub struct DeformReport {
    pub c: f64,
    pub eps: f64,
    pub eps_prime: f64,
    pub beta: BetaEstimate,
    pub checks: Vec<CheckEntry>,
}

pub const DEFORM_SAMPLES: usize = 50;

/// Largest `I(t·e₁)` over a geometric grid of `t`.
fn ray_peak(m: &EnergyModel) -> Result<f64> {
    let e1 = eigenpairs(&m.grid(), 1)?.remove(0).vector;
    let mut best = f64::NEG_INFINITY;
    for k in 0..400 {
        let t = 1e-3 * 2f64.powf(k as f64 / 16.0);
        match m.energy(&e1.scaled(t)) {
            Ok(e) if e > best => best = e,
            Ok(_) => {}
            Err(_) => break,
        }
    }
    Ok(best)
}

/// Runs `η` on a band at half the ray peak along `e₁`, which lies below
/// the lowest nonzero critical level, and checks its four properties.
pub fn deform_demo(
    m: &EnergyModel,
    cp: &ConeParams,
    seed: u64,
    exec: Execution,
) -> Result<DeformReport> {
    let c = 0.5 * ray_peak(m)?;
    let cs = CutoffSpec::new(c, 0.05 * c, 0.1 * c, 1.0)?;
    let beta = estimate_beta(m, &cs, cp, seed, exec)?;
    let opts = EtaOptions::new(beta.beta);
    let certified = !beta.floor_used && beta.samples > 0;
    let mut checks = vec![CheckEntry::new("band_certified", certified, beta.raw_min)];

    let inside = band_samples(
        m,
        (c - cs.eps, c + cs.eps),
        Some((cp.eps2(), cp)),
        DEFORM_SAMPLES,
        seed.wrapping_add(1),
        exec,
    )?;
    let half = DEFORM_SAMPLES / 2;
    let mut outside = band_samples(
        m,
        (c + 1.5 * cs.eps_prime, c + 3.0 * cs.eps_prime),
        None,
        half,
        seed.wrapping_add(2),
        exec,
    )?;
    outside.extend(band_samples(
        m,
        (c - 3.0 * cs.eps_prime, c - 1.5 * cs.eps_prime),
        None,
        DEFORM_SAMPLES - half,
        seed.wrapping_add(3),
        exec,
    )?);

    let identity = map_range(exec, inside.len(), |i| -> Result<bool> {
        Ok(deformation_eta(m, &inside[i], &cs, cp, 0.0, &opts)?.field == inside[i])
    });
    let moved = identity.iter().filter(|r| !matches!(r, Ok(true))).count();
    for r in identity {
        r?;
    }
    checks.push(CheckEntry::new(
        "deformation_identity_at_zero",
        moved == 0 && !inside.is_empty(),
        moved as f64,
    ));

    let frozen = map_range(exec, outside.len(), |i| -> Result<bool> {
        Ok(deformation_eta(m, &outside[i], &cs, cp, 1.0, &opts)?.field == outside[i])
    });
    let mut moved = 0;
    for r in frozen {
        if !r? {
            moved += 1;
        }
    }
    checks.push(CheckEntry::new(
        "deformation_frozen_outside_band",
        moved == 0 && outside.len() == DEFORM_SAMPLES,
        moved as f64,
    ));

    let target = c - cs.eps;
    let mut excess = f64::NEG_INFINITY;
    for r in map_range(exec, inside.len(), |i| -> Result<f64> {
        let out = deformation_eta(m, &inside[i], &cs, cp, 1.0, &opts)?;
        Ok(m.energy(&out.field)? - target)
    }) {
        excess = excess.max(r?);
    }
    let lowered_all = inside.len() == DEFORM_SAMPLES;
    checks.push(CheckEntry::new(
        "deformation_lowers_band",
        lowered_all && excess <= 0.0,
        excess,
    ));

    checks.push(cone_check(m, cp, seed, &opts, exec)?);
    Ok(DeformReport {
        c,
        eps: cs.eps,
        eps_prime: cs.eps_prime,
        beta,
        checks,
    })
}

/// `η(1, ·)` on samples of `P̄_ε⁻`, with a band from half the lower-quartile
/// sample energy to past the largest one. Reports the largest distance to
/// `P⁻` in units of `ε`.
fn cone_check(
    m: &EnergyModel,
    cp: &ConeParams,
    seed: u64,
    opts: &EtaOptions<'_>,
    exec: Execution,
) -> Result<CheckEntry> {
    let samples: Vec<Field> = cone_samples(m, cp.eps(), DEFORM_SAMPLES, seed.wrapping_add(4));
    let mut levels = Vec::with_capacity(samples.len());
    for u in &samples {
        levels.push(m.energy(u)?);
    }
    levels.sort_by(f64::total_cmp);
    let bottom = 0.5 * levels[levels.len() / 4].max(1e-6);
    let top = 2.0 * levels[levels.len() - 1].max(bottom);
    let cs = CutoffSpec::new(
        0.5 * (bottom + top),
        0.25 * (top - bottom),
        0.5 * (top - bottom),
        1.0,
    )?;
    let worst = fold_max(map_range(exec, samples.len(), |i| {
        let out = deformation_eta(m, &samples[i], &cs, cp, 1.0, opts)?;
        Ok(surrogate_distance(&out.field, Sign::Minus) / cp.eps())
    }))?;
    Ok(CheckEntry::new(
        "deformation_keeps_cones",
        worst <= 1.0,
        worst,
    ))
}

/// Every check of `verify-lemmas`, in report order.
pub fn verify_all(
    m: &EnergyModel,
    cp: &ConeParams,
    seed: u64,
    exec: Execution,
) -> Result<(Vec<CheckEntry>, ProbeReport, DeformReport)> {
    let mut checks = vec![
        growth_conditions(m)?,
        descent_identity(m, seed, exec)?,
        gradient_norm(m, seed, exec)?,
        finite_difference(m, seed, exec)?,
        pseudo_gradient(m, &SolutionOperator, seed, exec)?,
        sign_preservation(m, seed, exec)?,
    ];
    let (probe, cone) = cone_checks(m, cp, seed, exec)?;
    checks.extend(cone);
    let deform = deform_demo(m, cp, seed, exec)?;
    checks.extend(deform.checks.iter().cloned());
    Ok((checks, probe, deform))
}
