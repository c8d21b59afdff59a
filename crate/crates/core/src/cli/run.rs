//! Subcommand execution and artifact emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use super::checks::{deform_demo, verify_all, CheckEntry, DeformReport, PROBE_SAMPLES};
use super::config::{ConfigError, RunConfig};
use crate::cones::{contraction_probe, ProbeReport, Sign};
use crate::energy::EnergyModel;
use crate::grid::io::{field_to_csv, field_to_pgm, field_to_profile_csv};
use crate::minimax::{
    estimate_alpha_rho, mountain_pass, sign_changing_solve, sweep_trace_csv, AlphaRho,
    Classification, CriticalPointReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    SolvePositive,
    SolveNegative,
    SolveSignChanging,
    SolveAll,
    VerifyLemmas,
    DeformDemo,
    ProbeCones,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::SolvePositive => "solve-positive",
            Command::SolveNegative => "solve-negative",
            Command::SolveSignChanging => "solve-sign-changing",
            Command::SolveAll => "solve-all",
            Command::VerifyLemmas => "verify-lemmas",
            Command::DeformDemo => "deform-demo",
            Command::ProbeCones => "probe-cones",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionEntry {
    pub name: String,
    pub label: &'static str,
    pub level: f64,
    pub residual: f64,
    pub classification: Classification,
    pub iterations: usize,
    pub polish_iterations: usize,
    pub radius: f64,
    /// File names relative to the output directory.
    pub field_file: String,
    pub files: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    Solver,
    Verification,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageFailure {
    pub stage: String,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub command: Command,
    pub config: RunConfig,
    pub bounds: Option<AlphaRho>,
    pub solutions: Vec<SolutionEntry>,
    pub checks: Vec<CheckEntry>,
    pub probe: Option<ProbeReport>,
    pub deform: Option<DeformReport>,
    pub failures: Vec<StageFailure>,
    /// Wall-clock seconds per stage; written to `timings.txt` only.
    pub timings: Vec<(String, f64)>,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_VERIFICATION: u8 = 4;

impl RunSummary {
    /// 3 if any solver stage failed, else 4 if any check failed, else 0.
    pub fn exit_code(&self) -> u8 {
        if self.failures.iter().any(|f| f.kind == FailureKind::Solver) {
            EXIT_SOLVER
        } else if !self.failures.is_empty() || self.checks.iter().any(|c| !c.pass) {
            EXIT_VERIFICATION
        } else {
            EXIT_OK
        }
    }

    pub fn status(&self) -> &'static str {
        match self.exit_code() {
            EXIT_OK => "ok",
            EXIT_SOLVER => "solver_failure",
            _ => "verification_failure",
        }
    }

    pub fn solution(&self, name: &str) -> Option<&SolutionEntry> {
        self.solutions.iter().find(|s| s.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command: {}", self.command.as_str()).unwrap();
        writeln!(out, "status: {}", self.status()).unwrap();
        out.push_str("\n[config]\n");
        out.push_str(&self.config.to_text());
        if let Some(b) = &self.bounds {
            writeln!(
                out,
                "\n[bounds]\nalpha: {:e}\nrho: {:e}\nc_emb: {:e}",
                b.alpha, b.rho, b.c_emb
            )
            .unwrap();
        }
        for s in &self.solutions {
            writeln!(
                out,
                "\n[solution {}]\nlabel: {}\nlevel: {:e}\nresidual: {:e}\nclassification: {}\niterations: {}\npolish_iterations: {}\nradius: {:e}\nfield_file: {}",
                s.name,
                s.label,
                s.level,
                s.residual,
                s.classification.as_str(),
                s.iterations,
                s.polish_iterations,
                s.radius,
                s.field_file
            )
            .unwrap();
        }
        if let Some(p) = &self.probe {
            out.push_str("\n[probe]\n");
            out.push_str(&p.to_text());
        }
        if let Some(d) = &self.deform {
            writeln!(
                out,
                "\n[deformation]\nc: {:e}\neps: {:e}\neps_prime: {:e}\nbeta: {:e}\nbeta_raw_min: {:e}\nbeta_samples: {}\nbeta_floor_used: {}",
                d.c, d.eps, d.eps_prime, d.beta.beta, d.beta.raw_min, d.beta.samples, d.beta.floor_used
            )
            .unwrap();
        }
        for c in &self.checks {
            writeln!(
                out,
                "\n[check {}]\npass: {}\nworst: {:e}",
                c.name, c.pass, c.worst
            )
            .unwrap();
        }
        for f in &self.failures {
            let kind = match f.kind {
                FailureKind::Solver => "solver",
                FailureKind::Verification => "verification",
            };
            writeln!(
                out,
                "\n[failure {}]\nkind: {kind}\nmessage: {}",
                f.stage, f.message
            )
            .unwrap();
        }
        out
    }

    pub fn timings_text(&self) -> String {
        let mut out = String::new();
        for (stage, secs) in &self.timings {
            writeln!(out, "{stage}: {secs:.3}").unwrap();
        }
        out
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| RunError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `<name>.csv`, `<name>.pgm` (2D) or `<name>.xy.csv` (1D), and
/// `<name>.trace.csv`.
fn emit_solution(
    dir: &Path,
    name: &str,
    report: &CriticalPointReport,
) -> Result<SolutionEntry, RunError> {
    let field_file = format!("{name}.csv");
    write(dir, &field_file, &field_to_csv(&report.field))?;
    let mut files = vec![field_file.clone()];
    if report.field.grid().dim() == 2 {
        let pgm = field_to_pgm(&report.field).expect("2D field");
        files.push(format!("{name}.pgm"));
        write(dir, &files[1], &pgm)?;
    } else {
        files.push(format!("{name}.xy.csv"));
        write(dir, &files[1], &field_to_profile_csv(&report.field))?;
    }
    files.push(format!("{name}.trace.csv"));
    write(dir, &files[2], &sweep_trace_csv(&report.trace))?;
    Ok(SolutionEntry {
        name: name.to_string(),
        label: report.label,
        level: report.level,
        residual: report.residual,
        classification: report.classification,
        iterations: report.iterations,
        polish_iterations: report.polish_iterations,
        radius: report.radius,
        field_file,
        files,
    })
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    m: EnergyModel,
    summary: RunSummary,
}

impl Runner<'_> {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.summary
            .timings
            .push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    fn fail(&mut self, stage: &str, kind: FailureKind, message: String) {
        self.summary.failures.push(StageFailure {
            stage: stage.to_string(),
            kind,
            message,
        });
    }

    fn bounds(&mut self) -> Option<AlphaRho> {
        if self.summary.bounds.is_none() {
            match self.timed("bounds", |r| estimate_alpha_rho(&r.m)) {
                Ok(b) => self.summary.bounds = Some(b),
                Err(e) => self.fail("bounds", FailureKind::Solver, e.to_string()),
            }
        }
        self.summary.bounds
    }

    /// Records a solution after the level filter `I > α`.
    fn accept(
        &mut self,
        name: &str,
        result: crate::Result<CriticalPointReport>,
    ) -> Result<(), RunError> {
        let report = match result {
            Ok(r) => r,
            Err(e) => {
                self.fail(name, FailureKind::Solver, e.to_string());
                return Ok(());
            }
        };
        if let Some(b) = self.bounds() {
            if !(report.level > b.alpha) {
                self.fail(
                    name,
                    FailureKind::Solver,
                    format!(
                        "level {:e} does not exceed alpha {:e} (trivial collapse)",
                        report.level, b.alpha
                    ),
                );
                return Ok(());
            }
        }
        let entry = emit_solution(&self.cfg.output, name, &report)?;
        self.summary.solutions.push(entry);
        Ok(())
    }

    fn solve_cone(&mut self, sign: Sign) -> Result<(), RunError> {
        let name = match sign {
            Sign::Plus => "positive",
            Sign::Minus => "negative",
        };
        let cp = self.cfg.cone_params()?;
        let fp = self.cfg.flow_params();
        let result = self.timed(name, |r| {
            mountain_pass(&r.m, sign, &fp, &cp, r.cfg.path_nodes, r.cfg.execution)
        });
        self.accept(name, result)
    }

    /// One solution per configured variant, or only the first when `single`.
    fn solve_sign_changing(&mut self, single: bool) -> Result<(), RunError> {
        let cp = self.cfg.cone_params()?;
        let fp = self.cfg.flow_params();
        let variants = if single {
            &self.cfg.variants[..1]
        } else {
            &self.cfg.variants[..]
        };
        for &variant in variants {
            let name = if single {
                "sign_changing".to_string()
            } else {
                format!("sign_changing_{}", variant.as_str())
            };
            let result = self.timed(&name, |r| {
                sign_changing_solve(&r.m, variant, &fp, &cp, r.cfg.mesh_level, r.cfg.execution)
            });
            self.accept(&name, result)?;
        }
        Ok(())
    }
}

/// Runs `command` under `cfg`, writing `summary.txt`, `timings.txt` and the
/// per-solution files into `cfg.output`. Stage failures are recorded in the
/// summary; only configuration and file-system errors are returned.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    let m = cfg.model()?;
    let cp = cfg.cone_params()?;
    fs::create_dir_all(&cfg.output).map_err(|source| RunError::Write {
        path: cfg.output.display().to_string(),
        source,
    })?;
    let mut runner = Runner {
        cfg,
        m,
        summary: RunSummary {
            command,
            config: cfg.clone(),
            bounds: None,
            solutions: Vec::new(),
            checks: Vec::new(),
            probe: None,
            deform: None,
            failures: Vec::new(),
            timings: Vec::new(),
        },
    };
    let (seed, exec) = (cfg.seed, cfg.execution);
    match command {
        Command::SolvePositive => runner.solve_cone(Sign::Plus)?,
        Command::SolveNegative => runner.solve_cone(Sign::Minus)?,
        Command::SolveSignChanging => runner.solve_sign_changing(false)?,
        Command::SolveAll => {
            runner.solve_cone(Sign::Plus)?;
            runner.solve_cone(Sign::Minus)?;
            runner.solve_sign_changing(true)?;
        }
        Command::VerifyLemmas => {
            match runner.timed("verify", |r| verify_all(&r.m, &cp, seed, exec)) {
                Ok((checks, probe, deform)) => {
                    runner.summary.checks = checks;
                    runner.summary.probe = Some(probe);
                    runner.summary.deform = Some(deform);
                }
                Err(e) => runner.fail("verify", FailureKind::Verification, e.to_string()),
            }
        }
        Command::DeformDemo => match runner.timed("deform", |r| deform_demo(&r.m, &cp, seed, exec))
        {
            Ok(report) => {
                runner.summary.checks = report.checks.clone();
                runner.summary.deform = Some(report);
            }
            Err(e) => runner.fail("deform", FailureKind::Verification, e.to_string()),
        },
        Command::ProbeCones => {
            let probe = runner.timed("probe", |r| {
                contraction_probe(&r.m, &cp, PROBE_SAMPLES, seed, exec)
            });
            match probe {
                Ok(p) => {
                    write(&cfg.output, "probe.txt", &p.to_text())?;
                    runner.summary.probe = Some(p);
                }
                Err(e) => runner.fail("probe", FailureKind::Solver, e.to_string()),
            }
        }
    }
    let summary = runner.summary;
    write(&cfg.output, "summary.txt", &summary.to_text())?;
    write(&cfg.output, "timings.txt", &summary.timings_text())?;
    Ok(summary)
}
