//! Running cases and suites, and the report records they produce.
//!
//! Reports are serialized with a fixed field order and no wall-clock data
//! unless timings are requested, so equal configurations give byte-identical
//! JSON.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    self, BoundReport, CausalCheck, CausalKernelSearch, EqualityDiagnostic, Expectation,
    IdentityCheck, Tolerances,
};
use crate::cases::{
    case_definition, CaseDefinition, CaseExpectations, CaseName, CausalExpectation,
};
use crate::eigen::{EigenOptions, Spectrum};
use crate::error::{LabError, Result};
use crate::fem::PencilDiagnostics;
use crate::gallery::{gallery_counterexample, ImmersionSpec};
use crate::mesh::{build_mesh, ParamMesh};
use crate::minkowski::{
    avg_lemma_rhs, euclid_avg_rhs, random_unit_timelike, sphere_volume, LorentzVector,
    SymBilinearForm,
};
use crate::pipeline::{Analysis, AnalysisOptions, CurvatureSource, DiscretizationMeta};
use crate::quadrature::{
    monte_carlo_section_integral, monte_carlo_section_mean, monte_carlo_sphere_integral,
    monte_carlo_sphere_mean, sphere_slice_integral, IntegralResult,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Finest mesh level accepted on the command line.
pub const MAX_LEVEL: usize = 7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: CaseName,
    pub n: usize,
    /// Ambient dimension; sphere-hyperplane only.
    pub m: Option<usize>,
    pub level: usize,
    /// ASCII mesh file used instead of the built-in mesh of `level`.
    pub mesh: Option<PathBuf>,
    /// Immersion file for the custom case.
    pub spec: Option<PathBuf>,
    /// Sampled timelike directions, in addition to the reference direction.
    pub samples: usize,
    pub seed: u64,
    /// Directions searched for the smallest right-hand side.
    pub infimum_samples: usize,
    /// Monte Carlo samples for the section-average check.
    pub mc_samples: usize,
    pub tolerances: Tolerances,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: CaseName::SphereHyperplane,
            n: 2,
            m: None,
            level: 4,
            mesh: None,
            spec: None,
            samples: 10,
            seed: 1,
            infimum_samples: 200,
            mc_samples: 100_000,
            tolerances: Tolerances::default(),
            out: None,
            format: OutputFormat::Json,
            timings: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LabError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.level > MAX_LEVEL {
            return Err(LabError::Usage(format!(
                "level must be at most {MAX_LEVEL}"
            )));
        }
        if self.samples < 1 || self.infimum_samples < 1 {
            return Err(LabError::Usage("sample counts must be at least 1".into()));
        }
        if self.mc_samples < 2 {
            return Err(LabError::Usage(
                "Monte Carlo needs at least 2 samples".into(),
            ));
        }
        self.tolerances.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Pass,
    Fail,
    Error,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Pass => 0,
            RunStatus::Fail => 1,
            RunStatus::Error => 3,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Timings {
    pub analysis_seconds: f64,
    pub checks_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub immersion: ImmersionSpec,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub expectations: CaseExpectations,
    pub reference_direction: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    pub discretization: Option<DiscretizationMeta>,
    pub volume: Option<f64>,
    pub pencil: Option<PencilDiagnostics>,
    pub spectrum: Option<Spectrum>,
    pub lambda1_exact: Option<f64>,
    pub lambda1_error: Option<f64>,
    pub lambda1_delta: Option<f64>,
    pub curvature_source: Option<CurvatureSource>,
    pub bounds: Vec<BoundReport>,
    pub identities: Vec<IdentityCheck>,
    pub equality: Vec<EqualityDiagnostic>,
    pub causal_check: Option<CausalCheck>,
    pub causal_kernel: Option<CausalKernelSearch>,
    pub failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn bound(&self, name: &str, direction: Option<usize>) -> Option<&BoundReport> {
        self.bounds
            .iter()
            .find(|b| b.name == name && b.direction == direction)
    }

    pub fn identity(&self, name: &str) -> Option<&IdentityCheck> {
        self.identities.iter().find(|c| c.name == name)
    }
}

/// Builds the mesh, runs every check and judges them. Usage errors are
/// returned; numerical failures come back as a report with status `error`
/// and whatever was computed before the failure.
pub fn run_case(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let def = case_definition(config.case, config.n, config.m, config.spec.as_deref())?;
    let reference = def.spec.reference_direction()?;
    let m = reference.dim();
    let directions: Vec<LorentzVector> = std::iter::once(reference.clone())
        .chain(bounds::sample_directions(m, config.samples, config.seed))
        .collect();
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        immersion: def.spec.clone(),
        status: RunStatus::Error,
        error: None,
        expectations: def.expectations.clone(),
        reference_direction: reference.components().to_vec(),
        directions: directions.iter().map(|a| a.components().to_vec()).collect(),
        discretization: None,
        volume: None,
        pencil: None,
        spectrum: None,
        lambda1_exact: def.spec.exact_lambda1(),
        lambda1_error: None,
        lambda1_delta: None,
        curvature_source: None,
        bounds: Vec::new(),
        identities: Vec::new(),
        equality: Vec::new(),
        causal_check: None,
        causal_kernel: None,
        failures: Vec::new(),
        timings: None,
    };
    let start = Instant::now();
    let mut timings = Timings::default();
    match fill_report(config, &def, &directions, &mut report, &mut timings) {
        Ok(()) => {
            report.failures = collect_failures(&report, &def);
            report.status = if report.failures.is_empty() {
                RunStatus::Pass
            } else {
                RunStatus::Fail
            };
        }
        Err(e) if e.exit_code() == 2 => return Err(e),
        Err(e) => {
            report.status = RunStatus::Error;
            report.error = Some(e.to_string());
        }
    }
    if config.timings {
        timings.total_seconds = start.elapsed().as_secs_f64();
        report.timings = Some(timings);
    }
    Ok(report)
}

fn fill_report(
    config: &RunConfig,
    def: &CaseDefinition,
    directions: &[LorentzVector],
    report: &mut RunReport,
    timings: &mut Timings,
) -> Result<()> {
    let tol = &config.tolerances;
    let t0 = Instant::now();
    let imm = def.spec.build()?;
    let mesh = match &config.mesh {
        Some(path) => ParamMesh::read_ascii(path)?,
        None => build_mesh(imm.domain(), config.level)?,
    };
    let opts = AnalysisOptions {
        eigen: EigenOptions {
            tol: tol.eig,
            ..EigenOptions::default()
        },
        skip_coarse_solve: false,
    };
    let an = Analysis::with_options(imm, &mesh, &opts)?;
    timings.analysis_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    report.discretization = Some(an.meta());
    report.volume = Some(an.volume());
    report.pencil = Some(an.pencil.diagnostics());
    report.spectrum = Some(an.spectrum.clone());
    report.lambda1_error = report.lambda1_exact.map(|l| (an.lambda1() - l).abs() / l);
    report.lambda1_delta = an.lambda1_delta;
    report.curvature_source = Some(an.curvature_source);

    let exp = &def.expectations;
    let moments = an.directional_moments()?;
    let judge = |mut b: BoundReport, e: Expectation, k: Option<usize>| {
        b.direction = k;
        b.expectation = e;
        b.rejudge(tol);
        b
    };
    report
        .bounds
        .push(judge(bounds::reilly_bound(&an)?, exp.reilly, None));
    let h = bounds::make_test_field_h(&an)?;
    let pos = bounds::make_test_field_position(&an)?;
    let per_direction: Vec<Vec<BoundReport>> = directions
        .par_iter()
        .enumerate()
        .map(|(k, a)| -> Result<Vec<BoundReport>> {
            let e = if k == 0 {
                exp.reference_bounds
            } else {
                Expectation::Holds
            };
            let proj = bounds::make_test_field_projected(&an, a)?;
            let (plain, projected) = bounds::position_bounds(&an, a)?;
            Ok(vec![
                judge(bounds::main_lemma_sides(&an, &h, a)?, e, Some(k)),
                judge(bounds::main_lemma_sides(&an, &pos, a)?, e, Some(k)),
                judge(bounds::main_lemma_sides(&an, &proj, a)?, e, Some(k)),
                judge(bounds::curvature_quotient_bound(&an, a)?, e, Some(k)),
                judge(plain, e, Some(k)),
                judge(projected, e, Some(k)),
                judge(bounds::e_bound(&an, &moments, a)?, e, Some(k)),
                judge(bounds::estar_bound(&an, &moments, a)?, e, Some(k)),
            ])
        })
        .collect::<Result<_>>()?;
    report.bounds.extend(per_direction.into_iter().flatten());
    report.bounds.push(judge(
        bounds::infimum_over_directions(&an, &moments, config.infimum_samples, config.seed)?,
        Expectation::Holds,
        None,
    ));

    let reference = &directions[0];
    let ids = &mut report.identities;
    ids.push(bounds::minkowski_check(&an)?);
    let (m1, m2) = bounds::minkowski_a_checks(&an, reference)?;
    ids.push(m1);
    ids.push(m2);
    ids.push(bounds::beltrami_check(&an));
    ids.push(bounds::position_trace_check(&an)?);
    ids.push(bounds::projected_trace_check(&an, reference)?);
    ids.push(bounds::curvature_center_check(&an)?);
    if let Some(c) = bounds::curvature_trace_cross_check(&an)? {
        ids.push(c);
    }
    ids.push(bounds::averaging_check(
        &an,
        reference,
        config.mc_samples,
        config.seed,
    )?);
    if let ImmersionSpec::Counterexample { n } = def.spec {
        ids.push(counterexample_slice_check(n, report.bounds[0].rhs)?);
    }

    for (k, a) in directions.iter().enumerate() {
        let mut d = bounds::equality_diagnostic(&an, a)?;
        d.direction = Some(k);
        d.reclassify(tol);
        let expected = if k == 0 {
            exp.equality_reference
        } else {
            exp.equality_sampled
        };
        if let Some(v) = expected {
            d = d.expect(v);
        }
        report.equality.push(d);
    }

    let ell = def
        .ell
        .clone()
        .map(LorentzVector::new)
        .unwrap_or_else(|| reference.clone());
    report.causal_check = Some(bounds::causal_reilly_check_with(&an, &ell, tol)?);
    report.causal_kernel = Some(bounds::causal_kernel_search_with(&an, tol));
    timings.checks_seconds = t1.elapsed().as_secs_f64();
    Ok(())
}

/// The Reilly right-hand side of the counterexample from the one-dimensional
/// slice rule, compared with the mesh value.
pub fn counterexample_slice_check(n: usize, mesh_rhs: f64) -> Result<IdentityCheck> {
    let slice = counterexample_reilly_rhs_slice(n)?;
    Ok(IdentityCheck {
        name: "reilly-rhs-slice".into(),
        anchor: "reilly-inequality".into(),
        value: mesh_rhs - slice.value,
        error: slice.error,
        tolerance: Some(1e-2 * slice.value.abs()),
        within_tolerance: (mesh_rhs - slice.value).abs() <= 1e-2 * slice.value.abs(),
        a: None,
    })
}

/// `n int ||H||^2 dV / Vol` for the counterexample by the slice rule.
pub fn counterexample_reilly_rhs_slice(n: usize) -> Result<IntegralResult> {
    let c = gallery_counterexample(n)?;
    let h2 = |t: f64| {
        let mut p = vec![0.0; n + 1];
        p[0] = t;
        c.mean_curvature_sq(&p)
    };
    let integral = sphere_slice_integral(n, &h2)?;
    let vol = sphere_volume(n);
    Ok(IntegralResult {
        value: n as f64 * integral.value / vol,
        error: n as f64 * integral.error / vol,
        ..integral
    })
}

fn collect_failures(report: &RunReport, def: &CaseDefinition) -> Vec<String> {
    let mut out = Vec::new();
    for b in &report.bounds {
        if !b.expectation_met {
            let dir = b
                .direction
                .map(|k| format!(" at direction {k}"))
                .unwrap_or_default();
            let why = if b.expectation == Expectation::Violated && b.holds {
                " (within the discretization tolerance, so the violation is not resolved at this level)"
            } else {
                ""
            };
            out.push(format!(
                "{}{dir}: expected {:?}, slack {:e}, tolerance {:e}{why}",
                b.name, b.expectation, b.slack, b.tolerance
            ));
        }
    }
    for d in &report.equality {
        if !d.expectation_met {
            out.push(format!(
                "equality diagnostic at direction {}: expected {:?}, got {:?} (residual {:.4})",
                d.direction.unwrap_or(0),
                d.expected,
                d.verdict,
                d.residual
            ));
        }
    }
    if let (Some(check), Some(kernel)) = (&report.causal_check, &report.causal_kernel) {
        match def.expectations.causal {
            CausalExpectation::KernelHit => {
                if !check.precondition_met {
                    out.push(format!(
                        "causal vector check: Q(l, l) not zero (relative {:e})",
                        check.q_relative
                    ));
                } else if !check.reilly.as_ref().is_some_and(|r| r.holds) {
                    out.push("causal vector check: Reilly inequality fails".into());
                }
                if !kernel.found {
                    out.push("causal vector check: kernel search found no causal vector".into());
                }
            }
            CausalExpectation::NoCausalKernel => {
                if check.precondition_met {
                    out.push("causal vector check: Q(a, a) unexpectedly zero".into());
                }
                if kernel.found {
                    out.push("causal vector check: unexpected causal vector in the kernel".into());
                }
            }
            CausalExpectation::Informational => {}
        }
    }
    out
}

/// JSON text with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// One CSV row per bound.
pub fn bounds_csv(bounds: &[BoundReport], case: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| LabError::Io(std::io::Error::other(e));
    w.write_record([
        "case",
        "name",
        "anchor",
        "direction",
        "a",
        "lhs",
        "rhs",
        "slack",
        "relative_slack",
        "tolerance",
        "holds",
        "equality",
        "expectation",
        "expectation_met",
        "level",
        "vertices",
        "elements",
    ])
    .map_err(csv_err)?;
    for b in bounds {
        let a =
            b.a.as_ref()
                .map(|v| {
                    v.iter()
                        .map(|x| format!("{x:e}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_default();
        let expectation = serde_json::to_value(b.expectation)?;
        w.write_record([
            case.to_string(),
            b.name.clone(),
            b.anchor.clone(),
            b.direction.map(|k| k.to_string()).unwrap_or_default(),
            a,
            format!("{:e}", b.lhs),
            format!("{:e}", b.rhs),
            format!("{:e}", b.slack),
            format!("{:e}", b.relative_slack),
            format!("{:e}", b.tolerance),
            b.holds.to_string(),
            b.equality.to_string(),
            expectation.as_str().unwrap_or_default().to_string(),
            b.expectation_met.to_string(),
            b.meta.level.map(|l| l.to_string()).unwrap_or_default(),
            b.meta.vertices.to_string(),
            b.meta.elements.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| LabError::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| LabError::Io(std::io::Error::other(e)))
}

pub fn render_run(report: &RunReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => bounds_csv(&report.bounds, report.config.case.as_str()),
    }
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

/// Short human-readable summary of a run.
pub fn summarize_run(r: &RunReport) -> String {
    let mut s = format!("{} [{:?}]", r.config.case, r.status);
    if let (Some(meta), Some(sp)) = (&r.discretization, &r.spectrum) {
        s.push_str(&format!(
            " level {:?}, {} vertices, lambda1 = {:.6}",
            meta.level, meta.vertices, sp.lambda1
        ));
    }
    if let Some(e) = &r.error {
        s.push_str(&format!("\n  error: {e}"));
    }
    for f in &r.failures {
        s.push_str(&format!("\n  failed: {f}"));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub levels: Vec<usize>,
    pub cases: Vec<CaseName>,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub infimum_samples: usize,
    pub mc_samples: usize,
    pub tolerances: Tolerances,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub timings: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        let run = RunConfig::default();
        SuiteConfig {
            levels: vec![3, 4, 5],
            cases: CaseName::BUILT_IN.to_vec(),
            n: run.n,
            samples: run.samples,
            seed: run.seed,
            infimum_samples: run.infimum_samples,
            mc_samples: run.mc_samples,
            tolerances: run.tolerances,
            out: None,
            format: OutputFormat::Json,
            timings: false,
        }
    }
}

impl SuiteConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| LabError::Usage(format!("{}: {e}", path.display())))
    }

    fn run_config(&self, case: CaseName, level: usize) -> RunConfig {
        RunConfig {
            case,
            n: self.n,
            level,
            samples: self.samples,
            seed: self.seed,
            infimum_samples: self.infimum_samples,
            mc_samples: self.mc_samples,
            tolerances: self.tolerances,
            format: self.format,
            timings: self.timings,
            ..RunConfig::default()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub case: CaseName,
    pub level: usize,
    pub vertices: Option<usize>,
    pub lambda1: Option<f64>,
    pub lambda1_error: Option<f64>,
    pub minkowski: Option<f64>,
    pub beltrami: Option<f64>,
    pub position_trace: Option<f64>,
    pub projected_trace: Option<f64>,
    pub status: RunStatus,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteCheck {
    pub case: CaseName,
    pub name: String,
    pub passed: bool,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub config: SuiteConfig,
    pub status: RunStatus,
    pub convergence: Vec<ConvergenceRow>,
    pub checks: Vec<SuiteCheck>,
    pub failures: Vec<String>,
    pub reports: Vec<RunReport>,
}

/// Residuals below this multiple of the volume count as rounding noise when
/// checking that a residual decreases under refinement.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// True when every step strictly decreases, or both values are below `floor`.
pub fn decreasing_or_floor(values: &[f64], floor: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1].abs() < w[0].abs() || (w[0].abs() <= floor && w[1].abs() <= floor))
}

pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    if config.levels.is_empty() || config.cases.is_empty() {
        return Err(LabError::Usage(
            "suite needs at least one level and one case".into(),
        ));
    }
    if config.cases.contains(&CaseName::CustomSpecFile) {
        return Err(LabError::Usage(
            "custom-spec-file is not available in suites".into(),
        ));
    }
    let mut levels = config.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let jobs: Vec<(CaseName, usize)> = config
        .cases
        .iter()
        .flat_map(|&c| levels.iter().map(move |&l| (c, l)))
        .collect();
    let reports: Vec<RunReport> = jobs
        .par_iter()
        .map(|&(c, l)| run_case(&config.run_config(c, l)))
        .collect::<Result<_>>()?;
    let convergence: Vec<ConvergenceRow> = reports
        .iter()
        .zip(&jobs)
        .map(|(r, &(case, level))| ConvergenceRow {
            case,
            level,
            vertices: r.discretization.map(|d| d.vertices),
            lambda1: r.spectrum.as_ref().map(|s| s.lambda1),
            lambda1_error: r.lambda1_error,
            minkowski: r.identity("minkowski").map(|c| c.value),
            beltrami: r.identity("beltrami").map(|c| c.value),
            position_trace: r.identity("position-trace").map(|c| c.value),
            projected_trace: r.identity("projected-position-trace").map(|c| c.value),
            status: r.status,
        })
        .collect();
    let mut checks = Vec::new();
    let mut failures = Vec::new();
    for case in &config.cases {
        let rows: Vec<&ConvergenceRow> = convergence.iter().filter(|r| r.case == *case).collect();
        let vol = reports
            .iter()
            .zip(&jobs)
            .find(|(_, j)| j.0 == *case)
            .and_then(|(r, _)| r.volume)
            .unwrap_or(1.0);
        let series = |f: fn(&ConvergenceRow) -> Option<f64>| -> Option<Vec<f64>> {
            rows.iter().map(|r| f(r)).collect()
        };
        let mut add = |name: &str, values: Option<Vec<f64>>, floor: f64| {
            if let Some(values) = values {
                let passed = decreasing_or_floor(&values, floor);
                if !passed {
                    failures.push(format!("{case}: {name} does not decrease under refinement"));
                }
                checks.push(SuiteCheck {
                    case: *case,
                    name: name.into(),
                    passed,
                    values,
                });
            }
        };
        if rows.len() > 1 {
            add("lambda1-error-decreasing", series(|r| r.lambda1_error), 0.0);
            add(
                "minkowski-decreasing",
                series(|r| r.minkowski),
                ROUNDOFF_FLOOR * vol,
            );
            add(
                "beltrami-decreasing",
                series(|r| r.beltrami),
                ROUNDOFF_FLOOR * vol,
            );
        }
    }
    for r in &reports {
        if r.status != RunStatus::Pass {
            let level = r
                .discretization
                .and_then(|d| d.level)
                .unwrap_or(r.config.level);
            failures.push(format!("{} level {level}: {:?}", r.config.case, r.status));
        }
    }
    let status = if reports.iter().any(|r| r.status == RunStatus::Error) {
        RunStatus::Error
    } else if failures.is_empty() {
        RunStatus::Pass
    } else {
        RunStatus::Fail
    };
    Ok(SuiteReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        status,
        convergence,
        checks,
        failures,
        reports,
    })
}

pub fn render_suite(report: &SuiteReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => {
            let mut out = String::new();
            for (i, r) in report.reports.iter().enumerate() {
                let text = bounds_csv(&r.bounds, r.config.case.as_str())?;
                let body = if i == 0 {
                    &text[..]
                } else {
                    text.split_once('\n').map_or("", |x| x.1)
                };
                out.push_str(body);
            }
            Ok(out)
        }
    }
}

/// Plain-text convergence table.
pub fn convergence_table(report: &SuiteReport) -> String {
    let mut s = format!(
        "{:<22} {:>5} {:>8} {:>12} {:>11} {:>11} {:>11} {:>11} {:>11}  status\n",
        "case",
        "level",
        "vertices",
        "lambda1",
        "lam1 err",
        "minkowski",
        "beltrami",
        "trace",
        "proj trace"
    );
    let f = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
    for r in &report.convergence {
        s.push_str(&format!(
            "{:<22} {:>5} {:>8} {:>12} {:>11} {:>11} {:>11} {:>11} {:>11}  {:?}\n",
            r.case.as_str(),
            r.level,
            r.vertices
                .map(|v| v.to_string())
                .unwrap_or_else(|| "-".into()),
            r.lambda1
                .map(|x| format!("{x:.8}"))
                .unwrap_or_else(|| "-".into()),
            f(r.lambda1_error),
            f(r.minkowski),
            f(r.beltrami),
            f(r.position_trace),
            f(r.projected_trace),
            r.status
        ));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SectionAvgConfig {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    /// Random symmetric forms to test.
    pub forms: usize,
    /// Boosted directions used in addition to the time axis.
    pub boosts: usize,
    /// Allowed deviation in standard errors.
    pub sigmas: f64,
    /// Allowed deviation relative to `int |Q(v, v)| dV_a`.
    pub relative: f64,
    pub out: Option<PathBuf>,
}

impl Default for SectionAvgConfig {
    fn default() -> Self {
        SectionAvgConfig {
            m: 4,
            samples: 1_000_000,
            seed: 7,
            forms: 5,
            boosts: 2,
            sigmas: 3.0,
            relative: 5e-3,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SectionAvgRow {
    pub form: usize,
    /// `None` for the Euclidean sphere average.
    pub a: Option<Vec<f64>>,
    pub monte_carlo: f64,
    pub standard_error: f64,
    pub closed_form: f64,
    pub z: f64,
    pub relative: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectionAvgReport {
    pub schema_version: u32,
    pub config: SectionAvgConfig,
    pub forms: Vec<Vec<Vec<f64>>>,
    pub rows: Vec<SectionAvgRow>,
    pub status: RunStatus,
}

/// Monte Carlo averages of random forms over spherical sections (and over
/// the Euclidean unit sphere) against their closed forms.
pub fn run_section_avg(config: &SectionAvgConfig) -> Result<SectionAvgReport> {
    if config.m < 3 {
        return Err(LabError::Usage("m must be at least 3".into()));
    }
    if config.samples < 2 || config.forms < 1 {
        return Err(LabError::Usage("need at least 2 samples and 1 form".into()));
    }
    if !(config.sigmas > 0.0 && config.relative > 0.0) {
        return Err(LabError::Usage("tolerances must be positive".into()));
    }
    let m = config.m;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let forms: Vec<SymBilinearForm> = (0..config.forms)
        .map(|_| SymBilinearForm::random(m, &mut rng))
        .collect();
    let dirs: Vec<LorentzVector> = std::iter::once(LorentzVector::time_axis(m))
        .chain((0..config.boosts).map(|_| random_unit_timelike(m, bounds::BOOST_MAX, &mut rng)))
        .collect();
    let mut rows = Vec::new();
    for (i, q) in forms.iter().enumerate() {
        for (j, a) in dirs.iter().enumerate() {
            let stream = config.seed.wrapping_add((1 + i * dirs.len() + j) as u64);
            let mc = monte_carlo_section_integral(q, a, config.samples, stream)?;
            let scale =
                monte_carlo_section_mean(a, config.samples, stream, |v| q.eval(v, v).abs())?.value;
            let exact = avg_lemma_rhs(q, a)?;
            rows.push(judge_row(i, Some(a), &mc, exact, scale, config));
        }
        let stream = config
            .seed
            .wrapping_add((1 + forms.len() * dirs.len() + i) as u64);
        let mc = monte_carlo_sphere_integral(q, config.samples, stream)?;
        let mat = q.matrix();
        let scale = monte_carlo_sphere_mean(m, config.samples, stream, |u| {
            let v = nalgebra::DVector::from_column_slice(u);
            v.dot(&(mat * &v)).abs()
        })?
        .value;
        rows.push(judge_row(i, None, &mc, euclid_avg_rhs(q), scale, config));
    }
    let status = if rows.iter().all(|r| r.passed) {
        RunStatus::Pass
    } else {
        RunStatus::Fail
    };
    Ok(SectionAvgReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        forms: forms
            .iter()
            .map(|q| {
                q.matrix()
                    .row_iter()
                    .map(|r| r.iter().copied().collect())
                    .collect()
            })
            .collect(),
        rows,
        status,
    })
}

fn judge_row(
    form: usize,
    a: Option<&LorentzVector>,
    mc: &IntegralResult,
    exact: f64,
    scale: f64,
    config: &SectionAvgConfig,
) -> SectionAvgRow {
    let diff = (mc.value - exact).abs();
    let z = if mc.error > 0.0 {
        diff / mc.error
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let relative = if scale > 0.0 { diff / scale } else { diff };
    SectionAvgRow {
        form,
        a: a.map(|v| v.components().to_vec()),
        monte_carlo: mc.value,
        standard_error: mc.error,
        closed_form: exact,
        z,
        relative,
        passed: z <= config.sigmas && relative <= config.relative,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(case: CaseName, n: usize, level: usize) -> RunConfig {
        RunConfig {
            case,
            n,
            level,
            samples: 2,
            infimum_samples: 20,
            mc_samples: 2000,
            ..RunConfig::default()
        }
    }

    #[test]
    fn decreasing_with_floor() {
        assert!(decreasing_or_floor(&[3.0, 2.0, 1.0], 0.0));
        assert!(!decreasing_or_floor(&[3.0, 3.0], 0.0));
        assert!(decreasing_or_floor(&[1e-16, 2e-16, 1e-16], 1e-12));
        assert!(!decreasing_or_floor(&[1e-16, 1e-3], 1e-12));
    }

    #[test]
    fn counterexample_run_passes_and_is_deterministic() {
        let c = small(CaseName::Counterexample, 1, 4);
        let r = run_case(&c).unwrap();
        assert_eq!(r.status, RunStatus::Pass, "{:?}", r.failures);
        let reilly = r.bound("reilly", None).unwrap();
        assert!(!reilly.holds && reilly.expectation_met);
        assert_eq!(r.directions.len(), 3);
        assert!(r.identity("reilly-rhs-slice").unwrap().within_tolerance);
        assert_eq!(
            to_json(&r).unwrap(),
            to_json(&run_case(&c).unwrap()).unwrap()
        );
        let csv = render_run(&r, OutputFormat::Csv).unwrap();
        assert!(csv.starts_with("case,name,anchor,direction,"));
        assert_eq!(csv.lines().count(), 1 + r.bounds.len());
    }

    #[test]
    fn usage_errors_are_returned() {
        let mut c = small(CaseName::Counterexample, 1, MAX_LEVEL + 1);
        assert!(matches!(run_case(&c), Err(LabError::Usage(_))));
        c.level = 3;
        c.tolerances.bound = -1.0;
        assert!(matches!(run_case(&c), Err(LabError::Usage(_))));
        let s = SuiteConfig {
            levels: vec![],
            ..SuiteConfig::default()
        };
        assert!(matches!(run_suite(&s), Err(LabError::Usage(_))));
        let s = SuiteConfig {
            cases: vec![CaseName::CustomSpecFile],
            ..SuiteConfig::default()
        };
        assert!(matches!(run_suite(&s), Err(LabError::Usage(_))));
    }

    #[test]
    fn unmeshable_dimension_is_an_error_report() {
        let c = small(CaseName::Counterexample, 3, 2);
        match run_case(&c) {
            Ok(r) => assert_eq!(r.status, RunStatus::Error),
            Err(e) => assert_eq!(e.exit_code(), 2),
        }
    }

    #[test]
    fn suite_tracks_convergence() {
        let s = SuiteConfig {
            levels: vec![2, 3],
            cases: vec![CaseName::Counterexample],
            n: 1,
            samples: 1,
            infimum_samples: 10,
            mc_samples: 1000,
            ..SuiteConfig::default()
        };
        let r = run_suite(&s).unwrap();
        assert_eq!(r.convergence.len(), 2);
        assert!(r
            .checks
            .iter()
            .any(|c| c.name == "minkowski-decreasing" && c.passed));
        assert!(convergence_table(&r).contains("counterexample"));
    }
}
