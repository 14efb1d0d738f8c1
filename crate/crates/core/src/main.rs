use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lorentz_lab::cases::CaseName;
use lorentz_lab::report::{
    convergence_table, emit, render_run, render_suite, run_case, run_section_avg, run_suite,
    summarize_run, to_json, OutputFormat, RunConfig, SectionAvgConfig, SuiteConfig,
};
use lorentz_lab::{LabError, Result};

/// First-eigenvalue bounds for spacelike submanifolds of Lorentz-Minkowski space.
#[derive(Parser)]
#[command(name = "lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one verification case.
    Run(RunArgs),
    /// Run cases over several refinement levels.
    Suite(SuiteArgs),
    /// Compare Monte Carlo section averages with the closed form.
    SectionAvg(SectionAvgArgs),
}

#[derive(Args)]
struct Shared {
    /// JSON configuration file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    infimum_samples: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    tau_bound: Option<f64>,
    #[arg(long)]
    tau_eq: Option<f64>,
    #[arg(long)]
    tau_causal: Option<f64>,
    #[arg(long)]
    tau_eig: Option<f64>,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Include wall-clock timings (breaks byte-identical output).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_case)]
    case: Option<CaseName>,
    #[arg(long)]
    n: Option<usize>,
    /// Ambient dimension (sphere-hyperplane only).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    level: Option<usize>,
    /// ASCII mesh file instead of the built-in mesh.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Immersion JSON file for the custom-spec-file case.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct SuiteArgs {
    /// Comma-separated refinement levels.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Comma-separated case names, or `all`.
    #[arg(long, value_delimiter = ',')]
    cases: Option<Vec<String>>,
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct SectionAvgArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of random forms.
    #[arg(long)]
    forms: Option<usize>,
    /// Number of boosted directions besides the time axis.
    #[arg(long)]
    boosts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_case(s: &str) -> std::result::Result<CaseName, String> {
    s.parse().map_err(|e: LabError| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        _ => Err(format!("unknown format '{s}' (json or csv)")),
    }
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

fn shared_into_run(c: &mut RunConfig, s: Shared) {
    set!(c.samples, s.samples);
    set!(c.seed, s.seed);
    set!(c.infimum_samples, s.infimum_samples);
    set!(c.mc_samples, s.mc_samples);
    set!(c.tolerances.bound, s.tau_bound);
    set!(c.tolerances.eq, s.tau_eq);
    set!(c.tolerances.causal, s.tau_causal);
    set!(c.tolerances.eig, s.tau_eig);
    set!(c.format, s.format);
    if s.out.is_some() {
        c.out = s.out;
    }
    c.timings |= s.timings;
}

fn run(args: RunArgs) -> Result<i32> {
    let mut c = match &args.shared.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    set!(c.case, args.case);
    set!(c.n, args.n);
    if args.m.is_some() {
        c.m = args.m;
    }
    set!(c.level, args.level);
    if args.mesh.is_some() {
        c.mesh = args.mesh;
    }
    if args.spec.is_some() {
        c.spec = args.spec;
    }
    shared_into_run(&mut c, args.shared);
    let report = run_case(&c)?;
    emit(&render_run(&report, c.format)?, c.out.as_deref())?;
    eprintln!("{}", summarize_run(&report));
    Ok(report.status.exit_code())
}

fn suite(args: SuiteArgs) -> Result<i32> {
    let mut c = match &args.shared.config {
        Some(p) => SuiteConfig::from_file(p)?,
        None => SuiteConfig::default(),
    };
    set!(c.levels, args.levels);
    if let Some(names) = args.cases {
        c.cases = if names.iter().any(|n| n == "all") {
            CaseName::BUILT_IN.to_vec()
        } else {
            names.iter().map(|n| n.parse()).collect::<Result<_>>()?
        };
    }
    set!(c.n, args.n);
    let mut run = RunConfig {
        samples: c.samples,
        seed: c.seed,
        infimum_samples: c.infimum_samples,
        mc_samples: c.mc_samples,
        tolerances: c.tolerances,
        format: c.format,
        out: c.out.clone(),
        timings: c.timings,
        ..RunConfig::default()
    };
    shared_into_run(&mut run, args.shared);
    c.samples = run.samples;
    c.seed = run.seed;
    c.infimum_samples = run.infimum_samples;
    c.mc_samples = run.mc_samples;
    c.tolerances = run.tolerances;
    c.format = run.format;
    c.out = run.out;
    c.timings = run.timings;
    let report = run_suite(&c)?;
    emit(&render_suite(&report, c.format)?, c.out.as_deref())?;
    eprint!("{}", convergence_table(&report));
    for f in &report.failures {
        eprintln!("failed: {f}");
    }
    Ok(report.status.exit_code())
}

fn section_avg(args: SectionAvgArgs) -> Result<i32> {
    let mut c = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| LabError::Usage(format!("{}: {e}", p.display())))?
        }
        None => SectionAvgConfig::default(),
    };
    set!(c.m, args.m);
    set!(c.samples, args.samples);
    set!(c.seed, args.seed);
    set!(c.forms, args.forms);
    set!(c.boosts, args.boosts);
    if args.out.is_some() {
        c.out = args.out;
    }
    let report = run_section_avg(&c)?;
    emit(&to_json(&report)?, c.out.as_deref())?;
    for r in &report.rows {
        eprintln!(
            "form {} {}: mc {:.6} +- {:.1e}, exact {:.6}, z {:.2}, rel {:.1e} {}",
            r.form,
            if r.a.is_some() {
                "section"
            } else {
                "euclidean"
            },
            r.monte_carlo,
            r.standard_error,
            r.closed_form,
            r.z,
            r.relative,
            if r.passed { "ok" } else { "FAIL" }
        );
    }
    Ok(report.status.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Suite(a) => suite(a),
        Command::SectionAvg(a) => section_avg(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
