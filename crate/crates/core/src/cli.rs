//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure (including a family that fails validation).

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::SolvableFamily;
use crate::lmn::{pushed_certificate, Certificate};
use crate::pde::{simulate_family, InitialCondition, SimConfig};
use crate::profile::{explicit_profile, numeric_profile, FrontProfile};
use crate::shoot::{family_minimal_speed, family_reaction, shoot_once, CminResult, ShootOptions};
use crate::speeds::{linear_speed, nonlinear_speed, Classification, SpeedReport};
use crate::sweep::{
    compute_report, explicit_certificate, linspace, refine_table, run_sweep, theory_context, SweepOptions, CSV_HEADER,
};
use crate::variational::{hr_bound_nu_family, numeric_minmax, BoundResult, MinmaxOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "frontspeed",
    version,
    about = "Minimal front speeds of solvable monostable reactions"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Builtin family name (hadeler_rothe, cgm_sine, exp_demo).
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for the numeric min-max restarts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct BetaArg {
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the family hypotheses at one β.
    Validate(BetaArg),
    /// Speeds, shooting c_min, regime, bounds and Φ certificate.
    Speeds(BetaArg),
    /// Minimal speed by shooting.
    Cmin(BetaArg),
    /// Sweep β and locate the exchange point.
    Sweep {
        #[arg(long, allow_negative_numbers = true)]
        beta_from: f64,
        #[arg(long, allow_negative_numbers = true)]
        beta_to: f64,
        #[arg(long)]
        steps: usize,
        /// Bisect the first pulled→pushed bracket.
        #[arg(long)]
        refine: bool,
    },
    /// Front profile U(z).
    Profile {
        #[command(flatten)]
        beta: BetaArg,
        /// From F = γh at c_nl (default).
        #[arg(long, conflicts_with = "numeric")]
        explicit: bool,
        /// From the shooting trajectory at c_min.
        #[arg(long)]
        numeric: bool,
    },
    /// Φ and the pushed certificate of the explicit front at speed C.
    Lmn {
        #[command(flatten)]
        beta: BetaArg,
        #[arg(long)]
        c: f64,
    },
    /// Direct PDE simulation.
    Simulate {
        #[command(flatten)]
        beta: BetaArg,
        #[arg(long)]
        domain_length: Option<f64>,
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Step position of the initial condition.
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        track_level: Option<f64>,
        /// Also write the final state as x,u CSV.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Hadeler–Rothe upper bounds.
    Bound {
        #[command(flatten)]
        beta: BetaArg,
        #[arg(long)]
        numeric_minmax: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomFamily {
    pub h: String,
    #[serde(rename = "A")]
    pub a: String,
    #[serde(rename = "B")]
    pub b: String,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilySpec {
    Builtin(String),
    Custom { custom: CustomFamily },
}

impl FamilySpec {
    pub fn build(&self) -> Result<SolvableFamily> {
        let fam = match self {
            FamilySpec::Builtin(name) => SolvableFamily::builtin(name)?,
            FamilySpec::Custom { custom } => SolvableFamily::from_sources(
                custom.name.as_deref().unwrap_or("custom"),
                &custom.h,
                &custom.a,
                &custom.b,
            )?,
        };
        fam.with_unit_slope()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub validation_grid: Option<usize>,
    pub shoot_eps: Option<f64>,
    pub shoot_delta: Option<f64>,
    pub shoot_rtol: Option<f64>,
    pub shoot_atol: Option<f64>,
    pub c_tol: Option<f64>,
    pub classify_tol: Option<f64>,
    pub z_span: Option<f64>,
    pub profile_nodes: Option<usize>,
    pub refine_tol: Option<f64>,
    pub minmax_params: Option<usize>,
    pub minmax_iterations: Option<usize>,
    pub minmax_restarts: Option<usize>,
    pub sim: Option<SimOverrides>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOverrides {
    pub domain_length: Option<f64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub x0: Option<f64>,
    pub track_level: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<FamilySpec>,
    pub numerics: Numerics,
    pub output: OutputSpec,
}

fn check_range<T: PartialOrd + std::fmt::Display + Copy>(name: &str, v: Option<T>, lo: T, hi: T) -> Result<()> {
    match v {
        Some(x) if !(lo <= x && x <= hi) => Err(Error::Config(format!("{name} = {x} outside [{lo}, {hi}]"))),
        _ => Ok(()),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        check_range("validation_grid", n.validation_grid, 100, 1_000_000)?;
        check_range("shoot_eps", n.shoot_eps, 1e-12, 1e-2)?;
        check_range("shoot_delta", n.shoot_delta, 1e-12, 1e-2)?;
        check_range("shoot_rtol", n.shoot_rtol, 1e-14, 1e-3)?;
        check_range("shoot_atol", n.shoot_atol, 1e-30, 1e-6)?;
        check_range("c_tol", n.c_tol, 1e-12, 1e-2)?;
        check_range("classify_tol", n.classify_tol, 0.0, 0.1)?;
        check_range("z_span", n.z_span, 1.0, 1000.0)?;
        check_range("profile_nodes", n.profile_nodes, 100, 1_000_000)?;
        check_range("refine_tol", n.refine_tol, 1e-8, 1.0)?;
        check_range("minmax_params", n.minmax_params, 1, 4)?;
        check_range("minmax_iterations", n.minmax_iterations, 1, 1_000_000)?;
        check_range("minmax_restarts", n.minmax_restarts, 1, 64)?;
        if let Some(s) = &n.sim {
            check_range("sim.domain_length", s.domain_length, 1.0, 1e5)?;
            check_range("sim.dx", s.dx, 1e-4, 10.0)?;
            check_range("sim.dt", s.dt, 1e-10, 10.0)?;
            check_range("sim.t_end", s.t_end, 1e-6, 1e5)?;
            check_range("sim.track_level", s.track_level, 1e-6, 1.0 - 1e-6)?;
        }
        Ok(())
    }

    fn sweep_options(&self) -> SweepOptions {
        let n = &self.numerics;
        let d = SweepOptions::default();
        let s = d.shoot;
        SweepOptions {
            shoot: ShootOptions {
                eps: n.shoot_eps.unwrap_or(s.eps),
                delta: n.shoot_delta.unwrap_or(s.delta),
                tolerances: crate::ode::Tolerances {
                    atol: n.shoot_atol.unwrap_or(s.tolerances.atol),
                    rtol: n.shoot_rtol.unwrap_or(s.tolerances.rtol),
                    ..s.tolerances
                },
                c_tol: n.c_tol.unwrap_or(s.c_tol),
                ..s
            },
            classify_tol: n.classify_tol.unwrap_or(d.classify_tol),
            validation_grid: n.validation_grid.unwrap_or(d.validation_grid),
            profile_nodes: n.profile_nodes.unwrap_or(d.profile_nodes),
            z_span: n.z_span.unwrap_or(d.z_span),
            refine_tol: n.refine_tol.unwrap_or(d.refine_tol),
            ..d
        }
    }

    fn sim_config(&self) -> SimConfig {
        let mut cfg = SimConfig::default();
        if let Some(s) = &self.numerics.sim {
            apply_sim(&mut cfg, s);
        }
        cfg
    }
}

fn apply_sim(cfg: &mut SimConfig, s: &SimOverrides) {
    if let Some(v) = s.domain_length {
        cfg.domain_length = v;
    }
    if let Some(v) = s.dx {
        cfg.dx = v;
    }
    if s.dt.is_some() {
        cfg.dt = s.dt;
    }
    if let Some(v) = s.t_end {
        cfg.t_end = v;
    }
    if let Some(x0) = s.x0 {
        cfg.initial = InitialCondition::Step { x0 };
    }
    if let Some(v) = s.track_level {
        cfg.track_level = v;
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{text}")
            } else {
                write!(stderr, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::UnknownBuiltin(_)
        | Error::Syntax { .. }
        | Error::UnknownIdentifier { .. }
        | Error::UnknownFunction { .. }
        | Error::Io(_) => 1,
        _ => 2,
    }
}

struct Context {
    fam: SolvableFamily,
    cfg: RunConfig,
    format: Option<Format>,
    output: Option<PathBuf>,
    seed: u64,
}

fn context(cli: &Cli) -> Result<Context> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let spec = match (&cli.family, &cfg.family) {
        (Some(name), _) => FamilySpec::Builtin(name.clone()),
        (None, Some(spec)) => spec.clone(),
        (None, None) => return Err(Error::Config("no family given (use --family or a config file)".into())),
    };
    let fam = spec.build()?;
    Ok(Context {
        fam,
        format: cli.format.or(cfg.output.format),
        output: cli.output.clone().or_else(|| cfg.output.path.clone()),
        cfg,
        seed: cli.seed.unwrap_or(0),
    })
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let ctx = context(cli)?;
    let mut buf: Vec<u8> = Vec::new();
    let opts = ctx.cfg.sweep_options();
    let fam = &ctx.fam;
    match &cli.command {
        Command::Validate(BetaArg { beta }) => {
            let report = fam.validate(*beta, opts.validation_grid)?;
            match ctx.format.unwrap_or(Format::Json) {
                Format::Json => json(&mut buf, &report)?,
                Format::Csv => {
                    writeln!(buf, "check,pass,detail")?;
                    for c in &report.checks {
                        writeln!(buf, "{},{},\"{}\"", c.name, c.pass, c.detail.replace('"', "'"))?;
                    }
                }
            }
            emit(&ctx, &buf, stdout)?;
            if !report.ok {
                return Err(report.into_result().unwrap_err());
            }
            Ok(())
        }
        Command::Speeds(BetaArg { beta }) => {
            let out = speeds(fam, *beta, &opts)?;
            match ctx.format.unwrap_or(Format::Json) {
                Format::Json => json(&mut buf, &out)?,
                Format::Csv => {
                    let r = &out.report;
                    writeln!(buf, "{CSV_HEADER}")?;
                    writeln!(
                        buf,
                        "{},{},{},{},{},{},{},{}",
                        num(r.beta),
                        num(r.c_l),
                        num(r.c_nl),
                        num(r.gamma),
                        num(r.c_min),
                        r.regime.as_str(),
                        num(out.hr_bound),
                        out.certificate
                            .as_ref()
                            .map(|c| c.certified.to_string())
                            .unwrap_or_default()
                    )?;
                }
            }
            emit(&ctx, &buf, stdout)
        }
        Command::Cmin(BetaArg { beta }) => {
            let fam = &fam.validate(*beta, opts.validation_grid)?.into_result()?;
            let r = family_minimal_speed(fam, *beta, &opts.shoot)?;
            let out = CminOutput {
                family: fam.name.clone(),
                beta: *beta,
                c_l: linear_speed(fam, *beta)?,
                c_nl: nonlinear_speed(fam, *beta)?,
                result: r,
            };
            match ctx.format.unwrap_or(Format::Json) {
                Format::Json => json(&mut buf, &out)?,
                Format::Csv => {
                    writeln!(buf, "beta,c_min,c_l,c_nl,decay,iterations")?;
                    writeln!(
                        buf,
                        "{},{},{},{},{},{}",
                        num(out.beta),
                        num(r.c_min),
                        num(out.c_l),
                        num(out.c_nl),
                        serde_json::to_value(r.decay).unwrap().as_str().unwrap_or(""),
                        r.iterations
                    )?;
                }
            }
            emit(&ctx, &buf, stdout)
        }
        Command::Sweep {
            beta_from,
            beta_to,
            steps,
            refine,
        } => {
            if *steps == 0 {
                return Err(Error::Config("--steps must be at least 1".into()));
            }
            let betas = linspace(*beta_from, *beta_to, *steps);
            let mut table = run_sweep(fam, &betas, &opts)?;
            if *refine {
                refine_table(fam, &mut table, &opts)?;
            }
            match ctx.format.unwrap_or(Format::Csv) {
                Format::Csv => table.write_csv(&mut buf)?,
                Format::Json => json(&mut buf, &table)?,
            }
            emit(&ctx, &buf, stdout)
        }
        Command::Profile {
            beta,
            explicit: _,
            numeric,
        } => {
            let beta = beta.beta;
            let fam = &fam.validate(beta, opts.validation_grid)?.into_result()?;
            let profile = if *numeric {
                let r = family_minimal_speed(fam, beta, &opts.shoot)?;
                let reaction = family_reaction(fam, beta)?;
                // upper end of the bracket: the shot there reaches the origin
                let c = r.bracket.1.max(r.c_min);
                let shot = shoot_once(
                    &reaction,
                    c,
                    &ShootOptions {
                        record_trajectory: true,
                        ..opts.shoot
                    },
                )?;
                numeric_profile(&shot, opts.z_span, opts.profile_nodes)?
            } else {
                explicit_profile(fam, beta, opts.z_span, opts.profile_nodes)?
            };
            match ctx.format.unwrap_or(Format::Csv) {
                Format::Csv => profile.write_csv(&mut buf)?,
                Format::Json => json(&mut buf, &ProfileOutput::from(&profile))?,
            }
            emit(&ctx, &buf, stdout)
        }
        Command::Lmn { beta, c } => {
            let beta = beta.beta;
            let fam = &fam.validate(beta, opts.validation_grid)?.into_result()?;
            let profile = explicit_profile(fam, beta, opts.z_span, opts.profile_nodes)?;
            let cert = pushed_certificate(fam, beta, *c, &profile, opts.classify_tol)?;
            match ctx.format.unwrap_or(Format::Json) {
                Format::Json => json(&mut buf, &cert)?,
                Format::Csv => {
                    writeln!(buf, "beta,c,c_l,member,phi,phi_normalized,certified")?;
                    let (v, nv) = cert
                        .phi
                        .as_ref()
                        .map(|p| (num(p.value), num(p.normalized)))
                        .unwrap_or_default();
                    writeln!(
                        buf,
                        "{},{},{},{},{v},{nv},{}",
                        num(beta),
                        num(cert.c),
                        num(cert.c_l),
                        cert.member,
                        cert.certified
                    )?;
                }
            }
            emit(&ctx, &buf, stdout)
        }
        Command::Simulate {
            beta,
            domain_length,
            dx,
            dt,
            t_end,
            x0,
            track_level,
            snapshot,
        } => {
            let beta = beta.beta;
            let fam = &fam.validate(beta, opts.validation_grid)?.into_result()?;
            let mut sim = ctx.cfg.sim_config();
            apply_sim(
                &mut sim,
                &SimOverrides {
                    domain_length: *domain_length,
                    dx: *dx,
                    dt: *dt,
                    t_end: *t_end,
                    x0: *x0,
                    track_level: *track_level,
                },
            );
            let m = simulate_family(fam, beta, &sim)?;
            if let Some(path) = snapshot {
                let f = File::create(path)?;
                m.write_snapshot_csv(BufWriter::new(f))?;
            }
            match ctx.format.unwrap_or(Format::Json) {
                Format::Csv => m.write_track_csv(&mut buf)?,
                Format::Json => json(
                    &mut buf,
                    &SimOutput {
                        family: fam.name.clone(),
                        beta,
                        config: sim,
                        speed: m.speed,
                        fit_window: m.fit_window,
                        fit_residual: m.fit_residual,
                        front_track: m.front_track.clone(),
                    },
                )?,
            }
            emit(&ctx, &buf, stdout)
        }
        Command::Bound {
            beta,
            numeric_minmax: nm,
        } => {
            let beta = beta.beta;
            let fam = &fam.validate(beta, opts.validation_grid)?.into_result()?;
            let ext = fam.hprime_extrema(opts.validation_grid, 1e-12)?;
            let mut bounds = vec![hr_bound_nu_family(fam, beta, &ext)?];
            if *nm {
                let n = &ctx.cfg.numerics;
                let d = MinmaxOptions::default();
                let mo = MinmaxOptions {
                    param_count: n.minmax_params.unwrap_or(d.param_count),
                    iterations: n.minmax_iterations.unwrap_or(d.iterations),
                    restarts: n.minmax_restarts.unwrap_or(d.restarts),
                    seed: ctx.seed,
                    ..d
                };
                bounds.push(numeric_minmax(fam, beta, &mo)?);
            }
            match ctx.format.unwrap_or(Format::Json) {
                Format::Json => json(&mut buf, &BoundOutput { beta, bounds })?,
                Format::Csv => {
                    writeln!(buf, "trial,value,arg_nu,case")?;
                    for b in &bounds {
                        writeln!(
                            buf,
                            "\"{}\",{},{},{}",
                            b.trial_description,
                            num(b.value),
                            b.arg_nu.map(num).unwrap_or_default(),
                            b.case_label.map(|c| c.as_str()).unwrap_or("")
                        )?;
                    }
                }
            }
            emit(&ctx, &buf, stdout)
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SpeedsOutput {
    pub family: String,
    #[serde(flatten)]
    pub report: SpeedReport,
    pub hr_bound: f64,
    pub cmin: CminResult,
    pub classification: Classification,
    pub certificate: Option<Certificate>,
    pub certificate_error: Option<String>,
}

/// Everything the `speeds` subcommand reports.
pub fn speeds(fam: &SolvableFamily, beta: f64, opts: &SweepOptions) -> Result<SpeedsOutput> {
    let fam = &fam.with_unit_slope()?;
    let ext = fam.hprime_extrema(opts.validation_grid, 1e-12)?;
    let ctx = theory_context(fam, beta, beta, &ext)?;
    let detail = compute_report(fam, beta, &ext, &ctx, opts)?;
    let (certificate, certificate_error) = match explicit_profile(fam, beta, opts.z_span, opts.profile_nodes)
        .and_then(|p| pushed_certificate(fam, beta, p.c, &p, opts.classify_tol))
    {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    };
    debug_assert_eq!(
        certificate.as_ref().map(|c| c.certified),
        explicit_certificate(fam, beta, opts).ok()
    );
    Ok(SpeedsOutput {
        family: fam.name.clone(),
        report: detail.report,
        hr_bound: detail.hr_bound,
        cmin: detail.cmin,
        classification: detail.classification,
        certificate,
        certificate_error,
    })
}

#[derive(Debug, Serialize)]
struct CminOutput {
    family: String,
    beta: f64,
    c_l: f64,
    c_nl: f64,
    #[serde(flatten)]
    result: CminResult,
}

#[derive(Debug, Serialize)]
struct ProfileOutput<'a> {
    c: f64,
    source: crate::profile::ProfileSource,
    truncated: bool,
    z: &'a [f64],
    u: &'a [f64],
}

impl<'a> From<&'a FrontProfile> for ProfileOutput<'a> {
    fn from(p: &'a FrontProfile) -> Self {
        ProfileOutput {
            c: p.c,
            source: p.source,
            truncated: p.truncated,
            z: &p.z,
            u: &p.u,
        }
    }
}

#[derive(Debug, Serialize)]
struct SimOutput {
    family: String,
    beta: f64,
    config: SimConfig,
    speed: f64,
    fit_window: (f64, f64),
    fit_residual: f64,
    front_track: Vec<(f64, f64)>,
}

#[derive(Debug, Serialize)]
struct BoundOutput {
    beta: f64,
    bounds: Vec<BoundResult>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn json<T: Serialize>(buf: &mut Vec<u8>, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *buf, value).map_err(|e| Error::Io(e.to_string()))?;
    buf.push(b'\n');
    Ok(())
}

fn emit(ctx: &Context, buf: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match &ctx.output {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(buf)?;
            f.flush()?;
        }
        None => stdout.write_all(buf)?,
    }
    Ok(())
}
