//! The `dskg` command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dskg_core::blowup_ode::{
    check_kato_power, check_large_data_conditions, check_lemma_large_energy, check_lemma_small_energy,
    integrate_moment_ode, BlowupCertificate, CauchyMoments, Classification, ComparisonParams, GammaSchedule,
    MomentState, ProbeGrid, Trajectory,
};
use dskg_core::cone_kernel::{kernel_eval, kernel_moment, kernel_moment_closed_form, ConePoint, CurvedMassCtx};
use dskg_core::descent::{identity_check_normalized, DimensionConstants, EvenNormalization, IdentityCase, Parity};
use dskg_core::semilinear::{
    holder_lower_bound_check, run_fd_single, solve_fd, solve_picard, verify_moment_law, write_records_csv, FdOptions,
    PicardOptions, RunManifest, SingleRun,
};
use dskg_core::{Error, Result};
use serde_json::json;

use crate::config::{self, Backend};
use crate::plotdata::emit_plotdata;
use crate::record::read_records_json;
use crate::scan::{scan, LARGE_ENERGY_HORIZON, SMALL_ENERGY_EPS};

#[derive(Debug, Parser)]
#[command(
    name = "dskg",
    version,
    about = "Klein-Gordon in de Sitter: identities, certificates, runs and sweeps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify an integral representation of sinh(M (t - b)) / M.
    Identity(IdentityArgs),
    /// Evaluate the kernel K(b, t; r) or its moment.
    Kernel(KernelArgs),
    /// Integrate the comparison ODE F'' = M^2 F + delta0 Γ(t) F^q.
    Ode(OdeArgs),
    /// Check a blow-up lemma for the comparison ODE.
    Certify(CertifyArgs),
    /// Run the 1-D PDE from a JSON config.
    Pde(PdeArgs),
    /// Sweep the weight scale from a JSON spec.
    Scan(ScanArgs),
    /// Turn sweep records (JSON) into plot files.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Args)]
pub struct IdentityArgs {
    /// i, ii, iii, corollary_i, corollary_ii or corollary_iii.
    #[arg(long)]
    pub case: IdentityCase,
    #[arg(long, default_value_t = 0.0)]
    pub mass: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub t: f64,
    /// Space dimension; defaults to 1, 3 or 2 by case.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Use the even-dimensional constant exactly as printed.
    #[arg(long)]
    pub as_printed: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub mass: f64,
    #[arg(long)]
    pub b: f64,
    #[arg(long)]
    pub t: f64,
    /// Radius; without it the moment over r is reported.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub json: bool,
}

/// Comparison system shared by `ode` and `certify`.
#[derive(Debug, Args)]
pub struct SystemArgs {
    #[arg(long, default_value_t = 0.0)]
    pub mass: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta0: f64,
    /// zero, const:C, pure_exp:G, power_exp:C,D0,D1, kato:C,Q or a JSON object.
    #[arg(long, default_value = "const:1", value_parser = parse_gamma, allow_hyphen_values = true)]
    pub gamma: GammaSchedule,
}

impl SystemArgs {
    pub fn params(&self) -> Result<ComparisonParams> {
        let params = ComparisonParams {
            mass: self.mass,
            q_eff: self.p * (self.beta + 1.0),
            delta0: self.delta0,
            gamma: self.gamma,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Args)]
pub struct OdeArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, default_value_t = 0.0)]
    pub t0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub f0: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub fdot0: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Trajectory CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Lemma {
    LargeEnergy,
    SmallEnergy,
    KatoPower,
    LargeData,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long, value_enum)]
    pub lemma: Lemma,
    #[command(flatten)]
    pub system: SystemArgs,
    /// Start time of the lemma.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    /// F(a), also C0 for large_data.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub f_a: f64,
    /// F'(a), also C1 for large_data.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub fdot_a: f64,
    #[arg(long, default_value_t = LARGE_ENERGY_HORIZON)]
    pub horizon: f64,
    #[arg(long, default_value_t = SMALL_ENERGY_EPS)]
    pub eps: f64,
    /// Constant of the small-energy growth condition.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct PdeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    /// Directory for records CSVs and the run manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value = "scan_out")]
    pub out: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    /// `records.json` written by `scan`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Outcome of a successful command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

impl Status {
    fn from_pass(ok: bool) -> Self {
        if ok {
            Status::Passed
        } else {
            Status::Failed
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Status::Passed => 0,
            Status::Failed => 1,
        }
    }
}

/// `2` for input problems, `1` for numerical failures.
pub fn error_code(e: &Error) -> u8 {
    match e {
        Error::Numeric { .. } => 1,
        _ => 2,
    }
}

/// Parse a weight schedule.
pub fn parse_gamma(s: &str) -> std::result::Result<GammaSchedule, String> {
    let s = s.trim();
    if s.starts_with('{') {
        return serde_json::from_str(s).map_err(|e| e.to_string());
    }
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad number '{v}': {e}")))
            .collect::<std::result::Result<_, _>>()?
    };
    let g = match (kind, nums.as_slice()) {
        ("zero", []) => GammaSchedule::Zero,
        ("const", [c]) => GammaSchedule::constant(*c),
        ("pure_exp", [gamma]) => GammaSchedule::PureExp { gamma: *gamma },
        ("power_exp", [c, d0, d1]) => GammaSchedule::PowerExp {
            c: *c,
            d0: *d0,
            d1: *d1,
        },
        ("kato", [c, q]) => GammaSchedule::KatoPower { c: *c, q: *q },
        _ => return Err(format!("cannot parse weight '{s}'")),
    };
    g.validate().map_err(|e| e.to_string())?;
    Ok(g)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Status> {
    match cli.command {
        Command::Identity(a) => cmd_identity(&a, out),
        Command::Kernel(a) => cmd_kernel(&a, out),
        Command::Ode(a) => cmd_ode(&a, out),
        Command::Certify(a) => cmd_certify(&a, out),
        Command::Pde(a) => cmd_pde(&a, out),
        Command::Scan(a) => cmd_scan(&a, out),
        Command::Plotdata(a) => cmd_plotdata(&a, out),
    }
}

fn default_dimension(case: IdentityCase) -> usize {
    match case.parity() {
        None => 1,
        Some(Parity::Odd) => 3,
        Some(Parity::Even) => 2,
    }
}

pub fn cmd_identity(a: &IdentityArgs, out: &mut dyn Write) -> Result<Status> {
    let n = a.n.unwrap_or_else(|| default_dimension(a.case));
    let dims = DimensionConstants::new(n)?;
    let norm = if a.as_printed {
        EvenNormalization::AsPrinted
    } else {
        EvenNormalization::Euclidean
    };
    let rep = identity_check_normalized(a.case, a.mass, a.b, a.t, &dims, a.tol, norm)?;
    let ok = rep.residual <= a.tol;
    if a.json {
        writeln!(out, "{}", json!({"report": rep, "tol": a.tol, "pass": ok}))?;
    } else {
        writeln!(
            out,
            "identity {} n={} M={} b={} t={}: value {:.15e}, exact {:.15e}, residual {:.3e} {}",
            rep.case,
            rep.n,
            rep.mass,
            rep.b,
            rep.t,
            rep.numeric,
            rep.exact,
            rep.residual,
            if ok { "PASS" } else { "FAIL" }
        )?;
    }
    Ok(Status::from_pass(ok))
}

pub fn cmd_kernel(a: &KernelArgs, out: &mut dyn Write) -> Result<Status> {
    let ctx = CurvedMassCtx::new(a.mass)?;
    match a.r {
        Some(r) => {
            let k = kernel_eval(&ctx, &ConePoint::new(a.b, a.t, r)?)?;
            if a.json {
                writeln!(
                    out,
                    "{}",
                    json!({"mass": a.mass, "b": a.b, "t": a.t, "r": r, "kernel": k})
                )?;
            } else {
                writeln!(out, "K(b={}, t={}; r={}) = {k:.15e}", a.b, a.t, r)?;
            }
            Ok(Status::Passed)
        }
        None => {
            let moment = kernel_moment(&ctx, a.b, a.t, a.tol)?;
            let exact = kernel_moment_closed_form(a.mass, a.b, a.t)?;
            let residual = (moment - exact).abs();
            let ok = residual <= 10.0 * a.tol * exact.abs().max(1.0);
            if a.json {
                writeln!(
                    out,
                    "{}",
                    json!({"mass": a.mass, "b": a.b, "t": a.t, "moment": moment, "closed_form": exact, "residual": residual, "pass": ok})
                )?;
            } else {
                writeln!(
                    out,
                    "∫K dr = {moment:.15e}, sinh(M(t-b))/M = {exact:.15e}, residual {residual:.3e}"
                )?;
            }
            Ok(Status::from_pass(ok))
        }
    }
}

/// Slope of `ln F` against `t` over the second half of the trajectory.
pub fn exponential_rate(traj: &Trajectory) -> Option<f64> {
    let pts: Vec<(f64, f64)> = traj.points[traj.points.len() / 2..]
        .iter()
        .filter(|p| p.f > 0.0)
        .map(|p| (p.t, p.f.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / k, sy / k);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(n, d), (t, y)| {
        (n + (t - mt) * (y - my), d + (t - mt).powi(2))
    });
    (den > 0.0).then(|| num / den)
}

pub fn cmd_ode(a: &OdeArgs, out: &mut dyn Write) -> Result<Status> {
    let params = a.system.params()?;
    let init = MomentState {
        t: a.t0,
        f: a.f0,
        fdot: a.fdot0,
    };
    let (traj, report) = integrate_moment_ode(&init, &params, a.t_max, a.tol)?;
    if let Some(path) = &a.csv {
        traj.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let cert = (a.f0 > 0.0)
        .then(|| check_lemma_large_energy(&params, a.t0, a.f0, a.fdot0, LARGE_ENERGY_HORIZON))
        .transpose()?;
    let t_upper = cert.as_ref().filter(|c| c.holds()).and_then(|c| c.t_upper);
    let rate = matches!(report.classification, Classification::AliveAt { .. })
        .then(|| exponential_rate(&traj))
        .flatten();
    // A certified bound the integrator overshoots is a failed check.
    let ok = match (report.classification.blowup_time(), t_upper) {
        (Some(t), Some(up)) => t <= up * 1.05,
        (None, Some(up)) => up > a.t_max,
        _ => true,
    };
    if a.json {
        writeln!(
            out,
            "{}",
            json!({"classification": report.classification, "report": report, "t_upper": t_upper, "exp_rate": rate, "certificate": cert, "pass": ok})
        )?;
    } else {
        writeln!(out, "{}", report.classification)?;
        writeln!(
            out,
            "steps: {} accepted, {} rejected",
            report.steps_accepted, report.steps_rejected
        )?;
        if let Some(k) = report.fitted_exponent {
            writeln!(
                out,
                "tail exponent: {k:.4} (expected {:.4})",
                2.0 / (params.q_eff - 1.0)
            )?;
        }
        if let Some(r) = rate {
            writeln!(out, "exponential fit: F ~ e^({r:.6} t)")?;
        }
        match (report.classification.blowup_time(), t_upper) {
            (Some(t), Some(up)) => writeln!(out, "T_est = {t:.6}   T_upper = {up:.6}")?,
            (None, Some(up)) => writeln!(out, "T_upper = {up:.6}")?,
            _ => {}
        }
    }
    Ok(Status::from_pass(ok))
}

fn print_certificate(cert: &BlowupCertificate, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(cert)?)?;
    Ok(())
}

pub fn cmd_certify(a: &CertifyArgs, out: &mut dyn Write) -> Result<Status> {
    let params = a.system.params()?;
    let holds = match a.lemma {
        Lemma::LargeEnergy => {
            let cert = check_lemma_large_energy(&params, a.a, a.f_a, a.fdot_a, a.horizon)?;
            print_certificate(&cert, out)?;
            cert.holds()
        }
        Lemma::SmallEnergy => {
            let grid = ProbeGrid::from(a.a);
            let cert = check_lemma_small_energy(params.mass, &params.gamma, params.q_eff, a.eps, a.c, &grid)?;
            print_certificate(&cert, out)?;
            cert.holds()
        }
        Lemma::KatoPower => {
            let cert = check_kato_power(&params.gamma, params.q_eff)?;
            print_certificate(&cert, out)?;
            cert.holds()
        }
        Lemma::LargeData => {
            let GammaSchedule::PureExp { gamma } = params.gamma else {
                return Err(Error::Config("large_data needs --gamma pure_exp:G".into()));
            };
            let moments = CauchyMoments {
                c0: a.f_a,
                c1: a.fdot_a,
            };
            let rep = check_large_data_conditions(gamma, params.q_eff, params.delta0, &moments)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&rep)?)?;
            rep.holds
        }
    };
    Ok(Status::from_pass(holds))
}

fn write_csv_file(path: PathBuf, run: &SingleRun) -> Result<()> {
    write_records_csv(&run.records, BufWriter::new(File::create(path)?))
}

pub fn cmd_pde(a: &PdeArgs, out: &mut dyn Write) -> Result<Status> {
    let mut doc = config::read_json(&a.config)?;
    for (key, v) in [("dx", a.dx), ("dt", a.dt), ("t_max", a.t_max)] {
        if let Some(v) = v {
            config::override_key(&mut doc, key, v)?;
        }
    }
    if let Some(b) = a.backend {
        config::override_key(&mut doc, "backend", serde_json::to_value(b)?)?;
    }
    let cfg = config::load_pde_config(doc)?;
    let grid = cfg.grid()?;
    let (runs, classification) = match cfg.backend {
        Backend::Fd => {
            let run = solve_fd(&cfg.data, &grid, &cfg.params, &cfg.gamma, &FdOptions::default())?;
            let class = run.classification.clone();
            (
                vec![("records.csv", run.fine), ("records_coarse.csv", run.coarse)],
                class,
            )
        }
        Backend::Picard => {
            let (u0, u1) = cfg.data.sample(&grid);
            let free = FdOptions {
                record_stride: 1,
                field_stride: 1,
                adaptive: false,
            };
            let lin = run_fd_single(&u0, &u1, &grid, &cfg.params, &GammaSchedule::Zero, &free)?;
            let history = lin
                .fields
                .ok_or_else(|| Error::Config("free solution kept no levels".into()))?;
            let pic = solve_picard(&history, &cfg.params, &cfg.gamma, &PicardOptions::default())?;
            let class = pic.run.classification();
            (vec![("records.csv", pic.run)], class)
        }
    };
    let holder_ok = runs
        .iter()
        .all(|(_, r)| holder_lower_bound_check(&r.records, &cfg.params));
    let residual = verify_moment_law(&runs[0].1.records, &cfg.params, &cfg.gamma);
    let manifest = RunManifest {
        params: cfg.params,
        grid,
        gamma: cfg.gamma,
        data: cfg.data,
        classification: classification.clone(),
        holder_ok,
        moment_law_residual: residual,
    };
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        for (name, run) in &runs {
            write_csv_file(dir.join(name), run)?;
        }
        let f = BufWriter::new(File::create(dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(f, &manifest)?;
    }
    writeln!(out, "{classification}")?;
    writeln!(out, "holder bridge: {}", if holder_ok { "ok" } else { "VIOLATED" })?;
    writeln!(out, "moment law residual: {residual:.3e}")?;
    Ok(Status::from_pass(holder_ok))
}

pub fn cmd_scan(a: &ScanArgs, out: &mut dyn Write) -> Result<Status> {
    let mut doc = config::read_json(&a.spec)?;
    if let Some(t) = a.threads {
        config::override_key(&mut doc, "threads", t)?;
    }
    for (key, v) in [("dx", a.dx), ("t_max", a.t_max)] {
        if let Some(v) = v {
            config::override_key(&mut doc, key, v)?;
        }
    }
    let spec = config::load_scan_spec(doc)?;
    let result = scan(&spec)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&a.out)?;
    emit_plotdata(&result.records, &a.out)?;
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(a.out.join("records.json"))?),
        &result.records,
    )?;
    serde_json::to_writer_pretty(
        BufWriter::new(File::create(a.out.join("summary.json"))?),
        &result.summary,
    )?;
    let counts = ["blowup", "alive_at", "inconclusive"]
        .map(|l| result.records.iter().filter(|r| r.classification.label() == l).count());
    writeln!(
        out,
        "{} points: {} blowup, {} alive_at (no blow-up before t_max at tested resolutions), {} inconclusive",
        result.records.len(),
        counts[0],
        counts[1],
        counts[2]
    )?;
    for s in &result.summary {
        match (s.threshold, s.distance) {
            (Some(th), Some(d)) => writeln!(
                out,
                "M={} p={} beta={} amplitude={} d1={}: d0 threshold {th} (cell {}), predicted {:.6}, distance {d:.6}",
                s.mass,
                s.p,
                s.beta,
                s.amplitude,
                s.d1,
                s.cell().unwrap_or(f64::NAN),
                s.predicted_d0
            )?,
            _ => writeln!(
                out,
                "M={} p={} beta={} amplitude={} d1={}: {} (predicted {:.6})",
                s.mass, s.p, s.beta, s.amplitude, s.d1, s.note, s.predicted_d0
            )?,
        }
    }
    let holder_ok = result.records.iter().all(|r| r.holder_ok != Some(false));
    if !holder_ok {
        writeln!(out, "holder bridge VIOLATED on some points")?;
    }
    Ok(Status::from_pass(holder_ok))
}

pub fn cmd_plotdata(a: &PlotdataArgs, out: &mut dyn Write) -> Result<Status> {
    let file = File::open(&a.input).map_err(|e| Error::Config(format!("{}: {e}", a.input.display())))?;
    let records = read_records_json(std::io::BufReader::new(file))?;
    for p in emit_plotdata(&records, &a.out)? {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(Status::Passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_strings() {
        assert_eq!(parse_gamma("zero").unwrap(), GammaSchedule::Zero);
        assert_eq!(
            parse_gamma("pure_exp:-1").unwrap(),
            GammaSchedule::PureExp { gamma: -1.0 }
        );
        assert_eq!(
            parse_gamma("power_exp:1,-0.5,3").unwrap(),
            GammaSchedule::PowerExp {
                c: 1.0,
                d0: -0.5,
                d1: 3.0
            }
        );
        assert_eq!(
            parse_gamma(r#"{"kind": "kato_power", "c": 1.0, "q": 2.0}"#).unwrap(),
            GammaSchedule::KatoPower { c: 1.0, q: 2.0 }
        );
        assert!(parse_gamma("power_exp:1,2").is_err());
        assert!(parse_gamma("wobble:1").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(error_code(&Error::Config("x".into())), 2);
        assert_eq!(error_code(&Error::Precondition("x".into())), 2);
        assert_eq!(
            error_code(&Error::Numeric {
                message: "x".into(),
                estimate: 0.0,
                error_bound: 0.0
            }),
            1
        );
    }
}
