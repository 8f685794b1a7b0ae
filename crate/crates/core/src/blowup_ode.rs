//! The comparison ODE `F'' = M^2 F + delta0 Γ(t) F^q` for the spatial moment
//! `F(t) = ∫u dx`, its numerical integration with blow-up detection, and
//! executable checks of the Kato-type lemmas that force a finite lifespan.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// `F` above this value counts as escaped.
pub const F_CAP: f64 = 1e12;
/// Growth of `F^{(q-1)/2}` over its initial size that also counts as
/// escaped; `F_CAP` alone is out of reach when `q` is large.
pub const ESCAPE_RATIO: f64 = 1e6;
/// Accepted steps used by the tail fit of the blow-up time.
pub const TAIL_FIT_STEPS: usize = 20;
/// Probe grid ratio and cap for asymptotic lemma conditions.
pub const PROBE_RATIO: f64 = 1.2;
pub const PROBE_CAP: f64 = 1e3;

/// The time weight `Γ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSchedule {
    /// `c (1 + t)^{d1} e^{d0 t}`.
    PowerExp { c: f64, d0: f64, d1: f64 },
    /// `e^{gamma t}`.
    PureExp { gamma: f64 },
    /// `c t^{-1-q}`, only meaningful for `t > 0`.
    KatoPower { c: f64, q: f64 },
    /// `Γ ≡ 0`, the linear problem.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Constant,
    Nondecreasing,
    Nonincreasing,
    Mixed,
}

impl Monotonicity {
    fn from_log_derivative_range(lo: f64, hi: f64) -> Self {
        if lo == 0.0 && hi == 0.0 {
            Monotonicity::Constant
        } else if lo >= 0.0 {
            Monotonicity::Nondecreasing
        } else if hi <= 0.0 {
            Monotonicity::Nonincreasing
        } else {
            Monotonicity::Mixed
        }
    }
}

impl GammaSchedule {
    /// Constant schedule `Γ ≡ c`.
    pub fn constant(c: f64) -> Self {
        GammaSchedule::PowerExp { c, d0: 0.0, d1: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            GammaSchedule::PowerExp { c, d0, d1 } => c > 0.0 && d0.is_finite() && d1.is_finite() && c.is_finite(),
            GammaSchedule::PureExp { gamma } => gamma.is_finite(),
            GammaSchedule::KatoPower { c, q } => c > 0.0 && c.is_finite() && q.is_finite() && q > -1.0,
            GammaSchedule::Zero => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid schedule {self:?}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            GammaSchedule::PowerExp { c, d0, d1 } => c * (d1 * t.ln_1p() + d0 * t).exp(),
            GammaSchedule::PureExp { gamma } => (gamma * t).exp(),
            GammaSchedule::KatoPower { c, q } => c * t.powf(-1.0 - q),
            GammaSchedule::Zero => 0.0,
        }
    }

    /// `Γ'(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            GammaSchedule::PowerExp { d0, d1, .. } => self.eval(t) * (d0 + d1 / (1.0 + t)),
            GammaSchedule::PureExp { gamma } => gamma * self.eval(t),
            GammaSchedule::KatoPower { q, .. } => -(1.0 + q) * self.eval(t) / t,
            GammaSchedule::Zero => 0.0,
        }
    }

    /// Monotonicity on `[0, ∞)`.
    pub fn monotonicity(&self) -> Monotonicity {
        self.monotonicity_from(0.0)
    }

    /// Monotonicity on `[a, ∞)`.
    pub fn monotonicity_from(&self, a: f64) -> Monotonicity {
        match *self {
            GammaSchedule::PowerExp { d0, d1, .. } => {
                // (ln Γ)' = d0 + d1 / (1 + t) sweeps between d0 + d1/(1+a) and d0.
                let first = d0 + d1 / (1.0 + a);
                Monotonicity::from_log_derivative_range(first.min(d0), first.max(d0))
            }
            GammaSchedule::PureExp { gamma } => Monotonicity::from_log_derivative_range(gamma, gamma),
            GammaSchedule::KatoPower { q, .. } => Monotonicity::from_log_derivative_range(-(1.0 + q), -(1.0 + q)),
            GammaSchedule::Zero => Monotonicity::Constant,
        }
    }

    /// First time `>= a` from which `Γ` is nonincreasing, if any.
    pub fn nonincreasing_from(&self, a: f64) -> Option<f64> {
        match *self {
            GammaSchedule::PowerExp { d0, d1, .. } => {
                if d0 > 0.0 || (d0 == 0.0 && d1 > 0.0) {
                    None
                } else if d1 <= 0.0 || d0 == 0.0 {
                    Some(a)
                } else {
                    // d0 + d1 / (1 + t) <= 0 for t >= d1 / |d0| - 1.
                    Some(a.max(d1 / -d0 - 1.0))
                }
            }
            GammaSchedule::PureExp { gamma } => (gamma <= 0.0).then_some(a),
            GammaSchedule::KatoPower { .. } | GammaSchedule::Zero => Some(a),
        }
    }
}

impl fmt::Display for GammaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GammaSchedule::PowerExp { c, d0, d1 } => write!(f, "{c}(1+t)^{d1} e^({d0} t)"),
            GammaSchedule::PureExp { gamma } => write!(f, "e^({gamma} t)"),
            GammaSchedule::KatoPower { c, q } => write!(f, "{c} t^(-1-{q})"),
            GammaSchedule::Zero => write!(f, "0"),
        }
    }
}

/// `(t, F, F')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentState {
    pub t: f64,
    pub f: f64,
    pub fdot: f64,
}

/// Moments `C0 = ∫φ0`, `C1 = ∫φ1` of the Cauchy data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyMoments {
    pub c0: f64,
    pub c1: f64,
}

/// Constants of the comparison ODE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonParams {
    pub mass: f64,
    /// `p (β + 1)`.
    pub q_eff: f64,
    pub delta0: f64,
    pub gamma: GammaSchedule,
}

impl ComparisonParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass >= 0.0) || !self.mass.is_finite() {
            return Err(Error::domain(format!("curved mass must be >= 0, got {}", self.mass)));
        }
        if !(self.q_eff > 1.0) || !self.q_eff.is_finite() {
            return Err(Error::Precondition(format!(
                "the blow-up regime needs p(β+1) > 1, i.e. β > 1/p - 1; got p(β+1) = {}",
                self.q_eff
            )));
        }
        if !(self.delta0 > 0.0) || !self.delta0.is_finite() {
            return Err(Error::domain(format!("delta0 must be positive, got {}", self.delta0)));
        }
        self.gamma.validate()
    }
}

/// `M^2 F + delta0 Γ(t) F^q` for `F >= 0`.
pub fn comparison_rhs(t: f64, f: f64, params: &ComparisonParams) -> Result<f64> {
    if f < 0.0 || f.is_nan() {
        return Err(Error::domain(format!("comparison ODE needs F >= 0, got {f}")));
    }
    Ok(params.mass * params.mass * f + params.delta0 * params.gamma.eval(t) * f.powf(params.q_eff))
}

/// Outcome of a run, shared by the ODE and PDE layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Blowup { t_est: f64, err: f64 },
    AliveAt { t_max: f64 },
    Inconclusive { reason: String },
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Blowup { .. } => "blowup",
            Classification::AliveAt { .. } => "alive_at",
            Classification::Inconclusive { .. } => "inconclusive",
        }
    }

    pub fn is_blowup(&self) -> bool {
        matches!(self, Classification::Blowup { .. })
    }

    pub fn blowup_time(&self) -> Option<f64> {
        match self {
            Classification::Blowup { t_est, .. } => Some(*t_est),
            _ => None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Blowup { t_est, err } => write!(f, "blowup(T = {t_est:.6} ± {err:.2e})"),
            Classification::AliveAt { t_max } => {
                write!(f, "alive_at({t_max}) [no blow-up before t_max at tested resolutions]")
            }
            Classification::Inconclusive { reason } => write!(f, "inconclusive ({reason})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub f: f64,
    pub fdot: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    /// CSV with header `t,F,Fdot,stepsize`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "F", "Fdot", "stepsize"])?;
        for p in &self.points {
            wr.write_record([p.t, p.f, p.fdot, p.step].map(|v| format!("{v:e}")))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub classification: Classification,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Exponent of the tail fit `F ~ C (T - t)^{-k}`; `2/(q-1)` expected.
    pub fitted_exponent: Option<f64>,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [f64; 2];

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Integrate the comparison ODE from `init` to `t_max`.
///
/// Reaching `t_max` means the solution is alive there, however large. A
/// run that stops early (step collapse or `F > 1e200`) after `F` escaped,
/// i.e. `F > F_CAP` or `F^{(q-1)/2}` grew by `ESCAPE_RATIO`, is a blow-up
/// whose time is extrapolated from a linear fit of `F^{-(q-1)/2}` over the
/// last accepted steps.
pub fn integrate_moment_ode(
    init: &MomentState,
    params: &ComparisonParams,
    t_max: f64,
    tol: f64,
) -> Result<(Trajectory, BlowupReport)> {
    params.validate()?;
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    if !(init.f >= 0.0) || !init.fdot.is_finite() {
        return Err(Error::domain(format!("initial F must be >= 0, got {}", init.f)));
    }
    if !(t_max >= init.t) {
        return Err(Error::domain(format!(
            "t_max = {t_max} precedes the initial time {}",
            init.t
        )));
    }
    let q = params.q_eff;
    let m2 = params.mass * params.mass;
    let rhs = |t: f64, y: &State| -> State {
        let f = y[0].max(0.0);
        [y[1], m2 * y[0] + params.delta0 * params.gamma.eval(t) * f.powf(q)]
    };
    let mut t = init.t;
    let mut y: State = [init.f, init.fdot];
    let mut traj = Trajectory {
        points: vec![TrajectoryPoint {
            t,
            f: y[0],
            fdot: y[1],
            step: 0.0,
        }],
    };
    let span = (t_max - t).max(f64::MIN_POSITIVE);
    let mut h = (1e-3 * span).min(0.01);
    let mut k1 = rhs(t, &y);
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let escape_level = (ESCAPE_RATIO * init.f.max(1.0).powf((q - 1.0) / 2.0))
        .powf(2.0 / (q - 1.0))
        .min(F_CAP);
    let mut stop_reason: Option<String> = None;

    while t < t_max {
        if t + h > t_max {
            h = t_max - t;
        }
        if h <= 1e-15 * (1.0 + t.abs()) {
            stop_reason = Some(format!("step size collapsed at t = {t}"));
            break;
        }
        let k2 = rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = rhs(t + h, &y_new);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol + tol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        let finite = y_new.iter().all(|v| v.is_finite()) && err.is_finite();
        if finite && err <= 1.0 {
            t += h;
            y = y_new;
            k1 = k7;
            accepted += 1;
            traj.points.push(TrajectoryPoint {
                t,
                f: y[0],
                fdot: y[1],
                step: h,
            });
            if y[0] > 1e200 {
                stop_reason = Some(format!("F left the floating-point range at t = {t}"));
                break;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            rejected += 1;
            let factor = if finite {
                (0.9 * err.powf(-0.25)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
        }
        if accepted + rejected > 5_000_000 {
            stop_reason = Some("step budget exhausted".into());
            break;
        }
    }

    let escaped = traj.last().is_some_and(|p| p.f > escape_level);
    let (classification, exponent) = if stop_reason.is_some() && escaped {
        match fit_blowup_time(&traj.points, q) {
            Some((t_est, err, k)) => (Classification::Blowup { t_est, err }, Some(k)),
            None => (
                Classification::Inconclusive {
                    reason: "F escaped but the tail fit failed".into(),
                },
                None,
            ),
        }
    } else if let Some(reason) = stop_reason {
        (Classification::Inconclusive { reason }, None)
    } else {
        (Classification::AliveAt { t_max }, None)
    };
    Ok((
        traj,
        BlowupReport {
            classification,
            steps_accepted: accepted,
            steps_rejected: rejected,
            fitted_exponent: exponent,
        },
    ))
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Zero of the linear fit of `F^{-(q-1)/2}` against `t` over the tail, the
/// spread between two window lengths, and the fitted power exponent.
fn fit_blowup_time(points: &[TrajectoryPoint], q: f64) -> Option<(f64, f64, f64)> {
    let tail: Vec<&TrajectoryPoint> = points.iter().filter(|p| p.f > 1.0).collect();
    if tail.len() < 4 {
        return None;
    }
    let window = |len: usize| -> Option<f64> {
        let pts = &tail[tail.len().saturating_sub(len)..];
        let xs: Vec<f64> = pts.iter().map(|p| p.t).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.f.powf(-(q - 1.0) / 2.0)).collect();
        let (slope, icpt) = linear_fit(&xs, &ys)?;
        (slope < 0.0).then(|| -icpt / slope)
    };
    let t_full = window(TAIL_FIT_STEPS)?;
    let t_half = window(TAIL_FIT_STEPS / 2).unwrap_or(t_full);
    let last = tail[tail.len() - 1];
    let t_est = t_full.max(last.t);
    // Exponent from two late points: ln F = -k ln(T - t) + const.
    let a = tail[tail.len().saturating_sub(TAIL_FIT_STEPS)];
    let k = if t_est > last.t && t_est > a.t {
        (last.f.ln() - a.f.ln()) / ((t_est - a.t).ln() - (t_est - last.t).ln())
    } else {
        f64::NAN
    };
    let err = (t_full - t_half).abs().max(t_est - last.t);
    Some((t_est, err, k))
}

/// Integrate many independent draws concurrently.
pub fn integrate_batch(
    draws: &[(MomentState, ComparisonParams)],
    t_max: f64,
    tol: f64,
) -> Vec<Result<(Trajectory, BlowupReport)>> {
    draws
        .par_iter()
        .map(|(init, params)| integrate_moment_ode(init, params, t_max, tol))
        .collect()
}

/// `F(t) = c_F e^{d t/(p-1)}`, `c_F = (d/(p-1))^{2/(p-1)}`, a global
/// solution of `F'' = e^{-d t} F^p`. Returns `(F, F', F'')`.
pub fn exact_global_solution(d: f64, p: f64, t: f64) -> (f64, f64, f64) {
    let rate = d / (p - 1.0);
    let c_f = rate.powf(2.0 / (p - 1.0));
    let f = c_f * (rate * t).exp();
    (f, rate * f, rate * rate * f)
}

/// Which lemma a certificate instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    LargeEnergy,
    SmallEnergy,
    KatoPower,
}

impl fmt::Display for LemmaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LemmaKind::LargeEnergy => "large_energy",
            LemmaKind::SmallEnergy => "small_energy",
            LemmaKind::KatoPower => "kato_power",
        })
    }
}

/// How a condition verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Exact for all `t` in the range.
    Analytic,
    /// Checked on the probe grid only.
    GridLimited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub holds: bool,
    pub margin: f64,
    pub basis: Basis,
}

impl ConditionReport {
    fn new(name: &str, holds: bool, margin: f64, basis: Basis) -> Self {
        Self {
            name: name.into(),
            holds,
            margin,
            basis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupCertificate {
    pub lemma: LemmaKind,
    pub a: f64,
    pub a1: Option<f64>,
    pub t_upper: Option<f64>,
    pub conditions: Vec<ConditionReport>,
    pub notes: Vec<String>,
}

impl BlowupCertificate {
    /// All conditions hold, so the lemma predicts a finite lifespan.
    pub fn holds(&self) -> bool {
        !self.conditions.is_empty() && self.conditions.iter().all(|c| c.holds)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.conditions
            .iter()
            .filter(|c| !c.holds)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// The weight used by the large-energy lemma on `[a, ∞)`: `delta0 Γ` when
/// `Γ` is nonincreasing there, the constant minorant `delta0 Γ(a)` when it is
/// nondecreasing.
fn large_energy_weight(params: &ComparisonParams, a: f64) -> Result<(GammaSchedule, f64, Option<String>)> {
    match params.gamma.monotonicity_from(a) {
        Monotonicity::Mixed => Err(Error::Precondition(format!(
            "the large-energy lemma needs Γ either non-decreasing or non-increasing on [{a}, ∞); {} is neither",
            params.gamma
        ))),
        Monotonicity::Nondecreasing => {
            let g = params.gamma.eval(a);
            Ok((
                GammaSchedule::constant(g),
                params.delta0,
                Some(format!("Γ non-decreasing: constant minorant Γ(a) = {g:e} used")),
            ))
        }
        _ => Ok((params.gamma, params.delta0, None)),
    }
}

/// `√(2/(q+1)) ∫_a^T (delta0 Γ)^{1/2}`.
fn energy_integral(gamma: &GammaSchedule, delta0: f64, q: f64, a: f64, t: f64) -> Result<f64> {
    if t <= a {
        return Ok(0.0);
    }
    let r = integrate(
        |s| (delta0 * gamma.eval(s)).sqrt(),
        a,
        t,
        &QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        },
    )?;
    Ok((2.0 / (q + 1.0)).sqrt() * r.value)
}

/// First `T` in `(a, horizon]` at which the integrated energy inequality
/// exhausts the gap `(2/(q-1)) F_a^{(1-q)/2}`.
fn exhaust_gap(
    gamma: &GammaSchedule,
    delta0: f64,
    q: f64,
    a: f64,
    f_a: f64,
    horizon: f64,
) -> Result<(Option<f64>, f64)> {
    let gap = 2.0 / (q - 1.0) * f_a.powf((1.0 - q) / 2.0);
    let at_horizon = energy_integral(gamma, delta0, q, a, horizon)?;
    if at_horizon <= gap {
        return Ok((None, at_horizon - gap));
    }
    let (mut lo, mut hi) = (a, horizon);
    // Shrink the bracket geometrically first so wide horizons stay cheap.
    loop {
        let mid = a + 0.5 * (hi - a);
        if mid - a < 1e-3 * (hi - a).max(1e-300) || energy_integral(gamma, delta0, q, a, mid)? <= gap {
            break;
        }
        hi = mid;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        if energy_integral(gamma, delta0, q, a, mid)? > gap {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok((Some(hi), at_horizon - gap))
}

/// Check the large-energy lemma at time `a` for the comparison system:
/// `√(2/(q+1)) ∫_a^{a1} (delta0 Γ)^{1/2} > (2/(q-1)) F_a^{(1-q)/2}` for some
/// `a1 <= search_horizon`, and `F'_a^2 >= (2/(q+1)) delta0 Γ(a) F_a^{q+1}`.
pub fn check_lemma_large_energy(
    params: &ComparisonParams,
    a: f64,
    f_a: f64,
    fdot_a: f64,
    search_horizon: f64,
) -> Result<BlowupCertificate> {
    params.validate()?;
    if !(f_a > 0.0) || !(fdot_a >= 0.0) || !(a >= 0.0) {
        return Err(Error::Precondition(format!(
            "the large-energy lemma needs a >= 0, F(a) > 0 and F'(a) >= 0; got a = {a}, F = {f_a}, F' = {fdot_a}"
        )));
    }
    let (weight, delta0, note) = large_energy_weight(params, a)?;
    let q = params.q_eff;
    let g_a = weight.eval(a);
    if !(g_a > 0.0) {
        return Err(Error::Precondition(format!(
            "the large-energy lemma needs Γ(a) > 0, got {g_a}"
        )));
    }
    let rhs = 2.0 / (q + 1.0) * delta0 * g_a * f_a.powf(q + 1.0);
    let energy = ConditionReport::new(
        "initial_energy",
        // Relative slack of a few ulps so equality survives rounding.
        fdot_a * fdot_a >= rhs * (1.0 - 1e-12),
        (fdot_a * fdot_a - rhs) / rhs.max(f64::MIN_POSITIVE),
        Basis::Analytic,
    );
    let horizon = search_horizon.max(a);
    let (root, margin) = exhaust_gap(&weight, delta0, q, a, f_a, horizon)?;
    let gap = ConditionReport::new("integral_gap", root.is_some(), margin, Basis::Analytic);
    let mut cert = BlowupCertificate {
        lemma: LemmaKind::LargeEnergy,
        a,
        a1: root,
        t_upper: None,
        conditions: vec![energy, gap],
        notes: note.into_iter().collect(),
    };
    if cert.holds() {
        cert.t_upper = root;
    }
    Ok(cert)
}

/// Bound returned by [`lifespan_upper_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanBound {
    pub t_upper: Option<f64>,
    pub diagnostic: String,
}

/// Furthest time probed by [`lifespan_upper_bound`].
pub const LIFESPAN_HORIZON: f64 = 1e6;

/// First `T` with `√(2/(q+1)) ∫_a^T (delta0 Γ)^{1/2} = (2/(q-1)) F_a^{(1-q)/2}`.
pub fn lifespan_upper_bound(params: &ComparisonParams, a: f64, f_a: f64) -> Result<LifespanBound> {
    params.validate()?;
    if !(f_a > 0.0) {
        return Err(Error::Precondition(format!("lifespan bound needs F(a) > 0, got {f_a}")));
    }
    let (weight, delta0, _) = large_energy_weight(params, a)?;
    let q = params.q_eff;
    let mut horizon = a + 1.0;
    loop {
        let (root, margin) = exhaust_gap(&weight, delta0, q, a, f_a, horizon)?;
        if let Some(t) = root {
            return Ok(LifespanBound {
                t_upper: Some(t),
                diagnostic: format!("gap exhausted at T = {t}"),
            });
        }
        if horizon >= a + LIFESPAN_HORIZON {
            return Ok(LifespanBound {
                t_upper: None,
                diagnostic: format!("gap not exhausted by t = {horizon:e}: ∫ falls short by {:e}", -margin),
            });
        }
        horizon = a + 2.0 * (horizon - a);
    }
}

/// Geometric probe grid `start * ratio^k`, capped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub start: f64,
    pub ratio: f64,
    pub cap: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            start: 1.0,
            ratio: PROBE_RATIO,
            cap: PROBE_CAP,
        }
    }
}

impl ProbeGrid {
    pub fn from(a: f64) -> Self {
        Self {
            start: a.max(0.1),
            ..Self::default()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut t = self.start.max(1e-3);
        while t <= self.cap {
            out.push(t);
            t *= self.ratio.max(1.0 + 1e-3);
        }
        if out.is_empty() {
            out.push(self.start);
        }
        out
    }
}

/// Check the small-energy lemma with `A(t) = e^{M t}` and
/// `γ(t) = Γ(t) e^{M q t}`: `A → ∞`, `(γ A^{-q})' = Γ' <= 0`, and
/// `γ >= c A (ln A)^{2+ε}`, i.e. `Γ(t) >= c M^{2+ε} t^{2+ε} e^{-M(q-1) t}`.
///
/// Conditions are asserted from `max(grid.start, t*)` on, where `t*` is the
/// start of the monotone tail of `Γ`; a non-decreasing `Γ` is replaced by its
/// constant minorant on that tail. Power-exponential and pure-exponential
/// schedules get an exact verdict; others are checked on the probe grid.
pub fn check_lemma_small_energy(
    mass: f64,
    gamma: &GammaSchedule,
    q_eff: f64,
    eps: f64,
    c: f64,
    grid: &ProbeGrid,
) -> Result<BlowupCertificate> {
    if mass == 0.0 {
        return Err(Error::Precondition(
            "the small-energy lemma needs M > 0 (A = e^{Mt} must grow); use the kato_power checker for M = 0".into(),
        ));
    }
    if !(mass > 0.0) || !(q_eff > 1.0) || !(eps > 0.0) || !(c > 0.0) {
        return Err(Error::Precondition(format!(
            "small-energy lemma needs M > 0, q > 1, eps > 0, c > 0; got M = {mass}, q = {q_eff}, eps = {eps}, c = {c}"
        )));
    }
    gamma.validate()?;
    let mut notes = Vec::new();
    let a0 = grid.start.max(0.0);
    let (a, weight) = match gamma.nonincreasing_from(a0) {
        Some(a) => (a, *gamma),
        None => {
            let g = gamma.eval(a0);
            notes.push(format!("Γ non-decreasing: constant minorant Γ({a0}) = {g:e} used"));
            (a0, GammaSchedule::constant(g))
        }
    };
    if a > a0 {
        notes.push(format!("Γ is non-increasing only from t = {a}"));
    }
    let mut conditions = vec![ConditionReport::new("growth_A", true, mass, Basis::Analytic)];
    let probe: Vec<f64> = ProbeGrid {
        start: a.max(grid.start).max(1e-3),
        ..*grid
    }
    .points();

    // (γ A^{-q})' = Γ' <= 0 on the tail.
    let worst_slope = probe
        .iter()
        .map(|&t| weight.derivative(t))
        .fold(f64::NEG_INFINITY, f64::max);
    let analytic = matches!(weight, GammaSchedule::PowerExp { .. } | GammaSchedule::PureExp { .. });
    conditions.push(ConditionReport::new(
        "monotone_ratio",
        if analytic {
            weight.nonincreasing_from(a).is_some()
        } else {
            worst_slope <= 0.0
        },
        -worst_slope,
        if analytic { Basis::Analytic } else { Basis::GridLimited },
    ));

    // γ >= c A (ln A)^{2+ε}.
    let expo = 2.0 + eps;
    let ratio = |t: f64| weight.eval(t) / (c * (mass * t).powf(expo) * (-mass * (q_eff - 1.0) * t).exp());
    let worst_ratio = probe.iter().map(|&t| ratio(t)).fold(f64::INFINITY, f64::min);
    let borderline = -mass * (q_eff - 1.0);
    let growth = match weight {
        GammaSchedule::PowerExp { d0, d1, .. } => Some((d0, d1)),
        GammaSchedule::PureExp { gamma } => Some((gamma, 0.0)),
        _ => None,
    };
    let report = match growth {
        Some((d0, d1)) => {
            let tol = 1e-12 * (1.0 + borderline.abs());
            let holds = d0 > borderline + tol || ((d0 - borderline).abs() <= tol && d1 >= expo);
            ConditionReport::new("gamma_growth", holds, worst_ratio - 1.0, Basis::Analytic)
        }
        None => ConditionReport::new(
            "gamma_growth",
            worst_ratio >= 1.0,
            worst_ratio - 1.0,
            Basis::GridLimited,
        ),
    };
    conditions.push(report);
    Ok(BlowupCertificate {
        lemma: LemmaKind::SmallEnergy,
        a,
        a1: None,
        t_upper: None,
        conditions,
        notes,
    })
}

/// `inf_t Γ(t) t^{1+q}` over `[1, ∞)` as the Kato power criterion for `M = 0`.
pub fn check_kato_power(gamma: &GammaSchedule, q_eff: f64) -> Result<BlowupCertificate> {
    if !(q_eff > 1.0) {
        return Err(Error::Precondition(format!(
            "Kato's criterion needs q > 1, got {q_eff}"
        )));
    }
    gamma.validate()?;
    let probe = ProbeGrid::default().points();
    let margin = probe
        .iter()
        .map(|&t| gamma.eval(t) * t.powf(1.0 + q_eff))
        .fold(f64::INFINITY, f64::min);
    let (holds, basis) = match *gamma {
        GammaSchedule::KatoPower { q, .. } => (q <= q_eff, Basis::Analytic),
        GammaSchedule::PureExp { gamma } => (gamma >= 0.0, Basis::Analytic),
        GammaSchedule::PowerExp { d0, d1, .. } => (d0 > 0.0 || (d0 == 0.0 && d1 + 1.0 + q_eff >= 0.0), Basis::Analytic),
        GammaSchedule::Zero => (false, Basis::Analytic),
    };
    Ok(BlowupCertificate {
        lemma: LemmaKind::KatoPower,
        a: 1.0,
        a1: None,
        t_upper: None,
        conditions: vec![ConditionReport::new("kato_power_bound", holds, margin, basis)],
        notes: Vec::new(),
    })
}

/// Large-data conditions for `Γ = e^{γ t}`, `γ < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeDataReport {
    pub holds: bool,
    pub conditions: Vec<ConditionReport>,
    /// Set when `γ >= 0`, where small data already blow up.
    pub redirect: Option<String>,
}

/// `C1 >= √(2 delta0/(q+1)) C0^{(q+1)/2}` (kinetic energy),
/// `C0^{q-1} > γ²(q+1)/(delta0 (q-1))` (potential energy, as printed), and
/// `C0^{q-1} > γ²(q+1)/(2 (q-1)² delta0)`, the exact form of the
/// integral-gap condition over `[0, ∞)`. The printed potential condition
/// implies the exact one only for `q >= 3/2`, so both are required.
pub fn check_large_data_conditions(
    gamma: f64,
    q_eff: f64,
    delta0: f64,
    moments: &CauchyMoments,
) -> Result<LargeDataReport> {
    if !(q_eff > 1.0) || !(delta0 > 0.0) || !gamma.is_finite() {
        return Err(Error::Precondition(format!(
            "large-data check needs q > 1, delta0 > 0; got q = {q_eff}, delta0 = {delta0}"
        )));
    }
    let CauchyMoments { c0, c1 } = *moments;
    let positive = c0 > 0.0 && c1 > 0.0;
    let kinetic_rhs = (2.0 * delta0 / (q_eff + 1.0)).sqrt() * c0.max(0.0).powf((q_eff + 1.0) / 2.0);
    let pot = c0.max(0.0).powf(q_eff - 1.0);
    let printed_rhs = gamma * gamma * (q_eff + 1.0) / (delta0 * (q_eff - 1.0));
    let exact_rhs = gamma * gamma * (q_eff + 1.0) / (2.0 * (q_eff - 1.0).powi(2) * delta0);
    let conditions = vec![
        ConditionReport::new(
            "kinetic_energy",
            positive && c1 >= kinetic_rhs,
            c1 - kinetic_rhs,
            Basis::Analytic,
        ),
        ConditionReport::new(
            "potential_energy",
            positive && pot > printed_rhs,
            pot - printed_rhs,
            Basis::Analytic,
        ),
        ConditionReport::new(
            "integral_gap",
            positive && pot > exact_rhs,
            pot - exact_rhs,
            Basis::Analytic,
        ),
    ];
    Ok(LargeDataReport {
        holds: conditions.iter().all(|c| c.holds),
        conditions,
        redirect: (gamma >= 0.0)
            .then(|| "γ >= 0: blow-up holds for small data via the power-exponential criterion".to_string()),
    })
}
