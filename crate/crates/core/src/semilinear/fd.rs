//! Explicit leapfrog scheme with centered second differences in space.

use serde::{Deserialize, Serialize};

use super::diagnostics::{abs_pow, support_radius, MomentRecord, SupportInfo};
use super::grid::{BumpData, Grid1D};
use super::params::PhysicalParams;
use crate::blowup_ode::{Classification, GammaSchedule};
use crate::error::{Error, Result};

/// `max|u|` above this counts as blow-up.
pub const BLOWUP_LEVEL: f64 = 1e8;
/// Step reduction trigger: `ω dt` with `ω² = M² + g p max|u|^{p-1}`.
pub const STIFFNESS_LIMIT: f64 = 0.05;
/// Smallest allowed step as a fraction of the base step.
const MIN_STEP_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdOptions {
    /// Record diagnostics every this many steps.
    pub record_stride: usize,
    /// Keep every `field_stride`-th level; 0 keeps none.
    pub field_stride: usize,
    /// Halve the step as the nonlinearity stiffens near blow-up.
    pub adaptive: bool,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            record_stride: 10,
            field_stride: 0,
            adaptive: true,
        }
    }
}

/// Stored field levels on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHistory {
    pub x_min: f64,
    pub dx: f64,
    pub times: Vec<f64>,
    pub levels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutcome {
    Reached { t: f64 },
    Blowup { t_cross: f64 },
    Stalled { t: f64, reason: String },
}

/// One run at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleRun {
    pub grid: Grid1D,
    pub records: Vec<MomentRecord>,
    pub outcome: RunOutcome,
    pub steps: usize,
    /// Smallest step used.
    pub min_dt: f64,
    #[serde(skip)]
    pub fields: Option<FieldHistory>,
}

impl SingleRun {
    pub fn classification(&self) -> Classification {
        match &self.outcome {
            RunOutcome::Reached { .. } => Classification::AliveAt { t_max: self.grid.t_max },
            RunOutcome::Blowup { t_cross } => Classification::Blowup {
                t_est: *t_cross,
                err: self.min_dt,
            },
            RunOutcome::Stalled { reason, .. } => Classification::Inconclusive { reason: reason.clone() },
        }
    }

    pub fn support(&self, r_data: f64) -> Vec<SupportInfo> {
        self.records.iter().map(|r| SupportInfo { r: r.r, r_data }).collect()
    }

    pub fn max_support_radius(&self) -> f64 {
        self.records.iter().map(|r| r.r).fold(0.0, f64::max)
    }
}

/// Runs at `dx` and `dx/2` and their combined verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeRun {
    pub coarse: SingleRun,
    pub fine: SingleRun,
    pub classification: Classification,
}

impl PdeRun {
    pub fn records(&self) -> &[MomentRecord] {
        &self.fine.records
    }
}

/// Combine two resolutions: blow-up times are Richardson-extrapolated for a
/// second-order scheme, with the disagreement as the error bar.
pub fn combine_resolutions(coarse: &Classification, fine: &Classification) -> Classification {
    match (coarse, fine) {
        (Classification::Blowup { t_est: tc, .. }, Classification::Blowup { t_est: tf, err }) => {
            Classification::Blowup {
                t_est: tf + (tf - tc) / 3.0,
                err: (tf - tc).abs().max(*err),
            }
        }
        (Classification::AliveAt { .. }, Classification::AliveAt { t_max }) => {
            Classification::AliveAt { t_max: *t_max }
        }
        (Classification::Inconclusive { reason }, _) | (_, Classification::Inconclusive { reason }) => {
            Classification::Inconclusive { reason: reason.clone() }
        }
        (c, f) => Classification::Inconclusive {
            reason: format!("resolutions disagree: {} at dx, {} at dx/2", c.label(), f.label()),
        },
    }
}

fn check_dimension(params: &PhysicalParams) -> Result<()> {
    if params.n() != 1 {
        return Err(Error::NotImplemented(format!(
            "the PDE solvers work in one space dimension, got n = {}",
            params.n()
        )));
    }
    Ok(())
}

/// `Γ(t) Pp^β`, zero when `Pp = 0`.
pub(crate) fn nonlinear_coefficient(gamma: &GammaSchedule, t: f64, pp: f64, beta: f64) -> f64 {
    if pp == 0.0 {
        return 0.0;
    }
    let g = gamma.eval(t);
    if beta == 0.0 {
        g
    } else {
        g * pp.powf(beta)
    }
}

struct Level {
    f: f64,
    pp: f64,
    max_abs: f64,
    finite: bool,
}

fn scan_level(u: &[f64], dx: f64, p: f64) -> Level {
    let (mut f, mut pp, mut max_abs) = (0.0, 0.0, 0.0f64);
    if p == 2.0 {
        for &v in u {
            f += v;
            pp += v * v;
            max_abs = max_abs.max(v.abs());
        }
    } else {
        for &v in u {
            f += v;
            pp += v.abs().powf(p);
            max_abs = max_abs.max(v.abs());
        }
    }
    // Boundary values are pinned to zero, so the sum is the trapezoid rule.
    Level {
        f: f * dx,
        pp: pp * dx,
        max_abs,
        finite: f.is_finite() && pp.is_finite() && max_abs.is_finite(),
    }
}

/// Single-resolution leapfrog run from `u(·,0) = u0`, `u_t(·,0) = u1`.
pub fn run_fd_single(
    u0: &[f64],
    u1: &[f64],
    grid: &Grid1D,
    params: &PhysicalParams,
    gamma: &GammaSchedule,
    opts: &FdOptions,
) -> Result<SingleRun> {
    check_dimension(params)?;
    gamma.validate()?;
    let nx = grid.nx;
    if u0.len() != nx || u1.len() != nx {
        return Err(Error::Config(format!(
            "data has {} / {} points, grid has {nx}",
            u0.len(),
            u1.len()
        )));
    }
    if opts.record_stride == 0 {
        return Err(Error::Config("record_stride must be at least 1".into()));
    }
    let dx = grid.dx();
    let (p, beta) = (params.p(), params.beta());
    let m2 = params.mass() * params.mass();
    let inv_dx2 = 1.0 / (dx * dx);
    let base_steps = (grid.t_max / grid.dt).ceil().max(1.0);
    let dt0 = if grid.t_max > 0.0 {
        grid.t_max / base_steps
    } else {
        grid.dt
    };
    let min_dt = dt0 * MIN_STEP_FRACTION;

    let accel = |u: &[f64], t: f64, g: f64, i: usize| -> f64 {
        let lap = (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
        (-2.0 * t).exp() * lap + m2 * u[i] + g * abs_pow(u[i], p)
    };

    let mut prev = u0.to_vec();
    prev[0] = 0.0;
    prev[nx - 1] = 0.0;
    let mut cur = vec![0.0; nx];
    let mut next = vec![0.0; nx];

    let mut records = Vec::new();
    let mut fields = (opts.field_stride > 0).then(|| FieldHistory {
        x_min: grid.x_min,
        dx,
        times: Vec::new(),
        levels: Vec::new(),
    });
    let keep = |fields: &mut Option<FieldHistory>, step: usize, t: f64, u: &[f64]| {
        if let Some(h) = fields.as_mut() {
            if step.is_multiple_of(opts.field_stride) {
                h.times.push(t);
                h.levels.push(u.to_vec());
            }
        }
    };

    // Level 0 and the Taylor start.
    let lv0 = scan_level(&prev, dx, p);
    let g0 = nonlinear_coefficient(gamma, 0.0, lv0.pp, beta);
    let c1 = scan_level(u1, dx, p).f;
    records.push(MomentRecord {
        t: 0.0,
        f: lv0.f,
        fdot: c1,
        pp: lv0.pp,
        r: support_radius(&prev, grid.x_min, dx),
        max_abs_u: lv0.max_abs,
    });
    keep(&mut fields, 0, 0.0, &prev);
    if grid.t_max == 0.0 {
        return Ok(SingleRun {
            grid: *grid,
            records,
            outcome: RunOutcome::Reached { t: 0.0 },
            steps: 0,
            min_dt: dt0,
            fields,
        });
    }
    let mut h_prev = dt0;
    for i in 1..nx - 1 {
        cur[i] = prev[i] + dt0 * u1[i] + 0.5 * dt0 * dt0 * accel(&prev, 0.0, g0, i);
    }
    let mut t = dt0;
    let mut step = 1usize;
    let mut f_prev = lv0.f;
    let mut max_prev = lv0.max_abs;
    let mut t_prev = 0.0;
    let mut smallest = dt0;

    let outcome = loop {
        let lv = scan_level(&cur, dx, p);
        if !lv.finite {
            break RunOutcome::Blowup { t_cross: t_prev };
        }
        let g = nonlinear_coefficient(gamma, t, lv.pp, beta);
        let fddot = m2 * lv.f + g * lv.pp;
        let fdot = (lv.f - f_prev) / h_prev + 0.5 * h_prev * fddot;
        let at_end = t >= grid.t_max - 1e-9 * dt0;
        let blown = lv.max_abs > BLOWUP_LEVEL;
        if step.is_multiple_of(opts.record_stride) || at_end || blown {
            records.push(MomentRecord {
                t,
                f: lv.f,
                fdot,
                pp: lv.pp,
                r: support_radius(&cur, grid.x_min, dx),
                max_abs_u: lv.max_abs,
            });
        }
        keep(&mut fields, step, t, &cur);
        if blown {
            let (l0, l1) = (max_prev.max(f64::MIN_POSITIVE).ln(), lv.max_abs.ln());
            let frac = if l1 > l0 {
                ((BLOWUP_LEVEL.ln() - l0) / (l1 - l0)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            break RunOutcome::Blowup {
                t_cross: t_prev + frac * (t - t_prev),
            };
        }
        if at_end {
            break RunOutcome::Reached { t };
        }
        let edge_val = cur[2].abs().max(cur[nx - 3].abs());
        if edge_val > 1e-12 * lv.max_abs.max(1.0) {
            break RunOutcome::Stalled {
                t,
                reason: format!("support reached the boundary at t = {t}"),
            };
        }
        let mut h = dt0.min(h_prev);
        if opts.adaptive {
            let omega = (m2 + g * p * lv.max_abs.powf(p - 1.0)).sqrt();
            while omega * h > STIFFNESS_LIMIT && h > min_dt {
                h *= 0.5;
            }
            if h <= min_dt {
                break RunOutcome::Stalled {
                    t,
                    reason: format!("time step underflow at t = {t} with max|u| = {:e}", lv.max_abs),
                };
            }
        }
        // Absorb a sliver at the end instead of taking a tiny last step.
        if t + h * (1.0 + 1e-6) >= grid.t_max {
            h = grid.t_max - t;
        }
        let ratio = h / h_prev;
        let c = 0.5 * h * (h + h_prev);
        let e2t = (-2.0 * t).exp();
        let (cl, ce) = (c * e2t * inv_dx2, c * m2);
        if p == 2.0 {
            for i in 1..nx - 1 {
                let v = cur[i];
                next[i] = v + ratio * (v - prev[i]) + cl * (cur[i + 1] - 2.0 * v + cur[i - 1]) + v * (ce + c * g * v);
            }
        } else {
            for i in 1..nx - 1 {
                let v = cur[i];
                next[i] = v
                    + ratio * (v - prev[i])
                    + cl * (cur[i + 1] - 2.0 * v + cur[i - 1])
                    + ce * v
                    + c * g * v.abs().powf(p);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        f_prev = lv.f;
        max_prev = lv.max_abs;
        t_prev = t;
        h_prev = h;
        smallest = smallest.min(h);
        t += h;
        step += 1;
    };
    Ok(SingleRun {
        grid: *grid,
        records,
        outcome,
        steps: step,
        min_dt: smallest,
        fields,
    })
}

/// Run bump data at `grid` and at `grid.refined()` concurrently and
/// classify.
pub fn solve_fd(
    data: &BumpData,
    grid: &Grid1D,
    params: &PhysicalParams,
    gamma: &GammaSchedule,
    opts: &FdOptions,
) -> Result<PdeRun> {
    grid.validate(data.r0)?;
    let fine_grid = grid.refined();
    let run = |g: &Grid1D| {
        let (u0, u1) = data.sample(g);
        run_fd_single(&u0, &u1, g, params, gamma, opts)
    };
    let (coarse, fine) = rayon::join(|| run(grid), || run(&fine_grid));
    let (coarse, fine) = (coarse?, fine?);
    let classification = combine_resolutions(&coarse.classification(), &fine.classification());
    Ok(PdeRun {
        coarse,
        fine,
        classification,
    })
}
