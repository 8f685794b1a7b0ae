//! Picard iteration of `u = u0 + G[Γ (∫|u|^p)^β |u|^p]` on successive time
//! windows, with `G` discretized by [`ConeConvolution`].

use serde::{Deserialize, Serialize};

use super::diagnostics::{moments as level_moments, support_radius, MomentRecord};
use super::fd::{nonlinear_coefficient, FieldHistory, RunOutcome, SingleRun, BLOWUP_LEVEL};
use super::grid::Grid1D;
use super::params::PhysicalParams;
use crate::blowup_ode::GammaSchedule;
use crate::error::{Error, Result};
use crate::goperator::ConeConvolution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Iterations per window before the window is halved.
    pub k_max: usize,
    /// Initial window length in time levels.
    pub window: usize,
    /// Sup-norm tolerance, relative to `max(1, max|u|)`.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            k_max: 50,
            window: 16,
            tol: 1e-8,
        }
    }
}

/// Picard run, with per-window iteration counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardRun {
    pub run: SingleRun,
    pub iterations: Vec<usize>,
}

fn nonlinearity(u: &[f64], t: f64, dx: f64, params: &PhysicalParams, gamma: &GammaSchedule) -> Vec<f64> {
    let (_, pp) = level_moments(u, dx, params.p());
    let g = nonlinear_coefficient(gamma, t, pp, params.beta());
    let p = params.p();
    u.iter().map(|&v| g * v.abs().powf(p)).collect()
}

/// Iterate on windows of the free solution `u0`, which must hold every
/// level of a uniform-step run (as produced by `run_fd_single` with
/// `field_stride = 1` and no adaptivity).
pub fn solve_picard(
    u0: &FieldHistory,
    params: &PhysicalParams,
    gamma: &GammaSchedule,
    opts: &PicardOptions,
) -> Result<PicardRun> {
    if params.n() != 1 {
        return Err(Error::NotImplemented(format!(
            "Picard backend is 1-D only, got n = {}",
            params.n()
        )));
    }
    if u0.levels.len() < 2 || u0.levels.len() != u0.times.len() {
        return Err(Error::Config("free solution needs at least two stored levels".into()));
    }
    if opts.window == 0 || opts.k_max == 0 || !(opts.tol > 0.0) {
        return Err(Error::Config(format!("bad Picard options {opts:?}")));
    }
    let dt = u0.times[1] - u0.times[0];
    for w in u0.times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
            return Err(Error::Config("free solution must be sampled at a uniform step".into()));
        }
    }
    let nx = u0.levels[0].len();
    let dx = u0.dx;
    let grid = Grid1D {
        x_min: u0.x_min,
        x_max: u0.x_min + (nx - 1) as f64 * dx,
        nx,
        dt,
        t_max: *u0.times.last().unwrap_or(&0.0),
    };
    let total = u0.levels.len();
    let mut conv = ConeConvolution::new(params.mass(), dx, dt)?;
    let mut levels: Vec<Vec<f64>> = vec![u0.levels[0].clone()];
    let mut sources: Vec<Vec<f64>> = vec![nonlinearity(&levels[0], u0.times[0], dx, params, gamma)];
    let mut iterations = Vec::new();
    let mut window = opts.window;
    let mut outcome = None;

    while levels.len() < total {
        let n0 = levels.len();
        let n1 = (n0 + window).min(total);
        conv.prepare(n1 - 1)?;
        // History from accepted levels stays fixed during the iteration.
        let base: Vec<Vec<f64>> = (n0..n1)
            .map(|n| {
                let mut out = u0.levels[n].clone();
                conv.accumulate(n, 0..n0, |j| sources[j].as_slice(), &mut out);
                out
            })
            .collect();
        let mut guess = base.clone();
        let mut converged = false;
        let mut last_change = f64::INFINITY;
        let mut growth = 0;
        let mut k = 0;
        while k < opts.k_max {
            k += 1;
            let src: Vec<Vec<f64>> = guess
                .iter()
                .enumerate()
                .map(|(w, u)| nonlinearity(u, u0.times[n0 + w], dx, params, gamma))
                .collect();
            let mut change: f64 = 0.0;
            let mut scale: f64 = 1.0;
            let mut fresh = base.clone();
            for (w, out) in fresh.iter_mut().enumerate() {
                let n = n0 + w;
                conv.accumulate(n, n0..n, |j| src[j - n0].as_slice(), out);
                for (a, b) in out.iter().zip(&guess[w]) {
                    change = change.max((a - b).abs());
                    scale = scale.max(a.abs());
                }
            }
            guess = fresh;
            if !change.is_finite() {
                break;
            }
            if change <= opts.tol * scale {
                converged = true;
                break;
            }
            growth = if change > last_change { growth + 1 } else { 0 };
            last_change = change;
            if growth >= 3 {
                break;
            }
        }
        if !converged {
            if window > 1 {
                window /= 2;
                continue;
            }
            outcome = Some(RunOutcome::Blowup {
                t_cross: u0.times[n0 - 1],
            });
            break;
        }
        iterations.push(k);
        let mut blown = None;
        for (w, u) in guess.into_iter().enumerate() {
            let n = n0 + w;
            let m = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            sources.push(nonlinearity(&u, u0.times[n], dx, params, gamma));
            levels.push(u);
            if m > BLOWUP_LEVEL || !m.is_finite() {
                blown = Some(n);
                break;
            }
        }
        if let Some(n) = blown {
            outcome = Some(RunOutcome::Blowup { t_cross: u0.times[n] });
            break;
        }
        window = opts.window;
    }

    let p = params.p();
    let m2 = params.mass() * params.mass();
    let mut records = Vec::with_capacity(levels.len());
    let moms: Vec<(f64, f64)> = levels.iter().map(|u| level_moments(u, dx, p)).collect();
    for (n, u) in levels.iter().enumerate() {
        let t = u0.times[n];
        let (f, pp) = moms[n];
        let fddot = m2 * f + nonlinear_coefficient(gamma, t, pp, params.beta()) * pp;
        // Backward difference corrected by the moment law; forward at n = 0.
        let fdot = match n {
            0 if moms.len() > 1 => (moms[1].0 - f) / dt - 0.5 * dt * fddot,
            0 => 0.0,
            _ => (f - moms[n - 1].0) / dt + 0.5 * dt * fddot,
        };
        records.push(MomentRecord {
            t,
            f,
            fdot,
            pp,
            r: support_radius(u, grid.x_min, dx),
            max_abs_u: u.iter().fold(0.0, |a, v| a.max(v.abs())),
        });
    }
    let outcome = outcome.unwrap_or(RunOutcome::Reached { t: grid.t_max });
    Ok(PicardRun {
        run: SingleRun {
            grid,
            records,
            outcome,
            steps: levels.len() - 1,
            min_dt: dt,
            fields: Some(FieldHistory {
                x_min: grid.x_min,
                dx,
                times: u0.times[..levels.len()].to_vec(),
                levels,
            }),
        },
        iterations,
    })
}

/// One Jacobi sweep `u0 + G[N(u)]` over all stored levels of `u`, which
/// must share the grid and times of `u0`.
pub fn picard_iterate(
    u: &FieldHistory,
    u0: &FieldHistory,
    params: &PhysicalParams,
    gamma: &GammaSchedule,
) -> Result<FieldHistory> {
    if u.levels.len() != u0.levels.len() || u.times != u0.times || u.levels.len() < 2 {
        return Err(Error::Config(
            "iterate and free solution must share their time levels".into(),
        ));
    }
    let dt = u0.times[1] - u0.times[0];
    let mut conv = ConeConvolution::new(params.mass(), u0.dx, dt)?;
    conv.prepare(u0.levels.len() - 1)?;
    let src: Vec<Vec<f64>> = u
        .levels
        .iter()
        .zip(&u.times)
        .map(|(l, &t)| nonlinearity(l, t, u0.dx, params, gamma))
        .collect();
    let levels = (0..u0.levels.len())
        .map(|n| {
            let mut out = u0.levels[n].clone();
            conv.accumulate(n, 0..n, |j| src[j].as_slice(), &mut out);
            out
        })
        .collect();
    Ok(FieldHistory {
        x_min: u0.x_min,
        dx: u0.dx,
        times: u0.times.clone(),
        levels,
    })
}
