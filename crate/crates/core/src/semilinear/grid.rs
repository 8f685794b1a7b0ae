use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

/// Uniform grid on `[x_min, x_max]` with `nx` points and base step `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dt: f64,
    pub t_max: f64,
}

/// Extra room beyond the influence region, in grid cells. Leapfrog
/// dispersion leaves tails above the support threshold some 15-25 cells
/// ahead of the exact cone.
pub const PAD_CELLS: f64 = 40.0;

impl Grid1D {
    /// Symmetric grid of step `dx` containing `[-r0 - 1, r0 + 1]` plus
    /// [`PAD_CELLS`] cells on each side.
    pub fn covering(r0: f64, dx: f64, dt: f64, t_max: f64) -> Result<Self> {
        if !(dx > 0.0) || !(r0 > 0.0) {
            return Err(Error::Config(format!(
                "need dx > 0 and r0 > 0, got dx = {dx}, r0 = {r0}"
            )));
        }
        let cells = ((r0 + 1.0) / dx + PAD_CELLS).ceil() as usize;
        let half = cells as f64 * dx;
        let grid = Self {
            x_min: -half,
            x_max: half,
            nx: 2 * cells + 1,
            dt,
            t_max,
        };
        grid.validate(r0)?;
        Ok(grid)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Check the domain against the influence region of data supported in
    /// `[-r0, r0]` and the CFL bound `dt <= dx/2`.
    pub fn validate(&self, r0: f64) -> Result<()> {
        if self.nx < 3 || !(self.x_max > self.x_min) {
            return Err(Error::Config(format!(
                "grid needs at least 3 points on a non-empty interval, got {} on [{}, {}]",
                self.nx, self.x_min, self.x_max
            )));
        }
        if self.x_min > -(r0 + 1.0) || self.x_max < r0 + 1.0 {
            return Err(Error::Config(format!(
                "domain [{}, {}] must contain the influence region [{}, {}]",
                self.x_min,
                self.x_max,
                -(r0 + 1.0),
                r0 + 1.0
            )));
        }
        let dx = self.dx();
        if !(self.dt > 0.0) || self.dt > 0.5 * dx * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "CFL violated: dt = {} must satisfy 0 < dt <= dx/2 = {}",
                self.dt,
                0.5 * dx
            )));
        }
        if !(self.t_max >= 0.0) || !self.t_max.is_finite() {
            return Err(Error::Config(format!(
                "t_max must be finite and >= 0, got {}",
                self.t_max
            )));
        }
        Ok(())
    }

    /// Same domain with `dx` and `dt` halved.
    pub fn refined(&self) -> Self {
        Self {
            nx: 2 * self.nx - 1,
            dt: 0.5 * self.dt,
            ..*self
        }
    }
}

/// `exp(-1/(1 - s^2))` on `(-1, 1)`, zero outside.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / ((1.0 - s) * (1.0 + s))).exp()
    }
}

/// `∫_{-1}^{1} bump`.
pub fn bump_integral() -> f64 {
    static VALUE: OnceLock<f64> = OnceLock::new();
    *VALUE.get_or_init(|| {
        integrate(bump, -1.0, 1.0, &QuadOptions::abs(1e-15))
            .map(|r| r.value)
            .unwrap_or(0.443_993_816_168_079_4)
    })
}

/// Cauchy data `u(·,0)`, `u_t(·,0)`: bumps on `[-r0, r0]` with moments
/// `c0` and `c1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpData {
    pub r0: f64,
    pub c0: f64,
    pub c1: f64,
}

impl BumpData {
    pub fn new(r0: f64, c0: f64, c1: f64) -> Result<Self> {
        if !(r0 > 0.0) || !c0.is_finite() || !c1.is_finite() {
            return Err(Error::Config(format!("bad data: r0 = {r0}, c0 = {c0}, c1 = {c1}")));
        }
        Ok(Self { r0, c0, c1 })
    }

    pub fn zero(r0: f64) -> Self {
        Self { r0, c0: 0.0, c1: 0.0 }
    }

    /// Same shape with both moments multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            c0: s * self.c0,
            c1: s * self.c1,
            ..*self
        }
    }

    fn profile(&self, c: f64, x: f64) -> f64 {
        c * bump(x / self.r0) / (self.r0 * bump_integral())
    }

    pub fn u0(&self, x: f64) -> f64 {
        self.profile(self.c0, x)
    }

    pub fn u1(&self, x: f64) -> f64 {
        self.profile(self.c1, x)
    }

    pub fn sample(&self, grid: &Grid1D) -> (Vec<f64>, Vec<f64>) {
        let xs = grid.points();
        (
            xs.iter().map(|&x| self.u0(x)).collect(),
            xs.iter().map(|&x| self.u1(x)).collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_and_refines() {
        let g = Grid1D::covering(1.0, 0.01, 0.005, 1.0).unwrap();
        assert!(g.x_min <= -2.0 && g.x_max >= 2.0);
        assert!((g.dx() - 0.01).abs() < 1e-14);
        assert!(g.x((g.nx - 1) / 2).abs() < 1e-14);
        let f = g.refined();
        assert!((f.dx() - 0.005).abs() < 1e-14);
        assert_eq!(f.x_max, g.x_max);
        f.validate(1.0).unwrap();
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(Grid1D::covering(1.0, 0.01, 0.006, 1.0), Err(Error::Config(_))));
        let g = Grid1D {
            x_min: -1.5,
            x_max: 1.5,
            nx: 301,
            dt: 0.001,
            t_max: 1.0,
        };
        assert!(matches!(g.validate(1.0), Err(Error::Config(_))));
    }

    #[test]
    fn bump_moments() {
        assert!((bump_integral() - 0.443_993_816_168_079_4).abs() < 1e-15);
        let d = BumpData::new(0.7, 1.0, -2.0).unwrap();
        for dx in [0.01, 0.005] {
            let g = Grid1D::covering(0.7, dx, dx / 2.0, 0.0).unwrap();
            let (a, b) = d.sample(&g);
            let s0: f64 = a.iter().sum::<f64>() * dx;
            let s1: f64 = b.iter().sum::<f64>() * dx;
            assert!((s0 - 1.0).abs() < 1e-9, "{s0}");
            assert!((s1 + 2.0).abs() < 2e-9, "{s1}");
        }
    }
}
