//! The source-to-solution operator `G` of
//! `u_tt - e^{-2t} Δu - M^2 u = f` with zero Cauchy data.
//!
//! In one dimension
//! `G[f](x, t) = int_0^t db int_{|x-y| <= h(b,t)} f(y, b) K(b, t, |x - y|) dy`
//! with `h(b, t) = e^{-b} - e^{-t}` and `K` the cone kernel. In three
//! dimensions the spatial integral becomes `2 int_0^h v(x, r; b) K dr` with
//! `v` the free-wave mean of `f(., b)`.

use std::cell::RefCell;

use crate::cone_kernel::{sinh_ratio, CurvedMassCtx, KernelSlice};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate, integrate_with_breaks, QuadOptions};

/// Default absolute tolerance per evaluation of `G`.
pub const DEFAULT_G_TOL: f64 = 1e-8;

/// A source `f(x, b)` vanishing for `|x| > support_radius()`.
///
/// For radial three-dimensional sources `x` is the radius.
pub trait SourceField: Sync {
    fn value(&self, x: f64, b: f64) -> f64;
    fn support_radius(&self) -> f64;
}

/// Closure-backed source, forced to zero outside its declared support.
pub struct FnSource<F> {
    f: F,
    radius: f64,
}

impl<F: Fn(f64, f64) -> f64 + Sync> FnSource<F> {
    pub fn new(f: F, radius: f64) -> Self {
        Self { f, radius }
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> SourceField for FnSource<F> {
    fn value(&self, x: f64, b: f64) -> f64 {
        if x.abs() > self.radius {
            0.0
        } else {
            (self.f)(x, b)
        }
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Source sampled on a uniform spatial grid at increasing times; cubic
/// Lagrange interpolation in `x`, linear in `b`.
#[derive(Debug, Clone)]
pub struct GridSource {
    x0: f64,
    dx: f64,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    radius: f64,
}

impl GridSource {
    /// `values[k][i]` is the sample at `times[k]`, `x0 + i dx`.
    pub fn new(x0: f64, dx: f64, times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(dx > 0.0) || times.is_empty() || times.len() != values.len() {
            return Err(Error::domain("grid source needs dx > 0 and one sample row per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("grid source times must increase"));
        }
        let nx = values[0].len();
        if nx < 4 || values.iter().any(|row| row.len() != nx) {
            return Err(Error::domain("grid source rows need equal length >= 4"));
        }
        let mut radius: f64 = 0.0;
        for row in &values {
            for (i, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    radius = radius.max((x0 + i as f64 * dx).abs());
                }
            }
        }
        // The cubic stencil spreads a sample over two neighbouring cells.
        let radius = radius + 2.0 * dx;
        Ok(Self {
            x0,
            dx,
            times,
            values,
            radius,
        })
    }

    fn at_row(&self, row: &[f64], x: f64) -> f64 {
        let s = (x - self.x0) / self.dx;
        let n = row.len();
        if s < 0.0 || s > (n - 1) as f64 {
            return 0.0;
        }
        let j = (s.floor() as usize).clamp(1, n - 3);
        let u = s - j as f64;
        let (p0, p1, p2, p3) = (row[j - 1], row[j], row[j + 1], row[j + 2]);
        // Lagrange basis on nodes -1, 0, 1, 2.
        let l0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let l1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let l2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let l3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
    }
}

impl SourceField for GridSource {
    fn value(&self, x: f64, b: f64) -> f64 {
        if x.abs() > self.radius {
            return 0.0;
        }
        let times = &self.times;
        if b <= times[0] {
            return self.at_row(&self.values[0], x);
        }
        let last = times.len() - 1;
        if b >= times[last] {
            return self.at_row(&self.values[last], x);
        }
        let k = times.partition_point(|&tk| tk <= b) - 1;
        let w = (b - times[k]) / (times[k + 1] - times[k]);
        (1.0 - w) * self.at_row(&self.values[k], x) + w * self.at_row(&self.values[k + 1], x)
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }
}

/// Emission times in `(0, t)` at which the cone radius `e^{-b} - e^{-t}`
/// equals one of `distances`; the outer integrand has kinks there.
fn cone_crossings(t: f64, distances: &[f64]) -> Vec<f64> {
    let mut points = vec![0.0];
    let et = (-t).exp();
    for &d in distances {
        if d > 0.0 && d < 1.0 - et {
            let b = -(et + d).ln();
            if b > 0.0 && b < t {
                points.push(b);
            }
        }
    }
    points.push(t);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

fn validate(t: f64, tol: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// `G[f](x, t)` in one space dimension by nested adaptive quadrature.
pub fn apply_g_1d<S: SourceField + ?Sized>(f: &S, x: f64, t: f64, mass: f64, tol: f64) -> Result<f64> {
    validate(t, tol)?;
    let ctx = CurvedMassCtx::new(mass)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let rf = f.support_radius();
    let inner_opts = QuadOptions::abs(0.5 * tol / t.max(1.0));
    let failure = RefCell::new(None);
    let record = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
        f64::NAN
    };
    let inner = |b: f64| -> f64 {
        let slice = match KernelSlice::new(&ctx, b, t) {
            Ok(s) => s,
            Err(e) => return record(e),
        };
        let h = slice.horizon();
        let lo = (x - h).max(-rf);
        let hi = (x + h).min(rf);
        if !(lo < hi) {
            return 0.0;
        }
        let integrand = |y: f64| {
            let v = f.value(y, b);
            if v == 0.0 {
                return 0.0;
            }
            match slice.at(x - y) {
                Ok(k) => v * k,
                Err(e) => record(e),
            }
        };
        let points: Vec<f64> = if lo < x && x < hi {
            vec![lo, x, hi]
        } else {
            vec![lo, hi]
        };
        match integrate_with_breaks(integrand, &points, &inner_opts) {
            Ok(r) => r.value,
            Err(e) => record(e),
        }
    };
    let breaks = cone_crossings(t, &[rf - x, rf + x, x.abs() - rf]);
    let outer = integrate_with_breaks(inner, &breaks, &QuadOptions::abs(0.5 * tol));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outer?.value)
}

/// `G[f]` at radius `rho` for a radial source in three dimensions.
///
/// The free-wave mean of a radial profile is
/// `v(rho, r) = [(rho + r) f(rho + r) + (rho - r) f(|rho - r|)] / (2 rho)`,
/// and `d/dr [r f(r)]` at the origin.
pub fn apply_g_radial_3d<S: SourceField + ?Sized>(f: &S, rho: f64, t: f64, mass: f64, tol: f64) -> Result<f64> {
    validate(t, tol)?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::domain(format!("radius must be finite and >= 0, got {rho}")));
    }
    let ctx = CurvedMassCtx::new(mass)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let rf = f.support_radius();
    let inner_opts = QuadOptions::abs(0.25 * tol / t.max(1.0));
    let failure = RefCell::new(None);
    let record = |e: Error| {
        failure.borrow_mut().get_or_insert(e);
        f64::NAN
    };
    let wave_mean = |r: f64, b: f64| -> f64 {
        if rho == 0.0 {
            let hstep = 1e-4 * (1.0 + r);
            let g = |s: f64| s * f.value(s.abs(), b);
            (8.0 * (g(r + hstep) - g(r - hstep)) - (g(r + 2.0 * hstep) - g(r - 2.0 * hstep))) / (12.0 * hstep)
        } else {
            ((rho + r) * f.value(rho + r, b) + (rho - r) * f.value((rho - r).abs(), b)) / (2.0 * rho)
        }
    };
    let inner = |b: f64| -> f64 {
        let slice = match KernelSlice::new(&ctx, b, t) {
            Ok(s) => s,
            Err(e) => return record(e),
        };
        let h = slice.horizon();
        // Beyond r = rho + rf both sample points lie outside the support.
        let hi = h.min(rho + rf);
        if !(hi > 0.0) || (rho > rf && rho - rf >= h) {
            return 0.0;
        }
        let mut points = vec![0.0];
        for p in [rho, rf - rho, rho - rf] {
            if p > 0.0 && p < hi {
                points.push(p);
            }
        }
        points.push(hi);
        points.sort_by(f64::total_cmp);
        let integrand = |r: f64| {
            let v = wave_mean(r, b);
            if v == 0.0 {
                return 0.0;
            }
            match slice.at(r) {
                Ok(k) => 2.0 * v * k,
                Err(e) => record(e),
            }
        };
        match integrate_with_breaks(integrand, &points, &inner_opts) {
            Ok(r) => r.value,
            Err(e) => record(e),
        }
    };
    let breaks = cone_crossings(t, &[rho, rf - rho, rho - rf, rho + rf]);
    let outer = integrate_with_breaks(inner, &breaks, &QuadOptions::abs(0.5 * tol));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(outer?.value)
}

/// `int_0^t Q(b) sinh(M (t - b)) / M db`, the spatial integral of `G[f]`
/// when `Q(b)` is the spatial integral of `f(., b)`.
pub fn moment_of_g<Q: FnMut(f64) -> f64>(mut q: Q, t: f64, mass: f64, tol: f64) -> Result<f64> {
    validate(t, tol)?;
    CurvedMassCtx::new(mass)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let r = integrate(|b| q(b) * sinh_ratio(mass, t - b), 0.0, t, &QuadOptions::abs(tol))?;
    Ok(r.value)
}

/// Quadrature weights of `G` on a uniform space-time grid
/// `x_i = x0 + i dx`, `t_n = n dt`.
///
/// The source is taken piecewise linear in `x` between grid points and the
/// `b`-integral uses the trapezoid rule on the time levels, so `G` at level
/// `n` only involves source levels `0..n` (the level `b = t_n` has an empty
/// cone). Weights depend on the offset `|i - k|` only and are built lazily.
#[derive(Debug, Clone)]
pub struct ConeConvolution {
    ctx: CurvedMassCtx,
    dx: f64,
    dt: f64,
    /// `weights[n][j][d]`: weight of source sample `(k = i +- d, j)` for target `(i, n)`,
    /// including the trapezoid factor in `b`.
    weights: Vec<Vec<Vec<f64>>>,
    gl_nodes: Vec<f64>,
    gl_weights: Vec<f64>,
}

impl ConeConvolution {
    pub fn new(mass: f64, dx: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0 && dt > 0.0) {
            return Err(Error::domain("grid steps must be positive"));
        }
        let (gl_nodes, gl_weights) = gauss_legendre(4);
        Ok(Self {
            ctx: CurvedMassCtx::new(mass)?,
            dx,
            dt,
            weights: Vec::new(),
            gl_nodes,
            gl_weights,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Make sure weights for target levels `0..=n` exist.
    pub fn prepare(&mut self, n: usize) -> Result<()> {
        while self.weights.len() <= n {
            let level = self.weights.len();
            let row = self.level_weights(level)?;
            self.weights.push(row);
        }
        Ok(())
    }

    fn level_weights(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        let t = n as f64 * self.dt;
        let mut out = Vec::with_capacity(n + 1);
        for j in 0..=n {
            let b = j as f64 * self.dt;
            let trap = if j == 0 || j == n { 0.5 * self.dt } else { self.dt };
            let slice = KernelSlice::new(&self.ctx, b, t)?;
            let h = slice.horizon();
            if h == 0.0 || n == 0 {
                out.push(Vec::new());
                continue;
            }
            let dmax = (h / self.dx).ceil() as usize;
            let mut row = vec![0.0; dmax + 1];
            // Cell [m dx, (m+1) dx] carries the hats of offsets m and m+1.
            for m in 0..dmax {
                let a = m as f64 * self.dx;
                let e = ((m + 1) as f64 * self.dx).min(h);
                if !(e > a) {
                    continue;
                }
                let c = 0.5 * (a + e);
                let half = 0.5 * (e - a);
                let (mut w_lo, mut w_hi) = (0.0, 0.0);
                for (&z, &w) in self.gl_nodes.iter().zip(&self.gl_weights) {
                    let s = c + half * z;
                    let k = slice.at(s)? * w * half;
                    let frac = s / self.dx - m as f64;
                    w_lo += k * (1.0 - frac);
                    w_hi += k * frac;
                }
                row[m] += w_lo;
                row[m + 1] += w_hi;
            }
            // Offsets d and -d both see the half line; d = 0 gets both halves.
            row[0] *= 2.0;
            for w in row.iter_mut() {
                *w *= trap;
            }
            out.push(row);
        }
        Ok(out)
    }

    /// Accumulate the contribution of source levels `js` to target level `n`
    /// into `out`; `source(j)` returns the spatial samples at level `j`.
    pub fn accumulate<'a, F>(&self, n: usize, js: std::ops::Range<usize>, source: F, out: &mut [f64])
    where
        F: Fn(usize) -> &'a [f64],
    {
        let nx = out.len();
        let rows = &self.weights[n];
        for j in js {
            let w = &rows[j];
            if w.is_empty() {
                continue;
            }
            let src = source(j);
            debug_assert_eq!(src.len(), nx);
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = w[0] * src[i];
                for (d, wd) in w.iter().enumerate().skip(1) {
                    let left = if i >= d { src[i - d] } else { 0.0 };
                    let right = if i + d < nx { src[i + d] } else { 0.0 };
                    acc += wd * (left + right);
                }
                *o += acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_gives_zero() {
        let f = FnSource::new(|x: f64, _b| 1.0 - x * x, 1.0);
        assert_eq!(apply_g_1d(&f, 0.3, 0.0, 0.4, 1e-8).unwrap(), 0.0);
        assert_eq!(apply_g_radial_3d(&f, 0.3, 0.0, 0.4, 1e-8).unwrap(), 0.0);
        assert!(apply_g_1d(&f, 0.3, -1.0, 0.4, 1e-8).is_err());
        assert!(apply_g_radial_3d(&f, -0.3, 1.0, 0.4, 1e-8).is_err());
    }

    #[test]
    fn half_mass_constant_source() {
        // K = e^{(b+t)/2} / 2 and the cone has width 2h, so
        // G[1](x, t) = int_0^t e^{(b+t)/2} (e^{-b} - e^{-t}) db = 4 (cosh(t/2) - 1).
        let f = FnSource::new(|_x, _b| 1.0, 50.0);
        for t in [0.5, 1.0, 2.5] {
            let v = apply_g_1d(&f, 0.2, t, 0.5, 1e-10).unwrap();
            let expect = 4.0 * ((0.5 * t).cosh() - 1.0);
            assert!((v - expect).abs() < 1e-9, "t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moment_of_g(|_| 0.0, 2.0, 0.3, 1e-10).unwrap(), 0.0);
        let v = moment_of_g(|_| 1.0, 2.0, 0.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let v = moment_of_g(|_| 1.0, 1.5, 1.0, 1e-12).unwrap();
        assert!((v - (1.5f64.cosh() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn grid_source_reproduces_cubics() {
        let nx = 41;
        let dx = 0.05;
        let row = |s: f64| {
            (0..nx)
                .map(|i| {
                    let x = -1.0 + i as f64 * dx;
                    s * (x * x * x - 0.5 * x + 0.2)
                })
                .collect::<Vec<_>>()
        };
        let src = GridSource::new(-1.0, dx, vec![0.0, 1.0], vec![row(1.0), row(3.0)]).unwrap();
        for &x in &[-0.93, -0.2, 0.0, 0.41, 0.97] {
            let exact = x * x * x - 0.5 * x + 0.2;
            assert!((src.value(x, 0.0) - exact).abs() < 1e-13);
            assert!((src.value(x, 0.5) - 2.0 * exact).abs() < 1e-13);
        }
        assert_eq!(src.value(1.5, 0.0), 0.0);
    }

    #[test]
    fn convolution_matches_quadrature_for_constant_source() {
        // With f = 1 over a wide grid the convolution reproduces the moment
        // identity sum of weights = int_0^t sinh(M(t-b))/M db up to O(dt^2).
        let mass = 0.3;
        let (dx, dt) = (0.02, 0.01);
        let mut conv = ConeConvolution::new(mass, dx, dt).unwrap();
        let n = 100;
        conv.prepare(n).unwrap();
        let nx = 301;
        let ones = vec![1.0; nx];
        let mut out = vec![0.0; nx];
        conv.accumulate(n, 0..n + 1, |_| &ones, &mut out);
        let t = n as f64 * dt;
        let exact = ((mass * t).cosh() - 1.0) / (mass * mass);
        assert!((out[nx / 2] - exact).abs() < 1e-4 * exact, "{} vs {exact}", out[nx / 2]);
    }
}
