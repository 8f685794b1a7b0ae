//! Shrinking light cone of the de Sitter wave operator and the
//! hypergeometric kernel of the source-to-solution map.
//!
//! A source emitted at time `b` influences the solution at time `t` only
//! inside the ball of radius `e^{-b} - e^{-t}`, which never exceeds
//! `e^{-b}`. The kernel is
//!
//! ```text
//! K(b, t, r) = (4 e^{-b-t})^{-M} (E^2 - r^2)^{M - 1/2} F(1/2-M, 1/2-M; 1; zeta)
//! E = e^{-b} + e^{-t},  h = e^{-b} - e^{-t},  zeta = (h^2 - r^2) / (E^2 - r^2)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{gauss_2f1, HypParams};

/// Default absolute tolerance for [`kernel_moment`].
pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;

/// Below this `|M (t - b)|` the closed-form moment uses its Taylor series.
const SMALL_ARGUMENT: f64 = 1e-4;

/// Curved mass `M >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvedMassCtx {
    mass: f64,
}

impl CurvedMassCtx {
    pub fn new(mass: f64) -> Result<Self> {
        HypParams::for_curved_mass(mass)?;
        Ok(Self { mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    fn hyp(&self) -> HypParams {
        HypParams::new(0.5 - self.mass, 0.5 - self.mass, 1.0)
    }
}

/// A point `(b, t, r)` inside the light cone.
///
/// `r` may carry a sign; only `|r| <= e^{-b} - e^{-t}` is required, since
/// the kernel is even in `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConePoint {
    b: f64,
    t: f64,
    r: f64,
}

impl ConePoint {
    pub fn new(b: f64, t: f64, r: f64) -> Result<Self> {
        let h = horizon_radius(b, t)?;
        if !r.is_finite() || r.abs() > h * (1.0 + 4.0 * f64::EPSILON) {
            return Err(Error::domain(format!(
                "r = {r} lies outside the cone of radius {h} (b = {b}, t = {t})"
            )));
        }
        Ok(Self { b, t, r })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }
}

/// Radius `e^{-b} - e^{-t}` of the region influenced at time `t` by a
/// point source emitted at time `b`.
pub fn horizon_radius(b: f64, t: f64) -> Result<f64> {
    if !(b.is_finite() && !t.is_nan()) || b < 0.0 || b > t {
        return Err(Error::domain(format!("cone needs 0 <= b <= t, got b = {b}, t = {t}")));
    }
    // e^{-b} (1 - e^{-(t-b)}) keeps full relative accuracy for t close to b.
    Ok(-(-b).exp() * (-(t - b)).exp_m1())
}

/// Kernel value at a cone point.
pub fn kernel_eval(ctx: &CurvedMassCtx, pt: &ConePoint) -> Result<f64> {
    KernelSlice::new(ctx, pt.b, pt.t)?.at(pt.r)
}

/// The kernel at fixed `(b, t)` as a function of `r`, with the
/// `r`-independent factors precomputed.
#[derive(Debug, Clone, Copy)]
pub struct KernelSlice {
    hyp: HypParams,
    mass: f64,
    horizon: f64,
    e_sum: f64,
    shift: f64,
}

impl KernelSlice {
    pub fn new(ctx: &CurvedMassCtx, b: f64, t: f64) -> Result<Self> {
        let horizon = horizon_radius(b, t)?;
        let mass = ctx.mass;
        Ok(Self {
            hyp: ctx.hyp(),
            mass,
            horizon,
            e_sum: (-b).exp() + (-t).exp(),
            shift: mass * (b + t - 4f64.ln()),
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Kernel at offset `r`; `|r|` is clamped to the horizon.
    pub fn at(&self, r: f64) -> Result<f64> {
        let h = self.horizon;
        let r = r.abs().min(h);
        let outer = (self.e_sum - r) * (self.e_sum + r);
        let zeta = ((h - r) * (h + r) / outer).clamp(0.0, 1.0 - f64::EPSILON);
        let f = gauss_2f1(&self.hyp, zeta)?;
        Ok((self.shift + (self.mass - 0.5) * outer.ln()).exp() * f)
    }
}

/// `int_{-h}^{h} K(b, t, z) dz` by adaptive quadrature, `h = e^{-b} - e^{-t}`.
pub fn kernel_moment(ctx: &CurvedMassCtx, b: f64, t: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let slice = KernelSlice::new(ctx, b, t)?;
    let h = slice.horizon;
    if h == 0.0 {
        return Ok(0.0);
    }
    let mut failure = None;
    let integrand = |r: f64| match slice.at(r) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    // Even integrand: integrate the half interval at half the tolerance.
    let half = integrate(integrand, 0.0, h, &QuadOptions::abs(0.5 * tol));
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * half?.value)
}

/// `sinh(M (t - b)) / M`, continuous at `M = 0` where it equals `t - b`.
pub fn kernel_moment_closed_form(mass: f64, b: f64, t: f64) -> Result<f64> {
    if !(mass >= 0.0) || !mass.is_finite() {
        return Err(Error::domain(format!("curved mass must be >= 0, got {mass}")));
    }
    if !(b <= t) {
        return Err(Error::domain(format!("need b <= t, got b = {b}, t = {t}")));
    }
    Ok(sinh_ratio(mass, t - b))
}

/// `sinh(M s) / M` with the `M -> 0` limit `s`.
pub fn sinh_ratio(mass: f64, s: f64) -> f64 {
    let x = mass * s;
    if x.abs() < SMALL_ARGUMENT {
        let x2 = x * x;
        s * (1.0 + x2 / 6.0 * (1.0 + x2 / 20.0))
    } else {
        x.sinh() / mass
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(m: f64) -> CurvedMassCtx {
        CurvedMassCtx::new(m).unwrap()
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(horizon_radius(0.0, 0.0).unwrap(), 0.0);
        assert!((horizon_radius(0.0, 60.0).unwrap() - 1.0).abs() < 1e-15);
        let h = horizon_radius(0.2, 1.5).unwrap();
        assert!((h - ((-0.2f64).exp() - (-1.5f64).exp())).abs() < 1e-16);
        assert!(horizon_radius(1.0, 0.5).is_err());
        assert!(horizon_radius(-0.1, 0.5).is_err());
    }

    #[test]
    fn cone_point_rejects_outside() {
        assert!(ConePoint::new(0.0, 1.0, 0.7).is_err());
        assert!(ConePoint::new(0.0, 1.0, -0.6).is_ok());
        assert!(ConePoint::new(0.5, 0.2, 0.0).is_err());
    }

    #[test]
    fn half_mass_kernel_is_constant() {
        let c = ctx(0.5);
        for &(b, t) in &[(0.0, 1.0), (0.3, 2.0), (1.0, 4.0)] {
            let h = horizon_radius(b, t).unwrap();
            let expect = (0.5 * (b + t)).exp() / 2.0;
            for k in 0..=10 {
                let pt = ConePoint::new(b, t, h * k as f64 / 10.0).unwrap();
                let v = kernel_eval(&c, &pt).unwrap();
                assert!((v - expect).abs() <= 1e-14 * expect);
            }
        }
    }

    #[test]
    fn boundary_cancellation() {
        for m in [0.0, 0.1, 0.25, 0.9, 1.5, 2.3] {
            for &(b, t) in &[(0.0, 1.0), (0.2, 1.5), (1.0, 5.0)] {
                let h = horizon_radius(b, t).unwrap();
                let v = kernel_eval(&ctx(m), &ConePoint::new(b, t, h).unwrap()).unwrap();
                let expect = (0.5 * (b + t)).exp() / 2.0;
                assert!((v - expect).abs() <= 1e-13 * expect, "M={m}: {v} vs {expect}");
            }
        }
    }

    #[test]
    fn evenness_is_exact() {
        let c = ctx(0.37);
        for r in [0.0, 0.1, 0.25, 0.5] {
            let p = kernel_eval(&c, &ConePoint::new(0.1, 2.0, r).unwrap()).unwrap();
            let n = kernel_eval(&c, &ConePoint::new(0.1, 2.0, -r).unwrap()).unwrap();
            assert_eq!(p, n);
        }
    }

    #[test]
    fn moment_trivial_examples() {
        let v = kernel_moment(&ctx(0.5), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0 * 0.5f64.sinh()).abs() < 1e-11);
        assert_eq!(kernel_moment(&ctx(0.3), 1.0, 1.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(kernel_moment_closed_form(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert!((kernel_moment_closed_form(1e-9, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let v = kernel_moment_closed_form(0.7, 0.0, 3.0).unwrap();
        assert!((v - 2.1f64.sinh() / 0.7).abs() < 1e-14 * v);
        // Both sides of the series switch agree.
        let below = sinh_ratio(0.999_999e-4, 1.0);
        let above = sinh_ratio(1.000_001e-4, 1.0);
        assert!((below - above).abs() < 1e-13);
        assert!(kernel_moment_closed_form(-0.1, 0.0, 1.0).is_err());
        assert!(kernel_moment_closed_form(0.1, 2.0, 1.0).is_err());
    }
}
