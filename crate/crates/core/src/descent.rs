//! Spherical means, dimensional descent and the free-wave mean.
//!
//! The odd-dimensional descent operator is
//! `d/dr (r^{-1} d/dr)^{(n-3)/2} [ r^{n-2} g(r) / (omega_{n-1} c0) ]` with
//! `g` the unnormalized sphere integral of the field. The even-dimensional
//! one replaces the sphere by the unit ball with weight `(1 - |y|^2)^{-1/2}`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::cone_kernel::{horizon_radius, kernel_eval, kernel_moment, sinh_ratio, ConePoint, CurvedMassCtx};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, integrate, QuadOptions};
use crate::special::{gamma, log_gamma};

/// Latitude nodes of the sphere rule for `n = 3`.
pub const SPHERE_LATITUDES: usize = 32;
/// Longitude nodes of the sphere rule for `n = 3`, and of the circle rules.
pub const SPHERE_LONGITUDES: usize = 64;

/// Geometric constants of `R^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub n: usize,
    /// Area of the unit sphere `S^{n-1}`.
    pub omega: f64,
    /// `1*3*...*(n-2)` for odd `n`, `1*3*...*(n-1)` for even `n`.
    pub c0: f64,
    /// Volume of the unit ball.
    pub tau: f64,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        let half = n as f64 / 2.0;
        let omega = 2.0 * PI.powf(half) / gamma(half);
        let top = if n % 2 == 1 { n.saturating_sub(2) } else { n - 1 };
        let c0 = (1..=top).step_by(2).map(|k| k as f64).product();
        Ok(Self {
            n,
            omega,
            c0,
            tau: omega / n as f64,
        })
    }

    fn ensure(&self, allowed: &[usize], what: &str) -> Result<()> {
        if allowed.contains(&self.n) {
            Ok(())
        } else {
            Err(Error::NotImplemented(format!(
                "{what} is available for n in {allowed:?}, got n = {}",
                self.n
            )))
        }
    }
}

type Callable = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial function `g(r)`, `r >= 0`.
#[derive(Clone)]
pub enum RadialProfile {
    /// `sum c_k r^{e_k}`, differentiated exactly.
    Laurent(Vec<(i32, f64)>),
    /// Black-box profile with the number of derivatives it supports.
    /// Differentiated by 4th-order central differences; evaluated at `|r|`.
    Callable { f: Callable, smoothness: usize },
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialProfile::Laurent(terms) => fmt.debug_tuple("Laurent").field(terms).finish(),
            RadialProfile::Callable { smoothness, .. } => fmt
                .debug_struct("Callable")
                .field("smoothness", smoothness)
                .finish_non_exhaustive(),
        }
    }
}

impl RadialProfile {
    pub fn constant(c: f64) -> Self {
        RadialProfile::Laurent(vec![(0, c)])
    }

    pub fn callable(f: impl Fn(f64) -> f64 + Send + Sync + 'static, smoothness: usize) -> Self {
        RadialProfile::Callable {
            f: Arc::new(f),
            smoothness,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Laurent(terms) => terms.iter().map(|&(e, c)| c * r.powi(e)).sum(),
            RadialProfile::Callable { f, .. } => f(r.abs()),
        }
    }

    /// `d/dr (r^{-1} d/dr)^k [ r^p g(r) ]` at `r`.
    fn descend(&self, p: i32, k: usize, r: f64) -> Result<f64> {
        match self {
            RadialProfile::Laurent(terms) => {
                let mut out = 0.0;
                for &(e, c) in terms {
                    let (mut e, mut c) = (e + p, c);
                    for _ in 0..k {
                        c *= e as f64;
                        e -= 2;
                    }
                    c *= e as f64;
                    e -= 1;
                    if c != 0.0 {
                        out += c * r.powi(e);
                    }
                }
                Ok(out)
            }
            RadialProfile::Callable { f, smoothness } => {
                if *smoothness < k + 1 {
                    return Err(Error::domain(format!(
                        "descent needs {} derivatives, profile declares {smoothness}",
                        k + 1
                    )));
                }
                let base = |s: f64| s.powi(p) * f(s.abs());
                Ok(nested_descent(&base, k, r))
            }
        }
    }
}

/// Fourth-order central difference with step `1e-4 (1 + |r|)`.
fn central_diff(f: &dyn Fn(f64) -> f64, r: f64) -> f64 {
    let h = 1e-4 * (1.0 + r.abs());
    (8.0 * (f(r + h) - f(r - h)) - (f(r + 2.0 * h) - f(r - 2.0 * h))) / (12.0 * h)
}

fn nested_descent(phi: &dyn Fn(f64) -> f64, k: usize, r: f64) -> f64 {
    if k == 0 {
        central_diff(phi, r)
    } else {
        let reduced = |s: f64| central_diff(phi, s) / s;
        nested_descent(&reduced, k - 1, r)
    }
}

fn point_on_sphere(x: &[f64], r: f64, dir: &[f64], out: &mut [f64]) {
    for ((o, xi), di) in out.iter_mut().zip(x).zip(dir) {
        *o = xi + r * di;
    }
}

fn sphere_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(SPHERE_LATITUDES))
}

/// Unnormalized sphere integral `int_{S^{n-1}} f(x + r y) dS_y`.
///
/// `n = 1` sums the two points, `n = 2` uses the periodic trapezoid rule and
/// `n = 3` a Gauss-Legendre (in `cos theta`) times trapezoid product rule.
pub fn spherical_mean<F>(f: F, x: &[f64], r: f64, dims: &DimensionConstants) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    dims.ensure(&[1, 2, 3], "spherical_mean")?;
    if x.len() != dims.n {
        return Err(Error::domain(format!(
            "point has {} coordinates, dimension is {}",
            x.len(),
            dims.n
        )));
    }
    if !r.is_finite() {
        return Err(Error::domain(format!("radius must be finite, got {r}")));
    }
    let mut y = vec![0.0; dims.n];
    let value = match dims.n {
        1 => f(&[x[0] + r]) + f(&[x[0] - r]),
        2 => {
            let mut acc = 0.0;
            for j in 0..SPHERE_LONGITUDES {
                let phi = 2.0 * PI * j as f64 / SPHERE_LONGITUDES as f64;
                point_on_sphere(x, r, &[phi.cos(), phi.sin()], &mut y);
                acc += f(&y);
            }
            acc * 2.0 * PI / SPHERE_LONGITUDES as f64
        }
        _ => {
            let (nodes, weights) = sphere_rule();
            let mut acc = 0.0;
            for (&ct, &w) in nodes.iter().zip(weights) {
                let st = (1.0 - ct * ct).sqrt();
                let mut ring = 0.0;
                for j in 0..SPHERE_LONGITUDES {
                    let phi = 2.0 * PI * j as f64 / SPHERE_LONGITUDES as f64;
                    point_on_sphere(x, r, &[st * phi.cos(), st * phi.sin(), ct], &mut y);
                    ring += f(&y);
                }
                acc += w * ring;
            }
            acc * 2.0 * PI / SPHERE_LONGITUDES as f64
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numeric(
            "sphere quadrature produced a non-finite value",
            value,
            f64::INFINITY,
        ))
    }
}

/// Weighted ball integral `int_{B_1} f(x + r y) (1 - |y|^2)^{-1/2} dV_y` for
/// `n = 2`, with `|y| = sin theta` removing the edge singularity.
pub fn ball_weighted_integral<F>(f: F, x: &[f64], r: f64, dims: &DimensionConstants) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    dims.ensure(&[2], "ball_weighted_integral")?;
    if x.len() != 2 {
        return Err(Error::domain("ball integral needs a point in R^2"));
    }
    let (nodes, weights) = sphere_rule();
    let half_pi = 0.5 * PI;
    let mut acc = 0.0;
    for (&s, &w) in nodes.iter().zip(weights) {
        let theta = half_pi * 0.5 * (s + 1.0);
        let rho = theta.sin();
        // dV = rho d(rho) dphi and d(rho) / sqrt(1 - rho^2) = d(theta).
        let shifted = |y: &[f64]| f(&[x[0] + r * rho * y[0], x[1] + r * rho * y[1]]);
        let ring = spherical_mean(shifted, &[0.0, 0.0], 1.0, dims)?;
        acc += w * rho * ring;
    }
    Ok(acc * 0.5 * half_pi)
}

/// Odd-dimensional descent `d/dr (r^{-1} d/dr)^{(n-3)/2} [r^{n-2} g / (omega c0)]`.
pub fn odd_descent(g: &RadialProfile, r: f64, dims: &DimensionConstants) -> Result<f64> {
    if dims.n < 3 || dims.n.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "odd descent needs odd n >= 3, got n = {}",
            dims.n
        )));
    }
    let k = (dims.n - 3) / 2;
    Ok(g.descend(dims.n as i32 - 2, k, r)? / (dims.omega * dims.c0))
}

/// Normalization of the even-dimensional descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvenNormalization {
    /// `2 r^{n-1} / (omega_{n-1} c0)` with `c0 = 1*3*...*(n-1)`.
    AsPrinted,
    /// `r^{n-1} / (omega_{n-1} (n-2)!!)`, the Euclidean method-of-descent
    /// constant; for `f = 1` it turns the weighted ball integral into 1.
    Euclidean,
}

impl EvenNormalization {
    fn factor(self, dims: &DimensionConstants) -> f64 {
        match self {
            EvenNormalization::AsPrinted => 2.0 / (dims.omega * dims.c0),
            EvenNormalization::Euclidean => {
                let double_fact: f64 = (2..=dims.n.saturating_sub(2)).step_by(2).map(|k| k as f64).product();
                1.0 / (dims.omega * double_fact)
            }
        }
    }
}

/// Even-dimensional descent `d/dr (r^{-1} d/dr)^{(n-2)/2} [C r^{n-1} h(r)]`
/// where `h` is the weighted ball integral and `C` the chosen normalization.
pub fn even_descent(h: &RadialProfile, r: f64, dims: &DimensionConstants, norm: EvenNormalization) -> Result<f64> {
    if dims.n < 2 || dims.n % 2 == 1 {
        return Err(Error::Precondition(format!(
            "even descent needs even n >= 2, got n = {}",
            dims.n
        )));
    }
    let k = (dims.n - 2) / 2;
    Ok(norm.factor(dims) * h.descend(dims.n as i32 - 1, k, r)?)
}

/// Solution at time `r` of the free wave equation with data `(f, 0)`,
/// evaluated at `x`. Supported for `n = 1` (d'Alembert) and `n = 3`
/// (Kirchhoff, through the spherical mean).
pub fn wave_mean<F>(f: F, x: &[f64], r: f64, dims: &DimensionConstants) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    dims.ensure(&[1, 3], "wave_mean")?;
    if x.len() != dims.n {
        return Err(Error::domain("point dimension mismatch"));
    }
    match dims.n {
        1 => Ok(0.5 * (f(&[x[0] + r]) + f(&[x[0] - r]))),
        _ => {
            let failure = RefCell::new(None);
            let scaled = |s: f64| match spherical_mean(&f, x, s.abs(), dims) {
                Ok(v) => s * v / dims.omega,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            };
            let v = central_diff(&scaled, r);
            match failure.into_inner() {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
    }
}

/// Which integral representation of `sinh(M (t - b)) / M` to verify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityCase {
    I,
    Ii,
    Iii,
    CorollaryI,
    CorollaryIi,
    CorollaryIii,
}

impl IdentityCase {
    pub const ALL: [IdentityCase; 6] = [
        IdentityCase::I,
        IdentityCase::Ii,
        IdentityCase::Iii,
        IdentityCase::CorollaryI,
        IdentityCase::CorollaryIi,
        IdentityCase::CorollaryIii,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IdentityCase::I => "i",
            IdentityCase::Ii => "ii",
            IdentityCase::Iii => "iii",
            IdentityCase::CorollaryI => "corollary_i",
            IdentityCase::CorollaryIi => "corollary_ii",
            IdentityCase::CorollaryIii => "corollary_iii",
        }
    }

    pub fn is_corollary(self) -> bool {
        matches!(
            self,
            IdentityCase::CorollaryI | IdentityCase::CorollaryIi | IdentityCase::CorollaryIii
        )
    }

    /// Dimension parity the case requires, if any.
    pub fn parity(self) -> Option<Parity> {
        match self {
            IdentityCase::I | IdentityCase::CorollaryI => None,
            IdentityCase::Ii | IdentityCase::CorollaryIi => Some(Parity::Odd),
            IdentityCase::Iii | IdentityCase::CorollaryIii => Some(Parity::Even),
        }
    }
}

impl fmt::Display for IdentityCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IdentityCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IdentityCase::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown identity case '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

/// Result of one identity verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub case: IdentityCase,
    pub n: usize,
    pub mass: f64,
    pub b: f64,
    pub t: f64,
    pub numeric: f64,
    pub exact: f64,
    pub residual: f64,
}

/// `|numeric left side - sinh(M (t - b)) / M|` for `f = 1`, using the
/// Euclidean even-dimensional normalization.
pub fn identity_check(
    case: IdentityCase,
    mass: f64,
    b: f64,
    t: f64,
    dims: &DimensionConstants,
    tol: f64,
) -> Result<f64> {
    identity_check_normalized(case, mass, b, t, dims, tol, EvenNormalization::Euclidean).map(|r| r.residual)
}

/// [`identity_check`] with an explicit even-dimensional normalization and
/// the full report.
pub fn identity_check_normalized(
    case: IdentityCase,
    mass: f64,
    b: f64,
    t: f64,
    dims: &DimensionConstants,
    tol: f64,
    norm: EvenNormalization,
) -> Result<IdentityReport> {
    if case.is_corollary() && mass != 0.0 {
        return Err(Error::Precondition(format!(
            "corollary case {case} is the massless limit, got M = {mass}"
        )));
    }
    match case.parity() {
        Some(Parity::Odd) if dims.n.is_multiple_of(2) || dims.n < 3 => {
            return Err(Error::Precondition(format!(
                "case {case} needs odd n >= 3, got n = {}",
                dims.n
            )))
        }
        Some(Parity::Even) if dims.n % 2 == 1 => {
            return Err(Error::Precondition(format!(
                "case {case} needs even n, got n = {}",
                dims.n
            )))
        }
        _ => {}
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let ctx = CurvedMassCtx::new(mass)?;
    let h = horizon_radius(b, t)?;
    let exact = sinh_ratio(mass, t - b);
    let quad_tol = 0.1 * tol;
    let numeric = match case.parity() {
        None => kernel_moment(&ctx, b, t, quad_tol)?,
        Some(parity) => {
            let profile = unit_field_profile(dims, parity)?;
            let mut failure = None;
            let integrand = |r1: f64| {
                let descent = match parity {
                    Parity::Odd => odd_descent(&profile, r1, dims),
                    Parity::Even => even_descent(&profile, r1, dims, norm),
                };
                let kernel = ConePoint::new(b, t, r1).and_then(|pt| kernel_eval(&ctx, &pt));
                match descent.and_then(|d| kernel.map(|k| 2.0 * d * k)) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NAN
                    }
                }
            };
            let res = integrate(integrand, 0.0, h, &QuadOptions::abs(quad_tol));
            if let Some(e) = failure {
                return Err(e);
            }
            res?.value
        }
    };
    Ok(IdentityReport {
        case,
        n: dims.n,
        mass,
        b,
        t,
        numeric,
        exact,
        residual: (numeric - exact).abs(),
    })
}

/// Sphere (odd `n`) or weighted ball (even `n`) integral of `f = 1` as a
/// radial profile. Computed by quadrature where that is implemented and
/// from the closed form otherwise.
fn unit_field_profile(dims: &DimensionConstants, parity: Parity) -> Result<RadialProfile> {
    let d = *dims;
    let one = |_: &[f64]| 1.0;
    match (parity, d.n) {
        (Parity::Odd, 3) => Ok(RadialProfile::callable(
            move |r| {
                let origin = [0.0; 3];
                spherical_mean(one, &origin, r, &d).unwrap_or(f64::NAN)
            },
            usize::MAX,
        )),
        (Parity::Odd, _) => Ok(RadialProfile::constant(d.omega)),
        (Parity::Even, 2) => Ok(RadialProfile::callable(
            move |r| ball_weighted_integral(one, &[0.0, 0.0], r, &d).unwrap_or(f64::NAN),
            usize::MAX,
        )),
        (Parity::Even, n) => {
            // omega * int_0^1 rho^{n-1} (1 - rho^2)^{-1/2} d rho
            let nf = n as f64;
            let beta = 0.5 * (log_gamma(0.5 * nf)? + log_gamma(0.5)? - log_gamma(0.5 * nf + 0.5)?).exp();
            Ok(RadialProfile::constant(d.omega * beta))
        }
    }
}
