//! Gauss hypergeometric function for the light-cone kernel family, and the
//! gamma-function support it needs.
//!
//! The kernel only ever calls `F(1/2 - M, 1/2 - M; 1; z)` with `M >= 0` and
//! `0 <= z < 1`. For `z <= 0.75` the defining power series is summed
//! directly. Above the switch point the `1 - z` connection formula is used.
//! When `c - a - b` is an integer the two halves of the generic connection
//! formula are individually singular, so the logarithmic form is used at
//! the integer and a short polynomial interpolation in `c - a - b` covers
//! the band around it (see [`gauss_2f1`]).

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Direct series below, connection formula above.
pub const SWITCH_ZETA: f64 = 0.75;

/// Term cap for every series in this module.
pub const MAX_TERMS: usize = 10_000;

/// Half-width of the band around an integer `c - a - b` that is handled by
/// interpolation instead of the generic connection formula.
pub const INTEGER_BAND: f64 = 1.0e-3;

/// Node spacing of the interpolation across the integer band.
const BAND_NODE_STEP: f64 = 2.5e-3;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Parameters `(a, b; c)` of `2F1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HypParams {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// The kernel family `a = b = 1/2 - M`, `c = 1`.
    pub fn for_curved_mass(mass: f64) -> Result<Self> {
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::domain(format!(
                "curved mass must be finite and non-negative, got {mass}"
            )));
        }
        let a = 0.5 - mass;
        Ok(Self { a, b: a, c: 1.0 })
    }

    fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.c.is_finite()) {
            return Err(Error::domain(format!("non-finite parameters {self:?}")));
        }
        if is_nonpositive_integer(self.c) {
            return Err(Error::domain(format!("c = {} is a non-positive integer", self.c)));
        }
        Ok(())
    }

    fn terminates(&self) -> bool {
        is_nonpositive_integer(self.a) || is_nonpositive_integer(self.b)
    }
}

/// `F(a, b; c; zeta)` for `0 <= zeta < 1`.
///
/// Relative accuracy is about `1e-13` on the kernel family for all masses
/// and arguments up to `1 - 1e-6`. Away from that family the code works for
/// real parameters with `c - a - b` not within the integer band of a
/// negative integer, but that surface is not what the tests pin down.
pub fn gauss_2f1(params: &HypParams, zeta: f64) -> Result<f64> {
    params.validate()?;
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::domain(format!("2F1 argument must lie in [0, 1), got {zeta}")));
    }
    if zeta <= SWITCH_ZETA || params.terminates() {
        power_series(params.a, params.b, params.c, zeta)
    } else {
        connection(params, 1.0 - zeta)
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x == f64::INFINITY {
        return f64::INFINITY;
    }
    if x < 0.5 {
        // ln Γ(x) = ln Γ(1 + x) - ln x
        ln_gamma_1p(x) - x.ln()
    } else if x <= 1.5 {
        ln_gamma_1p(x - 1.0)
    } else if x <= 2.5 {
        let z = x - 2.0;
        z.ln_1p() + ln_gamma_1p(z)
    } else if x < 13.0 {
        // Walk down into [1.5, 2.5) and keep the product of the factors.
        let mut y = x;
        let mut prod = 1.0;
        while y >= 2.5 {
            y -= 1.0;
            prod *= y;
        }
        let z = y - 2.0;
        z.ln_1p() + ln_gamma_1p(z) + prod.ln()
    } else {
        stirling(x)
    }
}

/// `ln Γ(1 + z)` for `|z| <= 1/2` from the zeta-function series.
fn ln_gamma_1p(z: f64) -> f64 {
    let zm1 = zeta_minus_one_table();
    let mut sum = 0.0;
    let mut zk = z * z;
    for (k, c) in zm1.iter().enumerate().skip(2) {
        let term = c * zk / k as f64;
        let signed = if k % 2 == 0 { term } else { -term };
        sum += signed;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        zk *= z;
    }
    -z.ln_1p() + z * (1.0 - EULER_GAMMA) + sum
}

fn stirling(x: f64) -> f64 {
    const COEFFS: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut corr = 0.0;
    let mut p = inv;
    for c in COEFFS {
        corr += c * p;
        p *= inv2;
    }
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + corr
}

/// `zeta(k) - 1` for `k = 0..=48`; entries 0 and 1 are unused.
fn zeta_minus_one_table() -> &'static [f64; 49] {
    static TABLE: OnceLock<[f64; 49]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; 49];
        for (k, slot) in t.iter_mut().enumerate().skip(2) {
            *slot = zeta_minus_one(k as i32);
        }
        t
    })
}

/// `sum_{n >= 2} n^{-k}` by direct summation plus an Euler-Maclaurin tail.
fn zeta_minus_one(k: i32) -> f64 {
    const N: i32 = 64;
    let kf = k as f64;
    let nf = N as f64;
    let tail = nf.powf(1.0 - kf) / (kf - 1.0) + 0.5 * nf.powi(-k) + kf * nf.powi(-k - 1) / 12.0
        - kf * (kf + 1.0) * (kf + 2.0) * nf.powi(-k - 3) / 720.0
        + kf * (kf + 1.0) * (kf + 2.0) * (kf + 3.0) * (kf + 4.0) * nf.powi(-k - 5) / 30_240.0;
    let mut sum = tail;
    for n in (2..N).rev() {
        sum += (n as f64).powi(-k);
    }
    sum
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// `sin(pi x)` with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    if x == x.round() {
        return 0.0;
    }
    let r = x - 2.0 * (x / 2.0).round(); // r in [-1, 1]
    let r = if r > 0.5 {
        1.0 - r
    } else if r < -0.5 {
        -1.0 - r
    } else {
        r
    };
    (PI * r).sin()
}

/// Signed gamma function on the real line; infinite at the poles.
pub(crate) fn gamma(x: f64) -> f64 {
    if x > 0.0 {
        if x > 171.7 {
            return f64::INFINITY;
        }
        ln_gamma_pos(x).exp()
    } else if is_nonpositive_integer(x) {
        f64::INFINITY
    } else {
        PI / (sin_pi(x) * gamma(1.0 - x))
    }
}

/// `1 / Γ(x)`, zero at the poles.
pub(crate) fn rgamma(x: f64) -> f64 {
    if x > 0.0 {
        (-ln_gamma_pos(x)).exp()
    } else if is_nonpositive_integer(x) {
        0.0
    } else {
        sin_pi(x) * gamma(1.0 - x) / PI
    }
}

/// Digamma function for real non-pole arguments.
pub(crate) fn digamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return f64::NAN;
    }
    if x < 0.5 {
        // ψ(x) = ψ(1 - x) - π cot(π x)
        let s = sin_pi(x);
        let c = sin_pi(x + 0.5);
        return digamma(1.0 - x) - PI * c / s;
    }
    let mut acc = 0.0;
    let mut y = x;
    while y < 12.0 {
        acc -= 1.0 / y;
        y += 1.0;
    }
    let inv2 = 1.0 / (y * y);
    let series = inv2
        * (-1.0 / 12.0
            + inv2
                * (1.0 / 120.0
                    + inv2
                        * (-1.0 / 252.0
                            + inv2 * (1.0 / 240.0 + inv2 * (-1.0 / 132.0 + inv2 * (691.0 / 32_760.0 - inv2 / 12.0))))));
    acc + y.ln() - 0.5 / y + series
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Direct series `sum (a)_k (b)_k / ((c)_k k!) z^k`.
fn power_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut sum = KahanSum::default();
    let mut term = 1.0;
    sum.add(term);
    if z == 0.0 {
        return Ok(1.0);
    }
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let ratio = (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0));
        term *= ratio * z;
        if term == 0.0 {
            // Terminating (polynomial) case.
            return Ok(sum.value());
        }
        sum.add(term);
        let r = (ratio * z).abs();
        let total = sum.value().abs();
        // Stop once the remaining terms are geometrically dominated.
        if r < 1.0 && term.abs() <= 1e-17 * (1.0 - r) * total {
            return Ok(sum.value());
        }
    }
    Err(Error::numeric(
        format!("2F1 series did not converge in {MAX_TERMS} terms (a={a}, b={b}, c={c}, z={z})"),
        sum.value(),
        term.abs(),
    ))
}

/// Connection formula around `z = 1`, with `w = 1 - z` in `(0, 1 - SWITCH_ZETA)`.
fn connection(params: &HypParams, w: f64) -> Result<f64> {
    let HypParams { a, b, c } = *params;
    let s = c - a - b;
    let n = s.round();
    let delta = s - n;
    if delta.abs() >= INTEGER_BAND {
        return connection_generic(a, b, c, w);
    }
    if n < 0.0 {
        return Err(Error::NotImplemented(format!(
            "connection formula for c - a - b near the negative integer {n}"
        )));
    }
    let m = n as usize;
    // Anchor parameters with c - a - b exactly equal to the integer.
    let a0 = a + 0.5 * delta;
    let b0 = b + 0.5 * delta;
    if delta == 0.0 {
        return connection_integer(a0, b0, c, m, w);
    }
    // Degree-4 interpolation in the shift e (c - a - b = m + e), anchored at
    // the exact logarithmic value, with generic-formula values at the
    // outer nodes where its cancellation is mild.
    let h = BAND_NODE_STEP;
    let nodes = [-2.0 * h, -h, 0.0, h, 2.0 * h];
    let mut values = [0.0; 5];
    for (v, &e) in values.iter_mut().zip(&nodes) {
        *v = if e == 0.0 {
            connection_integer(a0, b0, c, m, w)?
        } else {
            connection_generic(a0 - 0.5 * e, b0 - 0.5 * e, c, w)?
        };
    }
    Ok(lagrange(&nodes, &values, delta))
}

fn lagrange(nodes: &[f64], values: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (i, (&xi, &yi)) in nodes.iter().zip(values).enumerate() {
        let mut basis = 1.0;
        for (j, &xj) in nodes.iter().enumerate() {
            if i != j {
                basis *= (x - xj) / (xi - xj);
            }
        }
        acc += basis * yi;
    }
    acc
}

/// Generic connection formula, valid when `c - a - b` is not an integer.
fn connection_generic(a: f64, b: f64, c: f64, w: f64) -> Result<f64> {
    let s = c - a - b;
    let gc = gamma(c);
    let first = gc * gamma(s) * rgamma(c - a) * rgamma(c - b);
    let second = gc * gamma(-s) * rgamma(a) * rgamma(b);
    let mut total = 0.0;
    if first != 0.0 {
        total += first * power_series(a, b, 1.0 - s, w)?;
    }
    if second != 0.0 {
        total += second * w.powf(s) * power_series(c - a, c - b, 1.0 + s, w)?;
    }
    Ok(total)
}

/// Logarithmic connection formula for `c - a - b = m`, `m = 0, 1, 2, ...`.
fn connection_integer(a: f64, b: f64, c: f64, m: usize, w: f64) -> Result<f64> {
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        return power_series(a, b, c, 1.0 - w);
    }
    let mf = m as f64;
    let gc = gamma(c);

    // Finite part: sum_{n<m} (a)_n (b)_n / (n! (1-m)_n) w^n.
    let mut finite = 0.0;
    if m > 0 {
        let pref = gamma(mf) * gc * rgamma(a + mf) * rgamma(b + mf);
        let mut term = 1.0;
        let mut acc = KahanSum::default();
        for n in 0..m {
            let nf = n as f64;
            acc.add(term);
            term *= (a + nf) * (b + nf) / ((nf + 1.0) * (1.0 - mf + nf)) * w;
        }
        finite = pref * acc.value();
    }

    // Logarithmic part.
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    let pref = -sign * w.powi(m as i32) * gc * rgamma(a) * rgamma(b);
    let ln_w = w.ln();
    let mut psi_n1 = -EULER_GAMMA; // ψ(n + 1)
    let mut psi_nm1 = -EULER_GAMMA + (1..=m).map(|j| 1.0 / j as f64).sum::<f64>(); // ψ(n + m + 1)
    let mut psi_a = digamma(a + mf); // ψ(a + n + m)
    let mut psi_b = digamma(b + mf); // ψ(b + n + m)
    let mut coeff = 1.0 / factorial(m); // (a+m)_n (b+m)_n / (n! (n+m)!) w^n
    let mut acc = KahanSum::default();
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let bracket = ln_w - psi_n1 - psi_nm1 + psi_a + psi_b;
        let term = coeff * bracket;
        acc.add(term);
        if n > 2 && term.abs() <= 1e-17 * acc.value().abs() && coeff.abs() <= 1e-17 * acc.value().abs() {
            return Ok(finite + pref * acc.value());
        }
        coeff *= (a + mf + nf) * (b + mf + nf) / ((nf + 1.0) * (nf + mf + 1.0)) * w;
        psi_n1 += 1.0 / (nf + 1.0);
        psi_nm1 += 1.0 / (nf + mf + 1.0);
        psi_a += 1.0 / (a + mf + nf);
        psi_b += 1.0 / (b + mf + nf);
        if coeff == 0.0 {
            return Ok(finite + pref * acc.value());
        }
    }
    Err(Error::numeric(
        "logarithmic connection series did not converge",
        finite + pref * acc.value(),
        coeff.abs(),
    ))
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|j| j as f64).product()
}
