use serde::{Deserialize, Serialize};

use crate::blowup_ode::ComparisonParams;
use crate::blowup_ode::GammaSchedule;
use crate::descent::DimensionConstants;
use crate::error::{Error, Result};

/// Physical constants of `u_tt - e^{-2t} Δu - M^2 u = Γ(t) (∫|u|^p)^β |u|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct PhysicalParams {
    n: usize,
    m: f64,
    mass: f64,
    p: f64,
    beta: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawParams {
    n: usize,
    m: f64,
    p: f64,
    #[serde(default)]
    beta: f64,
}

impl TryFrom<RawParams> for PhysicalParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        PhysicalParams::new(r.n, r.m, r.p, r.beta)
    }
}

impl From<PhysicalParams> for RawParams {
    fn from(p: PhysicalParams) -> Self {
        RawParams {
            n: p.n,
            m: p.m,
            p: p.p,
            beta: p.beta,
        }
    }
}

impl PhysicalParams {
    /// Parameters from the physical mass `m`, `0 <= m <= n/2`.
    pub fn new(n: usize, m: f64, p: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        let half = n as f64 / 2.0;
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::domain(format!("mass must be >= 0, got {m}")));
        }
        if m > half {
            return Err(Error::NotImplemented(format!(
                "m = {m} > n/2 gives an imaginary curved mass"
            )));
        }
        let mass = ((half - m) * (half + m)).sqrt();
        Self::checked(n, m, mass, p, beta)
    }

    /// Parameters from the curved mass `M`, `0 <= M <= n/2`.
    pub fn from_curved_mass(n: usize, mass: f64, p: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        let half = n as f64 / 2.0;
        if !(mass >= 0.0) || mass > half {
            return Err(Error::domain(format!(
                "curved mass must lie in [0, {half}], got {mass}"
            )));
        }
        let m = ((half - mass) * (half + mass)).sqrt();
        Self::checked(n, m, mass, p, beta)
    }

    fn checked(n: usize, m: f64, mass: f64, p: f64, beta: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::domain(format!("exponent p must exceed 1, got {p}")));
        }
        if !beta.is_finite() || !(p * (beta + 1.0) > 1.0) {
            return Err(Error::Precondition(format!(
                "p(β+1) = {} must exceed 1, i.e. β > 1/p - 1",
                p * (beta + 1.0)
            )));
        }
        Ok(Self { n, m, mass, p, beta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// Curved mass `M = sqrt(n^2/4 - m^2)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `q = p (β + 1)`.
    pub fn q_eff(&self) -> f64 {
        self.p * (self.beta + 1.0)
    }

    /// `δ0 = τ_n^{-(β+1)} R^{-n(p-1)(β+1)}`, the constant turning Hölder's
    /// inequality `|F|^p <= τ_n R^{n(p-1)} ∫|u|^p` into `F'' >= δ0 Γ F^q`.
    pub fn delta0(&self, support_radius: f64) -> Result<f64> {
        if !(support_radius > 0.0) {
            return Err(Error::domain(format!(
                "support radius must be positive, got {support_radius}"
            )));
        }
        let tau = DimensionConstants::new(self.n)?.tau;
        let e = self.beta + 1.0;
        Ok(tau.powf(-e) * support_radius.powf(-(self.n as f64) * (self.p - 1.0) * e))
    }

    pub fn comparison(&self, gamma: GammaSchedule, support_radius: f64) -> Result<ComparisonParams> {
        Ok(ComparisonParams {
            mass: self.mass,
            q_eff: self.q_eff(),
            delta0: self.delta0(support_radius)?,
            gamma,
        })
    }
}

/// `u = e^{n t/2} φ`.
pub fn transform_phi_to_u(phi: &[f64], t: f64, params: &PhysicalParams) -> Vec<f64> {
    let s = (0.5 * params.n as f64 * t).exp();
    phi.iter().map(|v| v * s).collect()
}

/// `φ = e^{-n t/2} u`.
pub fn transform_u_to_phi(u: &[f64], t: f64, params: &PhysicalParams) -> Vec<f64> {
    let s = (-0.5 * params.n as f64 * t).exp();
    u.iter().map(|v| v * s).collect()
}
