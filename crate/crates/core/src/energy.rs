//! Polynomial bulk free energy F, its derivative f, and related quantities.
//!
//! f(s) = a3 s^3 + a2 s^2 + a1 s + a0 and F(s) = int_0^s f + F(0). When the
//! energy is built from well locations (alpha1, alpha2) it represents the
//! double well F(s) = (s - alpha1)^2 (s - alpha2)^2 exactly, which fixes
//! F(0) = alpha1^2 alpha2^2 and a nonzero constant term a0. The plain
//! coefficient form keeps F(0) = 0.

use crate::domain::Domain;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_DELTA_REG: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BulkFreeEnergy {
    /// Coefficients [a0, a1, a2, a3] of f.
    pub coeffs: [f64; 4],
    /// Well locations when constructed as a double well.
    pub wells: Option<(f64, f64)>,
    /// Integration constant F(0).
    pub f_offset: f64,
    /// Floor for |f'(s) s| in the ratio r(s) = f(s)/(f'(s) s).
    pub delta_reg: f64,
}

/// Value of r(s) together with a flag reporting whether the denominator
/// clamp fired (spinodal values reached transiently are expected).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioEval {
    pub value: f64,
    pub clamped: bool,
}

impl BulkFreeEnergy {
    pub fn from_coeffs(a0: f64, a1: f64, a2: f64, a3: f64) -> Self {
        BulkFreeEnergy {
            coeffs: [a0, a1, a2, a3],
            wells: None,
            f_offset: 0.0,
            delta_reg: DEFAULT_DELTA_REG,
        }
    }

    /// The standard well F(s) = (1/4)(s^2 - 1)^2, i.e. f(s) = s^3 - s.
    pub fn standard_well() -> Self {
        Self::from_coeffs(0.0, -1.0, 0.0, 1.0)
    }

    /// Double well F(s) = (s - alpha1)^2 (s - alpha2)^2. Requires
    /// alpha1 < alpha2; signs are not restricted here (the Assumption-F
    /// admissibility check is separate and stricter).
    pub fn from_wells(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 < alpha2) {
            return Err(Error::Parameter(format!(
                "double well requires alpha1 < alpha2, got ({alpha1}, {alpha2})"
            )));
        }
        let p = alpha1 + alpha2;
        let q = alpha1 * alpha2;
        // f = F' = 2 (s - a1)(s - a2)(2s - a1 - a2) expanded.
        Ok(BulkFreeEnergy {
            coeffs: [-2.0 * p * q, 2.0 * (p * p + 2.0 * q), -6.0 * p, 4.0],
            wells: Some((alpha1, alpha2)),
            f_offset: q * q,
            delta_reg: DEFAULT_DELTA_REG,
        })
    }

    pub fn with_delta_reg(mut self, delta_reg: f64) -> Self {
        self.delta_reg = delta_reg;
        self
    }

    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coeffs;
        ((a3 * s + a2) * s + a1) * s + a0
    }

    #[inline]
    pub fn f_prime(&self, s: f64) -> f64 {
        let [_, a1, a2, a3] = self.coeffs;
        (3.0 * a3 * s + 2.0 * a2) * s + a1
    }

    #[inline]
    pub fn f_second(&self, s: f64) -> f64 {
        let [_, _, a2, a3] = self.coeffs;
        6.0 * a3 * s + 2.0 * a2
    }

    /// F(s) = int_0^s f + F(0).
    #[inline]
    pub fn big_f(&self, s: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coeffs;
        (((a3 / 4.0 * s + a2 / 3.0) * s + a1 / 2.0) * s + a0) * s + self.f_offset
    }

    /// f(s)/s in quotient form a3 s^2 + a2 s + a1 + a0/s; the a0 term sees a
    /// sign-preserving clamp |s| >= delta_reg so the upscaled right-hand side
    /// stays finite through phi = 0.
    #[inline]
    pub fn f_over_s(&self, s: f64) -> f64 {
        let [a0, a1, a2, a3] = self.coeffs;
        let mut v = (a3 * s + a2) * s + a1;
        if a0 != 0.0 {
            v += a0 / clamp_away_from_zero(s, self.delta_reg);
        }
        v
    }

    /// r(s) = f(s) / (f'(s) s), with the denominator magnitude clamped below
    /// by `delta_reg` (sign preserved).
    pub fn ratio(&self, s: f64) -> RatioEval {
        let denom = self.f_prime(s) * s;
        let clamped = denom.abs() < self.delta_reg;
        let value = self.f(s) / clamp_away_from_zero(denom, self.delta_reg);
        RatioEval { value, clamped }
    }

    /// r(s) without the diagnostic flag, for hot loops.
    #[inline]
    pub fn ratio_value(&self, s: f64) -> f64 {
        self.f(s) / clamp_away_from_zero(self.f_prime(s) * s, self.delta_reg)
    }
}

#[inline]
fn clamp_away_from_zero(v: f64, floor: f64) -> f64 {
    if v.abs() >= floor {
        v
    } else if v < 0.0 {
        -floor
    } else {
        floor
    }
}

/// Admissibility inequality for the double well F = (s-a1)^2 (s-a2)^2 with
/// alpha2 > alpha1 > 0, evaluated exactly as printed:
/// 25 (a1+a2)^2 - 20 (a1^2 + a2^2 + 3 a1 a2) > (a1+a2)^2 / 4.
pub fn check_assumption_f(alpha1: f64, alpha2: f64) -> Result<bool> {
    if !(alpha1 > 0.0) {
        return Err(Error::Parameter(format!(
            "assumption F requires alpha1 > 0, got {alpha1}"
        )));
    }
    if !(alpha2 > alpha1) {
        return Err(Error::Parameter(format!(
            "assumption F requires alpha2 > alpha1, got ({alpha1}, {alpha2})"
        )));
    }
    let p = alpha1 + alpha2;
    let lhs = 25.0 * p * p - 20.0 * (alpha1 * alpha1 + alpha2 * alpha2 + 3.0 * alpha1 * alpha2);
    let rhs = p * p / 4.0;
    Ok(lhs > rhs)
}

/// Chemical potential mu = f(phi) - lambda^2 lap_h(phi) on a domain grid,
/// using the domain's declared boundary conditions for the Laplacian.
pub fn chemical_potential(
    energy: &BulkFreeEnergy,
    phi: &[f64],
    lambda: f64,
    domain: &Domain,
) -> Result<Vec<f64>> {
    if lambda < 0.0 {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let lap = domain.laplacian(phi);
    let mut mu = vec![0.0; phi.len()];
    for i in domain.pore_cells() {
        mu[i] = energy.f(phi[i]) - lambda * lambda * lap[i];
    }
    Ok(mu)
}
