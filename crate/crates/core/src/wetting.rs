//! Wetting boundary data and its upscaling: Robin coefficients, the
//! channel-averaged wall datum g0, the porous upscaled source g0t, random
//! wall-fraction fields, and the effective equilibrium contact angle.

use crate::cell::ReferenceCell;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WettingSpec {
    /// gamma = 2 sqrt(2) phi_e / (3 sigma_lg); supplied directly
    pub gamma: f64,
    /// Cahn number C_h = lambda / L
    pub cahn: f64,
    /// equilibrium well value (recorded alongside gamma)
    #[serde(default = "default_phi_e")]
    pub phi_e: f64,
    /// wetting coefficients a_1..a_N per wall class
    pub a: Vec<f64>,
}

fn default_phi_e() -> f64 {
    1.0
}

impl WettingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cahn > 0.0) {
            return Err(Error::Parameter(format!(
                "Cahn number must be > 0, got {}",
                self.cahn
            )));
        }
        if self.a.is_empty() {
            return Err(Error::Parameter("at least one wetting class is required".into()));
        }
        Ok(())
    }

    /// Robin datum g = -(gamma/C_h) a_i for wall class i (1-based).
    pub fn robin_g(&self, class: usize) -> Result<f64> {
        self.validate()?;
        if class == 0 || class > self.a.len() {
            return Err(Error::Parameter(format!(
                "wall class {class} out of range 1..={}",
                self.a.len()
            )));
        }
        Ok(-self.gamma / self.cahn * self.a[class - 1])
    }
}

/// Wall-class measures |dY_w^i| of the channel reference cell (the walls of
/// one periodic slice, partitioned by wetting property).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelWallPattern {
    pub class_measures: Vec<f64>,
}

/// g0 = -(gamma/C_h) (1/|Y|) sum_i a_i |dY_w^i|  with |Y| = 1.
pub fn upscaled_g0_channel(pattern: &ChannelWallPattern, spec: &WettingSpec) -> Result<f64> {
    spec.validate()?;
    if pattern.class_measures.is_empty() {
        return Err(Error::Geometry("channel wall pattern has no classes".into()));
    }
    if pattern.class_measures.len() > spec.a.len() {
        return Err(Error::Geometry(format!(
            "wall pattern has {} classes but only {} wetting coefficients",
            pattern.class_measures.len(),
            spec.a.len()
        )));
    }
    if pattern.class_measures.iter().any(|m| *m < 0.0) {
        return Err(Error::Geometry("wall-class measures must be nonnegative".into()));
    }
    let weighted: f64 = pattern
        .class_measures
        .iter()
        .zip(&spec.a)
        .map(|(m, a)| m * a)
        .sum();
    Ok(-spec.gamma / spec.cahn * weighted)
}

/// Porous upscaled wetting source
///   g0t = -(gamma/C_h) sum_i a_i |dY^1_{w_i}|,
/// exactly as printed (surface integral, unnormalized); `normalize` divides
/// by |Y| = 1 and so changes nothing for the unit cell but records the
/// convention choice.
pub fn upscaled_g_tilde_const(
    cell: &ReferenceCell,
    spec: &WettingSpec,
    normalize: bool,
) -> Result<f64> {
    spec.validate()?;
    if cell.class_measures.is_empty() {
        return Err(Error::Geometry(
            "cell has no pore-solid interface: g0t is undefined".into(),
        ));
    }
    if cell.class_measures.len() > spec.a.len() {
        return Err(Error::Geometry(format!(
            "cell has {} wall classes but only {} wetting coefficients",
            cell.class_measures.len(),
            spec.a.len()
        )));
    }
    let weighted: f64 = cell
        .class_measures
        .iter()
        .zip(&spec.a)
        .map(|(m, a)| m * a)
        .sum();
    let cell_volume = 1.0;
    let norm = if normalize { cell_volume } else { 1.0 };
    Ok(-spec.gamma / spec.cahn * weighted / norm)
}

/// Field-valued variant: a_i(x) given per class on the macro grid.
pub fn upscaled_g_tilde_field(
    cell: &ReferenceCell,
    spec: &WettingSpec,
    a_fields: &[Vec<f64>],
    normalize: bool,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if cell.class_measures.is_empty() {
        return Err(Error::Geometry(
            "cell has no pore-solid interface: g0t is undefined".into(),
        ));
    }
    if a_fields.len() < cell.class_measures.len() {
        return Err(Error::Geometry(format!(
            "cell has {} wall classes but only {} coefficient fields",
            cell.class_measures.len(),
            a_fields.len()
        )));
    }
    let len = a_fields[0].len();
    if a_fields.iter().any(|f| f.len() != len) {
        return Err(Error::Parameter("coefficient fields differ in length".into()));
    }
    let cell_volume = 1.0;
    let norm = if normalize { cell_volume } else { 1.0 };
    let factor = -spec.gamma / spec.cahn / norm;
    let mut out = vec![0.0; len];
    for (measure, field) in cell.class_measures.iter().zip(a_fields) {
        for (o, v) in out.iter_mut().zip(field) {
            *o += measure * v;
        }
    }
    for o in &mut out {
        *o *= factor;
    }
    Ok(out)
}

/// alpha(x) = -(gamma/C_h) (a1 theta_w1(x) + a2 (1 - theta_w1(x))).
pub fn alpha_field(
    theta_w1: &[f64],
    a1: f64,
    a2: f64,
    gamma: f64,
    cahn: f64,
) -> Result<Vec<f64>> {
    if !(cahn > 0.0) {
        return Err(Error::Parameter("Cahn number must be > 0".into()));
    }
    for (i, th) in theta_w1.iter().enumerate() {
        if !(0.0..=1.0).contains(th) {
            return Err(Error::Parameter(format!(
                "wall fraction theta_w1[{i}] = {th} outside [0, 1]"
            )));
        }
    }
    Ok(theta_w1
        .iter()
        .map(|th| -gamma / cahn * (a1 * th + a2 * (1.0 - th)))
        .collect())
}

#[derive(Clone, Copy, Debug)]
pub struct ContactAngle {
    pub a_eff: f64,
    /// A = sqrt(2) gamma a_eff
    pub a_param: f64,
    pub cos_theta: f64,
    /// radians
    pub theta: f64,
}

/// Effective equilibrium contact angle from the averaged wall datum:
/// a_eff = g0 C_h / gamma, A = sqrt(2) gamma a_eff,
/// cos(theta_e) = [(1+A)^{3/2} - (1-A)^{3/2}] / 2.
pub fn effective_contact_angle(g0: f64, gamma: f64, cahn: f64) -> Result<ContactAngle> {
    if !(gamma != 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter("gamma must be nonzero and finite".into()));
    }
    if !(cahn > 0.0) {
        return Err(Error::Parameter("Cahn number must be > 0".into()));
    }
    let a_eff = g0 * cahn / gamma;
    let a_param = 2.0f64.sqrt() * gamma * a_eff;
    if a_param.abs() > 1.0 {
        return Err(Error::Domain(format!("A out of range: |{a_param}| > 1")));
    }
    let cos_theta = 0.5 * ((1.0 + a_param).powf(1.5) - (1.0 - a_param).powf(1.5));
    if cos_theta.abs() > 1.0 {
        return Err(Error::Domain(format!(
            "no equilibrium angle: cos(theta) = {cos_theta}"
        )));
    }
    Ok(ContactAngle {
        a_eff,
        a_param,
        cos_theta,
        theta: cos_theta.acos(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{build_cell, slab_spec};

    fn spec(gamma: f64, cahn: f64, a: &[f64]) -> WettingSpec {
        WettingSpec {
            gamma,
            cahn,
            phi_e: 1.0,
            a: a.to_vec(),
        }
    }

    #[test]
    fn robin_examples() {
        assert_eq!(spec(0.3, 0.1, &[0.0]).robin_g(1).unwrap(), 0.0);
        let g = spec(0.3, 0.1, &[2.0]).robin_g(1).unwrap();
        assert!((g + 6.0).abs() < 1e-14);
        assert!(spec(0.3, 0.1, &[1.0]).robin_g(2).is_err());
    }

    #[test]
    fn channel_g0_examples() {
        // constant a over the whole wall
        let s = spec(0.5, 0.25, &[1.5, 1.5]);
        let p = ChannelWallPattern {
            class_measures: vec![0.8, 1.2],
        };
        let g0 = upscaled_g0_channel(&p, &s).unwrap();
        assert!((g0 - (-0.5 / 0.25 * 1.5 * 2.0)).abs() < 1e-14);
        // equal measures, opposite coefficients cancel
        let s = spec(1.0, 1.0, &[1.0, -1.0]);
        let p = ChannelWallPattern {
            class_measures: vec![0.7, 0.7],
        };
        assert!(upscaled_g0_channel(&p, &s).unwrap().abs() < 1e-14);
        // 0.25/0.75 split of a unit wall with a = (1, 3)
        let s = spec(1.0, 1.0, &[1.0, 3.0]);
        let p = ChannelWallPattern {
            class_measures: vec![0.25, 0.75],
        };
        assert!((upscaled_g0_channel(&p, &s).unwrap() + 2.5).abs() < 1e-14);
        // missing coefficients
        let s = spec(1.0, 1.0, &[1.0]);
        assert!(matches!(
            upscaled_g0_channel(&p, &s),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn g_tilde_on_slab_cell() {
        // slab interface measure exactly 2 (two full rows of faces), one class
        let cell = build_cell(&slab_spec(2, 100, 0.5, 0.8)).unwrap();
        let s = spec(1.0, 1.0, &[0.0]);
        assert_eq!(upscaled_g_tilde_const(&cell, &s, false).unwrap(), 0.0);
        let s = spec(0.3, 0.1, &[2.0]);
        let g = upscaled_g_tilde_const(&cell, &s, false).unwrap();
        assert!((g - (-3.0 * 2.0 * 2.0)).abs() < 1e-12);
        // linear a1(x): g0t is linear with slope -(gamma/C_h)|dY1_w1|
        let xs: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let fields = vec![xs.clone()];
        let g = upscaled_g_tilde_field(&cell, &s, &fields, false).unwrap();
        for (x, gi) in xs.iter().zip(&g) {
            assert!((gi - (-3.0 * 2.0 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_field_examples() {
        let a = alpha_field(&[1.0, 1.0], 2.0, 5.0, 0.3, 0.1).unwrap();
        assert!(a.iter().all(|v| (v + 6.0).abs() < 1e-14));
        let a = alpha_field(&[0.5], 1.0, 3.0, 1.0, 1.0).unwrap();
        assert!((a[0] + 2.0).abs() < 1e-14);
        // degenerate a1 = a2: independent of the fraction
        let a = alpha_field(&[0.0, 0.3, 1.0], 2.0, 2.0, 1.0, 1.0).unwrap();
        assert!(a.iter().all(|v| (v + 2.0).abs() < 1e-14));
        assert!(matches!(
            alpha_field(&[1.5], 1.0, 1.0, 1.0, 1.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn neutral_wetting_gives_right_angle() {
        let c = effective_contact_angle(0.0, 0.4, 0.1).unwrap();
        assert_eq!(c.cos_theta, 0.0);
        assert_eq!(c.theta, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn small_a_taylor_slope() {
        // cos(theta) = (3/2) A + O(A^3)
        let gamma = 1.0;
        let a_param = 1e-3;
        // choose g0 so that A = sqrt(2) gamma a_eff = a_param
        let cahn = 0.2;
        let g0 = a_param / (2.0f64.sqrt() * gamma) * gamma / cahn;
        let c = effective_contact_angle(g0, gamma, cahn).unwrap();
        assert!((c.a_param - a_param).abs() < 1e-15);
        assert!((c.cos_theta - 1.5 * a_param).abs() < 1e-6);
    }

    #[test]
    fn cos_is_odd_in_a() {
        let gamma = 0.7;
        let cahn = 0.05;
        for a in [0.05, 0.2, 0.41, 0.6] {
            let g0 = a / (2.0f64.sqrt() * gamma) * gamma / cahn;
            let plus = effective_contact_angle(g0, gamma, cahn).unwrap();
            let minus = effective_contact_angle(-g0, gamma, cahn).unwrap();
            assert!((plus.cos_theta + minus.cos_theta).abs() < 1e-14);
        }
    }

    #[test]
    fn hydrophilic_sign_convention() {
        let gamma = 0.5;
        let cahn = 0.1;
        let g0 = 0.1;
        let c = effective_contact_angle(g0, gamma, cahn).unwrap();
        assert!(c.a_eff > 0.0 && c.theta < std::f64::consts::FRAC_PI_2);
        let c = effective_contact_angle(-g0, gamma, cahn).unwrap();
        assert!(c.a_eff < 0.0 && c.theta > std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn a_eff_round_trip() {
        let gamma = 0.9;
        let cahn = 0.3;
        for a_eff in [-0.4, -0.1, 0.05, 0.3] {
            let g0 = a_eff * gamma / cahn;
            let c = effective_contact_angle(g0, gamma, cahn).unwrap();
            assert!((c.a_eff - a_eff).abs() < 1e-14);
            assert!((c.a_param - 2.0f64.sqrt() * gamma * a_eff).abs() < 1e-14);
        }
    }

    #[test]
    fn domain_errors_beyond_admissible_a() {
        let gamma = 1.0;
        let cahn = 1.0;
        let g0_of_a = |a: f64| a / 2.0f64.sqrt();
        // bisection for the largest admissible A*: cos(theta)(A*) = 1
        let f = |a: f64| 0.5 * ((1.0 + a).powf(1.5) - (1.0 - a).powf(1.5)) - 1.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let a_star = 0.5 * (lo + hi);
        assert!(a_star > 0.6 && a_star < 0.75, "A* = {a_star}");
        // below A*: fine; above: no equilibrium angle; above 1: out of range
        assert!(effective_contact_angle(g0_of_a(a_star - 1e-3), gamma, cahn).is_ok());
        match effective_contact_angle(g0_of_a(a_star + 1e-3), gamma, cahn) {
            Err(Error::Domain(msg)) => assert!(msg.contains("no equilibrium angle")),
            other => panic!("expected DomainError, got {other:?}"),
        }
        match effective_contact_angle(g0_of_a(1.5), gamma, cahn) {
            Err(Error::Domain(msg)) => assert!(msg.contains("A out of range")),
            other => panic!("expected DomainError, got {other:?}"),
        }
    }
}
