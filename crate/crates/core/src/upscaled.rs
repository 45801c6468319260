//! The upscaled macroscopic Cahn-Hilliard equation
//!
//!   theta1 d(phi0)/dt = div([theta1 f'(phi0) M - (2 f(phi0)/phi0 - f'(phi0)) M_v] grad phi0)
//!                      - f'(phi0) div(M_v grad phi0)
//!                      - (lambda^2/theta1) div(M_w grad(div(D grad phi0) + s g0t))
//!
//! with M_w evaluated pointwise as M_w_a + r(phi0) M_w_b. The sign of the
//! fourth-order term is the dissipative one: it is forced by the splitting
//! relation -div(D grad phi0) = theta1 w0 + g0t together with the trivial
//! cell reduction to the homogeneous equation. The sign s in front of the
//! upscaled wetting source g0t is a switch (the printed corollary and the
//! derivation carry opposite signs); s = +1 matches the derivation and is
//! the default.
//!
//! Discretization notes: the theta1 f' M part uses divided differences of f
//! on faces (the chain-rule-exact form), so with trivial-cell tensors the
//! right-hand side collapses to the homogeneous operator
//! div(m grad(f(phi) - lambda^2 lap phi)) to rounding error. Off-diagonal
//! tensor entries use averaged cell-centered tangential gradients at faces.

use crate::corrector::EffectiveTensors;
use crate::domain::{Domain, FaceBc, SlotView};
use crate::energy::BulkFreeEnergy;
use crate::error::{Error, Result};
use crate::stepper::{ChState, Scheme, StepperConfig};

#[derive(Clone, Debug)]
pub struct UpscaledSystem<'a> {
    pub tensors: &'a EffectiveTensors,
    pub energy: &'a BulkFreeEnergy,
    /// upscaled wetting source on the macro grid, if any
    pub g_tilde: Option<Vec<f64>>,
    /// +1 (derivation form, default) or -1 (corollary's printed form)
    pub g_tilde_sign: f64,
}

impl<'a> UpscaledSystem<'a> {
    pub fn new(tensors: &'a EffectiveTensors, energy: &'a BulkFreeEnergy) -> Self {
        UpscaledSystem {
            tensors,
            energy,
            g_tilde: None,
            g_tilde_sign: 1.0,
        }
    }

    pub fn with_g_tilde(mut self, field: Vec<f64>, sign: f64) -> Self {
        self.g_tilde = Some(field);
        self.g_tilde_sign = sign;
        self
    }
}

/// div(mat grad x): constant-matrix flux divergence; wall faces carry
/// mat_aa * g when `wall_data`, prescribed-flux faces are mirror (zero).
fn div_const_tensor(
    domain: &Domain,
    mat: &crate::linalg::SmallMat,
    x: &[f64],
    grads: &[Vec<f64>],
    wall_data: bool,
) -> Vec<f64> {
    let d = domain.d;
    let mut out = vec![0.0; x.len()];
    domain.for_each_pore_cell_face(|i, axis, side, view| {
        let h = domain.spacing[axis];
        let sgn = if side == 1 { 1.0 } else { -1.0 };
        let flux = match view {
            SlotView::Pore(j) => {
                let mut fl = mat.get(axis, axis) * (x[j] - x[i]) / h;
                for k in 0..d {
                    if k != axis {
                        let c = mat.get(axis, k);
                        if c != 0.0 {
                            fl += sgn * c * 0.5 * (grads[k][i] + grads[k][j]);
                        }
                    }
                }
                fl
            }
            SlotView::Boundary(FaceBc::Wall { g }) if wall_data => mat.get(axis, axis) * g,
            _ => 0.0,
        };
        out[i] += flux / h;
    });
    out
}

/// Right-hand side (1/theta1) * [T1 + T2 + T4] of the upscaled equation,
/// together with the expected rate of change of int phi0 (boundary fluxes
/// plus the genuinely non-conservative M_v transport term).
pub fn macro_rhs(domain: &Domain, sys: &UpscaledSystem, phi: &[f64]) -> (Vec<f64>, f64) {
    let t = sys.tensors;
    let en = sys.energy;
    let d = domain.d;
    let theta1 = t.theta1;
    let m = t.mobility;
    let lambda2 = t.lambda * t.lambda;
    let vol = domain.cell_volume();

    let grads: Vec<Vec<f64>> = (0..d).map(|k| domain.cell_gradient(phi, k)).collect();

    // inner second-order operator p = div(D grad phi) + s * g0t
    let mut p = div_const_tensor(domain, &t.d_tensor, phi, &grads, true);
    if let Some(g) = &sys.g_tilde {
        for i in domain.pore_cells() {
            p[i] += sys.g_tilde_sign * g[i];
        }
    }
    let grads_p: Vec<Vec<f64>> = (0..d).map(|k| domain.cell_gradient(&p, k)).collect();

    // T4 = -(lambda^2/theta1) div(M_w(phi) grad p), grad_n p = 0 on the
    // outer boundary
    let mut rhs = vec![0.0; phi.len()];
    let c4 = -lambda2 / theta1;
    domain.for_each_pore_cell_face(|i, axis, side, view| {
        if let SlotView::Pore(j) = view {
            let h = domain.spacing[axis];
            let sgn = if side == 1 { 1.0 } else { -1.0 };
            let r_face = en.ratio_value(0.5 * (phi[i] + phi[j]));
            let mut fl = (t.m_w_a.get(axis, axis) + r_face * t.m_w_b.get(axis, axis))
                * (p[j] - p[i])
                / h;
            for k in 0..d {
                if k != axis {
                    let c = t.m_w_a.get(axis, k) + r_face * t.m_w_b.get(axis, k);
                    if c != 0.0 {
                        fl += sgn * c * 0.5 * (grads_p[k][i] + grads_p[k][j]);
                    }
                }
            }
            rhs[i] += c4 * fl / h;
        }
    });

    // T1 = div([theta1 f' m I - (2 f/phi - f') M_v] grad phi); the f' m part
    // is discretized as grad f(phi) on faces, with int_Y1 m delta dy taken
    // in the same face quadrature as the corrector integrals (theta_flux)
    let mut boundary_rate = 0.0;
    domain.for_each_pore_cell_face(|i, axis, side, view| {
        let h = domain.spacing[axis];
        let area = vol / h;
        let sgn = if side == 1 { 1.0 } else { -1.0 };
        let flux = match view {
            SlotView::Pore(j) => {
                let mut fl = t.theta_flux[axis] * m * (en.f(phi[j]) - en.f(phi[i])) / h;
                let pf = 0.5 * (phi[i] + phi[j]);
                let sv = -(2.0 * en.f_over_s(pf) - en.f_prime(pf));
                let mut mv_flux = t.m_v.get(axis, axis) * (phi[j] - phi[i]) / h;
                for k in 0..d {
                    if k != axis {
                        let c = t.m_v.get(axis, k);
                        if c != 0.0 {
                            mv_flux += sgn * c * 0.5 * (grads[k][i] + grads[k][j]);
                        }
                    }
                }
                fl += sv * mv_flux;
                fl
            }
            SlotView::Boundary(bc) => match bc {
                FaceBc::Wall { g } => {
                    let fl = t.theta_flux[axis] * m * (en.f(phi[i] + h * g) - en.f(phi[i])) / h
                        + -(2.0 * en.f_over_s(phi[i]) - en.f_prime(phi[i]))
                            * t.m_v.get(axis, axis)
                            * g;
                    boundary_rate += fl * area;
                    fl
                }
                FaceBc::Inflow { flux } => {
                    boundary_rate += flux * area;
                    flux
                }
                _ => 0.0,
            },
            SlotView::Interface(_) => 0.0,
        };
        rhs[i] += flux / h;
    });

    // T2 = -f'(phi) div(M_v grad phi): not in divergence form; its integral
    // enters the expected mass budget
    let q2 = div_const_tensor(domain, &t.m_v, phi, &grads, true);
    let mut t2_total = 0.0;
    for i in domain.pore_cells() {
        let t2 = -en.f_prime(phi[i]) * q2[i];
        rhs[i] += t2;
        t2_total += t2 * vol;
    }

    for i in domain.pore_cells() {
        rhs[i] /= theta1;
    }
    ((rhs), (boundary_rate + t2_total) / theta1)
}

/// One step of the upscaled equation. The semi-implicit scheme freezes the
/// principal coefficients: diag(D) and diag(M_w_a + mean(r(phi)) M_w_b),
/// symmetrized and clamped nonnegative, plus the stabilization Laplacian;
/// everything else is explicit.
pub fn step_macro(
    state: &mut ChState,
    domain: &Domain,
    sys: &UpscaledSystem,
    cfg: &StepperConfig,
) -> Result<()> {
    cfg.validate()?;
    let t = sys.tensors;
    if (cfg.lambda - t.lambda).abs() > 1e-12 * (1.0 + t.lambda.abs())
        || (cfg.mobility - t.mobility).abs() > 1e-12 * (1.0 + t.mobility.abs())
    {
        return Err(Error::Parameter(format!(
            "stepper (lambda, m) = ({}, {}) disagrees with the tensor assembly ({}, {})",
            cfg.lambda, cfg.mobility, t.lambda, t.mobility
        )));
    }
    let (rhs, rate) = macro_rhs(domain, sys, &state.phi);
    let delta = match cfg.scheme {
        Scheme::Explicit => {
            let cap = cfg.explicit_cap(domain);
            if cfg.dt > cap {
                return Err(Error::Parameter(format!(
                    "explicit step dt={} exceeds the stability cap {cap:.3e}",
                    cfg.dt
                )));
            }
            rhs.iter().map(|r| cfg.dt * r).collect::<Vec<f64>>()
        }
        Scheme::SemiImplicitBiharmonic => {
            let r_mean = {
                let s: f64 = domain.pore_cells().map(|i| sys.energy.ratio_value(state.phi[i])).sum();
                s / domain.pore_count() as f64
            };
            let m_bar = t.m_w_a.add(&t.m_w_b.scale(r_mean)).symmetrized();
            let d_bar = t.d_tensor.symmetrized();
            let mut coef_d = [0.0; 3];
            let mut coef_m = [0.0; 3];
            for a in 0..domain.d {
                coef_d[a] = d_bar.get(a, a).max(0.0);
                coef_m[a] = m_bar.get(a, a).max(0.0);
            }
            let c4 = cfg.dt * t.lambda * t.lambda / (t.theta1 * t.theta1);
            let c1 = cfg.dt * cfg.stabilization * t.mobility;
            let n = state.phi.len();
            let apply = move |x: &[f64], y: &mut [f64]| {
                let mut stab = vec![0.0; n];
                domain.neg_lap0(x, &mut stab);
                let mut td = vec![0.0; n];
                domain.aniso_neg_div(&coef_d, x, &mut td);
                let mut tm = vec![0.0; n];
                domain.aniso_neg_div(&coef_m, &td, &mut tm);
                for i in 0..n {
                    y[i] = x[i] + c1 * stab[i] + c4 * tm[i];
                }
            };
            let b: Vec<f64> = rhs.iter().map(|r| cfg.dt * r).collect();
            let max_iter = 50 * domain.pore_count() + 100;
            let (delta, _) = domain.cg_solve(&apply, &b, cfg.solver_tol, max_iter)?;
            delta
        }
    };

    let vol = domain.cell_volume();
    let got: f64 = domain.pore_cells().map(|i| delta[i]).sum::<f64>() * vol;
    let corr = (cfg.dt * rate - got) / (domain.pore_count() as f64 * vol);
    for i in domain.pore_cells() {
        state.phi[i] += delta[i] + corr;
    }
    for i in domain.pore_cells() {
        if !state.phi[i].is_finite() {
            let c = domain.shape.coords(i);
            return Err(Error::Numerics(format!(
                "non-finite phi0 at cell {c:?} after step {}",
                state.step + 1
            )));
        }
    }

    // splitting variable: theta1 w0 = -div(D grad phi0) - s g0t
    let grads: Vec<Vec<f64>> = (0..domain.d)
        .map(|k| domain.cell_gradient(&state.phi, k))
        .collect();
    let lap_d = div_const_tensor(domain, &t.d_tensor, &state.phi, &grads, true);
    for i in domain.pore_cells() {
        let g = sys
            .g_tilde
            .as_ref()
            .map(|f| sys.g_tilde_sign * f[i])
            .unwrap_or(0.0);
        state.w[i] = (-lap_d[i] - g) / t.theta1;
    }
    state.t += cfg.dt;
    state.step += 1;
    Ok(())
}
