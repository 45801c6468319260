//! Time integration of the Cahn-Hilliard equation
//!     d(phi)/dt = div(m grad(f(phi) - lambda^2 lap(phi)))
//! on a (possibly perforated) box domain. The homogeneous macroscopic
//! problem and the desk-scale micro problem run through the same kernels,
//! so the trivial tiling reproduces the homogeneous solver node for node.
//!
//! Schemes:
//!  - explicit Euler under the step cap dt <= 0.1 h^4 / (lambda^2 m);
//!  - linearly stabilized semi-implicit splitting (convex-splitting type):
//!    the constant-coefficient biharmonic and the stabilization Laplacian
//!    are implicit, f(phi) and all boundary data explicit. With
//!    stabilization >= max f' / 2 over the attained range the discrete
//!    energy is non-increasing.

use crate::domain::{Domain, FaceBc, SlotView};
use crate::energy::BulkFreeEnergy;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Documented constant in the explicit stability precondition.
pub const EXPLICIT_CAP_COEFF: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Explicit,
    #[default]
    SemiImplicitBiharmonic,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// convex-splitting stabilization constant S
    pub stabilization: f64,
    pub lambda: f64,
    pub mobility: f64,
    /// relative tolerance of the implicit CG solve
    pub solver_tol: f64,
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.lambda < 0.0 {
            return Err(Error::Parameter("lambda must be >= 0".into()));
        }
        if !(self.mobility > 0.0) {
            return Err(Error::Parameter("mobility must be > 0".into()));
        }
        Ok(())
    }

    pub fn explicit_cap(&self, domain: &Domain) -> f64 {
        if self.lambda == 0.0 {
            return f64::INFINITY;
        }
        let h = domain.min_spacing();
        EXPLICIT_CAP_COEFF * h.powi(4) / (self.lambda * self.lambda * self.mobility)
    }
}

/// Order parameter plus the splitting variable w = -lap(phi).
#[derive(Clone, Debug)]
pub struct ChState {
    pub phi: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
    pub step: u64,
}

impl ChState {
    pub fn new(phi: Vec<f64>, domain: &Domain) -> Self {
        let w = domain.laplacian(&phi).iter().map(|v| -v).collect();
        ChState {
            phi,
            w,
            t: 0.0,
            step: 0,
        }
    }
}

/// Explicit right-hand side div(m grad mu) with mu = f(phi) - lambda^2
/// lap(phi), together with the expected mass rate d/dt int phi (prescribed
/// boundary fluxes plus wall/interface ghost fluxes).
pub fn ch_rhs(
    domain: &Domain,
    energy: &BulkFreeEnergy,
    lambda: f64,
    mobility: f64,
    phi: &[f64],
) -> (Vec<f64>, f64) {
    let lap = domain.laplacian(phi);
    let l2 = lambda * lambda;
    let mut mu = vec![0.0; phi.len()];
    for i in domain.pore_cells() {
        mu[i] = energy.f(phi[i]) - l2 * lap[i];
    }
    let vol = domain.cell_volume();
    let mut rhs = vec![0.0; phi.len()];
    let mut rate = 0.0;
    domain.for_each_pore_cell_face(|i, axis, _side, view| {
        let h = domain.spacing[axis];
        let area = vol / h;
        let flux = match view {
            SlotView::Pore(j) => mobility * (mu[j] - mu[i]) / h,
            SlotView::Interface(f) => {
                let g = domain.iface_g[f];
                let fl = mobility * (energy.f(phi[i] + h * g) - energy.f(phi[i])) / h;
                rate += fl * area;
                fl
            }
            SlotView::Boundary(bc) => match bc {
                FaceBc::NoFlux | FaceBc::ZeroFlux | FaceBc::Periodic => 0.0,
                FaceBc::Inflow { flux } => {
                    rate += flux * area;
                    flux
                }
                FaceBc::Wall { g } => {
                    let fl = mobility * (energy.f(phi[i] + h * g) - energy.f(phi[i])) / h;
                    rate += fl * area;
                    fl
                }
            },
        };
        rhs[i] += flux / h;
    });
    (rhs, rate)
}

/// Advance one step of the homogeneous/micro Cahn-Hilliard problem.
pub fn step_ch(
    state: &mut ChState,
    domain: &Domain,
    energy: &BulkFreeEnergy,
    cfg: &StepperConfig,
) -> Result<()> {
    cfg.validate()?;
    let (rhs, rate) = ch_rhs(domain, energy, cfg.lambda, cfg.mobility, &state.phi);
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
            let c1 = cfg.dt * cfg.mobility * cfg.stabilization;
            let c2 = cfg.dt * cfg.lambda * cfg.lambda * cfg.mobility;
            let n = state.phi.len();
            let apply = move |x: &[f64], y: &mut [f64]| {
                let mut t1 = vec![0.0; n];
                domain.neg_lap0(x, &mut t1);
                let mut t2 = vec![0.0; n];
                domain.neg_lap0(&t1, &mut t2);
                for i in 0..n {
                    y[i] = x[i] + c1 * t1[i] + c2 * t2[i];
                }
            };
            let b: Vec<f64> = rhs.iter().map(|r| cfg.dt * r).collect();
            let max_iter = 50 * domain.pore_count() + 100;
            let (delta, _iters) = domain.cg_solve(&apply, &b, cfg.solver_tol, max_iter)?;
            delta
        }
    };

    // The divergence form conserves mass up to the declared boundary fluxes;
    // remove the solver/summation roundoff so the budget holds exactly.
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
                "non-finite phi at cell {c:?} after step {}",
                state.step + 1
            )));
        }
    }
    let lap = domain.laplacian(&state.phi);
    for i in domain.pore_cells() {
        state.w[i] = -lap[i];
    }
    state.t += cfg.dt;
    state.step += 1;
    Ok(())
}

/// E(phi) = int_pore F(phi) + (lambda^2/2) |grad phi|^2.
pub fn energy_total(phi: &[f64], energy: &BulkFreeEnergy, lambda: f64, domain: &Domain) -> f64 {
    let vol = domain.cell_volume();
    let bulk: f64 = domain.pore_cells().map(|i| energy.big_f(phi[i])).sum::<f64>() * vol;
    bulk + lambda * lambda * domain.gradient_energy(phi)
}

/// theta1-weighted mass theta1 int phi.
pub fn mass_total(phi: &[f64], theta1: f64, domain: &Domain) -> f64 {
    theta1 * domain.integrate(phi)
}

/// Zero mass shift v = phi - phi_bar with phi_bar the pore average.
pub fn zero_mass_shift(phi: &[f64], domain: &Domain) -> (Vec<f64>, f64) {
    let mean = domain.pore_mean(phi);
    let mut v = vec![0.0; phi.len()];
    for i in domain.pore_cells() {
        v[i] = phi[i] - mean;
    }
    (v, mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FaceBc;
    use rand::{Rng, SeedableRng};

    fn default_cfg(scheme: Scheme) -> StepperConfig {
        StepperConfig {
            dt: 1e-5,
            scheme,
            stabilization: 2.0,
            lambda: 0.05,
            mobility: 1.0,
            solver_tol: 1e-12,
        }
    }

    #[test]
    fn constant_well_is_a_fixed_point() {
        let domain = Domain::unit_box(2, &[16, 16], FaceBc::NoFlux);
        let energy = BulkFreeEnergy::from_wells(1.0, 2.0).unwrap();
        let phi = vec![2.0; domain.shape.len()];
        let mut state = ChState::new(phi.clone(), &domain);
        for _ in 0..5 {
            step_ch(&mut state, &domain, &energy, &default_cfg(Scheme::SemiImplicitBiharmonic))
                .unwrap();
        }
        assert_eq!(state.phi, phi);
        assert!(state.w.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_state_stays_zero() {
        let domain = Domain::unit_box(2, &[16, 16], FaceBc::NoFlux);
        let energy = BulkFreeEnergy::standard_well();
        let mut state = ChState::new(vec![0.0; domain.shape.len()], &domain);
        for _ in 0..10 {
            step_ch(&mut state, &domain, &energy, &default_cfg(Scheme::Explicit)).unwrap();
        }
        assert!(state.phi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mass_conserved_and_energy_decreases() {
        let domain = Domain::unit_box(2, &[32, 32], FaceBc::NoFlux);
        let energy = BulkFreeEnergy::standard_well();
        let cfg = default_cfg(Scheme::SemiImplicitBiharmonic);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let phi: Vec<f64> = (0..domain.shape.len())
            .map(|_| rng.random_range(-0.1..0.1))
            .collect();
        let mut state = ChState::new(phi, &domain);
        let m0 = mass_total(&state.phi, 1.0, &domain);
        let mut e_prev = energy_total(&state.phi, &energy, cfg.lambda, &domain);
        for _ in 0..100 {
            step_ch(&mut state, &domain, &energy, &cfg).unwrap();
            let e = energy_total(&state.phi, &energy, cfg.lambda, &domain);
            assert!(e <= e_prev + 1e-12, "energy rose: {e_prev} -> {e}");
            e_prev = e;
        }
        let m1 = mass_total(&state.phi, 1.0, &domain);
        assert!((m1 - m0).abs() <= 1e-12 * m0.abs().max(1.0));
    }

    #[test]
    fn explicit_cap_is_enforced() {
        let domain = Domain::unit_box(2, &[32, 32], FaceBc::NoFlux);
        let energy = BulkFreeEnergy::standard_well();
        let mut cfg = default_cfg(Scheme::Explicit);
        cfg.dt = 1.0;
        let mut state = ChState::new(vec![0.1; domain.shape.len()], &domain);
        assert!(matches!(
            step_ch(&mut state, &domain, &energy, &cfg),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn blowup_reports_numerics_error() {
        // lambda = 0 disables the cap; a huge dt blows up the nonlinear term
        let domain = Domain::unit_box(2, &[16, 16], FaceBc::NoFlux);
        let energy = BulkFreeEnergy::standard_well();
        let mut cfg = default_cfg(Scheme::Explicit);
        cfg.lambda = 0.0;
        cfg.dt = 1e6;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let phi: Vec<f64> = (0..domain.shape.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let mut state = ChState::new(phi, &domain);
        let mut failed = false;
        for _ in 0..50 {
            match step_ch(&mut state, &domain, &energy, &cfg) {
                Err(Error::Numerics(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
                Ok(()) => {}
            }
        }
        assert!(failed, "expected a NumericsError blow-up");
    }

    #[test]
    fn schemes_agree_to_first_order() {
        let domain = Domain::unit_box(2, &[32, 32], FaceBc::NoFlux);
        let energy = BulkFreeEnergy::standard_well();
        let h = 1.0 / 32.0f64;
        let phi0: Vec<f64> = (0..domain.shape.len())
            .map(|i| {
                let c = domain.shape.coords(i);
                let x = (c[0] as f64 + 0.5) * h;
                let y = (c[1] as f64 + 0.5) * h;
                0.3 * (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos()
            })
            .collect();
        let t_final = 4e-5;
        let diff = |dt: f64| {
            let mut cfg_e = default_cfg(Scheme::Explicit);
            cfg_e.dt = dt;
            let mut cfg_s = default_cfg(Scheme::SemiImplicitBiharmonic);
            cfg_s.dt = dt;
            cfg_s.solver_tol = 1e-14;
            let steps = (t_final / dt).round() as usize;
            let mut se = ChState::new(phi0.clone(), &domain);
            let mut ss = ChState::new(phi0.clone(), &domain);
            for _ in 0..steps {
                step_ch(&mut se, &domain, &energy, &cfg_e).unwrap();
                step_ch(&mut ss, &domain, &energy, &cfg_s).unwrap();
            }
            se.phi
                .iter()
                .zip(&ss.phi)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let d1 = diff(4e-6);
        let d2 = diff(2e-6);
        let d4 = diff(1e-6);
        // first-order gap between the schemes: halving dt roughly halves it
        assert!(d2 <= d1 * 0.7, "d1={d1} d2={d2}");
        assert!(d4 <= d2 * 0.7, "d2={d2} d4={d4}");
    }

    #[test]
    fn interface_relaxes_toward_tanh_profile() {
        // quasi-1D two-well step; equilibrium profile is tanh-like and the
        // chemical potential flattens. Bounds are solver regression values.
        let domain = Domain::new(
            2,
            &[128, 4],
            &[1.0, 0.03125],
            [[FaceBc::NoFlux; 2]; 3],
            None,
        )
        .unwrap();
        let energy = BulkFreeEnergy::standard_well();
        let lambda = 0.05;
        let mut cfg = default_cfg(Scheme::SemiImplicitBiharmonic);
        cfg.lambda = lambda;
        cfg.dt = 2e-4;
        let h = 1.0 / 128.0;
        let phi: Vec<f64> = (0..domain.shape.len())
            .map(|i| {
                let c = domain.shape.coords(i);
                let x = (c[0] as f64 + 0.5) * h;
                if x < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            })
            .collect();
        let mut state = ChState::new(phi, &domain);
        let mu_variance = |phi: &[f64]| {
            let mu = crate::energy::chemical_potential(&energy, phi, lambda, &domain).unwrap();
            let mean = domain.pore_mean(&mu);
            domain.pore_cells().map(|i| (mu[i] - mean).powi(2)).sum::<f64>()
                / domain.pore_count() as f64
        };
        let mut vars = Vec::new();
        for k in 0..400 {
            step_ch(&mut state, &domain, &energy, &cfg).unwrap();
            if k % 50 == 49 {
                vars.push(mu_variance(&state.phi));
            }
        }
        // monotone decay after the initial transient
        for w in vars[1..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "mu variance not decaying: {vars:?}");
        }
        // profile close to the equilibrium tanh shape
        let mut worst = 0.0f64;
        for i in domain.pore_cells() {
            let c = domain.shape.coords(i);
            let x = (c[0] as f64 + 0.5) * h;
            let exact = ((x - 0.5) / (2.0f64.sqrt() * lambda)).tanh();
            worst = worst.max((state.phi[i] - exact).abs());
        }
        assert!(worst < 0.12, "profile deviates from tanh by {worst}");
    }

    #[test]
    fn energy_and_mass_totals() {
        let domain = Domain::unit_box(2, &[64, 64], FaceBc::Periodic);
        let dw = BulkFreeEnergy::from_wells(1.0, 2.0).unwrap();
        // constant at a well: zero energy
        let phi = vec![1.0; domain.shape.len()];
        assert!(energy_total(&phi, &dw, 0.3, &domain).abs() < 1e-12);
        // mass of a constant is theta1 c |Omega|
        assert!((mass_total(&phi, 0.7, &domain) - 0.7).abs() < 1e-12);

        // periodic sin with lambda = 0 matches fine quadrature of F(sin)
        let e = BulkFreeEnergy::standard_well();
        let h = 1.0 / 64.0;
        let phi: Vec<f64> = (0..domain.shape.len())
            .map(|i| {
                let c = domain.shape.coords(i);
                (2.0 * std::f64::consts::PI * (c[0] as f64 + 0.5) * h).sin()
            })
            .collect();
        let total = energy_total(&phi, &e, 0.0, &domain);
        let mut oracle = 0.0;
        let fine = 4096;
        for k in 0..fine {
            let x = (k as f64 + 0.5) / fine as f64;
            oracle += e.big_f((2.0 * std::f64::consts::PI * x).sin()) / fine as f64;
        }
        assert!((total - oracle).abs() < h * h, "{total} vs {oracle}");

        // a gradient ramp strictly increases the energy when lambda > 0
        let flat = vec![0.3; domain.shape.len()];
        let ramp: Vec<f64> = (0..domain.shape.len())
            .map(|i| 0.3 + 0.1 * domain.center(i)[0])
            .collect();
        let box_domain = Domain::unit_box(2, &[64, 64], FaceBc::NoFlux);
        let e_flat = energy_total(&flat, &e, 0.1, &box_domain);
        let e_ramp = energy_total(&ramp, &e, 0.1, &box_domain);
        assert!(e_ramp > e_flat);
    }

    #[test]
    fn zero_mass_shift_roundtrip() {
        let domain = Domain::unit_box(2, &[8, 8], FaceBc::NoFlux);
        let phi = vec![5.0; domain.shape.len()];
        let (v, mean) = zero_mass_shift(&phi, &domain);
        assert_eq!(mean, 5.0);
        assert!(v.iter().all(|x| *x == 0.0));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let phi: Vec<f64> = (0..domain.shape.len())
            .map(|_| rng.random_range(-2.0..2.0))
            .collect();
        let (v, mean) = zero_mass_shift(&phi, &domain);
        assert!(domain.pore_mean(&v).abs() < 1e-14);
        for i in 0..phi.len() {
            assert!((v[i] + mean - phi[i]).abs() <= 4.0 * f64::EPSILON);
        }
    }
}
