//! Desk-scale perforated domains: exact tilings of a reference cell, the
//! micro/macro comparison functionals, first-order reconstruction and the
//! local-equilibrium diagnostic.
//!
//! The fine grid always resolves each epsilon-cell with the reference cell's
//! own resolution, so tiling, restriction and averaging are exact and the
//! micro solver sees the same staircase geometry the cell problems were
//! solved on.

use crate::cell::ReferenceCell;
use crate::corrector::CorrectorV;
use crate::domain::{Domain, FaceBc};
use crate::energy::BulkFreeEnergy;
use crate::error::{Error, Result};
use crate::grid::GridShape;

#[derive(Clone, Debug)]
pub struct PerforatedGrid {
    pub domain: Domain,
    pub epsilon: f64,
    /// reference-cell resolution (fine cells per epsilon-cell per axis)
    pub cell_n: usize,
    /// epsilon-cells per axis
    pub k_cells: [usize; 3],
    pub cell_theta1: f64,
}

/// Tile the reference cell into the box `lengths` with period epsilon.
pub fn build_perforated_domain(
    cell: &ReferenceCell,
    epsilon: f64,
    lengths: &[f64],
    bc: [[FaceBc; 2]; 3],
) -> Result<PerforatedGrid> {
    if !(epsilon > 0.0) {
        return Err(Error::Parameter("epsilon must be positive".into()));
    }
    let inv = 1.0 / epsilon;
    if (inv - inv.round()).abs() > 1e-9 {
        return Err(Error::Geometry(format!(
            "1/epsilon = {inv} is not an integer: the cell tiling does not close"
        )));
    }
    if lengths.len() != cell.d {
        return Err(Error::Parameter("lengths/cell dimension mismatch".into()));
    }
    let mut k_cells = [1usize; 3];
    let mut dims = vec![0usize; cell.d];
    for a in 0..cell.d {
        let k = lengths[a] / epsilon;
        if (k - k.round()).abs() > 1e-9 || k.round() < 1.0 {
            return Err(Error::Geometry(format!(
                "length {} on axis {a} is not an integer multiple of epsilon = {epsilon}",
                lengths[a]
            )));
        }
        k_cells[a] = k.round() as usize;
        dims[a] = k_cells[a] * cell.n;
    }

    let shape = GridShape::new(cell.d, &dims);
    let n = cell.n;
    let mut pore = vec![false; shape.len()];
    let mut classes = vec![0u16; shape.len()];
    for i in 0..shape.len() {
        let c = shape.coords(i);
        let r = cell
            .shape
            .index([c[0] % n, c[1] % n, if cell.d == 3 { c[2] % n } else { 0 }]);
        pore[i] = cell.pore[r];
        classes[i] = cell.cell_class[r];
    }
    let domain = Domain::new(cell.d, &dims, lengths, bc, Some((&pore, &classes)))?;
    Ok(PerforatedGrid {
        domain,
        epsilon,
        cell_n: n,
        k_cells,
        cell_theta1: cell.theta1,
    })
}

impl PerforatedGrid {
    /// Porosity of the tiled grid; equals the reference porosity exactly.
    pub fn porosity(&self) -> f64 {
        self.domain.pore_count() as f64 / self.domain.shape.len() as f64
    }

    /// Epsilon-scaled wetting data on every pore-solid face:
    /// grad_n phi = -eps (gamma/C_h) a(class, x).
    pub fn wetting_data(
        &self,
        gamma: f64,
        cahn: f64,
        a: impl Fn(u16, [f64; 3]) -> f64,
    ) -> Vec<f64> {
        let factor = -self.epsilon * gamma / cahn;
        self.domain
            .iface
            .iter()
            .map(|f| {
                let mut x = self.domain.center(f.pore_cell);
                let axis = f.axis as usize;
                x[axis] += 0.5 * f.side as f64 * self.domain.spacing[axis];
                factor * a(f.class, x)
            })
            .collect()
    }

    /// Index of the epsilon-cell containing fine cell `i`.
    fn eps_cell(&self, i: usize) -> usize {
        let c = self.domain.shape.coords(i);
        let kx = c[0] / self.cell_n;
        let ky = c[1] / self.cell_n;
        let kz = if self.domain.d == 3 { c[2] / self.cell_n } else { 0 };
        kx + self.k_cells[0] * (ky + self.k_cells[1] * kz)
    }

    pub fn eps_cell_count(&self) -> usize {
        self.k_cells[0] * self.k_cells[1] * self.k_cells[2]
    }

    /// Average a fine field over the pore part of each epsilon-cell.
    pub fn cell_average(&self, field: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.eps_cell_count()];
        let mut counts = vec![0usize; self.eps_cell_count()];
        for i in self.domain.pore_cells() {
            let z = self.eps_cell(i);
            sums[z] += field[i];
            counts[z] += 1;
        }
        sums.iter()
            .zip(&counts)
            .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
            .collect()
    }

    /// Within-cell standard deviation of the chemical potential
    /// mu = f(phi) - lambda^2 lap(phi), one value per epsilon-cell.
    pub fn local_equilibrium_diagnostic(
        &self,
        phi: &[f64],
        energy: &BulkFreeEnergy,
        lambda: f64,
    ) -> Result<Vec<f64>> {
        let mu = crate::energy::chemical_potential(energy, phi, lambda, &self.domain)?;
        let m = self.eps_cell_count();
        let mut sums = vec![0.0; m];
        let mut sq = vec![0.0; m];
        let mut counts = vec![0usize; m];
        for i in self.domain.pore_cells() {
            let z = self.eps_cell(i);
            sums[z] += mu[i];
            sq[z] += mu[i] * mu[i];
            counts[z] += 1;
        }
        Ok((0..m)
            .map(|z| {
                if counts[z] == 0 {
                    0.0
                } else {
                    let n = counts[z] as f64;
                    let var = (sq[z] / n - (sums[z] / n).powi(2)).max(0.0);
                    var.sqrt()
                }
            })
            .collect())
    }
}

/// Block-average an (unmasked) macro field onto a k[0] x k[1] x k[2] grid of
/// epsilon-cells; the macro grid must tile evenly.
pub fn block_average(domain: &Domain, field: &[f64], k: [usize; 3]) -> Result<Vec<f64>> {
    let mut per = [1usize; 3];
    for a in 0..domain.d {
        if k[a] == 0 || domain.shape.extent(a) % k[a] != 0 {
            return Err(Error::Interpolation(format!(
                "macro grid extent {} on axis {a} does not tile into {} blocks",
                domain.shape.extent(a),
                k[a]
            )));
        }
        per[a] = domain.shape.extent(a) / k[a];
    }
    let m = k[0] * k[1] * k[2];
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for i in 0..domain.shape.len() {
        let c = domain.shape.coords(i);
        let z = c[0] / per[0] + k[0] * (c[1] / per[1] + k[1] * (c[2] / per[2]));
        sums[z] += field[i];
        counts[z] += 1;
    }
    Ok(sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect())
}

/// Bilinear/trilinear interpolation of a cell-centered field; clamped base
/// indices give linear extrapolation in the half-cell boundary strip.
pub fn interp_cell_centered(domain: &Domain, field: &[f64], x: &[f64; 3]) -> f64 {
    let d = domain.d;
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..d {
        let u = x[a] / domain.spacing[a] - 0.5;
        let max_base = domain.shape.extent(a).saturating_sub(2);
        let i0 = u.floor().clamp(0.0, max_base as f64) as usize;
        base[a] = i0;
        frac[a] = u - i0 as f64;
    }
    let corners = 1usize << d;
    let mut acc = 0.0;
    for corner in 0..corners {
        let mut w = 1.0;
        let mut c = [0usize; 3];
        for a in 0..d {
            let hi = (corner >> a) & 1;
            c[a] = base[a] + hi;
            w *= if hi == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        acc += w * field[domain.shape.index(c)];
    }
    acc
}

/// First-order two-scale reconstruction phi0 + eps phi1 sampled on the fine
/// perforated grid, with phi1(x, y) = -sum_k xi_v^k(y) d(phi0)/dx_k and
/// y = x/eps taken cell-exactly from the tiling.
pub fn reconstruct_first_order(
    phi0: &[f64],
    macro_domain: &Domain,
    xi_v: &CorrectorV,
    grid: &PerforatedGrid,
) -> Vec<f64> {
    let d = grid.domain.d;
    let n = grid.cell_n;
    let grads: Vec<Vec<f64>> = (0..d).map(|k| macro_domain.cell_gradient(phi0, k)).collect();
    let cell_shape = GridShape::cube(d, n);
    let mut out = vec![0.0; grid.domain.shape.len()];
    for i in grid.domain.pore_cells() {
        let x = grid.domain.center(i);
        let c = grid.domain.shape.coords(i);
        let r = cell_shape.index([c[0] % n, c[1] % n, if d == 3 { c[2] % n } else { 0 }]);
        let mut v = interp_cell_centered(macro_domain, phi0, &x);
        for k in 0..d {
            let dk = interp_cell_centered(macro_domain, &grads[k], &x);
            v -= grid.epsilon * xi_v.fields[k][r] * dk;
        }
        out[i] = v;
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub struct ComparePoint {
    pub time: f64,
    pub l2: f64,
    pub max: f64,
}

/// L2 and max norms of cell_average(phi_eps) - block_average(phi0) at
/// matched snapshot times.
pub fn compare_micro_macro(
    micro: &[(f64, Vec<f64>)],
    grid: &PerforatedGrid,
    macro_traj: &[(f64, Vec<f64>)],
    macro_domain: &Domain,
) -> Result<Vec<ComparePoint>> {
    if micro.len() != macro_traj.len() {
        return Err(Error::Interpolation(format!(
            "snapshot counts differ: {} micro vs {} macro",
            micro.len(),
            macro_traj.len()
        )));
    }
    let eps_vol = grid.epsilon.powi(grid.domain.d as i32);
    let mut out = Vec::with_capacity(micro.len());
    for ((tm, fm), (tmac, fmac)) in micro.iter().zip(macro_traj) {
        if (tm - tmac).abs() > 1e-9 * tm.abs().max(1.0) {
            return Err(Error::Interpolation(format!(
                "mismatched time grids: micro t={tm} vs macro t={tmac}"
            )));
        }
        let a = grid.cell_average(fm);
        let b = block_average(macro_domain, fmac, grid.k_cells)?;
        if a.len() != b.len() {
            return Err(Error::Interpolation(
                "epsilon-cell grids of the two trajectories differ".into(),
            ));
        }
        let mut l2 = 0.0;
        let mut mx = 0.0f64;
        for (ai, bi) in a.iter().zip(&b) {
            let dv = ai - bi;
            l2 += dv * dv * eps_vol;
            mx = mx.max(dv.abs());
        }
        out.push(ComparePoint {
            time: *tm,
            l2: l2.sqrt(),
            max: mx,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{ball_spec, build_cell, trivial_spec};
    use crate::corrector::solve_corrector_v;
    use crate::stepper::{step_ch, ChState, Scheme, StepperConfig};

    fn noflux() -> [[FaceBc; 2]; 3] {
        [[FaceBc::NoFlux; 2]; 3]
    }

    #[test]
    fn trivial_tiling_fills_the_box() {
        let cell = build_cell(&trivial_spec(2, 8)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        assert_eq!(grid.domain.shape.len(), 32 * 32);
        assert_eq!(grid.porosity(), 1.0);
        assert!(grid.domain.iface.is_empty());
    }

    #[test]
    fn ball_tiling_is_exact_and_counts_inclusions() {
        let cell = build_cell(&ball_spec(2, 16, &[0.5, 0.5], 0.3)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        assert_eq!(grid.porosity(), cell.theta1);
        // 4 x 4 tiling of one inclusion each
        let shape = &grid.domain.shape;
        let mut seen = vec![false; shape.len()];
        let mut components = 0;
        for start in 0..shape.len() {
            if grid.domain.pore[start] || seen[start] {
                continue;
            }
            components += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for axis in 0..2 {
                    for step in [-1isize, 1] {
                        if let Some(j) = shape.box_neighbor(i, axis, step) {
                            if !grid.domain.pore[j] && !seen[j] {
                                seen[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(components, 16);
    }

    #[test]
    fn incompatible_tilings_are_rejected() {
        let cell = build_cell(&trivial_spec(2, 8)).unwrap();
        // 1/eps not an integer
        assert!(matches!(
            build_perforated_domain(&cell, 0.3, &[1.0, 1.0], noflux()),
            Err(Error::Geometry(_))
        ));
        // eps = 1/3 but the length 0.5 does not tile
        assert!(matches!(
            build_perforated_domain(&cell, 1.0 / 3.0, &[0.5, 1.0], noflux()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn trivial_tiling_step_matches_homogeneous_node_for_node() {
        let cell = build_cell(&trivial_spec(2, 8)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let homog = Domain::unit_box(2, &[32, 32], FaceBc::NoFlux);
        let energy = BulkFreeEnergy::standard_well();
        let cfg = StepperConfig {
            dt: 2e-5,
            scheme: Scheme::SemiImplicitBiharmonic,
            stabilization: 2.0,
            lambda: 0.05,
            mobility: 1.0,
            solver_tol: 1e-12,
        };
        let h = 1.0 / 32.0;
        let phi: Vec<f64> = (0..homog.shape.len())
            .map(|i| {
                let c = homog.shape.coords(i);
                0.2 * (std::f64::consts::PI * (c[0] as f64 + 0.5) * h).cos()
                    * (std::f64::consts::PI * (c[1] as f64 + 0.5) * h).cos()
            })
            .collect();
        let mut micro = ChState::new(phi.clone(), &grid.domain);
        let mut macro_ = ChState::new(phi, &homog);
        for _ in 0..10 {
            step_ch(&mut micro, &grid.domain, &energy, &cfg).unwrap();
            step_ch(&mut macro_, &homog, &energy, &cfg).unwrap();
        }
        let mut worst = 0.0f64;
        for i in 0..micro.phi.len() {
            worst = worst.max((micro.phi[i] - macro_.phi[i]).abs());
        }
        assert!(worst <= 1e-12, "tiled vs homogeneous differ by {worst}");
    }

    #[test]
    fn micro_mass_is_conserved_with_closed_boundaries() {
        let cell = build_cell(&ball_spec(2, 8, &[0.5, 0.5], 0.3)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let energy = BulkFreeEnergy::standard_well();
        let cfg = StepperConfig {
            dt: 5e-6,
            scheme: Scheme::SemiImplicitBiharmonic,
            stabilization: 2.0,
            lambda: 0.05,
            mobility: 1.0,
            solver_tol: 1e-12,
        };
        let mut phi = vec![0.0; grid.domain.shape.len()];
        for i in grid.domain.pore_cells() {
            let x = grid.domain.center(i);
            phi[i] = 0.3 * (std::f64::consts::PI * x[0]).cos();
        }
        let mut state = ChState::new(phi, &grid.domain);
        let m0 = grid.domain.integrate(&state.phi);
        for _ in 0..100 {
            step_ch(&mut state, &grid.domain, &energy, &cfg).unwrap();
        }
        let m1 = grid.domain.integrate(&state.phi);
        assert!((m1 - m0).abs() <= 1e-10 * m0.abs().max(1.0));
    }

    #[test]
    fn wetting_data_scales_linearly_in_epsilon() {
        let cell = build_cell(&ball_spec(2, 8, &[0.5, 0.5], 0.3)).unwrap();
        let g1 = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux())
            .unwrap()
            .wetting_data(0.3, 0.1, |_, _| 2.0);
        let g2 = build_perforated_domain(&cell, 0.125, &[1.0, 1.0], noflux())
            .unwrap()
            .wetting_data(0.3, 0.1, |_, _| 2.0);
        let m1 = g1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let m2 = g2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((m1 - 2.0 * m2).abs() < 1e-14);
        assert!((m1 - 0.25 * 0.3 / 0.1 * 2.0).abs() < 1e-14);
    }

    #[test]
    fn cell_average_examples() {
        let cell = build_cell(&trivial_spec(2, 8)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let n = grid.domain.shape.len();
        // constant
        let avg = grid.cell_average(&vec![3.5; n]);
        assert!(avg.iter().all(|v| (v - 3.5).abs() < 1e-14));
        // linear field averages to epsilon-cell centers (midpoint exactness)
        let phi: Vec<f64> = (0..n).map(|i| grid.domain.center(i)[0]).collect();
        let avg = grid.cell_average(&phi);
        for (z, v) in avg.iter().enumerate() {
            let kx = z % 4;
            let expect = (kx as f64 + 0.5) * 0.25;
            assert!((v - expect).abs() < 1e-12);
        }
        // pore-scale checkerboard averages to zero
        let phi: Vec<f64> = (0..n)
            .map(|i| {
                let c = grid.domain.shape.coords(i);
                if (c[0] + c[1]) % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let avg = grid.cell_average(&phi);
        assert!(avg.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn reconstruction_matches_pointwise_formula() {
        let cell = build_cell(&ball_spec(2, 16, &[0.5, 0.5], 0.3)).unwrap();
        let xi = solve_corrector_v(&cell, 1e-10).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let macro_domain = Domain::unit_box(2, &[16, 16], FaceBc::NoFlux);
        // constant: reconstruction is the constant itself
        let rec = reconstruct_first_order(
            &vec![0.7; macro_domain.shape.len()],
            &macro_domain,
            &xi,
            &grid,
        );
        for i in grid.domain.pore_cells() {
            assert!((rec[i] - 0.7).abs() < 1e-13);
        }
        // linear phi0 = x1: phi0 - eps xi_v^1(x/eps)
        let phi0: Vec<f64> = (0..macro_domain.shape.len())
            .map(|i| macro_domain.center(i)[0])
            .collect();
        let rec = reconstruct_first_order(&phi0, &macro_domain, &xi, &grid);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let pore: Vec<usize> = grid.domain.pore_cells().collect();
        for _ in 0..10 {
            let i = pore[rng.random_range(0..pore.len())];
            let x = grid.domain.center(i);
            let c = grid.domain.shape.coords(i);
            let r = cell.shape.index([c[0] % 16, c[1] % 16, 0]);
            let expect = x[0] - 0.25 * xi.fields[0][r];
            assert!((rec[i] - expect).abs() < 1e-12, "at {c:?}");
        }
        // trivial cell: reconstruction leaves phi0 unchanged
        let triv = build_cell(&trivial_spec(2, 16)).unwrap();
        let xi0 = solve_corrector_v(&triv, 1e-10).unwrap();
        let grid0 = build_perforated_domain(&triv, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let rec = reconstruct_first_order(&phi0, &macro_domain, &xi0, &grid0);
        for i in 0..rec.len() {
            let x = grid0.domain.center(i);
            assert!((rec[i] - x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn local_equilibrium_diagnostic_vanishes_on_constants() {
        let cell = build_cell(&ball_spec(2, 8, &[0.5, 0.5], 0.3)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let energy = BulkFreeEnergy::from_wells(1.0, 2.0).unwrap();
        let phi = vec![2.0; grid.domain.shape.len()];
        let sd = grid.local_equilibrium_diagnostic(&phi, &energy, 0.05).unwrap();
        assert!(sd.iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn compare_requires_matching_times() {
        let cell = build_cell(&trivial_spec(2, 8)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let macro_domain = Domain::unit_box(2, &[16, 16], FaceBc::NoFlux);
        let micro = vec![(0.0, vec![0.0; grid.domain.shape.len()])];
        let macr = vec![(0.5, vec![0.0; macro_domain.shape.len()])];
        assert!(matches!(
            compare_micro_macro(&micro, &grid, &macr, &macro_domain),
            Err(Error::Interpolation(_))
        ));
    }

    #[test]
    fn identical_trivial_runs_compare_to_zero() {
        let cell = build_cell(&trivial_spec(2, 8)).unwrap();
        let grid = build_perforated_domain(&cell, 0.25, &[1.0, 1.0], noflux()).unwrap();
        let macro_domain = Domain::unit_box(2, &[32, 32], FaceBc::NoFlux);
        let phi: Vec<f64> = (0..macro_domain.shape.len())
            .map(|i| macro_domain.center(i)[0].cos())
            .collect();
        let micro = vec![(0.0, phi.clone()), (1.0, phi.clone())];
        let macr = vec![(0.0, phi.clone()), (1.0, phi)];
        let pts = compare_micro_macro(&micro, &grid, &macr, &macro_domain).unwrap();
        assert!(pts.iter().all(|p| p.l2 <= 1e-10 && p.max <= 1e-10));
    }
}
