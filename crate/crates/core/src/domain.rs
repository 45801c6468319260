//! Box-shaped computational domains: the macroscopic channel/box and the
//! perforated micro domain share one grid type.
//!
//! Cells are uniform per axis (possibly anisotropic), values live at cell
//! centers, and every pore cell knows what sits behind each of its 2d faces:
//! another pore cell, a pore-solid interface face carrying a wetting Neumann
//! datum, or a box boundary face with a declared condition. Fourth-order
//! operators use mirror ghosts for grad_n(lap phi) = 0.

use crate::cell::InterfaceFace;
use crate::error::{Error, Result};
use crate::grid::GridShape;
use serde::{Deserialize, Serialize};

/// Boundary condition on one box face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FaceBc {
    /// grad_n phi = 0, grad_n lap phi = 0; zero mass flux follows.
    NoFlux,
    /// prescribed total normal flux 0 (channel exit).
    ZeroFlux,
    /// prescribed total normal flux n.J = `flux` (n outward).
    Inflow { flux: f64 },
    /// wetting wall: grad_n phi = g, grad_n lap phi = 0; the mass flux
    /// through the wall is whatever the ghost values produce.
    Wall { g: f64 },
    /// periodic wrap to the opposite face (unmasked domains only).
    Periodic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Pore(u32),
    Interface(u32),
    Boundary,
    Vacant,
}

#[derive(Clone, Debug)]
pub struct Domain {
    pub d: usize,
    pub shape: GridShape,
    pub spacing: [f64; 3],
    pub lengths: [f64; 3],
    /// bc[axis][side], side 0 = low face, 1 = high face
    pub bc: [[FaceBc; 2]; 3],
    /// true = pore; all-true for unperforated domains
    pub pore: Vec<bool>,
    pub iface: Vec<InterfaceFace>,
    /// prescribed grad_n phi per interface face (n pointing into the solid)
    pub iface_g: Vec<f64>,
    slots: Vec<[Slot; 6]>,
    pore_cells: Vec<u32>,
}

impl Domain {
    pub fn new(
        d: usize,
        dims: &[usize],
        lengths: &[f64],
        bc: [[FaceBc; 2]; 3],
        mask: Option<(&[bool], &[u16])>,
    ) -> Result<Self> {
        if dims.len() != d || lengths.len() != d {
            return Err(Error::Parameter("grid dims/lengths dimension mismatch".into()));
        }
        if dims.iter().any(|n| *n == 0) || lengths.iter().any(|l| *l <= 0.0) {
            return Err(Error::Parameter("grid sizes and lengths must be positive".into()));
        }
        let shape = GridShape::new(d, dims);
        let mut spacing = [1.0; 3];
        let mut lens = [1.0; 3];
        for a in 0..d {
            spacing[a] = lengths[a] / dims[a] as f64;
            lens[a] = lengths[a];
        }
        for a in 0..d {
            let low = matches!(bc[a][0], FaceBc::Periodic);
            let high = matches!(bc[a][1], FaceBc::Periodic);
            if low != high {
                return Err(Error::Parameter(format!(
                    "periodic condition on axis {a} must apply to both faces"
                )));
            }
            if low && mask.is_some() {
                return Err(Error::Parameter(
                    "periodic faces are not supported on masked domains".into(),
                ));
            }
        }
        let pore = match mask {
            Some((m, _)) => {
                if m.len() != shape.len() {
                    return Err(Error::Parameter("mask has wrong length".into()));
                }
                m.to_vec()
            }
            None => vec![true; shape.len()],
        };

        let mut slots = vec![[Slot::Vacant; 6]; shape.len()];
        let mut iface = Vec::new();
        let mut pore_cells = Vec::new();
        for i in 0..shape.len() {
            if !pore[i] {
                continue;
            }
            pore_cells.push(i as u32);
            for axis in 0..d {
                for (s, step) in [(0usize, -1isize), (1usize, 1isize)] {
                    let slot = 2 * axis + s;
                    let periodic = matches!(bc[axis][s], FaceBc::Periodic);
                    let j = if periodic {
                        Some(shape.wrap_neighbor(i, axis, step))
                    } else {
                        shape.box_neighbor(i, axis, step)
                    };
                    slots[i][slot] = match j {
                        Some(j) if pore[j] => Slot::Pore(j as u32),
                        Some(j) => {
                            let class = mask.map(|(_, c)| c[j]).unwrap_or(1).max(1);
                            iface.push(InterfaceFace {
                                pore_cell: i,
                                axis: axis as u8,
                                side: if s == 1 { 1 } else { -1 },
                                class,
                            });
                            Slot::Interface((iface.len() - 1) as u32)
                        }
                        None => Slot::Boundary,
                    };
                }
            }
        }
        let n_iface = iface.len();
        Ok(Domain {
            d,
            shape,
            spacing,
            lengths: lens,
            bc,
            pore,
            iface,
            iface_g: vec![0.0; n_iface],
            slots,
            pore_cells,
        })
    }

    /// Unmasked unit box [0,1]^d with the same condition on every face.
    pub fn unit_box(d: usize, dims: &[usize], bc_all: FaceBc) -> Self {
        Self::new(d, dims, &vec![1.0; d], [[bc_all; 2]; 3], None).unwrap()
    }

    pub fn set_interface_neumann(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.iface.len() {
            return Err(Error::Parameter(format!(
                "expected {} interface values, got {}",
                self.iface.len(),
                values.len()
            )));
        }
        self.iface_g = values;
        Ok(())
    }

    #[inline]
    pub fn pore_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.pore_cells.iter().map(|&i| i as usize)
    }

    pub fn pore_count(&self) -> usize {
        self.pore_cells.len()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d).map(|a| self.spacing[a]).product()
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.d).fold(f64::INFINITY, |m, a| m.min(self.spacing[a]))
    }

    /// Cell-center coordinates of cell `i`.
    pub fn center(&self, i: usize) -> [f64; 3] {
        let c = self.shape.coords(i);
        let mut x = [0.0; 3];
        for a in 0..self.d {
            x[a] = (c[a] as f64 + 0.5) * self.spacing[a];
        }
        x
    }

    /// int_pore phi dV.
    pub fn integrate(&self, phi: &[f64]) -> f64 {
        let vol = self.cell_volume();
        self.pore_cells().map(|i| phi[i]).sum::<f64>() * vol
    }

    pub fn pore_mean(&self, phi: &[f64]) -> f64 {
        self.pore_cells().map(|i| phi[i]).sum::<f64>() / self.pore_count() as f64
    }

    /// Discrete Laplacian including the inhomogeneous Neumann data on wall
    /// and interface faces (ghost = phi + h g).
    pub fn laplacian(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; phi.len()];
        for &iu in &self.pore_cells {
            let i = iu as usize;
            let mut acc = 0.0;
            for axis in 0..self.d {
                let h = self.spacing[axis];
                let inv_h2 = 1.0 / (h * h);
                for s in 0..2 {
                    match self.slots[i][2 * axis + s] {
                        Slot::Pore(j) => acc += (phi[j as usize] - phi[i]) * inv_h2,
                        Slot::Interface(f) => acc += self.iface_g[f as usize] / h,
                        Slot::Boundary => {
                            if let FaceBc::Wall { g } = self.bc[axis][s] {
                                acc += g / h;
                            }
                        }
                        Slot::Vacant => {}
                    }
                }
            }
            out[i] = acc;
        }
        out
    }

    /// y = -lap0 x: homogeneous operator (mirror ghosts everywhere), the
    /// implicit-solve building block.
    pub fn neg_lap0(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &iu in &self.pore_cells {
            let i = iu as usize;
            let mut acc = 0.0;
            for axis in 0..self.d {
                let inv_h2 = 1.0 / (self.spacing[axis] * self.spacing[axis]);
                for s in 0..2 {
                    if let Slot::Pore(j) = self.slots[i][2 * axis + s] {
                        acc += (x[i] - x[j as usize]) * inv_h2;
                    }
                }
            }
            y[i] = acc;
        }
    }

    /// y = -sum_a coef[a] d^2 x / dx_a^2 with mirror ghosts; coef >= 0 keeps
    /// the operator positive semidefinite.
    pub fn aniso_neg_div(&self, coef: &[f64; 3], x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &iu in &self.pore_cells {
            let i = iu as usize;
            let mut acc = 0.0;
            for axis in 0..self.d {
                if coef[axis] == 0.0 {
                    continue;
                }
                let w = coef[axis] / (self.spacing[axis] * self.spacing[axis]);
                for s in 0..2 {
                    if let Slot::Pore(j) = self.slots[i][2 * axis + s] {
                        acc += (x[i] - x[j as usize]) * w;
                    }
                }
            }
            y[i] = acc;
        }
    }

    /// (lambda^2 / 2) sum_faces ((phi_j - phi_i)/h)^2 dV over interior
    /// pore-pore faces (each face once).
    pub fn gradient_energy(&self, phi: &[f64]) -> f64 {
        let vol = self.cell_volume();
        let mut e = 0.0;
        for &iu in &self.pore_cells {
            let i = iu as usize;
            for axis in 0..self.d {
                if let Slot::Pore(j) = self.slots[i][2 * axis + 1] {
                    let g = (phi[j as usize] - phi[i]) / self.spacing[axis];
                    e += g * g * vol;
                }
            }
        }
        0.5 * e
    }

    /// Visit every face of every pore cell: callback(cell, axis, side,
    /// slot-kind). Side 0 = low, 1 = high.
    #[inline]
    pub(crate) fn for_each_pore_cell_face<F: FnMut(usize, usize, usize, SlotView)>(
        &self,
        mut f: F,
    ) {
        for &iu in &self.pore_cells {
            let i = iu as usize;
            for axis in 0..self.d {
                for s in 0..2 {
                    let view = match self.slots[i][2 * axis + s] {
                        Slot::Pore(j) => SlotView::Pore(j as usize),
                        Slot::Interface(k) => SlotView::Interface(k as usize),
                        Slot::Boundary => SlotView::Boundary(self.bc[axis][s]),
                        Slot::Vacant => continue,
                    };
                    f(i, axis, s, view);
                }
            }
        }
    }

    /// Cell-centered derivative along `axis`: central where both neighbors
    /// exist, one-sided next to boundaries/solid, zero when isolated.
    pub fn cell_gradient(&self, phi: &[f64], axis: usize) -> Vec<f64> {
        let h = self.spacing[axis];
        let mut out = vec![0.0; phi.len()];
        for &iu in &self.pore_cells {
            let i = iu as usize;
            let lo = match self.slots[i][2 * axis] {
                Slot::Pore(j) => Some(j as usize),
                _ => None,
            };
            let hi = match self.slots[i][2 * axis + 1] {
                Slot::Pore(j) => Some(j as usize),
                _ => None,
            };
            out[i] = match (lo, hi) {
                (Some(l), Some(r)) => (phi[r] - phi[l]) / (2.0 * h),
                (Some(l), None) => (phi[i] - phi[l]) / h,
                (None, Some(r)) => (phi[r] - phi[i]) / h,
                (None, None) => 0.0,
            };
        }
        out
    }

    /// Conjugate gradients for a symmetric positive definite operator given
    /// as `apply(x, y)`, restricted to pore cells. Returns x with
    /// |Ax - b| <= tol |b| in the pore-cell L2 norm.
    pub fn cg_solve(
        &self,
        apply: &dyn Fn(&[f64], &mut [f64]),
        b: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, usize)> {
        let n = self.shape.len();
        let dot = |a: &[f64], c: &[f64]| -> f64 {
            self.pore_cells
                .iter()
                .map(|&i| a[i as usize] * c[i as usize])
                .sum()
        };
        let b_norm = dot(b, b).sqrt();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok((x, 0));
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = dot(&r, &r);
        let mut it = 0;
        while rr.sqrt() > tol * b_norm {
            if it >= max_iter {
                return Err(Error::Convergence(format!(
                    "implicit solve hit the {max_iter}-iteration cap (residual {:.3e})",
                    rr.sqrt() / b_norm
                )));
            }
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Convergence(
                    "implicit operator lost positive definiteness".into(),
                ));
            }
            let alpha = rr / pap;
            for &iu in &self.pore_cells {
                let i = iu as usize;
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_new = dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for &iu in &self.pore_cells {
                let i = iu as usize;
                p[i] = r[i] + beta * p[i];
            }
            it += 1;
        }
        Ok((x, it))
    }
}

/// What lies behind a pore-cell face.
#[derive(Clone, Copy, Debug)]
pub(crate) enum SlotView {
    Pore(usize),
    Interface(usize),
    Boundary(FaceBc),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_of_linear_field_vanishes_inside() {
        let d = Domain::unit_box(2, &[16, 16], FaceBc::Periodic);
        // periodic sin is an eigenfunction; a constant maps to zero
        let phi = vec![3.25; d.shape.len()];
        let lap = d.laplacian(&phi);
        assert!(lap.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn periodic_laplacian_eigenfunction() {
        let n = 64;
        let d = Domain::unit_box(2, &[n, n], FaceBc::Periodic);
        let h = 1.0 / n as f64;
        let two_pi = 2.0 * std::f64::consts::PI;
        let phi: Vec<f64> = (0..d.shape.len())
            .map(|i| {
                let c = d.shape.coords(i);
                (two_pi * (c[0] as f64 + 0.5) * h).sin()
            })
            .collect();
        let lap = d.laplacian(&phi);
        let eig = -(2.0 - 2.0 * (two_pi * h).cos()) / (h * h);
        for i in 0..phi.len() {
            assert!((lap[i] - eig * phi[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn wall_datum_enters_laplacian() {
        let mut bc = [[FaceBc::NoFlux; 2]; 3];
        bc[1][1] = FaceBc::Wall { g: 2.0 };
        let d = Domain::new(2, &[8, 8], &[1.0, 1.0], bc, None).unwrap();
        let phi = vec![0.0; d.shape.len()];
        let lap = d.laplacian(&phi);
        let h = d.spacing[1];
        for i in 0..d.shape.len() {
            let c = d.shape.coords(i);
            if c[1] == 7 {
                assert!((lap[i] - 2.0 / h).abs() < 1e-12);
            } else {
                assert_eq!(lap[i], 0.0);
            }
        }
    }

    #[test]
    fn mismatched_periodic_faces_rejected() {
        let mut bc = [[FaceBc::NoFlux; 2]; 3];
        bc[0][0] = FaceBc::Periodic;
        assert!(Domain::new(2, &[8, 8], &[1.0, 1.0], bc, None).is_err());
    }

    #[test]
    fn cg_solves_shifted_laplacian() {
        let d = Domain::unit_box(2, &[24, 24], FaceBc::NoFlux);
        let apply = |x: &[f64], y: &mut [f64]| {
            d.neg_lap0(x, y);
            for i in 0..x.len() {
                y[i] = x[i] + 0.37 * y[i];
            }
        };
        let b: Vec<f64> = (0..d.shape.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let (x, _) = d.cg_solve(&apply, &b, 1e-12, 10_000).unwrap();
        let mut ax = vec![0.0; b.len()];
        apply(&x, &mut ax);
        let res: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum();
        let bn: f64 = b.iter().map(|v| v * v).sum();
        assert!(res.sqrt() <= 1e-11 * bn.sqrt());
    }
}
