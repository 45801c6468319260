//! Periodic Poisson solves on the pore region of a reference cell.
//!
//! The discrete operator is the 5/7-point Laplacian restricted to pore
//! cells with periodic wrap; faces into solid cells carry no flux (mirror
//! ghosts), which is the natural discretization of the cell problems' Neumann
//! interface conditions. The operator is symmetric positive semidefinite
//! with kernel = constants, so every solve projects onto zero mean and the
//! data must satisfy the Fredholm compatibility condition.

use crate::cell::ReferenceCell;
use crate::error::{Error, Result};

const NO_NEIGHBOR: u32 = u32::MAX;

/// Iteration cap factor: at most `50 * n^d` CG iterations.
const MAX_ITER_FACTOR: usize = 50;

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Precomputed masked periodic Laplacian on the pore cells of a cell.
pub struct CellLaplacian<'a> {
    pub cell: &'a ReferenceCell,
    inv_h2: f64,
    /// per cell: neighbor index per (axis, side) or NO_NEIGHBOR when the
    /// neighbor is solid; row is all NO_NEIGHBOR for solid cells
    neighbors: Vec<[u32; 6]>,
    pore_cells: Vec<u32>,
}

impl<'a> CellLaplacian<'a> {
    pub fn new(cell: &'a ReferenceCell) -> Self {
        let h = cell.spacing();
        let mut neighbors = vec![[NO_NEIGHBOR; 6]; cell.shape.len()];
        let mut pore_cells = Vec::new();
        for i in 0..cell.shape.len() {
            if !cell.pore[i] {
                continue;
            }
            pore_cells.push(i as u32);
            for axis in 0..cell.d {
                for (slot, step) in [(2 * axis, -1isize), (2 * axis + 1, 1)] {
                    let j = cell.shape.wrap_neighbor(i, axis, step);
                    if cell.pore[j] {
                        neighbors[i][slot] = j as u32;
                    }
                }
            }
        }
        CellLaplacian {
            cell,
            inv_h2: 1.0 / (h * h),
            neighbors,
            pore_cells,
        }
    }

    pub fn pore_count(&self) -> usize {
        self.pore_cells.len()
    }

    /// y = A x with A = -lap_h on pore cells (zero on solid).
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &iu in &self.pore_cells {
            let i = iu as usize;
            let nb = &self.neighbors[i];
            let xi = x[i];
            let mut acc = 0.0;
            for &j in nb.iter().take(2 * self.cell.d) {
                if j != NO_NEIGHBOR {
                    acc += xi - x[j as usize];
                }
            }
            y[i] = acc * self.inv_h2;
        }
    }

    fn project_zero_mean(&self, x: &mut [f64]) {
        let mean: f64 =
            self.pore_cells.iter().map(|&i| x[i as usize]).sum::<f64>() / self.pore_count() as f64;
        for &i in &self.pore_cells {
            x[i as usize] -= mean;
        }
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        self.pore_cells
            .iter()
            .map(|&i| a[i as usize] * b[i as usize])
            .sum()
    }

    /// Conjugate gradients on the zero-mean subspace. Returns the zero-mean
    /// solution of A x = b along with iteration statistics.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        let n = self.cell.shape.len();
        assert_eq!(b.len(), n);
        let mut rhs = b.to_vec();
        for i in 0..n {
            if !self.cell.pore[i] {
                rhs[i] = 0.0;
            }
        }
        self.project_zero_mean(&mut rhs);
        let b_norm = self.dot(&rhs, &rhs).sqrt();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok((
                x,
                SolveStats {
                    iterations: 0,
                    rel_residual: 0.0,
                },
            ));
        }

        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut ap = vec![0.0; n];
        let mut rr = self.dot(&r, &r);
        let max_iter = MAX_ITER_FACTOR * n;
        let mut it = 0;
        while rr.sqrt() > tol * b_norm {
            if it >= max_iter {
                return Err(Error::Convergence(format!(
                    "cell Poisson CG hit the {max_iter}-iteration cap (residual {:.3e})",
                    rr.sqrt() / b_norm
                )));
            }
            self.apply(&p, &mut ap);
            let pap = self.dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Convergence(
                    "cell Poisson CG lost positive definiteness".into(),
                ));
            }
            let alpha = rr / pap;
            for &iu in &self.pore_cells {
                let i = iu as usize;
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            // keep iterates on the zero-mean subspace (kernel of A)
            self.project_zero_mean(&mut x);
            self.project_zero_mean(&mut r);
            let rr_new = self.dot(&r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for &iu in &self.pore_cells {
                let i = iu as usize;
                p[i] = r[i] + beta * p[i];
            }
            it += 1;
        }

        // honest residual from a fresh apply
        self.apply(&x, &mut ap);
        let mut res2 = 0.0;
        for &iu in &self.pore_cells {
            let i = iu as usize;
            let d = rhs[i] - ap[i];
            res2 += d * d;
        }
        Ok((
            x,
            SolveStats {
                iterations: it,
                rel_residual: res2.sqrt() / b_norm,
            },
        ))
    }

    /// RHS for the weak form  a(u, psi) = sum_faces (g.n)_f (psi_j - psi_i) h^{d-1},
    /// with `face_data(axis, i, j)` returning g.n on the pore-pore face from
    /// low cell i to high cell j (n = +e_axis, periodic wrap included).
    pub fn rhs_from_face_data(&self, face_data: impl Fn(usize, usize, usize) -> f64) -> Vec<f64> {
        let n = self.cell.shape.len();
        let h = self.cell.spacing();
        let mut b = vec![0.0; n];
        for &iu in &self.pore_cells {
            let i = iu as usize;
            for axis in 0..self.cell.d {
                let j = self.neighbors[i][2 * axis + 1];
                if j == NO_NEIGHBOR {
                    continue;
                }
                let g = face_data(axis, i, j as usize);
                b[i] -= g / h;
                b[j as usize] += g / h;
            }
        }
        b
    }

    /// Discrete Dirichlet energy sum_faces ((u_j - u_i)/h)^2 h^d over
    /// pore-pore faces.
    pub fn dirichlet_energy(&self, u: &[f64]) -> f64 {
        let h = self.cell.spacing();
        let hd = h.powi(self.cell.d as i32);
        let mut e = 0.0;
        for &iu in &self.pore_cells {
            let i = iu as usize;
            for axis in 0..self.cell.d {
                let j = self.neighbors[i][2 * axis + 1];
                if j != NO_NEIGHBOR {
                    let g = (u[j as usize] - u[i]) / h;
                    e += g * g * hd;
                }
            }
        }
        e
    }

    /// Face-count volume per axis: int_Y1 dy quadratured over the dual
    /// volumes of the axis-a pore-pore faces. This undercounts theta1 by
    /// O(h) next to the interface and is exactly the constant-gradient
    /// energy of the discrete cell problem, so tensors assembled with it
    /// are the effective coefficients of the masked stencil itself.
    pub fn face_volume(&self, axis: usize) -> f64 {
        let hd = self.cell.spacing().powi(self.cell.d as i32);
        let mut count = 0usize;
        for &iu in &self.pore_cells {
            if self.neighbors[iu as usize][2 * axis + 1] != NO_NEIGHBOR {
                count += 1;
            }
        }
        count as f64 * hd
    }

    /// Per-axis integral of du/dy_a over the pore region, evaluated with the
    /// same face gradients that define the discrete energy. Using this
    /// quadrature the effective tensors inherit the variational bounds
    /// exactly (D = diag(face volumes) - Gram matrix of corrector
    /// gradients).
    pub fn gradient_integral(&self, u: &[f64]) -> [f64; 3] {
        let h = self.cell.spacing();
        let hd = h.powi(self.cell.d as i32);
        let mut out = [0.0; 3];
        for &iu in &self.pore_cells {
            let i = iu as usize;
            for axis in 0..self.cell.d {
                let j = self.neighbors[i][2 * axis + 1];
                if j != NO_NEIGHBOR {
                    out[axis] += (u[j as usize] - u[i]) / h * hd;
                }
            }
        }
        out
    }
}

/// Solve  -lap u = source  on the pore region with prescribed interface
/// fluxes n.grad(u) (one value per interface face, n pointing into the
/// solid), periodic outer faces and zero mean.
pub fn solve_cell_poisson(
    cell: &ReferenceCell,
    source: &[f64],
    iface_flux: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveStats)> {
    if source.len() != cell.shape.len() {
        return Err(Error::Parameter("source field has wrong length".into()));
    }
    if iface_flux.len() != cell.interface.len() {
        return Err(Error::Parameter(format!(
            "expected {} interface flux values, got {}",
            cell.interface.len(),
            iface_flux.len()
        )));
    }
    let h = cell.spacing();
    let hd = h.powi(cell.d as i32);
    let face_area = h.powi(cell.d as i32 - 1);

    // Fredholm compatibility: int source + int_iface flux = 0
    let mut total = 0.0;
    let mut scale = 0.0;
    for i in 0..cell.shape.len() {
        if cell.pore[i] {
            total += source[i] * hd;
            scale += source[i].abs() * hd;
        }
    }
    for q in iface_flux {
        total += q * face_area;
        scale += q.abs() * face_area;
    }
    if total.abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::Solvability(format!(
            "incompatible data: int source + int flux = {total:.6e}"
        )));
    }

    let lap = CellLaplacian::new(cell);
    let mut b = source.to_vec();
    for i in 0..b.len() {
        if !cell.pore[i] {
            b[i] = 0.0;
        }
    }
    for (f, q) in cell.interface.iter().zip(iface_flux) {
        b[f.pore_cell] += q / h;
    }
    lap.solve(&b, tol)
}
