//! Corrector cell problems on the pore region and the effective tensors
//! assembled from them.
//!
//! xi_v^k solves (weak form, periodic zero-mean over Y1)
//!     int_Y1 grad(xi_v^k) . grad(psi) = int_Y1 e_k . grad(psi),
//! the standard elliptic corrector. xi_w^k has the same left-hand side with
//! data ((1 + lambda^2 m) e_k - lambda^2 m r grad(xi_v^k)), where
//! r = f(phi_0)/(f'(phi_0) phi_0) enters only as a scalar factor. Since the
//! data is affine in r, xi_w^k = chi_a^k + r chi_b^k with two r-independent
//! unit solves; the macroscopic solver recombines them pointwise.

use crate::cell::ReferenceCell;
use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::poisson::{CellLaplacian, SolveStats};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct CorrectorV {
    /// xi_v^k for k = 0..d, each on the full cell grid (zero on solid).
    pub fields: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct CorrectorWUnits {
    /// r-independent unit: data (1 + lambda^2 m) e_k
    pub chi_a: Vec<Vec<f64>>,
    /// r-coefficient unit: data -lambda^2 m grad(xi_v^k)
    pub chi_b: Vec<Vec<f64>>,
    pub lambda: f64,
    pub mobility: f64,
    pub residuals_a: Vec<f64>,
    pub residuals_b: Vec<f64>,
}

/// Which printed form of M_v to assemble. The appendix form (gradient term
/// only) is the default: it is the one under which the trivial cell reduces
/// the upscaled equation to the homogeneous Cahn-Hilliard equation. The
/// theorem form adds m theta1 delta_ik.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MvVariant {
    #[default]
    Appendix,
    Theorem,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EffectiveTensors {
    pub theta1: f64,
    /// Face-quadrature values of (1/|Y|) int_Y1 delta_aa dy per axis: the
    /// coefficient the theta1 f'(phi0) M term takes under the same
    /// quadrature as the corrector integrals. Equals theta1 on the trivial
    /// cell and along layer directions; differs from it by O(h) next to
    /// staircase interfaces.
    pub theta_flux: [f64; 3],
    /// porous media correction tensor D
    pub d_tensor: SmallMat,
    pub m_v: SmallMat,
    pub mv_variant: MvVariant,
    /// M_w(x) = m_w_a + r(phi_0(x)) m_w_b
    pub m_w_a: SmallMat,
    pub m_w_b: SmallMat,
    pub mobility: f64,
    pub lambda: f64,
}

pub fn solve_corrector_v(cell: &ReferenceCell, tol: f64) -> Result<CorrectorV> {
    let lap = CellLaplacian::new(cell);
    let mut fields = Vec::with_capacity(cell.d);
    let mut residuals = Vec::with_capacity(cell.d);
    for k in 0..cell.d {
        let b = lap.rhs_from_face_data(|axis, _, _| if axis == k { 1.0 } else { 0.0 });
        let (xi, stats) = lap.solve(&b, tol)?;
        fields.push(xi);
        residuals.push(stats.rel_residual);
    }
    Ok(CorrectorV { fields, residuals })
}

pub fn solve_corrector_w_units(
    cell: &ReferenceCell,
    xi_v: &CorrectorV,
    lambda: f64,
    mobility: f64,
    tol: f64,
) -> Result<CorrectorWUnits> {
    if xi_v.fields.len() != cell.d {
        return Err(Error::Parameter("corrector/cell dimension mismatch".into()));
    }
    let lap = CellLaplacian::new(cell);
    let h = cell.spacing();
    let l2m = lambda * lambda * mobility;
    let mut chi_a = Vec::with_capacity(cell.d);
    let mut chi_b = Vec::with_capacity(cell.d);
    let mut residuals_a = Vec::with_capacity(cell.d);
    let mut residuals_b = Vec::with_capacity(cell.d);
    for k in 0..cell.d {
        let ba = lap.rhs_from_face_data(|axis, _, _| if axis == k { 1.0 + l2m } else { 0.0 });
        let (a, sa) = lap.solve(&ba, tol)?;
        let xi = &xi_v.fields[k];
        let bb = lap.rhs_from_face_data(|_, i, j| -l2m * (xi[j] - xi[i]) / h);
        let (b, sb) = lap.solve(&bb, tol)?;
        chi_a.push(a);
        chi_b.push(b);
        residuals_a.push(sa.rel_residual);
        residuals_b.push(sb.rel_residual);
    }
    Ok(CorrectorWUnits {
        chi_a,
        chi_b,
        lambda,
        mobility,
        residuals_a,
        residuals_b,
    })
}

impl CorrectorWUnits {
    /// xi_w^k at a fixed ratio value r.
    pub fn recombine(&self, r: f64) -> Vec<Vec<f64>> {
        self.chi_a
            .iter()
            .zip(&self.chi_b)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + r * y).collect())
            .collect()
    }

    /// M_w reconstructed at a fixed ratio value: M_w_a + r M_w_b.
    pub fn mw_at(&self, cell: &ReferenceCell, r: f64) -> SmallMat {
        let (a, b) = effective_mw(cell, self, self.mobility);
        a.add(&b.scale(r))
    }
}

/// Direct solve of the xi_w problem with the ratio frozen at a constant r;
/// the independent route against which the affine recombination is checked.
pub fn solve_corrector_w_fixed_r(
    cell: &ReferenceCell,
    xi_v: &CorrectorV,
    lambda: f64,
    mobility: f64,
    r: f64,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, Vec<SolveStats>)> {
    let lap = CellLaplacian::new(cell);
    let h = cell.spacing();
    let l2m = lambda * lambda * mobility;
    let mut fields = Vec::with_capacity(cell.d);
    let mut stats = Vec::with_capacity(cell.d);
    for k in 0..cell.d {
        let xi = &xi_v.fields[k];
        let b = lap.rhs_from_face_data(|axis, i, j| {
            let unit = if axis == k { 1.0 + l2m } else { 0.0 };
            unit - l2m * r * (xi[j] - xi[i]) / h
        });
        let (w, s) = lap.solve(&b, tol)?;
        fields.push(w);
        stats.push(s);
    }
    Ok((fields, stats))
}

/// d_ik = (1/|Y|) int_Y1 (delta_ik - d(xi_v^k)/dy_i) dy  (|Y| = 1).
///
/// Both terms use the face-based quadrature of the discrete energy, so D is
/// symmetric, positive semidefinite below the porosity bound, and equals the
/// large-scale diffusion tensor of the masked stencil on tilings of this
/// cell. On the trivial cell and along unbroken directions (slabs) the
/// delta term still integrates to exactly theta1.
pub fn effective_d(cell: &ReferenceCell, xi_v: &CorrectorV) -> SmallMat {
    let lap = CellLaplacian::new(cell);
    let mut d = SmallMat::zeros(cell.d);
    for k in 0..cell.d {
        d.set(k, k, lap.face_volume(k));
        let g = lap.gradient_integral(&xi_v.fields[k]);
        for i in 0..cell.d {
            d.set(i, k, d.get(i, k) - g[i]);
        }
    }
    d
}

/// Appendix form: m^v_ik = (m/|Y|) int_Y1 d(xi_v^k)/dy_i.
/// Theorem form adds the m theta1 delta_ik term with the opposite gradient
/// sign, i.e. m theta1 I - (appendix form).
pub fn effective_mv(
    cell: &ReferenceCell,
    xi_v: &CorrectorV,
    mobility: f64,
    variant: MvVariant,
) -> SmallMat {
    let lap = CellLaplacian::new(cell);
    let mut g_mat = SmallMat::zeros(cell.d);
    for k in 0..cell.d {
        let g = lap.gradient_integral(&xi_v.fields[k]);
        for i in 0..cell.d {
            g_mat.set(i, k, mobility * g[i]);
        }
    }
    match variant {
        MvVariant::Appendix => g_mat,
        MvVariant::Theorem => {
            let mut m = SmallMat::zeros(cell.d);
            for a in 0..cell.d {
                m.set(a, a, mobility * lap.face_volume(a));
            }
            m.sub(&g_mat)
        }
    }
}

/// m^w_ik = (1/|Y|) int_Y1 m (delta_ik - d(xi_w^k)/dy_i) for one set of
/// xi_w fields.
pub fn effective_mw_single(cell: &ReferenceCell, xi_w: &[Vec<f64>], mobility: f64) -> SmallMat {
    let lap = CellLaplacian::new(cell);
    let mut m = SmallMat::zeros(cell.d);
    for a in 0..cell.d {
        m.set(a, a, mobility * lap.face_volume(a));
    }
    for (k, field) in xi_w.iter().enumerate() {
        let g = lap.gradient_integral(field);
        for i in 0..cell.d {
            m.set(i, k, m.get(i, k) - mobility * g[i]);
        }
    }
    m
}

/// Affine pair (M_w_a, M_w_b) with M_w(x) = M_w_a + r(phi_0(x)) M_w_b.
pub fn effective_mw(
    cell: &ReferenceCell,
    units: &CorrectorWUnits,
    mobility: f64,
) -> (SmallMat, SmallMat) {
    let lap = CellLaplacian::new(cell);
    let mut a = SmallMat::zeros(cell.d);
    for ax in 0..cell.d {
        a.set(ax, ax, mobility * lap.face_volume(ax));
    }
    let mut b = SmallMat::zeros(cell.d);
    for k in 0..cell.d {
        let ga = lap.gradient_integral(&units.chi_a[k]);
        let gb = lap.gradient_integral(&units.chi_b[k]);
        for i in 0..cell.d {
            a.set(i, k, a.get(i, k) - mobility * ga[i]);
            b.set(i, k, -mobility * gb[i]);
        }
    }
    (a, b)
}

/// Solve both corrector families and assemble every effective tensor.
pub fn assemble_tensors(
    cell: &ReferenceCell,
    lambda: f64,
    mobility: f64,
    tol: f64,
    variant: MvVariant,
) -> Result<(EffectiveTensors, CorrectorV, CorrectorWUnits)> {
    if mobility <= 0.0 {
        return Err(Error::Parameter(format!("mobility must be > 0, got {mobility}")));
    }
    if lambda < 0.0 {
        return Err(Error::Parameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let xi_v = solve_corrector_v(cell, tol)?;
    let units = solve_corrector_w_units(cell, &xi_v, lambda, mobility, tol)?;
    let (m_w_a, m_w_b) = effective_mw(cell, &units, mobility);
    let lap = CellLaplacian::new(cell);
    let mut theta_flux = [0.0; 3];
    for a in 0..cell.d {
        theta_flux[a] = lap.face_volume(a);
    }
    let tensors = EffectiveTensors {
        theta1: cell.theta1,
        theta_flux,
        d_tensor: effective_d(cell, &xi_v),
        m_v: effective_mv(cell, &xi_v, mobility, variant),
        mv_variant: variant,
        m_w_a,
        m_w_b,
        mobility,
        lambda,
    };
    Ok((tensors, xi_v, units))
}

/// On-disk layout of tensors.json (full-precision row-major matrices).
#[derive(Serialize, Deserialize)]
struct TensorsFile {
    theta1: f64,
    theta_flux: Vec<f64>,
    lambda: f64,
    mobility: f64,
    mv_variant: MvVariant,
    d: Vec<Vec<f64>>,
    m_v: Vec<Vec<f64>>,
    m_w_a: Vec<Vec<f64>>,
    m_w_b: Vec<Vec<f64>>,
}

impl EffectiveTensors {
    pub fn to_json_string(&self) -> String {
        let d = self.d_tensor.d;
        let file = TensorsFile {
            theta1: self.theta1,
            theta_flux: self.theta_flux[..d].to_vec(),
            lambda: self.lambda,
            mobility: self.mobility,
            mv_variant: self.mv_variant,
            d: self.d_tensor.rows(),
            m_v: self.m_v.rows(),
            m_w_a: self.m_w_a.rows(),
            m_w_b: self.m_w_b.rows(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("tensors serialize");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: TensorsFile = serde_json::from_str(text)
            .map_err(|e| Error::Parameter(format!("bad tensor file: {e}")))?;
        let dim = file.d.len();
        if dim != 2 && dim != 3 {
            return Err(Error::Parameter("tensor file dimension must be 2 or 3".into()));
        }
        for m in [&file.d, &file.m_v, &file.m_w_a, &file.m_w_b] {
            if m.len() != dim || m.iter().any(|r| r.len() != dim) {
                return Err(Error::Parameter("tensor file matrices must be d x d".into()));
            }
        }
        if file.theta_flux.len() != dim {
            return Err(Error::Parameter("tensor file theta_flux must have d entries".into()));
        }
        let mut theta_flux = [0.0; 3];
        theta_flux[..dim].copy_from_slice(&file.theta_flux);
        Ok(EffectiveTensors {
            theta1: file.theta1,
            theta_flux,
            d_tensor: SmallMat::from_rows(&file.d),
            m_v: SmallMat::from_rows(&file.m_v),
            mv_variant: file.mv_variant,
            m_w_a: SmallMat::from_rows(&file.m_w_a),
            m_w_b: SmallMat::from_rows(&file.m_w_b),
            mobility: file.mobility,
            lambda: file.lambda,
        })
    }

    /// Tensors of the unperforated cell: D = I, M_v = 0 (appendix form),
    /// M_w = m I. Used as the baseline in trivial-cell reductions.
    pub fn trivial(d: usize, lambda: f64, mobility: f64) -> Self {
        EffectiveTensors {
            theta1: 1.0,
            theta_flux: [1.0; 3],
            d_tensor: SmallMat::identity(d),
            m_v: SmallMat::zeros(d),
            mv_variant: MvVariant::Appendix,
            m_w_a: SmallMat::scaled_identity(d, mobility),
            m_w_b: SmallMat::zeros(d),
            mobility,
            lambda,
        }
    }
}
