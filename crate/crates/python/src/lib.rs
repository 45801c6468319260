//! Python bindings: reference cells, free energies, effective tensors,
//! contact angles, and the scenario runner.

use porous_ch::cell;
use porous_ch::config::parse_config;
use porous_ch::corrector::{self, MvVariant};
use porous_ch::energy;
use porous_ch::runner::{run, RunOptions};
use porous_ch::wetting;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py_err(e: porous_ch::Error) -> PyErr {
    use porous_ch::Error::*;
    match e {
        Parameter(_) | Config(_) | Domain(_) | Geometry(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(name = "ReferenceCell")]
struct PyReferenceCell {
    inner: cell::ReferenceCell,
}

#[pymethods]
impl PyReferenceCell {
    /// Unperforated cell.
    #[staticmethod]
    fn trivial(dimension: usize, resolution: usize) -> PyResult<Self> {
        cell::build_cell(&cell::trivial_spec(dimension, resolution))
            .map(|inner| PyReferenceCell { inner })
            .map_err(to_py_err)
    }

    /// Cell with a solid ball inclusion (periodic wrap).
    #[staticmethod]
    fn ball(dimension: usize, resolution: usize, center: Vec<f64>, radius: f64) -> PyResult<Self> {
        cell::build_cell(&cell::ball_spec(dimension, resolution, &center, radius))
            .map(|inner| PyReferenceCell { inner })
            .map_err(to_py_err)
    }

    /// Cell with a solid axis-aligned box inclusion.
    #[staticmethod]
    fn solid_box(
        dimension: usize,
        resolution: usize,
        lo: Vec<f64>,
        hi: Vec<f64>,
    ) -> PyResult<Self> {
        let spec = cell::CellGeometrySpec {
            dimension,
            resolution,
            inclusion: cell::Inclusion::Box { lo, hi },
            wall_classes: cell::WallClassRule::Single,
        };
        cell::build_cell(&spec)
            .map(|inner| PyReferenceCell { inner })
            .map_err(to_py_err)
    }

    /// Rebuild from exported bitmap text.
    #[staticmethod]
    fn from_bitmap(text: &str) -> PyResult<Self> {
        let spec = cell::spec_from_bitmap(text, None).map_err(to_py_err)?;
        cell::build_cell(&spec)
            .map(|inner| PyReferenceCell { inner })
            .map_err(to_py_err)
    }

    fn porosity(&self) -> f64 {
        self.inner.porosity()
    }

    fn wall_fractions(&self) -> PyResult<Vec<f64>> {
        self.inner.wall_fractions().map_err(to_py_err)
    }

    fn interface_measure(&self) -> f64 {
        self.inner.interface_measure()
    }

    fn bitmap_text(&self) -> String {
        self.inner.bitmap_text()
    }
}

#[pyclass(name = "BulkFreeEnergy")]
struct PyBulkFreeEnergy {
    inner: energy::BulkFreeEnergy,
}

#[pymethods]
impl PyBulkFreeEnergy {
    /// f(s) = a3 s^3 + a2 s^2 + a1 s + a0.
    #[staticmethod]
    fn from_coeffs(a0: f64, a1: f64, a2: f64, a3: f64) -> Self {
        PyBulkFreeEnergy {
            inner: energy::BulkFreeEnergy::from_coeffs(a0, a1, a2, a3),
        }
    }

    /// Double well F(s) = (s - alpha1)^2 (s - alpha2)^2.
    #[staticmethod]
    fn from_wells(alpha1: f64, alpha2: f64) -> PyResult<Self> {
        energy::BulkFreeEnergy::from_wells(alpha1, alpha2)
            .map(|inner| PyBulkFreeEnergy { inner })
            .map_err(to_py_err)
    }

    fn f(&self, s: f64) -> f64 {
        self.inner.f(s)
    }

    fn f_prime(&self, s: f64) -> f64 {
        self.inner.f_prime(s)
    }

    fn big_f(&self, s: f64) -> f64 {
        self.inner.big_f(s)
    }

    /// r(s) = f(s)/(f'(s) s) with the regularization flag.
    fn ratio(&self, s: f64) -> (f64, bool) {
        let r = self.inner.ratio(s);
        (r.value, r.clamped)
    }
}

#[pyclass(name = "EffectiveTensors")]
struct PyEffectiveTensors {
    inner: corrector::EffectiveTensors,
}

#[pymethods]
impl PyEffectiveTensors {
    #[getter]
    fn theta1(&self) -> f64 {
        self.inner.theta1
    }

    #[getter]
    fn d(&self) -> Vec<Vec<f64>> {
        self.inner.d_tensor.rows()
    }

    #[getter]
    fn m_v(&self) -> Vec<Vec<f64>> {
        self.inner.m_v.rows()
    }

    #[getter]
    fn m_w_a(&self) -> Vec<Vec<f64>> {
        self.inner.m_w_a.rows()
    }

    #[getter]
    fn m_w_b(&self) -> Vec<Vec<f64>> {
        self.inner.m_w_b.rows()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }
}

/// Solve the corrector problems and assemble the effective tensors.
#[pyfunction]
#[pyo3(signature = (cell, lambda_, mobility=1.0, tol=1e-10, mv_variant="appendix"))]
fn solve_cell(
    cell: &PyReferenceCell,
    lambda_: f64,
    mobility: f64,
    tol: f64,
    mv_variant: &str,
) -> PyResult<PyEffectiveTensors> {
    let variant = match mv_variant {
        "appendix" => MvVariant::Appendix,
        "theorem" => MvVariant::Theorem,
        other => {
            return Err(PyValueError::new_err(format!(
                "mv_variant must be 'appendix' or 'theorem', got {other}"
            )))
        }
    };
    let (tensors, _, _) = corrector::assemble_tensors(&cell.inner, lambda_, mobility, tol, variant)
        .map_err(to_py_err)?;
    Ok(PyEffectiveTensors { inner: tensors })
}

/// Admissibility inequality of the double well.
#[pyfunction]
fn check_assumption_f(alpha1: f64, alpha2: f64) -> PyResult<bool> {
    energy::check_assumption_f(alpha1, alpha2).map_err(to_py_err)
}

/// Effective contact angle report for an averaged wall datum g0.
#[pyfunction]
fn contact_angle<'py>(
    py: Python<'py>,
    g0: f64,
    gamma: f64,
    cahn: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let c = wetting::effective_contact_angle(g0, gamma, cahn).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("a_eff", c.a_eff)?;
    dict.set_item("A", c.a_param)?;
    dict.set_item("cos_theta", c.cos_theta)?;
    dict.set_item("theta_rad", c.theta)?;
    dict.set_item("theta_deg", c.theta.to_degrees())?;
    Ok(dict)
}

/// Channel-averaged wall datum g0 from class measures and coefficients.
#[pyfunction]
fn upscaled_g0_channel(
    class_measures: Vec<f64>,
    a: Vec<f64>,
    gamma: f64,
    cahn: f64,
) -> PyResult<f64> {
    let pattern = wetting::ChannelWallPattern { class_measures };
    let spec = wetting::WettingSpec {
        gamma,
        cahn,
        phi_e: 1.0,
        a,
    };
    wetting::upscaled_g0_channel(&pattern, &spec).map_err(to_py_err)
}

/// Run a full scenario from a JSON configuration string.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir, threads=1))]
fn run_json<'py>(
    py: Python<'py>,
    config_json: &str,
    out_dir: &str,
    threads: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let config = parse_config(config_json).map_err(to_py_err)?;
    let report = run(
        &config,
        std::path::Path::new(out_dir),
        RunOptions {
            threads: threads.max(1),
            write_fields: true,
        },
    )
    .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("scenario", report.scenario)?;
    dict.set_item("files", report.files)?;
    dict.set_item("summary", report.summary)?;
    Ok(dict)
}

#[pymodule]
fn porous_ch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyReferenceCell>()?;
    m.add_class::<PyBulkFreeEnergy>()?;
    m.add_class::<PyEffectiveTensors>()?;
    m.add_function(wrap_pyfunction!(solve_cell, m)?)?;
    m.add_function(wrap_pyfunction!(check_assumption_f, m)?)?;
    m.add_function(wrap_pyfunction!(contact_angle, m)?)?;
    m.add_function(wrap_pyfunction!(upscaled_g0_channel, m)?)?;
    m.add_function(wrap_pyfunction!(run_json, m)?)?;
    m.add("__version__", porous_ch::VERSION)?;
    Ok(())
}
