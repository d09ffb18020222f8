use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use haarmoments::exact::rational_parts;
use haarmoments::freegroup::{self, MatrixPencil, ReducedWord, ResolventOptions};
use haarmoments::haarmodel::{self, ExperimentOptions, ModelConfig, TensorModelInstance};
use haarmoments::linalg::CMatrix;
use haarmoments::linearization::{self, GroupPolynomial};
use haarmoments::nonbacktracking::{self, Side, SpectralMappingOptions, WeightsFile};
use haarmoments::symcore::Permutation;
use haarmoments::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Invalid(_) | Error::LengthMismatch { .. } | Error::Json(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_rows(m: &CMatrix) -> Vec<Vec<num_complex::Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Exact Weingarten table as `{cycle type: (numerator, denominator)}`.
#[pyfunction]
#[pyo3(signature = (k, n, orthogonal = false))]
fn wg_table(k: usize, n: usize, orthogonal: bool) -> PyResult<Vec<(String, (String, String))>> {
    let file = haarmoments::cli::wg_table_file(k, n, orthogonal).map_err(to_py)?;
    Ok(file
        .values
        .into_iter()
        .map(|(key, v)| (key, (v.numerator, v.denominator)))
        .collect())
}

/// `E(∏ U_{x_l y_l} conj(U_{x'_l y'_l}))` as `(numerator, denominator)`.
#[pyfunction]
fn haar_moment(
    x: Vec<usize>,
    y: Vec<usize>,
    x2: Vec<usize>,
    y2: Vec<usize>,
    n: usize,
) -> PyResult<(String, String)> {
    let r = haarmoments::weingarten::haar_moment(&x, &y, &x2, &y2, n).map_err(to_py)?;
    Ok(rational_parts(&r))
}

/// `E(∏ O_{x_l y_l})` over the orthogonal group.
#[pyfunction]
fn haar_moment_orth(x: Vec<usize>, y: Vec<usize>, n: usize) -> PyResult<(String, String)> {
    let r = haarmoments::weingarten::haar_moment_orth(&x, &y, n).map_err(to_py)?;
    Ok(rational_parts(&r))
}

/// Monotone Hurwitz count `|P(σ, l)|` of a permutation in one-line notation
/// on `0..k`.
#[pyfunction]
fn hurwitz_count(sigma: Vec<usize>, l: usize) -> PyResult<u128> {
    let p = Permutation::from_images(sigma).map_err(to_py)?;
    haarmoments::weingarten::hurwitz_count(&p, l).map_err(to_py)
}

#[pyclass(name = "Pencil", module = "haarmoments_py", skip_from_py_object)]
#[derive(Clone)]
struct PyPencil {
    inner: MatrixPencil,
}

#[pymethods]
impl PyPencil {
    /// `a0 = a0·1`, `a_i = x` for every generator.
    #[staticmethod]
    fn uniform_scalar(d: usize, a0: f64, x: f64) -> PyResult<Self> {
        Ok(Self {
            inner: MatrixPencil::uniform_scalar(d, a0, x).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn random_self_adjoint(d: usize, coeff_dim: usize, seed: u64) -> Self {
        let mut rng = haarmoments::rng::stream(seed);
        Self {
            inner: MatrixPencil::random_self_adjoint(d, coeff_dim, &mut rng),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: MatrixPencil::from_json_str(text).map_err(to_py)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(to_py)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn coeff_dim(&self) -> usize {
        self.inner.coeff_dim()
    }

    fn is_self_adjoint(&self) -> bool {
        self.inner.is_self_adjoint(1e-12)
    }

    fn ball_norm_estimate(&self, radius: usize) -> f64 {
        freegroup::ball_norm_estimate(&self.inner, radius)
    }

    fn astar_norm_lower(&self, m: usize) -> PyResult<f64> {
        freegroup::astar_norm_lower(&self.inner, m).map_err(to_py)
    }

    fn rho_k(&self, k: usize) -> PyResult<f64> {
        freegroup::rho_k(&self.inner, k).map_err(to_py)
    }

    /// `G_oo(μ)` as nested lists of complex numbers.
    fn resolvent_oo(&self, mu: f64) -> PyResult<Vec<Vec<num_complex::Complex64>>> {
        let o = ReducedWord::identity(self.inner.d());
        let g = freegroup::resolvent_entries(
            &self.inner,
            mu,
            std::slice::from_ref(&o),
            &ResolventOptions::default(),
        )
        .map_err(to_py)?;
        Ok(matrix_rows(&g[&o]))
    }

    /// `ρ_k` of the companion weights `hat a_i(μ)`.
    fn hat_rho_k(&self, mu: f64, k: usize) -> PyResult<f64> {
        let hat =
            freegroup::hat_weights(&self.inner, mu, &ResolventOptions::default()).map_err(to_py)?;
        freegroup::rho_k_weights(&hat, k).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Pencil(d={}, coeff_dim={})",
            self.inner.d(),
            self.inner.coeff_dim()
        )
    }
}

#[pyclass(name = "TensorModel", module = "haarmoments_py")]
struct PyTensorModel {
    inner: TensorModelInstance,
}

#[pymethods]
impl PyTensorModel {
    #[new]
    fn new(
        n: usize,
        q_minus: usize,
        q_plus: usize,
        pencil: &PyPencil,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg =
            ModelConfig::new(n, q_minus, q_plus, pencil.inner.clone(), seed).map_err(to_py)?;
        Ok(Self {
            inner: haarmodel::build_instance(&cfg).map_err(to_py)?,
        })
    }

    #[getter]
    fn total_dim(&self) -> usize {
        self.inner.total_dim()
    }

    fn restricted_norm(&self) -> PyResult<f64> {
        haarmodel::restricted_norm(&self.inner).map_err(to_py)
    }

    /// `‖B^ℓ‖^{1/ℓ}` for the centered non-backtracking operator.
    fn centered_nb_norm_root(&self, ell: usize) -> PyResult<f64> {
        haarmodel::centered_nb_norm_root(&self.inner, ell).map_err(to_py)
    }
}

/// Rows of the freeness experiment as dictionaries.
#[pyfunction]
#[pyo3(signature = (ns, q_minus, q_plus, pencil, seed, trials))]
fn freeness_experiment<'py>(
    py: Python<'py>,
    ns: Vec<usize>,
    q_minus: usize,
    q_plus: usize,
    pencil: &PyPencil,
    seed: u64,
    trials: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let configs = ns
        .iter()
        .map(|&n| ModelConfig::new(n, q_minus, q_plus, pencil.inner.clone(), seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let table = py
        .detach(|| {
            haarmodel::freeness_experiment(
                &configs,
                trials,
                &ExperimentOptions {
                    deterministic_timing: true,
                },
            )
        })
        .map_err(to_py)?;
    table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("n", r.n)?;
            d.set_item("trial", r.trial)?;
            d.set_item("seed", r.seed)?;
            d.set_item("restricted_norm", r.restricted_norm)?;
            d.set_item("astar_estimate", r.astar_estimate)?;
            d.set_item("deviation", r.deviation)?;
            Ok(d)
        })
        .collect()
}

/// `(c, shift, residual)` of the square-root pencil of a polynomial given as
/// JSON.
#[pyfunction]
fn sqrt_pencil(poly_json: &str) -> PyResult<(f64, f64, f64)> {
    let q = GroupPolynomial::from_json_str(poly_json).map_err(to_py)?;
    let g = freegroup::ball_words(q.d(), q.degree().div_ceil(2));
    let s = linearization::sqrt_pencil(&q, &g).map_err(to_py)?;
    Ok((s.c, s.shift, s.residual))
}

/// Norm of a polynomial (JSON) in the left-regular representation.
#[pyfunction]
fn poly_norm(poly_json: &str) -> PyResult<f64> {
    let q = GroupPolynomial::from_json_str(poly_json).map_err(to_py)?;
    linearization::poly_norm(&q, &linearization::default_oracle).map_err(to_py)
}

/// Spectral-mapping check on weights in the `nb-spectrum` JSON format;
/// returns `(passed, eigenvalues checked, worst eigen residual)`.
#[pyfunction]
#[pyo3(signature = (weights_json, side = "right"))]
fn spectral_mapping(weights_json: &str, side: &str) -> PyResult<(bool, usize, f64)> {
    let side = match side {
        "right" => Side::Right,
        "left" => Side::Left,
        other => {
            return Err(PyValueError::new_err(format!(
                "side must be 'right' or 'left', got {other}"
            )))
        }
    };
    let file: WeightsFile =
        serde_json::from_str(weights_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let w = file.to_weights().map_err(to_py)?;
    let r = nonbacktracking::verify_spectral_mapping(&w, side, &SpectralMappingOptions::default())
        .map_err(to_py)?;
    Ok((r.passed(), r.eigenvalues_checked, r.worst_eigen_residual))
}

/// Runs the command line in-process and returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    let argv = std::iter::once("haarmoments".to_string()).chain(args);
    haarmoments::cli::dispatch(argv)
}

#[pymodule]
pub fn haarmoments_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPencil>()?;
    m.add_class::<PyTensorModel>()?;
    m.add_function(wrap_pyfunction!(wg_table, m)?)?;
    m.add_function(wrap_pyfunction!(haar_moment, m)?)?;
    m.add_function(wrap_pyfunction!(haar_moment_orth, m)?)?;
    m.add_function(wrap_pyfunction!(hurwitz_count, m)?)?;
    m.add_function(wrap_pyfunction!(freeness_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sqrt_pencil, m)?)?;
    m.add_function(wrap_pyfunction!(poly_norm, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_mapping, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
