//! Python bindings. Bit strings cross the boundary as `str` of `0`/`1`,
//! position 1 first.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rateless_core::experiment::{
    certification_passes, rows_to_csv, CsvMeta, ExperimentConfig, Lengths, MessageMode,
};
use rateless_core::{analysis, channel, experiment, spectrum};
use rateless_core::{BitWord, BuildConfig, BuilderState, ChannelSpec, ConcatParams, MarkingMode};

fn py_err(e: rateless_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bits(s: &str) -> PyResult<BitWord> {
    s.parse().map_err(py_err)
}

fn params_dict<'py>(py: Python<'py>, p: &ConcatParams) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("beta", p.beta)?;
    d.set_item("m", p.m)?;
    d.set_item("k", p.k)?;
    d.set_item("k_out", p.k_out)?;
    d.set_item("n_out", p.n_out)?;
    d.set_item("pad_symbols", p.pad_symbols)?;
    d.set_item("l_in", p.l_in)?;
    d.set_item("k_in", p.k_in)?;
    d.set_item("radius", p.radius)?;
    Ok(d)
}

/// A generator matrix together with the construction mode that produced it.
#[pyclass(name = "Matrix", module = "rateless", frozen)]
struct PyMatrix {
    file: rateless_core::MatrixFile,
}

#[pymethods]
impl PyMatrix {
    #[staticmethod]
    #[pyo3(signature = (k, n, mode = "strict", skip_elevation = false))]
    fn build(
        py: Python<'_>,
        k: usize,
        n: usize,
        mode: &str,
        skip_elevation: bool,
    ) -> PyResult<Self> {
        let config = BuildConfig {
            mode: mode.parse::<MarkingMode>().map_err(py_err)?,
            skip_elevation_when_unmarked: skip_elevation,
        };
        let g = py
            .detach(|| rateless_core::build_matrix(k, n, config))
            .map_err(py_err)?
            .into_matrix();
        Ok(Self {
            file: rateless_core::MatrixFile::new(g, config),
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            file: rateless_core::MatrixFile::parse(text).map_err(py_err)?,
        })
    }

    /// Replays the construction and appends rows up to `n`.
    fn extend(&self, py: Python<'_>, n: usize) -> PyResult<Self> {
        let config = self.file.config;
        let g = self.file.matrix.clone();
        let g = py
            .detach(move || -> rateless_core::Result<_> {
                let mut s = BuilderState::resume(&g, config)?;
                s.extend_to(n)?;
                Ok(s.into_matrix())
            })
            .map_err(py_err)?;
        Ok(Self {
            file: rateless_core::MatrixFile::new(g, config),
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.file.matrix.k()
    }

    #[getter]
    fn num_rows(&self) -> usize {
        self.file.matrix.num_rows()
    }

    #[getter]
    fn mode(&self) -> String {
        self.file.config.mode.to_string()
    }

    fn rows(&self) -> Vec<String> {
        let g = &self.file.matrix;
        (1..=g.num_rows()).map(|i| g.row(i).to_string()).collect()
    }

    fn to_text(&self) -> String {
        self.file.to_text()
    }

    fn sha256(&self) -> String {
        self.file.sha256()
    }

    fn __len__(&self) -> usize {
        self.num_rows()
    }

    fn __repr__(&self) -> String {
        format!(
            "Matrix(k={}, rows={}, mode={})",
            self.k(),
            self.num_rows(),
            self.mode()
        )
    }
}

#[pyclass(name = "InnerCode", module = "rateless", frozen)]
struct PyInnerCode {
    code: rateless_core::InnerCode,
}

#[pymethods]
impl PyInnerCode {
    #[new]
    fn new(matrix: &PyMatrix) -> Self {
        Self {
            code: rateless_core::InnerCode::new(matrix.file.matrix.clone()),
        }
    }

    #[getter]
    fn k(&self) -> usize {
        self.code.k()
    }

    fn encode(&self, message: &str, n: usize) -> PyResult<String> {
        Ok(self
            .code
            .encode(&bits(message)?, n)
            .map_err(py_err)?
            .to_string())
    }

    /// Maximum-likelihood decoding; ties go to the smallest message.
    fn decode(&self, py: Python<'_>, received: &str) -> PyResult<String> {
        let y = bits(received)?;
        let m = py.detach(|| self.code.ml_decode(&y)).map_err(py_err)?;
        Ok(m.to_string())
    }

    fn weight_distribution(&self, py: Python<'_>, n: usize) -> PyResult<Vec<u64>> {
        let w = py
            .detach(|| spectrum::weight_distribution(&self.code, n))
            .map_err(py_err)?;
        Ok(w.counts().to_vec())
    }

    fn min_distance(&self, py: Python<'_>, n: usize) -> PyResult<usize> {
        py.detach(|| spectrum::min_distance(&self.code, n))
            .map_err(py_err)
    }
}

#[pyclass(name = "ConcatCode", module = "rateless", frozen)]
struct PyConcatCode {
    code: rateless_core::ConcatCode,
}

#[pymethods]
impl PyConcatCode {
    /// `matrix` is the inner generator; it must have `k_in` columns.
    #[new]
    fn new(matrix: &PyMatrix, k: usize, beta: usize) -> PyResult<Self> {
        let params = ConcatParams::derive(k, beta).map_err(py_err)?;
        let code =
            rateless_core::ConcatCode::new(params, matrix.file.matrix.clone()).map_err(py_err)?;
        Ok(Self { code })
    }

    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        params_dict(py, self.code.params())
    }

    fn systematic_permutation(&self) -> PyResult<Vec<usize>> {
        rateless_core::systematic_permutation(self.code.params()).map_err(py_err)
    }

    fn encode(&self, message: &str, n: usize) -> PyResult<String> {
        Ok(self
            .code
            .encode(&bits(message)?, n)
            .map_err(py_err)?
            .to_string())
    }

    fn decode(&self, py: Python<'_>, received: &str) -> PyResult<String> {
        let y = bits(received)?;
        let m = py.detach(|| self.code.decode(&y)).map_err(py_err)?;
        Ok(m.to_string())
    }
}

#[pyfunction]
fn concat_params<'py>(py: Python<'py>, k: usize, beta: usize) -> PyResult<Bound<'py, PyDict>> {
    params_dict(py, &ConcatParams::derive(k, beta).map_err(py_err)?)
}

/// Sends `codeword` through a BSC(p); the same arguments give the same output.
#[pyfunction]
#[pyo3(signature = (codeword, p, seed, stream_index = 0))]
fn transmit(codeword: &str, p: f64, seed: u64, stream_index: u64) -> PyResult<String> {
    let ch = ChannelSpec::new(p, seed).map_err(py_err)?;
    Ok(channel::transmit(&bits(codeword)?, &ch, stream_index).to_string())
}

/// Monte Carlo error rates at explicit prefix lengths, returned as CSV text.
#[pyfunction]
#[pyo3(signature = (matrix, k, ps, ns, trials, seed, beta = None, message = "random"))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    matrix: &PyMatrix,
    k: usize,
    ps: Vec<f64>,
    ns: Vec<usize>,
    trials: u64,
    seed: u64,
    beta: Option<usize>,
    message: &str,
) -> PyResult<String> {
    let config = ExperimentConfig {
        k,
        beta,
        ps,
        deltas: vec![],
        lengths: Lengths::List(ns),
        trials,
        master_seed: seed,
        message: message.parse::<MessageMode>().map_err(py_err)?,
    };
    let params = beta
        .map(|b| ConcatParams::derive(k, b))
        .transpose()
        .map_err(py_err)?;
    let rows = py
        .detach(|| experiment::simulate(&config, &matrix.file.matrix))
        .map_err(py_err)?;
    let sha = matrix.file.sha256();
    Ok(rows_to_csv(
        &CsvMeta {
            matrix_sha256: &sha,
            master_seed: seed,
            params,
        },
        &rows,
    ))
}

/// Runs every applicable check; returns `(passed, rows)` where each row is
/// `(name, pass, bound, observed)`.
#[pyfunction]
#[pyo3(signature = (matrix, p, delta, tau = None, n = None))]
#[allow(clippy::type_complexity)]
fn certify(
    py: Python<'_>,
    matrix: &PyMatrix,
    p: f64,
    delta: f64,
    tau: Option<f64>,
    n: Option<usize>,
) -> PyResult<(bool, Vec<(String, bool, f64, Option<f64>)>)> {
    let reports = py
        .detach(|| experiment::certify(&matrix.file, n, p, delta, tau))
        .map_err(py_err)?;
    let rows = reports
        .iter()
        .map(|r| (r.name.clone(), r.pass, r.bound_value, r.observed))
        .collect();
    Ok((certification_passes(&reports), rows))
}

#[pyfunction]
fn entropy(p: f64) -> f64 {
    analysis::entropy(p)
}

#[pyfunction]
fn capacity(p: f64) -> f64 {
    analysis::capacity(p)
}

#[pyfunction]
fn delta_gv(n: usize, k: usize) -> PyResult<f64> {
    analysis::delta_gv(n, k).map_err(py_err)
}

#[pyfunction]
fn prefix_length_for(p: f64, delta: f64, k: usize) -> PyResult<usize> {
    analysis::prefix_length_for(p, delta, k).map_err(py_err)
}

#[pyfunction]
fn pair_error_prob(i: usize, p: f64) -> PyResult<f64> {
    channel::pair_error_prob(i, p).map_err(py_err)
}

#[pyfunction]
fn exponent_beta(p: f64) -> PyResult<f64> {
    channel::exponent_beta(p).map_err(py_err)
}

#[pymodule]
fn rateless(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrix>()?;
    m.add_class::<PyInnerCode>()?;
    m.add_class::<PyConcatCode>()?;
    m.add_function(wrap_pyfunction!(concat_params, m)?)?;
    m.add_function(wrap_pyfunction!(transmit, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(capacity, m)?)?;
    m.add_function(wrap_pyfunction!(delta_gv, m)?)?;
    m.add_function(wrap_pyfunction!(prefix_length_for, m)?)?;
    m.add_function(wrap_pyfunction!(pair_error_prob, m)?)?;
    m.add_function(wrap_pyfunction!(exponent_beta, m)?)?;
    m.add("PRNG_ID", rateless_core::PRNG_ID)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
