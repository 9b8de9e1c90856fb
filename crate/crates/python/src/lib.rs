//! Python bindings for the driftrank simulator.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use driftrank_core::algorithms::{AlgorithmKind, DrjioNodeState};
use driftrank_core::harness::{self, HarnessError};
use driftrank_core::network::{self, TopologyError};
use driftrank_core::oracle::checks;
use driftrank_core::CVector;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_error(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(c) => value_error(c),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn topology_error(e: TopologyError) -> PyErr {
    match e {
        TopologyError::Io { .. } | TopologyError::Disconnected { .. } => PyRuntimeError::new_err(e.to_string()),
        other => value_error(other),
    }
}

fn parse_kind(name: &str) -> PyResult<AlgorithmKind> {
    name.parse().map_err(value_error)
}

/// Undirected connected sensor network with self-inclusive neighborhoods.
#[pyclass(module = "driftrank")]
struct Topology {
    inner: network::Topology,
}

#[pymethods]
impl Topology {
    /// Random geometric graph on the unit square, resampled until connected.
    #[staticmethod]
    #[pyo3(signature = (n, radius = 0.35, seed = 1))]
    fn geometric(n: usize, radius: f64, seed: u64) -> PyResult<Self> {
        network::generate_geometric_topology(n, radius, seed).map(|inner| Self { inner }).map_err(topology_error)
    }

    /// Builds a graph from 0-based undirected edges.
    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        network::Topology::from_edges(n, &edges).map(|inner| Self { inner }).map_err(topology_error)
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn neighbors(&self, k: usize) -> PyResult<Vec<usize>> {
        if k >= self.inner.node_count() {
            return Err(value_error(format!("node {k} out of range")));
        }
        Ok(self.inner.neighbors(k).to_vec())
    }

    /// Undirected edges `(k, l)` with `k < l`.
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn positions(&self) -> Option<Vec<(f64, f64)>> {
        self.inner.positions().map(|p| p.iter().map(|[x, y]| (*x, *y)).collect())
    }

    /// Metropolis combination weights as a list of rows.
    fn metropolis_weights(&self) -> Vec<Vec<f64>> {
        let c = network::metropolis_weights(&self.inner);
        c.matrix().row_iter().map(|row| row.iter().copied().collect()).collect()
    }

    fn edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    fn __repr__(&self) -> String {
        format!("Topology(nodes={}, edges={})", self.inner.node_count(), self.inner.edges().len())
    }
}

/// Scenario description; every key has a default.
#[pyclass(module = "driftrank")]
struct ScenarioConfig {
    inner: harness::ScenarioConfig,
}

#[pymethods]
impl ScenarioConfig {
    /// Parses `key = value` text and applies keyword overrides on top.
    #[new]
    #[pyo3(signature = (text = "", **overrides))]
    fn new(text: &str, overrides: Option<&Bound<'_, pyo3::types::PyDict>>) -> PyResult<Self> {
        let mut inner: harness::ScenarioConfig = text.parse().map_err(value_error)?;
        if let Some(overrides) = overrides {
            for (key, value) in overrides.iter() {
                let key: String = key.extract()?;
                let value = value.str()?.to_string();
                let value = match value.as_str() {
                    "True" => "true".to_string(),
                    "False" => "false".to_string(),
                    _ => value,
                };
                inner.set(&key, &value).map_err(value_error)?;
            }
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        harness::ScenarioConfig::from_file(&path).map(|inner| Self { inner }).map_err(value_error)
    }

    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.set(key, value).map_err(value_error)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(value_error)
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn runs(&self) -> usize {
        self.inner.runs
    }

    #[getter]
    fn algorithms(&self) -> Vec<&'static str> {
        self.inner.algorithms.iter().map(|a| a.name()).collect()
    }

    fn to_config_string(&self) -> String {
        self.inner.to_config_string()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioConfig(m={}, d={}, n_nodes={}, iterations={}, runs={})",
            self.inner.m, self.inner.d, self.inner.n_nodes, self.inner.iterations, self.inner.runs
        )
    }
}

/// Learning curves and costs of one scenario.
#[pyclass(module = "driftrank")]
struct ScenarioResult {
    inner: harness::ScenarioResult,
}

impl ScenarioResult {
    fn trace(&self, algorithm: &str) -> PyResult<&harness::MseTrace> {
        let kind = parse_kind(algorithm)?;
        self.inner.trace(kind).ok_or_else(|| value_error(format!("{algorithm} was not run")))
    }
}

#[pymethods]
impl ScenarioResult {
    #[getter]
    fn algorithms(&self) -> Vec<String> {
        self.inner.traces.iter().map(|t| t.algorithm.clone()).collect()
    }

    fn mse_db(&self, algorithm: &str) -> PyResult<Vec<f64>> {
        Ok(self.trace(algorithm)?.mse_db.clone())
    }

    fn msd_db(&self, algorithm: &str) -> PyResult<Vec<f64>> {
        Ok(self.trace(algorithm)?.msd_db.clone())
    }

    /// First iteration whose trailing-window mean MSE is at or below `db`.
    #[pyo3(signature = (algorithm, db, window = 20))]
    fn iterations_to_reach(&self, algorithm: &str, db: f64, window: usize) -> PyResult<Option<usize>> {
        Ok(self.trace(algorithm)?.iterations_to_reach(db, window))
    }

    #[pyo3(signature = (algorithm, last = 100))]
    fn steady_state_db(&self, algorithm: &str, last: usize) -> PyResult<f64> {
        Ok(self.trace(algorithm)?.steady_state_db(last))
    }

    /// `(algorithm, macs_per_node_iter, scalars_tx_per_node_iter)` rows.
    fn cost(&self) -> Vec<(String, u64, f64)> {
        self.inner
            .cost
            .entries
            .iter()
            .map(|e| (e.algorithm.clone(), e.macs_per_node_iter, e.scalars_tx_per_node_iter))
            .collect()
    }

    /// Writes `mse_traces.csv` and `cost.csv`; returns the trace row count.
    fn export_csv(&self, dir: PathBuf) -> PyResult<usize> {
        harness::export_csv(&dir, &self.inner).map_err(harness_error)
    }
}

/// Runs every Monte-Carlo repetition of `config`.
#[pyfunction]
fn run_scenario(py: Python<'_>, config: &ScenarioConfig) -> PyResult<ScenarioResult> {
    let config = config.inner.clone();
    let inner = py.detach(move || harness::run_scenario(&config)).map_err(harness_error)?;
    Ok(ScenarioResult { inner })
}

/// Analytic complex MACs per node-iteration of one algorithm's adaptation.
#[pyfunction]
fn count_macs(algorithm: &str, m: usize, d: usize) -> PyResult<u64> {
    Ok(harness::count_macs(parse_kind(algorithm)?, m, d))
}

/// Runs the analytic invariant suite; returns `(name, passed, detail)` rows.
#[pyfunction]
fn oracle_check() -> Vec<(String, bool, String)> {
    checks::run_all().into_iter().map(|o| (o.name.to_string(), o.passed, o.detail)).collect()
}

/// Standalone reduced-rank node (no network).
#[pyclass(module = "driftrank")]
struct DrjioNode {
    inner: DrjioNodeState,
}

#[pymethods]
impl DrjioNode {
    #[new]
    #[pyo3(signature = (m, d, mu0 = 0.15, eta0 = 0.5, eps = 1e-8, reduced_normalization = false))]
    fn new(m: usize, d: usize, mu0: f64, eta0: f64, eps: f64, reduced_normalization: bool) -> PyResult<Self> {
        if d == 0 || d > m {
            return Err(value_error(format!("need 1 <= d <= m, got m={m}, d={d}")));
        }
        let mut inner = DrjioNodeState::new(m, d, mu0, eta0, eps);
        if reduced_normalization {
            inner.normalization = driftrank_core::algorithms::StepNormalization::ReducedInput;
        }
        Ok(Self { inner })
    }

    /// One adaptation with `(x, d)`; returns the a-priori error.
    fn step(&mut self, x: Vec<Complex64>, d: Complex64) -> PyResult<Complex64> {
        if x.len() != self.inner.full_dim() {
            return Err(value_error(format!("x has length {}, expected {}", x.len(), self.inner.full_dim())));
        }
        let x = CVector::from_vec(x);
        let e = driftrank_core::algorithms::drjio_error(&self.inner.w_bar, &self.inner.s_d, &x, d);
        let psi = self.inner.adapt(0, &x, d).payload;
        self.inner.update_projection(&x, e);
        self.inner.w_bar = psi;
        Ok(e)
    }

    #[getter]
    fn w_bar(&self) -> Vec<Complex64> {
        self.inner.w_bar.iter().copied().collect()
    }

    /// `S w_bar`.
    fn full_rank_estimate(&self) -> Vec<Complex64> {
        driftrank_core::algorithms::drjio_reconstruct(&self.inner).iter().copied().collect()
    }
}

#[pymodule]
fn driftrank(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Topology>()?;
    m.add_class::<ScenarioConfig>()?;
    m.add_class::<ScenarioResult>()?;
    m.add_class::<DrjioNode>()?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(count_macs, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    Ok(())
}
