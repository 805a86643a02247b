//! Python bindings for the gossip-bandits simulator.
//!
//! Matrices cross the boundary as lists of rows and graphs as [`PyGraph`]. Results
//! keep the full Rust value so nothing is copied until a getter is called.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gossip_bandits::cli::{self, Scenario};
use gossip_bandits::consensus::{self, ConsensusState};
use gossip_bandits::engine::{self, SimConfig};
use gossip_bandits::metrics::{self, AuditSettings};
use gossip_bandits::topology::{self, CombinationMatrix, Graph};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Graph", frozen, from_py_object, module = "gossip_bandits_py")]
#[derive(Clone)]
pub struct PyGraph {
    inner: Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(k: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(Self {
            inner: Graph::from_edges(k, &edges).map_err(value_err)?,
        })
    }

    /// One draw of G(k, p); may be disconnected.
    #[staticmethod]
    fn erdos_renyi(k: usize, p: f64, seed: u64) -> PyResult<Self> {
        let sample = topology::generate_erdos_renyi(k, p, seed).map_err(value_err)?;
        Ok(Self { inner: sample.graph })
    }

    /// First connected draw from seeds `seed, seed + 1, ...`; returns `(graph, seed)`.
    #[staticmethod]
    #[pyo3(signature = (k, p, seed, max_attempts = 10_000))]
    fn connected_erdos_renyi(k: usize, p: f64, seed: u64, max_attempts: u32) -> PyResult<(Self, u64)> {
        let draw = topology::connected_erdos_renyi(k, p, seed, max_attempts).map_err(value_err)?;
        Ok((Self { inner: draw.graph }, draw.seed))
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn degree(&self, node: usize) -> PyResult<usize> {
        if node >= self.inner.node_count() {
            return Err(PyValueError::new_err(format!("node {node} out of range")));
        }
        Ok(self.inner.degree(node))
    }

    fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.inner.node_count() && b < self.inner.node_count() && self.inner.has_edge(a, b)
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn __repr__(&self) -> String {
        format!("Graph(k={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

fn matrix(rows: &[Vec<f64>]) -> Result<CombinationMatrix, String> {
    CombinationMatrix::from_rows(rows).map_err(|e| e.to_string())
}

fn mixing(rows: &[Vec<f64>]) -> Result<f64, String> {
    topology::mixing_rate(&matrix(rows)?)
        .map(|r| r.lambda)
        .map_err(|e| e.to_string())
}

fn gossip(values: Vec<f64>, rows: &[Vec<f64>], tau: usize) -> Result<(Vec<f64>, Vec<f64>), String> {
    let a = matrix(rows)?;
    let lambda = topology::mixing_rate(&a).map_err(|e| e.to_string())?.lambda;
    let (state, trace) =
        consensus::run_consensus(&ConsensusState::new(values), &a, tau, lambda).map_err(|e| e.to_string())?;
    Ok((state.values, trace.disagreements))
}

/// Metropolis weights of a graph as a list of rows.
#[pyfunction]
fn metropolis_weights(graph: &PyGraph) -> PyResult<Vec<Vec<f64>>> {
    Ok(topology::metropolis_weights(&graph.inner).map_err(value_err)?.rows())
}

/// Mixing rate `lambda` of a symmetric doubly stochastic matrix.
#[pyfunction]
fn mixing_rate(weights: Vec<Vec<f64>>) -> PyResult<f64> {
    mixing(&weights).map_err(PyValueError::new_err)
}

#[pyfunction]
fn disagreement(values: Vec<f64>) -> f64 {
    consensus::disagreement(&values)
}

/// One gossip step.
#[pyfunction]
fn consensus_step(values: Vec<f64>, weights: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let a = matrix(&weights).map_err(PyValueError::new_err)?;
    consensus::consensus_step(&ConsensusState::new(values), &a)
        .map(|s| s.values)
        .map_err(value_err)
}

/// `tau` gossip steps; returns `(values, [d_0, ..., d_tau])`.
#[pyfunction]
fn run_consensus(values: Vec<f64>, weights: Vec<Vec<f64>>, tau: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    gossip(values, &weights, tau).map_err(PyValueError::new_err)
}

#[pyclass(name = "SimResult", frozen, module = "gossip_bandits_py")]
pub struct PySimResult {
    inner: engine::SimResult,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon
    }
    #[getter]
    fn tau(&self) -> usize {
        self.inner.tau
    }
    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn theta(&self) -> f64 {
        self.inner.theta
    }
    #[getter]
    fn revenue(&self) -> f64 {
        self.inner.revenue().to_f64()
    }
    #[getter]
    fn revenue_bound(&self) -> f64 {
        metrics::revenue_bound(self.inner.arm_count(), self.inner.horizon, self.inner.delta)
    }
    #[getter]
    fn regret(&self) -> f64 {
        self.inner.regret
    }
    #[getter]
    fn pull_counts(&self) -> Vec<u64> {
        self.inner.pull_counts.clone()
    }
    #[getter]
    fn utilities(&self) -> Vec<f64> {
        self.inner.utilities.iter().map(|u| u.to_f64()).collect()
    }
    #[getter]
    fn balance(&self) -> f64 {
        metrics::balance_statistic(&self.inner.pull_counts)
    }
    #[getter]
    fn max_prob_gap(&self) -> f64 {
        self.inner.max_prob_gap()
    }
    /// Per-round `max_k |p - p_hat|`.
    #[getter]
    fn prob_gap(&self) -> Vec<f64> {
        self.inner.prob_gap.clone()
    }
    fn conservation_holds(&self) -> bool {
        self.inner.conservation_holds()
    }
    /// Audit with default tolerances, as `key=value` lines.
    fn audit(&self) -> String {
        metrics::audit(&self.inner, &AuditSettings::default()).to_key_values()
    }
    /// The row this run contributes to summary.csv.
    fn summary_row(&self) -> String {
        cli::summary_row("py", &self.inner)
    }
    fn __repr__(&self) -> String {
        format!(
            "SimResult(seed={}, horizon={}, revenue={:.3})",
            self.inner.seed,
            self.inner.horizon,
            self.inner.revenue().to_f64()
        )
    }
}

fn preset_config(name: &str, seed: Option<u64>, horizon: Option<u64>) -> Result<SimConfig, String> {
    let scenario = cli::preset(name).ok_or_else(|| format!("unknown preset {name:?}"))?;
    let mut sim = scenario.sim;
    if let Some(s) = seed {
        sim.seed = s;
    }
    if let Some(t) = horizon {
        sim.horizon = t;
    }
    Ok(sim)
}

fn scenario_config(text: &str) -> Result<SimConfig, String> {
    let scenario = Scenario::from_toml(text).map_err(|e| format!("{e:#}"))?;
    Ok(scenario.expanded().map_err(|e| format!("{e:#}"))?.sim)
}

fn run_sim(py: Python<'_>, config: SimConfig) -> PyResult<PySimResult> {
    let inner = py.detach(|| engine::simulate(&config)).map_err(value_err)?;
    Ok(PySimResult { inner })
}

/// Simulates a built-in preset, optionally with another seed or horizon.
#[pyfunction]
#[pyo3(signature = (name, seed = None, horizon = None))]
fn simulate_preset(py: Python<'_>, name: &str, seed: Option<u64>, horizon: Option<u64>) -> PyResult<PySimResult> {
    run_sim(py, preset_config(name, seed, horizon).map_err(PyValueError::new_err)?)
}

/// Simulates the `sim` table of a scenario file given as TOML text.
#[pyfunction]
fn simulate_toml(py: Python<'_>, text: &str) -> PyResult<PySimResult> {
    run_sim(py, scenario_config(text).map_err(PyValueError::new_err)?)
}

#[pyfunction]
fn presets() -> Vec<String> {
    cli::presets().into_iter().map(|p| p.name).collect()
}

/// A preset rendered as scenario TOML.
#[pyfunction]
fn preset_toml(name: &str) -> PyResult<String> {
    let p = cli::preset(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset {name:?}")))?;
    p.to_toml().map_err(|e| PyValueError::new_err(format!("{e:#}")))
}

#[pymodule]
fn gossip_bandits_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(metropolis_weights, m)?)?;
    m.add_function(wrap_pyfunction!(mixing_rate, m)?)?;
    m.add_function(wrap_pyfunction!(disagreement, m)?)?;
    m.add_function(wrap_pyfunction!(consensus_step, m)?)?;
    m.add_function(wrap_pyfunction!(run_consensus, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_preset, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_toml, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(preset_toml, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_mixing_rate() {
        let rows = topology::metropolis_weights(&Graph::path(3)).unwrap().rows();
        assert!((mixing(&rows).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gossip_trace_starts_at_alpha() {
        let rows = topology::metropolis_weights(&Graph::complete(4)).unwrap().rows();
        let (values, trace) = gossip(vec![1.0, 2.0, 3.0, 6.0], &rows, 3).unwrap();
        assert_eq!(trace.len(), 4);
        assert_eq!(trace[0], consensus::disagreement(&[1.0, 2.0, 3.0, 6.0]));
        assert!(values.iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn bad_matrix_is_an_error() {
        assert!(mixing(&[vec![1.0, 0.5], vec![0.0, 1.0]]).is_err());
        assert!(gossip(vec![1.0], &[vec![1.0, 0.0]], 2).is_err());
    }

    #[test]
    fn preset_overrides() {
        let c = preset_config("smoke", Some(9), Some(50)).unwrap();
        assert_eq!((c.seed, c.horizon), (9, 50));
        assert!(preset_config("nope", None, None).is_err());
    }

    #[test]
    fn scenario_text_round_trip() {
        let text = cli::preset("smoke").unwrap().to_toml().unwrap();
        let c = scenario_config(&text).unwrap();
        assert_eq!(c.arm_count(), 3);
        assert!(scenario_config("name = 1").is_err());
    }
}
