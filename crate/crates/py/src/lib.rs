//! Python bindings. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use numinv_core::choice::{self, FullSimplex, Polytope};
use numinv_core::decomposition::{self, OptionalMeasure};
use numinv_core::mc::{self as core_mc, Generator, PathEnsemble, SimConfig};
use numinv_core::runner::{self, Module, RunOptions, Scenario};
use numinv_core::tree::{EventTree, NodeProcess};
use numinv_core::{Error, FiniteSpace, Outcome};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serializes through JSON so reports arrive as native Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Probability space on finitely many atoms.
#[pyclass(name = "FiniteSpace", frozen)]
struct PySpace {
    inner: FiniteSpace,
}

#[pymethods]
impl PySpace {
    #[new]
    #[pyo3(signature = (weights, labels=None))]
    fn new(weights: Vec<f64>, labels: Option<Vec<String>>) -> PyResult<Self> {
        let inner = match labels {
            Some(l) => FiniteSpace::new(l, weights),
            None => FiniteSpace::from_weights(weights),
        }
        .map_err(err)?;
        Ok(PySpace { inner })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `E[f / g] - 1`.
    fn rel(&self, f: Vec<f64>, g: Vec<f64>) -> PyResult<f64> {
        let (f, g) = (outcome(f)?, outcome(g)?);
        Ok(numinv_core::rel(&self.inner, &f, &g).map_err(err)?.value())
    }

    /// "strictly_preferred", "preferred" or "not_preferred" for `f ≼ g`.
    fn prefers(&self, f: Vec<f64>, g: Vec<f64>) -> PyResult<String> {
        let (f, g) = (outcome(f)?, outcome(g)?);
        let p = numinv_core::prefers(&self.inner, &f, &g).map_err(err)?;
        Ok(serde_json::to_value(p)
            .unwrap()
            .as_str()
            .unwrap()
            .to_string())
    }

    /// Log-optimal element of the convex hull of `vertices`.
    fn log_optimal<'py>(
        &self,
        py: Python<'py>,
        vertices: Vec<Vec<f64>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let set = Polytope::from_vertices(vertices).map_err(err)?;
        to_py(py, &choice::log_optimal(&self.inner, &set).map_err(err)?)
    }

    /// Log-optimal element of `{f >= 0 : sum mu f <= 1}`.
    fn full_simplex_optimum(&self, mu: Vec<f64>) -> PyResult<Vec<f64>> {
        let s = FullSimplex::new(mu).map_err(err)?;
        let opt = choice::log_optimal(&self.inner, &s.polytope()).map_err(err)?;
        Ok(opt.outcome.values().to_vec())
    }

    /// Recovers this space's probability from its own choice rule.
    #[pyo3(signature = (seed=0))]
    fn recover<'py>(&self, py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        let oracle = choice::RelOracle {
            space: self.inner.clone(),
        };
        to_py(
            py,
            &choice::recover_probability(&oracle, self.inner.len(), seed).map_err(err)?,
        )
    }
}

fn outcome(v: Vec<f64>) -> PyResult<Outcome> {
    Outcome::new(v).map_err(err)
}

/// Finite event tree; node 0 is the root.
#[pyclass(name = "EventTree", frozen)]
struct PyTree {
    inner: EventTree,
}

#[pymethods]
impl PyTree {
    /// `parents[i]` is the parent of node `i` (None for the root) and
    /// `probs[i]` its transition probability.
    #[new]
    fn new(parents: Vec<Option<usize>>, probs: Vec<f64>) -> PyResult<Self> {
        if parents.len() != probs.len() {
            return Err(PyValueError::new_err("parents and probs differ in length"));
        }
        let spec: Vec<_> = parents.into_iter().zip(probs).collect();
        Ok(PyTree {
            inner: EventTree::from_parents(&spec).map_err(err)?,
        })
    }

    #[staticmethod]
    fn lattice(depth: usize, probs: Vec<f64>) -> PyResult<Self> {
        let inner =
            EventTree::lattice(depth, &probs, numinv_core::tree::DEFAULT_NODE_CAP).map_err(err)?;
        Ok(PyTree { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, depth, max_branching=3))]
    fn random(seed: u64, depth: usize, max_branching: usize) -> PyResult<Self> {
        if max_branching == 0 {
            return Err(PyValueError::new_err("max_branching must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(PyTree {
            inner: EventTree::random(&mut rng, depth, max_branching),
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn leaves(&self) -> Vec<usize> {
        self.inner.leaves().to_vec()
    }

    fn parent(&self, node: usize) -> PyResult<Option<usize>> {
        self.check(node)?;
        Ok(self.inner.parent(node))
    }

    /// Unconditional probability of reaching `node`.
    fn prob(&self, node: usize) -> PyResult<f64> {
        self.check(node)?;
        Ok(self.inner.prob(node))
    }

    /// Random unit-mass optional measure charging each node with
    /// probability `density`.
    #[pyo3(signature = (seed, density=1.0))]
    fn random_measure(&self, seed: u64, density: f64) -> PyResult<Vec<f64>> {
        if !(density > 0.0 && density <= 1.0) {
            return Err(PyValueError::new_err("density must lie in (0, 1]"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(OptionalMeasure::random(&self.inner, &mut rng, density)
            .masses()
            .to_vec())
    }

    /// Canonical pair `(L, K)` of an optional measure given by node masses.
    fn decompose<'py>(&self, py: Python<'py>, measure: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
        let h = self.h(measure)?;
        to_py(py, &decomposition::decompose(&self.inner, &h).map_err(err)?)
    }

    /// Checks a candidate pair against the measure.
    fn verify_pair<'py>(
        &self,
        py: Python<'py>,
        measure: Vec<f64>,
        l: Vec<f64>,
        k: Vec<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let h = self.h(measure)?;
        let l = NodeProcess::new(&self.inner, l).map_err(err)?;
        let k = NodeProcess::new(&self.inner, k).map_err(err)?;
        to_py(
            py,
            &decomposition::verify_pair(&self.inner, &h, &l, &k).map_err(err)?,
        )
    }

    #[pyo3(signature = (measure, eps=vec![1e-2, 1e-3, 1e-4]))]
    fn perturbation<'py>(
        &self,
        py: Python<'py>,
        measure: Vec<f64>,
        eps: Vec<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let h = self.h(measure)?;
        to_py(
            py,
            &decomposition::perturbation_convergence(&self.inner, &h, &eps).map_err(err)?,
        )
    }
}

impl PyTree {
    fn check(&self, node: usize) -> PyResult<()> {
        if node < self.inner.len() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("no node {node}")))
        }
    }

    fn h(&self, measure: Vec<f64>) -> PyResult<NodeProcess> {
        let q = OptionalMeasure::new(&self.inner, measure).map_err(err)?;
        decomposition::measure_to_h(&self.inner, &q).map_err(err)
    }
}

/// Simulated paths of a nonnegative local martingale `L` with `L_0 = 1`.
#[pyclass(name = "PathEnsemble", frozen)]
struct PyEnsemble {
    inner: PathEnsemble,
}

#[pymethods]
impl PyEnsemble {
    /// `generator` is "gbm" (with `sigma`) or "inverse_bessel3".
    #[new]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (generator, n_paths, n_steps, dt, seed=0, sigma=1.0, fractions=vec![]))]
    fn new(
        py: Python<'_>,
        generator: &str,
        n_paths: usize,
        n_steps: usize,
        dt: f64,
        seed: u64,
        sigma: f64,
        fractions: Vec<f64>,
    ) -> PyResult<Self> {
        let generator = match generator {
            "gbm" | "gbm_martingale" => Generator::GbmMartingale { sigma },
            "inverse_bessel3" | "bessel" => Generator::InverseBessel3,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown generator {other:?}"
                )))
            }
        };
        let mut cfg = SimConfig::new(generator, n_paths, n_steps, dt, seed);
        cfg.fractions = fractions;
        let inner = py.detach(|| core_mc::simulate(&cfg)).map_err(err)?;
        Ok(PyEnsemble { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.summaries.len()
    }

    /// Per-path `sup L` including bridge and tail corrections.
    #[getter]
    fn maxima(&self) -> Vec<f64> {
        self.inner.summaries.iter().map(|s| s.max_total).collect()
    }

    #[getter]
    fn terminal(&self) -> Vec<f64> {
        self.inner.summaries.iter().map(|s| s.terminal).collect()
    }

    fn terminal_mean<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.terminal_mean())
    }

    #[pyo3(signature = (gammas=vec![2.0, 4.0, 8.0], tol=0.02))]
    fn doob<'py>(
        &self,
        py: Python<'py>,
        gammas: Vec<f64>,
        tol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &core_mc::doob_identity_check(&self.inner, &gammas, tol).map_err(err)?,
        )
    }

    #[pyo3(signature = (mean_tol=0.03))]
    fn exp_law<'py>(&self, py: Python<'py>, mean_tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &core_mc::exp_law_check(&self.inner, mean_tol).map_err(err)?,
        )
    }

    #[pyo3(signature = (tol=0.02))]
    fn min_time<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &core_mc::min_time_market_check(&self.inner, tol).map_err(err)?,
        )
    }
}

/// Counterexample families for `P[A] = p`.
#[pyfunction]
fn counterexamples(py: Python<'_>, p: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(
        py,
        &numinv_core::counterexamples::counterexample_suite(p).map_err(err)?,
    )
}

/// Runs a scenario given as JSON text and returns the report.
#[pyfunction]
#[pyo3(signature = (scenario, module=None, seed=None, tol_scale=1.0))]
fn run_scenario<'py>(
    py: Python<'py>,
    scenario: &str,
    module: Option<&str>,
    seed: Option<u64>,
    tol_scale: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let s = Scenario::from_json(scenario).map_err(err)?;
    let module = module
        .map(|m| serde_json::from_value::<Module>(serde_json::Value::String(m.into())))
        .transpose()
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let opts = RunOptions {
        module,
        seed,
        tol_scale,
        parallel: false,
    };
    let report = py.detach(|| runner::run(&s, &opts)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn numinv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpace>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(counterexamples, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
