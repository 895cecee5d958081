//! Python bindings: step CDFs, rank-ATE, the rank estimators and the
//! simulation scenarios.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use rankreg::did::{cic_counterfactual, rank_did_with_reference, rank_mdid};
use rankreg::io::{format_tables, OutputFormat};
use rankreg::iv::{rank_2sls, rank_2sls_complier};
use rankreg::ols::{rank_ols_cov, rank_ols_general, rank_ols_nocov, rank_ols_refgroup, TreatmentTransform};
use rankreg::ranks::{self, IdentifiedSet, ReferenceGroup, StepCdf, TiePolicy};
use rankreg::rdd::{self, Bandwidth, Kernel, RddConfig};
use rankreg::simlab::scenarios;
use rankreg::{Error, Estimate, PanelSample, Sample};

create_exception!(rankreg_py, RankRegError, PyValueError);

fn py_err(e: Error) -> PyErr {
    RankRegError::new_err(format!("{}: {e}", e.code()))
}

fn reference(name: &str) -> PyResult<ReferenceGroup> {
    name.parse().map_err(py_err)
}

#[pyclass(name = "StepCdf", frozen)]
struct PyStepCdf(StepCdf);

#[pymethods]
impl PyStepCdf {
    #[new]
    fn new(support: Vec<f64>, cum: Vec<f64>) -> PyResult<Self> {
        StepCdf::new(support, cum).map(Self).map_err(py_err)
    }

    #[getter]
    fn support(&self) -> Vec<f64> {
        self.0.support().to_vec()
    }

    #[getter]
    fn cum(&self) -> Vec<f64> {
        self.0.cum().to_vec()
    }

    fn evaluate(&self, y: f64) -> f64 {
        self.0.evaluate(y)
    }

    fn evaluate_left(&self, y: f64) -> f64 {
        self.0.evaluate_left(y)
    }

    /// Left-continuous generalized inverse at level `u`.
    fn inverse(&self, u: f64) -> PyResult<f64> {
        ranks::generalized_inverse(&self.0, u).map_err(py_err)
    }

    fn sup_distance(&self, other: PyRef<'_, PyStepCdf>) -> f64 {
        self.0.sup_distance(&other.0)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("StepCdf(points={})", self.0.len())
    }
}

#[pyclass(name = "Estimate", frozen)]
struct PyEstimate(Estimate);

#[pymethods]
impl PyEstimate {
    #[getter]
    fn value(&self) -> f64 {
        self.0.value
    }

    #[getter]
    fn estimator(&self) -> String {
        self.0.estimator.clone()
    }

    #[getter]
    fn estimand(&self) -> String {
        self.0.estimand.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }

    #[getter]
    fn diagnostics(&self) -> BTreeMap<String, f64> {
        self.0.diagnostics.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(|e| RankRegError::new_err(e.to_string()))
    }

    fn __float__(&self) -> f64 {
        self.0.value
    }

    fn __repr__(&self) -> String {
        format!("Estimate({}={}, n={})", self.0.estimator, self.0.value, self.0.n)
    }
}

#[pyclass(name = "IdentifiedSet", frozen)]
struct PyIdentifiedSet(IdentifiedSet);

#[pymethods]
impl PyIdentifiedSet {
    #[getter]
    fn lower(&self) -> f64 {
        self.0.lower
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.0.upper
    }

    fn contains(&self, value: f64) -> bool {
        self.0.contains(value)
    }

    fn __repr__(&self) -> String {
        format!("IdentifiedSet([{}, {}])", self.0.lower, self.0.upper)
    }
}

fn estimate(r: rankreg::Result<Estimate>) -> PyResult<PyEstimate> {
    r.map(PyEstimate).map_err(py_err)
}

fn sample(y: Vec<f64>, w: Vec<f64>) -> PyResult<Sample> {
    Sample::new(y, w).map_err(py_err)
}

/// Literal ranks `#{j : y_j <= y_i}`, or ranks after seeded jitter when
/// `epsilon` is given.
#[pyfunction]
#[pyo3(signature = (values, epsilon=None, seed=0))]
fn compute_ranks(values: Vec<f64>, epsilon: Option<f64>, seed: u64) -> PyResult<Vec<usize>> {
    let policy = match epsilon {
        None => TiePolicy::Literal,
        Some(epsilon) => TiePolicy::Jitter { seed, epsilon },
    };
    Ok(ranks::compute_ranks(&values, policy).map_err(py_err)?.ranks)
}

#[pyfunction]
fn ecdf(values: Vec<f64>) -> PyResult<PyStepCdf> {
    ranks::ecdf(&values).map(PyStepCdf).map_err(py_err)
}

/// Isotonic projection of raw values onto a CDF on `support`.
#[pyfunction]
fn project_to_cdf(support: Vec<f64>, raw: Vec<f64>) -> PyResult<PyStepCdf> {
    ranks::project_to_cdf(&support, &raw).map(PyStepCdf).map_err(py_err)
}

/// `P(Z1 >= Z0) - 1/2` for independent draws from two step CDFs.
#[pyfunction]
fn rank_ate(f1: PyRef<'_, PyStepCdf>, f0: PyRef<'_, PyStepCdf>) -> f64 {
    ranks::rank_ate(&f1.0, &f0.0)
}

#[pyfunction]
fn rank_ate_pairs(y1: Vec<f64>, y0: Vec<f64>) -> PyResult<f64> {
    ranks::rank_ate_pairs(&y1, &y0).map_err(py_err)
}

/// Bounds on `P(Y(1) >= Y(0)) - 1/2` from the two outcome samples.
#[pyfunction]
fn fan_park_bounds(y1: Vec<f64>, y0: Vec<f64>) -> PyResult<PyIdentifiedSet> {
    let f1 = ranks::ecdf(&y1).map_err(py_err)?;
    let f0 = ranks::ecdf(&y0).map_err(py_err)?;
    Ok(PyIdentifiedSet(ranks::fan_park_bounds(&f1, &f0)))
}

/// Rank-OLS on a binary treatment. Covariates are given column-wise.
#[pyfunction]
#[pyo3(signature = (y, w, x=None, reference="all", interact=false))]
fn rank_ols(y: Vec<f64>, w: Vec<f64>, x: Option<Vec<Vec<f64>>>, reference: &str, interact: bool) -> PyResult<PyEstimate> {
    let s = sample(y, w)?;
    let r = self::reference(reference)?;
    match x {
        Some(x) if r == ReferenceGroup::All => estimate(rank_ols_cov(&s.with_covariates(x).map_err(py_err)?, interact)),
        Some(_) => Err(py_err(Error::Config("reference-group ranking takes no covariates".into()))),
        None if r == ReferenceGroup::All => estimate(rank_ols_nocov(&s)),
        None => estimate(rank_ols_refgroup(&s, r)),
    }
}

/// Rank-OLS on `h(W)`; `transform` is `identity`, `rank`,
/// `dichotomize:<t>` or `step:<b1>,<b2>,...`.
#[pyfunction]
#[pyo3(signature = (y, w, transform="identity", normalize=false))]
fn rank_ols_transformed(y: Vec<f64>, w: Vec<f64>, transform: &str, normalize: bool) -> PyResult<PyEstimate> {
    let t = TreatmentTransform::parse(transform, normalize).map_err(py_err)?;
    estimate(rank_ols_general(&sample(y, w)?, &t))
}

/// Rank-2SLS with a binary instrument, or complier-ranked 2SLS when
/// `zeta` is given.
#[pyfunction]
#[pyo3(signature = (y, w, z, reference="all", zeta=None))]
fn rank_2sls_py(y: Vec<f64>, w: Vec<f64>, z: Vec<f64>, reference: &str, zeta: Option<f64>) -> PyResult<PyEstimate> {
    let s = sample(y, w)?.with_instrument(z).map_err(py_err)?;
    match zeta {
        Some(zeta) => estimate(rank_2sls_complier(&s, zeta)),
        None => estimate(rank_2sls(&s, self::reference(reference)?)),
    }
}

/// Rank-DiD on a two-period panel; `modified` uses the changes-in-changes
/// counterfactual.
#[pyfunction]
#[pyo3(signature = (y_pre, y_post, w, reference="all", modified=false))]
fn rank_did(y_pre: Vec<f64>, y_post: Vec<f64>, w: Vec<f64>, reference: &str, modified: bool) -> PyResult<PyEstimate> {
    let p = PanelSample::new(y_pre, y_post, w).map_err(py_err)?;
    if modified {
        let cf = cic_counterfactual(&p).map_err(py_err)?;
        estimate(rank_mdid(&p, &cf))
    } else {
        estimate(rank_did_with_reference(&p, self::reference(reference)?))
    }
}

/// Sharp rank-RDD; units with `run >= cutoff` are treated. Without a
/// `bandwidth` the rule `multiplier * sd(run) * n^(-1/5)` is used.
#[pyfunction]
#[pyo3(signature = (y, run, cutoff, bandwidth=None, multiplier=1.0, kernel="triangular", reference="all", modified=false))]
#[allow(clippy::too_many_arguments)]
fn rank_rdd(
    y: Vec<f64>,
    run: Vec<f64>,
    cutoff: f64,
    bandwidth: Option<f64>,
    multiplier: f64,
    kernel: &str,
    reference: &str,
    modified: bool,
) -> PyResult<PyEstimate> {
    let w = run.iter().map(|&r| f64::from(r >= cutoff)).collect();
    let s = sample(y, w)?.with_running(run).map_err(py_err)?;
    let bandwidth = match bandwidth {
        Some(h) => Bandwidth::Fixed { h },
        None => Bandwidth::Rule { multiplier },
    };
    let cfg = RddConfig::new(cutoff)
        .with_bandwidth(bandwidth)
        .with_kernel(kernel.parse::<Kernel>().map_err(py_err)?);
    if modified {
        estimate(rdd::rank_mrdd(&s, &cfg))
    } else {
        estimate(rdd::rank_rdd(&s, &cfg, self::reference(reference)?))
    }
}

/// `(number, name, description)` for every simulation scenario.
#[pyfunction]
fn list_scenarios() -> Vec<(usize, String, String)> {
    scenarios::registry()
        .into_iter()
        .map(|s| (s.index, s.name.to_string(), s.description.to_string()))
        .collect()
}

/// Runs a scenario and returns its convergence tables as JSON text.
#[pyfunction]
#[pyo3(signature = (scenario, ns=None, reps=None, seed=None))]
fn simulate(py: Python<'_>, scenario: &str, ns: Option<Vec<usize>>, reps: Option<usize>, seed: Option<u64>) -> PyResult<String> {
    let s = scenarios::find(scenario).map_err(py_err)?;
    py.detach(|| {
        let tables = s.run(ns.as_deref(), reps, seed)?;
        format_tables(&tables, OutputFormat::Json)
    })
    .map_err(py_err)
}

#[pymodule]
fn rankreg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RankRegError", m.py().get_type::<RankRegError>())?;
    m.add_class::<PyStepCdf>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyIdentifiedSet>()?;
    m.add_function(wrap_pyfunction!(compute_ranks, m)?)?;
    m.add_function(wrap_pyfunction!(ecdf, m)?)?;
    m.add_function(wrap_pyfunction!(project_to_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(rank_ate, m)?)?;
    m.add_function(wrap_pyfunction!(rank_ate_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(fan_park_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(rank_ols, m)?)?;
    m.add_function(wrap_pyfunction!(rank_ols_transformed, m)?)?;
    m.add("rank_2sls", wrap_pyfunction!(rank_2sls_py, m)?)?;
    m.add_function(wrap_pyfunction!(rank_did, m)?)?;
    m.add_function(wrap_pyfunction!(rank_rdd, m)?)?;
    m.add_function(wrap_pyfunction!(list_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
