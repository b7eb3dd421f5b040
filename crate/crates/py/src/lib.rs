//! Python bindings, importable as `sls_rpe`.

use pyo3::exceptions::{PyOverflowError, PyValueError};
use pyo3::prelude::*;

use sls_core::analytic;
use sls_core::ensemble::{self, EnsembleConfig, DEFAULT_BINS, DEFAULT_QUANTILES};
use sls_core::rpe::{self, ExtReal, RpeReason};
use sls_core::sim::{self, GbmParams, LeverageConfig};
use sls_core::{Horizon, MarketRealization};

fn to_py(e: sls_core::Error) -> PyErr {
    if e.is_overflow() {
        PyOverflowError::new_err(e.to_string())
    } else {
        PyValueError::new_err(format!("{}: {e}", e.kind()))
    }
}

fn horizon(n: u32) -> PyResult<Horizon> {
    Horizon::new(n).map_err(to_py)
}

#[pyclass(frozen, skip_from_py_object, module = "sls_rpe")]
#[derive(Clone, Copy)]
pub struct UncertaintySet {
    inner: sls_core::UncertaintySet,
}

#[pymethods]
impl UncertaintySet {
    #[new]
    #[pyo3(signature = (mu_min, mu_max, eps_max, beta_0 = 1.0))]
    fn new(mu_min: f64, mu_max: f64, eps_max: f64, beta_0: f64) -> PyResult<Self> {
        let inner = sls_core::UncertaintySet::new(mu_min, mu_max, eps_max, beta_0).map_err(to_py)?;
        Ok(UncertaintySet { inner })
    }

    #[getter]
    fn mu_min(&self) -> f64 {
        self.inner.mu_min()
    }

    #[getter]
    fn mu_max(&self) -> f64 {
        self.inner.mu_max()
    }

    #[getter]
    fn eps_max(&self) -> f64 {
        self.inner.eps_max()
    }

    #[getter]
    fn beta_0(&self) -> f64 {
        self.inner.beta_0()
    }

    /// `mu_2 = (1 + eps) beta_0 mu_1`, after checking the pair is admissible.
    fn mu_2(&self, mu_1: f64, eps: f64) -> PyResult<f64> {
        let real = MarketRealization::new(mu_1, eps, &self.inner).map_err(to_py)?;
        Ok(real.mu_2(self.inner.beta_0()))
    }

    fn __repr__(&self) -> String {
        format!(
            "UncertaintySet(mu_min={}, mu_max={}, eps_max={}, beta_0={})",
            self.inner.mu_min(),
            self.inner.mu_max(),
            self.inner.eps_max(),
            self.inner.beta_0()
        )
    }
}

#[pyclass(frozen, skip_from_py_object, module = "sls_rpe")]
#[derive(Clone, Copy)]
pub struct Controller {
    inner: sls_core::ControllerParams,
}

#[pymethods]
impl Controller {
    #[new]
    #[pyo3(signature = (i0, k, beta_0 = 1.0))]
    fn new(i0: f64, k: f64, beta_0: f64) -> PyResult<Self> {
        let inner = sls_core::ControllerParams::new(i0, k, beta_0).map_err(to_py)?;
        Ok(Controller { inner })
    }

    #[getter]
    fn i0_1(&self) -> f64 {
        self.inner.i0_1()
    }

    #[getter]
    fn i0_2(&self) -> f64 {
        self.inner.i0_2()
    }

    #[getter]
    fn k1(&self) -> f64 {
        self.inner.k1()
    }

    #[getter]
    fn k2(&self) -> f64 {
        self.inner.k2()
    }

    fn expected_gain(&self, mu_1: f64, eps: f64, n: u32) -> PyResult<f64> {
        analytic::expected_gain_two(&self.inner, mu_1, eps, horizon(n)?).map_err(to_py)
    }

    /// Stage recursion on expectations with independent long and short drifts.
    fn expected_gain_recursion(&self, mu_long: f64, mu_short: f64, steps: u32) -> PyResult<f64> {
        analytic::expected_gain_recursion(&self.inner, mu_long, mu_short, steps).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Controller(i0={}, k={}, beta_0={})",
            self.inner.i0(),
            self.inner.k(),
            self.inner.beta_0()
        )
    }
}

#[pyfunction]
fn expected_gain_single(i0: f64, k: f64, mu: f64, n: u32) -> PyResult<f64> {
    analytic::expected_gain_single(i0, k, mu, horizon(n)?).map_err(to_py)
}

/// `eps_c(theta)`; `inf` where the bound does not exist.
#[pyfunction]
fn critical_uncertainty(theta: f64, n: u32) -> PyResult<f64> {
    Ok(rpe::critical_uncertainty(theta, horizon(n)?).to_f64())
}

#[pyfunction]
fn critical_uncertainty_derivative(theta: f64, n: u32) -> PyResult<f64> {
    rpe::critical_uncertainty_derivative(theta, horizon(n)?).map_err(to_py)
}

/// Returns `(holds, branch)` where `branch` names the deciding inequality.
#[pyfunction]
#[pyo3(signature = (k, set, n, i0 = 1.0))]
fn rpe_holds(k: f64, set: &UncertaintySet, n: u32, i0: f64) -> PyResult<(bool, &'static str)> {
    let v = rpe::rpe_holds(k, &set.inner, i0, horizon(n)?).map_err(to_py)?;
    let branch = match v.reason {
        RpeReason::OddCorners { .. } => "odd_corners",
        RpeReason::EvenAboveDoubling { .. } => "even_above_doubling",
        RpeReason::EvenBelowCrossing { .. } => "even_below_crossing",
        RpeReason::EvenGap { .. } => "even_gap",
    };
    Ok((v.holds, branch))
}

/// Feasible `K` as a list of open intervals `(lo, hi)`; `hi` may be `inf`.
#[pyfunction]
#[pyo3(signature = (set, n, i0 = 1.0, k_max_scan = None, step = None))]
fn admissible_k_region(
    py: Python<'_>,
    set: &UncertaintySet,
    n: u32,
    i0: f64,
    k_max_scan: Option<f64>,
    step: Option<f64>,
) -> PyResult<Vec<(f64, f64)>> {
    let n = horizon(n)?;
    let (default_max, default_step) = rpe::default_scan(&set.inner);
    let k_max = k_max_scan.unwrap_or(default_max);
    let step = step.unwrap_or(if k_max_scan.is_some() {
        k_max / 1e4
    } else {
        default_step
    });
    let inner = set.inner;
    let region = py
        .detach(|| rpe::admissible_k_region(&inner, i0, n, k_max, step))
        .map_err(to_py)?;
    Ok(region.intervals.iter().map(|iv| (iv.lo, iv.hi.to_f64())).collect())
}

#[pyfunction]
#[pyo3(signature = (k, mu_min, mu_max, n, beta_0 = 1.0, i0 = 1.0))]
fn corollary_delta(k: f64, mu_min: f64, mu_max: f64, n: u32, beta_0: f64, i0: f64) -> PyResult<f64> {
    let d = rpe::corollary_delta(k, mu_min, mu_max, beta_0, i0, horizon(n)?).map_err(to_py)?;
    Ok(match d {
        ExtReal::Finite(x) => x,
        ExtReal::PosInfinity => f64::INFINITY,
    })
}

#[pyfunction]
fn apply_leverage_cap(i1: f64, i2: f64, gamma: f64, v: f64) -> (f64, f64) {
    sim::apply_leverage_cap(i1, i2, gamma, v)
}

/// One simulated path as a dict of per-stage lists plus the final return.
#[pyfunction]
#[pyo3(signature = (controller, set, mu_1, eps, n, seed, sigma_1, sigma_2, v0, gamma = None, s1_0 = 100.0, s2_0 = 100.0))]
#[allow(clippy::too_many_arguments)]
fn simulate_path<'py>(
    py: Python<'py>,
    controller: &Controller,
    set: &UncertaintySet,
    mu_1: f64,
    eps: f64,
    n: u32,
    seed: u64,
    sigma_1: f64,
    sigma_2: f64,
    v0: f64,
    gamma: Option<f64>,
    s1_0: f64,
    s2_0: f64,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let real = MarketRealization::new(mu_1, eps, &set.inner).map_err(to_py)?;
    let gbm = GbmParams::for_realization(&real, set.inner.beta_0(), sigma_1, sigma_2, s1_0, s2_0).map_err(to_py)?;
    let lev = LeverageConfig::new(gamma, v0).map_err(to_py)?;
    let path = sim::run_path(&gbm, &controller.inner, &lev, horizon(n)?, seed).map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    let col = |f: fn(&sim::StageRecord) -> f64| path.records.iter().map(f).collect::<Vec<f64>>();
    out.set_item("k", path.records.iter().map(|r| r.k).collect::<Vec<u32>>())?;
    out.set_item("s1", col(|r| r.s1))?;
    out.set_item("s2", col(|r| r.s2))?;
    out.set_item("i1", col(|r| r.i1))?;
    out.set_item("i2", col(|r| r.i2))?;
    out.set_item("g1", col(|r| r.g1))?;
    out.set_item("g2", col(|r| r.g2))?;
    out.set_item("g", col(|r| r.gain()))?;
    out.set_item("v", col(|r| r.v))?;
    out.set_item("final_return", path.final_return)?;
    out.set_item("price_floor_hit", path.price_floor_hit)?;
    Ok(out)
}

/// Ensemble summary statistics as a dict.
#[pyfunction]
#[pyo3(signature = (controller, set, n, n_paths, seed, sigma_1, sigma_2, v0, gamma = None, workers = None))]
#[allow(clippy::too_many_arguments)]
fn run_ensemble<'py>(
    py: Python<'py>,
    controller: &Controller,
    set: &UncertaintySet,
    n: u32,
    n_paths: u64,
    seed: u64,
    sigma_1: f64,
    sigma_2: f64,
    v0: f64,
    gamma: Option<f64>,
    workers: Option<usize>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let config = EnsembleConfig {
        n_paths,
        master_seed: seed,
        set: set.inner,
        params: controller.inner,
        leverage: LeverageConfig::new(gamma, v0).map_err(to_py)?,
        horizon: horizon(n)?,
        sigma_1,
        sigma_2,
        s1_0: sim::DEFAULT_INITIAL_PRICE,
        s2_0: sim::DEFAULT_INITIAL_PRICE,
        bins: DEFAULT_BINS,
        quantiles: DEFAULT_QUANTILES.to_vec(),
    };
    let result = py.detach(|| ensemble::run_ensemble(&config, workers)).map_err(to_py)?;
    let s = &result.stats;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("mean", s.mean_return)?;
    out.set_item("median", s.median_return)?;
    out.set_item("prob_profit", s.prob_profit)?;
    out.set_item("loss_tail", s.loss_tail)?;
    out.set_item("n_paths", s.n_paths)?;
    out.set_item("seed", s.seed)?;
    out.set_item(
        "quantiles",
        s.quantiles.iter().map(|q| (q.p, q.value)).collect::<Vec<_>>(),
    )?;
    out.set_item("histogram_edges", result.histogram.edges.clone())?;
    out.set_item("histogram_counts", result.histogram.counts.clone())?;
    Ok(out)
}

#[pymodule]
pub fn sls_rpe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<UncertaintySet>()?;
    m.add_class::<Controller>()?;
    m.add_function(wrap_pyfunction!(expected_gain_single, m)?)?;
    m.add_function(wrap_pyfunction!(critical_uncertainty, m)?)?;
    m.add_function(wrap_pyfunction!(critical_uncertainty_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(rpe_holds, m)?)?;
    m.add_function(wrap_pyfunction!(admissible_k_region, m)?)?;
    m.add_function(wrap_pyfunction!(corollary_delta, m)?)?;
    m.add_function(wrap_pyfunction!(apply_leverage_cap, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_path, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    Ok(())
}
