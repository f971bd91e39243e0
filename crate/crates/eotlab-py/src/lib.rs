//! Python bindings: the solver, the eps = 0 references, the sweep harness
//! and the closed-form exponent helpers, driven by the same flat config
//! format as the command-line runner.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use eotlab::config::parse_config;
use eotlab::estimates;
use eotlab::marginals::{build_marginal, DiscreteMarginal};
use eotlab::potentials;
use eotlab::reference::{solve_discrete_lp, solve_quantile_1d};
use eotlab::report::{sweep_csv, sweep_summary};
use eotlab::sinkhorn::{solve_schrodinger_with, EntropicSolution, SolverOptions};

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn marginals_from_config(
    text: &str,
) -> PyResult<(
    Arc<DiscreteMarginal>,
    Arc<DiscreteMarginal>,
    eotlab::config::ExperimentConfig,
)> {
    let cfg = parse_config(text).map_err(value_err)?;
    let inst = &cfg.instance;
    let src = inst.source_domain.to_domain().map_err(value_err)?;
    let tgt = inst.target_domain.to_domain().map_err(value_err)?;
    let f = inst.source_density.build(&src).map_err(value_err)?;
    let g = inst.target_density.build(&tgt).map_err(value_err)?;
    let mu = Arc::new(build_marginal(&src, &f, inst.resolution).map_err(value_err)?);
    let nu = Arc::new(build_marginal(&tgt, &g, inst.resolution).map_err(value_err)?);
    Ok((mu, nu, cfg))
}

/// A converged Schrödinger potential pair.
#[pyclass(name = "Solution")]
struct PySolution {
    inner: EntropicSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn iterations(&self) -> u64 {
        self.inner.iterations
    }

    #[getter]
    fn marginal_residual(&self) -> f64 {
        self.inner.marginal_residual
    }

    #[getter]
    fn primal_value(&self) -> f64 {
        self.inner.primal_value
    }

    #[getter]
    fn dual_value(&self) -> f64 {
        self.inner.dual_value
    }

    fn u_values(&self) -> Vec<f64> {
        self.inner.u_values().to_vec()
    }

    fn v_values(&self) -> Vec<f64> {
        self.inner.v_values().to_vec()
    }

    fn source_nodes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.mu.len())
            .map(|i| self.inner.mu.node(i).to_vec())
            .collect()
    }

    fn target_nodes(&self) -> Vec<Vec<f64>> {
        (0..self.inner.nu.len())
            .map(|j| self.inner.nu.node(j).to_vec())
            .collect()
    }

    /// Gradient of u at a point (conditional barycenter of the plan).
    fn grad_u(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        potentials::grad_u(&self.inner, &x).map_err(value_err)
    }

    fn grad_v(&self, y: Vec<f64>) -> PyResult<Vec<f64>> {
        potentials::grad_v(&self.inner, &y).map_err(value_err)
    }

    /// Hessian of u at a point, as a dense row-major matrix.
    fn hessian_u(&self, x: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let h = potentials::hessian_u(&self.inner, &x).map_err(value_err)?;
        Ok((0..h.n)
            .map(|i| (0..h.n).map(|j| h.get(i, j)).collect())
            .collect())
    }

    /// Density of the plan against mu (x) nu.
    fn plan_density(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        potentials::plan_density(&self.inner, &x, &y).map_err(value_err)
    }

    fn entropic_cost(&self) -> f64 {
        potentials::entropic_cost(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(epsilon={}, iterations={}, residual={:.3e})",
            self.inner.epsilon, self.inner.iterations, self.inner.marginal_residual
        )
    }
}

/// Solve the Schrödinger system for the instance described by a config
/// string; `epsilon` defaults to the first (largest) schedule entry.
#[pyfunction]
#[pyo3(signature = (config_text, epsilon=None))]
fn solve(config_text: &str, epsilon: Option<f64>) -> PyResult<PySolution> {
    let (mu, nu, cfg) = marginals_from_config(config_text)?;
    let eps = epsilon.unwrap_or(cfg.epsilons[0]);
    let opts = SolverOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        ..SolverOptions::default()
    };
    let sol = solve_schrodinger_with(&mu, &nu, eps, &opts, None).map_err(runtime_err)?;
    Ok(PySolution { inner: sol })
}

/// Run the full sweep and return (csv, summary, all_gates_pass).
#[pyfunction]
fn sweep(config_text: &str) -> PyResult<(String, String, bool)> {
    let cfg = parse_config(config_text).map_err(value_err)?;
    let report = estimates::run_sweep(&cfg).map_err(runtime_err)?;
    Ok((
        sweep_csv(&report),
        sweep_summary(&report),
        report.all_gates_pass(),
    ))
}

/// Exact eps = 0 reference: returns (w2sq, map values at source nodes).
#[pyfunction]
fn reference(config_text: &str) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let (mu, nu, cfg) = marginals_from_config(config_text)?;
    let r = if cfg.instance.dimension == 1 {
        solve_quantile_1d(&mu, &nu).map_err(runtime_err)?
    } else {
        solve_discrete_lp(&mu, &nu).map_err(runtime_err)?
    };
    let map = (0..mu.len()).map(|i| r.map_at(i).to_vec()).collect();
    Ok((r.w2sq, map))
}

/// Hölder exponent of the uniform gradient estimate:
/// min(1/n^2, alpha^2/(1+alpha)^2).
#[pyfunction]
fn beta_from_alpha(alpha: f64, n: usize) -> PyResult<f64> {
    estimates::beta_from_alpha(alpha, n).map_err(value_err)
}

/// Detachment exponent for an alpha-Hölder gradient: (1+alpha)/alpha.
#[pyfunction]
fn p0_from_alpha(alpha: f64) -> PyResult<f64> {
    estimates::p0_from_alpha(alpha).map_err(value_err)
}

#[pymodule]
#[pyo3(name = "eotlab")]
fn eotlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(reference, m)?)?;
    m.add_function(wrap_pyfunction!(beta_from_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(p0_from_alpha, m)?)?;
    Ok(())
}
