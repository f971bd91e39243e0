//! Log-domain Sinkhorn solver for the discrete Schrödinger system.
//!
//! For marginals mu = sum_i w_i delta_{x_i} and nu = sum_j s_j delta_{y_j}
//! the potentials (u, v) must satisfy
//!
//! ```text
//! exp(u(x_i)/eps) = sum_j s_j exp((<x_i,y_j> - v(y_j))/eps)
//! exp(v(y_j)/eps) = sum_i w_i exp((<x_i,y_j> - u(x_i))/eps)
//! ```
//!
//! Each half-iteration solves one equation exactly in closed log-sum-exp
//! form; the loop stops when the L1 distance between the plan's marginals
//! and (mu, nu) drops below the requested tolerance. All sums run in a
//! fixed sequential order, so repeated solves are bit-identical.

use std::sync::Arc;

use crate::field::{PotentialField, PotentialKind};
use crate::marginals::{ConvexDomain, DiscreteMarginal};
use crate::num::{dot, norm_sq};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence at eps = {epsilon}: residual {residual} > tol {tol} after {iterations} iterations")]
    NonConvergence {
        epsilon: f64,
        residual: f64,
        tol: f64,
        iterations: u64,
        /// Residual history, one entry per iteration.
        trace: Vec<f64>,
    },
    #[error("warm-start potential length {got} does not match marginal size {want}")]
    WarmStartMismatch { got: usize, want: usize },
    #[error("subset contains no nodes of the u-side grid")]
    EmptySubset,
    #[error("normalization reference is defined on a different grid")]
    GridMismatch,
}

/// Solver knobs. The defaults match the experiment harness: the residual
/// tolerance is the quantity entering every downstream estimate, and the
/// iteration budget is generous because the contraction rate degrades as
/// eps shrinks.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: u64,
    /// Emit a warning (once) when the iteration count passes this mark.
    pub warn_at: u64,
    /// Keep the per-iteration residual trace in the solution.
    pub keep_trace: bool,
    /// Also record the dual functional value at every iteration (cheap: it
    /// reuses the column log-sum-exp pass).
    pub keep_dual_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 1_000_000,
            warn_at: 100_000,
            keep_trace: true,
            keep_dual_trace: false,
        }
    }
}

/// A converged (or raw) potential pair with its diagnostics.
#[derive(Debug, Clone)]
pub struct EntropicSolution {
    pub mu: Arc<DiscreteMarginal>,
    pub nu: Arc<DiscreteMarginal>,
    pub epsilon: f64,
    pub u: PotentialField,
    pub v: PotentialField,
    /// L1 distance between the plan's marginals and (mu, nu).
    pub marginal_residual: f64,
    pub iterations: u64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub residual_trace: Vec<f64>,
    /// Dual functional per iteration; empty unless requested.
    pub dual_trace: Vec<f64>,
}

impl EntropicSolution {
    pub fn u_values(&self) -> &[f64] {
        &self.u.values
    }

    pub fn v_values(&self) -> &[f64] {
        &self.v.values
    }

    /// Assemble a solution from raw potential vectors without iterating.
    ///
    /// The marginal residual is recomputed honestly, so the result may be
    /// arbitrarily infeasible; useful for warm starts and for evaluating the
    /// dual functional at non-optimal potentials.
    pub fn from_potentials(
        mu: Arc<DiscreteMarginal>,
        nu: Arc<DiscreteMarginal>,
        epsilon: f64,
        u_values: Vec<f64>,
        v_values: Vec<f64>,
    ) -> Result<Self, SolveError> {
        if epsilon <= 0.0 {
            return Err(SolveError::BadEpsilon(epsilon));
        }
        if u_values.len() != mu.len() {
            return Err(SolveError::WarmStartMismatch {
                got: u_values.len(),
                want: mu.len(),
            });
        }
        if v_values.len() != nu.len() {
            return Err(SolveError::WarmStartMismatch {
                got: v_values.len(),
                want: nu.len(),
            });
        }
        let u = field_for_marginal(&mu, u_values, epsilon, PotentialKind::SchrodingerU);
        let v = field_for_marginal(&nu, v_values, epsilon, PotentialKind::SchrodingerV);
        let mut sol = EntropicSolution {
            mu,
            nu,
            epsilon,
            u,
            v,
            marginal_residual: f64::NAN,
            iterations: 0,
            primal_value: f64::NAN,
            dual_value: f64::NAN,
            residual_trace: Vec::new(),
            dual_trace: Vec::new(),
        };
        sol.marginal_residual = marginal_residual(&sol);
        sol.primal_value = crate::potentials::entropic_cost(&sol);
        sol.dual_value = crate::potentials::dual_value(&sol);
        Ok(sol)
    }
}

fn field_for_marginal(
    m: &DiscreteMarginal,
    values: Vec<f64>,
    epsilon: f64,
    kind: PotentialKind,
) -> PotentialField {
    if m.full_tensor {
        PotentialField::new(m.grid.clone(), values, Some(epsilon), kind)
            .expect("values sized to the marginal")
    } else {
        let index: Vec<usize> = (0..m.len()).map(|i| m.tensor_index(i)).collect();
        PotentialField::new_clipped(m.grid.clone(), values, index, Some(epsilon), kind)
            .expect("values sized to the marginal")
    }
}

/// Pairwise inner products <x_i, y_j>, row-major.
pub(crate) fn gram_matrix(mu: &DiscreteMarginal, nu: &DiscreteMarginal) -> Vec<f64> {
    let n = mu.len();
    let m = nu.len();
    let mut g = vec![0.0; n * m];
    for i in 0..n {
        let xi = mu.node(i);
        for j in 0..m {
            g[i * m + j] = dot(xi, nu.node(j));
        }
    }
    g
}

/// Solve the Schrödinger system with default warm start (u = |x|^2/2,
/// matching the eps -> infinity limit up to constants).
pub fn solve_schrodinger(
    mu: &Arc<DiscreteMarginal>,
    nu: &Arc<DiscreteMarginal>,
    epsilon: f64,
    tol: f64,
    max_iter: u64,
) -> Result<EntropicSolution, SolveError> {
    let opts = SolverOptions {
        tol,
        max_iter,
        ..SolverOptions::default()
    };
    solve_schrodinger_with(mu, nu, epsilon, &opts, None)
}

/// Full-control solver entry point. `warm` supplies starting potentials
/// (typically the solution at the previous, larger eps of a sweep).
pub fn solve_schrodinger_with(
    mu: &Arc<DiscreteMarginal>,
    nu: &Arc<DiscreteMarginal>,
    epsilon: f64,
    opts: &SolverOptions,
    warm: Option<(&[f64], &[f64])>,
) -> Result<EntropicSolution, SolveError> {
    if epsilon <= 0.0 {
        return Err(SolveError::BadEpsilon(epsilon));
    }
    if opts.tol <= 0.0 {
        return Err(SolveError::BadTolerance(opts.tol));
    }
    let n = mu.len();
    let m = nu.len();
    let (mut u, mut v) = match warm {
        Some((wu, wv)) => {
            if wu.len() != n {
                return Err(SolveError::WarmStartMismatch {
                    got: wu.len(),
                    want: n,
                });
            }
            if wv.len() != m {
                return Err(SolveError::WarmStartMismatch {
                    got: wv.len(),
                    want: m,
                });
            }
            (wu.to_vec(), wv.to_vec())
        }
        None => (
            (0..n).map(|i| 0.5 * norm_sq(mu.node(i))).collect(),
            (0..m).map(|j| 0.5 * norm_sq(nu.node(j))).collect(),
        ),
    };

    let g = gram_matrix(mu, nu);
    let lw: Vec<f64> = mu.weights().iter().map(|w| w.ln()).collect();
    let ls: Vec<f64> = nu.weights().iter().map(|s| s.ln()).collect();
    let inv_eps = 1.0 / epsilon;

    let mut trace = Vec::new();
    let mut dual_trace = Vec::new();
    let mut iterations: u64 = 0;
    let mut warned = false;
    // static pieces of the dual functional, for the optional trace
    let lin_mu: f64 = (0..n)
        .map(|i| mu.weight(i) * 0.5 * norm_sq(mu.node(i)))
        .sum::<f64>();
    let lin_nu: f64 = (0..m)
        .map(|j| nu.weight(j) * 0.5 * norm_sq(nu.node(j)))
        .sum::<f64>();
    // scratch for the column pass
    let mut col_lse = vec![0.0f64; m];

    let residual = loop {
        // Column pass: pv_j = lse_i(lw_i + (g_ij - u_i)/eps). This yields
        // both the nu-side residual of the current pair and the v-update.
        for c in col_lse.iter_mut() {
            *c = f64::NEG_INFINITY;
        }
        // max sweep
        for i in 0..n {
            let base = lw[i] - u[i] * inv_eps;
            let row = &g[i * m..(i + 1) * m];
            for j in 0..m {
                let t = base + row[j] * inv_eps;
                if t > col_lse[j] {
                    col_lse[j] = t;
                }
            }
        }
        let col_max = col_lse.clone();
        for c in col_lse.iter_mut() {
            *c = 0.0;
        }
        for i in 0..n {
            let base = lw[i] - u[i] * inv_eps;
            let row = &g[i * m..(i + 1) * m];
            for j in 0..m {
                col_lse[j] += (base + row[j] * inv_eps - col_max[j]).exp();
            }
        }
        for j in 0..m {
            col_lse[j] = col_max[j] + col_lse[j].ln();
        }

        // nu-side L1 residual of the current (u, v). After any u-update the
        // mu side is exact by construction (the same log-sum-exp defines
        // u_i), so it only needs measuring on the round that inspects the
        // warm start; an already-feasible start then returns untouched.
        {
            let mut residual = 0.0;
            for j in 0..m {
                residual += nu.weight(j) * ((col_lse[j] - v[j] * inv_eps).exp() - 1.0).abs();
            }
            if iterations == 0 {
                for i in 0..n {
                    let row = &g[i * m..(i + 1) * m];
                    let mut mx = f64::NEG_INFINITY;
                    for j in 0..m {
                        let t = ls[j] + (row[j] - v[j]) * inv_eps;
                        if t > mx {
                            mx = t;
                        }
                    }
                    let mut s = 0.0;
                    for j in 0..m {
                        s += (ls[j] + (row[j] - v[j]) * inv_eps - mx).exp();
                    }
                    let row_mass = (mx + s.ln() - u[i] * inv_eps).exp();
                    residual += mu.weight(i) * (row_mass - 1.0).abs();
                }
            }
            if opts.keep_trace {
                trace.push(residual);
            }
            if opts.keep_dual_trace {
                // D(phi, psi) given the column pass: the plan mass is
                // sum_j s_j exp(lse_j - v_j/eps)
                let mut mass = 0.0;
                let mut linear = lin_mu + lin_nu;
                for i in 0..n {
                    linear -= mu.weight(i) * u[i];
                }
                for j in 0..m {
                    linear -= nu.weight(j) * v[j];
                    mass += nu.weight(j) * (col_lse[j] - v[j] * inv_eps).exp();
                }
                dual_trace.push(linear - epsilon * mass);
            }
            if residual <= opts.tol {
                break residual;
            }
            if iterations >= opts.max_iter {
                return Err(SolveError::NonConvergence {
                    epsilon,
                    residual,
                    tol: opts.tol,
                    iterations,
                    trace,
                });
            }
            if !warned && iterations >= opts.warn_at {
                log::warn!(
                    "sinkhorn at eps = {epsilon}: {iterations} iterations, residual {residual:.3e} (tol {:.1e})",
                    opts.tol
                );
                warned = true;
            }
        }

        // v-update (second equation exact), then u-update (first exact).
        for j in 0..m {
            v[j] = epsilon * col_lse[j];
        }
        for i in 0..n {
            let row = &g[i * m..(i + 1) * m];
            let mut mx = f64::NEG_INFINITY;
            for j in 0..m {
                let t = ls[j] + (row[j] - v[j]) * inv_eps;
                if t > mx {
                    mx = t;
                }
            }
            let mut s = 0.0;
            for j in 0..m {
                s += (ls[j] + (row[j] - v[j]) * inv_eps - mx).exp();
            }
            u[i] = epsilon * (mx + s.ln());
        }
        iterations += 1;
    };

    let u_field = field_for_marginal(mu, u, epsilon, PotentialKind::SchrodingerU);
    let v_field = field_for_marginal(nu, v, epsilon, PotentialKind::SchrodingerV);
    let mut sol = EntropicSolution {
        mu: Arc::clone(mu),
        nu: Arc::clone(nu),
        epsilon,
        u: u_field,
        v: v_field,
        marginal_residual: residual,
        iterations,
        primal_value: f64::NAN,
        dual_value: f64::NAN,
        residual_trace: trace,
        dual_trace,
    };
    sol.primal_value = crate::potentials::entropic_cost(&sol);
    sol.dual_value = crate::potentials::dual_value(&sol);
    Ok(sol)
}

/// Recompute the L1 marginal residual of the induced plan from scratch.
pub fn marginal_residual(sol: &EntropicSolution) -> f64 {
    let n = sol.mu.len();
    let m = sol.nu.len();
    let inv_eps = 1.0 / sol.epsilon;
    let u = sol.u_values();
    let v = sol.v_values();
    let mut res = 0.0;

    // mu side: row sums of the plan density against nu
    for i in 0..n {
        let xi = sol.mu.node(i);
        let mut mx = f64::NEG_INFINITY;
        for j in 0..m {
            let t = sol.nu.weight(j).ln() + (dot(xi, sol.nu.node(j)) - v[j]) * inv_eps;
            if t > mx {
                mx = t;
            }
        }
        let mut s = 0.0;
        for j in 0..m {
            s += (sol.nu.weight(j).ln() + (dot(xi, sol.nu.node(j)) - v[j]) * inv_eps - mx).exp();
        }
        let row_mass = (mx + s.ln() - u[i] * inv_eps).exp();
        res += sol.mu.weight(i) * (row_mass - 1.0).abs();
    }
    // nu side
    for j in 0..m {
        let yj = sol.nu.node(j);
        let mut mx = f64::NEG_INFINITY;
        for i in 0..n {
            let t = sol.mu.weight(i).ln() + (dot(sol.mu.node(i), yj) - u[i]) * inv_eps;
            if t > mx {
                mx = t;
            }
        }
        let mut s = 0.0;
        for i in 0..n {
            s += (sol.mu.weight(i).ln() + (dot(sol.mu.node(i), yj) - u[i]) * inv_eps - mx).exp();
        }
        let col_mass = (mx + s.ln() - v[j] * inv_eps).exp();
        res += sol.nu.weight(j) * (col_mass - 1.0).abs();
    }
    res
}

/// Shift the pair by the constant d = min over `subset` nodes of
/// (u - u0), so that u - u0 has a zero on the subset. The plan density and
/// every derived observable are invariant under (u - d, v + d).
pub fn normalize_pair(
    sol: &EntropicSolution,
    u0: &PotentialField,
    subset: &ConvexDomain,
) -> Result<EntropicSolution, SolveError> {
    if u0.grid != sol.u.grid {
        return Err(SolveError::GridMismatch);
    }
    let idx = sol.mu.nodes_in(subset);
    if idx.is_empty() {
        return Err(SolveError::EmptySubset);
    }
    let d = idx
        .iter()
        .map(|&i| sol.u.values[i] - u0.values[i])
        .fold(f64::INFINITY, f64::min);
    let mut out = sol.clone();
    for val in &mut out.u.values {
        *val -= d;
    }
    for val in &mut out.v.values {
        *val += d;
    }
    Ok(out)
}
