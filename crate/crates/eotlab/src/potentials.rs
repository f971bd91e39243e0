//! Derived quantities of an entropic solution: the Gibbs plan density, the
//! primal cost with entropy, the dual functional, and the gradient/Hessian
//! representation formulas.
//!
//! Gradients and Hessians re-evaluate the potential through the Schrödinger
//! system at the query point instead of interpolating, which keeps the
//! conditional weights normalized to machine precision (the representation
//! formulas assume exactly that).

use crate::num::{dist, dot, logsumexp_by, SymMat};
use crate::reference::ReferenceSolution;
use crate::sinkhorn::EntropicSolution;

#[derive(Debug, thiserror::Error)]
pub enum PotentialError {
    #[error("query point {0:?} lies outside the node bounding box")]
    OutOfDomain(Vec<f64>),
    #[error("reference and solution live on different grids")]
    InstanceMismatch,
}

/// Exponents below this are treated as exact zeros (the x log x convention
/// at the origin, with a hard floor well above f64 underflow).
const LOG_FLOOR: f64 = -690.0; // ln(1e-300) ~ -690.77

fn check_bbox(values_bbox: &[(f64, f64)], x: &[f64]) -> Result<(), PotentialError> {
    let inside = values_bbox
        .iter()
        .zip(x)
        .all(|(&(lo, hi), &xi)| xi >= lo - 1e-12 && xi <= hi + 1e-12);
    if inside {
        Ok(())
    } else {
        Err(PotentialError::OutOfDomain(x.to_vec()))
    }
}

/// u(x) re-evaluated from the first Schrödinger equation:
/// u(x) = eps * log sum_j s_j exp((<x,y_j> - v_j)/eps).
pub fn u_via_system(sol: &EntropicSolution, x: &[f64]) -> f64 {
    let m = sol.nu.len();
    let inv_eps = 1.0 / sol.epsilon;
    let v = sol.v_values();
    sol.epsilon
        * logsumexp_by(m, |j| {
            sol.nu.weight(j).ln() + (dot(x, sol.nu.node(j)) - v[j]) * inv_eps
        })
}

/// v(y) re-evaluated from the second Schrödinger equation.
pub fn v_via_system(sol: &EntropicSolution, y: &[f64]) -> f64 {
    let n = sol.mu.len();
    let inv_eps = 1.0 / sol.epsilon;
    let u = sol.u_values();
    sol.epsilon
        * logsumexp_by(n, |i| {
            sol.mu.weight(i).ln() + (dot(sol.mu.node(i), y) - u[i]) * inv_eps
        })
}

/// Index of the node coinciding with `x` (within 1e-12 per coordinate), if
/// any. Stored potential values are used verbatim at nodes so that node
/// queries reproduce the raw vectors bit-for-bit.
fn node_at<'a>(nodes: impl Fn(usize) -> &'a [f64], len: usize, x: &[f64]) -> Option<usize> {
    (0..len).find(|&i| nodes(i).iter().zip(x).all(|(a, b)| (a - b).abs() <= 1e-12))
}

/// Density of the entropic plan with respect to mu (x) nu:
/// exp((<x,y> - u(x) - v(y)) / eps), evaluated in log space.
pub fn plan_density(sol: &EntropicSolution, x: &[f64], y: &[f64]) -> Result<f64, PotentialError> {
    Ok(log_plan_density(sol, x, y)?.exp())
}

/// log of [`plan_density`]; cheaper when only comparisons are needed.
pub fn log_plan_density(
    sol: &EntropicSolution,
    x: &[f64],
    y: &[f64],
) -> Result<f64, PotentialError> {
    check_bbox(&sol.u.node_bbox(), x)?;
    check_bbox(&sol.v.node_bbox(), y)?;
    let ux = match node_at(|i| sol.mu.node(i), sol.mu.len(), x) {
        Some(i) => sol.u_values()[i],
        None => u_via_system(sol, x),
    };
    let vy = match node_at(|j| sol.nu.node(j), sol.nu.len(), y) {
        Some(j) => sol.v_values()[j],
        None => v_via_system(sol, y),
    };
    Ok((dot(x, y) - ux - vy) / sol.epsilon)
}

/// Primal objective of the plan: transport cost plus eps times relative
/// entropy, summed over all node pairs. Contributions with density below
/// 1e-300 are dropped (0 log 0 = 0).
pub fn entropic_cost(sol: &EntropicSolution) -> f64 {
    let n = sol.mu.len();
    let m = sol.nu.len();
    let u = sol.u_values();
    let v = sol.v_values();
    let inv_eps = 1.0 / sol.epsilon;
    let mut total = 0.0;
    for i in 0..n {
        let xi = sol.mu.node(i);
        let wi = sol.mu.weight(i);
        for j in 0..m {
            let yj = sol.nu.node(j);
            let lr = (dot(xi, yj) - u[i] - v[j]) * inv_eps;
            if lr < LOG_FLOOR {
                continue;
            }
            let d = dist(xi, yj);
            total += wi * sol.nu.weight(j) * lr.exp() * (0.5 * d * d + sol.epsilon * lr);
        }
    }
    total
}

/// Transport part of the primal (no entropy term).
pub fn transport_cost(sol: &EntropicSolution) -> f64 {
    let n = sol.mu.len();
    let m = sol.nu.len();
    let u = sol.u_values();
    let v = sol.v_values();
    let inv_eps = 1.0 / sol.epsilon;
    let mut total = 0.0;
    for i in 0..n {
        let xi = sol.mu.node(i);
        let wi = sol.mu.weight(i);
        for j in 0..m {
            let yj = sol.nu.node(j);
            let lr = (dot(xi, yj) - u[i] - v[j]) * inv_eps;
            if lr < LOG_FLOOR {
                continue;
            }
            let d = dist(xi, yj);
            total += wi * sol.nu.weight(j) * lr.exp() * 0.5 * d * d;
        }
    }
    total
}

/// Dual functional D(phi, psi) at the solution's potentials, with
/// phi = |x|^2/2 - u and psi = |y|^2/2 - v. The exponential mass term is
/// accumulated in log space.
pub fn dual_value(sol: &EntropicSolution) -> f64 {
    let n = sol.mu.len();
    let m = sol.nu.len();
    let u = sol.u_values();
    let v = sol.v_values();
    let inv_eps = 1.0 / sol.epsilon;
    let mut linear = 0.0;
    for i in 0..n {
        let xi = sol.mu.node(i);
        linear += sol.mu.weight(i) * (0.5 * dot(xi, xi) - u[i]);
    }
    for j in 0..m {
        let yj = sol.nu.node(j);
        linear += sol.nu.weight(j) * (0.5 * dot(yj, yj) - v[j]);
    }
    // log-sum-exp over all pairs of log(w_i s_j rho_ij)
    let lmass = logsumexp_by(n * m, |k| {
        let i = k / m;
        let j = k % m;
        let xi = sol.mu.node(i);
        let yj = sol.nu.node(j);
        sol.mu.weight(i).ln() + sol.nu.weight(j).ln() + (dot(xi, yj) - u[i] - v[j]) * inv_eps
    });
    linear - sol.epsilon * lmass.exp()
}

/// Conditional weights of nu given x under the Gibbs plan, normalized by
/// re-evaluating u(x) through the system; their sum is 1 to float rounding.
fn conditional_weights_u(sol: &EntropicSolution, x: &[f64]) -> Vec<f64> {
    let m = sol.nu.len();
    let inv_eps = 1.0 / sol.epsilon;
    let v = sol.v_values();
    let mut t = vec![0.0f64; m];
    let mut mx = f64::NEG_INFINITY;
    for j in 0..m {
        t[j] = sol.nu.weight(j).ln() + (dot(x, sol.nu.node(j)) - v[j]) * inv_eps;
        if t[j] > mx {
            mx = t[j];
        }
    }
    let mut total = 0.0;
    for tj in t.iter_mut() {
        *tj = (*tj - mx).exp();
        total += *tj;
    }
    for tj in t.iter_mut() {
        *tj /= total;
    }
    t
}

fn conditional_weights_v(sol: &EntropicSolution, y: &[f64]) -> Vec<f64> {
    let n = sol.mu.len();
    let inv_eps = 1.0 / sol.epsilon;
    let u = sol.u_values();
    let mut t = vec![0.0f64; n];
    let mut mx = f64::NEG_INFINITY;
    for i in 0..n {
        t[i] = sol.mu.weight(i).ln() + (dot(sol.mu.node(i), y) - u[i]) * inv_eps;
        if t[i] > mx {
            mx = t[i];
        }
    }
    let mut total = 0.0;
    for ti in t.iter_mut() {
        *ti = (*ti - mx).exp();
        total += *ti;
    }
    for ti in t.iter_mut() {
        *ti /= total;
    }
    t
}

/// Gradient of u at x: the conditional barycenter of y given x.
pub fn grad_u(sol: &EntropicSolution, x: &[f64]) -> Result<Vec<f64>, PotentialError> {
    check_bbox(&sol.u.node_bbox(), x)?;
    let lam = conditional_weights_u(sol, x);
    let d = sol.nu.dimension();
    let mut g = vec![0.0; d];
    for (j, &l) in lam.iter().enumerate() {
        let yj = sol.nu.node(j);
        for a in 0..d {
            g[a] += l * yj[a];
        }
    }
    Ok(g)
}

/// Gradient of v at y: the conditional barycenter of x given y.
pub fn grad_v(sol: &EntropicSolution, y: &[f64]) -> Result<Vec<f64>, PotentialError> {
    check_bbox(&sol.v.node_bbox(), y)?;
    let lam = conditional_weights_v(sol, y);
    let d = sol.mu.dimension();
    let mut g = vec![0.0; d];
    for (i, &l) in lam.iter().enumerate() {
        let xi = sol.mu.node(i);
        for a in 0..d {
            g[a] += l * xi[a];
        }
    }
    Ok(g)
}

/// Hessian of u at x: the conditional covariance of y given x, divided by
/// eps. Symmetric positive semidefinite by construction.
pub fn hessian_u(sol: &EntropicSolution, x: &[f64]) -> Result<SymMat, PotentialError> {
    check_bbox(&sol.u.node_bbox(), x)?;
    let lam = conditional_weights_u(sol, x);
    let d = sol.nu.dimension();
    let mut g = vec![0.0; d];
    for (j, &l) in lam.iter().enumerate() {
        let yj = sol.nu.node(j);
        for a in 0..d {
            g[a] += l * yj[a];
        }
    }
    let mut h = SymMat::zeros(d);
    let mut diff = vec![0.0; d];
    for (j, &l) in lam.iter().enumerate() {
        let yj = sol.nu.node(j);
        for a in 0..d {
            diff[a] = yj[a] - g[a];
        }
        h.add_outer(&diff, l);
    }
    h.scale(1.0 / sol.epsilon);
    Ok(h)
}

/// Hessian of v at y (roles of the marginals swapped).
pub fn hessian_v(sol: &EntropicSolution, y: &[f64]) -> Result<SymMat, PotentialError> {
    check_bbox(&sol.v.node_bbox(), y)?;
    let lam = conditional_weights_v(sol, y);
    let d = sol.mu.dimension();
    let mut g = vec![0.0; d];
    for (i, &l) in lam.iter().enumerate() {
        let xi = sol.mu.node(i);
        for a in 0..d {
            g[a] += l * xi[a];
        }
    }
    let mut h = SymMat::zeros(d);
    let mut diff = vec![0.0; d];
    for (i, &l) in lam.iter().enumerate() {
        let xi = sol.mu.node(i);
        for a in 0..d {
            diff[a] = xi[a] - g[a];
        }
        h.add_outer(&diff, l);
    }
    h.scale(1.0 / sol.epsilon);
    Ok(h)
}

/// Sub-optimality of the entropic solution against the eps = 0 reference.
#[derive(Debug, Clone)]
pub struct GapReport {
    /// Full duality gap: entropic cost (with entropy) minus the reference
    /// squared Wasserstein value. The quantity with the eps log(1/eps) rate.
    pub gap: f64,
    /// Transport-only gap: plan transport cost minus the reference value.
    pub transport_gap: f64,
    /// Plan integral of u0(x) + v0(y) - <x,y>; equals `transport_gap` by
    /// Kantorovich duality, up to feasibility and reference slack.
    pub detachment_integral: f64,
}

/// Computes the duality gap and its detachment-integral representation.
pub fn suboptimality_gap(
    sol: &EntropicSolution,
    reference: &ReferenceSolution,
) -> Result<GapReport, PotentialError> {
    if reference.u0.grid != sol.u.grid || reference.v0.grid != sol.v.grid {
        return Err(PotentialError::InstanceMismatch);
    }
    let n = sol.mu.len();
    let m = sol.nu.len();
    let u = sol.u_values();
    let v = sol.v_values();
    let u0 = &reference.u0.values;
    let v0 = &reference.v0.values;
    let inv_eps = 1.0 / sol.epsilon;
    let mut detach = 0.0;
    for i in 0..n {
        let xi = sol.mu.node(i);
        let wi = sol.mu.weight(i);
        for j in 0..m {
            let yj = sol.nu.node(j);
            let g = dot(xi, yj);
            let lr = (g - u[i] - v[j]) * inv_eps;
            if lr < LOG_FLOOR {
                continue;
            }
            detach += wi * sol.nu.weight(j) * lr.exp() * (u0[i] + v0[j] - g);
        }
    }
    Ok(GapReport {
        gap: entropic_cost(sol) - reference.w2sq,
        transport_gap: transport_cost(sol) - reference.w2sq,
        detachment_integral: detach,
    })
}
