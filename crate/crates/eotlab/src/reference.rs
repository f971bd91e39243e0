//! The eps = 0 reference objects: squared Wasserstein value, optimal plan,
//! transport map, and Kantorovich potentials (u0, v0).
//!
//! Dimension 1 uses the exact monotone (quantile) coupling between the
//! discrete CDFs; it is authoritative there and the LP is a cross-check.
//! Higher dimensions use a transportation-simplex solver on the bipartite
//! node graph with a certified primal-dual gap.

use crate::field::{PotentialField, PotentialKind};
use crate::marginals::{ConvexDomain, DensitySpec, DiscreteMarginal};
use crate::num::{dist, dot, linear_fit};

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error("quantile coupling requires dimension 1, got {0}")]
    MethodDimension(usize),
    #[error("node count {n} x {m} exceeds the configured cap {cap} per side")]
    Capacity { n: usize, m: usize, cap: usize },
    #[error("transportation simplex failed to terminate (internal error)")]
    SimplexStalled,
    #[error("need at least 3 nodes per axis for second differences, got {0}")]
    Resolution(usize),
    #[error("second differences require a full tensor grid")]
    NotTensor,
    #[error("fewer than {min} admissible node pairs ({got}) for the Hölder fit")]
    InsufficientData { min: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    Quantile1d,
    DiscreteLp,
}

impl ReferenceMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReferenceMethod::Quantile1d => "quantile-1d",
            ReferenceMethod::DiscreteLp => "discrete-lp",
        }
    }
}

/// Exact discrete reference for one instance.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    /// Squared 2-Wasserstein value of the discrete instance.
    pub w2sq: f64,
    /// Transport map sampled at mu-nodes (row barycenters of the plan),
    /// flat with `dim` entries per node.
    pub map_values: Vec<f64>,
    pub u0: PotentialField,
    pub v0: PotentialField,
    pub method: ReferenceMethod,
    /// Sparse optimal plan: (mu index, nu index, mass), mass > 0.
    pub plan: Vec<(usize, usize, f64)>,
    /// Largest diameter of a single row's plan support; values above twice
    /// the grid spacing indicate non-map structure from discretization.
    pub max_row_spread: f64,
    pub dim: usize,
}

impl ReferenceSolution {
    pub fn map_at(&self, i: usize) -> &[f64] {
        &self.map_values[i * self.dim..(i + 1) * self.dim]
    }

    /// Primal-dual gap of the stored certificate: plan cost minus the dual
    /// objective at (u0, v0)'s underlying Kantorovich pair.
    pub fn duality_gap(&self, mu: &DiscreteMarginal, nu: &DiscreteMarginal) -> f64 {
        let mut dual = 0.0;
        for i in 0..mu.len() {
            let xi = mu.node(i);
            dual += mu.weight(i) * (0.5 * dot(xi, xi) - self.u0.values[i]);
        }
        for j in 0..nu.len() {
            let yj = nu.node(j);
            dual += nu.weight(j) * (0.5 * dot(yj, yj) - self.v0.values[j]);
        }
        self.w2sq - dual
    }
}

fn field_for(m: &DiscreteMarginal, values: Vec<f64>, kind: PotentialKind) -> PotentialField {
    if m.full_tensor {
        PotentialField::new(m.grid.clone(), values, None, kind).expect("sized to marginal")
    } else {
        let idx: Vec<usize> = (0..m.len()).map(|i| m.tensor_index(i)).collect();
        PotentialField::new_clipped(m.grid.clone(), values, idx, None, kind)
            .expect("sized to marginal")
    }
}

/// Monotone rearrangement between two 1D discrete marginals.
///
/// The plan matches cumulative masses left to right (optimal for convex
/// costs); u0 integrates the map from the left endpoint with the gauge
/// u0(x_1) = |x_1|^2/2, and v0 is the discrete Legendre transform of u0
/// over the nu-nodes.
pub fn solve_quantile_1d(
    mu: &DiscreteMarginal,
    nu: &DiscreteMarginal,
) -> Result<ReferenceSolution, ReferenceError> {
    if mu.dimension() != 1 || nu.dimension() != 1 {
        return Err(ReferenceError::MethodDimension(mu.dimension()));
    }
    let n = mu.len();
    let m = nu.len();
    let x: Vec<f64> = (0..n).map(|i| mu.node(i)[0]).collect();
    let y: Vec<f64> = (0..m).map(|j| nu.node(j)[0]).collect();

    // northwest-corner walk over the two cumulative distributions
    let mut plan: Vec<(usize, usize, f64)> = Vec::with_capacity(n + m);
    let mut cost = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    let mut a = mu.weight(0);
    let mut b = nu.weight(0);
    let tiny = 1e-15;
    loop {
        let take = a.min(b);
        if take > 0.0 {
            plan.push((i, j, take));
            let d = x[i] - y[j];
            cost += take * 0.5 * d * d;
        }
        a -= take;
        b -= take;
        let row_done = a <= tiny;
        let col_done = b <= tiny;
        match (row_done, col_done) {
            (true, true) => {
                if i + 1 < n && j + 1 < m {
                    i += 1;
                    j += 1;
                    a = mu.weight(i);
                    b = nu.weight(j);
                } else if i + 1 < n {
                    i += 1;
                    a = mu.weight(i);
                } else if j + 1 < m {
                    j += 1;
                    b = nu.weight(j);
                } else {
                    break;
                }
            }
            (true, false) => {
                if i + 1 >= n {
                    break;
                }
                i += 1;
                a = mu.weight(i);
            }
            (false, true) => {
                if j + 1 >= m {
                    break;
                }
                j += 1;
                b = nu.weight(j);
            }
            (false, false) => unreachable!("one side depletes at every step"),
        }
    }

    let (map_values, max_row_spread) = row_barycenters(&plan, mu, nu);

    // integrate the map by the trapezoid rule
    let mut u0 = vec![0.0; n];
    u0[0] = 0.5 * x[0] * x[0];
    for k in 1..n {
        u0[k] = u0[k - 1] + (x[k] - x[k - 1]) * 0.5 * (map_values[k] + map_values[k - 1]);
    }
    // discrete conjugate on the nu side
    let v0: Vec<f64> = (0..m)
        .map(|jj| {
            (0..n)
                .map(|ii| x[ii] * y[jj] - u0[ii])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();

    Ok(ReferenceSolution {
        w2sq: cost,
        map_values,
        u0: field_for(mu, u0, PotentialKind::KantorovichU0),
        v0: field_for(nu, v0, PotentialKind::KantorovichV0),
        method: ReferenceMethod::Quantile1d,
        plan,
        max_row_spread,
        dim: 1,
    })
}

fn row_barycenters(
    plan: &[(usize, usize, f64)],
    mu: &DiscreteMarginal,
    nu: &DiscreteMarginal,
) -> (Vec<f64>, f64) {
    let n = mu.len();
    let dim = nu.dimension();
    let mut bary = vec![0.0; n * dim];
    let mut row_mass = vec![0.0; n];
    for &(i, j, mass) in plan {
        row_mass[i] += mass;
        for a in 0..dim {
            bary[i * dim + a] += mass * nu.node(j)[a];
        }
    }
    for i in 0..n {
        for a in 0..dim {
            bary[i * dim + a] /= row_mass[i];
        }
    }
    // per-row support spread
    let mut spread = vec![0.0f64; n];
    for &(i, j, _) in plan {
        for &(i2, j2, _) in plan {
            if i == i2 && j != j2 {
                spread[i] = spread[i].max(dist(nu.node(j), nu.node(j2)));
            }
        }
    }
    let max_spread = spread.into_iter().fold(0.0, f64::max);
    (bary, max_spread)
}

/// Default per-side node cap for the LP (64 x 64 tensor grids).
pub const DEFAULT_LP_CAP: usize = 4096;

/// Exact optimal transport on the bipartite node graph by the
/// transportation simplex with a spanning-tree basis.
///
/// Duals are converted to Kantorovich potentials with the gauge
/// phi0(first mu-node) = 0; the primal-dual gap of the certificate is zero
/// to rounding by construction and re-checked by the caller's invariants.
pub fn solve_discrete_lp(
    mu: &DiscreteMarginal,
    nu: &DiscreteMarginal,
) -> Result<ReferenceSolution, ReferenceError> {
    solve_discrete_lp_capped(mu, nu, DEFAULT_LP_CAP)
}

pub fn solve_discrete_lp_capped(
    mu: &DiscreteMarginal,
    nu: &DiscreteMarginal,
    cap: usize,
) -> Result<ReferenceSolution, ReferenceError> {
    let n = mu.len();
    let m = nu.len();
    if n > cap || m > cap {
        return Err(ReferenceError::Capacity { n, m, cap });
    }
    let cost = |i: usize, j: usize| {
        let d = dist(mu.node(i), nu.node(j));
        0.5 * d * d
    };

    // --- initial basis: northwest corner, one arc per visited cell ---
    // On an exact tie only the row advances; the next round then contributes
    // the degenerate zero-flow arc that keeps the basis a spanning tree.
    // Total arcs = (n-1) row advances + (m-1) column advances + 1 = n+m-1.
    let mut basis: Vec<BasisArc> = Vec::with_capacity(n + m - 1);
    {
        let (mut i, mut j) = (0usize, 0usize);
        let mut a = mu.weight(0);
        let mut b = nu.weight(0);
        let tiny = 1e-15;
        loop {
            let take = a.min(b);
            basis.push(BasisArc { i, j, flow: take });
            a -= take;
            b -= take;
            if i + 1 >= n && j + 1 >= m {
                break;
            }
            let advance_row = if a <= tiny && b <= tiny {
                i + 1 < n
            } else {
                a <= tiny
            };
            if advance_row && i + 1 < n {
                i += 1;
                a = mu.weight(i);
            } else if j + 1 < m {
                j += 1;
                b = nu.weight(j);
            } else {
                i += 1;
                a = mu.weight(i);
            }
        }
    }
    debug_assert_eq!(
        basis.len(),
        n + m - 1,
        "northwest basis must span the bipartite graph"
    );

    let nodes = n + m;
    let pivot_tol = 1e-12;
    let max_pivots = 200 + 50 * nodes * nodes;
    let mut alpha = vec![0.0f64; n];
    let mut beta = vec![0.0f64; m];

    // adjacency over the basis tree, rebuilt per pivot (cheap at this scale)
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let rebuild = |basis: &Vec<BasisArc>, adj: &mut Vec<Vec<usize>>| {
        for l in adj.iter_mut() {
            l.clear();
        }
        for (k, arc) in basis.iter().enumerate() {
            adj[arc.i].push(k);
            adj[n + arc.j].push(k);
        }
    };
    let mut pivots = 0usize;
    let mut bland = false;
    loop {
        rebuild(&basis, &mut adj);
        // duals from the tree, root = source 0 with alpha 0
        {
            let mut seen = vec![false; nodes];
            let mut stack = vec![0usize];
            seen[0] = true;
            alpha[0] = 0.0;
            while let Some(p) = stack.pop() {
                for &k in &adj[p] {
                    let arc = basis[k];
                    let (src, snk) = (arc.i, n + arc.j);
                    let other = if p == src { snk } else { src };
                    if seen[other] {
                        continue;
                    }
                    seen[other] = true;
                    let c = cost(arc.i, arc.j);
                    if other == snk {
                        beta[arc.j] = c - alpha[arc.i];
                    } else {
                        alpha[arc.i] = c - beta[arc.j];
                    }
                    stack.push(other);
                }
            }
            debug_assert!(seen.iter().all(|&s| s), "basis tree must span all nodes");
        }

        // pricing
        let mut enter: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..n {
            for j in 0..m {
                let rc = cost(i, j) - alpha[i] - beta[j];
                if rc < -pivot_tol {
                    match (&enter, bland) {
                        (_, true) => {
                            enter = Some((i, j, rc));
                            break 'scan;
                        }
                        (Some((_, _, best)), false) if rc >= *best => {}
                        _ => enter = Some((i, j, rc)),
                    }
                }
            }
        }
        let Some((ei, ej, _)) = enter else {
            break; // optimal
        };

        // unique tree path from source ei to sink ej
        let path = tree_path(&basis, &adj, n, ei, n + ej).ok_or(ReferenceError::SimplexStalled)?;
        // orient the cycle: entering arc carries +theta; alternate signs
        // along the path starting from the source end
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        let mut node = ei;
        for (step, &k) in path.iter().enumerate() {
            let arc = basis[k];
            let forward_from_source = node == arc.i;
            // arcs traversed source->sink get -theta when step parity even
            let sign_minus = if step % 2 == 0 {
                forward_from_source
            } else {
                !forward_from_source
            };
            if sign_minus && arc.flow < theta {
                theta = arc.flow;
                leave = k;
            }
            node = if node == arc.i { n + arc.j } else { arc.i };
        }
        if leave == usize::MAX {
            return Err(ReferenceError::SimplexStalled);
        }
        let mut node = ei;
        for (step, &k) in path.iter().enumerate() {
            let arc = basis[k];
            let forward_from_source = node == arc.i;
            let sign_minus = if step % 2 == 0 {
                forward_from_source
            } else {
                !forward_from_source
            };
            if sign_minus {
                basis[k].flow -= theta;
            } else {
                basis[k].flow += theta;
            }
            node = if node == arc.i { n + arc.j } else { arc.i };
        }
        basis[leave] = BasisArc {
            i: ei,
            j: ej,
            flow: theta,
        };

        pivots += 1;
        if !bland && pivots > 10 * nodes {
            bland = true; // anti-cycling fallback under heavy degeneracy
        }
        if pivots > max_pivots {
            return Err(ReferenceError::SimplexStalled);
        }
    }

    // assemble outputs
    let mut plan: Vec<(usize, usize, f64)> = basis
        .iter()
        .filter(|a| a.flow > 0.0)
        .map(|a| (a.i, a.j, a.flow))
        .collect();
    plan.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let w2sq: f64 = plan.iter().map(|&(i, j, f)| f * cost(i, j)).sum();
    let (map_values, max_row_spread) = row_barycenters(&plan, mu, nu);
    let grid_h = mu.grid.max_spacing().max(nu.grid.max_spacing());
    if max_row_spread > 2.0 * grid_h {
        log::warn!(
            "transport plan has a row with support diameter {max_row_spread:.3e} > 2 * grid spacing {grid_h:.3e}; the barycentric map underestimates the plan"
        );
    }
    let u0: Vec<f64> = (0..n)
        .map(|i| 0.5 * dot(mu.node(i), mu.node(i)) - alpha[i])
        .collect();
    let v0: Vec<f64> = (0..m)
        .map(|j| 0.5 * dot(nu.node(j), nu.node(j)) - beta[j])
        .collect();

    Ok(ReferenceSolution {
        w2sq,
        map_values,
        u0: field_for(mu, u0, PotentialKind::KantorovichU0),
        v0: field_for(nu, v0, PotentialKind::KantorovichV0),
        method: ReferenceMethod::DiscreteLp,
        plan,
        max_row_spread,
        dim: mu.dimension(),
    })
}

/// Unique path between two nodes of the basis tree; returns arc indices.
fn tree_path(
    basis: &[BasisArc],
    adj: &[Vec<usize>],
    n: usize,
    from: usize,
    to: usize,
) -> Option<Vec<usize>> {
    let nodes = adj.len();
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes]; // (node, arc)
    let mut seen = vec![false; nodes];
    let mut queue = std::collections::VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(p) = queue.pop_front() {
        if p == to {
            break;
        }
        for &k in &adj[p] {
            let arc = &basis[k];
            let other = if p == arc.i { n + arc.j } else { arc.i };
            if !seen[other] {
                seen[other] = true;
                prev[other] = Some((p, k));
                queue.push_back(other);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let mut path = Vec::new();
    let mut node = to;
    while node != from {
        let (p, k) = prev[node]?;
        path.push(k);
        node = p;
    }
    path.reverse();
    Some(path)
}

/// Spanning-tree basis arc of the transportation simplex.
#[derive(Clone, Copy)]
struct BasisArc {
    i: usize,
    j: usize,
    flow: f64,
}

/// Pointwise Monge-Ampère residual |g(map(x)) det(D2h u0) - f(x)| maximized
/// over interior nodes, with centered second differences. Diagnostic only.
pub fn ma_residual(
    reference: &ReferenceSolution,
    mu: &DiscreteMarginal,
    f: &DensitySpec,
    g: &DensitySpec,
) -> Result<f64, ReferenceError> {
    if !mu.full_tensor {
        return Err(ReferenceError::NotTensor);
    }
    let dim = mu.dimension();
    let u = &reference.u0.values;
    let axes = &mu.grid.axes;
    for a in axes {
        if a.len() < 3 {
            return Err(ReferenceError::Resolution(a.len()));
        }
    }
    let mut worst = 0.0f64;
    match dim {
        1 => {
            let h = axes[0][1] - axes[0][0];
            for i in 1..axes[0].len() - 1 {
                let d2 = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
                let gv = g.eval(reference.map_at(i));
                let fv = f.eval(mu.node(i));
                worst = worst.max((gv * d2 - fv).abs());
            }
        }
        2 => {
            let (n1, n2) = (axes[0].len(), axes[1].len());
            let h1 = axes[0][1] - axes[0][0];
            let h2 = axes[1][1] - axes[1][0];
            let at = |i: usize, j: usize| u[i * n2 + j];
            for i in 1..n1 - 1 {
                for j in 1..n2 - 1 {
                    let uxx = (at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j)) / (h1 * h1);
                    let uyy = (at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1)) / (h2 * h2);
                    let uxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1)
                        + at(i - 1, j - 1))
                        / (4.0 * h1 * h2);
                    let det = uxx * uyy - uxy * uxy;
                    let flat = i * n2 + j;
                    let gv = g.eval(reference.map_at(flat));
                    let fv = f.eval(mu.node(flat));
                    worst = worst.max((gv * det - fv).abs());
                }
            }
        }
        d => {
            // no instance at desk scale exceeds two dimensions
            return Err(ReferenceError::MethodDimension(d));
        }
    }
    Ok(worst)
}

/// Least-squares estimate of the Hölder exponent of the reference map over
/// `subset`: fits log |grad u0(x) - grad u0(y)| against log |x - y| over
/// node pairs separated by at least twice the grid spacing. Returns the
/// slope clamped to (0, 1] and the max-ratio constant at that slope.
pub fn holder_exponent_u0(
    reference: &ReferenceSolution,
    mu: &DiscreteMarginal,
    subset: &ConvexDomain,
) -> Result<(f64, f64), ReferenceError> {
    let idx = mu.nodes_in(subset);
    let min_sep = 2.0 * mu.grid.max_spacing();
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut pairs = Vec::new();
    for (a, &i) in idx.iter().enumerate() {
        for &j in idx.iter().skip(a + 1) {
            let dx = dist(mu.node(i), mu.node(j));
            if dx < min_sep {
                continue;
            }
            let dg = dist(reference.map_at(i), reference.map_at(j));
            if dg < 1e-13 {
                continue; // flat pair, uninformative on a log scale
            }
            lx.push(dx.ln());
            ly.push(dg.ln());
            pairs.push((dx, dg));
        }
    }
    if pairs.len() < 10 {
        return Err(ReferenceError::InsufficientData {
            min: 10,
            got: pairs.len(),
        });
    }
    let (_, slope, _) = linear_fit(&lx, &ly);
    let alpha = slope.clamp(1e-6, 1.0);
    let constant = pairs
        .iter()
        .map(|&(dx, dg)| dg / dx.powf(alpha))
        .fold(0.0f64, f64::max);
    Ok((alpha, constant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::build_marginal;
    use approx::assert_abs_diff_eq;

    fn uniform_1d(lo: f64, hi: f64, res: usize) -> DiscreteMarginal {
        let dom = ConvexDomain::interval(lo, hi).unwrap();
        build_marginal(&dom, &DensitySpec::uniform(&dom), res).unwrap()
    }

    fn uniform_2d(b: &[(f64, f64)], res: usize) -> DiscreteMarginal {
        let dom = ConvexDomain::new_box(b.to_vec()).unwrap();
        build_marginal(&dom, &DensitySpec::uniform(&dom), res).unwrap()
    }

    #[test]
    fn identity_instance_is_exact() {
        let mu = uniform_1d(0.0, 1.0, 128);
        let nu = uniform_1d(0.0, 1.0, 128);
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        assert_abs_diff_eq!(r.w2sq, 0.0, epsilon = 1e-15);
        for i in 0..mu.len() {
            assert_abs_diff_eq!(r.map_at(i)[0], mu.node(i)[0], epsilon = 1e-15);
        }
    }

    /// The stretched instance has the closed form W2^2 = 1/6 (computed from
    /// the quadratic integral of (2x - x) over the unit interval); the
    /// discrete value differs by midpoint-rule curvature only.
    #[test]
    fn stretch_instance_w2sq_and_map() {
        let mu = uniform_1d(0.0, 1.0, 128);
        let nu = uniform_1d(0.0, 2.0, 128);
        let h = 1.0 / 128.0;
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        assert!(
            (r.w2sq - 1.0 / 6.0).abs() <= 2.0 * h * h,
            "w2sq = {}",
            r.w2sq
        );
        for i in 0..mu.len() {
            assert!((r.map_at(i)[0] - 2.0 * mu.node(i)[0]).abs() <= h);
        }
    }

    #[test]
    fn translation_instance() {
        let mu = uniform_1d(0.0, 1.0, 96);
        let nu = uniform_1d(0.5, 1.5, 96);
        let h = 1.0 / 96.0;
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        assert!((r.w2sq - 0.125).abs() <= 2.0 * h * h);
        for i in 0..mu.len() {
            assert!((r.map_at(i)[0] - (mu.node(i)[0] + 0.5)).abs() <= h);
        }
    }

    #[test]
    fn quantile_dual_feasibility_and_slackness() {
        let mu = uniform_1d(0.0, 1.0, 64);
        let nu = uniform_1d(0.0, 2.0, 64);
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                let slack = r.u0.values[i] + r.v0.values[j] - mu.node(i)[0] * nu.node(j)[0];
                assert!(slack >= -1e-9, "dual feasibility violated: {slack}");
            }
        }
        for &(i, j, _) in &r.plan {
            let slack = r.u0.values[i] + r.v0.values[j] - mu.node(i)[0] * nu.node(j)[0];
            assert!(
                slack.abs() <= 1e-9,
                "complementary slackness violated: {slack}"
            );
        }
        // dual objective equals the primal value
        assert!(r.duality_gap(&mu, &nu).abs() <= 1e-9);
    }

    #[test]
    fn quantile_map_is_monotone_and_lands_in_target() {
        let dom = ConvexDomain::interval(0.0, 1.0).unwrap();
        let mu = build_marginal(&dom, &DensitySpec::sine_perturbed(&dom, 0.3, 1.0), 128).unwrap();
        let nu = uniform_1d(0.0, 1.0, 128);
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        let h = 1.0 / 128.0;
        for i in 1..mu.len() {
            assert!(r.map_at(i)[0] >= r.map_at(i - 1)[0] - 1e-14);
        }
        for i in 0..mu.len() {
            let t = r.map_at(i)[0];
            assert!(t >= -h && t <= 1.0 + h);
        }
    }

    #[test]
    fn lp_identity_2d_is_diagonal() {
        let mu = uniform_2d(&[(0.0, 1.0), (0.0, 1.0)], 12);
        let nu = uniform_2d(&[(0.0, 1.0), (0.0, 1.0)], 12);
        let r = solve_discrete_lp(&mu, &nu).unwrap();
        assert!(r.w2sq <= 1e-9, "w2sq = {}", r.w2sq);
        for &(i, j, _) in &r.plan {
            assert_eq!(i, j, "plan must be the diagonal assignment");
        }
        assert!(r.duality_gap(&mu, &nu).abs() <= 1e-9);
    }

    #[test]
    fn lp_agrees_with_quantile_in_1d() {
        let mu = uniform_1d(0.0, 1.0, 32);
        let nu = uniform_1d(0.0, 2.0, 32);
        let q = solve_quantile_1d(&mu, &nu).unwrap();
        let l = solve_discrete_lp(&mu, &nu).unwrap();
        assert!((q.w2sq - l.w2sq).abs() <= 1e-9);
        let h = 2.0 / 32.0;
        for i in 0..mu.len() {
            assert!((q.map_at(i)[0] - l.map_at(i)[0]).abs() <= h);
        }
    }

    #[test]
    fn lp_agrees_with_quantile_on_uneven_weights() {
        let dom = ConvexDomain::interval(0.0, 1.0).unwrap();
        let mu = build_marginal(&dom, &DensitySpec::sine_perturbed(&dom, 0.3, 1.0), 24).unwrap();
        let nu = uniform_1d(0.0, 1.0, 24);
        let q = solve_quantile_1d(&mu, &nu).unwrap();
        let l = solve_discrete_lp(&mu, &nu).unwrap();
        assert!(
            (q.w2sq - l.w2sq).abs() <= 1e-9,
            "quantile {} vs lp {}",
            q.w2sq,
            l.w2sq
        );
    }

    /// Separable 2D instance: per-axis monotone maps, value 1/6 from the
    /// first-axis stretch alone.
    #[test]
    fn lp_separable_rectangle() {
        let mu = uniform_2d(&[(0.0, 1.0), (0.0, 1.0)], 16);
        let nu = uniform_2d(&[(0.0, 2.0), (0.0, 1.0)], 16);
        let r = solve_discrete_lp(&mu, &nu).unwrap();
        let h = 1.0 / 16.0;
        assert!(
            (r.w2sq - 1.0 / 6.0).abs() <= 2.0 * h * h,
            "w2sq = {} vs 1/6",
            r.w2sq
        );
        assert!(r.duality_gap(&mu, &nu).abs() <= 1e-9);
    }

    #[test]
    fn lp_dual_feasibility() {
        let mu = uniform_1d(0.0, 1.0, 24);
        let nu = uniform_1d(0.0, 2.0, 24);
        let r = solve_discrete_lp(&mu, &nu).unwrap();
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                let slack = r.u0.values[i] + r.v0.values[j] - mu.node(i)[0] * nu.node(j)[0];
                assert!(slack >= -1e-9);
            }
        }
        for &(i, j, _) in &r.plan {
            let slack = r.u0.values[i] + r.v0.values[j] - mu.node(i)[0] * nu.node(j)[0];
            assert!(slack.abs() <= 1e-9);
        }
    }

    /// The v-side duals come straight from the tree; conjugacy is then a
    /// theorem to check: the discrete transform of u0 reproduces v0 at
    /// every target node (equality through the basis arcs).
    #[test]
    fn lp_duals_agree_with_discrete_conjugate() {
        let mu = uniform_1d(0.0, 1.0, 24);
        let nu = uniform_1d(0.0, 2.0, 24);
        let r = solve_discrete_lp(&mu, &nu).unwrap();
        for j in 0..nu.len() {
            let y = nu.node(j)[0];
            let conj = (0..mu.len())
                .map(|i| mu.node(i)[0] * y - r.u0.values[i])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(conj <= r.v0.values[j] + 1e-9, "conjugate above dual at node {j}");
            assert!(conj >= r.v0.values[j] - 1e-9, "conjugate below dual at node {j}");
        }
    }

    #[test]
    fn lp_capacity_error() {
        let mu = uniform_1d(0.0, 1.0, 16);
        let nu = uniform_1d(0.0, 1.0, 16);
        assert!(matches!(
            solve_discrete_lp_capped(&mu, &nu, 8),
            Err(ReferenceError::Capacity { .. })
        ));
    }

    #[test]
    fn ma_residual_identity_and_stretch() {
        let mu = uniform_1d(0.0, 1.0, 64);
        let nu = uniform_1d(0.0, 1.0, 64);
        let f = DensitySpec::uniform(&mu.domain);
        let g = DensitySpec::uniform(&nu.domain);
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        let h = 1.0 / 64.0;
        assert!(ma_residual(&r, &mu, &f, &g).unwrap() <= 5.0 * h);

        let nu2 = uniform_1d(0.0, 2.0, 64);
        let g2 = DensitySpec::uniform(&nu2.domain);
        let r2 = solve_quantile_1d(&mu, &nu2).unwrap();
        assert!(ma_residual(&r2, &mu, &f, &g2).unwrap() <= 5.0 * h);
    }

    /// Replacing u0 by |x|^2/2 on the stretched instance drops the product
    /// g(map) det(D2 u0) to 1/2, far from f = 1.
    #[test]
    fn ma_residual_flags_wrong_reference() {
        let mu = uniform_1d(0.0, 1.0, 64);
        let nu = uniform_1d(0.0, 2.0, 64);
        let f = DensitySpec::uniform(&mu.domain);
        let g = DensitySpec::uniform(&nu.domain);
        let mut r = solve_quantile_1d(&mu, &nu).unwrap();
        r.u0.values = (0..mu.len())
            .map(|i| 0.5 * mu.node(i)[0] * mu.node(i)[0])
            .collect();
        r.map_values = (0..mu.len()).map(|i| mu.node(i)[0]).collect();
        let res = ma_residual(&r, &mu, &f, &g).unwrap();
        assert!(res >= 0.4, "residual {res} too small for a wrong reference");
    }

    #[test]
    fn holder_fit_on_linear_maps() {
        let mu = uniform_1d(0.0, 1.0, 128);
        let nu = uniform_1d(0.0, 1.0, 128);
        let subset = ConvexDomain::interval(0.1, 0.9).unwrap();
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        let (alpha, c) = holder_exponent_u0(&r, &mu, &subset).unwrap();
        assert!((alpha - 1.0).abs() <= 0.02);
        assert!((c - 1.0).abs() <= 0.02);

        let nu2 = uniform_1d(0.0, 2.0, 128);
        let r2 = solve_quantile_1d(&mu, &nu2).unwrap();
        let (alpha2, c2) = holder_exponent_u0(&r2, &mu, &subset).unwrap();
        assert!((alpha2 - 1.0).abs() <= 0.02);
        assert!((c2 - 2.0).abs() <= 0.05);
    }

    #[test]
    fn holder_fit_stable_under_resolution_doubling() {
        let dom = ConvexDomain::interval(0.0, 1.0).unwrap();
        let subset = ConvexDomain::interval(0.1, 0.9).unwrap();
        let mut results = Vec::new();
        for res in [64usize, 128] {
            let mu =
                build_marginal(&dom, &DensitySpec::sine_perturbed(&dom, 0.3, 1.0), res).unwrap();
            let nu = uniform_1d(0.0, 1.0, res);
            let r = solve_quantile_1d(&mu, &nu).unwrap();
            let (alpha, c) = holder_exponent_u0(&r, &mu, &subset).unwrap();
            assert!(alpha > 0.0 && alpha <= 1.0);
            assert!(c.is_finite());
            results.push((alpha, c));
        }
        let (a1, c1) = results[0];
        let (a2, c2) = results[1];
        assert!((a1 - a2).abs() <= 0.2 * a2.abs());
        assert!((c1 - c2).abs() <= 0.2 * c2.abs());
    }

    #[test]
    fn holder_fit_insufficient_pairs() {
        let mu = uniform_1d(0.0, 1.0, 16);
        let nu = uniform_1d(0.0, 1.0, 16);
        let subset = ConvexDomain::interval(0.48, 0.52).unwrap();
        let r = solve_quantile_1d(&mu, &nu).unwrap();
        assert!(matches!(
            holder_exponent_u0(&r, &mu, &subset),
            Err(ReferenceError::InsufficientData { .. })
        ));
    }
}
