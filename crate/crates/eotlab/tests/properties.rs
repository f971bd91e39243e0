//! Property tests for the structural invariants: quadrature mass and
//! bounds, shrink nesting, conjugate duality, rate-fit recovery, and
//! solver shift invariance.

use std::sync::Arc;

use proptest::prelude::*;

use eotlab::detachment::legendre_transform;
use eotlab::field::{PotentialField, PotentialKind};
use eotlab::marginals::{build_marginal, ConvexDomain, DensitySpec, Grid};
use eotlab::num::logsumexp;
use eotlab::sinkhorn::{
    solve_schrodinger, solve_schrodinger_with, EntropicSolution, SolverOptions,
};
use eotlab::{estimates, potentials};

fn box_domain(lo: f64, len: f64) -> ConvexDomain {
    ConvexDomain::interval(lo, lo + len).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Weights sum to one and respect the density floor after clipping.
    #[test]
    fn marginal_mass_and_bounds(
        lo in -2.0f64..2.0,
        len in 0.5f64..3.0,
        res in 8usize..64,
        amp in -0.8f64..0.8,
    ) {
        let dom = box_domain(lo, len);
        let density = DensitySpec::sine_perturbed(&dom, amp, 1.0);
        let m = build_marginal(&dom, &density, res).unwrap();
        let total: f64 = m.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        let floor = density.lower * m.cell_volume * (1.0 - 1e-6) / m.normalizer;
        for i in 0..m.len() {
            prop_assert!(dom.contains(m.node(i)));
            prop_assert!(m.weight(i) >= floor);
        }
    }

    /// Nested shrinking stays inside the single larger shrink, and the
    /// diameter never grows.
    #[test]
    fn shrink_nesting(
        len in 1.0f64..4.0,
        a in 0.01f64..0.2,
        b in 0.01f64..0.2,
    ) {
        let dom = ConvexDomain::new_box(vec![(0.0, len), (0.0, len)]).unwrap();
        prop_assume!(a + b < 0.45 * len);
        let two_step = dom.shrink(a).unwrap().shrink(b).unwrap();
        let one_step = dom.shrink(a + b).unwrap();
        // box case is exact up to float tolerance
        for (&(lo2, hi2), &(lo1, hi1)) in
            two_step.intervals().unwrap().iter().zip(one_step.intervals().unwrap())
        {
            prop_assert!(lo2 >= lo1 - 1e-12 && hi2 <= hi1 + 1e-12);
        }
        prop_assert!(dom.shrink(a).unwrap().diameter() <= dom.diameter());
        prop_assert!(two_step.diameter() <= one_step.diameter() + 1e-12);
    }

    /// Young's inequality and the double-conjugate sandwich for convex
    /// grid functions built from nondecreasing slopes.
    #[test]
    fn conjugate_duality(
        slopes in prop::collection::vec(0.0f64..2.0, 16),
        base in -1.0f64..1.0,
    ) {
        let n = slopes.len() + 1;
        let grid = Grid::midpoint(&[(0.0, 1.0)], n);
        let h = 1.0 / n as f64;
        // cumulative sums of nondecreasing increments give convex samples
        let mut sorted = slopes.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut values = vec![base];
        for s in &sorted {
            values.push(values.last().unwrap() + s * h);
        }
        let u = PotentialField::new(grid, values.clone(), None, PotentialKind::KantorovichU0).unwrap();
        let targets = Grid::midpoint(&[(-0.5, 2.5)], 40);
        let v = legendre_transform(&u, &targets).unwrap();
        for i in 0..u.grid.len() {
            let x = u.grid.axes[0][i];
            for j in 0..v.grid.len() {
                let y = v.grid.axes[0][j];
                prop_assert!(u.values[i] + v.values[j] - x * y >= -1e-9);
            }
        }
        let back = legendre_transform(&v, &u.grid).unwrap();
        let slack = 2.0 * (3.0 / 40.0) * 1.0 + 2.0 * h;
        for i in 0..u.grid.len() {
            prop_assert!(back.values[i] <= u.values[i] + 1e-9);
            prop_assert!(back.values[i] >= u.values[i] - slack);
        }
    }

    /// Exact power laws are recovered exactly.
    #[test]
    fn rate_fit_recovery(
        slope in 0.1f64..1.5,
        constant in 0.1f64..10.0,
    ) {
        let eps = [0.3, 0.1, 0.03, 0.01, 0.003];
        let vals: Vec<f64> = eps.iter().map(|e: &f64| constant * e.powf(slope)).collect();
        let fit = estimates::fit_rate(&eps, &vals, estimates::FitModel::Power).unwrap();
        prop_assert!((fit.exponent - slope).abs() <= 1e-9);
        prop_assert!((fit.constant - constant).abs() <= 1e-9 * constant);
    }

    /// log-sum-exp is exact under constant shifts.
    #[test]
    fn logsumexp_shift(
        xs in prop::collection::vec(-50.0f64..50.0, 1..20),
        c in -1e3f64..1e3,
    ) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let a = logsumexp(&xs);
        let b = logsumexp(&shifted);
        prop_assert!((b - (a + c)).abs() <= 1e-9 * (1.0 + a.abs() + c.abs()));
    }
}

fn small_instance(eps: f64) -> EntropicSolution {
    let dom = ConvexDomain::interval(0.0, 1.0).unwrap();
    let tgt = ConvexDomain::interval(0.0, 2.0).unwrap();
    let mu = Arc::new(build_marginal(&dom, &DensitySpec::uniform(&dom), 48).unwrap());
    let nu = Arc::new(build_marginal(&tgt, &DensitySpec::uniform(&tgt), 48).unwrap());
    solve_schrodinger(&mu, &nu, eps, 1e-9, 400_000).unwrap()
}

/// Re-solving from a constant-shifted warm start leaves every derived
/// observable unchanged to near machine precision.
#[test]
fn warm_start_shift_invariance() {
    let sol = small_instance(0.05);
    let d = 3.0;
    let shifted_u: Vec<f64> = sol.u_values().iter().map(|x| x - d).collect();
    let shifted_v: Vec<f64> = sol.v_values().iter().map(|x| x + d).collect();
    let opts = SolverOptions {
        tol: 1e-9,
        max_iter: 400_000,
        ..SolverOptions::default()
    };
    let resolved = solve_schrodinger_with(
        &sol.mu,
        &sol.nu,
        sol.epsilon,
        &opts,
        Some((&shifted_u, &shifted_v)),
    )
    .unwrap();
    for &x in &[0.25, 0.5, 0.75] {
        let g0 = potentials::grad_u(&sol, &[x]).unwrap()[0];
        let g1 = potentials::grad_u(&resolved, &[x]).unwrap()[0];
        assert!(
            (g0 - g1).abs() <= 1e-12,
            "gradient moved by {}",
            (g0 - g1).abs()
        );
        let h0 = potentials::hessian_u(&sol, &[x]).unwrap().get(0, 0);
        let h1 = potentials::hessian_u(&resolved, &[x]).unwrap().get(0, 0);
        assert!((h0 - h1).abs() <= 1e-12 * (1.0 + h0.abs()));
        let p0 = potentials::plan_density(&sol, &[x], &[2.0 * x]).unwrap();
        let p1 = potentials::plan_density(&resolved, &[x], &[2.0 * x]).unwrap();
        assert!((p0 - p1).abs() <= 1e-12 * (1.0 + p0.abs()));
    }
}

/// Log-domain stabilization keeps every quantity finite down to the
/// smallest desk-scale regularization.
#[test]
fn no_overflow_at_small_eps() {
    let dom = ConvexDomain::interval(0.0, 1.0).unwrap();
    let mu = Arc::new(build_marginal(&dom, &DensitySpec::uniform(&dom), 64).unwrap());
    let nu = Arc::new(build_marginal(&dom, &DensitySpec::uniform(&dom), 64).unwrap());
    // warm-start chain down to eps = 1e-3
    let opts = SolverOptions { tol: 1e-9, max_iter: 1_000_000, ..SolverOptions::default() };
    let mut warm: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut last = None;
    for &eps in &[0.05, 0.01, 0.003, 0.001] {
        let s = solve_schrodinger_with(
            &mu,
            &nu,
            eps,
            &opts,
            warm.as_ref().map(|(u, v): &(Vec<f64>, Vec<f64>)| (u.as_slice(), v.as_slice())),
        )
        .unwrap();
        warm = Some((s.u_values().to_vec(), s.v_values().to_vec()));
        last = Some(s);
    }
    let sol = last.unwrap();
    assert!(sol.marginal_residual <= 1e-9);
    assert!(sol.u_values().iter().all(|v| v.is_finite()));
    assert!(sol.primal_value.is_finite() && sol.dual_value.is_finite());

    // below the convergence-friendly range the updates must still not
    // overflow: evaluate one round's worth of quantities at eps = 1e-4
    let raw = EntropicSolution::from_potentials(
        Arc::clone(&mu),
        Arc::clone(&nu),
        1e-4,
        sol.u_values().to_vec(),
        sol.v_values().to_vec(),
    )
    .unwrap();
    assert!(raw.marginal_residual.is_finite());
    assert!(raw.primal_value.is_finite());
    assert!(raw.dual_value.is_finite());
}

/// The primal value is nondecreasing in eps on a fixed instance.
#[test]
fn primal_monotone_in_eps() {
    let mut prev = f64::NEG_INFINITY;
    for &eps in &[0.01, 0.05, 0.2, 1.0] {
        let sol = small_instance(eps);
        assert!(
            sol.primal_value >= prev - 1e-10,
            "primal {} at eps {eps} dropped below {prev}",
            sol.primal_value
        );
        prev = sol.primal_value;
    }
}
