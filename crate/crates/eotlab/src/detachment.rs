//! Numerical Legendre transforms and detachment machinery: certificates for
//! the lower bound u(x) + v(y) - <x,y> >= L |y - grad u(x)|^p, the global
//! Hölder-gradient implication with its explicit constant, and the
//! exponential convex-ball lower bound used to localize potentials.

use crate::field::{PotentialField, PotentialKind};
use crate::marginals::{ConvexDomain, Grid};
use crate::num::{dist, dot, halton_point};

#[derive(Debug, thiserror::Error)]
pub enum DetachmentError {
    #[error("detachment exponent must satisfy p >= 2, got {0}")]
    BadExponent(f64),
    #[error("empty target node set")]
    EmptyTargets,
    #[error("duality violated at pair ({x:?}, {y:?}): u + v - <x,y> = {value}")]
    DualityViolation {
        x: Vec<f64>,
        y: Vec<f64>,
        value: f64,
    },
    #[error("no admissible pairs after coincidence exclusion ({total} pairs scanned)")]
    InsufficientPairs { total: usize },
    #[error(
        "Hölder precondition failed: Bregman ratio {ratio} at pair ({x0:?}, {x:?}) exceeds {bound}"
    )]
    PreconditionFailed {
        x0: Vec<f64>,
        x: Vec<f64>,
        ratio: f64,
        bound: f64,
    },
    #[error("need at least 16 samples per axis family, got z = {z}, r = {r}")]
    TooFewSamples { z: usize, r: usize },
    #[error("field must cover a full tensor grid for conjugation")]
    ClippedField,
}

/// Certified p-detachment of a dual pair on a sampled set.
#[derive(Debug, Clone)]
pub struct DetachmentCertificate {
    pub p: f64,
    /// Largest L for which the inequality holds on the sample set (the
    /// minimal ratio over admissible pairs).
    pub best_l: f64,
    /// Pair attaining the minimal ratio.
    pub worst_pair: (Vec<f64>, Vec<f64>),
    pub sample_count: usize,
}

/// Exact discrete Legendre conjugate of `u` evaluated at the nodes of
/// `targets`: v(y) = max over u-nodes of (<y, x> - u(x)). No interpolation.
pub fn legendre_transform(
    u: &PotentialField,
    targets: &Grid,
) -> Result<PotentialField, DetachmentError> {
    let (values, _) = legendre_with_argmax(u, targets)?;
    Ok(
        PotentialField::new(targets.clone(), values, None, PotentialKind::KantorovichV0)
            .expect("values sized to target grid"),
    )
}

/// Conjugate values plus the attaining u-node index per target.
fn legendre_with_argmax(
    u: &PotentialField,
    targets: &Grid,
) -> Result<(Vec<f64>, Vec<usize>), DetachmentError> {
    if !u.full_tensor() {
        return Err(DetachmentError::ClippedField);
    }
    if targets.is_empty() {
        return Err(DetachmentError::EmptyTargets);
    }
    let n = u.grid.len();
    let m = targets.len();
    let dim = u.grid.dimension();
    // flatten the node coordinates once; the scan below is O(n m)
    let mut nodes = Vec::with_capacity(n * dim);
    for ii in 0..n {
        nodes.extend_from_slice(&u.grid.node(ii));
    }
    let mut values = vec![f64::NEG_INFINITY; m];
    let mut argmax = vec![0usize; m];
    for jj in 0..m {
        let y = targets.node(jj);
        for ii in 0..n {
            let cand = dot(&nodes[ii * dim..(ii + 1) * dim], &y) - u.values[ii];
            if cand > values[jj] {
                values[jj] = cand;
                argmax[jj] = ii;
            }
        }
    }
    Ok((values, argmax))
}

/// Conjugate values at an arbitrary point list.
pub fn legendre_values(
    u: &PotentialField,
    points: &[Vec<f64>],
) -> Result<Vec<f64>, DetachmentError> {
    if !u.full_tensor() {
        return Err(DetachmentError::ClippedField);
    }
    if points.is_empty() {
        return Err(DetachmentError::EmptyTargets);
    }
    let n = u.grid.len();
    Ok(points
        .iter()
        .map(|y| {
            (0..n)
                .map(|ii| dot(&u.grid.node(ii), y) - u.values[ii])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

/// Scan the ratio r(x, y) = (u(x) + v(y) - <x,y>) / |y - grad u(x)|^p over
/// all (K-node, v-node) pairs and certify the largest valid constant.
///
/// Pairs with |y - grad u(x)| below twice the grid spacing are excluded:
/// the ratio is 0/0-unstable at coincidence and the inequality is vacuous
/// there. Nonnegativity of the numerator is certified on every pair first.
pub fn check_p_detachment(
    u: &PotentialField,
    v: &PotentialField,
    k_set: &ConvexDomain,
    p: f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<DetachmentCertificate, DetachmentError> {
    if p < 2.0 {
        return Err(DetachmentError::BadExponent(p));
    }
    let h = u.grid.max_spacing().max(v.grid.max_spacing());
    let x_idx: Vec<usize> = (0..u.grid.len())
        .filter(|&i| k_set.contains(&u.grid.node(i)))
        .collect();
    scan_ratios(u, &x_idx, v, p, 2.0 * h, grad, None)
}

fn scan_ratios(
    u: &PotentialField,
    x_idx: &[usize],
    v: &PotentialField,
    p: f64,
    min_grad_sep: f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
    // optional conjugate argmax data for excluding discretization artifacts:
    // (argmax u-node per v-node, per-axis index exclusion radius)
    conjugate_argmax: Option<(&[usize], usize)>,
) -> Result<DetachmentCertificate, DetachmentError> {
    let mut best = f64::INFINITY;
    let mut worst_pair = (Vec::new(), Vec::new());
    let mut count = 0usize;
    let mut total = 0usize;
    let m = v.grid.len();
    let dim = v.grid.dimension();
    let mut targets = Vec::with_capacity(m * dim);
    for j in 0..m {
        targets.extend_from_slice(&v.grid.node(j));
    }
    for &i in x_idx {
        let x = u.grid.node(i);
        let gx = grad(&x);
        for j in 0..m {
            let y = &targets[j * dim..(j + 1) * dim];
            total += 1;
            let numer = u.values[i] + v.values[j] - dot(&x, y);
            if numer < -1e-9 {
                return Err(DetachmentError::DualityViolation { x, y: y.to_vec(), value: numer });
            }
            if let Some((argmax, radius)) = conjugate_argmax {
                if index_chebyshev(&u.grid, i, argmax[j]) < radius {
                    continue;
                }
            }
            let sep = dist(y, &gx);
            if sep < min_grad_sep {
                continue;
            }
            count += 1;
            let ratio = numer / sep.powf(p);
            if ratio < best {
                best = ratio;
                worst_pair = (x.clone(), y.to_vec());
            }
        }
    }
    if count == 0 {
        return Err(DetachmentError::InsufficientPairs { total });
    }
    Ok(DetachmentCertificate {
        p,
        best_l: best.max(0.0),
        worst_pair,
        sample_count: count,
    })
}

/// Chebyshev distance between two flat tensor indices in grid coordinates.
fn index_chebyshev(grid: &Grid, mut a: usize, mut b: usize) -> usize {
    let dim = grid.dimension();
    let mut worst = 0usize;
    for ax in (0..dim).rev() {
        let k = grid.axes[ax].len();
        let ia = a % k;
        let ib = b % k;
        a /= k;
        b /= k;
        worst = worst.max(ia.abs_diff(ib));
    }
    worst
}

/// Result of the global Hölder-to-detachment check.
#[derive(Debug, Clone)]
pub struct GlobalDetachmentReport {
    pub certificate: DetachmentCertificate,
    /// The explicit constant 1/(p lambda^p) scaled by the 10% slack.
    pub bound: f64,
    pub satisfied: bool,
    /// Measured Bregman-residual coefficient on the grid.
    pub measured_bregman: f64,
}

/// Verify that a Hölder gradient bound transfers to a p-detachment of the
/// pair (u, u*) with the explicit constant 1/(p lambda_h^p), up to 10%
/// discretization slack, with p = (1 + alpha)/alpha.
///
/// The precondition is checked first as a Bregman-residual bound on the
/// grid: u(x) - u(x0) - <grad u(x0), x - x0> <= (lambda_h^(1+alpha)/(1+alpha))
/// |x - x0|^(1+alpha), allowing 5% violation before erroring. The conjugate
/// is built by the exact discrete transform onto a gradient-range grid;
/// pairs within three cells of a conjugate argmax are excluded because the
/// discrete max creates artificial Young equalities there.
pub fn global_detachment_forward(
    u: &PotentialField,
    alpha: f64,
    lambda_h: f64,
    grad: &dyn Fn(&[f64]) -> Vec<f64>,
) -> Result<GlobalDetachmentReport, DetachmentError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(DetachmentError::BadExponent(alpha));
    }
    let p = (1.0 + alpha) / alpha;
    let dim = u.grid.dimension();
    let n = u.grid.len();
    let h = u.grid.max_spacing();

    // gradient samples at the nodes
    let grads: Vec<Vec<f64>> = (0..n).map(|i| grad(&u.grid.node(i))).collect();

    // Bregman precondition
    let bregman_cap = lambda_h.powf(1.0 + alpha) / (1.0 + alpha);
    let mut measured = 0.0f64;
    for i0 in 0..n {
        let x0 = u.grid.node(i0);
        for i in 0..n {
            if i == i0 {
                continue;
            }
            let x = u.grid.node(i);
            let d = dist(&x, &x0);
            if d < h {
                continue;
            }
            let mut lin = 0.0;
            for a in 0..dim {
                lin += grads[i0][a] * (x[a] - x0[a]);
            }
            let residual = u.values[i] - u.values[i0] - lin;
            let ratio = residual / d.powf(1.0 + alpha);
            if ratio > measured {
                measured = ratio;
            }
            if ratio > bregman_cap * 1.05 {
                return Err(DetachmentError::PreconditionFailed {
                    x0,
                    x,
                    ratio,
                    bound: bregman_cap * 1.05,
                });
            }
        }
    }

    // conjugate on a uniform grid covering the gradient range
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for g in &grads {
        for a in 0..dim {
            lo[a] = lo[a].min(g[a]);
            hi[a] = hi[a].max(g[a]);
        }
    }
    let per_axis = u.grid.axes[0].len();
    let bbox: Vec<(f64, f64)> = (0..dim).map(|a| (lo[a], hi[a])).collect();
    let targets = Grid::midpoint(&bbox, per_axis);
    let (v_values, argmax) = legendre_with_argmax(u, &targets)?;
    let v = PotentialField::new(targets, v_values, None, PotentialKind::KantorovichV0)
        .expect("sized to target grid");

    let x_idx: Vec<usize> = (0..n).collect();
    let min_sep = 2.0 * h.max(v.grid.max_spacing());
    let certificate = scan_ratios(u, &x_idx, &v, p, min_sep, grad, Some((&argmax, 3)))?;
    let bound = (1.0 - 0.1) / (p * lambda_h.powf(p));
    let satisfied = certificate.best_l >= bound;
    Ok(GlobalDetachmentReport {
        certificate,
        bound,
        satisfied,
        measured_bregman: measured,
    })
}

/// One quasi-Monte-Carlo estimate of
/// mean over B_r(z) of exp(-|x-z|/r) * [x in omega],
/// which equals the ratio of the exponential integral over omega ∩ B_r(z)
/// to the ball volume.
pub fn ball_ratio(omega: &ConvexDomain, z: &[f64], r: f64, points: usize, seed: u64) -> f64 {
    let dim = omega.dimension();
    let offset = seed.wrapping_mul(7919);
    let mut total = 0.0;
    let mut x = vec![0.0; dim];
    match dim {
        1 => {
            for k in 0..points {
                let t = halton_point(k as u64 + 1, offset, 1)[0];
                x[0] = z[0] + r * (2.0 * t - 1.0);
                if omega.contains(&x) {
                    total += (-(x[0] - z[0]).abs() / r).exp();
                }
            }
        }
        2 => {
            for k in 0..points {
                let t = halton_point(k as u64 + 1, offset, 2);
                let rho = r * t[0].sqrt();
                let theta = 2.0 * std::f64::consts::PI * t[1];
                x[0] = z[0] + rho * theta.cos();
                x[1] = z[1] + rho * theta.sin();
                if omega.contains(&x) {
                    total += (-rho / r).exp();
                }
            }
        }
        _ => {
            // rejection from the enclosing cube, deterministic sequence
            let mut accepted = 0usize;
            let mut index = 1u64;
            while accepted < points {
                let t = halton_point(index, offset, dim);
                index += 1;
                let mut norm2 = 0.0;
                for a in 0..dim {
                    let c = 2.0 * t[a] - 1.0;
                    x[a] = c;
                    norm2 += c * c;
                }
                if norm2 > 1.0 {
                    continue;
                }
                accepted += 1;
                let mut inside = vec![0.0; dim];
                for a in 0..dim {
                    inside[a] = z[a] + r * x[a];
                }
                if omega.contains(&inside) {
                    total += (-(norm2.sqrt())).exp();
                }
            }
        }
    }
    total / points as f64
}

/// Options for [`convex_ball_lower_bound_with`].
#[derive(Debug, Clone)]
pub struct BallBoundOptions {
    pub integral_points: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for BallBoundOptions {
    fn default() -> Self {
        BallBoundOptions {
            integral_points: 100_000,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BallBoundReport {
    pub min_ratio: f64,
    pub worst_z: Vec<f64>,
    pub worst_r: f64,
    pub pairs: usize,
}

/// Minimum over sampled centers z in the closure of omega and radii
/// r in (0,1) of the exponential ball ratio.
///
/// Centers sit on a uniform inclusive grid over the bounding box (clipped
/// to the domain, so box corners are sampled); radii on the uniform grid
/// k/(R+1). Each integral uses a deterministic Halton sequence offset by
/// the seed, so the reported minimum is bit-reproducible.
pub fn convex_ball_lower_bound(
    omega: &ConvexDomain,
    z_samples: usize,
    r_samples: usize,
) -> Result<f64, DetachmentError> {
    convex_ball_lower_bound_with(omega, z_samples, r_samples, &BallBoundOptions::default())
        .map(|rep| rep.min_ratio)
}

pub fn convex_ball_lower_bound_with(
    omega: &ConvexDomain,
    z_samples: usize,
    r_samples: usize,
    opts: &BallBoundOptions,
) -> Result<BallBoundReport, DetachmentError> {
    if z_samples < 16 || r_samples < 16 {
        return Err(DetachmentError::TooFewSamples {
            z: z_samples,
            r: r_samples,
        });
    }
    let dim = omega.dimension();
    let per_axis = (z_samples as f64).powf(1.0 / dim as f64).ceil() as usize;
    let bbox = omega.bounding_box();
    // inclusive per-axis grid (endpoints included => corners are sampled)
    let mut centers: Vec<Vec<f64>> = Vec::new();
    let total = per_axis.pow(dim as u32);
    for flat in 0..total {
        let mut rr = flat;
        let mut z = vec![0.0; dim];
        for a in 0..dim {
            let i = rr % per_axis;
            rr /= per_axis;
            let (lo, hi) = bbox[a];
            z[a] = if per_axis == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (per_axis - 1) as f64
            };
        }
        if omega.contains(&z) {
            centers.push(z);
        }
    }
    let radii: Vec<f64> = (1..=r_samples)
        .map(|k| k as f64 / (r_samples + 1) as f64)
        .collect();

    let mut tasks: Vec<(usize, usize)> = Vec::new();
    for zi in 0..centers.len() {
        for ri in 0..radii.len() {
            tasks.push((zi, ri));
        }
    }
    let mut ratios = vec![0.0f64; tasks.len()];
    let threads = opts.threads.max(1).min(tasks.len().max(1));
    if threads <= 1 {
        for (t, &(zi, ri)) in tasks.iter().enumerate() {
            ratios[t] = ball_ratio(
                omega,
                &centers[zi],
                radii[ri],
                opts.integral_points,
                opts.seed,
            );
        }
    } else {
        // independent integrals; results land in fixed slots so the
        // assembled minimum is identical for any thread count
        let chunk = tasks.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (slot_block, task_block) in ratios.chunks_mut(chunk).zip(tasks.chunks(chunk)) {
                let centers = &centers;
                let radii = &radii;
                scope.spawn(move || {
                    for (slot, &(zi, ri)) in slot_block.iter_mut().zip(task_block) {
                        *slot = ball_ratio(
                            omega,
                            &centers[zi],
                            radii[ri],
                            opts.integral_points,
                            opts.seed,
                        );
                    }
                });
            }
        });
    }
    let mut min_ratio = f64::INFINITY;
    let mut worst = 0usize;
    for (t, &r) in ratios.iter().enumerate() {
        if r < min_ratio {
            min_ratio = r;
            worst = t;
        }
    }
    let (zi, ri) = tasks[worst];
    Ok(BallBoundReport {
        min_ratio,
        worst_z: centers[zi].clone(),
        worst_r: radii[ri],
        pairs: tasks.len(),
    })
}
