//! Small numerical helpers shared across the crate: stabilized log-sum-exp,
//! tiny symmetric eigen solves, Halton sequences, and least-squares lines.

/// Numerically stable log(sum_i exp(x_i)).
///
/// Subtracts the running maximum before exponentiating, so the result is
/// finite whenever any input is finite. Returns -inf on an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for &x in xs {
        if x > m {
            m = x;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let mut s = 0.0;
    for &x in xs {
        s += (x - m).exp();
    }
    m + s.ln()
}

/// Log-sum-exp over a virtual family given by a closure, avoiding an
/// intermediate allocation in hot loops. Two passes, fixed order.
#[inline]
pub fn logsumexp_by(len: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for i in 0..len {
        let x = f(i);
        if x > m {
            m = x;
        }
    }
    if !m.is_finite() {
        return m;
    }
    let mut s = 0.0;
    for i in 0..len {
        s += (f(i) - m).exp();
    }
    m + s.ln()
}

/// Dense symmetric matrix of small order (the Hessians here are n <= 2, but
/// the storage is generic).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    pub n: usize,
    /// Row-major n x n storage; kept symmetric by construction.
    pub data: Vec<f64>,
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Rank-one update `self += c * d d^T`.
    pub fn add_outer(&mut self, d: &[f64], c: f64) {
        for i in 0..self.n {
            for j in 0..self.n {
                self.data[i * self.n + j] += c * d[i] * d[j];
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Eigenvalues, ascending. Closed-form for n <= 2, cyclic Jacobi sweeps
    /// otherwise (plenty for the tiny orders used here).
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.n {
            0 => vec![],
            1 => vec![self.get(0, 0)],
            2 => {
                let a = self.get(0, 0);
                let b = self.get(0, 1);
                let c = self.get(1, 1);
                let m = 0.5 * (a + c);
                let d = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                vec![m - d, m + d]
            }
            n => {
                let mut a = self.data.clone();
                for _sweep in 0..64 {
                    let mut off = 0.0;
                    for i in 0..n {
                        for j in (i + 1)..n {
                            off += a[i * n + j] * a[i * n + j];
                        }
                    }
                    if off.sqrt() < 1e-14 {
                        break;
                    }
                    for p in 0..n {
                        for q in (p + 1)..n {
                            let apq = a[p * n + q];
                            if apq.abs() < 1e-300 {
                                continue;
                            }
                            let app = a[p * n + p];
                            let aqq = a[q * n + q];
                            let theta = 0.5 * (aqq - app) / apq;
                            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                            let cth = 1.0 / (t * t + 1.0).sqrt();
                            let sth = t * cth;
                            for k in 0..n {
                                let akp = a[k * n + p];
                                let akq = a[k * n + q];
                                a[k * n + p] = cth * akp - sth * akq;
                                a[k * n + q] = sth * akp + cth * akq;
                            }
                            for k in 0..n {
                                let apk = a[p * n + k];
                                let aqk = a[q * n + k];
                                a[p * n + k] = cth * apk - sth * aqk;
                                a[q * n + k] = sth * apk + cth * aqk;
                            }
                        }
                    }
                }
                let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
                eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
                eig
            }
        }
    }

    /// Spectral norm (largest absolute eigenvalue).
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .fold(0.0f64, |m, e| m.max(e.abs()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// Euclidean distance between two points given as slices.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Radical-inverse (van der Corput) value of `index` in the given base.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut value = 0.0;
    let mut scale = inv;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    value
}

const HALTON_BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];

/// Deterministic Halton point in [0,1)^dim. `index` should start at 1;
/// `offset` shifts the whole sequence (used as the reproducibility seed).
pub fn halton_point(index: u64, offset: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= HALTON_BASES.len(), "halton dimension too large");
    (0..dim)
        .map(|d| radical_inverse(index + offset, HALTON_BASES[d]))
        .collect()
}

/// Ordinary least squares for y = a + b x. Returns (intercept, slope,
/// stderr of the slope). Requires at least 3 points for the error estimate.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let dof = (xs.len().max(3) - 2) as f64;
    let stderr = (ssr / dof / sxx).sqrt();
    (intercept, slope, stderr)
}

/// Least squares through the origin, y = b x. Returns (slope, stderr).
pub fn origin_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - slope * x;
            r * r
        })
        .sum();
    let dof = (xs.len().max(2) - 1) as f64;
    let stderr = (ssr / dof / sxx).sqrt();
    (slope, stderr)
}
