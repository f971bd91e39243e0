//! Bounded convex domains, absolutely continuous marginals with two-sided
//! density bounds, and their midpoint-rule discretization.
//!
//! Domains are either axis-aligned boxes (any dimension) or convex polygons
//! (dimension 2; a 1D "polytope" is just an interval, use a box). Every
//! marginal is discretized on a tensor-product midpoint grid clipped to the
//! domain, with weights `cell volume * density`, renormalized to unit mass.

use std::fmt;
use std::sync::Arc;

use crate::num::dist;

/// Absolute tolerance for polytope membership and box comparisons. Grids
/// never place nodes closer than ~1e-3 to a face at desk scale, so this is
/// far below any geometric feature size.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("dimension must be >= 1")]
    ZeroDimension,
    #[error("box interval {axis} is empty or unbounded: ({lo}, {hi})")]
    BadInterval { axis: usize, lo: f64, hi: f64 },
    #[error("polygon needs at least 3 distinct vertices, got {0}")]
    DegeneratePolygon(usize),
    #[error("polytope shape is only supported in dimension 2")]
    UnsupportedPolytopeDimension,
    #[error("shrink margin {margin} leaves no interior (inradius {inradius})")]
    MarginTooLarge { margin: f64, inradius: f64 },
    #[error("shrink margin must lie in (0, diameter/2), got {0}")]
    BadMargin(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Per-axis open intervals (lo, hi).
    Box(Vec<(f64, f64)>),
    /// Convex polygon in the plane: hull vertices in counter-clockwise
    /// order plus inward edge normals (unit) and offsets, cached at build.
    /// The centroid-centered inscribed/circumscribed radii short-circuit
    /// membership for points far from the boundary ring.
    Polygon {
        vertices: Vec<[f64; 2]>,
        normals: Vec<[f64; 2]>,
        offsets: Vec<f64>,
        centroid: [f64; 2],
        inradius: f64,
        circumradius: f64,
    },
}

/// A bounded convex region of R^n with membership, diameter and shrinking.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexDomain {
    dim: usize,
    shape: Shape,
}

impl ConvexDomain {
    /// Axis-aligned box given by per-axis intervals.
    pub fn new_box(intervals: Vec<(f64, f64)>) -> Result<Self, GeometryError> {
        if intervals.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        for (axis, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(GeometryError::BadInterval { axis, lo, hi });
            }
        }
        Ok(ConvexDomain {
            dim: intervals.len(),
            shape: Shape::Box(intervals),
        })
    }

    /// 1D interval.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new_box(vec![(lo, hi)])
    }

    /// Convex polygon from an arbitrary planar vertex list; the convex hull
    /// of the input is taken, so redundant interior points are allowed.
    pub fn polygon(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        let hull = convex_hull(points);
        if hull.len() < 3 {
            return Err(GeometryError::DegeneratePolygon(hull.len()));
        }
        let (normals, offsets) = edge_normals(&hull);
        let centroid = polygon_centroid(&hull);
        let inradius = normals
            .iter()
            .zip(&offsets)
            .map(|(n, &c)| n[0] * centroid[0] + n[1] * centroid[1] - c)
            .fold(f64::INFINITY, f64::min);
        let circumradius = hull.iter().map(|v| dist(v, &centroid)).fold(0.0, f64::max);
        Ok(ConvexDomain {
            dim: 2,
            shape: Shape::Polygon {
                vertices: hull,
                normals,
                offsets,
                centroid,
                inradius,
                circumradius,
            },
        })
    }

    /// Regular k-gon approximation of a disk, as a convex polygon.
    pub fn regular_polygon(
        center: [f64; 2],
        radius: f64,
        segments: usize,
    ) -> Result<Self, GeometryError> {
        let k = segments.max(3);
        let pts: Vec<[f64; 2]> = (0..k)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
                [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
            })
            .collect();
        Self::polygon(&pts)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn is_box(&self) -> bool {
        matches!(self.shape, Shape::Box(_))
    }

    /// Box intervals when the domain is a box.
    pub fn intervals(&self) -> Option<&[(f64, f64)]> {
        match &self.shape {
            Shape::Box(iv) => Some(iv),
            _ => None,
        }
    }

    pub fn vertices(&self) -> Option<&[[f64; 2]]> {
        match &self.shape {
            Shape::Polygon { vertices, .. } => Some(vertices),
            _ => None,
        }
    }

    /// Closed membership test with tolerance [`MEMBERSHIP_TOL`].
    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::Box(iv) => iv
                .iter()
                .zip(x)
                .all(|(&(lo, hi), &xi)| xi >= lo - MEMBERSHIP_TOL && xi <= hi + MEMBERSHIP_TOL),
            Shape::Polygon {
                normals,
                offsets,
                centroid,
                inradius,
                circumradius,
                ..
            } => {
                let dx = x[0] - centroid[0];
                let dy = x[1] - centroid[1];
                let d2 = dx * dx + dy * dy;
                let rin = inradius - MEMBERSHIP_TOL;
                if rin > 0.0 && d2 <= rin * rin {
                    return true;
                }
                let rout = circumradius + MEMBERSHIP_TOL;
                if d2 > rout * rout {
                    return false;
                }
                normals
                    .iter()
                    .zip(offsets)
                    .all(|(n, &c)| n[0] * x[0] + n[1] * x[1] >= c - MEMBERSHIP_TOL)
            }
        }
    }

    /// Maximum pairwise distance: corner-to-corner for boxes, max over
    /// vertex pairs for polygons.
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Box(iv) => iv
                .iter()
                .map(|&(lo, hi)| (hi - lo) * (hi - lo))
                .sum::<f64>()
                .sqrt(),
            Shape::Polygon { vertices, .. } => {
                let mut best = 0.0f64;
                for i in 0..vertices.len() {
                    for j in (i + 1)..vertices.len() {
                        best = best.max(dist(&vertices[i], &vertices[j]));
                    }
                }
                best
            }
        }
    }

    /// Smallest enclosing axis-aligned box, as per-axis intervals.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        match &self.shape {
            Shape::Box(iv) => iv.clone(),
            Shape::Polygon { vertices, .. } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for a in 0..2 {
                        lo[a] = lo[a].min(v[a]);
                        hi[a] = hi[a].max(v[a]);
                    }
                }
                vec![(lo[0], hi[0]), (lo[1], hi[1])]
            }
        }
    }

    /// Lebesgue volume (length / area).
    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Box(iv) => iv.iter().map(|&(lo, hi)| hi - lo).product(),
            Shape::Polygon { vertices, .. } => shoelace_area(vertices),
        }
    }

    pub fn centroid(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Box(iv) => iv.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect(),
            Shape::Polygon { vertices, .. } => polygon_centroid(vertices).to_vec(),
        }
    }

    /// Compactly included subset at distance >= `margin` from the boundary.
    ///
    /// Boxes shrink each interval by `margin` at both ends. Polygons are
    /// scaled toward the centroid so that every new edge sits at least
    /// `margin` inside the corresponding old edge.
    pub fn shrink(&self, margin: f64) -> Result<Self, GeometryError> {
        if !(margin > 0.0 && margin < 0.5 * self.diameter()) {
            return Err(GeometryError::BadMargin(margin));
        }
        match &self.shape {
            Shape::Box(iv) => {
                let shrunk: Vec<(f64, f64)> = iv
                    .iter()
                    .map(|&(lo, hi)| (lo + margin, hi - margin))
                    .collect();
                if shrunk.iter().any(|&(lo, hi)| hi <= lo) {
                    let inradius = iv
                        .iter()
                        .map(|&(lo, hi)| 0.5 * (hi - lo))
                        .fold(f64::INFINITY, f64::min);
                    return Err(GeometryError::MarginTooLarge { margin, inradius });
                }
                ConvexDomain::new_box(shrunk)
            }
            Shape::Polygon {
                vertices,
                normals,
                offsets,
                ..
            } => {
                let c = polygon_centroid(vertices);
                // distance from the centroid to each edge line
                let rho = normals
                    .iter()
                    .zip(offsets)
                    .map(|(n, &off)| n[0] * c[0] + n[1] * c[1] - off)
                    .fold(f64::INFINITY, f64::min);
                if margin >= rho {
                    return Err(GeometryError::MarginTooLarge {
                        margin,
                        inradius: rho,
                    });
                }
                let s = 1.0 - margin / rho;
                let scaled: Vec<[f64; 2]> = vertices
                    .iter()
                    .map(|v| [c[0] + s * (v[0] - c[0]), c[1] + s * (v[1] - c[1])])
                    .collect();
                ConvexDomain::polygon(&scaled)
            }
        }
    }
}

impl fmt::Display for ConvexDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Box(iv) => {
                write!(f, "box")?;
                for (lo, hi) in iv {
                    write!(f, " ({lo}, {hi})")?;
                }
                Ok(())
            }
            Shape::Polygon { vertices, .. } => {
                write!(f, "polygon with {} vertices", vertices.len())
            }
        }
    }
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise.
fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| dist(a, b) < 1e-15);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 1e-300
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 1e-300
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Inward unit normals and offsets c with n.x >= c inside, per CCW edge.
fn edge_normals(hull: &[[f64; 2]]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let k = hull.len();
    let mut normals = Vec::with_capacity(k);
    let mut offsets = Vec::with_capacity(k);
    for i in 0..k {
        let a = hull[i];
        let b = hull[(i + 1) % k];
        let e = [b[0] - a[0], b[1] - a[1]];
        let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
        // CCW orientation puts the interior on the left of each edge
        let n = [-e[1] / len, e[0] / len];
        normals.push(n);
        offsets.push(n[0] * a[0] + n[1] * a[1]);
    }
    (normals, offsets)
}

fn shoelace_area(v: &[[f64; 2]]) -> f64 {
    let k = v.len();
    let mut s = 0.0;
    for i in 0..k {
        let a = v[i];
        let b = v[(i + 1) % k];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s.abs()
}

fn polygon_centroid(v: &[[f64; 2]]) -> [f64; 2] {
    let k = v.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut area = 0.0;
    for i in 0..k {
        let a = v[i];
        let b = v[(i + 1) % k];
        let w = a[0] * b[1] - b[0] * a[1];
        area += w;
        cx += (a[0] + b[0]) * w;
        cy += (a[1] + b[1]) * w;
    }
    area *= 0.5;
    [cx / (6.0 * area), cy / (6.0 * area)]
}

// ---------------------------------------------------------------------------
// Densities
// ---------------------------------------------------------------------------

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// An absolutely continuous density on a domain with certified two-sided
/// bounds 0 < lower <= f <= upper. The bounds are checked pointwise at every
/// quadrature node during discretization.
#[derive(Clone)]
pub struct DensitySpec {
    evaluator: Evaluator,
    pub lower: f64,
    pub upper: f64,
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensitySpec")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

impl DensitySpec {
    pub fn new(
        evaluator: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        lower: f64,
        upper: f64,
    ) -> Self {
        DensitySpec {
            evaluator: Arc::new(evaluator),
            lower,
            upper,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    /// Normalized uniform density on `domain` (1/volume everywhere).
    pub fn uniform(domain: &ConvexDomain) -> Self {
        let v = domain.volume();
        let c = 1.0 / v;
        DensitySpec::new(move |_| c, c, c)
    }

    /// 1 + amp*sin(2*pi*freq*x_1), normalized over a box domain. |amp| < 1
    /// keeps the density bounded away from zero.
    pub fn sine_perturbed(domain: &ConvexDomain, amp: f64, freq: f64) -> Self {
        let iv = domain
            .intervals()
            .expect("sine-perturbed density requires a box domain")
            .to_vec();
        let vol: f64 = iv.iter().map(|&(lo, hi)| hi - lo).product();
        let (lo1, hi1) = iv[0];
        let w = 2.0 * std::f64::consts::PI * freq;
        // exact integral of the first-axis profile over the box
        let integral_axis1 = (hi1 - lo1) + amp * ((w * lo1).cos() - (w * hi1).cos()) / w;
        let z = vol / (hi1 - lo1) * integral_axis1;
        let lower = (1.0 - amp.abs()) / z;
        let upper = (1.0 + amp.abs()) / z;
        DensitySpec::new(move |x| (1.0 + amp * (w * x[0]).sin()) / z, lower, upper)
    }

    /// 1 + slope*(x_1 - midpoint of the first axis), normalized over a box.
    pub fn linear(domain: &ConvexDomain, slope: f64) -> Self {
        let iv = domain
            .intervals()
            .expect("linear density requires a box domain")
            .to_vec();
        let vol: f64 = iv.iter().map(|&(lo, hi)| hi - lo).product();
        let (lo1, hi1) = iv[0];
        let mid = 0.5 * (lo1 + hi1);
        let half = 0.5 * (hi1 - lo1);
        assert!(
            slope.abs() * half < 1.0,
            "linear density must stay positive"
        );
        // the perturbation is odd about the midpoint, so Z is just the volume
        let z = vol;
        let lower = (1.0 - slope.abs() * half) / z;
        let upper = (1.0 + slope.abs() * half) / z;
        DensitySpec::new(move |x| (1.0 + slope * (x[0] - mid)) / z, lower, upper)
    }

    /// Gaussian bump exp(-|x-center|^2 / (2 sigma^2)) truncated to a box and
    /// normalized by a fine midpoint quadrature.
    pub fn gaussian_truncated(domain: &ConvexDomain, center: Vec<f64>, sigma: f64) -> Self {
        let iv = domain
            .intervals()
            .expect("gaussian-truncated density requires a box domain")
            .to_vec();
        let dim = iv.len();
        debug_assert_eq!(center.len(), dim);
        let raw = {
            let center = center.clone();
            move |x: &[f64]| {
                let d2: f64 = x
                    .iter()
                    .zip(&center)
                    .map(|(xi, ci)| (xi - ci) * (xi - ci))
                    .sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
        };
        // normalization by fine quadrature, exact bounds from box geometry
        let res: usize = if dim == 1 { 200_000 } else { 600 };
        let mut z = 0.0;
        let cell: f64 = iv.iter().map(|&(lo, hi)| (hi - lo) / res as f64).product();
        let total = res.pow(dim as u32);
        let mut x = vec![0.0; dim];
        for flat in 0..total {
            let mut r = flat;
            for a in 0..dim {
                let i = r % res;
                r /= res;
                x[a] = iv[a].0 + (i as f64 + 0.5) * (iv[a].1 - iv[a].0) / res as f64;
            }
            z += raw(&x) * cell;
        }
        // nearest/farthest box points from the center give exact bounds
        let mut d2_min = 0.0;
        let mut d2_max = 0.0;
        for (a, &(lo, hi)) in iv.iter().enumerate() {
            let c = center[a];
            let clamped = c.clamp(lo, hi);
            d2_min += (c - clamped) * (c - clamped);
            let far = if (c - lo).abs() > (c - hi).abs() {
                lo
            } else {
                hi
            };
            d2_max += (c - far) * (c - far);
        }
        let upper = (-d2_min / (2.0 * sigma * sigma)).exp() / z;
        let lower = (-d2_max / (2.0 * sigma * sigma)).exp() / z;
        DensitySpec::new(move |x| raw(x) / z, lower, upper)
    }
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum MarginalError {
    #[error("resolution must be >= 2, got {0}")]
    BadResolution(usize),
    #[error("density bound violated at node {index} = {coords:?}: f = {value}, bounds [{lower}, {upper}]")]
    BoundViolation {
        index: usize,
        coords: Vec<f64>,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("no quadrature node falls inside the domain (degenerate discretization)")]
    DegenerateDomain,
}

/// Tensor-grid geometry shared by marginals and potential fields: per-axis
/// node coordinates (uniform midpoint rule).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<Vec<f64>>,
}

impl Grid {
    pub fn midpoint(bbox: &[(f64, f64)], resolution: usize) -> Self {
        let axes = bbox
            .iter()
            .map(|&(lo, hi)| {
                let h = (hi - lo) / resolution as f64;
                (0..resolution).map(|i| lo + (i as f64 + 0.5) * h).collect()
            })
            .collect();
        Grid { axes }
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    /// Per-axis spacing (uniform by construction).
    pub fn spacing(&self) -> Vec<f64> {
        self.axes
            .iter()
            .map(|a| if a.len() > 1 { a[1] - a[0] } else { 0.0 })
            .collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    /// Total tensor-node count (before any clipping).
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of flat tensor index `i`, last axis fastest.
    pub fn node(&self, mut i: usize) -> Vec<f64> {
        let dim = self.axes.len();
        let mut x = vec![0.0; dim];
        for a in (0..dim).rev() {
            let k = self.axes[a].len();
            x[a] = self.axes[a][i % k];
            i /= k;
        }
        x
    }
}

/// A discretized probability measure: quadrature nodes inside a convex
/// domain carrying normalized weights.
#[derive(Debug, Clone)]
pub struct DiscreteMarginal {
    pub domain: ConvexDomain,
    pub grid: Grid,
    /// Flat node coordinates, `dim` entries per node, grid order.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// For clipped (polytope) grids: the tensor index of each retained node.
    tensor_index: Vec<usize>,
    pub resolution: usize,
    /// Signed raw-mass defect before normalization: sum(raw weights) - 1.
    pub mass_defect: f64,
    /// Raw-mass normalizer Z (the pre-normalization total mass).
    pub normalizer: f64,
    pub cell_volume: f64,
    /// True when the node set is the full tensor grid (box domains).
    pub full_tensor: bool,
}

impl DiscreteMarginal {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.domain.dimension()
    }

    #[inline]
    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dimension();
        &self.nodes[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tensor_index(&self, i: usize) -> usize {
        self.tensor_index[i]
    }

    /// Mean of the measure (barycenter of weighted nodes).
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dimension();
        let mut m = vec![0.0; d];
        for i in 0..self.len() {
            for a in 0..d {
                m[a] += self.weights[i] * self.node(i)[a];
            }
        }
        m
    }

    /// Indices of nodes lying inside `subset`.
    pub fn nodes_in(&self, subset: &ConvexDomain) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| subset.contains(self.node(i)))
            .collect()
    }
}

/// Discretize `density` on `domain` with a midpoint tensor grid of
/// `resolution` nodes per axis.
///
/// Nodes outside the domain are dropped (relevant for polygons); the raw
/// weights are `cell volume * density(node)` and the result is renormalized
/// to total mass one, recording the pre-normalization defect.
pub fn build_marginal(
    domain: &ConvexDomain,
    density: &DensitySpec,
    resolution: usize,
) -> Result<DiscreteMarginal, MarginalError> {
    if resolution < 2 {
        return Err(MarginalError::BadResolution(resolution));
    }
    let bbox = domain.bounding_box();
    let grid = Grid::midpoint(&bbox, resolution);
    let cell_volume: f64 = bbox
        .iter()
        .map(|&(lo, hi)| (hi - lo) / resolution as f64)
        .product();

    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut tensor_index = Vec::new();
    for flat in 0..grid.len() {
        let x = grid.node(flat);
        if !domain.contains(&x) {
            continue;
        }
        let f = density.eval(&x);
        if f < density.lower * (1.0 - 1e-12) - 1e-300 || f > density.upper * (1.0 + 1e-12) {
            return Err(MarginalError::BoundViolation {
                index: weights.len(),
                coords: x,
                value: f,
                lower: density.lower,
                upper: density.upper,
            });
        }
        nodes.extend_from_slice(&x);
        weights.push(cell_volume * f);
        tensor_index.push(flat);
    }
    if weights.is_empty() {
        return Err(MarginalError::DegenerateDomain);
    }
    let raw_mass: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= raw_mass;
    }
    let full_tensor = tensor_index.len() == grid.len();
    Ok(DiscreteMarginal {
        domain: domain.clone(),
        grid,
        nodes,
        weights,
        tensor_index,
        resolution,
        mass_defect: raw_mass - 1.0,
        normalizer: raw_mass,
        cell_volume,
        full_tensor,
    })
}
