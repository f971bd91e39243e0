//! Grid-sampled potentials.
//!
//! A [`PotentialField`] holds one scalar value per tensor-grid node (units of
//! squared length, the same scale as |x|^2/2). Off-node evaluation uses
//! multilinear interpolation; queries outside the node bounding box are
//! rejected. Entropic potentials additionally support exact re-evaluation
//! through the Schrödinger system, which lives in [`crate::potentials`].

use crate::marginals::Grid;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("query point {0:?} lies outside the node bounding box")]
    OutOfRange(Vec<f64>),
    #[error("field is not defined on a full tensor grid; interpolation unavailable")]
    NotTensor,
    #[error("value count {values} does not match grid size {grid}")]
    SizeMismatch { values: usize, grid: usize },
}

/// What a potential field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    SchrodingerU,
    SchrodingerV,
    KantorovichU0,
    KantorovichV0,
}

impl PotentialKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PotentialKind::SchrodingerU => "schrodinger-u",
            PotentialKind::SchrodingerV => "schrodinger-v",
            PotentialKind::KantorovichU0 => "kantorovich-u0",
            PotentialKind::KantorovichV0 => "kantorovich-v0",
        }
    }
}

/// Samples of one potential on a tensor grid.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Regularization the field belongs to; `None` for the eps = 0
    /// (Kantorovich) objects.
    pub epsilon: Option<f64>,
    pub kind: PotentialKind,
    /// Tensor index of each value when the grid was clipped to a non-box
    /// domain; `None` means the values cover the full tensor grid.
    pub tensor_index: Option<Vec<usize>>,
}

impl PotentialField {
    pub fn new(
        grid: Grid,
        values: Vec<f64>,
        epsilon: Option<f64>,
        kind: PotentialKind,
    ) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::SizeMismatch {
                values: values.len(),
                grid: grid.len(),
            });
        }
        debug_assert!(
            values.iter().all(|v| v.is_finite()),
            "potential values must be finite"
        );
        Ok(PotentialField {
            grid,
            values,
            epsilon,
            kind,
            tensor_index: None,
        })
    }

    /// Field on a clipped tensor grid: `tensor_index[i]` is the flat tensor
    /// position of `values[i]`. Interpolation is refused on such fields.
    pub fn new_clipped(
        grid: Grid,
        values: Vec<f64>,
        tensor_index: Vec<usize>,
        epsilon: Option<f64>,
        kind: PotentialKind,
    ) -> Result<Self, FieldError> {
        if values.len() != tensor_index.len() {
            return Err(FieldError::SizeMismatch {
                values: values.len(),
                grid: tensor_index.len(),
            });
        }
        Ok(PotentialField {
            grid,
            values,
            epsilon,
            kind,
            tensor_index: Some(tensor_index),
        })
    }

    pub fn full_tensor(&self) -> bool {
        self.tensor_index.is_none()
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Per-axis node bounding box: [first node, last node].
    pub fn node_bbox(&self) -> Vec<(f64, f64)> {
        self.grid
            .axes
            .iter()
            .map(|a| (a[0], *a.last().unwrap()))
            .collect()
    }

    pub fn in_bbox(&self, x: &[f64]) -> bool {
        self.node_bbox()
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &xi)| xi >= lo - 1e-12 && xi <= hi + 1e-12)
    }

    /// Multilinear interpolation at `x`.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64, FieldError> {
        if !self.full_tensor() {
            return Err(FieldError::NotTensor);
        }
        if !self.in_bbox(x) {
            return Err(FieldError::OutOfRange(x.to_vec()));
        }
        let dim = self.dimension();
        // locate the lower cell corner and barycentric coordinate per axis
        let mut cell = vec![0usize; dim];
        let mut t = vec![0.0f64; dim];
        for a in 0..dim {
            let axis = &self.grid.axes[a];
            let k = axis.len();
            if k == 1 {
                cell[a] = 0;
                t[a] = 0.0;
                continue;
            }
            let h = axis[1] - axis[0];
            let raw = (x[a] - axis[0]) / h;
            let i = (raw.floor() as isize).clamp(0, k as isize - 2) as usize;
            cell[a] = i;
            t[a] = ((x[a] - axis[i]) / h).clamp(0.0, 1.0);
        }
        // accumulate over the 2^dim cell corners
        let mut value = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for a in 0..dim {
                let up = (corner >> a) & 1 == 1;
                let idx = cell[a] + up as usize;
                w *= if up { t[a] } else { 1.0 - t[a] };
                flat = flat * self.grid.axes[a].len() + idx;
            }
            value += w * self.values[flat];
        }
        Ok(value)
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line_grid(n: usize) -> Grid {
        Grid::midpoint(&[(0.0, 1.0)], n)
    }

    #[test]
    fn interpolation_is_exact_at_nodes_and_linear_between() {
        let grid = line_grid(8);
        let values: Vec<f64> = grid.axes[0].iter().map(|x| 2.0 * x + 1.0).collect();
        let f = PotentialField::new(grid, values, Some(0.1), PotentialKind::SchrodingerU).unwrap();
        for i in 0..8 {
            let x = f.grid.axes[0][i];
            assert_abs_diff_eq!(f.interpolate(&[x]).unwrap(), 2.0 * x + 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(f.interpolate(&[0.5]).unwrap(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn queries_outside_node_bbox_are_rejected() {
        let grid = line_grid(8);
        let values = vec![0.0; 8];
        let f = PotentialField::new(grid, values, None, PotentialKind::KantorovichU0).unwrap();
        // first node sits at 1/16; 0.01 is inside the domain but off the grid
        assert!(matches!(
            f.interpolate(&[0.01]),
            Err(FieldError::OutOfRange(_))
        ));
        assert!(f.interpolate(&[0.0625]).is_ok());
    }

    #[test]
    fn bilinear_reproduces_affine_functions() {
        let grid = Grid::midpoint(&[(0.0, 1.0), (0.0, 2.0)], 5);
        let mut values = Vec::new();
        for flat in 0..grid.len() {
            let p = grid.node(flat);
            values.push(3.0 * p[0] - 0.5 * p[1] + 0.25);
        }
        let f = PotentialField::new(grid, values, Some(1.0), PotentialKind::SchrodingerV).unwrap();
        let q = [0.43, 1.17];
        assert_abs_diff_eq!(
            f.interpolate(&q).unwrap(),
            3.0 * q[0] - 0.5 * q[1] + 0.25,
            epsilon = 1e-13
        );
    }
}
