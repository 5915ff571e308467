/// A batch of `Dual2` vectors stored as three row blocks.
///
/// Rows `[0, len)` hold values, rows `[len, 2 len)` the derivatives along
/// the first input axis and rows `[2 len, 3 len)` along the second. Every
/// row is `dim` wide. Dense layers act on all `3 len` rows with one weight
/// matrix, which is how Jacobians ride along with values.
#[derive(Clone, Debug, PartialEq)]
pub struct DualBatch {
    len: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DualBatch {
    pub fn zeros(len: usize, dim: usize) -> Self {
        DualBatch {
            len,
            dim,
            data: vec![0.0; 3 * len * dim],
        }
    }

    pub fn from_data(len: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), 3 * len * dim, "dual batch storage size");
        DualBatch { len, dim, data }
    }

    /// Domain points with unit tangents, so outputs carry input-Jacobians.
    pub fn seed_identity(points: &[[f64; 2]]) -> Self {
        let mut b = DualBatch::zeros(points.len(), 2);
        for (i, p) in points.iter().enumerate() {
            b.value_mut(i).copy_from_slice(p);
            b.tangent_mut(0, i)[0] = 1.0;
            b.tangent_mut(1, i)[1] = 1.0;
        }
        b
    }

    /// Points `c + R (p - c)` with tangents equal to the columns of `R`.
    /// The identity rotation reproduces [`DualBatch::seed_identity`] exactly.
    pub fn seed_linear(points: &[[f64; 2]], rot: &[[f64; 2]; 2], center: [f64; 2]) -> Self {
        if *rot == [[1.0, 0.0], [0.0, 1.0]] {
            return Self::seed_identity(points);
        }
        let mut b = DualBatch::zeros(points.len(), 2);
        for (i, p) in points.iter().enumerate() {
            let d = [p[0] - center[0], p[1] - center[1]];
            let v = b.value_mut(i);
            v[0] = center[0] + rot[0][0] * d[0] + rot[0][1] * d[1];
            v[1] = center[1] + rot[1][0] * d[0] + rot[1][1] * d[1];
            b.tangent_mut(0, i).copy_from_slice(&[rot[0][0], rot[1][0]]);
            b.tangent_mut(1, i).copy_from_slice(&[rot[0][1], rot[1][1]]);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        3 * self.len
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> &[f64] {
        self.row(i)
    }

    pub fn value_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dim;
        &mut self.data[i * d..(i + 1) * d]
    }

    /// Derivative along input axis `axis` (0 or 1) of sample `i`.
    pub fn tangent(&self, axis: usize, i: usize) -> &[f64] {
        self.row((axis + 1) * self.len + i)
    }

    pub fn tangent_mut(&mut self, axis: usize, i: usize) -> &mut [f64] {
        let r = (axis + 1) * self.len + i;
        let d = self.dim;
        &mut self.data[r * d..(r + 1) * d]
    }

    /// Jacobian of sample `i` as an `N x 2` matrix; `N` must equal `dim`.
    pub fn jacobian<const N: usize>(&self, i: usize) -> [[f64; 2]; N] {
        assert_eq!(N, self.dim);
        let tu = self.tangent(0, i);
        let tv = self.tangent(1, i);
        std::array::from_fn(|r| [tu[r], tv[r]])
    }

    pub fn set_jacobian<const N: usize>(&mut self, i: usize, j: &[[f64; 2]; N]) {
        assert_eq!(N, self.dim);
        for (r, row) in j.iter().enumerate() {
            self.tangent_mut(0, i)[r] = row[0];
            self.tangent_mut(1, i)[r] = row[1];
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}
