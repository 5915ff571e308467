//! Fixed-size matrix helpers over any [`Real`] scalar.
//!
//! Matrices are row-major nested arrays: `[[T; C]; R]` is `R x C`.

use super::Real;

pub type Mat2<T> = [[T; 2]; 2];
pub type Mat3x2<T> = [[T; 2]; 3];
pub type Mat2x3<T> = [[T; 3]; 2];

pub fn matmul<T: Real, const R: usize, const K: usize, const C: usize>(
    a: &[[T; K]; R],
    b: &[[T; C]; K],
) -> [[T; C]; R] {
    std::array::from_fn(|r| {
        std::array::from_fn(|c| {
            let mut acc = a[r][0] * b[0][c];
            for k in 1..K {
                acc = acc + a[r][k] * b[k][c];
            }
            acc
        })
    })
}

pub fn transpose<T: Copy, const R: usize, const C: usize>(a: &[[T; C]; R]) -> [[T; R]; C] {
    std::array::from_fn(|c| std::array::from_fn(|r| a[r][c]))
}

/// Pullback metric `JᵀJ` of an `n x 2` Jacobian.
pub fn metric<T: Real, const N: usize>(j: &[[T; 2]; N]) -> Mat2<T> {
    matmul(&transpose(j), j)
}

pub fn det2<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn trace2<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] + m[1][1]
}

/// Inverse of a 2x2 matrix; `None` when the determinant is exactly zero.
pub fn inv2<T: Real>(m: &Mat2<T>) -> Option<Mat2<T>> {
    let d = det2(m);
    if d.value() == 0.0 {
        return None;
    }
    let inv = d.recip();
    Some([
        [m[1][1] * inv, -m[0][1] * inv],
        [-m[1][0] * inv, m[0][0] * inv],
    ])
}

pub fn frobenius_sq<T: Real, const R: usize, const C: usize>(a: &[[T; C]; R]) -> T {
    let mut acc = a[0][0] * a[0][0];
    for (r, row) in a.iter().enumerate() {
        for (c, x) in row.iter().enumerate() {
            if r + c > 0 {
                acc = acc + *x * *x;
            }
        }
    }
    acc
}

pub fn frobenius<T: Real, const R: usize, const C: usize>(a: &[[T; C]; R]) -> T {
    frobenius_sq(a).sqrt()
}

pub fn cross3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot<T: Real, const N: usize>(a: &[T; N], b: &[T; N]) -> T {
    let mut acc = a[0] * b[0];
    for k in 1..N {
        acc = acc + a[k] * b[k];
    }
    acc
}

pub fn column<T: Copy, const R: usize, const C: usize>(a: &[[T; C]; R], c: usize) -> [T; R] {
    std::array::from_fn(|r| a[r][c])
}

/// Moore–Penrose left pseudoinverse `(JᵀJ)⁻¹Jᵀ` of a full-rank 3x2 matrix.
pub fn pinv3x2<T: Real>(j: &Mat3x2<T>) -> Option<Mat2x3<T>> {
    let g = inv2(&metric(j))?;
    Some(matmul(&g, &transpose(j)))
}

/// Orthonormal basis (Gram–Schmidt, first column first) of the column space
/// of a 3x2 matrix, returned as the columns of a 3x2 matrix.
pub fn orthonormal_frame<T: Real>(j: &Mat3x2<T>) -> Mat3x2<T> {
    let a = column(j, 0);
    let b = column(j, 1);
    let na = dot(&a, &a).sqrt();
    let e1 = a.map(|x| x / na);
    let proj = dot(&e1, &b);
    let r: [T; 3] = std::array::from_fn(|k| b[k] - e1[k] * proj);
    let nr = dot(&r, &r).sqrt();
    let e2 = r.map(|x| x / nr);
    std::array::from_fn(|k| [e1[k], e2[k]])
}

/// Singular values (descending) of an `n x 2` real matrix, from the
/// closed-form eigenvalues of its 2x2 metric.
pub fn singular_values<const N: usize>(j: &[[f64; 2]; N]) -> [f64; 2] {
    let m = metric(j);
    let [l1, l2] = sym2_eigenvalues(&m);
    [l1.max(0.0).sqrt(), l2.max(0.0).sqrt()]
}

/// Eigenvalues (descending) of a symmetric 2x2 matrix.
pub fn sym2_eigenvalues(m: &Mat2<f64>) -> [f64; 2] {
    let half_tr = 0.5 * (m[0][0] + m[1][1]);
    let diff = 0.5 * (m[0][0] - m[1][1]);
    let r = (diff * diff + m[0][1] * m[1][0]).max(0.0).sqrt();
    [half_tr + r, half_tr - r]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_determinant() {
        let m = [[2.0, 1.0], [1.0, 3.0]];
        assert_eq!(det2(&m), 5.0);
        let inv = inv2(&m).unwrap();
        let id = matmul(&m, &inv);
        for r in 0..2 {
            for c in 0..2 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((id[r][c] - e).abs() < 1e-15);
            }
        }
        assert!(inv2(&[[1.0, 2.0], [2.0, 4.0]]).is_none());
    }

    #[test]
    fn pseudoinverse_is_left_inverse() {
        let j = [[1.0, 0.5], [0.2, 2.0], [-0.3, 0.7]];
        let p = pinv3x2(&j).unwrap();
        let id = matmul(&p, &j);
        assert!((id[0][0] - 1.0).abs() < 1e-12 && (id[1][1] - 1.0).abs() < 1e-12);
        assert!(id[0][1].abs() < 1e-12 && id[1][0].abs() < 1e-12);
    }

    #[test]
    fn frame_is_orthonormal() {
        let j = [[1.0, 0.5], [0.2, 2.0], [-0.3, 0.7]];
        let e = orthonormal_frame(&j);
        let g = metric(&e);
        assert!((g[0][0] - 1.0).abs() < 1e-12);
        assert!((g[1][1] - 1.0).abs() < 1e-12);
        assert!(g[0][1].abs() < 1e-12);
    }

    #[test]
    fn cross_and_norms() {
        assert_eq!(cross3([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]), [0.0, 0.0, 1.0]);
        assert_eq!(frobenius(&[[3.0, 0.0], [0.0, 4.0]]), 5.0);
        assert_eq!(trace2(&[[3.0, 9.0], [9.0, 4.0]]), 7.0);
        assert_eq!(singular_values(&[[2.0, 0.0], [0.0, 3.0]]), [3.0, 2.0]);
    }
}
