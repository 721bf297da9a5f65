//! Dense matrix helpers shared across modules.

use nalgebra::DMatrix;

pub type Matrix = DMatrix<f64>;

/// Largest absolute entry; 0 for an empty matrix.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute entrywise difference. Panics on shape mismatch.
pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `Id_n ⊕ a`.
pub fn direct_sum_identity(n: usize, a: &Matrix) -> Matrix {
    let (r, c) = a.shape();
    let mut out = Matrix::zeros(n + r, n + c);
    for i in 0..n {
        out[(i, i)] = 1.0;
    }
    out.view_mut((n, n), (r, c)).copy_from(a);
    out
}

/// `m^k` by repeated multiplication; `k = 0` gives the identity.
pub fn power(m: &Matrix, k: usize) -> Matrix {
    assert!(m.is_square());
    let mut out = Matrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Upper-left `n×n` block of `m`.
pub fn upper_left(m: &Matrix, n: usize) -> Matrix {
    m.view((0, 0), (n, n)).into_owned()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Singular values in descending order (empty for an empty matrix).
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    svd(m).s
}

/// Thin SVD with singular values in descending order. Columns of `u` that
/// belong to zero singular values are zero.
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v_t: Matrix,
}

const MAX_SWEEPS: usize = 80;

/// One-sided Jacobi SVD. nalgebra 0.35's bidiagonal SVD returns wrong
/// factors for some rank-deficient inputs; Jacobi rotations keep the
/// relative accuracy of every singular value.
pub fn svd(a: &Matrix) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose());
        return Svd {
            u: t.v_t.transpose(),
            s: t.s,
            v_t: t.u.transpose(),
        };
    }
    let mut w = a.clone();
    let mut v = Matrix::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|k| w.column(k).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    Svd {
        u: Matrix::from_fn(m, n, |i, k| {
            let s = norms[order[k]];
            if s > 0.0 {
                w[(i, order[k])] / s
            } else {
                0.0
            }
        }),
        s: order.iter().map(|&k| norms[k]).collect(),
        v_t: Matrix::from_fn(n, n, |k, j| v[(j, order[k])]),
    }
}

fn rotate(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (mp, mq) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * mp - s * mq;
        m[(i, q)] = s * mp + c * mq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_of_rank_one_block() {
        // P12·P21 of a 5-vertex path with its hidden vertex at one end
        let g2 = Matrix::from_row_slice(
            4,
            4,
            &[
                0.0041011220093089, 0.023199449466045935, 0.0014882453771414283, 0.0007249827958139277,
                0.024005662272971073, 0.13579653264073532, 0.008711351630571823, 0.004243641645022979,
                0.0015399639528194675, 0.008711351630571823, 0.0005588334676573381, 0.00027222973845536513,
                0.0010700173477054542, 0.006052932180398138, 0.00038829578041549295, 0.00018915413063741449,
            ],
        );
        let f = crate::recovery::full_rank_factorization(&g2, 1e-9);
        assert_eq!(f.rank, 1);
        assert!(max_abs_diff(&(&f.left * &f.right), &g2) <= 1e-15);
        let svd = svd(&g2);
        let s = Matrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone()));
        assert!(max_abs_diff(&(&svd.u * s * &svd.v_t), &g2) <= 1e-15);
    }

    #[test]
    fn svd_of_wide_and_tall_matrices() {
        let a = Matrix::from_fn(3, 5, |i, j| ((i * 5 + j) as f64).sin());
        for m in [a.clone(), a.transpose()] {
            let svd = svd(&m);
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let s = Matrix::from_diagonal(&nalgebra::DVector::from_vec(svd.s.clone()));
            let k = svd.s.len();
            let rec = svd.u.columns(0, k) * s * svd.v_t.rows(0, k);
            assert!(max_abs_diff(&rec, &m) <= 1e-14);
            let vvt = &svd.v_t * svd.v_t.transpose();
            assert!(max_abs_diff(&vvt, &Matrix::identity(k, k)) <= 1e-14);
        }
    }

    #[test]
    fn direct_sum_places_block() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 3.0, 4.0, 5.0]);
        let d = direct_sum_identity(1, &a);
        assert_eq!(d.shape(), (3, 3));
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(2, 1)], 4.0);
        assert_eq!(d[(0, 2)], 0.0);
    }

    #[test]
    fn power_zero_is_identity() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(power(&a, 0), Matrix::identity(2, 2));
        assert_eq!(power(&a, 2), Matrix::identity(2, 2));
    }

    #[test]
    fn singular_values_sorted() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]);
        assert_eq!(singular_values(&a), vec![3.0, 1.0]);
        assert!(singular_values(&Matrix::zeros(0, 3)).is_empty());
    }
}
