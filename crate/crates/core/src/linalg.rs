//! Small dense linear-algebra helpers shared by the predictor and the tuner.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff for rank and pseudoinverse decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Singular values of `a`, sorted in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `RANK_TOL` times the largest one.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > RANK_TOL * smax).count(),
        _ => 0,
    }
}

/// Moore-Penrose pseudoinverse with a relative singular-value cutoff.
pub fn pinv(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = a.shape();
    if a.is_empty() {
        return DMatrix::zeros(c, r);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = RANK_TOL * smax;
    let u = svd.u.as_ref().expect("svd computed with u");
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut out = DMatrix::zeros(c, r);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += (vt.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Solve `l·x = b` for lower-triangular `l` (no pivoting, nonzero diagonal).
pub fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = b.clone();
    for i in 0..n {
        let mut v = x[i];
        for j in 0..i {
            v -= l[(i, j)] * x[j];
        }
        x[i] = v / l[(i, i)];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_outer_product() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        assert_eq!(numerical_rank(&a), 1);
        assert_eq!(numerical_rank(&DMatrix::<f64>::zeros(3, 3)), 0);
    }

    #[test]
    fn pinv_of_full_rank_is_inverse() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = pinv(&a);
        let id = &a * &p;
        assert!((id - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn pinv_gives_min_norm_solution() {
        // Rank-1 system: x1 + x2 = 2. Minimum norm solution is (1, 1).
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let b = DVector::from_vec(vec![2.0, 4.0]);
        let x = pinv(&a) * b;
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
