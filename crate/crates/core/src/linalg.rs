//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

/// Inverse of a 3×3 matrix, `None` when it is numerically singular.
pub fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mat = nalgebra::Matrix3::from_fn(|r, c| m[r][c]);
    let scale = mat.abs().max();
    if scale == 0.0 || mat.determinant().abs() <= 1e-14 * scale * scale * scale {
        return None;
    }
    let inv = mat.try_inverse()?;
    Some(std::array::from_fn(|r| std::array::from_fn(|c| inv[(r, c)])))
}

/// Cholesky factor of a symmetric positive semi-definite matrix, adding
/// `1e-10 · max(1, max diag)` to the diagonal when the plain factorisation
/// fails.
pub fn cholesky_jittered(a: &DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch);
    }
    let diag_max = a.diagonal().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let jitter = 1e-10 * diag_max;
    let mut b = a.clone();
    for i in 0..b.nrows() {
        b[(i, i)] += jitter;
    }
    b.cholesky()
}

/// Solution of the normal equations `(XᵀWX) β = XᵀWy` accumulated by the
/// caller, returning `(β, (XᵀWX)⁻¹)`.
pub fn solve_normal(xtx: &DMatrix<f64>, xty: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let ch = cholesky_jittered(xtx)?;
    let beta = ch.solve(xty);
    if beta.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((beta, ch.inverse()))
}

/// Weighted least squares of `y` on the columns of `x` with weights `w`.
pub fn weighted_least_squares(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Option<DVector<f64>> {
    let p = x.len();
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    for t in 0..y.len() {
        for a in 0..p {
            xty[a] += w[t] * x[a][t] * y[t];
            for b in 0..p {
                xtx[(a, b)] += w[t] * x[a][t] * x[b][t];
            }
        }
    }
    solve_normal(&xtx, &xty).map(|(b, _)| b)
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
    }
}

/// Numerically stable `log Σ exp(v)`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
