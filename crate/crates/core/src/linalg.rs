// Dense row-major Cholesky helpers for the GP.

use alloc::vec::Vec;

/// In-place lower Cholesky factor of a symmetric `n × n` matrix.
/// Returns `false` when the matrix is not numerically positive definite.
pub(crate) fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = libm::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

/// Solves `L x = b` in place.
pub(crate) fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
pub(crate) fn solve_lower_t(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// `(L Lᵀ)⁻¹ b`.
pub(crate) fn cho_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    solve_lower(l, n, &mut x);
    solve_lower_t(l, n, &mut x);
    x
}

/// `(L Lᵀ)⁻¹` as a dense symmetric matrix.
pub(crate) fn cho_inverse(l: &[f64], n: usize) -> Vec<f64> {
    // L⁻¹ column by column, then L⁻ᵀ L⁻¹.
    let mut linv = alloc::vec![0.0; n * n];
    let mut e = alloc::vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        solve_lower(l, n, &mut e);
        for i in 0..n {
            linv[i * n + j] = e[i];
        }
    }
    let mut out = alloc::vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            // sum_k Linv[k][i] * Linv[k][j], k >= max(i, j) = i
            let mut s = 0.0;
            for k in i..n {
                s += linv[k * n + i] * linv[k * n + j];
            }
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}
