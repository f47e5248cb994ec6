//! Safe wrappers over `matrixmultiply::dgemm` for contiguous row-major data.

/// `c += a * b` with `a: [m x k]`, `b: [k x n]`, `c: [m x n]`.
pub(crate) fn gemm_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_strided(m, k, n, a, (k as isize, 1), b, (n as isize, 1), c);
}

/// `c += aᵀ * b` with `a: [k x m]`, `b: [k x n]`, `c: [m x n]`.
pub(crate) fn gemm_at_b_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_strided(m, k, n, a, (1, m as isize), b, (n as isize, 1), c);
}

/// `c += a * bᵀ` with `a: [m x k]`, `b: [n x k]`, `c: [m x n]`.
pub(crate) fn gemm_a_bt_acc(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    gemm_strided(m, k, n, a, (k as isize, 1), b, (1, k as isize), c);
}

/// `c += a * b` where `a` is addressed through explicit (row, col) strides.
/// The strides may describe overlapping rows, which is how sliding windows are
/// read without an im2col copy.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_strided(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    c: &mut [f64],
) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        (rows as isize - 1) * rs + (cols as isize - 1) * cs
    };
    assert!(last(m, k, a_strides) < a.len() as isize, "gemm: lhs out of bounds");
    assert!(last(k, n, b_strides) < b.len() as isize, "gemm: rhs out of bounds");
    assert!(c.len() >= m * n, "gemm: output out of bounds");
    // SAFETY: the asserts above bound every element the kernel reads or writes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
