//! Thin FFI over the system LAPACK (provided by OpenBLAS) for the dense
//! factorizations the derivative machinery needs.

use crate::error::ConicError;

extern "C" {
    fn openblas_set_num_threads(n: i32);
    fn dgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );
    fn dgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const f64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
}

/// Parallelism lives at the problem level (one solve per thread), so the
/// BLAS itself must stay single-threaded; its threaded kernels also need
/// more stack than spawned threads have.
fn ensure_single_threaded_blas() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// LU factorization with partial pivoting of a column-major `n x n` buffer,
/// in place. Returns the pivot vector.
pub fn lu_factor(n: usize, a: &mut [f64]) -> Result<Vec<i32>, ConicError> {
    debug_assert_eq!(a.len(), n * n);
    ensure_single_threaded_blas();
    let ni = n as i32;
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe { dgetrf_(&ni, &ni, a.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info) };
    if info < 0 {
        return Err(ConicError::Linalg(format!("dgetrf: bad argument {}", -info)));
    }
    if info > 0 {
        return Err(ConicError::IllConditioned(format!(
            "dgetrf: exactly singular at pivot {info}"
        )));
    }
    Ok(ipiv)
}

/// Solves `op(A) x = rhs` in place using a factorization from [`lu_factor`];
/// `transpose` selects `op(A) = A'`.
pub fn lu_solve(
    n: usize,
    a: &[f64],
    ipiv: &[i32],
    rhs: &mut [f64],
    transpose: bool,
) -> Result<(), ConicError> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(rhs.len(), n);
    let ni = n as i32;
    let one = 1i32;
    let mut info = 0i32;
    let trans: &[u8; 1] = if transpose { b"T" } else { b"N" };
    unsafe {
        dgetrs_(
            trans.as_ptr(),
            &ni,
            &one,
            a.as_ptr(),
            &ni,
            ipiv.as_ptr(),
            rhs.as_mut_ptr(),
            &ni,
            &mut info,
        )
    };
    if info != 0 {
        return Err(ConicError::Linalg(format!("dgetrs: info {info}")));
    }
    Ok(())
}
