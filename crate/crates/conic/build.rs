fn main() {
    // Dense LU factorizations go through the system LAPACK shipped with
    // OpenBLAS. Set CONIC_BLAS_LIB to override the library name.
    let lib = std::env::var("CONIC_BLAS_LIB").unwrap_or_else(|_| "openblas".to_string());
    println!("cargo:rustc-link-lib=dylib={lib}");
    println!("cargo:rerun-if-env-changed=CONIC_BLAS_LIB");
}
