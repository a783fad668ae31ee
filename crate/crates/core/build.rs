// Clarabel's sdp feature calls BLAS/LAPACK symbols but leaves linking to the
// final crate. The system OpenBLAS carries both.
fn main() {
    println!("cargo:rerun-if-env-changed=TUBEID_BLAS_LIB");
    if std::env::var_os("CARGO_FEATURE_CLARABEL").is_some() {
        let lib = std::env::var("TUBEID_BLAS_LIB").unwrap_or_else(|_| "openblas".into());
        println!("cargo:rustc-link-lib={lib}");
    }
}
