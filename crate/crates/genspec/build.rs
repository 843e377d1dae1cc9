use std::env;
use std::path::Path;

/// The system BLAS backend exposes CBLAS symbols from libopenblas, but some
/// distributions do not ship a `libcblas.so` alias. Provide one in OUT_DIR so
/// the `-lcblas` requested by the LAPACK source crate resolves.
fn main() {
    let out_dir = env::var("OUT_DIR").unwrap();
    let alias = Path::new(&out_dir).join("libcblas.so");
    let candidates = [
        "/usr/lib/x86_64-linux-gnu/libcblas.so",
        "/usr/lib/libcblas.so",
    ];
    if candidates.iter().any(|c| Path::new(c).exists()) {
        return; // real cblas present, nothing to do
    }
    let openblas = [
        "/usr/lib/x86_64-linux-gnu/libopenblas.so",
        "/usr/lib/libopenblas.so",
        "/usr/lib/x86_64-linux-gnu/libopenblas.so.0",
    ]
    .into_iter()
    .find(|c| Path::new(c).exists());
    if let Some(src) = openblas {
        if !alias.exists() {
            #[cfg(unix)]
            std::os::unix::fs::symlink(src, &alias).ok();
        }
        println!("cargo:rustc-link-search=native={out_dir}");
    }
}
