fn main() {
    // GENSPEC_THREADS caps internal parallelism; unset = rayon default.
    if let Ok(v) = std::env::var("GENSPEC_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
    std::process::exit(genspec::cli::run());
}
