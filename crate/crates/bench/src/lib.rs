//! Criterion benchmarks for `pulseaug-core`; run with `cargo bench -p pulseaug-bench`.
