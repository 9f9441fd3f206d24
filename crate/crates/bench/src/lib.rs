//! Criterion benchmarks for the expansion pipeline. See `benches/`.
