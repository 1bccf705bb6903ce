//! Criterion benchmarks for wdnorm live in `benches/`.
