//! Criterion benchmarks for the processing chain live in `benches/`.
