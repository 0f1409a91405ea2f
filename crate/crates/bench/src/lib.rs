//! Criterion benchmarks for the carnot-lift kernels live in `benches/`.
