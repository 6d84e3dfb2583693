//! Criterion benchmarks for fmix-core live under `benches/`.
