//! Criterion benchmarks for the simulation engine live under `benches/`.
