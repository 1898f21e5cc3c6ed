//! Criterion benchmarks for the solver, rounding and the exact oracle; see `benches/`.
