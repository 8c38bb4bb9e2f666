//! Criterion benchmarks for the simulators; see `benches/`.
