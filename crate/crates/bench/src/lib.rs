//! Criterion benchmarks for the gsff engines; see `benches/`.
