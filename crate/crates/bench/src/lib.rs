//! Criterion benchmarks for the rdbench core algorithms; see `benches/`.
