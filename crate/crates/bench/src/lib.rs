//! Criterion benchmarks for the qdlog evaluators; see `benches/`.
