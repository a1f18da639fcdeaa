//! Criterion benchmarks for labelsift live in `benches/`.
