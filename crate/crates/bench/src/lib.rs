//! Criterion benchmarks for the training hot path live in `benches/`.
//! This crate intentionally exports nothing.
