//! Benchmarks for the subgpr crate; see `benches/`.
