//! Benchmark-only crate; see `benches/harness.rs`.
