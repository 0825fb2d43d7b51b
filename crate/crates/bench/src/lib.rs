//! Benchmark-only crate; see `benches/detectors.rs`.
