//! Benchmarks only; see `benches/eqsub.rs`.
