//! Benchmark helpers live in the bench targets; this crate has no library API.
