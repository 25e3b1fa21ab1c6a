//! Report formatting and the benchmark harness behind the `clav` binary.

pub mod bench;
pub mod report;
