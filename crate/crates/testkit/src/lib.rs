//! Generators and brute-force oracles shared by the test suites.

pub mod chart;
pub mod graphs;
pub mod oracle;
pub mod rng;
