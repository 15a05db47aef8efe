//! Shared test support: randomized fixtures, brute-force oracles and a tamper
//! harness for the on-disk log.

pub mod criteria;
pub mod fixture;
pub mod oracle;
pub mod sha256;
pub mod tamper;
