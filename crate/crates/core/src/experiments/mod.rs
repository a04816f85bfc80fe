//! Factorial experiments, Monte Carlo validation, synthetic networks and reports.

pub mod fed;
pub mod mc;
pub mod report;
pub mod synthetic;
