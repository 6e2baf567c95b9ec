//! Scenario driver and file commands for `steerlab`.
//!
//! Every report states its verdicts as finite-family facts together with
//! the tolerances they were checked at.

pub mod commands;
pub mod report;
pub mod scenarios;
