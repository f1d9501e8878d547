//! HTTP gateway over the simulated ledger, plus trace replay and cost
//! reporting.

pub mod api;
pub mod error;
pub mod replay;
pub mod report;
pub mod state;
pub mod trace;
