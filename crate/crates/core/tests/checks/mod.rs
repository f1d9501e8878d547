//! Scenario checks shared by the integration tests and the acceptance
//! report. Each check returns a diagnostic instead of panicking.
#![allow(dead_code)]

pub mod auth;
pub mod build;
pub mod codec;
pub mod common;
pub mod cost;
pub mod dynamic;
pub mod equivalence;
pub mod fig1;
pub mod matrix;
pub mod multi;

pub type Check = Result<(), String>;

/// `Err` with both sides when they differ.
pub fn same<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Check {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

pub fn holds(what: &str, cond: bool) -> Check {
    if cond {
        Ok(())
    } else {
        Err(what.to_string())
    }
}
