//! Interpreted BPMN execution on a deterministic in-process ledger.
//!
//! A single [`interpreter`] instance executes cases of any registered
//! model. Models live on the ledger as trees of [`flow`] nodes holding
//! bitmap-encoded control flow; each case is a tree of [`data`] nodes
//! holding variables and token state. [`bpmn`] turns BPMN 2.0 XML into the
//! registration calls that build the flow nodes.

pub mod access;
pub mod bits;
pub mod bpmn;
pub mod data;
pub mod flow;
pub mod inspect;
pub mod interpreter;
pub mod ledger;
pub mod ops;
pub mod script;
pub mod typeinfo;
