//! Reference token game for cross-checking the engine.
//!
//! Written against its own model types so it shares no code with the
//! engine: instances are plain trees holding sets of marked flow ids, and
//! every step re-scans the whole tree for something that can fire.

pub mod fig1;
pub mod gen;
pub mod model;
pub mod sim;
pub mod xml;

pub use model::{Flow, Guard, Kind, Model, Node, Process};
pub use sim::{Sim, TaskRef};
