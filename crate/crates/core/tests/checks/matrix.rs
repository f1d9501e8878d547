//! Every thrown trigger against every catcher placement.
//!
//! Root: start -1-> AND -2-> S (3) -4-> end
//!                      -3-> P (4) -5-> end
//! plus, by placement, a boundary 7 on S -6-> H (8) -7-> end (9), or an
//! event sub-process 7 (start -> HT -> end) started by catcher 8.
//! S: start -1-> AND -2-> throwing end (3)
//!                   -3-> Q (4) -4-> end (5)

use std::collections::BTreeMap;

use flowledger_core::inspect::case_view;
use flowledger_core::ledger::LedgerAddress;
use flowledger_core::typeinfo::{Placement, Trigger};

use super::build::*;
use super::common::Engine;
use super::{holds, same, Check};

const CODE: &str = "Evt";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Catcher {
    BoundaryInterrupting,
    BoundaryNonInterrupting,
    EventSubInterrupting,
    EventSubNonInterrupting,
    Uncaught,
}

impl Catcher {
    pub const ALL: [Catcher; 5] = [
        Catcher::BoundaryInterrupting,
        Catcher::BoundaryNonInterrupting,
        Catcher::EventSubInterrupting,
        Catcher::EventSubNonInterrupting,
        Catcher::Uncaught,
    ];
}

pub const TRIGGERS: [Trigger; 6] = [
    Trigger::Error,
    Trigger::Escalation,
    Trigger::Signal,
    Trigger::Terminate,
    Trigger::Message,
    Trigger::None,
];

/// Root state after the throw.
#[derive(Debug, PartialEq)]
pub struct Post {
    pub tokens: Vec<u32>,
    pub running: Vec<u32>,
    pub enabled: Vec<&'static str>,
    pub message_sent: bool,
}

fn post(tokens: &[u32], running: &[u32], enabled: &[&'static str]) -> Post {
    Post {
        tokens: tokens.to_vec(),
        running: running.to_vec(),
        enabled: enabled.to_vec(),
        message_sent: false,
    }
}

/// Hand-derived outcome of each cell.
pub fn expected(t: Trigger, c: Catcher) -> Post {
    use Catcher::*;
    let untouched = post(&[3], &[3], &["P", "Q"]);
    let fired = |c: Catcher| match c {
        BoundaryInterrupting => post(&[3, 6], &[], &["H", "P"]),
        BoundaryNonInterrupting => post(&[3, 6], &[3], &["H", "P", "Q"]),
        EventSubInterrupting => post(&[], &[7], &["HT"]),
        EventSubNonInterrupting => post(&[3], &[3, 7], &["HT", "P", "Q"]),
        Uncaught => unreachable!(),
    };
    match (t, c) {
        (Trigger::Error, Uncaught) => post(&[], &[], &[]),
        (Trigger::Escalation | Trigger::Signal, Uncaught) => untouched,
        (Trigger::Error | Trigger::Escalation | Trigger::Signal, c) => fired(c),
        // the thrower's node dies, so S completes normally
        (Trigger::Terminate, _) => post(&[3], &[], &["P"]),
        (Trigger::Message, _) => Post {
            message_sent: true,
            ..untouched
        },
        _ => untouched,
    }
}

struct Cell {
    case: LedgerAddress,
    names: BTreeMap<(LedgerAddress, u32), &'static str>,
}

fn build(engine: &Engine, t: Trigger, c: Catcher) -> Cell {
    let child = FlowBuilder::default()
        .el(1, &[], &[1], start())
        .el(2, &[1], &[2, 3], and_split())
        .coded(3, &[2], &[], throw_end(t), Some(CODE))
        .el(4, &[3], &[4], user())
        .el(5, &[4], &[], end())
        .deploy(engine);
    let mut root = FlowBuilder::default()
        .el(1, &[], &[1], start())
        .el(2, &[1], &[2, 3], and_split())
        .el(3, &[2], &[4], sub(None))
        .el(4, &[3], &[5], user())
        .el(5, &[4], &[], end())
        .el(6, &[5], &[], end());
    let interrupting = matches!(
        c,
        Catcher::BoundaryInterrupting | Catcher::EventSubInterrupting
    );
    let mut names = BTreeMap::new();
    let mut handler = None;
    match c {
        Catcher::BoundaryInterrupting | Catcher::BoundaryNonInterrupting => {
            root = root
                .coded(
                    7,
                    &[],
                    &[6],
                    event(t, false, Placement::Boundary, interrupting),
                    Some(CODE),
                )
                .el(8, &[6], &[7], user())
                .el(9, &[7], &[], end());
        }
        Catcher::EventSubInterrupting | Catcher::EventSubNonInterrupting => {
            root = root.el(7, &[], &[], event_sub()).coded(
                8,
                &[],
                &[],
                event(t, false, Placement::EventSubStart, interrupting),
                Some(CODE),
            );
            let esp = FlowBuilder::default()
                .el(1, &[], &[1], start())
                .el(2, &[1], &[2], user())
                .el(3, &[2], &[], end())
                .deploy(engine);
            names.insert((esp, 2), "HT");
            handler = Some(esp);
        }
        Catcher::Uncaught => {}
    }
    let root = root.deploy(engine);
    match (c, handler) {
        (_, Some(esp)) => {
            link(engine, root, 3, child, &[], 1);
            link(engine, root, 7, esp, &[8], 1);
        }
        (Catcher::Uncaught, _) => link(engine, root, 3, child, &[], 1),
        _ => {
            link(engine, root, 3, child, &[7], 1);
            names.insert((root, 8), "H");
        }
    }
    names.insert((root, 4), "P");
    names.insert((child, 4), "Q");
    let case = engine.start(root);
    Cell { case, names }
}

pub fn cell_name(t: Trigger, c: Catcher) -> String {
    format!("{t:?} / {c:?}")
}

pub fn check_cell(engine: &Engine, t: Trigger, c: Catcher) -> Check {
    let since = engine.ledger.tx_count();
    let cell = build(engine, t, c);
    let want = expected(t, c);
    let v = case_view(&engine.ledger, &cell.case).ok_or("case missing")?;
    let mut enabled: Vec<&str> = v
        .worklist()
        .iter()
        .map(|w| {
            let flow = case_view(&engine.ledger, &w.case).unwrap().flow;
            cell.names.get(&(flow, w.e_ind)).copied().unwrap_or("?")
        })
        .collect();
    enabled.sort();
    let sent = engine
        .ledger
        .read_log(since)
        .iter()
        .any(|e| e.name == "MessageSent");
    same("root tokens", &v.tokens, &want.tokens)?;
    same("root running", &v.running, &want.running)?;
    same("enabled", enabled, want.enabled)?;
    same("message sent", sent, want.message_sent)?;
    holds(
        "root completed iff empty",
        v.completed == (v.tokens.is_empty() && v.running.is_empty()),
    )
}

/// All 30 cells on one ledger, in trigger-major order.
pub fn run_all() -> Vec<(String, Check)> {
    let engine = Engine::new();
    let mut out = Vec::new();
    for t in TRIGGERS {
        for c in Catcher::ALL {
            out.push((cell_name(t, c), check_cell(&engine, t, c)));
        }
    }
    out
}
