//! Multi-instance sub-processes with three instances.
//!
//! Root: start -1-> MI (2) -2-> R (3) -3-> end (4)
//! Body: start -1-> Q (2) -2-> end (3)

use flowledger_core::ledger::LedgerAddress;
use flowledger_core::typeinfo::MultiInstance;

use super::build::*;
use super::common::Engine;
use super::{holds, same, Check};

const COUNT: u32 = 3;

struct Shape {
    engine: Engine,
    root_flow: LedgerAddress,
    case: LedgerAddress,
}

fn build(multi: MultiInstance) -> Shape {
    let engine = Engine::new();
    let body = FlowBuilder::default()
        .el(1, &[], &[1], start())
        .el(2, &[1], &[2], user())
        .el(3, &[2], &[], end())
        .deploy(&engine);
    let root_flow = FlowBuilder::default()
        .el(1, &[], &[1], start())
        .el(2, &[1], &[2], sub(Some(multi)))
        .el(3, &[2], &[3], user())
        .el(4, &[3], &[], end())
        .deploy(&engine);
    link(&engine, root_flow, 2, body, &[], COUNT);
    let case = engine.start(root_flow);
    Shape {
        engine,
        root_flow,
        case,
    }
}

impl Shape {
    /// (children created so far, children still live)
    fn children(&self) -> (usize, Vec<LedgerAddress>) {
        let v = self.engine.view(self.case);
        let kids = v.children.get(&2).cloned().unwrap_or_default();
        let live = kids
            .iter()
            .filter(|k| !k.completed)
            .map(|k| k.address)
            .collect();
        (kids.len(), live)
    }

    fn parent_token(&self) -> bool {
        self.engine.view(self.case).tokens.contains(&2)
    }

    fn finish(&self, child: LedgerAddress) -> Check {
        let actor = &self.engine.admin;
        self.engine
            .check_in(actor, child, 2, &[])
            .map_err(|e| e.reason)
    }

    fn complete_rest(&self) -> Check {
        let r_enabled = self
            .engine
            .view(self.case)
            .enabled
            .iter()
            .any(|w| w.e_ind == 3 && w.case == self.case);
        holds("R enabled after the last instance", r_enabled)?;
        self.engine
            .check_in(&self.engine.admin, self.case, 3, &[])
            .map_err(|e| e.reason)?;
        let v = self.engine.view(self.case);
        holds("case completed", v.completed)?;
        same("flow", v.flow, self.root_flow)
    }
}

/// All instances exist at once; the outgoing token waits for the last.
pub fn parallel() -> Check {
    let s = build(MultiInstance::Parallel);
    let (created, live) = s.children();
    same("created at activation", created, COUNT as usize)?;
    same("live at activation", live.len(), COUNT as usize)?;
    holds("no outgoing token yet", !s.parent_token())?;
    for (i, child) in live.iter().enumerate() {
        same("running", s.engine.view(s.case).running, vec![2])?;
        holds(
            &format!("no outgoing token before instance {}", i + 1),
            !s.parent_token(),
        )?;
        s.finish(*child)?;
        let (created, still) = s.children();
        same("created", created, COUNT as usize)?;
        same("live", still.len(), COUNT as usize - i - 1)?;
    }
    holds("outgoing token after all instances", s.parent_token())?;
    same("running", s.engine.view(s.case).running, vec![])?;
    s.complete_rest()
}

/// One instance at a time; the next is created when the previous ends.
pub fn sequential() -> Check {
    let s = build(MultiInstance::Sequential);
    for i in 1..=COUNT as usize {
        let (created, live) = s.children();
        same(&format!("created before instance {i} ends"), created, i)?;
        same("live", live.len(), 1)?;
        holds("no outgoing token yet", !s.parent_token())?;
        s.finish(live[0])?;
    }
    let (created, live) = s.children();
    same("created in total", created, COUNT as usize)?;
    same("live at the end", live.len(), 0)?;
    holds("outgoing token after the last instance", s.parent_token())?;
    s.complete_rest()
}
