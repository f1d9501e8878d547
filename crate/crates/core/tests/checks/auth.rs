//! Engine-internal operations issued directly by outside accounts.

use flowledger_core::bits::EdgeSet;
use flowledger_core::data::ProcessState;
use flowledger_core::flow::EvtCode;
use flowledger_core::ledger::{AccountId, LedgerAddress};
use flowledger_core::ops::Operation;
use flowledger_core::typeinfo::{Placement, Trigger};

use super::build::event;
use super::common::Engine;
use super::fig1::Run;
use super::{same, Check};

/// A case of the example model with its S1 child running.
pub struct Target {
    pub run: Run,
    pub child: LedgerAddress,
    pub factory: LedgerAddress,
}

pub fn target() -> Result<Target, String> {
    let mut run = Run::start()?;
    run.step("T1", Some(false))?;
    let child = run.dep.item(&run.engine, run.case, "S1Task").case;
    let factory = run.dep.reg.factories[0];
    Ok(Target {
        run,
        child,
        factory,
    })
}

/// Names of the guarded operations, in the order of [`guarded`].
pub const NAMES: [&str; 13] = [
    "executeElements",
    "createInstance",
    "throwEvent",
    "tryCatchEvent",
    "killSubProcess",
    "broadcastSignal",
    "execScript",
    "updateProcessState",
    "setParent",
    "addChild",
    "decreaseInstCount",
    "setInstCount",
    "newInstance",
];

/// Operation `k` of [`NAMES`] aimed at `case`, with the given arguments.
pub fn guarded(
    t: &Target,
    k: usize,
    case: LedgerAddress,
    e_ind: u32,
    n: u32,
    trigger: Trigger,
) -> (LedgerAddress, Operation) {
    let interp = t.run.engine.interp;
    let code = EvtCode::of("S1Error");
    let type_info = event(trigger, true, Placement::Flow, false);
    let state = ProcessState {
        tokens: EdgeSet::of([e_ind]),
        running: EdgeSet::EMPTY,
    };
    match k {
        0 => (interp, Operation::ExecuteElements { case, e_ind }),
        1 => (interp, Operation::CreateInstance { case, e_ind }),
        2 => (
            interp,
            Operation::ThrowEvent {
                case,
                evt_code: code,
                type_info,
            },
        ),
        3 => (
            interp,
            Operation::TryCatchEvent {
                case,
                evt_code: code,
                type_info,
            },
        ),
        4 => (interp, Operation::KillSubProcess { case }),
        5 => (interp, Operation::BroadcastSignal { case }),
        6 => (case, Operation::ExecScript { e_ind }),
        7 => (case, Operation::UpdateProcessState { state }),
        8 => (
            case,
            Operation::SetParent {
                parent: t.run.case,
                flow: t.run.dep.root_flow(),
                index: e_ind,
            },
        ),
        9 => (
            case,
            Operation::AddChild {
                e_ind,
                child: t.child,
            },
        ),
        10 => (case, Operation::DecreaseInstCount { e_ind }),
        11 => (case, Operation::SetInstCount { e_ind, count: n }),
        12 => (t.factory, Operation::NewInstance),
        _ => unreachable!(),
    }
}

/// The call reverts with REJECTED and leaves every instance as it was.
pub fn rejected(e: &Engine, from: &AccountId, to: LedgerAddress, op: Operation) -> Check {
    let before = e.ledger.world_clone();
    let name = op.name();
    let r = e.ledger.call(from, to, op).into_result();
    same(
        &format!("{name} from {from}"),
        r.err().map(|x| x.reason),
        Some("REJECTED".to_string()),
    )?;
    same(
        &format!("{name}: world after"),
        e.ledger.world_clone() == before,
        true,
    )
}

/// Every guarded operation against the root and the child case, from the
/// model's admin, a task performer and an unrelated account.
pub fn sweep() -> Result<usize, String> {
    let t = target()?;
    let senders = [
        t.run.engine.admin.clone(),
        t.run.worker.clone(),
        AccountId::new("stranger"),
    ];
    let mut calls = 0;
    for k in 0..NAMES.len() {
        for case in [t.run.case, t.child] {
            for from in &senders {
                let (to, op) = guarded(&t, k, case, 2, 1, Trigger::Error);
                rejected(&t.run.engine, from, to, op)?;
                calls += 1;
            }
        }
    }
    Ok(calls)
}
