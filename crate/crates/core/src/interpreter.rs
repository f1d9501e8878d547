//! The BPMN interpreter.
//!
//! One stateless instance serves every model and case. It reads topology
//! from flow nodes and keeps all case state in data nodes, persisting the
//! current node's state before any nested operation that may touch it and
//! re-reading it afterwards.
//!
//! Emits `ElementFired{case, eInd}` for every element it executes,
//! `CaseCreated{flow, case}` for every new data node and
//! `MessageSent{evtCode, case}` for message throws.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bits::EdgeSet;
use crate::data::{DataRef, FactoryRef, ProcessState};
use crate::flow::{ElementEntry, EvtCode, FlowRef, ROOT_MARKER};
use crate::ledger::{ensure, Exec, Instance, LedgerAddress, Revert};
use crate::typeinfo::{ElementKind, Placement, Trigger, TypeInfo};

/// Dequeues allowed per transaction before the interpreter gives up.
pub const DEQUEUE_BUDGET: u32 = 10_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpreter;

// ---- token-game helpers ---------------------------------------------------

/// Start events fire only on a node with no state at all.
pub fn is_start(pre: &EdgeSet, ti: TypeInfo) -> bool {
    ti.is_flow_catch() && pre.is_empty()
}

/// Enablement by the tokens alone. Inclusive joins additionally need
/// [`inclusive_join_ready`].
pub fn is_enabled(pre: &EdgeSet, ti: TypeInfo, st: &ProcessState) -> bool {
    if is_start(pre, ti) {
        return st.is_completed();
    }
    if ti.is_parallel_join() {
        return !pre.is_empty() && pre.is_subset(&st.tokens);
    }
    pre.intersects(&st.tokens)
}

/// Tokens an enabled element takes: all of `preC` for a parallel join,
/// every present one for an inclusive join, otherwise the lowest one.
pub fn consumed(pre: &EdgeSet, ti: TypeInfo, st: &ProcessState) -> EdgeSet {
    let present = pre.intersection(&st.tokens);
    if ti.is_parallel_join() {
        *pre
    } else if ti.is_inclusive_join() {
        present
    } else {
        present
            .lowest()
            .map(EdgeSet::single)
            .unwrap_or(EdgeSet::EMPTY)
    }
}

/// An inclusive join waits while a token elsewhere (or the output of a
/// running sub-process) can still reach one of its empty incoming edges.
pub fn inclusive_join_ready(
    elements: &BTreeMap<u32, ElementEntry>,
    join: u32,
    st: &ProcessState,
) -> bool {
    let Some(j) = elements.get(&join) else {
        return false;
    };
    if !j.pre_c.intersects(&st.tokens) {
        return false;
    }
    let missing = j.pre_c.difference(&st.tokens);
    if missing.is_empty() {
        return true;
    }
    let mut frontier = st.tokens.difference(&j.pre_c);
    for r in st.running.iter() {
        if let Some(e) = elements.get(&r) {
            frontier = frontier.union(&e.post_c);
        }
    }
    let mut seen = frontier;
    let mut queue: Vec<u32> = frontier.to_vec();
    while let Some(edge) = queue.pop() {
        if missing.contains(edge) {
            return false;
        }
        for e in elements.values() {
            if e.e_ind == join || !e.pre_c.contains(edge) {
                continue;
            }
            for next in e.post_c.iter() {
                if !seen.contains(next) {
                    seen.insert(next);
                    queue.push(next);
                }
            }
        }
    }
    true
}

fn default_end() -> TypeInfo {
    TypeInfo::encode(ElementKind::Event {
        trigger: Trigger::None,
        throwing: true,
        placement: Placement::Flow,
        interrupting: false,
    })
}

// ---- entry points ---------------------------------------------------------

fn require_interpreter(exec: &Exec<'_>) -> Result<(), Revert> {
    match exec.instance(&exec.this())? {
        Instance::Interpreter(_) => Ok(()),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

/// Only the case's own data node or the interpreter itself may drive a case.
fn require_case_sender(exec: &Exec<'_>, case: LedgerAddress) -> Result<(), Revert> {
    require_interpreter(exec)?;
    let s = exec.sender();
    ensure(s == case || s == exec.this(), "REJECTED")
}

/// Creates a root case of `flow` and runs it up to its first external
/// elements. The only operation open to external accounts.
pub fn start_case(exec: &mut Exec<'_>, flow: LedgerAddress) -> Result<LedgerAddress, Revert> {
    require_interpreter(exec)?;
    let f = FlowRef(flow);
    let factory = f.factory(exec, ROOT_MARKER)?;
    ensure(!factory.is_zero(), "REJECTED")?;
    let case = FactoryRef(factory).new_instance(exec)?;
    ensure(DataRef(case).flow(exec)? == flow, "FLOW_MISMATCH")?;
    exec.emit(
        "CaseCreated",
        vec![
            ("flow".into(), flow.to_string()),
            ("case".into(), case.to_string()),
        ],
    );
    let init = f.init_element(exec)?;
    ensure(init != 0, "NO_START")?;
    run_elements(exec, case, init)?;
    Ok(case)
}

pub fn execute_elements(
    exec: &mut Exec<'_>,
    case: LedgerAddress,
    e_ind: u32,
) -> Result<(), Revert> {
    require_case_sender(exec, case)?;
    run_elements(exec, case, e_ind)
}

pub fn create_instance(exec: &mut Exec<'_>, case: LedgerAddress, e_ind: u32) -> Result<(), Revert> {
    require_case_sender(exec, case)?;
    let flow = FlowRef(DataRef(case).flow(exec)?);
    create(exec, case, e_ind, flow)
}

pub fn throw_event(
    exec: &mut Exec<'_>,
    case: LedgerAddress,
    code: EvtCode,
    ti: TypeInfo,
) -> Result<(), Revert> {
    require_case_sender(exec, case)?;
    throw(exec, case, code, ti)
}

pub fn try_catch_event(
    exec: &mut Exec<'_>,
    case: LedgerAddress,
    code: EvtCode,
    ti: TypeInfo,
) -> Result<(), Revert> {
    require_case_sender(exec, case)?;
    try_catch(exec, case, code, ti)
}

pub fn kill_sub_process(exec: &mut Exec<'_>, case: LedgerAddress) -> Result<(), Revert> {
    require_case_sender(exec, case)?;
    kill(exec, case)
}

pub fn broadcast_signal(exec: &mut Exec<'_>, case: LedgerAddress) -> Result<(), Revert> {
    require_case_sender(exec, case)?;
    broadcast(exec, case)
}

// ---- internals (run in the interpreter's own frame) -----------------------

fn state(exec: &mut Exec<'_>, d: LedgerAddress) -> Result<ProcessState, Revert> {
    DataRef(d).state(exec)
}

fn persist(exec: &mut Exec<'_>, d: LedgerAddress, st: ProcessState) -> Result<(), Revert> {
    DataRef(d).update_state(exec, st)
}

fn run_elements(exec: &mut Exec<'_>, d: LedgerAddress, start: u32) -> Result<(), Revert> {
    let flow = FlowRef(DataRef(d).flow(exec)?);
    let mut st = state(exec, d)?;
    let mut queue = VecDeque::from([start]);
    while let Some(e) = queue.pop_front() {
        exec.dequeues += 1;
        ensure(exec.dequeues <= DEQUEUE_BUDGET, "BUDGET")?;
        let (pre, post, ti) = flow.find(exec, e)?;
        if ti == TypeInfo::ZERO || !is_enabled(&pre, ti, &st) {
            continue;
        }
        if ti.is_inclusive_join() {
            let elements = flow.elements(exec)?;
            if !inclusive_join_ready(&elements, e, &st) {
                continue;
            }
        }
        st.remove_tokens(&consumed(&pre, ti, &st));
        exec.emit(
            "ElementFired",
            vec![
                ("case".into(), d.to_string()),
                ("eInd".into(), e.to_string()),
            ],
        );

        if ti.is_subprocess_like() {
            let count = flow.count_inst(exec, e)?.max(1);
            let total = if ti.is_multi_instance() { count } else { 1 };
            let spawn = if ti.is_parallel_multi_instance() {
                count
            } else {
                1
            };
            st.add_sub_process(e);
            persist(exec, d, st)?;
            DataRef(d).set_inst_count(exec, e, total)?;
            for _ in 0..spawn {
                create(exec, d, e, flow)?;
            }
            st = state(exec, d)?;
            continue;
        }

        if ti.is_throwing() {
            st.add_tokens(&post);
            persist(exec, d, st)?;
            let code = flow.evt_code(exec, e)?;
            throw(exec, d, code, ti)?;
            st = state(exec, d)?;
            if st.is_completed() {
                return Ok(());
            }
            if post.is_empty() {
                continue;
            }
        } else if ti.is_script_task() || ti.is_exclusive_split() || ti.is_inclusive_split() {
            let out = DataRef(d).exec_script(exec, e)?;
            st.add_tokens(&out);
        } else {
            st.add_tokens(&post);
        }

        for s in flow.out_elements(exec, e)? {
            if !flow.type_info(exec, s)?.requires_trigger() {
                queue.push_back(s);
            }
        }
    }
    persist(exec, d, st)
}

fn create(exec: &mut Exec<'_>, d: LedgerAddress, e: u32, flow: FlowRef) -> Result<(), Revert> {
    let child_flow = flow.child_flow(exec, e)?;
    ensure(!child_flow.is_zero(), "REJECTED")?;
    let mut factory = flow.factory(exec, e)?;
    if factory.is_zero() {
        factory = FlowRef(child_flow).factory(exec, ROOT_MARKER)?;
    }
    ensure(!factory.is_zero(), "REJECTED")?;
    let child = FactoryRef(factory).new_instance(exec)?;
    DataRef(child).set_parent(exec, d, child_flow, e)?;
    DataRef(d).add_child(exec, e, child)?;
    let init = FlowRef(child_flow).init_element(exec)?;
    ensure(init != 0, "NO_START")?;
    run_elements(exec, child, init)
}

fn throw(exec: &mut Exec<'_>, d: LedgerAddress, code: EvtCode, ti: TypeInfo) -> Result<(), Revert> {
    match ti.trigger().unwrap_or(Trigger::None) {
        Trigger::Message => {
            exec.emit(
                "MessageSent",
                vec![
                    ("evtCode".into(), code.to_hex()),
                    ("case".into(), d.to_string()),
                ],
            );
            if state(exec, d)?.is_completed() {
                try_catch(exec, d, code, ti)?;
            }
            Ok(())
        }
        Trigger::None => {
            if state(exec, d)?.is_completed() {
                try_catch(exec, d, code, ti)?;
            }
            Ok(())
        }
        Trigger::Terminate => {
            kill(exec, d)?;
            try_catch(exec, d, code, ti)
        }
        Trigger::Error | Trigger::Escalation | Trigger::Signal => try_catch(exec, d, code, ti),
    }
}

/// Matching catcher of `trigger`/`code` for an event thrown by the child at
/// `sub`: a boundary attached to `sub` or an event-sub-process start.
/// Interrupting catchers win; a catcher without a code catches every code.
fn find_catcher(
    exec: &mut Exec<'_>,
    pflow: FlowRef,
    sub: u32,
    thrower_is_event_sub: bool,
    trigger: Trigger,
    code: EvtCode,
) -> Result<Option<(u32, TypeInfo)>, Revert> {
    let mut found = None;
    for c in pflow.event_list(exec)? {
        let cti = pflow.type_info(exec, c)?;
        if !cti.has_trigger(trigger) {
            continue;
        }
        let placed = if cti.is_boundary() {
            pflow.attached_to(exec, c)? == Some(sub)
        } else {
            cti.is_event_sub_start() && !thrower_is_event_sub
        };
        if !placed {
            continue;
        }
        let cc = pflow.evt_code(exec, c)?;
        if !cc.is_zero() && cc != code {
            continue;
        }
        if cti.is_interrupting() {
            return Ok(Some((c, cti)));
        }
        found.get_or_insert((c, cti));
    }
    Ok(found)
}

fn try_catch(
    exec: &mut Exec<'_>,
    d: LedgerAddress,
    code: EvtCode,
    ti: TypeInfo,
) -> Result<(), Revert> {
    let trigger = ti.trigger().unwrap_or(Trigger::None);
    let Some(parent) = DataRef(d).parent(exec)? else {
        return match trigger {
            Trigger::Error => kill(exec, d),
            Trigger::Signal => broadcast(exec, d),
            _ => Ok(()),
        };
    };
    let sub = DataRef(d).index_in_parent(exec)?.unwrap_or(0);
    let pflow = FlowRef(DataRef(parent).flow(exec)?);
    let sub_ti = pflow.type_info(exec, sub)?;
    let catcher = if matches!(trigger, Trigger::Error | Trigger::Escalation) {
        find_catcher(
            exec,
            pflow,
            sub,
            sub_ti.is_event_subprocess(),
            trigger,
            code,
        )?
    } else {
        None
    };
    if let Some((c, cti)) = catcher {
        if cti.is_interrupting() {
            return interrupt(exec, parent, pflow, c, cti);
        }
    }
    if state(exec, d)?.is_completed() {
        complete_child(exec, parent, pflow, sub, sub_ti)?;
    }
    match trigger {
        Trigger::Signal => {
            let root = DataRef(d).root(exec)?;
            broadcast(exec, root)
        }
        Trigger::Error | Trigger::Escalation => match catcher {
            Some((c, cti)) => catch_non_interrupting(exec, parent, pflow, c, cti),
            None => throw(exec, parent, code, ti),
        },
        _ => Ok(()),
    }
}

/// Bookkeeping when the child case at `sub` has no state left.
fn complete_child(
    exec: &mut Exec<'_>,
    parent: LedgerAddress,
    pflow: FlowRef,
    sub: u32,
    sub_ti: TypeInfo,
) -> Result<(), Revert> {
    let left = DataRef(parent).decrease_inst_count(exec, sub)?;
    if left > 0 {
        if sub_ti.is_sequential_multi_instance() {
            create(exec, parent, sub, pflow)?;
        }
        return Ok(());
    }
    let mut pst = state(exec, parent)?;
    if !pst.running.contains(sub) {
        return Ok(());
    }
    pst.remove_sub_process(sub);
    let post = pflow.post_c(exec, sub)?;
    pst.add_tokens(&post);
    persist(exec, parent, pst)?;
    run_successors(exec, parent, pflow, sub)?;
    if post.is_empty()
        && state(exec, parent)?.is_completed()
        && DataRef(parent).parent(exec)?.is_some()
    {
        try_catch(exec, parent, EvtCode::ZERO, default_end())?;
    }
    Ok(())
}

fn run_successors(
    exec: &mut Exec<'_>,
    d: LedgerAddress,
    flow: FlowRef,
    e: u32,
) -> Result<(), Revert> {
    for s in flow.out_elements(exec, e)? {
        if !flow.type_info(exec, s)?.requires_trigger() {
            run_elements(exec, d, s)?;
        }
    }
    Ok(())
}

fn interrupt(
    exec: &mut Exec<'_>,
    parent: LedgerAddress,
    pflow: FlowRef,
    c: u32,
    cti: TypeInfo,
) -> Result<(), Revert> {
    let target = pflow
        .attached_to(exec, c)?
        .ok_or_else(|| Revert::new("BAD_ATTACH"))?;
    if cti.is_boundary() {
        for child in DataRef(parent).children(exec, target)? {
            if !state(exec, child)?.is_completed() {
                kill(exec, child)?;
            }
        }
        let mut pst = state(exec, parent)?;
        pst.remove_sub_process(target);
        pst.add_tokens(&pflow.post_c(exec, c)?);
        DataRef(parent).set_inst_count(exec, target, 0)?;
        persist(exec, parent, pst)?;
        run_successors(exec, parent, pflow, c)
    } else {
        kill(exec, parent)?;
        let mut pst = ProcessState::EMPTY;
        pst.add_sub_process(target);
        persist(exec, parent, pst)?;
        DataRef(parent).set_inst_count(exec, target, 1)?;
        create(exec, parent, target, pflow)
    }
}

fn catch_non_interrupting(
    exec: &mut Exec<'_>,
    parent: LedgerAddress,
    pflow: FlowRef,
    c: u32,
    cti: TypeInfo,
) -> Result<(), Revert> {
    if cti.is_boundary() {
        let mut pst = state(exec, parent)?;
        pst.add_tokens(&pflow.post_c(exec, c)?);
        persist(exec, parent, pst)?;
        run_successors(exec, parent, pflow, c)
    } else {
        let esp = pflow
            .attached_to(exec, c)?
            .ok_or_else(|| Revert::new("BAD_ATTACH"))?;
        let mut pst = state(exec, parent)?;
        pst.add_sub_process(esp);
        persist(exec, parent, pst)?;
        let n = DataRef(parent).count_inst(exec, esp)?;
        DataRef(parent).set_inst_count(exec, esp, n + 1)?;
        create(exec, parent, esp, pflow)
    }
}

/// Empties the node and every live descendant. Ancestors are untouched.
fn kill(exec: &mut Exec<'_>, d: LedgerAddress) -> Result<(), Revert> {
    if !state(exec, d)?.is_completed() {
        persist(exec, d, ProcessState::EMPTY)?;
    }
    for child in DataRef(d).all_children(exec)? {
        if !state(exec, child)?.is_completed() {
            kill(exec, child)?;
        }
    }
    Ok(())
}

/// Fires every signal catcher in `d` and, depth-first, in the descendants
/// that were live when the signal arrived.
fn broadcast(exec: &mut Exec<'_>, d: LedgerAddress) -> Result<(), Revert> {
    let flow = FlowRef(DataRef(d).flow(exec)?);
    let mut live = Vec::new();
    for child in DataRef(d).all_children(exec)? {
        if !state(exec, child)?.is_completed() {
            live.push(child);
        }
    }
    for c in flow.event_list(exec)? {
        let (pre, _, cti) = flow.find(exec, c)?;
        if !cti.has_trigger(Trigger::Signal) {
            continue;
        }
        let st = state(exec, d)?;
        if cti.is_boundary() {
            let Some(sub) = flow.attached_to(exec, c)? else {
                continue;
            };
            if !st.running.contains(sub) {
                continue;
            }
        } else if cti.is_event_sub_start() {
            if st.is_completed() {
                continue;
            }
        } else {
            if !pre.is_empty() && is_enabled(&pre, cti, &st) {
                run_elements(exec, d, c)?;
            }
            continue;
        }
        if cti.is_interrupting() {
            interrupt(exec, d, flow, c, cti)?;
        } else {
            catch_non_interrupting(exec, d, flow, c, cti)?;
        }
    }
    for child in live {
        if !state(exec, child)?.is_completed() {
            broadcast(exec, child)?;
        }
    }
    Ok(())
}

/// Caller-side handle issuing nested calls into the interpreter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterpreterRef(pub LedgerAddress);

impl InterpreterRef {
    pub fn execute_elements(
        self,
        exec: &mut Exec<'_>,
        case: LedgerAddress,
        e: u32,
    ) -> Result<(), Revert> {
        exec.call(self.0, |x| execute_elements(x, case, e))
    }
}
