//! Per-case data nodes and the factories that create them.
//!
//! A [`Factory`] is bound to one flow node and carries the
//! [`DataTemplate`] (variable declarations, scripts, guards, check-in and
//! check-out tables) of that sub-process. Every [`DataNode`] it creates
//! holds the state of one (sub-)process case: variables, tokens, running
//! sub-processes, and the links to its parent and children.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::access::AccessRef;
use crate::bits::{EdgeSet, ElementSet};
use crate::flow::FlowRef;
use crate::interpreter::{self, InterpreterRef};
use crate::ledger::{ensure, Exec, Instance, InstanceKind, LedgerAddress, Revert};
use crate::script::{self, Env, Expr, Param, Program, Scope, ScriptError, Type, Value};

/// Tokens on edges plus element indexes with live child cases.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProcessState {
    pub tokens: EdgeSet,
    pub running: ElementSet,
}

impl ProcessState {
    pub const EMPTY: ProcessState = ProcessState {
        tokens: EdgeSet::EMPTY,
        running: ElementSet::EMPTY,
    };

    pub fn is_completed(&self) -> bool {
        self.tokens.is_empty() && self.running.is_empty()
    }

    pub fn add_tokens(&mut self, edges: &EdgeSet) {
        self.tokens = self.tokens.union(edges);
    }

    pub fn remove_tokens(&mut self, edges: &EdgeSet) {
        self.tokens = self.tokens.difference(edges);
    }

    pub fn add_sub_process(&mut self, e: u32) {
        self.running.insert(e);
    }

    pub fn remove_sub_process(&mut self, e: u32) {
        self.running.remove(e);
    }
}

/// Guards of one split gateway, keyed by outgoing edge index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayScript {
    pub inclusive: bool,
    pub guards: Vec<(u32, Expr)>,
    pub default: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckIn {
    pub params: Vec<Param>,
    pub body: Program,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataTemplate {
    pub vars: Vec<Param>,
    pub scripts: BTreeMap<u32, Program>,
    pub gateways: BTreeMap<u32, GatewayScript>,
    pub check_ins: BTreeMap<u32, CheckIn>,
    pub check_outs: BTreeMap<u32, Vec<Param>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("element {e_ind}: {error}")]
pub struct TemplateError {
    pub e_ind: u32,
    pub error: ScriptError,
}

impl DataTemplate {
    pub fn scope(&self) -> Scope {
        self.vars.iter().map(|p| (p.name.clone(), p.ty)).collect()
    }

    pub fn initial_vars(&self) -> BTreeMap<String, Value> {
        self.vars
            .iter()
            .map(|p| (p.name.clone(), p.ty.default_value()))
            .collect()
    }

    /// Type-checks every program against the declared variables.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let at = |e_ind| move |error| TemplateError { e_ind, error };
        let vars = self.scope();
        if vars.len() != self.vars.len() {
            let dup = self
                .vars
                .iter()
                .enumerate()
                .find(|(i, p)| self.vars[..*i].iter().any(|q| q.name == p.name))
                .map(|(_, p)| p.name.clone())
                .unwrap_or_default();
            return Err(TemplateError {
                e_ind: 0,
                error: ScriptError::Type(format!("variable `{dup}` declared twice")),
            });
        }
        for (e, prog) in &self.scripts {
            script::check_program(prog, &vars, &vars).map_err(at(*e))?;
        }
        for (e, gw) in &self.gateways {
            for (_, guard) in &gw.guards {
                let t = script::check_expr(guard, &vars).map_err(at(*e))?;
                if t != Type::Bool {
                    return Err(at(*e)(ScriptError::Type(format!("guard has type {t}"))));
                }
            }
        }
        for (e, ci) in &self.check_ins {
            let mut readable = vars.clone();
            readable.extend(ci.params.iter().map(|p| (p.name.clone(), p.ty)));
            script::check_program(&ci.body, &vars, &readable).map_err(at(*e))?;
        }
        for (e, outs) in &self.check_outs {
            for p in outs {
                match vars.get(&p.name) {
                    None => return Err(at(*e)(ScriptError::Undeclared(p.name.clone()))),
                    Some(t) if *t != p.ty => {
                        return Err(at(*e)(ScriptError::Type(format!(
                            "export `{}` declared {} but variable is {t}",
                            p.name, p.ty
                        ))))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Converts a JSON object to a check-in payload for `e_ind`, typed by
    /// the element's import signature.
    pub fn payload_from_json(
        &self,
        e_ind: u32,
        json: &serde_json::Value,
    ) -> Option<BTreeMap<String, Value>> {
        let params = &self.check_ins.get(&e_ind)?.params;
        let obj = match json {
            serde_json::Value::Null => return params.is_empty().then(BTreeMap::new),
            serde_json::Value::Object(o) => o,
            _ => return None,
        };
        if obj.len() != params.len() {
            return None;
        }
        params
            .iter()
            .map(|p| Some((p.name.clone(), Value::from_json(p.ty, obj.get(&p.name)?)?)))
            .collect()
    }
}

/// Constructor arguments of a factory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactoryInit {
    pub flow: LedgerAddress,
    pub interpreter: LedgerAddress,
    /// Access-control instance; zero leaves every task unrestricted.
    pub access: LedgerAddress,
    pub template: DataTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factory {
    pub flow: LedgerAddress,
    pub interpreter: LedgerAddress,
    pub access: LedgerAddress,
    pub template: DataTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataNode {
    pub factory: LedgerAddress,
    pub flow: LedgerAddress,
    pub interpreter: LedgerAddress,
    pub access: LedgerAddress,
    pub parent: Option<LedgerAddress>,
    pub index_in_parent: Option<u32>,
    /// Root case of the tree; `None` on the root itself.
    pub root: Option<LedgerAddress>,
    pub children: BTreeMap<u32, Vec<LedgerAddress>>,
    pub inst_count: BTreeMap<u32, u32>,
    pub state: ProcessState,
    pub vars: BTreeMap<String, Value>,
}

impl DataNode {
    pub fn from_factory(factory_addr: LedgerAddress, f: &Factory) -> Self {
        DataNode {
            factory: factory_addr,
            flow: f.flow,
            interpreter: f.interpreter,
            access: f.access,
            parent: None,
            index_in_parent: None,
            root: None,
            children: BTreeMap::new(),
            inst_count: BTreeMap::new(),
            state: ProcessState::EMPTY,
            vars: f.template.initial_vars(),
        }
    }
}

// ---- factory --------------------------------------------------------------

pub(crate) fn factory_at<'a>(
    exec: &'a Exec<'_>,
    addr: &LedgerAddress,
) -> Result<&'a Factory, Revert> {
    match exec.instance(addr)? {
        Instance::Factory(f) => Ok(f),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

/// Deploys a fresh data node. Only the factory's interpreter may call.
pub fn new_instance(exec: &mut Exec<'_>) -> Result<LedgerAddress, Revert> {
    let this = exec.this();
    let f = factory_at(exec, &this)?;
    ensure(exec.sender() == f.interpreter, "REJECTED")?;
    let node = DataNode::from_factory(this, f);
    let init_len = bincode::serialized_size(&this).expect("address encodes") as usize;
    exec.deploy(InstanceKind::DataNode, init_len, Instance::Data(node))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactoryRef(pub LedgerAddress);

impl FactoryRef {
    pub fn new_instance(self, exec: &mut Exec<'_>) -> Result<LedgerAddress, Revert> {
        exec.call(self.0, new_instance)
    }
}

// ---- data node ------------------------------------------------------------

fn node<'a>(exec: &'a Exec<'_>) -> Result<&'a DataNode, Revert> {
    match exec.instance(&exec.this())? {
        Instance::Data(d) => Ok(d),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

fn node_mut<'a>(exec: &'a mut Exec<'_>) -> Result<&'a mut DataNode, Revert> {
    let this = exec.this();
    match exec.instance_mut(&this)? {
        Instance::Data(d) => Ok(d),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

fn template(exec: &Exec<'_>) -> Result<DataTemplate, Revert> {
    let factory = node(exec)?.factory;
    Ok(factory_at(exec, &factory)?.template.clone())
}

/// Mutators accept only the interpreter and the creating factory.
fn require_engine(exec: &Exec<'_>) -> Result<(), Revert> {
    let n = node(exec)?;
    let s = exec.sender();
    ensure(s == n.interpreter || s == n.factory, "REJECTED")
}

fn read<T>(exec: &mut Exec<'_>, slots: u64, f: impl FnOnce(&DataNode) -> T) -> Result<T, Revert> {
    let out = f(node(exec)?);
    exec.read_slots(slots);
    Ok(out)
}

fn script_error(e: ScriptError) -> Revert {
    match e {
        ScriptError::Runtime(_) | ScriptError::Type(_) | ScriptError::Undeclared(_) => {
            Revert::new("SCRIPT_ERROR")
        }
        ScriptError::Syntax { .. } => Revert::new("SCRIPT_ERROR"),
    }
}

pub fn get_state(exec: &mut Exec<'_>) -> Result<ProcessState, Revert> {
    read(exec, 2, |n| n.state)
}

pub fn get_flow(exec: &mut Exec<'_>) -> Result<LedgerAddress, Revert> {
    read(exec, 1, |n| n.flow)
}

pub fn get_parent(exec: &mut Exec<'_>) -> Result<Option<LedgerAddress>, Revert> {
    read(exec, 1, |n| n.parent)
}

pub fn get_index_in_parent(exec: &mut Exec<'_>) -> Result<Option<u32>, Revert> {
    read(exec, 1, |n| n.index_in_parent)
}

pub fn get_root(exec: &mut Exec<'_>) -> Result<LedgerAddress, Revert> {
    let this = exec.this();
    read(exec, 1, |n| n.root.unwrap_or(this))
}

pub fn get_children(exec: &mut Exec<'_>, e_ind: u32) -> Result<Vec<LedgerAddress>, Revert> {
    let len = node(exec)?
        .children
        .get(&e_ind)
        .map_or(1, |c| c.len().max(1));
    read(exec, len as u64, |n| {
        n.children.get(&e_ind).cloned().unwrap_or_default()
    })
}

/// Every child in element-index order, then creation order.
pub fn get_all_children(exec: &mut Exec<'_>) -> Result<Vec<LedgerAddress>, Revert> {
    let len: usize = node(exec)?.children.values().map(Vec::len).sum();
    read(exec, len.max(1) as u64, |n| {
        n.children.values().flatten().copied().collect()
    })
}

pub fn get_count_inst(exec: &mut Exec<'_>, e_ind: u32) -> Result<u32, Revert> {
    read(exec, 1, |n| n.inst_count.get(&e_ind).copied().unwrap_or(0))
}

pub fn update_process_state(exec: &mut Exec<'_>, state: ProcessState) -> Result<(), Revert> {
    require_engine(exec)?;
    let n = node_mut(exec)?;
    let old = n.state;
    n.state = state;
    let writes = u64::from(old.tokens != state.tokens) + u64::from(old.running != state.running);
    exec.write_slots(writes);
    if writes > 0 {
        exec.emit(
            "StateUpdated",
            vec![
                ("tokens".into(), join(state.tokens.iter())),
                ("running".into(), join(state.running.iter())),
            ],
        );
    }
    Ok(())
}

fn join(it: impl Iterator<Item = u32>) -> String {
    it.map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

pub fn set_parent(
    exec: &mut Exec<'_>,
    parent: LedgerAddress,
    flow: LedgerAddress,
    index: u32,
) -> Result<(), Revert> {
    require_engine(exec)?;
    ensure(node(exec)?.flow == flow, "FLOW_MISMATCH")?;
    let root = DataRef(parent).root(exec)?;
    let n = node_mut(exec)?;
    n.parent = Some(parent);
    n.index_in_parent = Some(index);
    n.root = Some(root);
    exec.write_slots(3);
    Ok(())
}

pub fn add_child(exec: &mut Exec<'_>, e_ind: u32, child: LedgerAddress) -> Result<(), Revert> {
    require_engine(exec)?;
    node_mut(exec)?
        .children
        .entry(e_ind)
        .or_default()
        .push(child);
    exec.write_slots(1);
    Ok(())
}

/// Returns the remaining count.
pub fn decrease_inst_count(exec: &mut Exec<'_>, e_ind: u32) -> Result<u32, Revert> {
    require_engine(exec)?;
    let n = node_mut(exec)?;
    let slot = n.inst_count.entry(e_ind).or_insert(0);
    *slot = slot.saturating_sub(1);
    let left = *slot;
    exec.read_slots(1);
    exec.write_slots(1);
    Ok(left)
}

pub fn set_inst_count(exec: &mut Exec<'_>, e_ind: u32, count: u32) -> Result<(), Revert> {
    require_engine(exec)?;
    node_mut(exec)?.inst_count.insert(e_ind, count);
    exec.write_slots(1);
    Ok(())
}

/// Runs the script of a script task (returning its `postC`) or evaluates
/// the guards of a split gateway (returning the chosen edges). Elements
/// without an entry yield the empty set.
pub fn exec_script(exec: &mut Exec<'_>, e_ind: u32) -> Result<EdgeSet, Revert> {
    require_engine(exec)?;
    let t = template(exec)?;
    if let Some(prog) = t.scripts.get(&e_ind) {
        let reads = node(exec)?.vars.len() as u64;
        exec.read_slots(reads);
        let locals = BTreeMap::new();
        let n = node_mut(exec)?;
        Env {
            vars: &mut n.vars,
            locals: &locals,
        }
        .run(prog)
        .map_err(script_error)?;
        exec.write_slots(prog.len() as u64);
        let flow = node(exec)?.flow;
        return FlowRef(flow).post_c(exec, e_ind);
    }
    let Some(gw) = t.gateways.get(&e_ind) else {
        return Ok(EdgeSet::EMPTY);
    };
    let vars = node(exec)?.vars.clone();
    exec.read_slots(vars.len() as u64);
    choose_edges(gw, &vars)
}

/// Guard evaluation in ascending edge order.
pub fn choose_edges(gw: &GatewayScript, vars: &BTreeMap<String, Value>) -> Result<EdgeSet, Revert> {
    let mut guards: Vec<&(u32, Expr)> = gw.guards.iter().collect();
    guards.sort_by_key(|(edge, _)| *edge);
    let none = BTreeMap::new();
    let mut chosen = EdgeSet::EMPTY;
    for (edge, guard) in guards {
        if Some(*edge) == gw.default {
            continue;
        }
        match script::eval(guard, vars, &none).map_err(script_error)? {
            Value::Bool(true) => {
                chosen.insert(*edge);
                if !gw.inclusive {
                    return Ok(chosen);
                }
            }
            Value::Bool(false) => {}
            _ => return Err(Revert::new("SCRIPT_ERROR")),
        }
    }
    if chosen.is_empty() {
        match gw.default {
            Some(d) => chosen.insert(d),
            None => return Err(Revert::new("NO_PATH")),
        }
    }
    Ok(chosen)
}

fn authorize(exec: &mut Exec<'_>, e_ind: u32) -> Result<(), Revert> {
    let n = node(exec)?;
    let (access, flow) = (n.access, n.flow);
    if access.is_zero() {
        return Ok(());
    }
    let root = get_root(exec)?;
    let actor = exec.origin().clone();
    let ok = AccessRef(access).can_perform(exec, root, flow, e_ind, actor)?;
    ensure(ok, "UNAUTHORIZED")
}

/// Imports `payload` for external element `e_ind`, runs its statements,
/// then asks the interpreter to continue from `e_ind`.
pub fn check_in(
    exec: &mut Exec<'_>,
    e_ind: u32,
    payload: BTreeMap<String, Value>,
) -> Result<(), Revert> {
    let t = template(exec)?;
    let ci = t
        .check_ins
        .get(&e_ind)
        .ok_or_else(|| Revert::new("Not Found"))?;
    authorize(exec, e_ind)?;
    let well_typed = payload.len() == ci.params.len()
        && ci
            .params
            .iter()
            .all(|p| payload.get(&p.name).is_some_and(|v| v.ty() == p.ty));
    ensure(well_typed, "BAD_PAYLOAD")?;
    let flow = node(exec)?.flow;
    let (pre, _, ti) = FlowRef(flow).find(exec, e_ind)?;
    let state = get_state(exec)?;
    ensure(
        ti.is_external() && interpreter::is_enabled(&pre, ti, &state),
        "NOT_ENABLED",
    )?;
    let n = node_mut(exec)?;
    Env {
        vars: &mut n.vars,
        locals: &payload,
    }
    .run(&ci.body)
    .map_err(script_error)?;
    exec.write_slots(ci.body.len() as u64);
    let actor = exec.origin().to_string();
    exec.emit(
        "CheckedIn",
        vec![("eInd".into(), e_ind.to_string()), ("actor".into(), actor)],
    );
    let (this, interp) = (exec.this(), node(exec)?.interpreter);
    InterpreterRef(interp).execute_elements(exec, this, e_ind)
}

/// Values of the export list of `e_ind`, in declaration order.
pub fn check_out(exec: &mut Exec<'_>, e_ind: u32) -> Result<Vec<(String, Value)>, Revert> {
    let t = template(exec)?;
    let outs = t
        .check_outs
        .get(&e_ind)
        .filter(|o| !o.is_empty())
        .ok_or_else(|| Revert::new("Not Found"))?;
    authorize(exec, e_ind)?;
    let values = read(exec, outs.len() as u64, |n| {
        outs.iter()
            .map(|p| {
                (
                    p.name.clone(),
                    n.vars.get(&p.name).cloned().unwrap_or(p.ty.default_value()),
                )
            })
            .collect()
    })?;
    Ok(values)
}

/// Caller-side handle issuing nested calls into a data node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataRef(pub LedgerAddress);

impl DataRef {
    pub fn state(self, exec: &mut Exec<'_>) -> Result<ProcessState, Revert> {
        exec.call(self.0, get_state)
    }
    pub fn flow(self, exec: &mut Exec<'_>) -> Result<LedgerAddress, Revert> {
        exec.call(self.0, get_flow)
    }
    pub fn parent(self, exec: &mut Exec<'_>) -> Result<Option<LedgerAddress>, Revert> {
        exec.call(self.0, get_parent)
    }
    pub fn index_in_parent(self, exec: &mut Exec<'_>) -> Result<Option<u32>, Revert> {
        exec.call(self.0, get_index_in_parent)
    }
    pub fn root(self, exec: &mut Exec<'_>) -> Result<LedgerAddress, Revert> {
        exec.call(self.0, get_root)
    }
    pub fn children(self, exec: &mut Exec<'_>, e: u32) -> Result<Vec<LedgerAddress>, Revert> {
        exec.call(self.0, |x| get_children(x, e))
    }
    pub fn all_children(self, exec: &mut Exec<'_>) -> Result<Vec<LedgerAddress>, Revert> {
        exec.call(self.0, get_all_children)
    }
    pub fn count_inst(self, exec: &mut Exec<'_>, e: u32) -> Result<u32, Revert> {
        exec.call(self.0, |x| get_count_inst(x, e))
    }
    pub fn update_state(self, exec: &mut Exec<'_>, st: ProcessState) -> Result<(), Revert> {
        exec.call(self.0, |x| update_process_state(x, st))
    }
    pub fn set_parent(
        self,
        exec: &mut Exec<'_>,
        parent: LedgerAddress,
        flow: LedgerAddress,
        index: u32,
    ) -> Result<(), Revert> {
        exec.call(self.0, |x| set_parent(x, parent, flow, index))
    }
    pub fn add_child(
        self,
        exec: &mut Exec<'_>,
        e: u32,
        child: LedgerAddress,
    ) -> Result<(), Revert> {
        exec.call(self.0, |x| add_child(x, e, child))
    }
    pub fn decrease_inst_count(self, exec: &mut Exec<'_>, e: u32) -> Result<u32, Revert> {
        exec.call(self.0, |x| decrease_inst_count(x, e))
    }
    pub fn set_inst_count(self, exec: &mut Exec<'_>, e: u32, n: u32) -> Result<(), Revert> {
        exec.call(self.0, |x| set_inst_count(x, e, n))
    }
    pub fn exec_script(self, exec: &mut Exec<'_>, e: u32) -> Result<EdgeSet, Revert> {
        exec.call(self.0, |x| exec_script(x, e))
    }
}
