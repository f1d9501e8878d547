//! Serializable operations and their dispatch, so every external call
//! is recorded on the ledger with canonical argument bytes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::access::{self, AccessControl, AccessInit};
use crate::bits::EdgeSet;
use crate::data::{self, DataNode, Factory, FactoryInit, ProcessState};
use crate::flow::{self, EvtCode, FlowNode, SetElement};
use crate::interpreter::{self, Interpreter};
use crate::ledger::{
    AccountId, Exec, Instance, InstanceKind, Ledger, LedgerAddress, Receipt, Revert,
};
use crate::script::Value;
use crate::typeinfo::TypeInfo;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operation {
    // flow node
    SetElement(SetElement),
    LinkSubprocess {
        e_ind: u32,
        child: LedgerAddress,
        attached_events: Vec<u32>,
        count_inst: u32,
    },
    SetFactory {
        e_ind: u32,
        factory: LedgerAddress,
    },
    Find {
        e_ind: u32,
    },
    GetTypeInfo {
        e_ind: u32,
    },
    GetPostC {
        e_ind: u32,
    },
    GetAttachedTo {
        e_ind: u32,
    },
    GetEventList,
    GetEvtCode {
        e_ind: u32,
    },
    GetChildFlow {
        e_ind: u32,
    },
    GetFactory {
        e_ind: u32,
    },
    GetInitElement,
    GetFlowCountInst {
        e_ind: u32,
    },
    OutElements {
        e_ind: u32,
    },

    // interpreter
    StartCase {
        flow: LedgerAddress,
    },
    ExecuteElements {
        case: LedgerAddress,
        e_ind: u32,
    },
    CreateInstance {
        case: LedgerAddress,
        e_ind: u32,
    },
    ThrowEvent {
        case: LedgerAddress,
        evt_code: EvtCode,
        type_info: TypeInfo,
    },
    TryCatchEvent {
        case: LedgerAddress,
        evt_code: EvtCode,
        type_info: TypeInfo,
    },
    KillSubProcess {
        case: LedgerAddress,
    },
    BroadcastSignal {
        case: LedgerAddress,
    },

    // data node
    CheckIn {
        e_ind: u32,
        payload: BTreeMap<String, Value>,
    },
    CheckOut {
        e_ind: u32,
    },
    ExecScript {
        e_ind: u32,
    },
    UpdateProcessState {
        state: ProcessState,
    },
    SetParent {
        parent: LedgerAddress,
        flow: LedgerAddress,
        index: u32,
    },
    AddChild {
        e_ind: u32,
        child: LedgerAddress,
    },
    DecreaseInstCount {
        e_ind: u32,
    },
    SetInstCount {
        e_ind: u32,
        count: u32,
    },
    GetSubProcessState,
    GetFlowNode,
    GetParent,
    GetIndexInParent,
    GetCountInst {
        e_ind: u32,
    },

    // factory
    NewInstance,

    // access control
    DefineRole {
        role: String,
    },
    RequireRole {
        flow: LedgerAddress,
        e_ind: u32,
        role: String,
    },
    Bind {
        case: LedgerAddress,
        role: String,
        actor: AccountId,
    },
    Release {
        case: LedgerAddress,
        role: String,
    },
    CanPerform {
        case: LedgerAddress,
        flow: LedgerAddress,
        e_ind: u32,
        actor: AccountId,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        use Operation::*;
        match self {
            SetElement(_) => "setElement",
            LinkSubprocess { .. } => "linkSubprocess",
            SetFactory { .. } => "setFactory",
            Find { .. } => "find",
            GetTypeInfo { .. } => "getTypeInfo",
            GetPostC { .. } => "getPostC",
            GetAttachedTo { .. } => "getAttachedTo",
            GetEventList => "getEventList",
            GetEvtCode { .. } => "getEvtCode",
            GetChildFlow { .. } => "getChildFlow",
            GetFactory { .. } => "getFactory",
            GetInitElement => "getInitElement",
            GetFlowCountInst { .. } => "getCountInst",
            OutElements { .. } => "outElements",
            StartCase { .. } => "startCase",
            ExecuteElements { .. } => "executeElements",
            CreateInstance { .. } => "createInstance",
            ThrowEvent { .. } => "throwEvent",
            TryCatchEvent { .. } => "tryCatchEvent",
            KillSubProcess { .. } => "killSubProcess",
            BroadcastSignal { .. } => "broadcastSignal",
            CheckIn { .. } => "checkIn",
            CheckOut { .. } => "checkOut",
            ExecScript { .. } => "execScript",
            UpdateProcessState { .. } => "updateProcessState",
            SetParent { .. } => "setParent",
            AddChild { .. } => "addChild",
            DecreaseInstCount { .. } => "decreaseInstCount",
            SetInstCount { .. } => "setInstCount",
            GetSubProcessState => "getSubProcessState",
            GetFlowNode => "getFlowNode",
            GetParent => "getParent",
            GetIndexInParent => "getIndexInParent",
            GetCountInst { .. } => "getCountInst",
            NewInstance => "newInstance",
            DefineRole { .. } => "defineRole",
            RequireRole { .. } => "requireRole",
            Bind { .. } => "bind",
            Release { .. } => "release",
            CanPerform { .. } => "canPerform",
        }
    }

    /// Instance kind that implements the operation.
    pub fn target_kind(&self) -> InstanceKind {
        use Operation::*;
        match self {
            SetElement(_)
            | LinkSubprocess { .. }
            | SetFactory { .. }
            | Find { .. }
            | GetTypeInfo { .. }
            | GetPostC { .. }
            | GetAttachedTo { .. }
            | GetEventList
            | GetEvtCode { .. }
            | GetChildFlow { .. }
            | GetFactory { .. }
            | GetInitElement
            | GetFlowCountInst { .. }
            | OutElements { .. } => InstanceKind::FlowNode,
            StartCase { .. }
            | ExecuteElements { .. }
            | CreateInstance { .. }
            | ThrowEvent { .. }
            | TryCatchEvent { .. }
            | KillSubProcess { .. }
            | BroadcastSignal { .. } => InstanceKind::Interpreter,
            CheckIn { .. }
            | CheckOut { .. }
            | ExecScript { .. }
            | UpdateProcessState { .. }
            | SetParent { .. }
            | AddChild { .. }
            | DecreaseInstCount { .. }
            | SetInstCount { .. }
            | GetSubProcessState
            | GetFlowNode
            | GetParent
            | GetIndexInParent
            | GetCountInst { .. } => InstanceKind::DataNode,
            NewInstance => InstanceKind::Factory,
            DefineRole { .. }
            | RequireRole { .. }
            | Bind { .. }
            | Release { .. }
            | CanPerform { .. } => InstanceKind::AccessControl,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        bincode::serialize(self).expect("operations always encode")
    }
}

/// Result of a dispatched operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Output {
    Unit,
    Address(LedgerAddress),
    OptAddress(Option<LedgerAddress>),
    Edges(EdgeSet),
    Element {
        pre_c: EdgeSet,
        post_c: EdgeSet,
        type_info: TypeInfo,
    },
    TypeInfo(TypeInfo),
    Index(Option<u32>),
    Count(u32),
    Indexes(Vec<u32>),
    Code(EvtCode),
    State(ProcessState),
    Values(Vec<(String, Value)>),
    Bool(bool),
}

impl Output {
    pub fn address(&self) -> Option<LedgerAddress> {
        match self {
            Output::Address(a) => Some(*a),
            Output::OptAddress(a) => *a,
            _ => None,
        }
    }
}

pub fn dispatch(exec: &mut Exec<'_>, op: Operation) -> Result<Output, Revert> {
    use Operation as O;
    use Output as R;
    let kind = exec.instance(&exec.this())?.kind();
    if kind != op.target_kind() {
        return Err(Revert::new("BAD_OPERATION"));
    }
    Ok(match op {
        O::SetElement(args) => flow::set_element(exec, args).map(|_| R::Unit)?,
        O::LinkSubprocess {
            e_ind,
            child,
            attached_events,
            count_inst,
        } => flow::link_subprocess(exec, e_ind, child, &attached_events, count_inst)
            .map(|_| R::Unit)?,
        O::SetFactory { e_ind, factory } => {
            flow::set_factory(exec, e_ind, factory).map(|_| R::Unit)?
        }
        O::Find { e_ind } => {
            let (pre_c, post_c, type_info) = flow::find(exec, e_ind)?;
            R::Element {
                pre_c,
                post_c,
                type_info,
            }
        }
        O::GetTypeInfo { e_ind } => R::TypeInfo(flow::get_type_info(exec, e_ind)?),
        O::GetPostC { e_ind } => R::Edges(flow::get_post_c(exec, e_ind)?),
        O::GetAttachedTo { e_ind } => R::Index(flow::get_attached_to(exec, e_ind)?),
        O::GetEventList => R::Indexes(flow::get_event_list(exec)?),
        O::GetEvtCode { e_ind } => R::Code(flow::get_evt_code(exec, e_ind)?),
        O::GetChildFlow { e_ind } => R::Address(flow::get_child_flow(exec, e_ind)?),
        O::GetFactory { e_ind } => R::Address(flow::get_factory(exec, e_ind)?),
        O::GetInitElement => R::Count(flow::get_init_element(exec)?),
        O::GetFlowCountInst { e_ind } => R::Count(flow::get_count_inst(exec, e_ind)?),
        O::OutElements { e_ind } => R::Indexes(flow::out_elements(exec, e_ind)?),

        O::StartCase { flow } => R::Address(interpreter::start_case(exec, flow)?),
        O::ExecuteElements { case, e_ind } => {
            interpreter::execute_elements(exec, case, e_ind).map(|_| R::Unit)?
        }
        O::CreateInstance { case, e_ind } => {
            interpreter::create_instance(exec, case, e_ind).map(|_| R::Unit)?
        }
        O::ThrowEvent {
            case,
            evt_code,
            type_info,
        } => interpreter::throw_event(exec, case, evt_code, type_info).map(|_| R::Unit)?,
        O::TryCatchEvent {
            case,
            evt_code,
            type_info,
        } => interpreter::try_catch_event(exec, case, evt_code, type_info).map(|_| R::Unit)?,
        O::KillSubProcess { case } => interpreter::kill_sub_process(exec, case).map(|_| R::Unit)?,
        O::BroadcastSignal { case } => {
            interpreter::broadcast_signal(exec, case).map(|_| R::Unit)?
        }

        O::CheckIn { e_ind, payload } => data::check_in(exec, e_ind, payload).map(|_| R::Unit)?,
        O::CheckOut { e_ind } => R::Values(data::check_out(exec, e_ind)?),
        O::ExecScript { e_ind } => R::Edges(data::exec_script(exec, e_ind)?),
        O::UpdateProcessState { state } => {
            data::update_process_state(exec, state).map(|_| R::Unit)?
        }
        O::SetParent {
            parent,
            flow,
            index,
        } => data::set_parent(exec, parent, flow, index).map(|_| R::Unit)?,
        O::AddChild { e_ind, child } => data::add_child(exec, e_ind, child).map(|_| R::Unit)?,
        O::DecreaseInstCount { e_ind } => R::Count(data::decrease_inst_count(exec, e_ind)?),
        O::SetInstCount { e_ind, count } => {
            data::set_inst_count(exec, e_ind, count).map(|_| R::Unit)?
        }
        O::GetSubProcessState => R::State(data::get_state(exec)?),
        O::GetFlowNode => R::Address(data::get_flow(exec)?),
        O::GetParent => R::OptAddress(data::get_parent(exec)?),
        O::GetIndexInParent => R::Index(data::get_index_in_parent(exec)?),
        O::GetCountInst { e_ind } => R::Count(data::get_count_inst(exec, e_ind)?),

        O::NewInstance => R::Address(data::new_instance(exec)?),

        O::DefineRole { role } => access::define_role(exec, &role).map(|_| R::Unit)?,
        O::RequireRole { flow, e_ind, role } => {
            access::require_role(exec, flow, e_ind, &role).map(|_| R::Unit)?
        }
        O::Bind { case, role, actor } => access::bind(exec, case, &role, actor).map(|_| R::Unit)?,
        O::Release { case, role } => access::release(exec, case, &role).map(|_| R::Unit)?,
        O::CanPerform {
            case,
            flow,
            e_ind,
            actor,
        } => R::Bool(access::can_perform(exec, case, flow, e_ind, &actor)?),
    })
}

/// Builds the instance a deployment of `kind` creates from `init`.
pub fn construct(exec: &mut Exec<'_>, kind: InstanceKind, init: &[u8]) -> Result<Instance, Revert> {
    let bad_init = |_| Revert::new("BAD_INIT");
    Ok(match kind {
        InstanceKind::Interpreter => Instance::Interpreter(Interpreter),
        InstanceKind::FlowNode => Instance::Flow(FlowNode::new(exec.sender())),
        InstanceKind::AccessControl => {
            let init: AccessInit = if init.is_empty() {
                AccessInit::default()
            } else {
                bincode::deserialize(init).map_err(bad_init)?
            };
            Instance::Access(AccessControl::new(exec.sender(), init))
        }
        InstanceKind::Factory => {
            let init: FactoryInit = bincode::deserialize(init).map_err(bad_init)?;
            init.template
                .validate()
                .map_err(|e| Revert::new(format!("BAD_TEMPLATE: {e}")))?;
            let flow_ok = matches!(exec.instance(&init.flow), Ok(Instance::Flow(_)));
            let interp_ok = matches!(
                exec.instance(&init.interpreter),
                Ok(Instance::Interpreter(_))
            );
            if !flow_ok || !interp_ok {
                return Err(Revert::new("BAD_INIT"));
            }
            Instance::Factory(Factory {
                flow: init.flow,
                interpreter: init.interpreter,
                access: init.access,
                template: init.template,
            })
        }
        InstanceKind::DataNode => {
            let factory: LedgerAddress = bincode::deserialize(init).map_err(bad_init)?;
            let f = data::factory_at(exec, &factory).map_err(|_| Revert::new("BAD_INIT"))?;
            Instance::Data(DataNode::from_factory(factory, f))
        }
    })
}

/// Typed deployment arguments, encoded canonically.
pub fn factory_init_bytes(init: &FactoryInit) -> Vec<u8> {
    bincode::serialize(init).expect("factory init encodes")
}

pub fn access_init_bytes(init: &AccessInit) -> Vec<u8> {
    bincode::serialize(init).expect("access init encodes")
}

impl Ledger {
    /// Sends `op` from `from` to the instance at `to` as one transaction.
    pub fn call(&self, from: &AccountId, to: LedgerAddress, op: Operation) -> Receipt<Output> {
        let args = op.encode();
        let name = op.name();
        self.transact(from, to, name, args, |exec| dispatch(exec, op))
    }

    /// Runs `op` read-only; nothing is recorded.
    pub fn query(
        &self,
        from: &AccountId,
        to: LedgerAddress,
        op: Operation,
    ) -> Result<Output, Revert> {
        self.view(from, to, |exec| dispatch(exec, op))
    }
}
