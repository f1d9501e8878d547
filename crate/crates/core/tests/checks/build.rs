//! Flows assembled element by element through the flow-node operations,
//! for shapes the XML subset cannot express.

use flowledger_core::bits::EdgeSet;
use flowledger_core::data::{CheckIn, DataTemplate, FactoryInit};
use flowledger_core::flow::{EvtCode, SetElement, ROOT_MARKER};
use flowledger_core::ledger::{InstanceKind, LedgerAddress};
use flowledger_core::ops::{factory_init_bytes, Operation};
use flowledger_core::typeinfo::{
    ElementKind, GatewayKind, MultiInstance, Placement, TaskKind, Trigger, TypeInfo,
};

use super::common::Engine;

pub fn start() -> TypeInfo {
    event(Trigger::None, false, Placement::Flow, false)
}

pub fn end() -> TypeInfo {
    event(Trigger::None, true, Placement::Flow, false)
}

pub fn throw_end(t: Trigger) -> TypeInfo {
    event(t, true, Placement::Flow, false)
}

pub fn user() -> TypeInfo {
    TypeInfo::encode(ElementKind::Task(TaskKind::User))
}

pub fn and_split() -> TypeInfo {
    TypeInfo::encode(ElementKind::Gateway {
        kind: GatewayKind::Parallel,
        join: false,
    })
}

pub fn and_join() -> TypeInfo {
    TypeInfo::encode(ElementKind::Gateway {
        kind: GatewayKind::Parallel,
        join: true,
    })
}

pub fn sub(multi: Option<MultiInstance>) -> TypeInfo {
    TypeInfo::encode(ElementKind::SubProcess {
        call: false,
        event_sub: false,
        multi,
    })
}

pub fn event_sub() -> TypeInfo {
    TypeInfo::encode(ElementKind::SubProcess {
        call: false,
        event_sub: true,
        multi: None,
    })
}

pub fn event(
    trigger: Trigger,
    throwing: bool,
    placement: Placement,
    interrupting: bool,
) -> TypeInfo {
    TypeInfo::encode(ElementKind::Event {
        trigger,
        throwing,
        placement,
        interrupting,
    })
}

#[derive(Default)]
pub struct FlowBuilder {
    elements: Vec<SetElement>,
}

impl FlowBuilder {
    pub fn el(self, e: u32, pre: &[u32], post: &[u32], ti: TypeInfo) -> Self {
        self.coded(e, pre, post, ti, None)
    }

    pub fn coded(
        mut self,
        e: u32,
        pre: &[u32],
        post: &[u32],
        ti: TypeInfo,
        code: Option<&str>,
    ) -> Self {
        self.elements.push(SetElement {
            e_ind: e,
            pre_c: EdgeSet::of(pre.iter().copied()),
            post_c: EdgeSet::of(post.iter().copied()),
            type_info: ti,
            evt_code: code.map(EvtCode::of).unwrap_or(EvtCode::ZERO),
            attached_to: None,
            count_inst: 1,
        });
        self
    }

    /// Deploys the flow node and a factory whose template accepts an empty
    /// check-in on every user task.
    pub fn deploy(&self, engine: &Engine) -> LedgerAddress {
        let (l, admin) = (&engine.ledger, &engine.admin);
        let flow = l
            .deploy(admin, InstanceKind::FlowNode.name(), vec![])
            .into_result()
            .unwrap();
        let mut template = DataTemplate::default();
        for s in &self.elements {
            l.call(admin, flow, Operation::SetElement(s.clone()))
                .into_result()
                .unwrap();
            if s.type_info.is_user_task() {
                template.check_ins.insert(s.e_ind, CheckIn::default());
            }
        }
        let init = FactoryInit {
            flow,
            interpreter: engine.interp,
            access: LedgerAddress::ZERO,
            template,
        };
        let factory = l
            .deploy(
                admin,
                InstanceKind::Factory.name(),
                factory_init_bytes(&init),
            )
            .into_result()
            .unwrap();
        l.call(
            admin,
            flow,
            Operation::SetFactory {
                e_ind: ROOT_MARKER,
                factory,
            },
        )
        .into_result()
        .unwrap();
        flow
    }
}

pub fn link(
    engine: &Engine,
    parent: LedgerAddress,
    e_ind: u32,
    child: LedgerAddress,
    attached: &[u32],
    count: u32,
) {
    engine
        .ledger
        .call(
            &engine.admin,
            parent,
            Operation::LinkSubprocess {
                e_ind,
                child,
                attached_events: attached.to_vec(),
                count_inst: count,
            },
        )
        .into_result()
        .unwrap();
}
