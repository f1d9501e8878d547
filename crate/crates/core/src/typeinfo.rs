//! 16-bit element descriptors.
//!
//! Layout (category bit first, then category-dependent flags):
//!
//! | bit | activity            | gateway   | event                   |
//! |-----|---------------------|-----------|-------------------------|
//! | 0   | activity            |           |                         |
//! | 1   |                     | gateway   |                         |
//! | 2   |                     |           | event                   |
//! | 3   | task                | join      | throwing                |
//! | 4   | multi-instance      |           | interrupting            |
//! | 5   | sequential MI       |           |                         |
//! | 6   | sub-process         |           |                         |
//! | 7   | call-activity       |           |                         |
//! | 8   | event sub-process   |           | event-sub-process start |
//! | 9   |                     |           | boundary                |
//! | 10  | none task           |           | none                    |
//! | 11  | user task           |           | terminate               |
//! | 12  | script task         |           | error                   |
//! | 13  | service task        |           | message                 |
//! | 14  |                     | exclusive | escalation              |
//! | 15  |                     | parallel  | signal                  |
//!
//! An inclusive gateway sets bits 14 and 15 together.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const ACTIVITY: u16 = 1 << 0;
pub const GATEWAY: u16 = 1 << 1;
pub const EVENT: u16 = 1 << 2;
/// task (activity) / join (gateway) / throwing (event)
pub const FLAG3: u16 = 1 << 3;
/// multi-instance (activity) / interrupting (event)
pub const FLAG4: u16 = 1 << 4;
pub const SEQUENTIAL: u16 = 1 << 5;
pub const SUB_PROCESS: u16 = 1 << 6;
pub const CALL_ACTIVITY: u16 = 1 << 7;
/// event sub-process (activity) / event-sub-process start (event)
pub const EVENT_SUB: u16 = 1 << 8;
pub const BOUNDARY: u16 = 1 << 9;
pub const NONE_KIND: u16 = 1 << 10;
/// user task (activity) / terminate (event)
pub const BIT11: u16 = 1 << 11;
/// script task (activity) / error (event)
pub const BIT12: u16 = 1 << 12;
/// service task (activity) / message (event)
pub const BIT13: u16 = 1 << 13;
/// exclusive (gateway) / escalation (event)
pub const BIT14: u16 = 1 << 14;
/// parallel (gateway) / signal (event)
pub const BIT15: u16 = 1 << 15;

const CATEGORY: u16 = ACTIVITY | GATEWAY | EVENT;
const SUBTYPE_MASK: u16 = NONE_KIND | BIT11 | BIT12 | BIT13 | BIT14 | BIT15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    None,
    User,
    Script,
    Service,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GatewayKind {
    Exclusive,
    Parallel,
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Trigger {
    None,
    Terminate,
    Error,
    Message,
    Escalation,
    Signal,
}

impl Trigger {
    pub const ALL: [Trigger; 6] = [
        Trigger::None,
        Trigger::Terminate,
        Trigger::Error,
        Trigger::Message,
        Trigger::Escalation,
        Trigger::Signal,
    ];

    fn bit(self) -> u16 {
        match self {
            Trigger::None => NONE_KIND,
            Trigger::Terminate => BIT11,
            Trigger::Error => BIT12,
            Trigger::Message => BIT13,
            Trigger::Escalation => BIT14,
            Trigger::Signal => BIT15,
        }
    }
}

/// Where a catching event sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    /// Start, intermediate or end event in the normal flow.
    Flow,
    Boundary,
    EventSubStart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MultiInstance {
    Parallel,
    Sequential,
}

/// Decoded form of a [`TypeInfo`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    Task(TaskKind),
    SubProcess {
        call: bool,
        event_sub: bool,
        multi: Option<MultiInstance>,
    },
    Gateway {
        kind: GatewayKind,
        join: bool,
    },
    Event {
        trigger: Trigger,
        throwing: bool,
        placement: Placement,
        interrupting: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("malformed typeInfo {0:#06x}")]
pub struct BadTypeInfo(pub u16);

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypeInfo(pub u16);

impl fmt::Debug for TypeInfo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TypeInfo({:#018b})", self.0)
    }
}

impl TypeInfo {
    pub const ZERO: TypeInfo = TypeInfo(0);

    pub fn bits(self) -> u16 {
        self.0
    }

    fn has(self, mask: u16) -> bool {
        self.0 & mask == mask
    }

    pub fn encode(kind: ElementKind) -> TypeInfo {
        let bits = match kind {
            ElementKind::Task(t) => {
                ACTIVITY
                    | FLAG3
                    | match t {
                        TaskKind::None => NONE_KIND,
                        TaskKind::User => BIT11,
                        TaskKind::Script => BIT12,
                        TaskKind::Service => BIT13,
                    }
            }
            ElementKind::SubProcess {
                call,
                event_sub,
                multi,
            } => {
                let mut b = ACTIVITY | if call { CALL_ACTIVITY } else { SUB_PROCESS };
                if event_sub {
                    b |= EVENT_SUB;
                }
                match multi {
                    Some(MultiInstance::Parallel) => b |= FLAG4,
                    Some(MultiInstance::Sequential) => b |= FLAG4 | SEQUENTIAL,
                    None => {}
                }
                b
            }
            ElementKind::Gateway { kind, join } => {
                let mut b = GATEWAY
                    | match kind {
                        GatewayKind::Exclusive => BIT14,
                        GatewayKind::Parallel => BIT15,
                        GatewayKind::Inclusive => BIT14 | BIT15,
                    };
                if join {
                    b |= FLAG3;
                }
                b
            }
            ElementKind::Event {
                trigger,
                throwing,
                placement,
                interrupting,
            } => {
                let mut b = EVENT | trigger.bit();
                if throwing {
                    b |= FLAG3;
                }
                if interrupting {
                    b |= FLAG4;
                }
                match placement {
                    Placement::Flow => {}
                    Placement::Boundary => b |= BOUNDARY,
                    Placement::EventSubStart => b |= EVENT_SUB,
                }
                b
            }
        };
        TypeInfo(bits)
    }

    pub fn decode(self) -> Result<ElementKind, BadTypeInfo> {
        let bad = Err(BadTypeInfo(self.0));
        let b = self.0;
        let sub = b & SUBTYPE_MASK;
        match b & CATEGORY {
            ACTIVITY => {
                if b & FLAG3 != 0 {
                    let allowed = ACTIVITY | FLAG3 | NONE_KIND | BIT11 | BIT12 | BIT13;
                    if b & !allowed != 0 {
                        return bad;
                    }
                    let kind = match sub {
                        NONE_KIND => TaskKind::None,
                        BIT11 => TaskKind::User,
                        BIT12 => TaskKind::Script,
                        BIT13 => TaskKind::Service,
                        _ => return bad,
                    };
                    Ok(ElementKind::Task(kind))
                } else {
                    let allowed =
                        ACTIVITY | FLAG4 | SEQUENTIAL | SUB_PROCESS | CALL_ACTIVITY | EVENT_SUB;
                    if b & !allowed != 0 {
                        return bad;
                    }
                    let call = match (b & SUB_PROCESS != 0, b & CALL_ACTIVITY != 0) {
                        (true, false) => false,
                        (false, true) => true,
                        _ => return bad,
                    };
                    let multi = match (b & FLAG4 != 0, b & SEQUENTIAL != 0) {
                        (false, false) => None,
                        (true, false) => Some(MultiInstance::Parallel),
                        (true, true) => Some(MultiInstance::Sequential),
                        (false, true) => return bad,
                    };
                    Ok(ElementKind::SubProcess {
                        call,
                        event_sub: b & EVENT_SUB != 0,
                        multi,
                    })
                }
            }
            GATEWAY => {
                if b & !(GATEWAY | FLAG3 | BIT14 | BIT15) != 0 {
                    return bad;
                }
                let kind = match (b & BIT14 != 0, b & BIT15 != 0) {
                    (true, false) => GatewayKind::Exclusive,
                    (false, true) => GatewayKind::Parallel,
                    (true, true) => GatewayKind::Inclusive,
                    (false, false) => return bad,
                };
                Ok(ElementKind::Gateway {
                    kind,
                    join: b & FLAG3 != 0,
                })
            }
            EVENT => {
                if b & (ACTIVITY | GATEWAY | SEQUENTIAL | SUB_PROCESS | CALL_ACTIVITY) != 0 {
                    return bad;
                }
                let trigger = match Trigger::ALL.iter().find(|t| t.bit() == sub) {
                    Some(t) => *t,
                    None => return bad,
                };
                let placement = match (b & BOUNDARY != 0, b & EVENT_SUB != 0) {
                    (false, false) => Placement::Flow,
                    (true, false) => Placement::Boundary,
                    (false, true) => Placement::EventSubStart,
                    (true, true) => return bad,
                };
                Ok(ElementKind::Event {
                    trigger,
                    throwing: b & FLAG3 != 0,
                    placement,
                    interrupting: b & FLAG4 != 0,
                })
            }
            _ => bad,
        }
    }

    pub fn is_valid(self) -> bool {
        self.decode().is_ok()
    }

    pub fn is_activity(self) -> bool {
        self.0 & CATEGORY == ACTIVITY
    }
    pub fn is_gateway(self) -> bool {
        self.0 & CATEGORY == GATEWAY
    }
    pub fn is_event(self) -> bool {
        self.0 & CATEGORY == EVENT
    }

    pub fn is_task(self) -> bool {
        self.has(ACTIVITY | FLAG3)
    }
    pub fn is_user_task(self) -> bool {
        self.has(ACTIVITY | BIT11)
    }
    pub fn is_script_task(self) -> bool {
        self.is_task() && self.has(BIT12)
    }
    pub fn is_service_task(self) -> bool {
        self.is_task() && self.has(BIT13)
    }

    /// Sub-process or call-activity (any multi-instance flavour).
    pub fn is_subprocess_like(self) -> bool {
        self.is_activity() && self.0 & (SUB_PROCESS | CALL_ACTIVITY) != 0
    }
    pub fn is_multi_instance(self) -> bool {
        self.is_subprocess_like() && self.has(FLAG4)
    }
    pub fn is_parallel_multi_instance(self) -> bool {
        self.is_multi_instance() && !self.has(SEQUENTIAL)
    }
    pub fn is_sequential_multi_instance(self) -> bool {
        self.is_multi_instance() && self.has(SEQUENTIAL)
    }
    pub fn is_event_subprocess(self) -> bool {
        self.is_subprocess_like() && self.has(EVENT_SUB)
    }

    pub fn is_join(self) -> bool {
        self.has(GATEWAY | FLAG3)
    }
    pub fn is_split(self) -> bool {
        self.is_gateway() && !self.has(FLAG3)
    }
    pub fn gateway_kind(self) -> Option<GatewayKind> {
        if !self.is_gateway() {
            return None;
        }
        match (self.has(BIT14), self.has(BIT15)) {
            (true, false) => Some(GatewayKind::Exclusive),
            (false, true) => Some(GatewayKind::Parallel),
            (true, true) => Some(GatewayKind::Inclusive),
            _ => None,
        }
    }
    pub fn is_parallel_join(self) -> bool {
        self.is_join() && self.gateway_kind() == Some(GatewayKind::Parallel)
    }
    pub fn is_inclusive_join(self) -> bool {
        self.is_join() && self.gateway_kind() == Some(GatewayKind::Inclusive)
    }
    pub fn is_exclusive_split(self) -> bool {
        self.is_split() && self.gateway_kind() == Some(GatewayKind::Exclusive)
    }
    pub fn is_inclusive_split(self) -> bool {
        self.is_split() && self.gateway_kind() == Some(GatewayKind::Inclusive)
    }

    pub fn is_throwing(self) -> bool {
        self.has(EVENT | FLAG3)
    }
    pub fn is_catching(self) -> bool {
        self.is_event() && !self.has(FLAG3)
    }
    pub fn is_interrupting(self) -> bool {
        self.has(EVENT | FLAG4)
    }
    pub fn is_boundary(self) -> bool {
        self.has(EVENT | BOUNDARY)
    }
    pub fn is_event_sub_start(self) -> bool {
        self.has(EVENT | EVENT_SUB)
    }
    pub fn is_terminate(self) -> bool {
        self.has(EVENT | BIT11)
    }

    pub fn trigger(self) -> Option<Trigger> {
        if !self.is_event() {
            return None;
        }
        let sub = self.0 & SUBTYPE_MASK;
        Trigger::ALL.iter().copied().find(|t| t.bit() == sub)
    }
    pub fn has_trigger(self, t: Trigger) -> bool {
        self.is_event() && self.has(t.bit())
    }

    /// Catching event in the normal flow (not boundary, not event-sub-process start).
    pub fn is_flow_catch(self) -> bool {
        self.is_catching() && !self.is_boundary() && !self.is_event_sub_start()
    }

    /// Elements the interpreter never runs on its own initiative: user and
    /// service tasks, and catching flow events that wait for a trigger.
    pub fn requires_trigger(self) -> bool {
        self.is_user_task()
            || self.is_service_task()
            || (self.is_flow_catch() && !self.has_trigger(Trigger::None))
    }

    /// Elements an external actor advances through a data-node check-in.
    pub fn is_external(self) -> bool {
        self.is_user_task()
            || self.is_service_task()
            || (self.is_flow_catch() && self.has_trigger(Trigger::Message))
    }
}

impl From<ElementKind> for TypeInfo {
    fn from(kind: ElementKind) -> Self {
        TypeInfo::encode(kind)
    }
}

/// Every kind the encoder supports; used by round-trip tests and the
/// gateway's schema listing.
pub fn all_kinds() -> Vec<ElementKind> {
    let mut out = Vec::new();
    for t in [
        TaskKind::None,
        TaskKind::User,
        TaskKind::Script,
        TaskKind::Service,
    ] {
        out.push(ElementKind::Task(t));
    }
    for call in [false, true] {
        for event_sub in [false, true] {
            for multi in [
                None,
                Some(MultiInstance::Parallel),
                Some(MultiInstance::Sequential),
            ] {
                out.push(ElementKind::SubProcess {
                    call,
                    event_sub,
                    multi,
                });
            }
        }
    }
    for kind in [
        GatewayKind::Exclusive,
        GatewayKind::Parallel,
        GatewayKind::Inclusive,
    ] {
        for join in [false, true] {
            out.push(ElementKind::Gateway { kind, join });
        }
    }
    for trigger in Trigger::ALL {
        for throwing in [false, true] {
            for placement in [
                Placement::Flow,
                Placement::Boundary,
                Placement::EventSubStart,
            ] {
                for interrupting in [false, true] {
                    out.push(ElementKind::Event {
                        trigger,
                        throwing,
                        placement,
                        interrupting,
                    });
                }
            }
        }
    }
    out
}
