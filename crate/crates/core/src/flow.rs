//! Control-flow registry: one [`FlowNode`] per (sub-)process.
//!
//! A node maps element indexes to their incoming/outgoing edge sets and
//! [`TypeInfo`], and links sub-process elements to child nodes and to the
//! factories that create their data nodes. Nodes can be updated at any
//! time; running cases read them on every step.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::bits::{EdgeSet, WIDTH};
use crate::ledger::{ensure, Exec, Instance, LedgerAddress, Revert};
use crate::typeinfo::TypeInfo;

/// Key under which a node stores the factory for its own data nodes.
pub const ROOT_MARKER: u32 = 0;

/// 32-byte event code; the hash of the code string from the model.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EvtCode(pub [u8; 32]);

impl EvtCode {
    pub const ZERO: EvtCode = EvtCode([0; 32]);

    pub fn of(code: &str) -> Self {
        EvtCode(Sha256::digest(code.as_bytes()).into())
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 32]
    }

    pub fn to_hex(&self) -> String {
        format!("0x{}", hex::encode(self.0))
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let bytes = hex::decode(s.strip_prefix("0x").unwrap_or(s)).ok()?;
        Some(EvtCode(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for EvtCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            f.write_str("EvtCode(0)")
        } else {
            write!(f, "EvtCode({}…)", &hex::encode(self.0)[..8])
        }
    }
}

impl Serialize for EvtCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if s.is_human_readable() {
            s.serialize_str(&self.to_hex())
        } else {
            self.0.serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for EvtCode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        if d.is_human_readable() {
            let s = String::deserialize(d)?;
            EvtCode::from_hex(&s).ok_or_else(|| serde::de::Error::custom("bad event code"))
        } else {
            Ok(EvtCode(<[u8; 32]>::deserialize(d)?))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementEntry {
    pub e_ind: u32,
    pub pre_c: EdgeSet,
    pub post_c: EdgeSet,
    pub type_info: TypeInfo,
    pub evt_code: EvtCode,
    pub attached_to: Option<u32>,
    pub count_inst: u32,
}

/// Arguments of [`set_element`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetElement {
    pub e_ind: u32,
    pub pre_c: EdgeSet,
    pub post_c: EdgeSet,
    pub type_info: TypeInfo,
    pub evt_code: EvtCode,
    pub attached_to: Option<u32>,
    pub count_inst: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNode {
    /// Account allowed to update the node.
    pub admin: LedgerAddress,
    pub elements: BTreeMap<u32, ElementEntry>,
    pub children: BTreeMap<u32, LedgerAddress>,
    pub factories: BTreeMap<u32, LedgerAddress>,
    pub event_list: Vec<u32>,
    pub init_element: u32,
}

impl FlowNode {
    pub fn new(admin: LedgerAddress) -> Self {
        FlowNode {
            admin,
            elements: BTreeMap::new(),
            children: BTreeMap::new(),
            factories: BTreeMap::new(),
            event_list: Vec::new(),
            init_element: 0,
        }
    }

    pub fn find(&self, e_ind: u32) -> (EdgeSet, EdgeSet, TypeInfo) {
        self.elements
            .get(&e_ind)
            .map(|e| (e.pre_c, e.post_c, e.type_info))
            .unwrap_or((EdgeSet::EMPTY, EdgeSet::EMPTY, TypeInfo::ZERO))
    }

    /// Elements whose `preC` shares an edge with `e_ind`'s `postC`, ascending.
    pub fn out_elements(&self, e_ind: u32) -> Vec<u32> {
        let Some(src) = self.elements.get(&e_ind) else {
            return Vec::new();
        };
        self.elements
            .values()
            .filter(|e| e.pre_c.intersects(&src.post_c))
            .map(|e| e.e_ind)
            .collect()
    }

    fn catching_events(&self) -> Vec<u32> {
        self.elements
            .values()
            .filter(|e| e.type_info.is_catching())
            .map(|e| e.e_ind)
            .collect()
    }

    fn start_element(&self) -> u32 {
        self.elements
            .values()
            .find(|e| e.type_info.is_flow_catch() && e.pre_c.is_empty())
            .map(|e| e.e_ind)
            .unwrap_or(0)
    }
}

pub(crate) fn node<'a>(exec: &'a Exec<'_>) -> Result<&'a FlowNode, Revert> {
    match exec.instance(&exec.this())? {
        Instance::Flow(f) => Ok(f),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

fn node_mut<'a>(exec: &'a mut Exec<'_>) -> Result<&'a mut FlowNode, Revert> {
    let this = exec.this();
    match exec.instance_mut(&this)? {
        Instance::Flow(f) => Ok(f),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

fn require_admin(exec: &Exec<'_>) -> Result<(), Revert> {
    let admin = node(exec)?.admin;
    ensure(exec.sender() == admin, "UNAUTHORIZED")
}

// ---- mutators -------------------------------------------------------------

pub fn set_element(exec: &mut Exec<'_>, args: SetElement) -> Result<(), Revert> {
    require_admin(exec)?;
    ensure(args.e_ind != ROOT_MARKER && args.e_ind < WIDTH, "BAD_INDEX")?;
    ensure(args.type_info.is_valid(), "BAD_TYPEINFO")?;
    ensure(args.count_inst >= 1, "BAD_COUNT")?;
    if let Some(target) = args.attached_to {
        let ok = node(exec)?
            .elements
            .get(&target)
            .is_some_and(|t| t.type_info.is_subprocess_like());
        ensure(ok, "BAD_ATTACH")?;
    }
    let e_ind = args.e_ind;
    let type_info = args.type_info;
    let has_code = !args.evt_code.is_zero();
    let n = node_mut(exec)?;
    n.elements.insert(
        e_ind,
        ElementEntry {
            e_ind,
            pre_c: args.pre_c,
            post_c: args.post_c,
            type_info: args.type_info,
            evt_code: args.evt_code,
            attached_to: args.attached_to,
            count_inst: args.count_inst,
        },
    );
    let events = n.catching_events();
    let list_changed = events != n.event_list;
    n.event_list = events;
    let init = n.start_element();
    let init_changed = init != n.init_element;
    n.init_element = init;
    // preC, postC, packed (typeInfo, attachedTo, countInst)
    let mut writes = 3;
    writes += u64::from(has_code) + u64::from(list_changed) + u64::from(init_changed);
    exec.write_slots(writes);
    exec.emit(
        "ElementRegistered",
        vec![
            ("eInd".into(), e_ind.to_string()),
            ("typeInfo".into(), type_info.bits().to_string()),
        ],
    );
    Ok(())
}

pub fn link_subprocess(
    exec: &mut Exec<'_>,
    e_ind: u32,
    child: LedgerAddress,
    attached_events: &[u32],
    count_inst: u32,
) -> Result<(), Revert> {
    require_admin(exec)?;
    {
        let n = node(exec)?;
        let entry = n
            .elements
            .get(&e_ind)
            .ok_or_else(|| Revert::new("NOT_FOUND"))?;
        ensure(entry.type_info.is_subprocess_like(), "BAD_KIND")?;
        for ev in attached_events {
            let ok = n
                .elements
                .get(ev)
                .is_some_and(|x| x.type_info.is_boundary() || x.type_info.is_event_sub_start());
            ensure(ok, "BAD_ATTACH")?;
        }
    }
    ensure(count_inst >= 1, "BAD_COUNT")?;
    ensure(
        matches!(exec.instance(&child), Ok(Instance::Flow(_))),
        "BAD_CHILD",
    )?;
    let n = node_mut(exec)?;
    n.children.insert(e_ind, child);
    if let Some(entry) = n.elements.get_mut(&e_ind) {
        entry.count_inst = count_inst;
    }
    for ev in attached_events {
        if let Some(entry) = n.elements.get_mut(ev) {
            entry.attached_to = Some(e_ind);
        }
    }
    exec.write_slots(2 + attached_events.len() as u64);
    exec.emit(
        "SubprocessLinked",
        vec![
            ("eInd".into(), e_ind.to_string()),
            ("child".into(), child.to_string()),
        ],
    );
    Ok(())
}

pub fn set_factory(exec: &mut Exec<'_>, e_ind: u32, factory: LedgerAddress) -> Result<(), Revert> {
    require_admin(exec)?;
    if e_ind != ROOT_MARKER {
        let entry = node(exec)?
            .elements
            .get(&e_ind)
            .ok_or_else(|| Revert::new("NOT_FOUND"))?;
        ensure(entry.type_info.is_subprocess_like(), "BAD_KIND")?;
    }
    ensure(
        matches!(exec.instance(&factory), Ok(Instance::Factory(_))),
        "BAD_FACTORY",
    )?;
    node_mut(exec)?.factories.insert(e_ind, factory);
    exec.write_slots(1);
    exec.emit(
        "FactorySet",
        vec![
            ("eInd".into(), e_ind.to_string()),
            ("factory".into(), factory.to_string()),
        ],
    );
    Ok(())
}

// ---- readers --------------------------------------------------------------

fn read<T>(exec: &mut Exec<'_>, slots: u64, f: impl FnOnce(&FlowNode) -> T) -> Result<T, Revert> {
    let out = f(node(exec)?);
    exec.read_slots(slots);
    Ok(out)
}

pub fn find(exec: &mut Exec<'_>, e_ind: u32) -> Result<(EdgeSet, EdgeSet, TypeInfo), Revert> {
    read(exec, 3, |n| n.find(e_ind))
}

pub fn get_type_info(exec: &mut Exec<'_>, e_ind: u32) -> Result<TypeInfo, Revert> {
    read(exec, 1, |n| n.find(e_ind).2)
}

pub fn get_pre_c(exec: &mut Exec<'_>, e_ind: u32) -> Result<EdgeSet, Revert> {
    read(exec, 1, |n| n.find(e_ind).0)
}

pub fn get_post_c(exec: &mut Exec<'_>, e_ind: u32) -> Result<EdgeSet, Revert> {
    read(exec, 1, |n| n.find(e_ind).1)
}

pub fn get_attached_to(exec: &mut Exec<'_>, e_ind: u32) -> Result<Option<u32>, Revert> {
    read(exec, 1, |n| {
        n.elements.get(&e_ind).and_then(|e| e.attached_to)
    })
}

pub fn get_event_list(exec: &mut Exec<'_>) -> Result<Vec<u32>, Revert> {
    let len = node(exec)?.event_list.len() as u64;
    read(exec, len.max(1), |n| n.event_list.clone())
}

pub fn get_evt_code(exec: &mut Exec<'_>, e_ind: u32) -> Result<EvtCode, Revert> {
    read(exec, 1, |n| {
        n.elements
            .get(&e_ind)
            .map(|e| e.evt_code)
            .unwrap_or(EvtCode::ZERO)
    })
}

pub fn get_child_flow(exec: &mut Exec<'_>, e_ind: u32) -> Result<LedgerAddress, Revert> {
    read(exec, 1, |n| {
        n.children
            .get(&e_ind)
            .copied()
            .unwrap_or(LedgerAddress::ZERO)
    })
}

pub fn get_factory(exec: &mut Exec<'_>, e_ind: u32) -> Result<LedgerAddress, Revert> {
    read(exec, 1, |n| {
        n.factories
            .get(&e_ind)
            .copied()
            .unwrap_or(LedgerAddress::ZERO)
    })
}

pub fn get_init_element(exec: &mut Exec<'_>) -> Result<u32, Revert> {
    read(exec, 1, |n| n.init_element)
}

pub fn get_count_inst(exec: &mut Exec<'_>, e_ind: u32) -> Result<u32, Revert> {
    read(exec, 1, |n| {
        n.elements.get(&e_ind).map(|e| e.count_inst).unwrap_or(0)
    })
}

pub fn out_elements(exec: &mut Exec<'_>, e_ind: u32) -> Result<Vec<u32>, Revert> {
    let len = node(exec)?.elements.len() as u64;
    read(exec, len.max(1), |n| n.out_elements(e_ind))
}

/// Whole element table; one read per element.
pub fn elements(exec: &mut Exec<'_>) -> Result<BTreeMap<u32, ElementEntry>, Revert> {
    let len = node(exec)?.elements.len() as u64;
    read(exec, len.max(1), |n| n.elements.clone())
}

/// Caller-side handle issuing nested calls into a flow node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowRef(pub LedgerAddress);

impl FlowRef {
    pub fn find(self, exec: &mut Exec<'_>, e: u32) -> Result<(EdgeSet, EdgeSet, TypeInfo), Revert> {
        exec.call(self.0, |x| find(x, e))
    }
    pub fn type_info(self, exec: &mut Exec<'_>, e: u32) -> Result<TypeInfo, Revert> {
        exec.call(self.0, |x| get_type_info(x, e))
    }
    pub fn post_c(self, exec: &mut Exec<'_>, e: u32) -> Result<EdgeSet, Revert> {
        exec.call(self.0, |x| get_post_c(x, e))
    }
    pub fn attached_to(self, exec: &mut Exec<'_>, e: u32) -> Result<Option<u32>, Revert> {
        exec.call(self.0, |x| get_attached_to(x, e))
    }
    pub fn event_list(self, exec: &mut Exec<'_>) -> Result<Vec<u32>, Revert> {
        exec.call(self.0, get_event_list)
    }
    pub fn evt_code(self, exec: &mut Exec<'_>, e: u32) -> Result<EvtCode, Revert> {
        exec.call(self.0, |x| get_evt_code(x, e))
    }
    pub fn child_flow(self, exec: &mut Exec<'_>, e: u32) -> Result<LedgerAddress, Revert> {
        exec.call(self.0, |x| get_child_flow(x, e))
    }
    pub fn factory(self, exec: &mut Exec<'_>, e: u32) -> Result<LedgerAddress, Revert> {
        exec.call(self.0, |x| get_factory(x, e))
    }
    pub fn init_element(self, exec: &mut Exec<'_>) -> Result<u32, Revert> {
        exec.call(self.0, get_init_element)
    }
    pub fn count_inst(self, exec: &mut Exec<'_>, e: u32) -> Result<u32, Revert> {
        exec.call(self.0, |x| get_count_inst(x, e))
    }
    pub fn out_elements(self, exec: &mut Exec<'_>, e: u32) -> Result<Vec<u32>, Revert> {
        exec.call(self.0, |x| out_elements(x, e))
    }
    pub fn elements(self, exec: &mut Exec<'_>) -> Result<BTreeMap<u32, ElementEntry>, Revert> {
        exec.call(self.0, elements)
    }
}
