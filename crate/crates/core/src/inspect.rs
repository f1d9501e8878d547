//! Read-only views over ledger state for clients: the case tree with its
//! tokens, variables and enabled external tasks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{DataNode, Factory};
use crate::flow::FlowNode;
use crate::interpreter::is_enabled;
use crate::ledger::{Instance, Ledger, LedgerAddress};
use crate::script::Param;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WorkItem {
    pub case: LedgerAddress,
    pub e_ind: u32,
    /// "user", "service" or "message".
    pub kind: String,
    pub role: Option<String>,
    pub exports: Vec<Param>,
    pub imports: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseView {
    pub address: LedgerAddress,
    pub flow: LedgerAddress,
    pub parent: Option<LedgerAddress>,
    pub index_in_parent: Option<u32>,
    pub tokens: Vec<u32>,
    pub running: Vec<u32>,
    pub completed: bool,
    pub vars: BTreeMap<String, serde_json::Value>,
    pub enabled: Vec<WorkItem>,
    /// Child cases by the index of the element that spawned them.
    pub children: BTreeMap<u32, Vec<CaseView>>,
}

impl CaseView {
    /// Enabled external tasks of this case and every descendant.
    pub fn worklist(&self) -> Vec<WorkItem> {
        let mut out = self.enabled.clone();
        for kids in self.children.values() {
            for k in kids {
                out.extend(k.worklist());
            }
        }
        out
    }
}

fn data_node(l: &Ledger, a: &LedgerAddress) -> Option<DataNode> {
    match l.instance(a)? {
        Instance::Data(d) => Some(d),
        _ => None,
    }
}

fn flow_node(l: &Ledger, a: &LedgerAddress) -> Option<FlowNode> {
    match l.instance(a)? {
        Instance::Flow(f) => Some(f),
        _ => None,
    }
}

fn factory(l: &Ledger, a: &LedgerAddress) -> Option<Factory> {
    match l.instance(a)? {
        Instance::Factory(f) => Some(f),
        _ => None,
    }
}

/// External tasks of `case` that accept a check-in right now.
pub fn enabled_tasks(l: &Ledger, case: &LedgerAddress) -> Vec<WorkItem> {
    let Some(d) = data_node(l, case) else {
        return Vec::new();
    };
    let Some(f) = flow_node(l, &d.flow) else {
        return Vec::new();
    };
    let template = factory(l, &d.factory)
        .map(|x| x.template)
        .unwrap_or_default();
    let access = match l.instance(&d.access) {
        Some(Instance::Access(a)) => Some(a),
        _ => None,
    };
    f.elements
        .values()
        .filter(|e| e.type_info.is_external() && is_enabled(&e.pre_c, e.type_info, &d.state))
        .map(|e| {
            let ti = e.type_info;
            let kind = if ti.is_user_task() {
                "user"
            } else if ti.is_service_task() {
                "service"
            } else {
                "message"
            };
            let check_in = template.check_ins.get(&e.e_ind);
            WorkItem {
                case: *case,
                e_ind: e.e_ind,
                kind: kind.to_string(),
                role: access
                    .as_ref()
                    .and_then(|a| a.required_role(&d.flow, e.e_ind))
                    .map(str::to_string),
                exports: template
                    .check_outs
                    .get(&e.e_ind)
                    .cloned()
                    .unwrap_or_default(),
                imports: check_in.map(|c| c.params.clone()).unwrap_or_default(),
            }
        })
        .collect()
}

/// Snapshot of the case tree rooted at `case`.
pub fn case_view(l: &Ledger, case: &LedgerAddress) -> Option<CaseView> {
    let d = data_node(l, case)?;
    let children = d
        .children
        .iter()
        .map(|(e, kids)| (*e, kids.iter().filter_map(|k| case_view(l, k)).collect()))
        .collect();
    Some(CaseView {
        address: *case,
        flow: d.flow,
        parent: d.parent,
        index_in_parent: d.index_in_parent,
        tokens: d.state.tokens.to_vec(),
        running: d.state.running.to_vec(),
        completed: d.state.is_completed(),
        vars: d
            .vars
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect(),
        enabled: enabled_tasks(l, case),
        children,
    })
}

/// Root cases started on `flow`, in creation order.
pub fn cases_of(l: &Ledger, flow: &LedgerAddress) -> Vec<LedgerAddress> {
    l.read_log(0)
        .into_iter()
        .filter(|e| e.name == "CaseCreated" && e.field("flow") == Some(flow.to_string().as_str()))
        .filter_map(|e| e.field("case").and_then(|c| c.parse().ok()))
        .collect()
}
