//! BPMN 2.0 XML subset → internal model → registration plan.
//!
//! Supported: none/message/error/escalation/signal/terminate events (start,
//! intermediate throw/catch, boundary on sub-processes, end), event
//! sub-processes, user/service/script/plain tasks, exclusive/parallel/
//! inclusive gateways, embedded sub-processes, call activities to processes
//! of the same file, and multi-instance markers with a fixed cardinality.
//!
//! Annotations live in `documentation` elements: `type name;` declarations
//! on processes and sub-processes, `(exports) : (imports) -> { ... }` on
//! tasks plus an optional `role: <name>` line, guard expressions on
//! sequence flows (or in `conditionExpression`).

mod parse;
mod plan;
pub mod repository;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits::EdgeSet;
use crate::data::{CheckIn, DataTemplate, GatewayScript};
use crate::flow::EvtCode;
use crate::script::{Annotation, Expr, Param, Program, ScriptError};
use crate::typeinfo::{ElementKind, TypeInfo};

pub use parse::{canonical_xml, model_hash, parse};
pub use plan::{
    apply_plan, emit_plan, ApplyError, PlanOp, Registration, RegistrationPlan, StepReceipt,
};

/// Golden fixture: the running example with two call activities and an
/// error boundary event.
pub const FIG1_XML: &str = include_str!("../../fixtures/fig1.bpmn");

/// Largest element or edge index a process may use.
pub const MAX_INDEX: u32 = crate::bits::WIDTH - 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("UNSUPPORTED: {what} ({id})")]
    Unsupported { id: String, what: String },
    #[error("TOO_LARGE: {id} has {count} {what} (max {max})", max = MAX_INDEX)]
    TooLarge {
        id: String,
        what: &'static str,
        count: usize,
    },
    #[error("annotation error in {id}: {error}")]
    Annotation { id: String, error: ScriptError },
    #[error("scope error in {id}: {error}")]
    Scope { id: String, error: ScriptError },
    #[error("invalid model at {id}: {msg}")]
    Invalid { id: String, msg: String },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::Xml(_) => "MALFORMED",
            ParseError::Unsupported { .. } => "UNSUPPORTED",
            ParseError::TooLarge { .. } => "TOO_LARGE",
            ParseError::Annotation { .. } => "ANNOTATION",
            ParseError::Scope { .. } => "SCOPE",
            ParseError::Invalid { .. } => "INVALID",
        }
    }

    /// Id of the offending element, when there is one.
    pub fn element_id(&self) -> Option<&str> {
        match self {
            ParseError::Xml(_) => None,
            ParseError::Unsupported { id, .. }
            | ParseError::TooLarge { id, .. }
            | ParseError::Annotation { id, .. }
            | ParseError::Scope { id, .. }
            | ParseError::Invalid { id, .. } => Some(id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedEdge {
    pub id: String,
    pub index: u32,
    pub source: u32,
    pub target: u32,
    pub guard: Option<Expr>,
    pub is_default: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedElement {
    pub id: String,
    pub name: Option<String>,
    pub e_ind: u32,
    pub kind: ElementKind,
    pub pre_c: EdgeSet,
    pub post_c: EdgeSet,
    /// Code string of an event definition (error code, message name, ...).
    pub code: Option<String>,
    pub attached_to: Option<u32>,
    pub count_inst: u32,
    /// Process holding the body of a sub-process or call activity.
    pub child: Option<usize>,
    /// Boundary events and event-sub-process triggers bound to this element.
    pub attached_events: Vec<u32>,
    pub role: Option<String>,
    pub annotation: Option<Annotation>,
    pub script: Option<Program>,
}

impl ParsedElement {
    pub fn type_info(&self) -> TypeInfo {
        TypeInfo::encode(self.kind)
    }

    pub fn evt_code(&self) -> EvtCode {
        self.code
            .as_deref()
            .map(EvtCode::of)
            .unwrap_or(EvtCode::ZERO)
    }
}

/// One flow scope: a process, embedded sub-process or event sub-process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedProcess {
    pub id: String,
    pub name: Option<String>,
    pub vars: Vec<Param>,
    /// Ascending by index.
    pub elements: Vec<ParsedElement>,
    /// Ascending by index.
    pub edges: Vec<ParsedEdge>,
    pub element_ids: BTreeMap<String, u32>,
    pub edge_ids: BTreeMap<String, u32>,
}

impl ParsedProcess {
    pub fn element(&self, e_ind: u32) -> Option<&ParsedElement> {
        self.elements.iter().find(|e| e.e_ind == e_ind)
    }

    pub fn by_id(&self, id: &str) -> Option<&ParsedElement> {
        self.element_ids.get(id).and_then(|e| self.element(*e))
    }

    pub fn index_of(&self, id: &str) -> Option<u32> {
        self.element_ids.get(id).copied()
    }

    pub fn edge_of(&self, id: &str) -> Option<u32> {
        self.edge_ids.get(id).copied()
    }

    /// Data-node template: declarations, scripts, guards, check-in/out.
    pub fn template(&self) -> DataTemplate {
        let mut t = DataTemplate {
            vars: self.vars.clone(),
            ..Default::default()
        };
        for el in &self.elements {
            let ti = el.type_info();
            if ti.is_script_task() {
                t.scripts
                    .insert(el.e_ind, el.script.clone().unwrap_or_default());
            }
            if ti.is_exclusive_split() || ti.is_inclusive_split() {
                let outgoing: Vec<&ParsedEdge> =
                    self.edges.iter().filter(|x| x.source == el.e_ind).collect();
                let default = outgoing.iter().find(|x| x.is_default).map(|x| x.index);
                let guards = outgoing
                    .iter()
                    .filter(|x| !x.is_default)
                    .map(|x| {
                        let guard = x
                            .guard
                            .clone()
                            .unwrap_or(Expr::Lit(crate::script::Value::Bool(true)));
                        (x.index, guard)
                    })
                    .collect();
                t.gateways.insert(
                    el.e_ind,
                    GatewayScript {
                        inclusive: ti.is_inclusive_split(),
                        guards,
                        default,
                    },
                );
            }
            if ti.is_external() {
                let a = el.annotation.clone().unwrap_or_default();
                t.check_ins.insert(
                    el.e_ind,
                    CheckIn {
                        params: a.imports.clone(),
                        body: a.body.clone(),
                    },
                );
                if !a.exports.is_empty() {
                    t.check_outs.insert(el.e_ind, a.exports);
                }
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedModel {
    pub model_hash: String,
    /// Index 0 is the root process.
    pub processes: Vec<ParsedProcess>,
    pub roles: Vec<String>,
}

impl ParsedModel {
    pub fn root(&self) -> &ParsedProcess {
        &self.processes[0]
    }

    pub fn element_count(&self) -> usize {
        self.processes.iter().map(|p| p.elements.len()).sum()
    }
}
