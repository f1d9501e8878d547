use serde::{Deserialize, Serialize};

use super::ParsedModel;
use crate::access::AccessInit;
use crate::data::{DataTemplate, FactoryInit};
use crate::flow::{SetElement, ROOT_MARKER};
use crate::ledger::{AccountId, CostUnits, InstanceKind, Ledger, LedgerAddress, Receipt};
use crate::ops::{access_init_bytes, factory_init_bytes, Operation, Output};

/// One step of a registration. `scope` indexes [`ParsedModel::processes`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PlanOp {
    #[serde(rename_all = "camelCase")]
    DeployFlow {
        scope: usize,
        process_id: String,
    },
    #[serde(rename_all = "camelCase")]
    SetElement {
        scope: usize,
        element_id: String,
        args: SetElement,
    },
    #[serde(rename_all = "camelCase")]
    LinkSubprocess {
        scope: usize,
        e_ind: u32,
        child_scope: usize,
        attached_events: Vec<u32>,
        count_inst: u32,
    },
    DeployAccessControl {
        roles: Vec<String>,
    },
    #[serde(rename_all = "camelCase")]
    RequireRole {
        scope: usize,
        e_ind: u32,
        role: String,
    },
    DeployFactory {
        scope: usize,
        template: DataTemplate,
    },
    /// Binds the scope's own data factory under the root marker.
    SetFactory {
        scope: usize,
    },
}

impl PlanOp {
    pub fn name(&self) -> &'static str {
        match self {
            PlanOp::DeployFlow { .. } => "deployFlow",
            PlanOp::SetElement { .. } => "setElement",
            PlanOp::LinkSubprocess { .. } => "linkSubprocess",
            PlanOp::DeployAccessControl { .. } => "deployAccessControl",
            PlanOp::RequireRole { .. } => "requireRole",
            PlanOp::DeployFactory { .. } => "deployFactory",
            PlanOp::SetFactory { .. } => "setFactory",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistrationPlan {
    pub model_hash: String,
    pub scopes: usize,
    pub ops: Vec<PlanOp>,
}

impl RegistrationPlan {
    pub fn count(&self, name: &str) -> usize {
        self.ops.iter().filter(|o| o.name() == name).count()
    }
}

/// Orders the calls so that every reference precedes its use: flow nodes
/// first, hosts before their attached events, children before links.
pub fn emit_plan(model: &ParsedModel) -> RegistrationPlan {
    let mut ops = Vec::new();
    for (scope, p) in model.processes.iter().enumerate() {
        ops.push(PlanOp::DeployFlow {
            scope,
            process_id: p.id.clone(),
        });
    }
    for (scope, p) in model.processes.iter().enumerate() {
        let (attached, free): (Vec<_>, Vec<_>) =
            p.elements.iter().partition(|e| e.attached_to.is_some());
        for e in free.into_iter().chain(attached) {
            ops.push(PlanOp::SetElement {
                scope,
                element_id: e.id.clone(),
                args: SetElement {
                    e_ind: e.e_ind,
                    pre_c: e.pre_c,
                    post_c: e.post_c,
                    type_info: e.type_info(),
                    evt_code: e.evt_code(),
                    attached_to: e.attached_to,
                    count_inst: e.count_inst,
                },
            });
        }
    }
    for (scope, p) in model.processes.iter().enumerate() {
        for e in &p.elements {
            if let Some(child_scope) = e.child {
                ops.push(PlanOp::LinkSubprocess {
                    scope,
                    e_ind: e.e_ind,
                    child_scope,
                    attached_events: e.attached_events.clone(),
                    count_inst: e.count_inst,
                });
            }
        }
    }
    if !model.roles.is_empty() {
        ops.push(PlanOp::DeployAccessControl {
            roles: model.roles.clone(),
        });
        for (scope, p) in model.processes.iter().enumerate() {
            for e in &p.elements {
                if let Some(role) = &e.role {
                    ops.push(PlanOp::RequireRole {
                        scope,
                        e_ind: e.e_ind,
                        role: role.clone(),
                    });
                }
            }
        }
    }
    for (scope, p) in model.processes.iter().enumerate() {
        ops.push(PlanOp::DeployFactory {
            scope,
            template: p.template(),
        });
    }
    for scope in 0..model.processes.len() {
        ops.push(PlanOp::SetFactory { scope });
    }
    RegistrationPlan {
        model_hash: model.model_hash.clone(),
        scopes: model.processes.len(),
        ops,
    }
}

/// Addresses produced by applying a plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Registration {
    pub model_hash: String,
    pub interpreter: LedgerAddress,
    /// Per scope; index 0 is the root flow.
    pub flows: Vec<LedgerAddress>,
    pub factories: Vec<LedgerAddress>,
    pub access: Option<LedgerAddress>,
}

impl Registration {
    pub fn root_flow(&self) -> LedgerAddress {
        self.flows[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReceipt {
    pub step: usize,
    pub op: String,
    pub seq: u64,
    pub cost: CostUnits,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("step {step} ({op}) reverted: {reason}")]
pub struct ApplyError {
    pub step: usize,
    pub op: String,
    pub reason: String,
}

/// Executes `plan` from `admin`. With `existing`, deployments are skipped
/// and every update is re-sent to the recorded addresses, which leaves the
/// instances as they were.
pub fn apply_plan(
    ledger: &Ledger,
    admin: &AccountId,
    interpreter: LedgerAddress,
    plan: &RegistrationPlan,
    existing: Option<&Registration>,
) -> Result<(Registration, Vec<StepReceipt>), ApplyError> {
    let mut reg = existing.cloned().unwrap_or(Registration {
        model_hash: plan.model_hash.clone(),
        interpreter,
        flows: vec![LedgerAddress::ZERO; plan.scopes],
        factories: vec![LedgerAddress::ZERO; plan.scopes],
        access: None,
    });
    let replay = existing.is_some();
    let mut receipts = Vec::new();
    for (step, op) in plan.ops.iter().enumerate() {
        let fail = |reason: String| ApplyError {
            step,
            op: op.name().to_string(),
            reason,
        };
        let mut record = |r: Receipt<()>| -> Result<(), ApplyError> {
            receipts.push(StepReceipt {
                step,
                op: op.name().to_string(),
                seq: r.seq,
                cost: r.cost,
            });
            r.outcome.map_err(|e| fail(e.reason))
        };
        let called = |to, o| ledger.call(admin, to, o).map(|_: Output| ());
        match op {
            PlanOp::DeployFlow { scope, .. } => {
                if !replay {
                    let r = ledger.deploy(admin, InstanceKind::FlowNode.name(), vec![]);
                    if let Ok(a) = &r.outcome {
                        reg.flows[*scope] = *a;
                    }
                    record(r.map(|_| ()))?;
                }
            }
            PlanOp::SetElement { scope, args, .. } => {
                record(called(
                    reg.flows[*scope],
                    Operation::SetElement(args.clone()),
                ))?;
            }
            PlanOp::LinkSubprocess {
                scope,
                e_ind,
                child_scope,
                attached_events,
                count_inst,
            } => {
                let o = Operation::LinkSubprocess {
                    e_ind: *e_ind,
                    child: reg.flows[*child_scope],
                    attached_events: attached_events.clone(),
                    count_inst: *count_inst,
                };
                record(called(reg.flows[*scope], o))?;
            }
            PlanOp::DeployAccessControl { roles } => {
                if !replay {
                    let init = AccessInit {
                        roles: roles.clone(),
                    };
                    let r = ledger.deploy(
                        admin,
                        InstanceKind::AccessControl.name(),
                        access_init_bytes(&init),
                    );
                    if let Ok(a) = &r.outcome {
                        reg.access = Some(*a);
                    }
                    record(r.map(|_| ()))?;
                }
            }
            PlanOp::RequireRole { scope, e_ind, role } => {
                let access = reg.access.ok_or_else(|| fail("NO_ACCESS_CONTROL".into()))?;
                let o = Operation::RequireRole {
                    flow: reg.flows[*scope],
                    e_ind: *e_ind,
                    role: role.clone(),
                };
                record(called(access, o))?;
            }
            PlanOp::DeployFactory { scope, template } => {
                if !replay {
                    let init = FactoryInit {
                        flow: reg.flows[*scope],
                        interpreter: reg.interpreter,
                        access: reg.access.unwrap_or(LedgerAddress::ZERO),
                        template: template.clone(),
                    };
                    let r = ledger.deploy(
                        admin,
                        InstanceKind::Factory.name(),
                        factory_init_bytes(&init),
                    );
                    if let Ok(a) = &r.outcome {
                        reg.factories[*scope] = *a;
                    }
                    record(r.map(|_| ()))?;
                }
            }
            PlanOp::SetFactory { scope } => {
                let o = Operation::SetFactory {
                    e_ind: ROOT_MARKER,
                    factory: reg.factories[*scope],
                };
                record(called(reg.flows[*scope], o))?;
            }
        }
    }
    Ok((reg, receipts))
}
