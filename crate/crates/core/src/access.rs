//! Role-based authorization for check-ins and check-outs.
//!
//! One instance per model: the admin declares roles and which element
//! requires which role; actors are bound to roles per root case.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ledger::{ensure, AccountId, Exec, Instance, LedgerAddress, Revert};

/// Constructor arguments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessInit {
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessControl {
    pub admin: LedgerAddress,
    pub roles: BTreeSet<String>,
    /// flow node → element → required role
    pub requirements: BTreeMap<LedgerAddress, BTreeMap<u32, String>>,
    /// root case → role → actor
    pub bindings: BTreeMap<LedgerAddress, BTreeMap<String, AccountId>>,
}

impl AccessControl {
    pub fn new(admin: LedgerAddress, init: AccessInit) -> Self {
        AccessControl {
            admin,
            roles: init.roles.into_iter().collect(),
            requirements: BTreeMap::new(),
            bindings: BTreeMap::new(),
        }
    }

    pub fn required_role(&self, flow: &LedgerAddress, e_ind: u32) -> Option<&str> {
        self.requirements
            .get(flow)
            .and_then(|m| m.get(&e_ind))
            .map(String::as_str)
    }

    pub fn holder(&self, case: &LedgerAddress, role: &str) -> Option<&AccountId> {
        self.bindings.get(case).and_then(|m| m.get(role))
    }

    pub fn allows(
        &self,
        case: &LedgerAddress,
        flow: &LedgerAddress,
        e_ind: u32,
        actor: &AccountId,
    ) -> bool {
        match self.required_role(flow, e_ind) {
            None => true,
            Some(role) => self.holder(case, role) == Some(actor),
        }
    }
}

fn node<'a>(exec: &'a Exec<'_>) -> Result<&'a AccessControl, Revert> {
    match exec.instance(&exec.this())? {
        Instance::Access(a) => Ok(a),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

fn node_mut<'a>(exec: &'a mut Exec<'_>) -> Result<&'a mut AccessControl, Revert> {
    let this = exec.this();
    match exec.instance_mut(&this)? {
        Instance::Access(a) => Ok(a),
        _ => Err(Revert::new("BAD_OPERATION")),
    }
}

fn require_admin(exec: &Exec<'_>) -> Result<(), Revert> {
    let admin = node(exec)?.admin;
    ensure(exec.sender() == admin, "UNAUTHORIZED")
}

pub fn define_role(exec: &mut Exec<'_>, role: &str) -> Result<(), Revert> {
    require_admin(exec)?;
    ensure(!role.is_empty(), "UNKNOWN_ROLE")?;
    if node_mut(exec)?.roles.insert(role.to_string()) {
        exec.write_slots(1);
    }
    Ok(())
}

pub fn require_role(
    exec: &mut Exec<'_>,
    flow: LedgerAddress,
    e_ind: u32,
    role: &str,
) -> Result<(), Revert> {
    require_admin(exec)?;
    ensure(node(exec)?.roles.contains(role), "UNKNOWN_ROLE")?;
    node_mut(exec)?
        .requirements
        .entry(flow)
        .or_default()
        .insert(e_ind, role.to_string());
    exec.write_slots(1);
    Ok(())
}

fn binding_changed(
    exec: &mut Exec<'_>,
    case: LedgerAddress,
    role: &str,
    actor: Option<&AccountId>,
) {
    exec.emit(
        "BindingChanged",
        vec![
            ("case".into(), case.to_string()),
            ("role".into(), role.to_string()),
            (
                "actor".into(),
                actor.map(|a| a.to_string()).unwrap_or_default(),
            ),
        ],
    );
}

/// Binds `actor` to `role` in `case`. Callable by the admin, by the actor
/// itself, or by the current holder handing the role over; a role held by
/// someone else is never overwritten.
pub fn bind(
    exec: &mut Exec<'_>,
    case: LedgerAddress,
    role: &str,
    actor: AccountId,
) -> Result<(), Revert> {
    let a = node(exec)?;
    ensure(a.roles.contains(role), "UNKNOWN_ROLE")?;
    let caller = exec.origin().clone();
    let holder = a.holder(&case, role).cloned();
    let is_admin = exec.sender() == a.admin;
    exec.read_slots(1);
    if let Some(h) = &holder {
        if *h == actor {
            return Ok(());
        }
        ensure(caller == *h, "ROLE_TAKEN")?;
    } else {
        ensure(is_admin || caller == actor, "UNAUTHORIZED")?;
    }
    node_mut(exec)?
        .bindings
        .entry(case)
        .or_default()
        .insert(role.to_string(), actor.clone());
    exec.write_slots(1);
    binding_changed(exec, case, role, Some(&actor));
    Ok(())
}

/// Clears a binding; allowed for the holder and the admin.
pub fn release(exec: &mut Exec<'_>, case: LedgerAddress, role: &str) -> Result<(), Revert> {
    let a = node(exec)?;
    ensure(a.roles.contains(role), "UNKNOWN_ROLE")?;
    let Some(holder) = a.holder(&case, role).cloned() else {
        return Ok(());
    };
    ensure(
        exec.sender() == a.admin || *exec.origin() == holder,
        "UNAUTHORIZED",
    )?;
    let n = node_mut(exec)?;
    if let Some(m) = n.bindings.get_mut(&case) {
        m.remove(role);
        if m.is_empty() {
            n.bindings.remove(&case);
        }
    }
    exec.write_slots(1);
    binding_changed(exec, case, role, None);
    Ok(())
}

pub fn can_perform(
    exec: &mut Exec<'_>,
    case: LedgerAddress,
    flow: LedgerAddress,
    e_ind: u32,
    actor: &AccountId,
) -> Result<bool, Revert> {
    let ok = node(exec)?.allows(&case, &flow, e_ind, actor);
    exec.read_slots(2);
    Ok(ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessRef(pub LedgerAddress);

impl AccessRef {
    pub fn can_perform(
        self,
        exec: &mut Exec<'_>,
        case: LedgerAddress,
        flow: LedgerAddress,
        e_ind: u32,
        actor: AccountId,
    ) -> Result<bool, Revert> {
        exec.call(self.0, |x| can_perform(x, case, flow, e_ind, &actor))
    }
}
