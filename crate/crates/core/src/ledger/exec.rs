use std::collections::BTreeMap;

use super::{AccountId, CostModel, Instance, InstanceKind, LedgerAddress, Revert, Usage, World};

/// Maximum nesting of instance-to-instance calls within one transaction.
pub const MAX_CALL_DEPTH: u32 = 200;

/// Identity of the currently executing call frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallContext {
    /// Instance whose code is running.
    pub this: LedgerAddress,
    /// Immediate caller: the external account's address at depth 0,
    /// otherwise the calling instance.
    pub sender: LedgerAddress,
    pub origin: AccountId,
    pub depth: u32,
}

pub(crate) struct PendingEvent {
    pub emitter: LedgerAddress,
    pub name: String,
    pub fields: Vec<(String, String)>,
}

/// Mutable view of the world inside one transaction.
///
/// Every instance touched mutably is journaled on first access so the
/// ledger can restore it when the transaction reverts.
pub struct Exec<'w> {
    world: &'w mut World,
    cost: CostModel,
    journal: BTreeMap<LedgerAddress, Option<Instance>>,
    nonce_journal: BTreeMap<LedgerAddress, Option<u64>>,
    frames: Vec<CallContext>,
    pub(crate) events: Vec<PendingEvent>,
    pub(crate) usage: Usage,
    /// Scratch counter for the interpreter's per-transaction dequeue budget.
    pub(crate) dequeues: u32,
}

impl<'w> Exec<'w> {
    pub(crate) fn new(world: &'w mut World, cost: CostModel, top: CallContext) -> Self {
        Exec {
            world,
            cost,
            journal: BTreeMap::new(),
            nonce_journal: BTreeMap::new(),
            frames: vec![top],
            events: Vec::new(),
            usage: Usage::default(),
            dequeues: 0,
        }
    }

    fn frame(&self) -> &CallContext {
        self.frames.last().expect("exec always has a frame")
    }

    pub fn context(&self) -> &CallContext {
        self.frame()
    }

    pub fn this(&self) -> LedgerAddress {
        self.frame().this
    }

    pub fn sender(&self) -> LedgerAddress {
        self.frame().sender
    }

    pub fn origin(&self) -> &AccountId {
        &self.frame().origin
    }

    pub fn depth(&self) -> u32 {
        self.frame().depth
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn usage(&self) -> &Usage {
        &self.usage
    }

    pub(crate) fn charge_call(&mut self) {
        self.usage.calls += 1;
        self.usage.cost += self.cost.call_base;
    }

    pub fn read_slots(&mut self, n: u64) {
        self.usage.reads += n;
        self.usage.cost += n * self.cost.storage_read;
    }

    pub fn write_slots(&mut self, n: u64) {
        self.usage.writes += n;
        self.usage.cost += n * self.cost.storage_write;
    }

    pub fn exists(&self, addr: &LedgerAddress) -> bool {
        self.world.instances.contains_key(addr)
    }

    /// Runs `f` as a nested call from the current instance into `to`.
    pub fn call<T>(
        &mut self,
        to: LedgerAddress,
        f: impl FnOnce(&mut Self) -> Result<T, Revert>,
    ) -> Result<T, Revert> {
        let depth = self.depth() + 1;
        if depth > MAX_CALL_DEPTH {
            return Err(Revert::new("DEPTH"));
        }
        self.charge_call();
        if !self.exists(&to) {
            return Err(Revert::new("NO_INSTANCE"));
        }
        let frame = CallContext {
            this: to,
            sender: self.this(),
            origin: self.origin().clone(),
            depth,
        };
        self.frames.push(frame);
        let out = f(self);
        self.frames.pop();
        out
    }

    pub fn instance(&self, addr: &LedgerAddress) -> Result<&Instance, Revert> {
        self.world
            .instances
            .get(addr)
            .ok_or_else(|| Revert::new("NO_INSTANCE"))
    }

    pub fn instance_mut(&mut self, addr: &LedgerAddress) -> Result<&mut Instance, Revert> {
        if !self.world.instances.contains_key(addr) {
            return Err(Revert::new("NO_INSTANCE"));
        }
        if !self.journal.contains_key(addr) {
            let original = self.world.instances.get(addr).cloned();
            self.journal.insert(*addr, original);
        }
        Ok(self.world.instances.get_mut(addr).expect("checked above"))
    }

    /// Deploys `instance` with the current instance (or account, at depth 0)
    /// as deployer. Charges `deployBase + deployPerByte * init_len`.
    pub fn deploy(
        &mut self,
        kind: InstanceKind,
        init_len: usize,
        instance: Instance,
    ) -> Result<LedgerAddress, Revert> {
        debug_assert_eq!(instance.kind(), kind);
        self.usage.deploys += 1;
        self.usage.deploy_bytes += init_len as u64;
        self.usage.cost += self.cost.deploy_base + self.cost.deploy_per_byte * init_len as u64;
        let deployer = self.this();
        let addr = loop {
            let nonce = self.bump_nonce(deployer);
            let candidate = LedgerAddress::derive(&deployer, nonce);
            if !candidate.is_zero() && !self.world.instances.contains_key(&candidate) {
                break candidate;
            }
        };
        self.journal.entry(addr).or_insert(None);
        self.world.instances.insert(addr, instance);
        Ok(addr)
    }

    fn bump_nonce(&mut self, who: LedgerAddress) -> u64 {
        let current = self.world.nonces.get(&who).copied();
        self.nonce_journal.entry(who).or_insert(current);
        let n = current.unwrap_or(0);
        self.world.nonces.insert(who, n + 1);
        n
    }

    pub fn emit(&mut self, name: &str, fields: Vec<(String, String)>) {
        self.usage.events += 1;
        self.usage.cost += self.cost.event_emit;
        self.events.push(PendingEvent {
            emitter: self.this(),
            name: name.to_string(),
            fields,
        });
    }

    pub(crate) fn rollback(self) {
        for (addr, original) in self.journal {
            match original {
                Some(inst) => {
                    self.world.instances.insert(addr, inst);
                }
                None => {
                    self.world.instances.remove(&addr);
                }
            }
        }
        for (addr, original) in self.nonce_journal {
            match original {
                Some(n) => {
                    self.world.nonces.insert(addr, n);
                }
                None => {
                    self.world.nonces.remove(&addr);
                }
            }
        }
    }
}

/// `require`-style guard.
pub fn ensure(cond: bool, reason: &str) -> Result<(), Revert> {
    if cond {
        Ok(())
    } else {
        Err(Revert::new(reason))
    }
}
