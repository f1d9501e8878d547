//! Deterministic in-process ledger.
//!
//! Hosts addressable instances, runs every operation as a transaction with
//! a single total order, meters cost per the [`CostModel`], and keeps an
//! append-only event log. A reverted transaction leaves every instance as
//! it was before the call.

mod address;
mod exec;

use std::collections::BTreeMap;
use std::path::Path;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

pub use address::{AccountId, BadAddress, LedgerAddress};
pub use exec::{ensure, CallContext, Exec, MAX_CALL_DEPTH};

use crate::access::AccessControl;
use crate::data::{DataNode, Factory};
use crate::flow::FlowNode;
use crate::interpreter::Interpreter;

pub type CostUnits = u64;

/// Reason string of a reverted transaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
#[error("reverted: {reason}")]
pub struct Revert {
    pub reason: String,
}

impl Revert {
    pub fn new(reason: impl Into<String>) -> Self {
        Revert {
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub deploy_base: CostUnits,
    pub deploy_per_byte: CostUnits,
    pub storage_write: CostUnits,
    pub storage_read: CostUnits,
    pub call_base: CostUnits,
    pub event_emit: CostUnits,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            deploy_base: 32_000,
            deploy_per_byte: 200,
            storage_write: 20_000,
            storage_read: 200,
            call_base: 700,
            event_emit: 375,
        }
    }
}

/// Metered resource counts of one transaction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub cost: CostUnits,
    pub calls: u64,
    pub reads: u64,
    pub writes: u64,
    pub events: u64,
    pub deploys: u64,
    pub deploy_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxStatus {
    Success,
    Reverted(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub emitter: LedgerAddress,
    pub name: String,
    pub fields: Vec<(String, String)>,
    pub tx: u64,
    pub index: u32,
}

impl LogEvent {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub seq: u64,
    pub from: AccountId,
    /// Target instance; for deployments, the created address (zero if the
    /// deployment reverted).
    pub to: LedgerAddress,
    pub operation: String,
    /// Canonical encoding of the operation arguments.
    pub args: Vec<u8>,
    pub cost: CostUnits,
    pub usage: Usage,
    pub status: TxStatus,
    pub events: Vec<LogEvent>,
}

impl Transaction {
    pub fn is_success(&self) -> bool {
        self.status == TxStatus::Success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstanceKind {
    Interpreter,
    FlowNode,
    DataNode,
    Factory,
    AccessControl,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 5] = [
        InstanceKind::Interpreter,
        InstanceKind::FlowNode,
        InstanceKind::DataNode,
        InstanceKind::Factory,
        InstanceKind::AccessControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Interpreter => "interpreter",
            InstanceKind::FlowNode => "flow-node",
            InstanceKind::DataNode => "data-node",
            InstanceKind::Factory => "factory",
            InstanceKind::AccessControl => "access-control",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instance {
    Interpreter(Interpreter),
    Flow(FlowNode),
    Data(DataNode),
    Factory(Factory),
    Access(AccessControl),
}

impl Instance {
    pub fn kind(&self) -> InstanceKind {
        match self {
            Instance::Interpreter(_) => InstanceKind::Interpreter,
            Instance::Flow(_) => InstanceKind::FlowNode,
            Instance::Data(_) => InstanceKind::DataNode,
            Instance::Factory(_) => InstanceKind::Factory,
            Instance::Access(_) => InstanceKind::AccessControl,
        }
    }
}

/// All instance state plus deployer nonces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub instances: BTreeMap<LedgerAddress, Instance>,
    pub nonces: BTreeMap<LedgerAddress, u64>,
}

/// Outcome of one transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Receipt<T> {
    pub seq: u64,
    pub cost: CostUnits,
    pub usage: Usage,
    pub outcome: Result<T, Revert>,
    pub events: Vec<LogEvent>,
}

impl<T> Receipt<T> {
    pub fn is_success(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn into_result(self) -> Result<T, Revert> {
        self.outcome
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Receipt<U> {
        Receipt {
            seq: self.seq,
            cost: self.cost,
            usage: self.usage,
            outcome: self.outcome.map(f),
            events: self.events,
        }
    }
}

struct Chain {
    world: World,
    txs: Vec<Transaction>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotBody {
    cost_model: CostModel,
    world: World,
    txs: Vec<Transaction>,
    log: Vec<LogEvent>,
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"FLDG";
pub const SNAPSHOT_VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a ledger snapshot (bad magic)")]
    BadMagic,
    #[error("unsupported snapshot version {0}")]
    Version(u16),
    #[error("corrupt snapshot: {0}")]
    Decode(#[from] bincode::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The ledger. Transactions are applied one at a time under a lock, so the
/// value can be shared across threads; the event log sits behind its own
/// lock so log readers do not wait on executing transactions.
pub struct Ledger {
    cost_model: CostModel,
    chain: Mutex<Chain>,
    log: RwLock<Vec<LogEvent>>,
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::new(CostModel::default())
    }
}

impl Ledger {
    pub fn new(cost_model: CostModel) -> Self {
        Ledger {
            cost_model,
            chain: Mutex::new(Chain {
                world: World::default(),
                txs: Vec::new(),
            }),
            log: RwLock::new(Vec::new()),
        }
    }

    pub fn cost_model(&self) -> CostModel {
        self.cost_model
    }

    /// Runs `f` as a transaction sent by `from` to `to`, recording it under
    /// `operation` with the canonical argument bytes `args`.
    pub fn transact<T>(
        &self,
        from: &AccountId,
        to: LedgerAddress,
        operation: &str,
        args: Vec<u8>,
        f: impl FnOnce(&mut Exec<'_>) -> Result<T, Revert>,
    ) -> Receipt<T> {
        let mut chain = self.chain.lock();
        let seq = chain.txs.len() as u64;
        let top = CallContext {
            this: to,
            sender: from.address(),
            origin: from.clone(),
            depth: 0,
        };
        let (outcome, usage, pending) = {
            let mut exec = Exec::new(&mut chain.world, self.cost_model, top);
            exec.charge_call();
            let outcome = if exec.exists(&to) {
                f(&mut exec)
            } else {
                Err(Revert::new("NO_INSTANCE"))
            };
            let usage = exec.usage;
            match outcome {
                Ok(v) => {
                    let pending = std::mem::take(&mut exec.events);
                    (Ok(v), usage, pending)
                }
                Err(e) => {
                    exec.rollback();
                    (Err(e), usage, Vec::new())
                }
            }
        };
        self.record(
            &mut chain, seq, from, to, operation, args, outcome, usage, pending,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn record<T>(
        &self,
        chain: &mut Chain,
        seq: u64,
        from: &AccountId,
        to: LedgerAddress,
        operation: &str,
        args: Vec<u8>,
        outcome: Result<T, Revert>,
        usage: Usage,
        pending: Vec<exec::PendingEvent>,
    ) -> Receipt<T> {
        let events: Vec<LogEvent> = pending
            .into_iter()
            .enumerate()
            .map(|(i, p)| LogEvent {
                emitter: p.emitter,
                name: p.name,
                fields: p.fields,
                tx: seq,
                index: i as u32,
            })
            .collect();
        let status = match &outcome {
            Ok(_) => TxStatus::Success,
            Err(r) => TxStatus::Reverted(r.reason.clone()),
        };
        chain.txs.push(Transaction {
            seq,
            from: from.clone(),
            to,
            operation: operation.to_string(),
            args,
            cost: usage.cost,
            usage,
            status,
            events: events.clone(),
        });
        if !events.is_empty() {
            self.log.write().extend(events.iter().cloned());
        }
        Receipt {
            seq,
            cost: usage.cost,
            usage,
            outcome,
            events,
        }
    }

    /// Deploys an instance of `kind` with constructor arguments `init`.
    /// Cost: `deployBase + deployPerByte * init.len()`.
    pub fn deploy(&self, from: &AccountId, kind: &str, init: Vec<u8>) -> Receipt<LedgerAddress> {
        let mut chain = self.chain.lock();
        let seq = chain.txs.len() as u64;
        let top = CallContext {
            this: from.address(),
            sender: from.address(),
            origin: from.clone(),
            depth: 0,
        };
        let operation = format!("deploy:{kind}");
        let (outcome, usage, pending) = {
            let mut exec = Exec::new(&mut chain.world, self.cost_model, top);
            let outcome = match InstanceKind::from_name(kind) {
                None => Err(Revert::new("UNKNOWN_KIND")),
                Some(k) => crate::ops::construct(&mut exec, k, &init)
                    .and_then(|inst| exec.deploy(k, init.len(), inst)),
            };
            let usage = exec.usage;
            match outcome {
                Ok(v) => {
                    let pending = std::mem::take(&mut exec.events);
                    (Ok(v), usage, pending)
                }
                Err(e) => {
                    exec.rollback();
                    (Err(e), usage, Vec::new())
                }
            }
        };
        let to = outcome.clone().unwrap_or(LedgerAddress::ZERO);
        self.record(
            &mut chain, seq, from, to, &operation, init, outcome, usage, pending,
        )
    }

    /// Executes `f` against the current state and discards every effect.
    /// Nothing is recorded; used for read-only queries.
    pub fn view<T>(
        &self,
        from: &AccountId,
        to: LedgerAddress,
        f: impl FnOnce(&mut Exec<'_>) -> Result<T, Revert>,
    ) -> Result<T, Revert> {
        let mut chain = self.chain.lock();
        let top = CallContext {
            this: to,
            sender: from.address(),
            origin: from.clone(),
            depth: 0,
        };
        let mut exec = Exec::new(&mut chain.world, self.cost_model, top);
        let out = if exec.exists(&to) {
            f(&mut exec)
        } else {
            Err(Revert::new("NO_INSTANCE"))
        };
        exec.rollback();
        out
    }

    /// Read-only access to instance state without metering.
    pub fn inspect<T>(&self, f: impl FnOnce(&World) -> T) -> T {
        f(&self.chain.lock().world)
    }

    pub fn instance(&self, addr: &LedgerAddress) -> Option<Instance> {
        self.chain.lock().world.instances.get(addr).cloned()
    }

    /// Events of every transaction with `tx >= since_tx`, in order.
    pub fn read_log(&self, since_tx: u64) -> Vec<LogEvent> {
        let log = self.log.read();
        let start = log.partition_point(|e| e.tx < since_tx);
        log[start..].to_vec()
    }

    pub fn log_len(&self) -> usize {
        self.log.read().len()
    }

    pub fn tx_count(&self) -> u64 {
        self.chain.lock().txs.len() as u64
    }

    pub fn transactions(&self) -> Vec<Transaction> {
        self.chain.lock().txs.clone()
    }

    pub fn transaction(&self, seq: u64) -> Option<Transaction> {
        self.chain.lock().txs.get(seq as usize).cloned()
    }

    pub fn world_clone(&self) -> World {
        self.chain.lock().world.clone()
    }

    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let chain = self.chain.lock();
        let log = self.log.read();
        let body = SnapshotBody {
            cost_model: self.cost_model,
            world: chain.world.clone(),
            txs: chain.txs.clone(),
            log: log.clone(),
        };
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend(bincode::serialize(&body).expect("in-memory serialization"));
        out
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        if bytes.len() < 6 || &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(SnapshotError::BadMagic);
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(version));
        }
        let body: SnapshotBody = bincode::deserialize(&bytes[6..])?;
        Ok(Ledger {
            cost_model: body.cost_model,
            chain: Mutex::new(Chain {
                world: body.world,
                txs: body.txs,
            }),
            log: RwLock::new(body.log),
        })
    }

    /// Writes the snapshot via a temporary file and rename.
    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        let bytes = self.to_snapshot_bytes();
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, bytes)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SnapshotError> {
        Self::from_snapshot_bytes(&std::fs::read(path)?)
    }
}
