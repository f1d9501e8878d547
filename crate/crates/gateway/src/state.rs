use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use flowledger_core::bpmn::repository::{ProcessRepository, StoredModel};
use flowledger_core::ledger::{AccountId, InstanceKind, Ledger, LedgerAddress, TxStatus};
use parking_lot::{Mutex, RwLock};
use tokio::sync::watch;

/// Where a flow node sits in a registered model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowOrigin {
    pub model_hash: String,
    pub scope: usize,
}

/// Everything the handlers share. Ledger access is serialized by the
/// ledger itself; the maps here only cache what registrations produced.
pub struct Gateway {
    pub ledger: Arc<Ledger>,
    /// Account that deploys and updates models.
    pub admin: AccountId,
    interpreter: Mutex<Option<LedgerAddress>>,
    models: RwLock<BTreeMap<String, StoredModel>>,
    flows: RwLock<BTreeMap<LedgerAddress, FlowOrigin>>,
    repo: Option<ProcessRepository>,
    snapshot: Option<PathBuf>,
    save_lock: Mutex<()>,
    commits: watch::Sender<u64>,
}

pub type Shared = Arc<Gateway>;

#[derive(Default)]
pub struct Options {
    pub admin: Option<String>,
    /// Ledger snapshot loaded at start and rewritten after each mutation.
    pub snapshot: Option<PathBuf>,
    /// Directory of compiled models, reloaded at start.
    pub repository: Option<PathBuf>,
}

impl Gateway {
    pub fn new(ledger: Ledger, opts: Options) -> anyhow::Result<Shared> {
        let interpreter = ledger
            .transactions()
            .into_iter()
            .find(|t| {
                t.operation == format!("deploy:{}", InstanceKind::Interpreter.name())
                    && t.status == TxStatus::Success
            })
            .map(|t| t.to);
        let repo = opts.repository.map(ProcessRepository::open).transpose()?;
        let mut models = BTreeMap::new();
        if let Some(r) = &repo {
            for hash in r.list()? {
                models.insert(hash.clone(), r.load(&hash)?);
            }
        }
        let (commits, _) = watch::channel(ledger.tx_count());
        let g = Gateway {
            ledger: Arc::new(ledger),
            admin: AccountId::new(opts.admin.unwrap_or_else(|| "admin".into())),
            interpreter: Mutex::new(interpreter),
            models: RwLock::new(BTreeMap::new()),
            flows: RwLock::new(BTreeMap::new()),
            repo,
            snapshot: opts.snapshot,
            save_lock: Mutex::new(()),
            commits,
        };
        for m in models.into_values() {
            g.put_model(m)?;
        }
        Ok(Arc::new(g))
    }

    /// A gateway over an empty in-memory ledger.
    pub fn in_memory() -> Shared {
        Gateway::new(Ledger::default(), Options::default()).expect("no files involved")
    }

    pub fn interpreter(&self) -> Option<LedgerAddress> {
        *self.interpreter.lock()
    }

    pub fn set_interpreter(&self, a: LedgerAddress) {
        *self.interpreter.lock() = Some(a);
    }

    pub fn model(&self, hash: &str) -> Option<StoredModel> {
        self.models.read().get(hash).cloned()
    }

    pub fn models(&self) -> Vec<StoredModel> {
        self.models.read().values().cloned().collect()
    }

    /// Caches `m` and persists it when a repository is configured.
    pub fn put_model(&self, m: StoredModel) -> anyhow::Result<()> {
        if let Some(reg) = &m.registration {
            let mut flows = self.flows.write();
            for (scope, f) in reg.flows.iter().enumerate() {
                flows.insert(
                    *f,
                    FlowOrigin {
                        model_hash: m.model_hash.clone(),
                        scope,
                    },
                );
            }
            if let Some(r) = &self.repo {
                r.save_registration(reg)?;
            }
        }
        self.models.write().insert(m.model_hash.clone(), m);
        Ok(())
    }

    pub fn repository(&self) -> Option<&ProcessRepository> {
        self.repo.as_ref()
    }

    pub fn origin(&self, flow: &LedgerAddress) -> Option<FlowOrigin> {
        self.flows.read().get(flow).cloned()
    }

    /// Element id of `e_ind` in `flow`, when the flow came from a model.
    pub fn element_id(&self, flow: &LedgerAddress, e_ind: u32) -> Option<String> {
        let o = self.origin(flow)?;
        let models = self.models.read();
        let map = models.get(&o.model_hash)?.index_maps.get(o.scope)?;
        map.elements
            .iter()
            .find(|(_, i)| **i == e_ind)
            .map(|(id, _)| id.clone())
    }

    /// Called after every request that sent transactions: wakes monitor
    /// readers and rewrites the snapshot.
    pub fn committed(&self) -> anyhow::Result<()> {
        self.commits.send_replace(self.ledger.tx_count());
        if let Some(p) = &self.snapshot {
            let _g = self.save_lock.lock();
            self.ledger.save(p)?;
        }
        Ok(())
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.commits.subscribe()
    }
}
