use std::collections::BTreeMap;

use flowledger_core::bpmn::{apply_plan, emit_plan, parse, ParsedModel, Registration};
use flowledger_core::inspect::{case_view, CaseView, WorkItem};
use flowledger_core::ledger::{AccountId, Ledger, LedgerAddress, Revert};
use flowledger_core::ops::{Operation, Output};
use flowledger_core::script::Value;

pub struct Engine {
    pub ledger: Ledger,
    pub admin: AccountId,
    pub interp: LedgerAddress,
}

impl Engine {
    pub fn new() -> Self {
        let ledger = Ledger::default();
        let admin = AccountId::new("admin");
        let interp = ledger
            .deploy(&admin, "interpreter", vec![])
            .into_result()
            .unwrap();
        Engine {
            ledger,
            admin,
            interp,
        }
    }

    pub fn register(&self, xml: &str) -> Deployed {
        let model = parse(xml).unwrap_or_else(|e| panic!("{e}\n{xml}"));
        let (reg, _) = apply_plan(
            &self.ledger,
            &self.admin,
            self.interp,
            &emit_plan(&model),
            None,
        )
        .unwrap();
        Deployed { model, reg }
    }

    pub fn start(&self, flow: LedgerAddress) -> LedgerAddress {
        self.try_start(&self.admin, flow).unwrap()
    }

    pub fn try_start(
        &self,
        from: &AccountId,
        flow: LedgerAddress,
    ) -> Result<LedgerAddress, Revert> {
        let out = self
            .ledger
            .call(from, self.interp, Operation::StartCase { flow })
            .into_result()?;
        Ok(out.address().expect("start returns the case"))
    }

    pub fn check_in(
        &self,
        actor: &AccountId,
        case: LedgerAddress,
        e_ind: u32,
        payload: &[(&str, Value)],
    ) -> Result<(), Revert> {
        let payload: BTreeMap<String, Value> = payload
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        self.ledger
            .call(actor, case, Operation::CheckIn { e_ind, payload })
            .into_result()
            .map(|_| ())
    }

    pub fn check_out(
        &self,
        actor: &AccountId,
        case: LedgerAddress,
        e_ind: u32,
    ) -> Result<Vec<Value>, Revert> {
        match self
            .ledger
            .query(actor, case, Operation::CheckOut { e_ind })?
        {
            Output::Values(v) => Ok(v.into_iter().map(|(_, x)| x).collect()),
            other => panic!("{other:?}"),
        }
    }

    pub fn view(&self, case: LedgerAddress) -> CaseView {
        case_view(&self.ledger, &case).expect("case exists")
    }
}

pub struct Deployed {
    pub model: ParsedModel,
    pub reg: Registration,
}

impl Deployed {
    pub fn root_flow(&self) -> LedgerAddress {
        self.reg.root_flow()
    }

    fn scope_of(&self, flow: &LedgerAddress) -> usize {
        self.reg
            .flows
            .iter()
            .position(|f| f == flow)
            .expect("flow of this model")
    }

    pub fn element_id(&self, flow: &LedgerAddress, e_ind: u32) -> String {
        let p = &self.model.processes[self.scope_of(flow)];
        p.element(e_ind)
            .map(|e| e.id.clone())
            .unwrap_or_else(|| format!("#{e_ind}"))
    }

    pub fn edge_id(&self, flow: &LedgerAddress, edge: u32) -> String {
        let p = &self.model.processes[self.scope_of(flow)];
        p.edges
            .iter()
            .find(|x| x.index == edge)
            .map(|x| x.id.clone())
            .unwrap_or_else(|| format!("#{edge}"))
    }

    /// Element ids of the enabled external tasks in the whole case tree.
    pub fn enabled_ids(&self, e: &Engine, case: LedgerAddress) -> Vec<String> {
        let mut ids: Vec<String> = self
            .work(e, case)
            .iter()
            .map(|(id, _)| id.clone())
            .collect();
        ids.sort();
        ids
    }

    /// Enabled work items with their element ids, sorted by id.
    pub fn work(&self, e: &Engine, case: LedgerAddress) -> Vec<(String, WorkItem)> {
        let mut out: Vec<(String, WorkItem)> = e
            .view(case)
            .worklist()
            .into_iter()
            .map(|w| {
                let flow = e.view(w.case).flow;
                (self.element_id(&flow, w.e_ind), w)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    pub fn item(&self, e: &Engine, case: LedgerAddress, id: &str) -> WorkItem {
        self.work(e, case)
            .into_iter()
            .find(|(x, _)| x == id)
            .unwrap_or_else(|| panic!("{id} not enabled"))
            .1
    }

    /// Root tokens as edge ids, sorted.
    pub fn root_tokens(&self, e: &Engine, case: LedgerAddress) -> Vec<String> {
        let v = e.view(case);
        let mut t: Vec<String> = v.tokens.iter().map(|x| self.edge_id(&v.flow, *x)).collect();
        t.sort();
        t
    }
}
