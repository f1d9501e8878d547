//! The running example driven through the engine and the token-game
//! oracle side by side.

use flowledger_core::bpmn::FIG1_XML;
use flowledger_core::ledger::{AccountId, LedgerAddress};
use flowledger_core::ops::Operation;
use flowledger_core::script::Value;
use flowledger_oracle::fig1::fig1;
use flowledger_oracle::Sim;

use super::common::{Deployed, Engine};
use super::{holds, same, Check};

pub struct Run {
    pub engine: Engine,
    pub dep: Deployed,
    pub case: LedgerAddress,
    pub sim: Sim,
    pub worker: AccountId,
}

impl Run {
    pub fn start() -> Result<Run, String> {
        let engine = Engine::new();
        let dep = engine.register(FIG1_XML);
        let case = engine.start(dep.root_flow());
        let worker = AccountId::new("worker");
        let access = dep.reg.access.ok_or("no access control")?;
        engine
            .ledger
            .call(
                &worker,
                access,
                Operation::Bind {
                    case,
                    role: "clerk".into(),
                    actor: worker.clone(),
                },
            )
            .into_result()
            .map_err(|r| format!("bind: {}", r.reason))?;
        let run = Run {
            sim: Sim::start(&fig1()),
            engine,
            dep,
            case,
            worker,
        };
        run.compare("start")?;
        Ok(run)
    }

    /// Exact agreement on enabled tasks, root tokens, root variables and
    /// completion.
    pub fn compare(&self, at: &str) -> Check {
        let (e, d, c) = (&self.engine, &self.dep, self.case);
        let mut want: Vec<String> = self.sim.enabled().into_iter().map(|t| t.id).collect();
        want.sort();
        same(&format!("{at}: enabled"), d.enabled_ids(e, c), want)?;
        same(
            &format!("{at}: root tokens"),
            d.root_tokens(e, c),
            self.sim.root_tokens(),
        )?;
        let view = e.view(c);
        for (k, v) in self.sim.root_vars() {
            same(
                &format!("{at}: {k}"),
                view.vars.get(&k).cloned(),
                Some(serde_json::Value::Bool(v)),
            )?;
        }
        same(
            &format!("{at}: completed"),
            view.completed,
            self.sim.is_completed(),
        )
    }

    /// Checks in `id` on both sides; a boolean input goes to the task's
    /// single import.
    pub fn step(&mut self, id: &str, input: Option<bool>) -> Check {
        let item = self.dep.item(&self.engine, self.case, id);
        let payload: Vec<(&str, Value)> = match (input, item.imports.first()) {
            (Some(b), Some(p)) => vec![(p.name.as_str(), Value::Bool(b))],
            _ => vec![],
        };
        self.engine
            .check_in(&self.worker, item.case, item.e_ind, &payload)
            .map_err(|r| format!("check-in {id}: {}", r.reason))?;
        let t = self
            .sim
            .enabled()
            .into_iter()
            .find(|t| t.id == id)
            .ok_or_else(|| format!("oracle: {id} not enabled"))?;
        self.sim.complete(&t, input)?;
        self.compare(&format!("after {id}"))
    }

    /// Element ids executed in the root case, in order.
    pub fn fired_in_root(&self) -> Vec<String> {
        let flow = self.dep.root_flow();
        let case = self.case.to_string();
        self.engine
            .ledger
            .read_log(0)
            .into_iter()
            .filter(|ev| ev.name == "ElementFired" && ev.field("case") == Some(case.as_str()))
            .map(|ev| {
                self.dep
                    .element_id(&flow, ev.field("eInd").unwrap().parse().unwrap())
            })
            .collect()
    }

    fn finished(&self) -> Check {
        let v = self.engine.view(self.case);
        holds("case completed", v.completed)?;
        same("tokens", v.tokens, vec![])?;
        same("running", v.running, vec![])
    }
}

/// T1(true), T2, S1 without error.
pub fn happy_path() -> Check {
    let mut r = Run::start()?;
    let (e, case) = (&r.engine, r.case);
    let root = r.dep.model.root();
    let t1 = root.index_of("T1").unwrap();
    let t2 = root.index_of("T2").unwrap();
    let g1 = root.index_of("G1").unwrap();

    let stranger = AccountId::new("stranger");
    let err = e
        .check_in(&stranger, case, t1, &[("_t1Field", Value::Bool(true))])
        .unwrap_err();
    same(
        "T1 by an unbound actor",
        err.reason.as_str(),
        "UNAUTHORIZED",
    )?;
    let err = e
        .check_in(&r.worker, case, t2, &[("_t2Field", Value::Bool(true))])
        .unwrap_err();
    same("T2 before T1", err.reason.as_str(), "NOT_ENABLED")?;
    let err = e.check_in(&r.worker, case, g1, &[]).unwrap_err();
    same("check-in on a gateway", err.reason.as_str(), "Not Found")?;
    let err = e
        .check_in(&r.worker, case, t1, &[("_t1Field", Value::Int(1))])
        .unwrap_err();
    same("ill-typed payload", err.reason.as_str(), "BAD_PAYLOAD")?;
    r.compare("after rejected check-ins")?;

    r.step("T1", Some(true))?;
    let out = r
        .engine
        .check_out(&r.worker, case, t2)
        .map_err(|x| x.reason)?;
    same("T2 check-out", out, vec![Value::Bool(true)])?;
    r.step("T2", Some(false))?;
    r.step("S1Task", Some(false))?;
    r.finished()
}

/// T1(false) takes the default flow through the script task.
pub fn exclusive_alternative() -> Check {
    let mut r = Run::start()?;
    r.step("T1", Some(false))?;
    r.step("S1Task", Some(false))?;
    r.finished()?;
    let fired = r.fired_in_root();
    let root = r.dep.model.root();
    let at = |id: &str| fired.iter().position(|x| x == id);
    holds("T2 never executed", at("T2").is_none())?;
    same(
        "T3 consumes",
        root.by_id("T3").unwrap().pre_c.iter().collect::<Vec<u32>>(),
        vec![root.edge_of("F4").unwrap()],
    )?;
    same(
        "T3 produces",
        root.by_id("T3")
            .unwrap()
            .post_c
            .iter()
            .collect::<Vec<u32>>(),
        vec![root.edge_of("F6").unwrap()],
    )?;
    match (at("G1"), at("T3"), at("G2")) {
        (Some(a), Some(b), Some(c)) if a < b && b < c => Ok(()),
        other => Err(format!(
            "G1, T3, G2 in order expected, positions {other:?} in {fired:?}"
        )),
    }
}

/// S1 fails, the boundary event routes to S2 and the case ends at E3.
pub fn exception_path() -> Check {
    let mut r = Run::start()?;
    r.step("T1", Some(true))?;
    r.step("T2", Some(true))?;
    r.step("S1Task", Some(true))?;
    let v = r.engine.view(r.case);
    let s1 = r.dep.model.root().index_of("S1").unwrap();
    let s2 = r.dep.model.root().index_of("S2").unwrap();
    same("running after the error", v.running.clone(), vec![s2])?;
    holds(
        "S1 killed",
        !v.children
            .get(&s1)
            .is_some_and(|k| k.iter().any(|c| !c.completed)),
    )?;
    r.step("S2Task", None)?;
    r.finished()?;
    let fired = r.fired_in_root();
    let has = |id: &str| fired.iter().any(|x| x == id);
    holds("case ends at E3", has("E3"))?;
    holds("S1's normal exit never taken", !has("E2"))
}
