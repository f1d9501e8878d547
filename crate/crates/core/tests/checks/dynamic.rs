//! Rerouting a registered model while cases run: G2's outgoing flow is
//! moved from S1 to S2, for a case already past T1 and for a fresh one.

use flowledger_core::bits::EdgeSet;
use flowledger_core::bpmn::FIG1_XML;
use flowledger_core::flow::SetElement;
use flowledger_core::ledger::{AccountId, LedgerAddress};
use flowledger_core::ops::Operation;
use flowledger_core::script::Value;
use flowledger_oracle::fig1::fig1;
use flowledger_oracle::{Model, Sim};

use super::common::{Deployed, Engine};
use super::{same, Check};

/// Oracle model with the same change.
pub fn rerouted_model() -> Model {
    let mut m = fig1();
    let f7 = m.root.flows.iter_mut().find(|f| f.id == "F7").unwrap();
    f7.target = "S2".into();
    m
}

fn reroute(e: &Engine, d: &Deployed) -> Check {
    let root = d.model.root();
    let f7 = root.edge_of("F7").unwrap();
    let f9 = root.edge_of("F9").unwrap();
    let set = |id: &str, pre_c: EdgeSet| {
        let el = root.by_id(id).unwrap();
        let args = SetElement {
            e_ind: el.e_ind,
            pre_c,
            post_c: el.post_c,
            type_info: el.type_info(),
            evt_code: el.evt_code(),
            attached_to: el.attached_to,
            count_inst: el.count_inst,
        };
        e.ledger
            .call(&e.admin, d.root_flow(), Operation::SetElement(args))
            .into_result()
            .map(|_| ())
            .map_err(|r| format!("setElement {id}: {}", r.reason))
    };
    set("S1", EdgeSet::EMPTY)?;
    set("S2", EdgeSet::of([f7, f9]))
}

struct Case {
    addr: LedgerAddress,
    sim: Sim,
    name: &'static str,
}

fn bind(e: &Engine, d: &Deployed, case: LedgerAddress, who: &AccountId) -> Check {
    let op = Operation::Bind {
        case,
        role: "clerk".into(),
        actor: who.clone(),
    };
    e.ledger
        .call(who, d.reg.access.unwrap(), op)
        .into_result()
        .map(|_| ())
        .map_err(|r| r.reason)
}

fn compare(e: &Engine, d: &Deployed, c: &Case, at: &str) -> Check {
    let mut want: Vec<String> = c.sim.enabled().into_iter().map(|t| t.id).collect();
    want.sort();
    same(
        &format!("{} {at}: enabled", c.name),
        d.enabled_ids(e, c.addr),
        want,
    )?;
    same(
        &format!("{} {at}: root tokens", c.name),
        d.root_tokens(e, c.addr),
        c.sim.root_tokens(),
    )?;
    same(
        &format!("{} {at}: completed", c.name),
        e.view(c.addr).completed,
        c.sim.is_completed(),
    )
}

fn step(
    e: &Engine,
    d: &Deployed,
    c: &mut Case,
    who: &AccountId,
    id: &str,
    input: Option<bool>,
) -> Check {
    let item = d.item(e, c.addr, id);
    let payload: Vec<(&str, Value)> = match (input, item.imports.first()) {
        (Some(b), Some(p)) => vec![(p.name.as_str(), Value::Bool(b))],
        _ => vec![],
    };
    e.check_in(who, item.case, item.e_ind, &payload)
        .map_err(|r| format!("{}: check-in {id}: {}", c.name, r.reason))?;
    let t = c
        .sim
        .enabled()
        .into_iter()
        .find(|t| t.id == id)
        .ok_or(format!("oracle: {id}"))?;
    c.sim.complete(&t, input)?;
    compare(e, d, c, &format!("after {id}"))
}

/// Both cases end up running S2 where S1 used to be, in step with an
/// oracle run of the rerouted model.
pub fn reroute_applies_to_running_and_new_cases() -> Check {
    let e = Engine::new();
    let d = e.register(FIG1_XML);
    let who = AccountId::new("worker");
    let updated = rerouted_model();

    // the part of the run before the update never touches the changed flows
    let mut running = Case {
        addr: e.start(d.root_flow()),
        sim: Sim::start(&updated),
        name: "running case",
    };
    bind(&e, &d, running.addr, &who)?;
    step(&e, &d, &mut running, &who, "T1", Some(true))?;

    reroute(&e, &d)?;
    compare(&e, &d, &running, "after the update")?;

    let mut fresh = Case {
        addr: e.start(d.root_flow()),
        sim: Sim::start(&updated),
        name: "fresh case",
    };
    bind(&e, &d, fresh.addr, &who)?;
    compare(&e, &d, &fresh, "at start")?;
    step(&e, &d, &mut fresh, &who, "T1", Some(true))?;

    for c in [&mut running, &mut fresh] {
        step(&e, &d, c, &who, "T2", Some(true))?;
        same(
            &format!("{}: next task", c.name),
            d.enabled_ids(&e, c.addr),
            vec!["S2Task".to_string()],
        )?;
        step(&e, &d, c, &who, "S2Task", None)?;
        same(
            &format!("{}: completed", c.name),
            e.view(c.addr).completed,
            true,
        )?;
    }
    Ok(())
}
