//! Replays case traces against a model through the HTTP routes, in
//! process, and collects the cost of every transaction sent.
//!
//! Roles required by a task are bound to the event's actor the first time
//! the task comes up in a case. An event whose task is not enabled, or
//! whose check-in reverts, is a violation; the rest of that case is
//! skipped.

use std::collections::BTreeSet;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use flowledger_core::ledger::{CostUnits, InstanceKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::api::{self, ACTOR_HEADER};
use crate::report::{mean, CaseCosts, CostReport, ModelCosts, Violation, SCHEMA_VERSION};
use crate::state::Shared;
use crate::trace::{CaseTrace, ElementRef};

#[derive(Debug, thiserror::Error)]
#[error("{what}: HTTP {status} {body}")]
pub struct ReplayError {
    pub what: String,
    pub status: StatusCode,
    pub body: Value,
}

/// Sends one request to `app`.
pub async fn send(
    app: &Router,
    method: Method,
    uri: &str,
    actor: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(a) = actor {
        req = req.header(ACTOR_HEADER, a);
    }
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(&v).expect("json encodes"))
        }
        None => Body::empty(),
    };
    let resp = app
        .clone()
        .oneshot(req.body(body).expect("request builds"))
        .await
        .expect("router is infallible");
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .expect("in-memory body");
    let v = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, v)
}

fn expect(what: &str, (status, body): (StatusCode, Value)) -> Result<Value, ReplayError> {
    if status.is_success() {
        Ok(body)
    } else {
        Err(ReplayError {
            what: what.into(),
            status,
            body,
        })
    }
}

fn cost(v: &Value) -> CostUnits {
    v["cost"].as_u64().unwrap_or(0)
}

/// Enabled work items of a case tree, parents first.
fn worklist(view: &Value) -> Vec<Value> {
    let mut out: Vec<Value> = view["enabled"].as_array().cloned().unwrap_or_default();
    if let Some(children) = view["children"].as_object() {
        for kids in children.values() {
            for k in kids.as_array().into_iter().flatten() {
                out.extend(worklist(k));
            }
        }
    }
    out
}

fn matches(item: &Value, e: &ElementRef) -> bool {
    match e {
        ElementRef::Index(i) => item["eInd"].as_u64() == Some(*i as u64),
        ElementRef::Id(id) => item["elementId"].as_str() == Some(id.as_str()),
    }
}

struct Progress {
    trace: CaseTrace,
    costs: CaseCosts,
    next: usize,
    bound: BTreeSet<String>,
    done: bool,
}

/// Registers `bpmn` and replays `traces`. With a seed, the next case to
/// advance is drawn at random after every event; otherwise cases run one
/// after the other.
pub async fn replay(
    g: Shared,
    bpmn: &str,
    traces: Vec<CaseTrace>,
    seed: Option<u64>,
) -> Result<CostReport, ReplayError> {
    let app = api::router(g.clone());
    expect(
        "deploy interpreter",
        send(&app, Method::POST, "/interpreter", None, None).await,
    )?;
    let reg = expect(
        "register model",
        send(
            &app,
            Method::POST,
            "/interpreter/models",
            None,
            Some(json!({ "bpmn": bpmn })),
        )
        .await,
    )?;
    let root_flow = reg["registration"]["rootFlow"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    let steps = reg["steps"].as_array().cloned().unwrap_or_default();
    let registration_cost: CostUnits = steps.iter().map(cost).sum();
    let flow_deploy_cost: CostUnits = steps
        .iter()
        .filter(|s| s["op"] == "deployFlow")
        .map(cost)
        .sum();
    let elements = reg["elementCount"].as_u64().unwrap_or(0) as usize;

    let mut cases: Vec<Progress> = traces
        .into_iter()
        .map(|trace| Progress {
            costs: CaseCosts {
                case_ref: trace.case_ref.clone(),
                case_address: None,
                instantiation_cost: 0,
                execution_cost: 0,
                transactions: 0,
                completed: false,
                conformant: true,
            },
            trace,
            next: 0,
            bound: BTreeSet::new(),
            done: false,
        })
        .collect();
    let mut violations = Vec::new();
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    loop {
        let live: Vec<usize> = (0..cases.len()).filter(|i| !cases[*i].done).collect();
        let Some(&first) = live.first() else { break };
        let i = match rng.as_mut() {
            Some(r) => live[r.gen_range(0..live.len())],
            None => first,
        };
        if let Some(v) = advance(&app, &root_flow, &mut cases[i]).await? {
            violations.push(v);
        }
    }

    let interpreter_deploys: Vec<CostUnits> = g
        .ledger
        .transactions()
        .iter()
        .filter(|t| {
            t.is_success() && t.operation == format!("deploy:{}", InstanceKind::Interpreter.name())
        })
        .map(|t| t.cost)
        .collect();
    let cases: Vec<CaseCosts> = cases.into_iter().map(|c| c.costs).collect();
    let model = ModelCosts {
        model_hash: reg["modelHash"].as_str().unwrap_or_default().into(),
        root_process: reg["rootProcess"].as_str().unwrap_or_default().into(),
        root_flow,
        elements,
        flow_deploy_cost,
        registration_cost,
        avg_registration_cost_per_element: if elements == 0 {
            0.0
        } else {
            registration_cost as f64 / elements as f64
        },
        cases: cases.len(),
        avg_instantiation_cost: mean(
            cases
                .iter()
                .filter(|c| c.case_address.is_some())
                .map(|c| c.instantiation_cost),
        ),
        avg_trace_execution_cost: mean(
            cases
                .iter()
                .filter(|c| c.conformant)
                .map(|c| c.execution_cost),
        ),
    };
    Ok(CostReport {
        schema_version: SCHEMA_VERSION,
        interpreter_deploy_cost: interpreter_deploys.first().copied().unwrap_or(0),
        interpreter_deploys: interpreter_deploys.len(),
        models: vec![model],
        cases,
        violations,
    })
}

/// Performs the next action of one case: its start, or one event.
async fn advance(
    app: &Router,
    root_flow: &str,
    p: &mut Progress,
) -> Result<Option<Violation>, ReplayError> {
    let Some(case) = p.costs.case_address.clone() else {
        let r = expect(
            &format!("start {}", p.trace.case_ref),
            send(
                app,
                Method::POST,
                &format!("/i-flow/p-cases/{root_flow}"),
                Some(&p.trace.starter),
                None,
            )
            .await,
        )?;
        p.costs.case_address = r["caseAddress"].as_str().map(String::from);
        p.costs.instantiation_cost = cost(&r);
        p.costs.transactions += 1;
        if p.trace.events.is_empty() {
            finish(app, p).await?;
        }
        return Ok(None);
    };
    let step = p.next;
    let ev = p.trace.events[step].clone();
    p.next += 1;
    let view = expect(
        "case view",
        send(app, Method::GET, &format!("/i-data/{case}"), None, None).await,
    )?;
    let violation = |reason: &str| Violation {
        case_ref: p.trace.case_ref.clone(),
        step,
        element: ev.element.to_string(),
        reason: reason.into(),
    };
    let Some(item) = worklist(&view)
        .into_iter()
        .find(|w| matches(w, &ev.element))
    else {
        let v = violation("NOT_ENABLED");
        p.costs.conformant = false;
        finish(app, p).await?;
        return Ok(Some(v));
    };
    let target = item["case"].as_str().unwrap_or_default().to_string();
    if let Some(role) = item["role"].as_str() {
        if p.bound.insert(role.to_string()) {
            let (status, r) = send(
                app,
                Method::PUT,
                &format!("/i-data/{case}/roles/{role}"),
                Some(&ev.actor),
                Some(json!({ "actor": ev.actor })),
            )
            .await;
            // a reverted bind still costs; a role held by someone else shows up at check-in
            if status.is_success() || r.get("seq").is_some() {
                p.costs.execution_cost += cost(&r);
                p.costs.transactions += 1;
            }
        }
    }
    let (status, r) = send(
        app,
        Method::PATCH,
        &format!("/i-data/{target}/i-flow/{}", item["eInd"]),
        Some(&ev.actor),
        Some(Value::Object(ev.payload.clone())),
    )
    .await;
    if r.get("seq").is_some() {
        p.costs.execution_cost += cost(&r);
        p.costs.transactions += 1;
    }
    if !status.is_success() {
        let v = violation(r["reason"].as_str().unwrap_or("UNKNOWN"));
        p.costs.conformant = false;
        finish(app, p).await?;
        return Ok(Some(v));
    }
    if p.next == p.trace.events.len() {
        finish(app, p).await?;
    }
    Ok(None)
}

async fn finish(app: &Router, p: &mut Progress) -> Result<(), ReplayError> {
    p.done = true;
    if let Some(case) = &p.costs.case_address {
        let view = expect(
            "case view",
            send(app, Method::GET, &format!("/i-data/{case}"), None, None).await,
        )?;
        p.costs.completed = view["completed"].as_bool().unwrap_or(false);
    }
    Ok(())
}
