//! Route-by-route checks of the HTTP API, shared by the integration tests
//! and the acceptance run.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::time::Duration;

use axum::http::{Method, StatusCode};
use axum::Router;
use flowledger_core::bpmn::FIG1_XML;
use flowledger_core::ledger::TxStatus;
use flowledger_core::typeinfo::{ElementKind, Placement, TaskKind, Trigger, TypeInfo};
use flowledger_gateway::api::router;
use flowledger_gateway::replay::{replay, send};
use flowledger_gateway::report::CostReport;
use flowledger_gateway::state::{Gateway, Shared};
use flowledger_gateway::trace::parse_traces;
use serde_json::{json, Value};

pub const TRACES: &str = include_str!("../../fixtures/fig1-traces.jsonl");

pub type Check = Result<(), String>;

pub fn same<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Check {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

pub struct Client {
    pub g: Shared,
    pub app: Router,
    /// Routes exercised so far, as `METHOD /pattern`.
    pub covered: BTreeSet<String>,
}

impl Client {
    pub fn new() -> Client {
        let g = Gateway::in_memory();
        Client {
            app: router(g.clone()),
            g,
            covered: BTreeSet::new(),
        }
    }

    /// Sends a request and checks the status and the number of
    /// transactions it added to the ledger.
    #[allow(clippy::too_many_arguments)]
    pub async fn req(
        &mut self,
        route: &str,
        method: Method,
        uri: &str,
        actor: Option<&str>,
        body: Option<Value>,
        want: StatusCode,
        txs: u64,
    ) -> Result<Value, String> {
        let before = self.g.ledger.tx_count();
        let (status, v) = send(&self.app, method.clone(), uri, actor, body).await;
        let label = format!("{method} {uri}");
        same(&format!("{label}: status ({v})"), status, want)?;
        same(
            &format!("{label}: transactions"),
            self.g.ledger.tx_count() - before,
            txs,
        )?;
        if !status.is_success() {
            same(
                &format!("{label}: error body"),
                v["reason"].is_string() && v["error"].is_string(),
                true,
            )?;
        }
        if status.is_success() {
            self.covered.insert(format!("{method} {route}"));
        }
        Ok(v)
    }

    /// Like [`Client::req`] without the transaction count.
    pub async fn req_untracked(
        &mut self,
        route: &str,
        method: Method,
        uri: &str,
        body: Option<Value>,
        want: StatusCode,
    ) -> Result<Value, String> {
        let (status, v) = send(&self.app, method.clone(), uri, None, body).await;
        same(&format!("{method} {uri}: status ({v})"), status, want)?;
        self.covered.insert(format!("{method} {route}"));
        Ok(v)
    }
}

fn s(v: &Value) -> String {
    v.as_str().unwrap_or_default().to_string()
}

fn e_ind(view: &Value, id: &str) -> Option<u64> {
    view["enabled"]
        .as_array()?
        .iter()
        .find(|w| w["elementId"] == id)
        .and_then(|w| w["eInd"].as_u64())
}

fn enabled_ids(view: &Value) -> Vec<String> {
    view["enabled"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|w| s(&w["elementId"]))
        .collect()
}

/// Registers the running example and walks one case through the routes,
/// checking status codes, error bodies and ledger transactions.
pub async fn model_routes(c: &mut Client) -> Check {
    use Method as M;
    use StatusCode as S;
    c.req(
        "/interpreter/models",
        M::GET,
        "/interpreter/models",
        None,
        None,
        S::OK,
        0,
    )
    .await?;
    let v = c
        .req(
            "/interpreter",
            M::POST,
            "/interpreter",
            None,
            None,
            S::CREATED,
            1,
        )
        .await?;
    same("created", v["created"].clone(), json!(true))?;
    let interp = s(&v["interpreterAddress"]);
    let v = c
        .req(
            "/interpreter",
            M::POST,
            "/interpreter",
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same("interpreter reused", s(&v["interpreterAddress"]), interp)?;

    let v = c
        .req(
            "",
            M::POST,
            "/interpreter/models",
            None,
            Some(json!({"bpmn": "<definitions"})),
            S::BAD_REQUEST,
            0,
        )
        .await?;
    same("parse error", v["error"].clone(), json!("bad_request"))?;
    c.req(
        "",
        M::POST,
        "/interpreter/models",
        None,
        Some(json!("nope")),
        S::BAD_REQUEST,
        0,
    )
    .await?;
    let before = c.g.ledger.tx_count();
    let reg = c
        .req_untracked(
            "/interpreter/models",
            M::POST,
            "/interpreter/models",
            Some(json!({"bpmn": FIG1_XML})),
            S::CREATED,
        )
        .await?;
    let steps = reg["steps"].as_array().map(|a| a.len() as u64);
    same(
        "one transaction per registration step",
        Some(c.g.ledger.tx_count() - before),
        steps,
    )?;
    let hash = s(&reg["modelHash"]);
    let root = s(&reg["registration"]["rootFlow"]);
    same("root flow present", root.starts_with("0x"), true)?;
    let v = c
        .req(
            "/interpreter/models",
            M::POST,
            "/interpreter/models",
            None,
            Some(json!({"bpmn": FIG1_XML})),
            S::OK,
            0,
        )
        .await?;
    same("re-registration", v["created"].clone(), json!(false))?;
    let v = c
        .req(
            "/interpreter/models",
            M::GET,
            "/interpreter/models",
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same("models listed", v.as_array().map(|a| a.len()), Some(1))?;
    let v = c
        .req(
            "/interpreter/models/:m-hash",
            M::GET,
            &format!("/interpreter/models/{hash}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same("stored xml", s(&v["xml"]), FIG1_XML.to_string())?;
    same(
        "index maps",
        v["indexMaps"].as_array().map(|a| a.len()),
        Some(3),
    )?;
    c.req(
        "",
        M::GET,
        "/interpreter/models/feed",
        None,
        None,
        S::NOT_FOUND,
        0,
    )
    .await?;

    let v = c
        .req(
            "/i-flow/:cf-address",
            M::GET,
            &format!("/i-flow/{root}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same(
        "root elements",
        v["elements"].as_array().map(|a| a.len()),
        Some(11),
    )?;
    same(
        "element ids",
        v["elements"][0]["elementId"].is_string(),
        true,
    )?;
    same("model origin", s(&v["model"]["modelHash"]), hash.clone())?;
    c.req(
        "",
        M::GET,
        "/i-flow/0x00000000000000000000000000000000000000aa",
        None,
        None,
        S::NOT_FOUND,
        0,
    )
    .await?;
    c.req("", M::GET, "/i-flow/zzz", None, None, S::BAD_REQUEST, 0)
        .await?;

    let v = c
        .req(
            "/i-flow/p-cases/:cf-address",
            M::POST,
            &format!("/i-flow/p-cases/{root}"),
            Some("ann"),
            None,
            S::CREATED,
            1,
        )
        .await?;
    let pc = s(&v["caseAddress"]);
    let v = c
        .req(
            "/i-flow/p-cases/:cf-address",
            M::GET,
            &format!("/i-flow/p-cases/{root}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same("cases", v["cases"].clone(), json!([pc]))?;

    let view = c
        .req(
            "/i-data/:pc-address",
            M::GET,
            &format!("/i-data/{pc}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same(
        "enabled at start",
        enabled_ids(&view),
        vec!["T1".to_string()],
    )?;
    same(
        "T1 role",
        view["enabled"][0]["role"].clone(),
        json!("clerk"),
    )?;
    same(
        "tokens at start",
        view["tokens"].as_array().map(|a| a.len()),
        Some(1),
    )?;
    let t1 = e_ind(&view, "T1").ok_or("T1 index")?;
    let t1_uri = format!("/i-data/{pc}/i-flow/{t1}");
    c.req(
        "",
        M::GET,
        "/i-data/0x00000000000000000000000000000000000000aa",
        None,
        None,
        S::NOT_FOUND,
        0,
    )
    .await?;

    let seq_before = c.g.ledger.tx_count();
    let v = c
        .req(
            "",
            M::PATCH,
            &t1_uri,
            Some("ann"),
            Some(json!({"_t1Field": true})),
            S::FORBIDDEN,
            1,
        )
        .await?;
    same("unbound actor", s(&v["reason"]), "UNAUTHORIZED".into())?;
    let tx =
        c.g.ledger
            .transaction(seq_before)
            .ok_or("reverted tx missing")?;
    same(
        "reverted tx recorded",
        matches!(tx.status, TxStatus::Reverted(_)),
        true,
    )?;
    c.req(
        "",
        M::PUT,
        &format!("/i-data/{pc}/roles/clerk"),
        Some("ann"),
        Some(json!({"actor": "ann"})),
        S::OK,
        1,
    )
    .await?;
    let v = c
        .req(
            "",
            M::PUT,
            &format!("/i-data/{pc}/roles/clerk"),
            Some("bob"),
            Some(json!({"actor": "bob"})),
            S::CONFLICT,
            1,
        )
        .await?;
    same("role taken", s(&v["reason"]), "ROLE_TAKEN".into())?;
    c.req(
        "",
        M::PUT,
        &format!("/i-data/{pc}/roles/boss"),
        Some("ann"),
        Some(json!({"actor": "ann"})),
        S::BAD_REQUEST,
        1,
    )
    .await?;

    let t2 = 4; // T2 is the fourth element in document order
    let v = c
        .req(
            "",
            M::PATCH,
            &format!("/i-data/{pc}/i-flow/{t2}"),
            Some("ann"),
            Some(json!({"_t2Field": true})),
            S::CONFLICT,
            1,
        )
        .await?;
    same("T2 before T1", s(&v["reason"]), "NOT_ENABLED".into())?;
    let v = c
        .req(
            "",
            M::PATCH,
            &t1_uri,
            Some("ann"),
            Some(json!({"_t1Field": 1})),
            S::BAD_REQUEST,
            1,
        )
        .await?;
    same("ill-typed", s(&v["reason"]), "BAD_PAYLOAD".into())?;
    c.req(
        "",
        M::PATCH,
        &t1_uri,
        Some("ann"),
        Some(json!({"_t1Field": 1.5})),
        S::BAD_REQUEST,
        0,
    )
    .await?;
    c.req(
        "",
        M::PATCH,
        &t1_uri,
        Some("ann"),
        Some(json!([true])),
        S::BAD_REQUEST,
        0,
    )
    .await?;
    c.req(
        "",
        M::PATCH,
        &format!("/i-data/{pc}/i-flow/x"),
        Some("ann"),
        Some(json!({})),
        S::BAD_REQUEST,
        0,
    )
    .await?;
    c.req(
        "",
        M::GET,
        &format!("/i-data/{pc}/i-flow/2"),
        Some("ann"),
        None,
        S::NOT_FOUND,
        0,
    )
    .await?;

    let v = c
        .req(
            "/i-data/:pc-address/i-flow/:e-index",
            M::PATCH,
            &t1_uri,
            Some("ann"),
            Some(json!({"_t1Field": true})),
            S::OK,
            1,
        )
        .await?;
    same("receipt", v["seq"].is_u64() && v["cost"].is_u64(), true)?;
    let view = c
        .req(
            "/i-data/:pc-address",
            M::GET,
            &format!("/i-data/{pc}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same(
        "enabled after T1",
        enabled_ids(&view),
        vec!["T2".to_string()],
    )?;
    same("T2 index", e_ind(&view, "T2"), Some(t2))?;
    let v = c
        .req(
            "/i-data/:pc-address/i-flow/:e-index",
            M::GET,
            &format!("/i-data/{pc}/i-flow/{t2}"),
            Some("ann"),
            None,
            S::OK,
            0,
        )
        .await?;
    same("check-out of T2", v, json!({"t1Field": true}))?;
    c.req(
        "",
        M::DELETE,
        &format!("/i-data/{pc}/roles/clerk"),
        Some("bob"),
        None,
        S::FORBIDDEN,
        1,
    )
    .await?;
    c.req(
        "",
        M::DELETE,
        &format!("/i-data/{pc}/roles/clerk"),
        Some("ann"),
        None,
        S::OK,
        1,
    )
    .await?;
    Ok(())
}

/// Builds a parent flow whose sub-process runs a one-task child, using
/// only the flow routes, then runs a case on it.
pub async fn flow_routes(c: &mut Client) -> Check {
    use Method as M;
    use StatusCode as S;
    if c.g.interpreter().is_none() {
        c.req(
            "/interpreter",
            M::POST,
            "/interpreter",
            None,
            None,
            S::CREATED,
            1,
        )
        .await?;
    }
    let start = TypeInfo::encode(ElementKind::Event {
        trigger: Trigger::None,
        throwing: false,
        placement: Placement::Flow,
        interrupting: false,
    });
    let end = TypeInfo::encode(ElementKind::Event {
        trigger: Trigger::None,
        throwing: true,
        placement: Placement::Flow,
        interrupting: false,
    });
    let user = TypeInfo::encode(ElementKind::Task(TaskKind::User));
    let sub = TypeInfo::encode(ElementKind::SubProcess {
        call: false,
        event_sub: false,
        multi: None,
    });
    let parent = s(&c
        .req("/i-flow", M::POST, "/i-flow", None, None, S::CREATED, 1)
        .await?["flowAddress"]);
    let child = s(&c
        .req("/i-flow", M::POST, "/i-flow", None, None, S::CREATED, 1)
        .await?["flowAddress"]);
    let el = |e: u32, pre: &[u32], post: &[u32], ti: TypeInfo| json!({"eInd": e, "preC": pre, "postC": post, "typeInfo": ti.bits()});
    for (flow, inner) in [(&parent, sub), (&child, user)] {
        for body in [
            el(1, &[], &[1], start),
            el(2, &[1], &[2], inner),
            el(3, &[2], &[], end),
        ] {
            c.req(
                "/i-flow/element/:cf-address",
                M::PATCH,
                &format!("/i-flow/element/{flow}"),
                None,
                Some(body),
                S::OK,
                1,
            )
            .await?;
        }
    }
    let v = c
        .req(
            "",
            M::PATCH,
            &format!("/i-flow/element/{parent}"),
            None,
            Some(json!({"eInd": 4, "typeInfo": 0xffff})),
            S::BAD_REQUEST,
            1,
        )
        .await?;
    same("bad type info", s(&v["reason"]), "BAD_TYPEINFO".into())?;
    c.req(
        "",
        M::PATCH,
        &format!("/i-flow/element/{parent}"),
        None,
        Some(json!({"eInd": 4, "preC": [300], "typeInfo": user.bits()})),
        S::BAD_REQUEST,
        0,
    )
    .await?;
    c.req(
        "",
        M::PATCH,
        "/i-flow/element/0x00000000000000000000000000000000000000aa",
        None,
        Some(el(1, &[], &[1], start)),
        S::NOT_FOUND,
        1,
    )
    .await?;
    c.req(
        "/i-flow/child/:cf-address",
        M::PATCH,
        &format!("/i-flow/child/{parent}"),
        None,
        Some(json!({"eInd": 2, "child": child})),
        S::OK,
        1,
    )
    .await?;
    let task_template = json!({"check_ins": {"2": {"params": [{"ty": "Int", "name": "n"}]}}});
    for (flow, template) in [(&parent, json!({})), (&child, task_template)] {
        let v = c
            .req(
                "/i-flow/factory/:cf-address",
                M::PATCH,
                &format!("/i-flow/factory/{flow}"),
                None,
                Some(json!({"template": template})),
                S::OK,
                2,
            )
            .await?;
        same("factory deployed", v["factory"].is_string(), true)?;
    }
    c.req(
        "",
        M::PATCH,
        &format!("/i-flow/factory/{parent}"),
        None,
        Some(json!({})),
        S::BAD_REQUEST,
        0,
    )
    .await?;
    let v = c
        .req(
            "/i-flow/:cf-address",
            M::GET,
            &format!("/i-flow/{parent}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same(
        "child link",
        s(&v["elements"][1]["childFlow"]),
        child.clone(),
    )?;
    same("no model origin", v["model"].clone(), Value::Null)?;

    let pc = s(&c
        .req(
            "/i-flow/p-cases/:cf-address",
            M::POST,
            &format!("/i-flow/p-cases/{parent}"),
            None,
            None,
            S::CREATED,
            1,
        )
        .await?["caseAddress"]);
    let view = c
        .req(
            "/i-data/:pc-address",
            M::GET,
            &format!("/i-data/{pc}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same("running sub-process", view["running"].clone(), json!([2]))?;
    let kid = &view["children"]["2"][0];
    let kid_pc = s(&kid["address"]);
    same("child task", kid["enabled"][0]["eInd"].clone(), json!(2))?;
    c.req(
        "",
        M::PATCH,
        &format!("/i-data/{kid_pc}/i-flow/2"),
        None,
        Some(json!({"n": "x"})),
        S::BAD_REQUEST,
        1,
    )
    .await?;
    c.req(
        "/i-data/:pc-address/i-flow/:e-index",
        M::PATCH,
        &format!("/i-data/{kid_pc}/i-flow/2"),
        None,
        Some(json!({"n": 7})),
        S::OK,
        1,
    )
    .await?;
    let view = c
        .req(
            "/i-data/:pc-address",
            M::GET,
            &format!("/i-data/{pc}"),
            None,
            None,
            S::OK,
            0,
        )
        .await?;
    same("parent completed", view["completed"].clone(), json!(true))?;
    Ok(())
}

/// Long-poll, paging and event kinds of the monitor.
pub async fn monitor(c: &mut Client) -> Check {
    let (_, all) = send(&c.app, Method::GET, "/monitor?since=0", None, None).await;
    let events = all["events"].as_array().cloned().unwrap_or_default();
    let next = all["next"].as_u64().ok_or("next")?;
    same("next", next, c.g.ledger.tx_count())?;
    let names: BTreeSet<String> = events.iter().map(|e| s(&e["name"])).collect();
    for n in [
        "StateUpdated",
        "CaseCreated",
        "BindingChanged",
        "ElementFired",
    ] {
        same(&format!("{n} on the stream"), names.contains(n), true)?;
    }
    // paging by seq reproduces the full log
    let mut paged = Vec::new();
    let mut since = 0;
    while since < next {
        let (_, v) = send(
            &c.app,
            Method::GET,
            &format!("/monitor?since={since}"),
            None,
            None,
        )
        .await;
        let page = v["events"].as_array().cloned().unwrap_or_default();
        let upto = since + 3;
        paged.extend(
            page.into_iter()
                .filter(|e| e["seq"].as_u64().unwrap() < upto),
        );
        since = upto;
    }
    same("paged log", paged.len(), events.len())?;
    same("paged log content", paged == events, true)?;

    let t = std::time::Instant::now();
    let (_, v) = send(
        &c.app,
        Method::GET,
        &format!("/monitor?since={next}&waitMs=50"),
        None,
        None,
    )
    .await;
    same("idle wait returns nothing", v["events"].clone(), json!([]))?;
    same(
        "idle wait honoured",
        t.elapsed() >= Duration::from_millis(50),
        true,
    )?;

    let app = c.app.clone();
    let waiter = tokio::spawn(async move {
        send(
            &app,
            Method::GET,
            &format!("/monitor?since={next}&waitMs=10000"),
            None,
            None,
        )
        .await
    });
    tokio::time::sleep(Duration::from_millis(20)).await;
    let flow = s(&c
        .req(
            "/i-flow",
            Method::POST,
            "/i-flow",
            None,
            None,
            StatusCode::CREATED,
            1,
        )
        .await?["flowAddress"]);
    let (_, v) = tokio::time::timeout(Duration::from_secs(5), waiter)
        .await
        .map_err(|_| "long poll did not wake")?
        .map_err(|e| e.to_string())?;
    same("woken with the new tx", v["next"].as_u64(), Some(next + 1))?;
    same(
        "only the new tx",
        v["events"]
            .as_array()
            .map(|a| a.iter().all(|e| e["seq"] == json!(next))),
        Some(true),
    )?;
    let _ = flow;
    Ok(())
}

/// Runs every route group on one gateway; returns the routes covered.
pub async fn rest_contract() -> Result<BTreeSet<String>, String> {
    let mut c = Client::new();
    model_routes(&mut c).await?;
    flow_routes(&mut c).await?;
    monitor(&mut c).await?;
    Ok(c.covered)
}

pub const ROUTES: [&str; 14] = [
    "POST /interpreter",
    "POST /interpreter/models",
    "GET /interpreter/models",
    "GET /interpreter/models/:m-hash",
    "POST /i-flow",
    "PATCH /i-flow/element/:cf-address",
    "PATCH /i-flow/child/:cf-address",
    "PATCH /i-flow/factory/:cf-address",
    "GET /i-flow/:cf-address",
    "POST /i-flow/p-cases/:cf-address",
    "GET /i-flow/p-cases/:cf-address",
    "GET /i-data/:pc-address",
    "GET /i-data/:pc-address/i-flow/:e-index",
    "PATCH /i-data/:pc-address/i-flow/:e-index",
];

pub async fn fixture_report(seed: Option<u64>) -> Result<CostReport, String> {
    let traces = parse_traces(TRACES).map_err(|e| e.to_string())?;
    replay(Gateway::in_memory(), FIG1_XML, traces, seed)
        .await
        .map_err(|e| e.to_string())
}

/// Two replays of the fixture produce byte-identical reports.
pub async fn replay_deterministic() -> Result<CostReport, String> {
    let a = fixture_report(None).await?;
    let b = fixture_report(None).await?;
    same("report bytes", a.to_json(), b.to_json())?;
    same("cases", a.cases.len(), 10)?;
    same("violations", a.violations.len(), 0)?;
    same("all completed", a.cases.iter().all(|c| c.completed), true)?;
    let x = fixture_report(Some(11)).await?;
    let y = fixture_report(Some(11)).await?;
    same("seeded report bytes", x.to_json(), y.to_json())?;
    Ok(a)
}
