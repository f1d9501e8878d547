//! HTTP routes. Bodies are JSON with camelCase keys; addresses are
//! `0x`-prefixed hex. The acting account comes from the `x-actor` header
//! and defaults to the gateway's admin account.
//!
//! | route | effect |
//! |---|---|
//! | `POST /interpreter` | deploy the interpreter (once per ledger) |
//! | `POST /interpreter/models` | parse `{bpmn, register?}`, store, register |
//! | `GET /interpreter/models` | stored models |
//! | `GET /interpreter/models/:m-hash` | xml, index maps, plan, registration |
//! | `POST /i-flow` | deploy an empty flow node |
//! | `PATCH /i-flow/element/:cf` | `setElement` |
//! | `PATCH /i-flow/child/:cf` | `linkSubprocess` |
//! | `PATCH /i-flow/factory/:cf` | `setFactory`, deploying one from a template if asked |
//! | `GET /i-flow/:cf` | the flow node's relation |
//! | `POST /i-flow/p-cases/:cf` | start a case |
//! | `GET /i-flow/p-cases/:cf` | cases started on the flow |
//! | `GET /i-data/:pc` | case tree with tokens, running children and work items |
//! | `GET /i-data/:pc/i-flow/:e` | check-out |
//! | `PATCH /i-data/:pc/i-flow/:e` | check-in |
//! | `PUT`/`DELETE /i-data/:pc/roles/:role` | bind or release a role |
//! | `GET /monitor?since=&waitMs=` | ledger events, long-polled |

use std::collections::BTreeMap;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post, put};
use axum::{Json, Router};
use flowledger_core::bits::EdgeSet;
use flowledger_core::bpmn::repository::{index_maps, StoredModel};
use flowledger_core::bpmn::{apply_plan, emit_plan, parse, Registration};
use flowledger_core::data::{DataNode, DataTemplate, FactoryInit};
use flowledger_core::flow::FlowNode;
use flowledger_core::flow::{EvtCode, SetElement, ROOT_MARKER};
use flowledger_core::inspect::{case_view, cases_of};
use flowledger_core::ledger::{
    AccountId, Instance, InstanceKind, LedgerAddress, LogEvent, Receipt,
};
use flowledger_core::ops::{factory_init_bytes, Operation, Output};
use flowledger_core::script::Value as Val;
use flowledger_core::typeinfo::TypeInfo;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{ApiError, ApiResult};
use crate::state::Shared;

pub const ACTOR_HEADER: &str = "x-actor";

/// Longest wait a monitor request may ask for.
pub const MAX_WAIT_MS: u64 = 30_000;

pub fn router(g: Shared) -> Router {
    Router::new()
        .route("/interpreter", post(deploy_interpreter))
        .route("/interpreter/models", post(register_model).get(list_models))
        .route("/interpreter/models/:hash", get(get_model))
        .route("/i-flow", post(deploy_flow))
        .route("/i-flow/element/:cf", patch(set_element))
        .route("/i-flow/child/:cf", patch(link_child))
        .route("/i-flow/factory/:cf", patch(set_factory))
        .route("/i-flow/:cf", get(get_flow))
        .route("/i-flow/p-cases/:cf", post(start_case).get(list_cases))
        .route("/i-data/:pc", get(get_case))
        .route("/i-data/:pc/i-flow/:e", get(check_out).patch(check_in))
        .route("/i-data/:pc/roles/:role", put(bind).delete(release))
        .route("/monitor", get(monitor))
        .with_state(g)
}

// ---- helpers --------------------------------------------------------------

fn actor(g: &Shared, h: &HeaderMap) -> AccountId {
    h.get(ACTOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|s| !s.is_empty())
        .map(AccountId::new)
        .unwrap_or_else(|| g.admin.clone())
}

fn address(s: &str) -> ApiResult<LedgerAddress> {
    s.parse()
        .map_err(|_| ApiError::bad_request("BAD_ADDRESS").with("detail", s))
}

fn body<T: for<'de> Deserialize<'de>>(b: &Bytes) -> ApiResult<T> {
    let b: &[u8] = if b.is_empty() { b"{}" } else { b };
    serde_json::from_slice(b)
        .map_err(|e| ApiError::bad_request("BAD_JSON").with("detail", e.to_string()))
}

fn tx_json<T>(r: &Receipt<T>) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("seq".into(), json!(r.seq));
    m.insert("cost".into(), json!(r.cost));
    m
}

/// Commits the bookkeeping for a sent transaction and turns a revert into
/// an error carrying the receipt.
fn settle<T>(g: &Shared, r: Receipt<T>) -> ApiResult<(T, Map<String, Value>)> {
    g.committed()?;
    let meta = tx_json(&r);
    match r.outcome {
        Ok(v) => Ok((v, meta)),
        Err(e) => Err(ApiError::from(e)
            .with("seq", meta["seq"].clone())
            .with("cost", meta["cost"].clone())),
    }
}

fn created(v: Value) -> Response {
    (StatusCode::CREATED, Json(v)).into_response()
}

fn interpreter_or_conflict(g: &Shared) -> ApiResult<LedgerAddress> {
    g.interpreter()
        .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "NO_INTERPRETER"))
}

fn ensure_interpreter(g: &Shared) -> ApiResult<LedgerAddress> {
    if let Some(a) = g.interpreter() {
        return Ok(a);
    }
    let r = g
        .ledger
        .deploy(&g.admin, InstanceKind::Interpreter.name(), vec![]);
    let (a, _) = settle(g, r)?;
    g.set_interpreter(a);
    Ok(a)
}

fn flow_node(g: &Shared, a: &LedgerAddress) -> ApiResult<FlowNode> {
    match g.ledger.instance(a) {
        Some(Instance::Flow(f)) => Ok(f),
        _ => Err(ApiError::not_found("NOT_FOUND").with("address", a.to_string())),
    }
}

fn data_node(g: &Shared, a: &LedgerAddress) -> ApiResult<DataNode> {
    match g.ledger.instance(a) {
        Some(Instance::Data(d)) => Ok(d),
        _ => Err(ApiError::not_found("NOT_FOUND").with("address", a.to_string())),
    }
}

fn payload_values(p: Map<String, Value>) -> ApiResult<BTreeMap<String, Val>> {
    p.into_iter()
        .map(|(k, v)| {
            let val = match &v {
                Value::Bool(b) => Val::Bool(*b),
                Value::String(s) => Val::Text(s.clone()),
                Value::Number(n) if n.is_i64() => Val::Int(n.as_i64().unwrap()),
                _ => return Err(ApiError::bad_request("BAD_PAYLOAD").with("field", k.as_str())),
            };
            Ok((k, val))
        })
        .collect()
}

fn registration_json(r: &Registration) -> Value {
    let mut v = serde_json::to_value(r).expect("registration serializes");
    v["rootFlow"] = json!(r.root_flow());
    v
}

fn model_json(m: &StoredModel) -> Value {
    json!({
        "modelHash": m.model_hash,
        "rootProcess": m.index_maps.first().map(|x| x.process_id.clone()),
        "elementCount": m.index_maps.iter().map(|x| x.elements.len()).sum::<usize>(),
        "registration": m.registration.as_ref().map(registration_json),
    })
}

pub fn event_json(e: &LogEvent) -> Value {
    let fields: Map<String, Value> = e
        .fields
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    json!({
        "seq": e.tx,
        "index": e.index,
        "emitter": e.emitter,
        "name": e.name,
        "fields": fields,
    })
}

/// Adds `elementId` to every work item whose flow came from a model.
fn annotate_case(g: &Shared, v: &mut Value) {
    let flow: Option<LedgerAddress> = v["flow"].as_str().and_then(|s| s.parse().ok());
    if let (Some(flow), Some(items)) = (flow, v["enabled"].as_array_mut()) {
        for it in items {
            if let Some(e) = it["eInd"].as_u64() {
                if let Some(id) = g.element_id(&flow, e as u32) {
                    it["elementId"] = json!(id);
                }
            }
        }
    }
    if let Some(children) = v["children"].as_object_mut() {
        for kids in children.values_mut() {
            if let Some(kids) = kids.as_array_mut() {
                for k in kids {
                    annotate_case(g, k);
                }
            }
        }
    }
}

// ---- interpreter and models -----------------------------------------------

async fn deploy_interpreter(State(g): State<Shared>) -> ApiResult<Response> {
    if let Some(a) = g.interpreter() {
        return Ok(Json(json!({ "interpreterAddress": a, "created": false })).into_response());
    }
    let r = g
        .ledger
        .deploy(&g.admin, InstanceKind::Interpreter.name(), vec![]);
    let (a, mut meta) = settle(&g, r)?;
    g.set_interpreter(a);
    meta.insert("interpreterAddress".into(), json!(a));
    meta.insert("created".into(), json!(true));
    Ok(created(Value::Object(meta)))
}

#[derive(Deserialize)]
struct RegisterBody {
    bpmn: String,
    #[serde(default = "yes")]
    register: bool,
}

fn yes() -> bool {
    true
}

async fn register_model(State(g): State<Shared>, b: Bytes) -> ApiResult<Response> {
    let req: RegisterBody = body(&b)?;
    let model = parse(&req.bpmn)?;
    let plan = emit_plan(&model);
    if let Some(existing) = g.model(&model.model_hash) {
        if existing.registration.is_some() || !req.register {
            let mut v = model_json(&existing);
            v["processes"] = json!(existing.index_maps);
            v["created"] = json!(false);
            return Ok(Json(v).into_response());
        }
    }
    if let Some(repo) = g.repository() {
        repo.store(&req.bpmn, &model, &plan)
            .map_err(anyhow::Error::from)?;
    }
    let mut stored = StoredModel {
        model_hash: model.model_hash.clone(),
        xml: req.bpmn.clone(),
        index_maps: index_maps(&model),
        plan: plan.clone(),
        registration: None,
    };
    let mut steps = Vec::new();
    if req.register {
        let interp = ensure_interpreter(&g)?;
        let applied = apply_plan(&g.ledger, &g.admin, interp, &plan, None);
        g.committed()?;
        let (reg, receipts) = applied.map_err(|e| {
            ApiError::new(crate::error::status_of(&e.reason), e.reason.clone())
                .with("step", e.step)
                .with("op", e.op.clone())
        })?;
        stored.registration = Some(reg);
        steps = receipts;
    }
    g.put_model(stored.clone())?;
    let mut v = model_json(&stored);
    v["processes"] = json!(stored.index_maps);
    v["planOps"] = json!(plan.ops.len());
    v["steps"] = json!(steps);
    v["registrationCost"] = json!(steps.iter().map(|s| s.cost).sum::<u64>());
    v["created"] = json!(true);
    Ok(created(v))
}

async fn list_models(State(g): State<Shared>) -> Json<Value> {
    Json(Value::Array(g.models().iter().map(model_json).collect()))
}

async fn get_model(State(g): State<Shared>, Path(hash): Path<String>) -> ApiResult<Json<Value>> {
    let m = g
        .model(&hash)
        .ok_or_else(|| ApiError::not_found("UNKNOWN_MODEL"))?;
    let mut v = model_json(&m);
    v["xml"] = json!(m.xml);
    v["indexMaps"] = json!(m.index_maps);
    v["plan"] = serde_json::to_value(&m.plan).expect("plan serializes");
    Ok(Json(v))
}

// ---- flow nodes -----------------------------------------------------------

async fn deploy_flow(State(g): State<Shared>) -> ApiResult<Response> {
    let r = g
        .ledger
        .deploy(&g.admin, InstanceKind::FlowNode.name(), vec![]);
    let (a, mut meta) = settle(&g, r)?;
    meta.insert("flowAddress".into(), json!(a));
    Ok(created(Value::Object(meta)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ElementBody {
    e_ind: u32,
    #[serde(default)]
    pre_c: Vec<u32>,
    #[serde(default)]
    post_c: Vec<u32>,
    type_info: u16,
    /// 32-byte hex code, or a name hashed like model event codes.
    evt_code: Option<String>,
    attached_to: Option<u32>,
    count_inst: Option<u32>,
}

fn edges(v: &[u32]) -> ApiResult<EdgeSet> {
    EdgeSet::try_of(v.iter().copied()).ok_or_else(|| ApiError::bad_request("BAD_INDEX"))
}

async fn set_element(
    State(g): State<Shared>,
    Path(cf): Path<String>,
    b: Bytes,
) -> ApiResult<Json<Value>> {
    let cf = address(&cf)?;
    let req: ElementBody = body(&b)?;
    let evt_code = match req.evt_code.as_deref() {
        None | Some("") => EvtCode::ZERO,
        Some(s) => EvtCode::from_hex(s).unwrap_or_else(|| EvtCode::of(s)),
    };
    let args = SetElement {
        e_ind: req.e_ind,
        pre_c: edges(&req.pre_c)?,
        post_c: edges(&req.post_c)?,
        type_info: TypeInfo(req.type_info),
        evt_code,
        attached_to: req.attached_to,
        count_inst: req.count_inst.unwrap_or(1),
    };
    let r = g.ledger.call(&g.admin, cf, Operation::SetElement(args));
    let (_, meta) = settle(&g, r)?;
    Ok(Json(Value::Object(meta)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ChildBody {
    e_ind: u32,
    child: LedgerAddress,
    #[serde(default)]
    attached_events: Vec<u32>,
    count_inst: Option<u32>,
}

async fn link_child(
    State(g): State<Shared>,
    Path(cf): Path<String>,
    b: Bytes,
) -> ApiResult<Json<Value>> {
    let cf = address(&cf)?;
    let req: ChildBody = body(&b)?;
    let op = Operation::LinkSubprocess {
        e_ind: req.e_ind,
        child: req.child,
        attached_events: req.attached_events,
        count_inst: req.count_inst.unwrap_or(1),
    };
    let r = g.ledger.call(&g.admin, cf, op);
    let (_, meta) = settle(&g, r)?;
    Ok(Json(Value::Object(meta)))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct FactoryBody {
    /// Sub-process element; absent for the flow's own factory.
    e_ind: Option<u32>,
    factory: Option<LedgerAddress>,
    /// Deploys a new factory for this flow first.
    template: Option<DataTemplate>,
    access: Option<LedgerAddress>,
}

async fn set_factory(
    State(g): State<Shared>,
    Path(cf): Path<String>,
    b: Bytes,
) -> ApiResult<Json<Value>> {
    let cf = address(&cf)?;
    let req: FactoryBody = body(&b)?;
    let mut out = Map::new();
    let factory = match (req.factory, req.template) {
        (Some(f), None) => f,
        (None, Some(template)) => {
            let init = FactoryInit {
                flow: cf,
                interpreter: interpreter_or_conflict(&g)?,
                access: req.access.unwrap_or(LedgerAddress::ZERO),
                template,
            };
            let r = g.ledger.deploy(
                &g.admin,
                InstanceKind::Factory.name(),
                factory_init_bytes(&init),
            );
            let (f, meta) = settle(&g, r)?;
            out.insert("deploy".into(), Value::Object(meta));
            f
        }
        _ => {
            return Err(ApiError::bad_request("BAD_JSON")
                .with("detail", "give exactly one of factory, template"))
        }
    };
    let op = Operation::SetFactory {
        e_ind: req.e_ind.unwrap_or(ROOT_MARKER),
        factory,
    };
    let r = g.ledger.call(&g.admin, cf, op);
    let (_, meta) = settle(&g, r)?;
    out.extend(meta);
    out.insert("factory".into(), json!(factory));
    Ok(Json(Value::Object(out)))
}

async fn get_flow(State(g): State<Shared>, Path(cf): Path<String>) -> ApiResult<Json<Value>> {
    let a = address(&cf)?;
    let f = flow_node(&g, &a)?;
    let origin = g.origin(&a);
    let elements: Vec<Value> = f
        .elements
        .values()
        .map(|e| {
            json!({
                "eInd": e.e_ind,
                "elementId": g.element_id(&a, e.e_ind),
                "preC": e.pre_c,
                "postC": e.post_c,
                "typeInfo": e.type_info.bits(),
                "kind": e.type_info.decode().map(|k| format!("{k:?}")).ok(),
                "evtCode": (!e.evt_code.is_zero()).then(|| e.evt_code.to_hex()),
                "attachedTo": e.attached_to,
                "countInst": e.count_inst,
                "childFlow": f.children.get(&e.e_ind),
                "factory": f.factories.get(&e.e_ind),
            })
        })
        .collect();
    Ok(Json(json!({
        "address": a,
        "initElement": f.init_element,
        "eventList": f.event_list,
        "factory": f.factories.get(&ROOT_MARKER),
        "model": origin.map(|o| json!({ "modelHash": o.model_hash, "scope": o.scope })),
        "elements": elements,
    })))
}

// ---- cases ----------------------------------------------------------------

async fn start_case(
    State(g): State<Shared>,
    Path(cf): Path<String>,
    h: HeaderMap,
) -> ApiResult<Response> {
    let flow = address(&cf)?;
    let interp = interpreter_or_conflict(&g)?;
    let r = g
        .ledger
        .call(&actor(&g, &h), interp, Operation::StartCase { flow });
    let (out, mut meta) = settle(&g, r)?;
    let case = out
        .address()
        .ok_or_else(|| anyhow::anyhow!("startCase returned {out:?}"))?;
    meta.insert("caseAddress".into(), json!(case));
    Ok(created(Value::Object(meta)))
}

async fn list_cases(State(g): State<Shared>, Path(cf): Path<String>) -> ApiResult<Json<Value>> {
    let flow = address(&cf)?;
    flow_node(&g, &flow)?;
    Ok(Json(
        json!({ "flow": flow, "cases": cases_of(&g.ledger, &flow) }),
    ))
}

async fn get_case(State(g): State<Shared>, Path(pc): Path<String>) -> ApiResult<Json<Value>> {
    let a = address(&pc)?;
    let view = case_view(&g.ledger, &a).ok_or_else(|| ApiError::not_found("NOT_FOUND"))?;
    let mut v = serde_json::to_value(&view).expect("case view serializes");
    annotate_case(&g, &mut v);
    Ok(Json(v))
}

fn element_index(e: &str) -> ApiResult<u32> {
    e.parse()
        .map_err(|_| ApiError::bad_request("BAD_INDEX").with("detail", e))
}

async fn check_out(
    State(g): State<Shared>,
    Path((pc, e)): Path<(String, String)>,
    h: HeaderMap,
) -> ApiResult<Json<Value>> {
    let case = address(&pc)?;
    let e_ind = element_index(&e)?;
    let out = g
        .ledger
        .query(&actor(&g, &h), case, Operation::CheckOut { e_ind })?;
    let Output::Values(values) = out else {
        return Err(anyhow::anyhow!("checkOut returned {out:?}").into());
    };
    let m: Map<String, Value> = values.into_iter().map(|(k, v)| (k, v.to_json())).collect();
    Ok(Json(Value::Object(m)))
}

async fn check_in(
    State(g): State<Shared>,
    Path((pc, e)): Path<(String, String)>,
    h: HeaderMap,
    b: Bytes,
) -> ApiResult<Json<Value>> {
    let case = address(&pc)?;
    let e_ind = element_index(&e)?;
    let payload = payload_values(body(&b)?)?;
    let r = g
        .ledger
        .call(&actor(&g, &h), case, Operation::CheckIn { e_ind, payload });
    let (_, meta) = settle(&g, r)?;
    Ok(Json(Value::Object(meta)))
}

#[derive(Deserialize)]
struct BindBody {
    actor: String,
}

/// Access-control instance and root case governing `case`.
fn access_of(g: &Shared, case: &LedgerAddress) -> ApiResult<(LedgerAddress, LedgerAddress)> {
    let d = data_node(g, case)?;
    if d.access.is_zero() {
        return Err(ApiError::not_found("NO_ACCESS_CONTROL"));
    }
    Ok((d.access, d.root.unwrap_or(*case)))
}

async fn bind(
    State(g): State<Shared>,
    Path((pc, role)): Path<(String, String)>,
    h: HeaderMap,
    b: Bytes,
) -> ApiResult<Json<Value>> {
    let case = address(&pc)?;
    let req: BindBody = body(&b)?;
    let (access, root) = access_of(&g, &case)?;
    let op = Operation::Bind {
        case: root,
        role: role.clone(),
        actor: AccountId::new(req.actor.clone()),
    };
    let r = g.ledger.call(&actor(&g, &h), access, op);
    let (_, mut meta) = settle(&g, r)?;
    meta.insert("role".into(), json!(role));
    meta.insert("actor".into(), json!(req.actor));
    Ok(Json(Value::Object(meta)))
}

async fn release(
    State(g): State<Shared>,
    Path((pc, role)): Path<(String, String)>,
    h: HeaderMap,
) -> ApiResult<Json<Value>> {
    let case = address(&pc)?;
    let (access, root) = access_of(&g, &case)?;
    let r = g.ledger.call(
        &actor(&g, &h),
        access,
        Operation::Release { case: root, role },
    );
    let (_, meta) = settle(&g, r)?;
    Ok(Json(Value::Object(meta)))
}

// ---- monitor --------------------------------------------------------------

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct MonitorQuery {
    #[serde(default)]
    since: u64,
    #[serde(default)]
    wait_ms: u64,
}

/// Events of transactions `since..`, waiting up to `waitMs` for a
/// transaction at or past `since`. `next` is the value to pass as `since`
/// on the following request.
async fn monitor(State(g): State<Shared>, Query(q): Query<MonitorQuery>) -> Json<Value> {
    let mut rx = g.subscribe();
    rx.borrow_and_update();
    let deadline = tokio::time::Instant::now() + Duration::from_millis(q.wait_ms.min(MAX_WAIT_MS));
    loop {
        let next = g.ledger.tx_count();
        let events = g.ledger.read_log(q.since);
        if next > q.since || tokio::time::Instant::now() >= deadline {
            let events: Vec<Value> = events.iter().map(event_json).collect();
            return Json(json!({ "events": events, "next": next.max(q.since) }));
        }
        if tokio::time::timeout_at(deadline, rx.changed())
            .await
            .is_err()
        {
            continue;
        }
    }
}
