use std::collections::{BTreeMap, BTreeSet};

use roxmltree::{Document, Node};
use sha2::{Digest, Sha256};

use super::{ParseError, ParsedEdge, ParsedElement, ParsedModel, ParsedProcess, MAX_INDEX};
use crate::bits::EdgeSet;
use crate::script::{self, ScriptError};
use crate::typeinfo::{ElementKind, GatewayKind, MultiInstance, Placement, TaskKind, Trigger};

/// Parses a BPMN document into a [`ParsedModel`].
pub fn parse(xml: &str) -> Result<ParsedModel, ParseError> {
    let doc = Document::parse(xml).map_err(|e| ParseError::Xml(e.to_string()))?;
    let defs = doc.root_element();
    if defs.tag_name().name() != "definitions" {
        return Err(ParseError::Xml(format!(
            "root element is `{}`, expected `definitions`",
            defs.tag_name().name()
        )));
    }

    let mut p = Parser {
        codes: BTreeMap::new(),
        processes: BTreeMap::new(),
        out: Vec::new(),
        called: BTreeMap::new(),
        stack: Vec::new(),
        roles: BTreeSet::new(),
    };
    for n in defs.children().filter(Node::is_element) {
        let id = attr(n, "id");
        match n.tag_name().name() {
            "process" => {
                p.processes.insert(id.clone(), n);
            }
            "error" => {
                let code = n
                    .attribute("errorCode")
                    .or(n.attribute("name"))
                    .unwrap_or(&id);
                p.codes.insert(id.clone(), code.to_string());
            }
            "escalation" => {
                let code = n
                    .attribute("escalationCode")
                    .or(n.attribute("name"))
                    .unwrap_or(&id);
                p.codes.insert(id.clone(), code.to_string());
            }
            "message" | "signal" => {
                let code = n.attribute("name").unwrap_or(&id);
                p.codes.insert(id.clone(), code.to_string());
            }
            "collaboration" | "choreography" => {
                return Err(unsupported(&id, n.tag_name().name()));
            }
            _ => {}
        }
    }

    let called: BTreeSet<String> = defs
        .descendants()
        .filter(|n| n.is_element() && n.tag_name().name() == "callActivity")
        .filter_map(|n| n.attribute("calledElement").map(str::to_string))
        .collect();
    let candidates: Vec<Node> = p
        .processes
        .values()
        .copied()
        .filter(|n| !called.contains(&attr(*n, "id")))
        .collect();
    // Document order among candidates, executable ones first.
    let mut candidates = candidates;
    candidates.sort_by_key(|n| (n.attribute("isExecutable") != Some("true"), n.range().start));
    let root = *candidates.first().ok_or_else(|| ParseError::Invalid {
        id: attr(defs, "id"),
        msg: "no root process".into(),
    })?;

    p.scope(root, false)?;
    let processes = p
        .out
        .into_iter()
        .map(|x| x.expect("every scope is filled"))
        .collect();
    Ok(ParsedModel {
        model_hash: model_hash(xml).expect("parsed above"),
        processes,
        roles: p.roles.into_iter().collect(),
    })
}

/// Hex sha256 of the canonical form of `xml`.
pub fn model_hash(xml: &str) -> Result<String, ParseError> {
    Ok(hex::encode(Sha256::digest(canonical_xml(xml)?.as_bytes())))
}

/// Comment-free, whitespace-normalized serialization with sorted attributes
/// and expanded namespaces, so formatting changes keep the same hash.
pub fn canonical_xml(xml: &str) -> Result<String, ParseError> {
    fn esc(s: &str) -> String {
        s.replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;")
            .replace('"', "&quot;")
    }
    fn qname(ns: Option<&str>, name: &str) -> String {
        match ns {
            Some(ns) => format!("{{{ns}}}{name}"),
            None => name.to_string(),
        }
    }
    fn walk(n: Node, out: &mut String) {
        if n.is_text() {
            let t = n.text().unwrap_or("").trim();
            if !t.is_empty() {
                out.push_str(&esc(t));
            }
            return;
        }
        if !n.is_element() {
            return;
        }
        let name = qname(n.tag_name().namespace(), n.tag_name().name());
        let mut attrs: Vec<(String, &str)> = n
            .attributes()
            .map(|a| (qname(a.namespace(), a.name()), a.value()))
            .collect();
        attrs.sort();
        out.push('<');
        out.push_str(&name);
        for (k, v) in attrs {
            out.push_str(&format!(" {k}=\"{}\"", esc(v)));
        }
        out.push('>');
        for c in n.children() {
            walk(c, out);
        }
        out.push_str(&format!("</{name}>"));
    }
    let doc = Document::parse(xml).map_err(|e| ParseError::Xml(e.to_string()))?;
    let mut out = String::new();
    walk(doc.root_element(), &mut out);
    Ok(out)
}

struct Parser<'a, 'i> {
    codes: BTreeMap<String, String>,
    processes: BTreeMap<String, Node<'a, 'i>>,
    out: Vec<Option<ParsedProcess>>,
    /// Process id → scope index, for call activities sharing a body.
    called: BTreeMap<String, usize>,
    stack: Vec<String>,
    roles: BTreeSet<String>,
}

const FLOW_NODES: &[&str] = &[
    "startEvent",
    "endEvent",
    "intermediateThrowEvent",
    "intermediateCatchEvent",
    "boundaryEvent",
    "task",
    "manualTask",
    "userTask",
    "scriptTask",
    "serviceTask",
    "exclusiveGateway",
    "parallelGateway",
    "inclusiveGateway",
    "subProcess",
    "callActivity",
];

const IGNORED: &[&str] = &[
    "documentation",
    "extensionElements",
    "laneSet",
    "dataObject",
    "dataObjectReference",
    "dataStoreReference",
    "textAnnotation",
    "association",
    "ioSpecification",
    "property",
    "group",
    "incoming",
    "outgoing",
    "multiInstanceLoopCharacteristics",
    "standardLoopCharacteristics",
];

fn attr(n: Node, name: &str) -> String {
    n.attribute(name).unwrap_or("").to_string()
}

fn unsupported(id: &str, what: &str) -> ParseError {
    ParseError::Unsupported {
        id: id.to_string(),
        what: what.to_string(),
    }
}

fn invalid(id: &str, msg: impl Into<String>) -> ParseError {
    ParseError::Invalid {
        id: id.to_string(),
        msg: msg.into(),
    }
}

fn child<'a, 'i>(n: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    n.children()
        .find(|c| c.is_element() && c.tag_name().name() == name)
}

fn documentation(n: Node) -> String {
    n.children()
        .filter(|c| c.is_element() && c.tag_name().name() == "documentation")
        .filter_map(|c| c.text())
        .collect::<Vec<_>>()
        .join("\n")
}

fn text_of(n: Node) -> String {
    n.descendants()
        .filter(|c| c.is_text())
        .filter_map(|c| c.text())
        .collect()
}

fn annotation_error(id: &str) -> impl Fn(ScriptError) -> ParseError + '_ {
    move |error| ParseError::Annotation {
        id: id.to_string(),
        error,
    }
}

/// Splits `role:` lines off a task's documentation.
fn split_role(doc: &str) -> (Option<String>, String) {
    let mut role = None;
    let mut rest = Vec::new();
    for line in doc.lines() {
        match line.trim().strip_prefix("role:") {
            Some(r) => role = Some(r.trim().to_string()),
            None => rest.push(line),
        }
    }
    (role.filter(|r| !r.is_empty()), rest.join("\n"))
}

struct EventDef {
    trigger: Trigger,
    code: Option<String>,
}

impl<'a, 'i> Parser<'a, 'i> {
    fn event_def(&self, n: Node) -> Result<EventDef, ParseError> {
        let id = attr(n, "id");
        let defs: Vec<Node> = n
            .children()
            .filter(|c| c.is_element() && c.tag_name().name().ends_with("EventDefinition"))
            .collect();
        let Some(d) = (match defs.len() {
            0 => None,
            1 => Some(defs[0]),
            _ => return Err(unsupported(&id, "multiple event definitions")),
        }) else {
            return Ok(EventDef {
                trigger: Trigger::None,
                code: None,
            });
        };
        let (trigger, ref_attr) = match d.tag_name().name() {
            "errorEventDefinition" => (Trigger::Error, "errorRef"),
            "escalationEventDefinition" => (Trigger::Escalation, "escalationRef"),
            "messageEventDefinition" => (Trigger::Message, "messageRef"),
            "signalEventDefinition" => (Trigger::Signal, "signalRef"),
            "terminateEventDefinition" => (Trigger::Terminate, ""),
            other => return Err(unsupported(&id, other)),
        };
        let code = match d.attribute(ref_attr) {
            Some(r) => Some(
                self.codes
                    .get(r)
                    .cloned()
                    .ok_or_else(|| invalid(&id, format!("unknown reference `{r}`")))?,
            ),
            None => None,
        };
        Ok(EventDef { trigger, code })
    }

    /// Parses one scope and every scope below it; returns its index.
    fn scope(&mut self, node: Node<'a, 'i>, is_event_sub: bool) -> Result<usize, ParseError> {
        let scope_id = attr(node, "id");
        let slot = self.out.len();
        self.out.push(None);

        let vars = script::parse_declarations(&documentation(node))
            .map_err(annotation_error(&scope_id))?;

        let mut nodes = Vec::new();
        let mut flows = Vec::new();
        for c in node.children().filter(Node::is_element) {
            let tag = c.tag_name().name();
            if FLOW_NODES.contains(&tag) {
                nodes.push(c);
            } else if tag == "sequenceFlow" {
                flows.push(c);
            } else if !IGNORED.contains(&tag) {
                let id = c.attribute("id").unwrap_or(&scope_id);
                return Err(unsupported(id, tag));
            }
        }

        // Indexes in document order; an event sub-process reserves the
        // next index for its trigger.
        let mut element_ids = BTreeMap::new();
        let mut next = 1u32;
        let mut esp_starts = BTreeMap::new();
        for n in &nodes {
            let id = attr(*n, "id");
            if id.is_empty() {
                return Err(invalid(
                    &scope_id,
                    format!("{} without id", n.tag_name().name()),
                ));
            }
            if element_ids.insert(id.clone(), next).is_some() {
                return Err(invalid(&id, "duplicate id"));
            }
            next += 1;
            if n.tag_name().name() == "subProcess"
                && n.attribute("triggeredByEvent") == Some("true")
            {
                let start = n
                    .children()
                    .find(|c| c.is_element() && c.tag_name().name() == "startEvent")
                    .ok_or_else(|| invalid(&id, "event sub-process without start event"))?;
                let sid = attr(start, "id");
                if element_ids.insert(sid.clone(), next).is_some() {
                    return Err(invalid(&sid, "duplicate id"));
                }
                esp_starts.insert(id, (next, start));
                next += 1;
            }
        }
        let count = (next - 1) as usize;
        if count > MAX_INDEX as usize {
            return Err(ParseError::TooLarge {
                id: scope_id,
                what: "elements",
                count,
            });
        }
        if flows.len() > MAX_INDEX as usize {
            return Err(ParseError::TooLarge {
                id: scope_id,
                what: "edges",
                count: flows.len(),
            });
        }

        let mut edges = Vec::new();
        let mut edge_ids = BTreeMap::new();
        let mut pre: BTreeMap<u32, EdgeSet> = BTreeMap::new();
        let mut post: BTreeMap<u32, EdgeSet> = BTreeMap::new();
        let defaults: BTreeSet<String> = nodes
            .iter()
            .filter_map(|n| n.attribute("default"))
            .map(str::to_string)
            .collect();
        for (i, f) in flows.iter().enumerate() {
            let index = i as u32 + 1;
            let id = attr(*f, "id");
            let end = |a: &str| {
                let r = f.attribute(a).unwrap_or("");
                element_ids
                    .get(r)
                    .copied()
                    .filter(|e| !esp_starts.values().any(|(s, _)| s == e))
                    .ok_or_else(|| invalid(&id, format!("{a} `{r}` is not in this scope")))
            };
            let (source, target) = (end("sourceRef")?, end("targetRef")?);
            if edge_ids.insert(id.clone(), index).is_some() {
                return Err(invalid(&id, "duplicate id"));
            }
            let guard_src = match child(*f, "conditionExpression") {
                Some(c) => text_of(c),
                None => documentation(*f),
            };
            let guard = if guard_src.trim().is_empty() {
                None
            } else {
                Some(script::parse_expr(&guard_src).map_err(annotation_error(&id))?)
            };
            post.entry(source).or_default().insert(index);
            pre.entry(target).or_default().insert(index);
            edges.push(ParsedEdge {
                is_default: defaults.contains(&id),
                id,
                index,
                source,
                target,
                guard,
            });
        }

        let mut elements = Vec::new();
        for n in &nodes {
            let id = attr(*n, "id");
            let e_ind = element_ids[&id];
            let mut el = ParsedElement {
                id: id.clone(),
                name: n.attribute("name").map(str::to_string),
                e_ind,
                kind: ElementKind::Task(TaskKind::None),
                pre_c: pre.get(&e_ind).copied().unwrap_or_default(),
                post_c: post.get(&e_ind).copied().unwrap_or_default(),
                code: None,
                attached_to: None,
                count_inst: 1,
                child: None,
                attached_events: Vec::new(),
                role: None,
                annotation: None,
                script: None,
            };
            let tag = n.tag_name().name();
            match tag {
                "startEvent"
                | "endEvent"
                | "intermediateThrowEvent"
                | "intermediateCatchEvent"
                | "boundaryEvent" => {
                    self.event(*n, &mut el, &element_ids, &nodes, is_event_sub)?;
                }
                "task" | "manualTask" => el.kind = ElementKind::Task(TaskKind::None),
                "userTask" | "serviceTask" => {
                    el.kind = ElementKind::Task(if tag == "userTask" {
                        TaskKind::User
                    } else {
                        TaskKind::Service
                    });
                    let (role, rest) = split_role(&documentation(*n));
                    if !rest.trim().is_empty() {
                        el.annotation =
                            Some(script::parse_annotation(&rest).map_err(annotation_error(&id))?);
                    }
                    if let Some(r) = &role {
                        self.roles.insert(r.clone());
                    }
                    el.role = role;
                }
                "scriptTask" => {
                    el.kind = ElementKind::Task(TaskKind::Script);
                    let src = match child(*n, "script") {
                        Some(s) => text_of(s),
                        None => split_role(&documentation(*n)).1,
                    };
                    el.script = Some(script::parse_program(&src).map_err(annotation_error(&id))?);
                }
                "exclusiveGateway" | "parallelGateway" | "inclusiveGateway" => {
                    let kind = match tag {
                        "exclusiveGateway" => GatewayKind::Exclusive,
                        "parallelGateway" => GatewayKind::Parallel,
                        _ => GatewayKind::Inclusive,
                    };
                    let (ins, outs) = (el.pre_c.len(), el.post_c.len());
                    let join = match n.attribute("gatewayDirection") {
                        Some("Converging") => true,
                        Some("Diverging") => false,
                        _ => ins > 1,
                    };
                    if ins > 1 && outs > 1 && kind != GatewayKind::Parallel {
                        return Err(unsupported(&id, "mixed gateway"));
                    }
                    if !join && kind != GatewayKind::Parallel {
                        let unguarded = edges
                            .iter()
                            .filter(|x| x.source == e_ind && !x.is_default && x.guard.is_none())
                            .count();
                        if unguarded > 0 && outs > 1 {
                            return Err(invalid(&id, "outgoing flow without guard"));
                        }
                    }
                    el.kind = ElementKind::Gateway { kind, join };
                }
                "subProcess" | "callActivity" => {
                    let esp = n.attribute("triggeredByEvent") == Some("true");
                    let multi = self.multi(*n, &mut el)?;
                    if esp && multi.is_some() {
                        return Err(unsupported(&id, "multi-instance event sub-process"));
                    }
                    if esp && !el.pre_c.is_empty() {
                        return Err(invalid(&id, "event sub-process with incoming flow"));
                    }
                    el.kind = ElementKind::SubProcess {
                        call: tag == "callActivity",
                        event_sub: esp,
                        multi,
                    };
                    el.child = Some(if tag == "callActivity" {
                        self.call(*n)?
                    } else {
                        self.scope(*n, esp)?
                    });
                }
                other => return Err(unsupported(&id, other)),
            }
            if !matches!(el.kind, ElementKind::SubProcess { .. })
                && child(*n, "multiInstanceLoopCharacteristics").is_some()
            {
                return Err(unsupported(&id, "multi-instance task"));
            }
            if child(*n, "standardLoopCharacteristics").is_some() {
                return Err(unsupported(&id, "loop marker"));
            }
            if tag == "subProcess"
                && el.kind
                    == (ElementKind::SubProcess {
                        call: false,
                        event_sub: true,
                        multi: None,
                    })
            {
                let (s_ind, start) = esp_starts[&id];
                let def = self.event_def(start)?;
                let sid = attr(start, "id");
                if !matches!(
                    def.trigger,
                    Trigger::Error | Trigger::Escalation | Trigger::Signal
                ) {
                    return Err(unsupported(
                        &sid,
                        "event sub-process start without error, escalation or signal trigger",
                    ));
                }
                let interrupting = start.attribute("isInterrupting") != Some("false");
                if def.trigger == Trigger::Error && !interrupting {
                    return Err(invalid(&sid, "non-interrupting error start"));
                }
                el.attached_events.push(s_ind);
                let trigger_el = ParsedElement {
                    id: sid,
                    name: start.attribute("name").map(str::to_string),
                    e_ind: s_ind,
                    kind: ElementKind::Event {
                        trigger: def.trigger,
                        throwing: false,
                        placement: Placement::EventSubStart,
                        interrupting,
                    },
                    pre_c: EdgeSet::EMPTY,
                    post_c: EdgeSet::EMPTY,
                    code: def.code,
                    attached_to: Some(e_ind),
                    count_inst: 1,
                    child: None,
                    attached_events: Vec::new(),
                    role: None,
                    annotation: None,
                    script: None,
                };
                elements.push(el);
                elements.push(trigger_el);
                continue;
            }
            elements.push(el);
        }

        // Boundary events hang off their host.
        let hosts: Vec<(u32, u32)> = elements
            .iter()
            .filter(|e| {
                matches!(
                    e.kind,
                    ElementKind::Event {
                        placement: Placement::Boundary,
                        ..
                    }
                )
            })
            .map(|e| (e.attached_to.expect("boundary has a host"), e.e_ind))
            .collect();
        for (host, b) in hosts {
            let h = elements
                .iter_mut()
                .find(|e| e.e_ind == host)
                .expect("host exists");
            h.attached_events.push(b);
        }
        for e in &mut elements {
            e.attached_events.sort_unstable();
        }
        elements.sort_by_key(|e| e.e_ind);

        let starts = elements
            .iter()
            .filter(|e| {
                matches!(
                    e.kind,
                    ElementKind::Event {
                        throwing: false,
                        placement: Placement::Flow,
                        ..
                    }
                ) && e.pre_c.is_empty()
            })
            .count();
        if starts == 0 {
            return Err(invalid(&scope_id, "no start event"));
        }

        let process = ParsedProcess {
            id: scope_id.clone(),
            name: node.attribute("name").map(str::to_string),
            vars,
            elements,
            edges,
            element_ids,
            edge_ids,
        };
        process.template().validate().map_err(|t| {
            let id = process
                .element(t.e_ind)
                .map(|e| e.id.clone())
                .unwrap_or_else(|| scope_id.clone());
            ParseError::Scope { id, error: t.error }
        })?;
        self.out[slot] = Some(process);
        Ok(slot)
    }

    fn event(
        &self,
        n: Node,
        el: &mut ParsedElement,
        element_ids: &BTreeMap<String, u32>,
        nodes: &[Node],
        in_event_sub: bool,
    ) -> Result<(), ParseError> {
        let id = el.id.clone();
        let tag = n.tag_name().name();
        let def = self.event_def(n)?;
        let t = def.trigger;
        let (throwing, placement, interrupting) = match tag {
            "startEvent" => {
                // The trigger of an event sub-process start sits on the
                // catcher in the parent scope.
                if t != Trigger::None && !in_event_sub {
                    return Err(unsupported(
                        &id,
                        "start event with a trigger outside an event sub-process",
                    ));
                }
                if !el.pre_c.is_empty() {
                    return Err(invalid(&id, "start event with incoming flow"));
                }
                el.kind = ElementKind::Event {
                    trigger: Trigger::None,
                    throwing: false,
                    placement: Placement::Flow,
                    interrupting: false,
                };
                return Ok(());
            }
            "endEvent" => (true, Placement::Flow, false),
            "intermediateThrowEvent" => {
                if t == Trigger::Terminate || t == Trigger::Error {
                    return Err(unsupported(&id, "intermediate throw with this trigger"));
                }
                (true, Placement::Flow, false)
            }
            "intermediateCatchEvent" => {
                if !matches!(t, Trigger::Message | Trigger::Signal) {
                    return Err(unsupported(
                        &id,
                        "intermediate catch without message or signal trigger",
                    ));
                }
                (false, Placement::Flow, false)
            }
            _ => {
                let host_id = attr(n, "attachedToRef");
                let host = element_ids.get(&host_id).copied().ok_or_else(|| {
                    invalid(&id, format!("host `{host_id}` is not in this scope"))
                })?;
                let host_tag = nodes
                    .iter()
                    .find(|x| attr(**x, "id") == host_id)
                    .map(|x| x.tag_name().name())
                    .unwrap_or("");
                if host_tag != "subProcess" && host_tag != "callActivity" {
                    return Err(unsupported(&id, "boundary event on a task"));
                }
                if !matches!(t, Trigger::Error | Trigger::Escalation | Trigger::Signal) {
                    return Err(unsupported(
                        &id,
                        "boundary event without error, escalation or signal trigger",
                    ));
                }
                let interrupting = n.attribute("cancelActivity") != Some("false");
                if t == Trigger::Error && !interrupting {
                    return Err(invalid(&id, "non-interrupting error boundary"));
                }
                if !el.pre_c.is_empty() {
                    return Err(invalid(&id, "boundary event with incoming flow"));
                }
                el.attached_to = Some(host);
                (false, Placement::Boundary, interrupting)
            }
        };
        if throwing && !el.post_c.is_empty() && tag == "endEvent" {
            return Err(invalid(&id, "end event with outgoing flow"));
        }
        el.kind = ElementKind::Event {
            trigger: t,
            throwing,
            placement,
            interrupting,
        };
        el.code = def.code;
        Ok(())
    }

    fn multi(&self, n: Node, el: &mut ParsedElement) -> Result<Option<MultiInstance>, ParseError> {
        let Some(m) = child(n, "multiInstanceLoopCharacteristics") else {
            return Ok(None);
        };
        let card = child(m, "loopCardinality").map(text_of).unwrap_or_default();
        let count: u32 = card
            .trim()
            .parse()
            .ok()
            .filter(|c| *c >= 1)
            .ok_or_else(|| {
                invalid(
                    &el.id,
                    format!(
                        "loop cardinality `{}` is not a positive integer",
                        card.trim()
                    ),
                )
            })?;
        el.count_inst = count;
        Ok(Some(if m.attribute("isSequential") == Some("true") {
            MultiInstance::Sequential
        } else {
            MultiInstance::Parallel
        }))
    }

    fn call(&mut self, n: Node) -> Result<usize, ParseError> {
        let id = attr(n, "id");
        let target = attr(n, "calledElement");
        if let Some(&i) = self.called.get(&target) {
            return Ok(i);
        }
        if self.stack.contains(&target) {
            return Err(invalid(&id, format!("recursive call to `{target}`")));
        }
        let proc = *self
            .processes
            .get(&target)
            .ok_or_else(|| invalid(&id, format!("called process `{target}` not found")))?;
        self.stack.push(target.clone());
        let i = self.scope(proc, false)?;
        self.stack.pop();
        self.called.insert(target, i);
        Ok(i)
    }
}
