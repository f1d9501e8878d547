//! BPMN XML for oracle models, using the engine's documentation
//! conventions for declarations, check-in annotations and guards.

use std::fmt::Write;

use crate::model::{Guard, Kind, Model, Process};

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn error_ref(code: &str) -> String {
    format!("Err_{code}")
}

fn process_body(p: &Process, out: &mut String, indent: &str) {
    if !p.vars.is_empty() {
        let decls: Vec<String> = p.vars.iter().map(|v| format!("bool {v};")).collect();
        writeln!(
            out,
            "{indent}<documentation>{}</documentation>",
            decls.join("\n")
        )
        .unwrap();
    }
    for n in &p.nodes {
        let id = &n.id;
        match &n.kind {
            Kind::Start => writeln!(out, r#"{indent}<startEvent id="{id}"/>"#).unwrap(),
            Kind::End => writeln!(out, r#"{indent}<endEvent id="{id}"/>"#).unwrap(),
            Kind::ErrorEnd(code) => writeln!(
                out,
                r#"{indent}<endEvent id="{id}"><errorEventDefinition errorRef="{}"/></endEvent>"#,
                error_ref(code)
            )
            .unwrap(),
            Kind::UserTask { sets: None } => writeln!(out, r#"{indent}<userTask id="{id}"/>"#).unwrap(),
            Kind::UserTask { sets: Some(v) } => writeln!(
                out,
                r#"{indent}<userTask id="{id}"><documentation>() : (bool _{v}) -> {{{v} = _{v};}}</documentation></userTask>"#
            )
            .unwrap(),
            Kind::ScriptTask { sets: None } => writeln!(out, r#"{indent}<scriptTask id="{id}"/>"#).unwrap(),
            Kind::ScriptTask { sets: Some((v, b)) } => writeln!(
                out,
                r#"{indent}<scriptTask id="{id}"><script>{v} = {b};</script></scriptTask>"#
            )
            .unwrap(),
            Kind::XorSplit { default: Some(d) } => {
                writeln!(out, r#"{indent}<exclusiveGateway id="{id}" default="{d}"/>"#).unwrap()
            }
            Kind::XorSplit { default: None } | Kind::XorJoin => {
                writeln!(out, r#"{indent}<exclusiveGateway id="{id}"/>"#).unwrap()
            }
            Kind::AndSplit | Kind::AndJoin => writeln!(out, r#"{indent}<parallelGateway id="{id}"/>"#).unwrap(),
            Kind::SubProcess(body) => {
                writeln!(out, r#"{indent}<subProcess id="{id}">"#).unwrap();
                process_body(body, out, &format!("{indent}  "));
                writeln!(out, "{indent}</subProcess>").unwrap();
            }
            Kind::Call(target) => {
                writeln!(out, r#"{indent}<callActivity id="{id}" calledElement="{target}"/>"#).unwrap()
            }
            Kind::ErrorBoundary { attached, code } => writeln!(
                out,
                r#"{indent}<boundaryEvent id="{id}" attachedToRef="{attached}" cancelActivity="true"><errorEventDefinition errorRef="{}"/></boundaryEvent>"#,
                error_ref(code)
            )
            .unwrap(),
        }
    }
    for f in &p.flows {
        let head = format!(
            r#"{indent}<sequenceFlow id="{}" sourceRef="{}" targetRef="{}""#,
            f.id, f.source, f.target
        );
        match &f.guard {
            None => writeln!(out, "{head}/>").unwrap(),
            Some(g) => {
                let expr = match g {
                    Guard::Const(b) => b.to_string(),
                    Guard::Var(v) => v.clone(),
                };
                writeln!(
                    out,
                    "{head}><conditionExpression>{}</conditionExpression></sequenceFlow>",
                    esc(&expr)
                )
                .unwrap()
            }
        }
    }
}

pub fn to_xml(m: &Model) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(
        "<definitions xmlns=\"http://www.omg.org/spec/BPMN/20100524/MODEL\" id=\"Generated\">\n",
    );
    for code in &m.errors {
        writeln!(
            out,
            r#"  <error id="{}" errorCode="{code}"/>"#,
            error_ref(code)
        )
        .unwrap();
    }
    for (p, exec) in std::iter::once((&m.root, true)).chain(m.called.iter().map(|p| (p, false))) {
        writeln!(out, r#"  <process id="{}" isExecutable="{exec}">"#, p.id).unwrap();
        process_body(p, &mut out, "    ");
        out.push_str("  </process>\n");
    }
    out.push_str("</definitions>\n");
    out
}
