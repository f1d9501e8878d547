//! Structural cost properties: one interpreter per ledger, registration
//! cost linear in the element count, instantiation cost independent of
//! history.

use std::fmt::Write;

use flowledger_core::bpmn::{apply_plan, emit_plan, parse, FIG1_XML};
use flowledger_core::ledger::{CostUnits, InstanceKind};
use flowledger_core::ops::Operation;

use super::common::Engine;
use super::{holds, same, Check};

/// start -> n user tasks -> end
pub fn chain_xml(n: usize) -> String {
    let mut x = String::from(
        r#"<definitions xmlns="http://www.omg.org/spec/BPMN/20100524/MODEL" id="D"><process id="P" isExecutable="true"><startEvent id="s"/>"#,
    );
    for i in 0..n {
        write!(x, r#"<userTask id="t{i}"/>"#).unwrap();
    }
    x.push_str(r#"<endEvent id="e"/>"#);
    let ids: Vec<String> = std::iter::once("s".to_string())
        .chain((0..n).map(|i| format!("t{i}")))
        .chain(std::iter::once("e".to_string()))
        .collect();
    for (i, w) in ids.windows(2).enumerate() {
        write!(
            x,
            r#"<sequenceFlow id="f{i}" sourceRef="{}" targetRef="{}"/>"#,
            w[0], w[1]
        )
        .unwrap();
    }
    x.push_str("</process></definitions>");
    x
}

fn registration_cost(e: &Engine, xml: &str) -> Result<CostUnits, String> {
    let model = parse(xml).map_err(|x| x.to_string())?;
    let (_, receipts) = apply_plan(&e.ledger, &e.admin, e.interp, &emit_plan(&model), None)
        .map_err(|x| x.to_string())?;
    Ok(receipts.iter().map(|r| r.cost).sum())
}

/// Registers three models and counts interpreter deployments.
pub fn interpreter_deployed_once() -> Check {
    let e = Engine::new();
    for xml in [FIG1_XML.to_string(), chain_xml(3), chain_xml(7)] {
        registration_cost(&e, &xml)?;
    }
    let deploys = e
        .ledger
        .transactions()
        .iter()
        .filter(|t| t.operation == format!("deploy:{}", InstanceKind::Interpreter.name()))
        .count();
    same("interpreter deployments", deploys, 1)
}

/// Registration cost of chains with 1..=`max` tasks lies within one
/// storage write of the line through the two extremes.
pub fn registration_is_linear(max: usize) -> Result<f64, String> {
    let e = Engine::new();
    let costs: Vec<CostUnits> = (1..=max)
        .map(|n| registration_cost(&e, &chain_xml(n)))
        .collect::<Result<_, _>>()?;
    let per_element = (costs[max - 1] - costs[0]) as f64 / (max - 1) as f64;
    let write = e.ledger.cost_model().storage_write as f64;
    for (i, c) in costs.iter().enumerate() {
        let line = costs[0] as f64 + i as f64 * per_element;
        let off = (*c as f64 - line).abs();
        holds(
            &format!(
                "{} tasks: cost {c} is {off} off the line (tolerance {write})",
                i + 1
            ),
            off <= write,
        )?;
    }
    holds("elements cost something", per_element > 0.0)?;
    Ok(per_element)
}

/// Cost of ten successive case starts of the same model.
pub fn instantiation_costs(n: usize) -> Result<Vec<CostUnits>, String> {
    let e = Engine::new();
    let d = e.register(FIG1_XML);
    let mut costs = Vec::new();
    for _ in 0..n {
        let r = e.ledger.call(
            &e.admin,
            e.interp,
            Operation::StartCase {
                flow: d.root_flow(),
            },
        );
        costs.push(r.cost);
        r.into_result().map_err(|x| x.reason)?;
    }
    Ok(costs)
}

pub fn instantiation_is_constant() -> Check {
    let costs = instantiation_costs(10)?;
    let mean = costs.iter().sum::<CostUnits>() as f64 / costs.len() as f64;
    let variance = costs
        .iter()
        .map(|c| (*c as f64 - mean).powi(2))
        .sum::<f64>()
        / costs.len() as f64;
    holds(
        &format!("variance {variance} across {costs:?}"),
        variance == 0.0,
    )
}
