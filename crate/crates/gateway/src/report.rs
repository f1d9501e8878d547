//! Cost report written by the replayer.

use std::fmt::Write;

use flowledger_core::ledger::CostUnits;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostReport {
    pub schema_version: u32,
    /// Cost of the ledger's single interpreter deployment, whichever run
    /// paid for it.
    pub interpreter_deploy_cost: CostUnits,
    /// Interpreter deployments found on the ledger after the run.
    pub interpreter_deploys: usize,
    pub models: Vec<ModelCosts>,
    pub cases: Vec<CaseCosts>,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelCosts {
    pub model_hash: String,
    pub root_process: String,
    pub root_flow: String,
    pub elements: usize,
    pub flow_deploy_cost: CostUnits,
    pub registration_cost: CostUnits,
    pub avg_registration_cost_per_element: f64,
    pub cases: usize,
    pub avg_instantiation_cost: Option<f64>,
    /// Over conformant cases only.
    pub avg_trace_execution_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseCosts {
    pub case_ref: String,
    pub case_address: Option<String>,
    pub instantiation_cost: CostUnits,
    /// Role bindings and check-ins sent for the trace.
    pub execution_cost: CostUnits,
    pub transactions: usize,
    pub completed: bool,
    pub conformant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Violation {
    pub case_ref: String,
    /// Position of the event within its case, from 0.
    pub step: usize,
    pub element: String,
    pub reason: String,
}

pub fn mean(xs: impl IntoIterator<Item = CostUnits>) -> Option<f64> {
    let (n, sum) = xs
        .into_iter()
        .fold((0u64, 0u128), |(n, s), x| (n + 1, s + x as u128));
    (n > 0).then(|| sum as f64 / n as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_else(|| "-".into())
}

impl CostReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "interpreter deployment  {:>12}  ({} on ledger)",
            self.interpreter_deploy_cost, self.interpreter_deploys
        )
        .unwrap();
        for m in &self.models {
            writeln!(s).unwrap();
            writeln!(
                s,
                "model {} ({}, {} elements)",
                &m.model_hash[..m.model_hash.len().min(12)],
                m.root_process,
                m.elements
            )
            .unwrap();
            writeln!(s, "  flow deployment       {:>12}", m.flow_deploy_cost).unwrap();
            writeln!(s, "  registration          {:>12}", m.registration_cost).unwrap();
            writeln!(
                s,
                "  avg reg. per element  {:>12.1}",
                m.avg_registration_cost_per_element
            )
            .unwrap();
            writeln!(
                s,
                "  avg instantiation     {:>12}  over {} cases",
                cell(m.avg_instantiation_cost),
                m.cases
            )
            .unwrap();
            let ok = self.cases.iter().filter(|c| c.conformant).count();
            writeln!(
                s,
                "  avg trace execution   {:>12}  over {ok} conformant cases",
                cell(m.avg_trace_execution_cost)
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:<12} {:>14} {:>12} {:>4}  completed",
            "case", "instantiation", "execution", "txs"
        )
        .unwrap();
        for c in &self.cases {
            writeln!(
                s,
                "{:<12} {:>14} {:>12} {:>4}  {}{}",
                c.case_ref,
                c.instantiation_cost,
                c.execution_cost,
                c.transactions,
                c.completed,
                if c.conformant { "" } else { "  (violation)" }
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "violations: {}", self.violations.len()).unwrap();
        for v in &self.violations {
            writeln!(
                s,
                "  {} step {} {}: {}",
                v.case_ref, v.step, v.element, v.reason
            )
            .unwrap();
        }
        s
    }
}
