//! JSON-lines traces. One event per line; a blank line ends a case.
//!
//! ```text
//! {"caseRef":"c1","element":"#start","actor":"ann"}
//! {"caseRef":"c1","element":"T1","payload":{"_t1Field":true},"actor":"ann"}
//! ```
//!
//! `element` is an element id or an index into the flow of the case the
//! task runs in. The optional `#start` line names the account that starts
//! the case; without it the first event's actor does.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub const START_MARKER: &str = "#start";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementRef {
    Index(u32),
    Id(String),
}

impl ElementRef {
    pub fn is_start(&self) -> bool {
        matches!(self, ElementRef::Id(s) if s == START_MARKER)
    }
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementRef::Index(i) => write!(f, "{i}"),
            ElementRef::Id(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceEvent {
    pub case_ref: String,
    pub element: ElementRef,
    #[serde(default)]
    pub payload: Map<String, Value>,
    pub actor: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseTrace {
    pub case_ref: String,
    /// Account starting the case.
    pub starter: String,
    /// Task events, start marker removed.
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: case {found} inside case {expected}")]
    MixedCase {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("line {line}: start marker after the first task of {case}")]
    LateStart { line: usize, case: String },
    #[error("case {0} appears in more than one block")]
    Repeated(String),
}

pub fn parse_traces(text: &str) -> Result<Vec<CaseTrace>, TraceError> {
    let mut blocks: Vec<Vec<(usize, TraceEvent)>> = vec![vec![]];
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            if !blocks.last().unwrap().is_empty() {
                blocks.push(vec![]);
            }
            continue;
        }
        let ev: TraceEvent = serde_json::from_str(line).map_err(|source| TraceError::Json {
            line: i + 1,
            source,
        })?;
        blocks.last_mut().unwrap().push((i + 1, ev));
    }
    let mut out: Vec<CaseTrace> = Vec::new();
    for block in blocks.into_iter().filter(|b| !b.is_empty()) {
        let case_ref = block[0].1.case_ref.clone();
        if out.iter().any(|c| c.case_ref == case_ref) {
            return Err(TraceError::Repeated(case_ref));
        }
        let mut starter = None;
        let mut events = Vec::new();
        for (line, ev) in block {
            if ev.case_ref != case_ref {
                return Err(TraceError::MixedCase {
                    line,
                    expected: case_ref,
                    found: ev.case_ref,
                });
            }
            if ev.element.is_start() {
                if !events.is_empty() || starter.is_some() {
                    return Err(TraceError::LateStart {
                        line,
                        case: case_ref,
                    });
                }
                starter = Some(ev.actor);
            } else {
                events.push(ev);
            }
        }
        let starter = starter
            .or_else(|| events.first().map(|e| e.actor.clone()))
            .unwrap_or_default();
        out.push(CaseTrace {
            case_ref,
            starter,
            events,
        });
    }
    Ok(out)
}
