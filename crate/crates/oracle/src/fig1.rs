//! The running example, written out by hand in oracle terms.

use crate::model::{Flow, Guard, Kind, Model, Node, Process};

fn node(id: &str, kind: Kind) -> Node {
    Node {
        id: id.into(),
        kind,
    }
}

fn flow(id: &str, source: &str, target: &str, guard: Option<Guard>) -> Flow {
    Flow {
        id: id.into(),
        source: source.into(),
        target: target.into(),
        guard,
    }
}

pub fn fig1() -> Model {
    let root = Process {
        id: "Root".into(),
        vars: vec!["t1Field".into(), "t2Field".into()],
        nodes: vec![
            node("E1", Kind::Start),
            node(
                "T1",
                Kind::UserTask {
                    sets: Some("t1Field".into()),
                },
            ),
            node(
                "G1",
                Kind::XorSplit {
                    default: Some("F4".into()),
                },
            ),
            node(
                "T2",
                Kind::UserTask {
                    sets: Some("t2Field".into()),
                },
            ),
            node(
                "T3",
                Kind::ScriptTask {
                    sets: Some(("t2Field".into(), true)),
                },
            ),
            node("G2", Kind::XorJoin),
            node(
                "B7",
                Kind::ErrorBoundary {
                    attached: "S1".into(),
                    code: "S1Error".into(),
                },
            ),
            node("S1", Kind::Call("S1Process".into())),
            node("E2", Kind::End),
            node("S2", Kind::Call("S2Process".into())),
            node("E3", Kind::End),
        ],
        flows: vec![
            flow("F1", "E1", "T1", None),
            flow("F2", "T1", "G1", None),
            flow("F3", "G1", "T2", Some(Guard::Var("t1Field".into()))),
            flow("F4", "G1", "T3", None),
            flow("F5", "T2", "G2", None),
            flow("F6", "T3", "G2", None),
            flow("F7", "G2", "S1", None),
            flow("F8", "S1", "E2", None),
            flow("F9", "B7", "S2", None),
            flow("F10", "S2", "E3", None),
        ],
    };
    let s1 = Process {
        id: "S1Process".into(),
        vars: vec!["fail".into()],
        nodes: vec![
            node("S1Start", Kind::Start),
            node(
                "S1Task",
                Kind::UserTask {
                    sets: Some("fail".into()),
                },
            ),
            node(
                "S1Check",
                Kind::XorSplit {
                    default: Some("S1F4".into()),
                },
            ),
            node("S1ErrorEnd", Kind::ErrorEnd("S1Error".into())),
            node("S1End", Kind::End),
        ],
        flows: vec![
            flow("S1F1", "S1Start", "S1Task", None),
            flow("S1F2", "S1Task", "S1Check", None),
            flow(
                "S1F3",
                "S1Check",
                "S1ErrorEnd",
                Some(Guard::Var("fail".into())),
            ),
            flow("S1F4", "S1Check", "S1End", None),
        ],
    };
    let s2 = Process {
        id: "S2Process".into(),
        vars: vec![],
        nodes: vec![
            node("S2Start", Kind::Start),
            node("S2Task", Kind::UserTask { sets: None }),
            node("S2End", Kind::End),
        ],
        flows: vec![
            flow("S2F1", "S2Start", "S2Task", None),
            flow("S2F2", "S2Task", "S2End", None),
        ],
    };
    Model {
        root,
        called: vec![s1, s2],
        errors: vec!["S1Error".into()],
    }
}
