//! Random block-structured models: sequences, exclusive and parallel
//! blocks, and at most one sub-process guarded by an interrupting error
//! boundary whose body may fail through an error end.

use rand::Rng;

use crate::model::{Flow, Guard, Kind, Model, Node, Process};

pub const MAX_ELEMENTS: usize = 12;
pub const ERROR_CODE: &str = "Fail";

struct Builder<'r, R: Rng> {
    rng: &'r mut R,
    nodes: usize,
    flows: usize,
    budget: usize,
    sub_used: bool,
}

impl<R: Rng> Builder<'_, R> {
    fn node(&mut self, p: &mut Process, kind: Kind) -> String {
        self.nodes += 1;
        let id = format!("n{}", self.nodes);
        p.nodes.push(Node {
            id: id.clone(),
            kind,
        });
        id
    }

    fn flow(
        &mut self,
        p: &mut Process,
        source: &str,
        target: &str,
        guard: Option<Guard>,
    ) -> String {
        self.flows += 1;
        let id = format!("f{}", self.flows);
        p.flows.push(Flow {
            id: id.clone(),
            source: source.into(),
            target: target.into(),
            guard,
        });
        id
    }

    fn task(&mut self, p: &mut Process) -> (String, String) {
        let kind = if self.rng.gen_bool(0.75) {
            Kind::UserTask { sets: None }
        } else {
            Kind::ScriptTask { sets: None }
        };
        let id = self.node(p, kind);
        (id.clone(), id)
    }

    /// Adds a block to `p`; returns its entry and exit nodes. Callers
    /// guarantee a budget of at least one element.
    fn block(&mut self, p: &mut Process, depth: usize, in_sub: bool) -> (String, String) {
        let choice = if depth > 3 {
            0
        } else {
            self.rng.gen_range(0..7)
        };
        match choice {
            1 | 2 if self.budget >= 2 => {
                let (a_in, a_out) = self.reserving(1, |b| b.block(p, depth + 1, in_sub));
                let (b_in, b_out) = self.block(p, depth + 1, in_sub);
                self.flow(p, &a_out, &b_in, None);
                (a_in, b_out)
            }
            3 | 4 if self.budget >= 4 => {
                self.budget -= 2;
                let (split, join) = if choice == 3 {
                    (
                        self.node(p, Kind::XorSplit { default: None }),
                        self.node(p, Kind::XorJoin),
                    )
                } else {
                    (self.node(p, Kind::AndSplit), self.node(p, Kind::AndJoin))
                };
                let (a_in, a_out) = self.reserving(1, |b| b.block(p, depth + 1, in_sub));
                let (b_in, b_out) = self.block(p, depth + 1, in_sub);
                if choice == 3 {
                    let g = self.rng.gen_bool(0.5);
                    self.flow(p, &split, &a_in, Some(Guard::Const(g)));
                    let d = self.flow(p, &split, &b_in, None);
                    set_default(p, &split, d);
                } else {
                    self.flow(p, &split, &a_in, None);
                    self.flow(p, &split, &b_in, None);
                }
                self.flow(p, &a_out, &join, None);
                self.flow(p, &b_out, &join, None);
                (split, join)
            }
            5 if in_sub && self.budget >= 3 => {
                self.budget -= 2;
                let split = self.node(p, Kind::XorSplit { default: None });
                let fail = self.node(p, Kind::ErrorEnd(ERROR_CODE.into()));
                let (t_in, t_out) = self.block(p, depth + 1, in_sub);
                let g = self.rng.gen_bool(0.5);
                self.flow(p, &split, &fail, Some(Guard::Const(g)));
                let d = self.flow(p, &split, &t_in, None);
                set_default(p, &split, d);
                (split, t_out)
            }
            // sub-process, its start and end, the boundary and its end
            6 if !in_sub && !self.sub_used && self.budget >= 6 => {
                self.sub_used = true;
                self.budget -= 5;
                let mut body = Process::default();
                let start = self.node(&mut body, Kind::Start);
                let (b_in, b_out) = self.block(&mut body, depth + 1, true);
                let end = self.node(&mut body, Kind::End);
                self.flow(&mut body, &start, &b_in, None);
                self.flow(&mut body, &b_out, &end, None);
                body.id = format!("n{}_body", self.nodes + 1);
                let sub = self.node(p, Kind::SubProcess(Box::new(body)));
                let boundary = self.node(
                    p,
                    Kind::ErrorBoundary {
                        attached: sub.clone(),
                        code: ERROR_CODE.into(),
                    },
                );
                let handler_end = self.node(p, Kind::End);
                self.flow(p, &boundary, &handler_end, None);
                (sub.clone(), sub)
            }
            _ => {
                self.budget -= 1;
                self.task(p)
            }
        }
    }

    /// Runs `f` with `n` elements of the budget held back.
    fn reserving<T>(&mut self, n: usize, f: impl FnOnce(&mut Self) -> T) -> T {
        self.budget -= n;
        let out = f(self);
        self.budget += n;
        out
    }
}

fn set_default(p: &mut Process, split: &str, flow: String) {
    let n = p
        .nodes
        .iter_mut()
        .find(|n| n.id == split)
        .expect("split exists");
    n.kind = Kind::XorSplit {
        default: Some(flow),
    };
}

/// A sound model with at most [`MAX_ELEMENTS`] elements.
pub fn random_model<R: Rng>(rng: &mut R) -> Model {
    let mut b = Builder {
        rng,
        nodes: 0,
        flows: 0,
        // start and end are always there
        budget: MAX_ELEMENTS - 2,
        sub_used: false,
    };
    let mut root = Process {
        id: "Main".into(),
        ..Process::default()
    };
    let start = b.node(&mut root, Kind::Start);
    let (b_in, b_out) = b.block(&mut root, 0, false);
    let end = b.node(&mut root, Kind::End);
    b.flow(&mut root, &start, &b_in, None);
    b.flow(&mut root, &b_out, &end, None);
    let errors = if b.sub_used {
        vec![ERROR_CODE.to_string()]
    } else {
        vec![]
    };
    Model {
        root,
        called: vec![],
        errors,
    }
}
