use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Guard, Kind, Model, Process};

/// A user task waiting in some instance; `path` lists child positions
/// from the root instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TaskRef {
    pub id: String,
    pub path: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Inst {
    process: Process,
    tokens: BTreeSet<String>,
    vars: BTreeMap<String, bool>,
    children: Vec<(String, Inst)>,
}

enum Step {
    Idle,
    Fired,
    Thrown(String),
}

impl Inst {
    fn spawn(process: Process) -> Inst {
        let mut tokens = BTreeSet::new();
        for n in &process.nodes {
            if n.kind == Kind::Start {
                for f in process.outgoing(&n.id) {
                    tokens.insert(f.id.clone());
                }
            }
        }
        let vars = process.vars.iter().map(|v| (v.clone(), false)).collect();
        Inst {
            process,
            tokens,
            vars,
            children: Vec::new(),
        }
    }

    fn done(&self) -> bool {
        self.tokens.is_empty() && self.children.is_empty()
    }

    fn marked_in(&self, id: &str) -> Vec<String> {
        self.process
            .incoming(id)
            .into_iter()
            .filter(|f| self.tokens.contains(&f.id))
            .map(|f| f.id.clone())
            .collect()
    }

    fn emit(&mut self, id: &str) {
        let out: Vec<String> = self
            .process
            .outgoing(id)
            .iter()
            .map(|f| f.id.clone())
            .collect();
        self.tokens.extend(out);
    }

    fn guard(&self, g: &Guard) -> bool {
        match g {
            Guard::Const(b) => *b,
            Guard::Var(v) => self.vars.get(v).copied().unwrap_or(false),
        }
    }

    fn step(&mut self, model: &Model) -> Step {
        let nodes = self.process.nodes.clone();
        for n in &nodes {
            let marked = self.marked_in(&n.id);
            if marked.is_empty() {
                continue;
            }
            let one = marked[0].clone();
            match &n.kind {
                Kind::Start | Kind::UserTask { .. } | Kind::ErrorBoundary { .. } => continue,
                Kind::End => {
                    self.tokens.remove(&one);
                }
                Kind::ErrorEnd(code) => {
                    self.tokens.remove(&one);
                    return Step::Thrown(code.clone());
                }
                Kind::ScriptTask { sets } => {
                    self.tokens.remove(&one);
                    if let Some((v, b)) = sets {
                        self.vars.insert(v.clone(), *b);
                    }
                    self.emit(&n.id);
                }
                Kind::XorSplit { default } => {
                    self.tokens.remove(&one);
                    let chosen = self
                        .process
                        .outgoing(&n.id)
                        .into_iter()
                        .filter(|f| Some(&f.id) != default.as_ref())
                        .find(|f| f.guard.as_ref().map(|g| self.guard(g)).unwrap_or(true))
                        .map(|f| f.id.clone())
                        .or_else(|| default.clone())
                        .expect("exclusive split without a path");
                    self.tokens.insert(chosen);
                }
                Kind::XorJoin | Kind::AndSplit => {
                    self.tokens.remove(&one);
                    self.emit(&n.id);
                }
                Kind::AndJoin => {
                    if marked.len() < self.process.incoming(&n.id).len() {
                        continue;
                    }
                    for m in marked {
                        self.tokens.remove(&m);
                    }
                    self.emit(&n.id);
                }
                Kind::SubProcess(body) => {
                    self.tokens.remove(&one);
                    self.children
                        .push((n.id.clone(), Inst::spawn((**body).clone())));
                }
                Kind::Call(target) => {
                    self.tokens.remove(&one);
                    self.children
                        .push((n.id.clone(), Inst::spawn(model.called(target).clone())));
                }
            }
            return Step::Fired;
        }
        for i in 0..self.children.len() {
            match self.children[i].1.step(model) {
                Step::Idle => {}
                Step::Fired => return Step::Fired,
                Step::Thrown(code) => {
                    let (host, _) = self.children.remove(i);
                    let boundary = self.process.nodes.iter().find(|b| {
                        matches!(&b.kind, Kind::ErrorBoundary { attached, code: c } if *attached == host && *c == code)
                    });
                    match boundary.map(|b| b.id.clone()) {
                        Some(b) => {
                            self.emit(&b);
                            return Step::Fired;
                        }
                        None => return Step::Thrown(code),
                    }
                }
            }
        }
        if let Some(i) = self.children.iter().position(|(_, c)| c.done()) {
            let (host, _) = self.children.remove(i);
            self.emit(&host);
            return Step::Fired;
        }
        Step::Idle
    }

    fn collect(&self, path: &mut Vec<usize>, out: &mut Vec<TaskRef>) {
        for n in &self.process.nodes {
            if matches!(n.kind, Kind::UserTask { .. }) && !self.marked_in(&n.id).is_empty() {
                out.push(TaskRef {
                    id: n.id.clone(),
                    path: path.clone(),
                });
            }
        }
        for (i, (_, c)) in self.children.iter().enumerate() {
            path.push(i);
            c.collect(path, out);
            path.pop();
        }
    }

    fn at(&mut self, path: &[usize]) -> Option<&mut Inst> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children.get_mut(*i)?.1.at(rest),
        }
    }
}

/// One running case of a model.
#[derive(Debug, Clone)]
pub struct Sim {
    model: Model,
    root: Inst,
    uncaught: Option<String>,
    steps: usize,
}

impl Sim {
    pub fn start(model: &Model) -> Sim {
        let mut s = Sim {
            root: Inst::spawn(model.root.clone()),
            model: model.clone(),
            uncaught: None,
            steps: 0,
        };
        s.settle();
        s
    }

    fn settle(&mut self) {
        loop {
            match self.root.step(&self.model) {
                Step::Idle => break,
                Step::Fired => self.steps += 1,
                Step::Thrown(code) => {
                    self.root.tokens.clear();
                    self.root.children.clear();
                    self.uncaught = Some(code);
                }
            }
        }
    }

    /// Waiting user tasks, sorted by element id.
    pub fn enabled(&self) -> Vec<TaskRef> {
        let mut out = Vec::new();
        self.root.collect(&mut Vec::new(), &mut out);
        out.sort();
        out
    }

    /// Completes a waiting task, optionally storing a boolean input.
    pub fn complete(&mut self, task: &TaskRef, input: Option<bool>) -> Result<(), String> {
        let inst = self.root.at(&task.path).ok_or("no such instance")?;
        let marked = inst.marked_in(&task.id);
        let Some(one) = marked.first().cloned() else {
            return Err(format!("{} is not enabled", task.id));
        };
        inst.tokens.remove(&one);
        if let Kind::UserTask { sets: Some(v) } = &inst.process.node(&task.id).kind {
            if let Some(b) = input {
                inst.vars.insert(v.clone(), b);
            }
        }
        inst.emit(&task.id);
        self.settle();
        Ok(())
    }

    pub fn is_completed(&self) -> bool {
        self.root.done()
    }

    pub fn uncaught(&self) -> Option<&str> {
        self.uncaught.as_deref()
    }

    /// Marked flows of the root instance.
    pub fn root_tokens(&self) -> Vec<String> {
        self.root.tokens.iter().cloned().collect()
    }

    pub fn root_vars(&self) -> BTreeMap<String, bool> {
        self.root.vars.clone()
    }

    /// Automatic firings so far.
    pub fn steps(&self) -> usize {
        self.steps
    }
}
