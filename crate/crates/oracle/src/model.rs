#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guard {
    Const(bool),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kind {
    Start,
    End,
    ErrorEnd(String),
    /// Waits for a check-in; the input, if any, is stored in `sets`.
    UserTask {
        sets: Option<String>,
    },
    ScriptTask {
        sets: Option<(String, bool)>,
    },
    XorSplit {
        default: Option<String>,
    },
    XorJoin,
    AndSplit,
    AndJoin,
    SubProcess(Box<Process>),
    /// Reuses a process of the model by id, like a call activity.
    Call(String),
    ErrorBoundary {
        attached: String,
        code: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub kind: Kind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub id: String,
    pub source: String,
    pub target: String,
    pub guard: Option<Guard>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Process {
    pub id: String,
    pub vars: Vec<String>,
    pub nodes: Vec<Node>,
    pub flows: Vec<Flow>,
}

impl Process {
    pub fn node(&self, id: &str) -> &Node {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .unwrap_or_else(|| panic!("no node {id}"))
    }

    pub fn incoming(&self, id: &str) -> Vec<&Flow> {
        self.flows.iter().filter(|f| f.target == id).collect()
    }

    pub fn outgoing(&self, id: &str) -> Vec<&Flow> {
        self.flows.iter().filter(|f| f.source == id).collect()
    }

    pub fn element_count(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| match &n.kind {
                Kind::SubProcess(body) => 1 + body.element_count(),
                _ => 1,
            })
            .sum()
    }
}

/// Root process plus the processes reachable through [`Kind::Call`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Model {
    pub root: Process,
    pub called: Vec<Process>,
    /// Error code ids used by error ends and boundaries.
    pub errors: Vec<String>,
}

impl Model {
    pub fn called(&self, id: &str) -> &Process {
        self.called
            .iter()
            .find(|p| p.id == id)
            .unwrap_or_else(|| panic!("no process {id}"))
    }
}
