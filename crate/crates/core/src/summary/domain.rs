use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lang::{AccessPath, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessKind {
    Read,
    Write,
}

impl AccessKind {
    pub fn short(self) -> &'static str {
        match self {
            AccessKind::Read => "rd",
            AccessKind::Write => "wr",
        }
    }
}

/// Which threads may execute an access. Totally ordered; join is `max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ThreadKind {
    NoThread,
    AnyThreadButMain,
    AnyThread,
}

impl ThreadKind {
    pub fn join(self, other: ThreadKind) -> ThreadKind {
        self.max(other)
    }

    pub fn name(self) -> &'static str {
        match self {
            ThreadKind::NoThread => "NoThread",
            ThreadKind::AnyThreadButMain => "AnyThreadButMain",
            ThreadKind::AnyThread => "AnyThread",
        }
    }
}

/// `OwnedIf(S)`: owned provided the formals in `S` are owned at the call
/// site. `OwnedIf(∅)` is plain ownership.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ownership {
    OwnedIf(BTreeSet<usize>),
    Unowned,
}

impl Ownership {
    pub fn owned() -> Self {
        Ownership::OwnedIf(BTreeSet::new())
    }

    pub fn owned_if(index: usize) -> Self {
        Ownership::OwnedIf(BTreeSet::from([index]))
    }

    pub fn is_unowned(&self) -> bool {
        matches!(self, Ownership::Unowned)
    }

    pub fn join(&self, other: &Ownership) -> Ownership {
        match (self, other) {
            (Ownership::OwnedIf(a), Ownership::OwnedIf(b)) => {
                Ownership::OwnedIf(a.union(b).copied().collect())
            }
            _ => Ownership::Unowned,
        }
    }
}

impl fmt::Display for Ownership {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ownership::Unowned => f.write_str("Unowned"),
            Ownership::OwnedIf(s) if s.is_empty() => f.write_str("Owned"),
            Ownership::OwnedIf(s) => {
                let idx: Vec<String> = s.iter().map(|i| i.to_string()).collect();
                write!(f, "OwnedIf{{{}}}", idx.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceFrame {
    pub class: String,
    pub method: String,
}

impl TraceFrame {
    pub fn new(class: impl Into<String>, method: impl Into<String>) -> Self {
        TraceFrame {
            class: class.into(),
            method: method.into(),
        }
    }
}

impl fmt::Display for TraceFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}()", self.class, self.method)
    }
}

/// One abstract memory access as seen from the summarized method.
///
/// `site` is the statement of the summarized method where the access
/// happens; for an access performed inside a callee it is the call
/// statement, and `trace` lists the callee chain down to the method that
/// touches the memory directly.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AccessSnapshot {
    pub path: AccessPath,
    pub kind: AccessKind,
    pub locks: BTreeSet<AccessPath>,
    pub thread: ThreadKind,
    pub ownership: Ownership,
    pub trace: Vec<TraceFrame>,
    pub site: Site,
}

impl AccessSnapshot {
    pub fn is_write(&self) -> bool {
        self.kind == AccessKind::Write
    }
}

impl fmt::Display for AccessSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let locks: Vec<String> = self.locks.iter().map(|l| l.to_string()).collect();
        let trace: Vec<String> = self.trace.iter().map(|t| t.to_string()).collect();
        write!(
            f,
            "<{}, {}, {{{}}}, {}, {}, [{}]> @{}",
            self.path,
            self.kind.short(),
            locks.join(", "),
            self.thread.name(),
            self.ownership,
            trace.join(", "),
            self.site
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MethodSummary {
    pub class: String,
    pub method: String,
    pub snapshots: BTreeSet<AccessSnapshot>,
}

impl MethodSummary {
    pub fn new(class: impl Into<String>, method: impl Into<String>) -> Self {
        MethodSummary {
            class: class.into(),
            method: method.into(),
            snapshots: BTreeSet::new(),
        }
    }
}

pub type MethodKey = (String, String);

/// Summaries of every analyzed method, keyed by `(class, method)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SummaryMap {
    summaries: BTreeMap<MethodKey, MethodSummary>,
}

impl SummaryMap {
    pub fn new() -> Self {
        SummaryMap::default()
    }

    pub fn insert(&mut self, summary: MethodSummary) {
        self.summaries
            .insert((summary.class.clone(), summary.method.clone()), summary);
    }

    pub fn get(&self, class: &str, method: &str) -> Option<&MethodSummary> {
        self.summaries.get(&(class.to_string(), method.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &MethodSummary> {
        self.summaries.values()
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }

    /// Summaries of the methods of `class`, in method-name order.
    pub fn of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a MethodSummary> + 'a {
        self.summaries.values().filter(move |s| s.class == class)
    }
}

impl FromIterator<MethodSummary> for SummaryMap {
    fn from_iter<T: IntoIterator<Item = MethodSummary>>(iter: T) -> Self {
        let mut map = SummaryMap::new();
        for s in iter {
            map.insert(s);
        }
        map
    }
}
