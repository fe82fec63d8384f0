//! Race and unprotected-write detection over method summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lang::{AccessPath, Program, Scope, Site};
use crate::summary::typing::declaring_class;
use crate::summary::{AccessSnapshot, SummaryMap, ThreadKind};

/// Two accesses to the same path, at least one a write, under disjoint
/// locks, possibly concurrent, on unowned memory.
pub fn race(a1: &AccessSnapshot, a2: &AccessSnapshot) -> bool {
    a1.path == a2.path
        && (a1.is_write() || a2.is_write())
        && a1.locks.is_disjoint(&a2.locks)
        && a1.thread.join(a2.thread) == ThreadKind::AnyThread
        && a1.ownership.is_unowned()
        && a2.ownership.is_unowned()
}

pub fn unprotected_write(a: &AccessSnapshot) -> bool {
    a.is_write() && a.locks.is_empty() && a.thread == ThreadKind::AnyThread && a.ownership.is_unowned()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BugKind {
    Race,
    UnprotectedWrite,
}

impl BugKind {
    pub fn name(self) -> &'static str {
        match self {
            BugKind::Race => "race",
            BugKind::UnprotectedWrite => "unprotected_write",
        }
    }
}

/// A snapshot together with the method whose summary it belongs to.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BugAccess {
    pub class: String,
    pub method: String,
    pub snapshot: AccessSnapshot,
}

impl BugAccess {
    pub fn site(&self) -> &Site {
        &self.snapshot.site
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bug {
    /// One access for an unprotected write, two (ordered) for a race.
    pub accesses: Vec<BugAccess>,
    pub kind: BugKind,
    /// Class declaring the innermost field of the raced path.
    pub cls: String,
}

impl Bug {
    pub fn path(&self) -> &AccessPath {
        &self.accesses[0].snapshot.path
    }

    /// Identity used for deduplication: the raced path and the unordered
    /// set of sites.
    pub fn key(&self) -> (BugKind, AccessPath, Vec<Site>) {
        let mut sites: Vec<Site> = self.accesses.iter().map(|a| a.site().clone()).collect();
        sites.sort();
        (self.kind, self.path().clone(), sites)
    }

    /// Site-independent description, stable under edits that shift lines.
    pub fn signature(&self) -> String {
        let mut parts: Vec<String> = self
            .accesses
            .iter()
            .map(|a| {
                let trace: Vec<String> = a.snapshot.trace.iter().map(|t| t.to_string()).collect();
                format!(
                    "{}.{}:{}[{}]",
                    a.class,
                    a.method,
                    a.snapshot.kind.short(),
                    trace.join(",")
                )
            })
            .collect();
        parts.sort();
        format!("{} {} {}", self.kind.name(), self.path(), parts.join(" "))
    }
}

impl fmt::Display for Bug {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}:", self.kind.name(), self.path())?;
        for (i, a) in self.accesses.iter().enumerate() {
            let locks: Vec<String> = a.snapshot.locks.iter().map(|l| l.to_string()).collect();
            write!(
                f,
                "{} {}.{} {} @{} locks {{{}}}",
                if i == 0 { "" } else { " <->" },
                a.class,
                a.method,
                a.snapshot.kind.short(),
                a.snapshot.site,
                locks.join(", ")
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BugCluster {
    pub shared_path: AccessPath,
    pub cls: String,
    pub bugs: Vec<Bug>,
}

impl BugCluster {
    pub fn key(&self) -> (AccessPath, String) {
        (self.shared_path.clone(), self.cls.clone())
    }

    /// Every distinct access of the cluster, in a stable order.
    pub fn accesses(&self) -> Vec<&BugAccess> {
        let set: BTreeSet<&BugAccess> = self.bugs.iter().flat_map(|b| b.accesses.iter()).collect();
        set.into_iter().collect()
    }
}

fn field_class(program: &Program, a: &BugAccess) -> String {
    let owner = program.class(&a.class);
    owner
        .and_then(|c| {
            let scope = Scope::new(program, c, c.method(&a.method));
            declaring_class(&a.snapshot.path, &scope)
        })
        .unwrap_or_else(|| a.class.clone())
}

fn located(sm: &SummaryMap, classes: &BTreeSet<String>) -> Vec<(usize, BugAccess)> {
    let mut out = Vec::new();
    for (i, s) in sm.iter().filter(|s| classes.contains(&s.class)).enumerate() {
        for snap in &s.snapshots {
            out.push((
                i,
                BugAccess {
                    class: s.class.clone(),
                    method: s.method.clone(),
                    snapshot: snap.clone(),
                },
            ));
        }
    }
    out
}

/// All bugs among the methods of `classes`, pairing every two methods
/// (a method with itself included). Accesses of different classes are only
/// compared on statically rooted paths. A write/write pair that is already
/// reported as two unprotected writes is not repeated as a race.
pub fn detect_bugs(program: &Program, sm: &SummaryMap, classes: &BTreeSet<String>) -> Vec<Bug> {
    let accesses = located(sm, classes);
    let static_root = |p: &AccessPath| program.class(&p.base).is_some() && p.base != crate::lang::path::THIS;
    let mut bugs: BTreeMap<(BugKind, AccessPath, Vec<Site>), Bug> = BTreeMap::new();
    let mut add = |bug: Bug| {
        bugs.entry(bug.key()).or_insert(bug);
    };
    for (i, (_, a)) in accesses.iter().enumerate() {
        if unprotected_write(&a.snapshot) {
            add(Bug {
                cls: field_class(program, a),
                accesses: vec![a.clone()],
                kind: BugKind::UnprotectedWrite,
            });
        }
        for (_, b) in &accesses[i..] {
            if a.class != b.class && !static_root(&a.snapshot.path) {
                continue;
            }
            if !race(&a.snapshot, &b.snapshot)
                || (unprotected_write(&a.snapshot) && unprotected_write(&b.snapshot))
            {
                continue;
            }
            let mut pair = vec![a.clone(), b.clone()];
            pair.sort_by(|x, y| (x.site(), x).cmp(&(y.site(), y)));
            add(Bug {
                cls: field_class(program, &pair[0]),
                accesses: pair,
                kind: BugKind::Race,
            });
        }
    }
    bugs.into_values().collect()
}

/// Groups bugs by raced path and declaring class, in key order.
pub fn cluster_bugs(bugs: &[Bug]) -> Vec<BugCluster> {
    let mut groups: BTreeMap<(AccessPath, String), Vec<Bug>> = BTreeMap::new();
    for b in bugs {
        assert!(
            b.accesses.iter().all(|a| &a.snapshot.path == b.path()),
            "bug accesses disagree on the raced path"
        );
        groups.entry((b.path().clone(), b.cls.clone())).or_default().push(b.clone());
    }
    groups
        .into_iter()
        .map(|((shared_path, cls), bugs)| BugCluster { shared_path, cls, bugs })
        .collect()
}

pub fn render_report(bugs: &[Bug]) -> String {
    let mut out = String::new();
    for b in bugs {
        out.push_str(&b.to_string());
        out.push('\n');
    }
    out
}
