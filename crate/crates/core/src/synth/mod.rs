//! Patch encodings: which statements to guard with which lock.

mod encoding;

use std::collections::{BTreeMap, BTreeSet};

use crate::lang::path::THIS;
use crate::lang::{AccessPath, Program, Site, Stmt, StmtKind};
use crate::race::{BugAccess, BugCluster};
use crate::summary::{SummaryMap, TraceFrame};

pub use encoding::{render_alternative, PatchAction, PatchEncoding, SyncTarget};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LockStrategy {
    #[default]
    Frequency,
    Distance,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PatchTarget {
    /// Guard the innermost statement common to the accesses' call chains.
    #[default]
    RootCause,
    /// Guard the statement of the summarized method (the outermost caller).
    CallSite,
}

/// Locks ordered by how many accesses hold them, most first; ties by
/// rendered path.
pub fn rank_locks_frequency<'a>(locks: impl IntoIterator<Item = &'a AccessPath>) -> Vec<AccessPath> {
    let mut counts: BTreeMap<String, (usize, &AccessPath)> = BTreeMap::new();
    for l in locks {
        counts.entry(l.to_string()).or_insert((0, l)).0 += 1;
    }
    let mut ranked: Vec<(usize, String, &AccessPath)> = counts.into_iter().map(|(s, (n, l))| (n, s, l)).collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    ranked.into_iter().map(|(_, _, l)| l.clone()).collect()
}

/// Locks ordered by closeness to `pi`: prefixes of `pi` first, longest
/// first, then the rest in rendered order.
pub fn rank_locks_distance<'a>(locks: impl IntoIterator<Item = &'a AccessPath>, pi: &AccessPath) -> Vec<AccessPath> {
    let set: BTreeSet<&AccessPath> = locks.into_iter().collect();
    let mut ranked: Vec<(bool, usize, String, &AccessPath)> = set
        .into_iter()
        .map(|l| {
            if l.is_prefix_of(pi) {
                (false, pi.len() - l.len(), l.to_string(), l)
            } else {
                (true, 0, l.to_string(), l)
            }
        })
        .collect();
    ranked.sort();
    ranked.into_iter().map(|(.., l)| l.clone()).collect()
}

/// Call chain of an access: its summarized method followed by the trace.
fn chain(a: &BugAccess) -> Vec<TraceFrame> {
    let mut c = vec![TraceFrame::new(a.class.clone(), a.method.clone())];
    c.extend(a.snapshot.trace.iter().cloned());
    c
}

/// Depth in each access's chain at which it should be guarded.
fn target_depths(accesses: &[&BugAccess], cls: &str) -> Vec<usize> {
    let chains: Vec<Vec<TraceFrame>> = accesses.iter().map(|a| chain(a)).collect();
    let common: Vec<&TraceFrame> = chains[0]
        .iter()
        .filter(|f| chains.iter().all(|c| c.contains(f)))
        .collect();
    // A frame every chain ends in: all accesses happen directly there.
    if let Some(f) = common.last() {
        if chains.iter().all(|c| c.last() == Some(f)) {
            return chains.iter().map(|c| c.len() - 1).collect();
        }
    }
    chains
        .iter()
        .map(|c| {
            c.iter()
                .rposition(|f| f.class == cls)
                .or_else(|| common.last().and_then(|f| c.iter().position(|g| g == *f)))
                .unwrap_or(0)
        })
        .collect()
}

/// Sites in the method at `depth` of the access's chain that lead to it.
fn sites_at_depth(a: &BugAccess, depth: usize, sm: &SummaryMap) -> Vec<Site> {
    if depth == 0 {
        return vec![a.snapshot.site.clone()];
    }
    let frame = &a.snapshot.trace[depth - 1];
    let rest = &a.snapshot.trace[depth..];
    let Some(summary) = sm.get(&frame.class, &frame.method) else {
        return Vec::new();
    };
    let sites: BTreeSet<Site> = summary
        .snapshots
        .iter()
        .filter(|s| {
            s.kind == a.snapshot.kind
                && s.trace == rest
                && a.snapshot.path.elements.ends_with(&s.path.elements)
                && s.path.len() <= a.snapshot.path.len()
        })
        .map(|s| s.site.clone())
        .collect();
    sites.into_iter().collect()
}

/// Statement targets for every access of a cluster, keyed by access.
pub fn innermost_common_access(
    accesses: &[&BugAccess],
    cls: &str,
    sm: &SummaryMap,
    mode: PatchTarget,
) -> BTreeMap<BugAccess, Vec<SyncTarget>> {
    let depths = match mode {
        PatchTarget::RootCause => target_depths(accesses, cls),
        PatchTarget::CallSite => vec![0; accesses.len()],
    };
    accesses
        .iter()
        .zip(depths)
        .map(|(a, d)| {
            let mut sites = sites_at_depth(a, d, sm);
            let d = if sites.is_empty() {
                sites = vec![a.snapshot.site.clone()];
                0
            } else {
                d
            };
            let frame = if d == 0 {
                TraceFrame::new(a.class.clone(), a.method.clone())
            } else {
                a.snapshot.trace[d - 1].clone()
            };
            let targets = sites
                .into_iter()
                .map(|site| SyncTarget {
                    class: frame.class.clone(),
                    method: frame.method.clone(),
                    site,
                    depth: d,
                })
                .collect();
            ((*a).clone(), targets)
        })
        .collect()
}

/// Whether `lock`, written in the frame of `a`'s summarized method, denotes
/// the same object when evaluated at `target`.
fn lock_valid_at(program: &Program, lock: &AccessPath, a: &BugAccess, target: &SyncTarget) -> bool {
    if lock.has_wildcard() {
        return false;
    }
    if lock.base != THIS && program.class(&lock.base).is_some() {
        return true;
    }
    if target.depth != 0 || target.class != a.class || target.method != a.method {
        return false;
    }
    let Some(m) = program.method(&a.class, &a.method) else {
        return false;
    };
    if lock.base == THIS {
        !m.is_static
    } else {
        m.param_index(&lock.base).is_some() && !assigns_local(&m.body, &lock.base)
    }
}

fn assigns_local(stmts: &[Stmt], name: &str) -> bool {
    stmts.iter().any(|s| {
        matches!(&s.kind, StmtKind::Assign { target: crate::lang::Expr::Name(n), .. } if n == name)
            || s.children().into_iter().any(|c| assigns_local(c, name))
    })
}

/// First of `v`, `v1`, `v2`, … unused as a member, parameter or local of
/// `class`.
pub fn fresh_name(program: &Program, class: &str) -> String {
    let mut taken = BTreeSet::new();
    if let Some(c) = program.class(class) {
        taken.extend(c.fields.iter().map(|f| f.name.clone()));
        taken.extend(c.methods.iter().map(|m| m.name.clone()));
        for m in &c.methods {
            taken.extend(m.params.iter().map(|p| p.name.clone()));
            collect_locals(&m.body, &mut taken);
        }
    }
    taken.extend(program.classes.iter().map(|c| c.name.clone()));
    std::iter::once("v".to_string())
        .chain((1..).map(|i| format!("v{i}")))
        .find(|n| !taken.contains(n))
        .expect("unbounded name supply")
}

fn collect_locals(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        if let StmtKind::LocalDecl { name, .. } = &s.kind {
            out.insert(name.clone());
        }
        for c in s.children() {
            collect_locals(c, out);
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SynthConfig {
    pub strategy: LockStrategy,
    pub target: PatchTarget,
}

/// Encoding for one cluster: one alternative per usable existing lock (or a
/// fresh mutex), then `VOLATILE` on the raced field.
pub fn create_patch_encoding(
    program: &Program,
    sm: &SummaryMap,
    cluster: &BugCluster,
    cfg: SynthConfig,
) -> PatchEncoding {
    let accesses = cluster.accesses();
    assert!(!accesses.is_empty(), "cluster without accesses");
    let targets = innermost_common_access(&accesses, &cluster.cls, sm, cfg.target);

    let held: Vec<&AccessPath> = accesses.iter().flat_map(|a| a.snapshot.locks.iter()).collect();
    let ranked = match cfg.strategy {
        LockStrategy::Frequency => rank_locks_frequency(held),
        LockStrategy::Distance => rank_locks_distance(held, &cluster.shared_path),
    };

    let mut fixes = Vec::new();
    for lock in &ranked {
        let mut syncs: BTreeSet<BTreeSet<SyncTarget>> = BTreeSet::new();
        let mut usable = true;
        for a in &accesses {
            if a.snapshot.locks.contains(lock) {
                continue;
            }
            let mut ts: BTreeSet<SyncTarget> = targets[*a].iter().cloned().collect();
            if !ts.iter().all(|t| lock_valid_at(program, lock, a, t)) {
                // Fall back to the summarized method's own statement.
                let own = SyncTarget {
                    class: a.class.clone(),
                    method: a.method.clone(),
                    site: a.snapshot.site.clone(),
                    depth: 0,
                };
                if !lock_valid_at(program, lock, a, &own) {
                    usable = false;
                    break;
                }
                ts = BTreeSet::from([own]);
            }
            syncs.insert(ts);
        }
        if usable && !syncs.is_empty() {
            fixes.push(PatchEncoding::And(
                syncs
                    .into_iter()
                    .map(|targets| PatchEncoding::Action(PatchAction::Sync { targets, lock: lock.clone() }))
                    .collect(),
            ));
        }
    }

    if fixes.is_empty() {
        fixes.push(fresh_mutex_fix(program, cluster, &accesses, &targets));
    }

    let mut alternatives = fixes;
    if let Some(field) = cluster.shared_path.last_field() {
        let already = program
            .class(&cluster.cls)
            .and_then(|c| c.field(field))
            .is_none_or(|f| f.is_volatile);
        if !already {
            alternatives.push(PatchEncoding::Action(PatchAction::Volatile {
                field: field.to_string(),
                class: cluster.cls.clone(),
            }));
        }
    }
    PatchEncoding::Or(alternatives)
}

fn fresh_mutex_fix(
    program: &Program,
    cluster: &BugCluster,
    accesses: &[&BugAccess],
    targets: &BTreeMap<BugAccess, Vec<SyncTarget>>,
) -> PatchEncoding {
    let var = fresh_name(program, &cluster.cls);
    let all: Vec<&SyncTarget> = accesses.iter().flat_map(|a| targets[*a].iter()).collect();
    let is_static = all.iter().any(|t| {
        t.class != cluster.cls || program.method(&t.class, &t.method).is_none_or(|m| m.is_static)
    });
    let lock = if is_static {
        AccessPath::new(cluster.cls.clone()).field(var.clone())
    } else {
        AccessPath::this().field(var.clone())
    };
    let mut parts = vec![PatchEncoding::Action(PatchAction::Declare {
        class: cluster.cls.clone(),
        var,
        ty: "Object".to_string(),
        is_static,
    })];
    let syncs: BTreeSet<BTreeSet<SyncTarget>> = accesses
        .iter()
        .map(|a| targets[*a].iter().cloned().collect())
        .collect();
    parts.extend(
        syncs
            .into_iter()
            .map(|targets| PatchEncoding::Action(PatchAction::Sync { targets, lock: lock.clone() })),
    );
    PatchEncoding::And(parts)
}

/// Encodings for every cluster, in cluster order.
pub fn create_patch_encodings(
    program: &Program,
    sm: &SummaryMap,
    clusters: &[BugCluster],
    cfg: SynthConfig,
) -> Vec<PatchEncoding> {
    clusters
        .iter()
        .map(|c| create_patch_encoding(program, sm, c, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> AccessPath {
        s.parse().unwrap()
    }

    #[test]
    fn frequency_ranking() {
        let locks = [p("this.m1"), p("this.m2"), p("this.m1")];
        assert_eq!(rank_locks_frequency(&locks), vec![p("this.m1"), p("this.m2")]);
        assert!(rank_locks_frequency(&[]).is_empty());
        let tie = [p("this.m2"), p("this.m1")];
        assert_eq!(rank_locks_frequency(&tie), vec![p("this.m1"), p("this.m2")]);
    }

    #[test]
    fn distance_ranking() {
        let pi = p("this.A.b");
        assert_eq!(rank_locks_distance(&[p("this"), p("this.A")], &pi), vec![p("this.A"), p("this")]);
        assert_eq!(rank_locks_distance(&[p("x.y"), p("this")], &pi), vec![p("this"), p("x.y")]);
        assert_eq!(
            rank_locks_distance(&[p("this"), p("this.A.b"), p("this.A")], &pi),
            vec![p("this.A.b"), p("this.A"), p("this")]
        );
        assert_eq!(rank_locks_distance(&[p("this")], &pi), vec![p("this")]);
    }
}
