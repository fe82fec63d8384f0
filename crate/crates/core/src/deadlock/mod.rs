//! Lock-order graph and cycle detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::lang::path::{is_path_expr, THIS};
use crate::lang::{normalize_path, AccessPath, ClassDecl, MethodDecl, Program, Scope, Site, Stmt, StmtKind};
use crate::summary::typing::{calls_in, is_class_ref, resolve_call, Receiver};
use crate::summary::{monitor_of, MethodKey, MAX_PATH_LEN};

/// Observed acquisition orders: an edge `(outer, inner)` means `inner` was
/// acquired while `outer` was held.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LockOrderGraph {
    pub nodes: BTreeSet<AccessPath>,
    /// Witness: the site of the inner acquisition (or of the call leading to it).
    pub edges: BTreeMap<(AccessPath, AccessPath), Site>,
}

impl LockOrderGraph {
    pub fn add_edge(&mut self, outer: AccessPath, inner: AccessPath, site: Site) {
        self.nodes.insert(outer.clone());
        self.nodes.insert(inner.clone());
        self.edges.entry((outer, inner)).or_insert(site);
    }

    pub fn successors<'a>(&'a self, n: &'a AccessPath) -> impl Iterator<Item = &'a AccessPath> + 'a {
        self.edges
            .keys()
            .filter(move |(a, _)| a == n)
            .map(|(_, b)| b)
    }

    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges
            .keys()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeadlockCycle {
    /// Locks along the cycle, starting from the smallest.
    pub locks: Vec<AccessPath>,
    /// Witness site of each edge `locks[i] -> locks[i + 1]` (wrapping).
    pub witnesses: Vec<Site>,
}

impl DeadlockCycle {
    pub fn lock_names(&self) -> Vec<String> {
        self.locks.iter().map(|l| l.to_string()).collect()
    }
}

/// Locks a method acquires, each with the distinct locks of the method's
/// own frame held at that point (outermost first).
type Acquisitions = BTreeSet<(AccessPath, Vec<AccessPath>)>;

struct Walker<'a> {
    scope: Scope<'a>,
    summaries: &'a BTreeMap<MethodKey, Acquisitions>,
    stack: Vec<AccessPath>,
    acquires: Acquisitions,
    graph: LockOrderGraph,
}

impl<'a> Walker<'a> {
    /// Records acquiring `lock` while the current stack and then `inner`
    /// are held: every held lock is ordered before it. Re-acquiring a held
    /// lock yields edges too, so that wrapping code in a new block never
    /// loses an order; the self-loop it may add is not a cycle.
    fn acquire(&mut self, lock: AccessPath, inner: &[AccessPath], site: &Site) {
        let mut held = self.stack.clone();
        for l in inner {
            if !held.contains(l) {
                held.push(l.clone());
            }
        }
        for h in &held {
            self.graph.add_edge(h.clone(), lock.clone(), site.clone());
        }
        self.acquires.insert((lock, held));
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            let site = s.span.site();
            for (owner, call) in calls_in(std::slice::from_ref(s)) {
                if std::ptr::eq(owner, s) {
                    self.call(call, &site);
                }
            }
            match &s.kind {
                StmtKind::Sync { lock, body } => {
                    let Ok(lock) = normalize_path(lock, &self.scope) else {
                        continue;
                    };
                    self.acquire(lock.clone(), &[], &site);
                    let pushed = !self.stack.contains(&lock);
                    if pushed {
                        self.stack.push(lock);
                    }
                    self.stmts(body);
                    if pushed {
                        self.stack.pop();
                    }
                }
                _ => {
                    for child in s.children() {
                        self.stmts(child);
                    }
                }
            }
        }
    }

    fn call(&mut self, call: &crate::lang::CallExpr, site: &Site) {
        let Some(target) = resolve_call(call, &self.scope) else {
            return;
        };
        let Some(acq) = self.summaries.get(&(target.class.clone(), target.method.clone())) else {
            return;
        };
        let program = self.scope.program;
        let callee = program.method(&target.class, &target.method).expect("resolved");
        let receiver = match &target.receiver {
            Receiver::Path(p) => Some(p.clone()),
            _ => None,
        };
        let actual = |i: usize| -> Option<AccessPath> {
            let a = call.args.get(i)?;
            if !is_path_expr(a) {
                return None;
            }
            normalize_path(a, &self.scope).ok().filter(|p| !is_class_ref(p, &self.scope))
        };
        let subst = |lock: &AccessPath| -> Option<AccessPath> {
            let l = if lock.base == THIS {
                receiver.as_ref().map(|r| lock.rebase(r))
            } else if let Some(i) = callee.param_index(&lock.base) {
                actual(i).map(|root| AccessPath {
                    base: root.base.clone(),
                    elements: root.elements.iter().chain(lock.elements.iter()).cloned().collect(),
                })
            } else {
                None
            }
            .unwrap_or_else(|| lock.clone());
            (l.len() <= MAX_PATH_LEN).then_some(l)
        };
        let mut inherited = Vec::new();
        for (lock, held) in acq {
            let Some(l) = subst(lock) else { continue };
            let Some(h) = held.iter().map(&subst).collect::<Option<Vec<_>>>() else {
                continue;
            };
            inherited.push((l, h));
        }
        for (l, h) in inherited {
            self.acquire(l, &h, site);
        }
    }
}

fn walk_method(
    program: &Program,
    class: &ClassDecl,
    method: &MethodDecl,
    summaries: &BTreeMap<MethodKey, Acquisitions>,
) -> (Acquisitions, LockOrderGraph) {
    let mut w = Walker {
        scope: Scope::new(program, class, Some(method)),
        summaries,
        stack: Vec::new(),
        acquires: BTreeSet::new(),
        graph: LockOrderGraph::default(),
    };
    if method.is_synchronized {
        let m = monitor_of(class, method);
        w.acquire(m.clone(), &[], &method.span.site());
        w.stack.push(m);
    }
    w.stmts(&method.body);
    (w.acquires, w.graph)
}

/// Lock-order graph of the whole program. Nesting through calls is
/// followed by substituting the callee's acquisitions into the caller.
pub fn build_lock_order(program: &Program) -> LockOrderGraph {
    let mut summaries: BTreeMap<MethodKey, Acquisitions> = program
        .methods()
        .map(|(c, m)| ((c.name.clone(), m.name.clone()), BTreeSet::new()))
        .collect();
    loop {
        let mut changed = false;
        for (c, m) in program.methods() {
            let (acq, _) = walk_method(program, c, m, &summaries);
            let key = (c.name.clone(), m.name.clone());
            let entry = summaries.get_mut(&key).expect("seeded");
            let before = entry.len();
            entry.extend(acq);
            changed |= entry.len() != before;
        }
        if !changed {
            break;
        }
    }
    let mut graph = LockOrderGraph::default();
    for (c, m) in program.methods() {
        let (_, g) = walk_method(program, c, m, &summaries);
        for ((a, b), site) in g.edges {
            graph.add_edge(a, b, site);
        }
    }
    graph
}

/// Every elementary cycle of length two or more, each reported once,
/// rotated to start at its smallest lock, in sorted order.
pub fn find_deadlock_cycles(g: &LockOrderGraph) -> Vec<DeadlockCycle> {
    let mut out = BTreeSet::new();
    for start in &g.nodes {
        let mut path = vec![start];
        extend_cycles(g, start, &mut path, &mut out);
    }
    out.into_iter().collect()
}

fn extend_cycles<'a>(
    g: &'a LockOrderGraph,
    start: &'a AccessPath,
    path: &mut Vec<&'a AccessPath>,
    out: &mut BTreeSet<DeadlockCycle>,
) {
    let last = *path.last().unwrap();
    for next in g.successors(last) {
        if next == start {
            if path.len() >= 2 {
                let locks: Vec<AccessPath> = path.iter().map(|l| (*l).clone()).collect();
                let witnesses = (0..locks.len())
                    .map(|i| g.edges[&(locks[i].clone(), locks[(i + 1) % locks.len()].clone())].clone())
                    .collect();
                out.insert(DeadlockCycle { locks, witnesses });
            }
        } else if next > start && !path.contains(&next) {
            path.push(next);
            extend_cycles(g, start, path, out);
            path.pop();
        }
    }
}

/// Cycles of `after` whose lock sequence does not occur in `before`.
pub fn new_cycles(before: &[DeadlockCycle], after: &[DeadlockCycle]) -> Vec<DeadlockCycle> {
    let known: BTreeSet<&Vec<AccessPath>> = before.iter().map(|c| &c.locks).collect();
    after.iter().filter(|c| !known.contains(&c.locks)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn graph(edges: &[(&str, &str)]) -> LockOrderGraph {
        let mut g = LockOrderGraph::default();
        for (a, b) in edges {
            g.add_edge(a.parse().unwrap(), b.parse().unwrap(), Site::default());
        }
        g
    }

    #[test]
    fn two_cycle() {
        let cycles = find_deadlock_cycles(&graph(&[("m1", "m2"), ("m2", "m1")]));
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].lock_names(), vec!["m1", "m2"]);
    }

    #[test]
    fn chain_and_three_cycle() {
        assert!(find_deadlock_cycles(&graph(&[("a", "b"), ("b", "c")])).is_empty());
        let cycles = find_deadlock_cycles(&graph(&[("a", "b"), ("b", "c"), ("c", "a")]));
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].lock_names(), vec!["a", "b", "c"]);
        assert!(find_deadlock_cycles(&graph(&[("a", "a")])).is_empty());
    }

    #[test]
    fn nesting_direct_and_through_calls() {
        let p = parse_program(
            "class A { Object m1; Object m2; \
             void f() { synchronized(m1) { synchronized(m2) { } } } \
             void g() { synchronized(m2) { h(); } } \
             void h() { synchronized(m1) { synchronized(m1) { } } } }",
            "t",
        )
        .unwrap();
        let g = build_lock_order(&p);
        let edges: Vec<(String, String)> = g.edge_set().into_iter().collect();
        assert_eq!(
            edges,
            vec![
                ("this.m1".to_string(), "this.m1".to_string()),
                ("this.m1".to_string(), "this.m2".to_string()),
                ("this.m2".to_string(), "this.m1".to_string())
            ]
        );
        assert_eq!(find_deadlock_cycles(&g).len(), 1);
    }

    #[test]
    fn callee_acquisitions_follow_every_held_lock() {
        let p = parse_program(
            "class A { Object l0; Object l1; \
             void f() { synchronized(l1) { synchronized(this) { g(); } } } \
             void g() { synchronized(l1) { synchronized(l0) { } } } }",
            "t",
        )
        .unwrap();
        let edges = build_lock_order(&p).edge_set();
        for (a, b) in [("this", "this.l0"), ("this.l1", "this.l0"), ("this.l1", "this"), ("this", "this.l1")] {
            assert!(edges.contains(&(a.to_string(), b.to_string())), "{edges:?}");
        }
    }

    #[test]
    fn no_nesting_no_edges() {
        let p = parse_program("class A { Object l; void f() { synchronized(this) { } synchronized(l) { } } }", "t").unwrap();
        assert!(build_lock_order(&p).edges.is_empty());
        let p = parse_program("class A { synchronized void f() { synchronized(this) { } } }", "t").unwrap();
        let g = build_lock_order(&p);
        assert_eq!(g.edge_set().len(), 1);
        assert!(find_deadlock_cycles(&g).is_empty());
    }
}
