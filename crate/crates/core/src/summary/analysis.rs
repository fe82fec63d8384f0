//! Bottom-up, compositional inference of access-snapshot summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::lang::path::{is_path_expr, THIS};
use crate::lang::{
    normalize_path, AccessPath, AssignOp, CallExpr, ClassDecl, Expr, MethodDecl, Program, Scope, Site, Stmt,
    StmtKind,
};

use super::concurrent::{infer_concurrent_classes, is_thread_entry, ConcurrentClasses};
use super::domain::*;
use super::typing::{calls_in, field_decl, is_class_ref, resolve_call, Receiver};

/// Snapshots whose path would grow beyond this many elements through
/// receiver substitution are not propagated to callers.
pub const MAX_PATH_LEN: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct AnalysisWarning {
    pub site: Site,
    pub message: String,
}

/// Summaries together with the facts used to compute them.
#[derive(Clone, Debug, Default)]
pub struct ProgramAnalysis {
    pub summaries: SummaryMap,
    pub concurrent: ConcurrentClasses,
    pub thread_kinds: BTreeMap<MethodKey, ThreadKind>,
    pub warnings: Vec<AnalysisWarning>,
}

pub fn analyze_program(p: &Program) -> SummaryMap {
    analyze_program_full(p).summaries
}

pub fn analyze_program_full(p: &Program) -> ProgramAnalysis {
    let concurrent = infer_concurrent_classes(p);
    let graph = CallGraph::build(p);
    let thread_kinds = graph.thread_kinds(p, &concurrent);

    let mut summaries = SummaryMap::new();
    let mut warnings = BTreeSet::new();
    for scc in tarjan_scc(&graph.graph) {
        let mut keys: Vec<&MethodKey> = scc.iter().map(|n| &graph.graph[*n]).collect();
        keys.sort();
        for (c, m) in &keys {
            summaries.insert(MethodSummary::new(c.clone(), m.clone()));
        }
        loop {
            let mut changed = false;
            for key in &keys {
                let class = p.class(&key.0).expect("call graph node has a class");
                let method = class.method(&key.1).expect("call graph node has a method");
                let thread = thread_kinds[*key];
                let (summary, w) = analyze_method(p, class, method, thread, &summaries);
                let old = summaries.get(&key.0, &key.1).cloned().unwrap_or_default();
                let merged: BTreeSet<AccessSnapshot> =
                    old.snapshots.union(&summary.snapshots).cloned().collect();
                if merged.len() != old.snapshots.len() {
                    changed = true;
                    summaries.insert(MethodSummary {
                        snapshots: merged,
                        ..summary
                    });
                }
                warnings.extend(w);
            }
            if !changed {
                break;
            }
        }
    }
    ProgramAnalysis {
        summaries,
        concurrent,
        thread_kinds,
        warnings: warnings.into_iter().collect(),
    }
}

struct CallGraph {
    graph: DiGraph<MethodKey, ()>,
    index: HashMap<MethodKey, NodeIndex>,
}

impl CallGraph {
    fn build(p: &Program) -> Self {
        let mut graph = DiGraph::new();
        let mut index = HashMap::new();
        for (c, m) in p.methods() {
            let key = (c.name.clone(), m.name.clone());
            index.insert(key.clone(), graph.add_node(key));
        }
        for (c, m) in p.methods() {
            let scope = Scope::new(p, c, Some(m));
            let from = index[&(c.name.clone(), m.name.clone())];
            let mut seen = BTreeSet::new();
            for (_, call) in calls_in(&m.body) {
                if let Some(t) = resolve_call(call, &scope) {
                    let to = index[&(t.class, t.method)];
                    if seen.insert(to) {
                        graph.add_edge(from, to, ());
                    }
                }
            }
        }
        CallGraph { graph, index }
    }

    fn reachable_from(&self, roots: impl Iterator<Item = NodeIndex>) -> BTreeSet<NodeIndex> {
        let mut seen = BTreeSet::new();
        let mut work: Vec<NodeIndex> = roots.collect();
        while let Some(n) = work.pop() {
            if seen.insert(n) {
                work.extend(self.graph.neighbors(n));
            }
        }
        seen
    }

    fn thread_kinds(&self, p: &Program, cc: &ConcurrentClasses) -> BTreeMap<MethodKey, ThreadKind> {
        let key = |c: &ClassDecl, m: &MethodDecl| self.index[&(c.name.clone(), m.name.clone())];
        let from_threads = self.reachable_from(
            p.methods()
                .filter(|(c, m)| is_thread_entry(c, m))
                .map(|(c, m)| key(c, m)),
        );
        let from_main = self.reachable_from(p.methods().filter(|(_, m)| m.is_main()).map(|(c, m)| key(c, m)));
        p.methods()
            .map(|(c, m)| {
                let n = key(c, m);
                let kind = if m.is_main() {
                    ThreadKind::AnyThreadButMain
                } else if from_threads.contains(&n) || cc.contains(&c.name) {
                    ThreadKind::AnyThread
                } else if from_main.contains(&n) {
                    ThreadKind::AnyThreadButMain
                } else {
                    ThreadKind::NoThread
                };
                ((c.name.clone(), m.name.clone()), kind)
            })
            .collect()
    }
}

/// What the analysis knows about a local variable's value.
#[derive(Clone, Debug, PartialEq, Eq)]
enum LocalValue {
    /// Only ever bound to fresh allocations.
    Fresh,
    /// Bound exactly once, to this (already resolved) path.
    Alias(AccessPath),
    Unknown,
}

/// Summarizes one method given the summaries of its callees. Callees with no
/// entry in `callees` contribute nothing.
pub fn analyze_method(
    program: &Program,
    class: &ClassDecl,
    method: &MethodDecl,
    thread: ThreadKind,
    callees: &SummaryMap,
) -> (MethodSummary, Vec<AnalysisWarning>) {
    let scope = Scope::new(program, class, Some(method));
    let mut a = MethodAnalyzer {
        scope,
        method,
        thread,
        callees,
        locals: HashMap::new(),
        locks: Vec::new(),
        out: MethodSummary::new(class.name.clone(), method.name.clone()),
        warnings: Vec::new(),
    };
    a.classify_locals();
    if method.is_synchronized {
        a.locks.push(monitor_of(class, method));
    }
    a.stmts(&method.body);
    (a.out, a.warnings)
}

/// Lock taken by a synchronized method.
pub fn monitor_of(class: &ClassDecl, method: &MethodDecl) -> AccessPath {
    if method.is_static {
        AccessPath::class_literal(&class.name)
    } else {
        AccessPath::this()
    }
}

struct MethodAnalyzer<'a> {
    scope: Scope<'a>,
    method: &'a MethodDecl,
    thread: ThreadKind,
    callees: &'a SummaryMap,
    locals: HashMap<String, LocalValue>,
    locks: Vec<AccessPath>,
    out: MethodSummary,
    warnings: Vec<AnalysisWarning>,
}

impl<'a> MethodAnalyzer<'a> {
    fn classify_locals(&mut self) {
        let mut defs: BTreeMap<String, Vec<Option<&Expr>>> = BTreeMap::new();
        fn collect<'e>(stmts: &'e [Stmt], defs: &mut BTreeMap<String, Vec<Option<&'e Expr>>>) {
            for s in stmts {
                match &s.kind {
                    StmtKind::LocalDecl { name, init, .. } => {
                        defs.entry(name.clone()).or_default().extend(init.as_ref().map(Some));
                    }
                    StmtKind::Assign {
                        target: Expr::Name(name),
                        op,
                        value,
                    } => {
                        let v = (*op == AssignOp::Set).then_some(value);
                        defs.entry(name.clone()).or_default().push(v);
                    }
                    _ => {}
                }
                for child in s.children() {
                    collect(child, defs);
                }
            }
        }
        collect(&self.method.body, &mut defs);
        for (name, vals) in defs {
            if self.method.param_index(&name).is_some() || !self.scope.is_local(&name) {
                continue;
            }
            let value = if !vals.is_empty()
                && vals
                    .iter()
                    .all(|v| matches!(v, Some(Expr::New { .. } | Expr::NewArray { .. })))
            {
                LocalValue::Fresh
            } else if let [Some(e)] = vals.as_slice() {
                match normalize_path(e, &self.scope) {
                    Ok(p) if !self.scope.is_local(&p.base) || self.method.param_index(&p.base).is_some() => {
                        LocalValue::Alias(p)
                    }
                    _ => LocalValue::Unknown,
                }
            } else {
                LocalValue::Unknown
            };
            self.locals.insert(name, value);
        }
    }

    /// Rewrites local aliases and computes ownership of the path's root.
    fn resolve(&self, path: &AccessPath) -> (AccessPath, Ownership) {
        if path.base == THIS {
            return (path.clone(), Ownership::Unowned);
        }
        if let Some(i) = self.method.param_index(&path.base) {
            return (path.clone(), Ownership::owned_if(i));
        }
        if self.scope.is_local(&path.base) {
            return match self.locals.get(&path.base) {
                Some(LocalValue::Fresh) => (path.clone(), Ownership::owned()),
                Some(LocalValue::Alias(root)) => {
                    let rebased = path.rebase(root);
                    let (_, own) = self.resolve(&AccessPath::new(root.base.clone()));
                    (rebased, own)
                }
                _ => (path.clone(), Ownership::Unowned),
            };
        }
        // Static member rooted at a class name.
        (path.clone(), Ownership::Unowned)
    }

    fn lock_set(&self) -> BTreeSet<AccessPath> {
        self.locks.iter().cloned().collect()
    }

    fn emit(&mut self, path: &AccessPath, kind: super::domain::AccessKind, site: &Site) {
        if path.is_empty() || is_class_ref(path, &self.scope) {
            return;
        }
        if field_decl(path, &self.scope).is_some_and(|f| f.is_volatile) {
            return;
        }
        let (resolved, ownership) = self.resolve(path);
        if resolved.len() > MAX_PATH_LEN {
            return;
        }
        self.out.snapshots.insert(AccessSnapshot {
            path: resolved,
            kind,
            locks: self.lock_set(),
            thread: self.thread,
            ownership,
            trace: Vec::new(),
            site: site.clone(),
        });
    }

    fn stmts(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        let site = s.span.site();
        match &s.kind {
            StmtKind::LocalDecl { init, .. } => {
                if let Some(e) = init {
                    self.read(e, &site);
                }
            }
            StmtKind::Assign { target, op, value } => {
                self.read(value, &site);
                self.index_reads(target, &site);
                if let Ok(path) = normalize_path(target, &self.scope) {
                    for prefix in path.proper_prefixes() {
                        self.emit(&prefix, AccessKind::Read, &site);
                    }
                    if *op != AssignOp::Set {
                        self.emit(&path, AccessKind::Read, &site);
                    }
                    self.emit(&path, AccessKind::Write, &site);
                }
            }
            StmtKind::Sync { lock, body } => {
                let lock = normalize_path(lock, &self.scope).expect("parser only admits path monitors");
                let (lock, _) = self.resolve(&lock);
                self.locks.push(lock);
                self.stmts(body);
                self.locks.pop();
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                self.read(cond, &site);
                self.stmts(then_body);
                if let Some(e) = else_body {
                    self.stmts(e);
                }
            }
            StmtKind::While { cond, body } => {
                self.read(cond, &site);
                self.stmts(body);
            }
            StmtKind::Call(c) => self.call(c, &site),
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.read(e, &site);
                }
            }
            StmtKind::Expr(e) => self.read(e, &site),
        }
    }

    /// Reads performed by evaluating index expressions inside a path.
    fn index_reads(&mut self, e: &Expr, site: &Site) {
        match e {
            Expr::Field { target, .. } => self.index_reads(target, site),
            Expr::Index { target, index } => {
                self.read(index, site);
                self.index_reads(target, site);
            }
            _ => {}
        }
    }

    fn read(&mut self, e: &Expr, site: &Site) {
        if is_path_expr(e) {
            self.index_reads(e, site);
            if let Ok(path) = normalize_path(e, &self.scope) {
                for prefix in path.proper_prefixes() {
                    self.emit(&prefix, AccessKind::Read, site);
                }
                self.emit(&path, AccessKind::Read, site);
            }
            return;
        }
        match e {
            Expr::Call(c) => self.call(c, site),
            Expr::New { args, .. } => args.iter().for_each(|a| self.read(a, site)),
            Expr::NewArray { size, .. } => self.read(size, site),
            Expr::Binary { lhs, rhs, .. } => {
                self.read(lhs, site);
                self.read(rhs, site);
            }
            Expr::Unary { expr, .. } => self.read(expr, site),
            _ => {}
        }
    }

    /// Resolved path and ownership of an argument or receiver, if it has a path.
    fn actual(&self, e: &Expr) -> Option<(AccessPath, Ownership)> {
        if !is_path_expr(e) {
            return None;
        }
        let p = normalize_path(e, &self.scope).ok()?;
        Some(self.resolve(&p))
    }

    fn call(&mut self, call: &CallExpr, site: &Site) {
        if let Some(r) = &call.receiver {
            let is_class = normalize_path(r, &self.scope).is_ok_and(|p| is_class_ref(&p, &self.scope));
            if !is_class {
                self.read(r, site);
            }
        }
        for a in &call.args {
            self.read(a, site);
        }
        let Some(target) = resolve_call(call, &self.scope) else {
            self.warnings.push(AnalysisWarning {
                site: site.clone(),
                message: format!("unresolved call to `{}`; skipped", call.method),
            });
            return;
        };
        let Some(summary) = self.callees.get(&target.class, &target.method) else {
            return;
        };
        let program = self.scope.program;
        let callee = program
            .method(&target.class, &target.method)
            .expect("resolved callee exists");
        let receiver = match &target.receiver {
            Receiver::Path(p) => call
                .receiver
                .as_deref()
                .and_then(|r| self.actual(r))
                .or_else(|| Some(self.resolve(p))),
            _ => None,
        };
        let actuals: Vec<Option<(AccessPath, Ownership)>> = call.args.iter().map(|a| self.actual(a)).collect();

        let subst = |path: &AccessPath| -> Option<(AccessPath, Option<Ownership>)> {
            if path.base == THIS {
                let (root, own) = receiver.as_ref()?;
                return Some((path.rebase(root), Some(own.clone())));
            }
            if let Some(i) = callee.param_index(&path.base) {
                let (root, own) = actuals.get(i)?.as_ref()?;
                let rebased = AccessPath {
                    base: root.base.clone(),
                    elements: root.elements.iter().chain(path.elements.iter()).cloned().collect(),
                };
                return Some((rebased, Some(own.clone())));
            }
            if program.class(&path.base).is_some() {
                return Some((path.clone(), None));
            }
            None
        };

        let frame = TraceFrame::new(target.class.clone(), target.method.clone());
        let held = self.lock_set();
        let mut inlined = Vec::new();
        for s in &summary.snapshots {
            if s.trace.contains(&frame) {
                continue;
            }
            let Some((path, root_own)) = subst(&s.path) else {
                continue;
            };
            if path.len() > MAX_PATH_LEN {
                continue;
            }
            let ownership = match (&s.ownership, root_own) {
                (Ownership::Unowned, Some(own)) if s.path.base == THIS => own,
                (Ownership::Unowned, _) => Ownership::Unowned,
                (Ownership::OwnedIf(formals), _) => formals.iter().fold(Ownership::owned(), |acc, i| {
                    let own = actuals
                        .get(*i)
                        .and_then(|a| a.as_ref())
                        .map_or(Ownership::owned(), |(_, o)| o.clone());
                    acc.join(&own)
                }),
            };
            let mut locks = held.clone();
            for l in &s.locks {
                locks.insert(subst(l).map_or_else(|| l.clone(), |(p, _)| p));
            }
            let mut trace = Vec::with_capacity(s.trace.len() + 1);
            trace.push(frame.clone());
            trace.extend(s.trace.iter().cloned());
            inlined.push(AccessSnapshot {
                path,
                kind: s.kind,
                locks,
                thread: self.thread,
                ownership,
                trace,
                site: site.clone(),
            });
        }
        self.out.snapshots.extend(inlined);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    fn summaries(src: &str) -> SummaryMap {
        analyze_program(&parse_program(src, "t").unwrap())
    }

    #[test]
    fn empty_method_has_no_snapshots() {
        let sm = summaries("@ThreadSafe class A { void m() {} }");
        assert!(sm.get("A", "m").unwrap().snapshots.is_empty());
    }

    #[test]
    fn empty_program_has_no_summaries() {
        assert!(summaries("").is_empty());
    }

    #[test]
    fn lock_stack_is_tracked() {
        let sm = summaries(
            "class A { Object l; int x; synchronized void m() { synchronized(l) { x = 1; } x = 2; } \
             static synchronized void s() { A.y = 1; } static int y; }",
        );
        let m = sm.get("A", "m").unwrap();
        let writes: Vec<_> = m.snapshots.iter().filter(|s| s.is_write()).collect();
        assert_eq!(writes.len(), 2);
        let inner = writes.iter().find(|s| s.site.line == 1 && s.locks.len() == 2).unwrap();
        assert!(inner.locks.contains(&AccessPath::this()));
        assert!(inner.locks.contains(&"this.l".parse().unwrap()));
        let s = sm.get("A", "s").unwrap();
        let w = s.snapshots.iter().find(|s| s.is_write()).unwrap();
        assert_eq!(w.path.to_string(), "A.y");
        assert_eq!(
            w.locks.iter().map(|l| l.to_string()).collect::<Vec<_>>(),
            vec!["A.class"]
        );
    }

    #[test]
    fn ownership_of_roots() {
        let sm = summaries(
            "@ThreadSafe class A { int x; A next; void m(A p) { A q = new A(); q.x = 1; p.x = 2; this.x = 3; A r = this.next; r.x = 4; } }",
        );
        let m = sm.get("A", "m").unwrap();
        let own = |path: &str| {
            m.snapshots
                .iter()
                .find(|s| s.is_write() && s.path.to_string() == path)
                .map(|s| s.ownership.clone())
                .unwrap()
        };
        assert_eq!(own("q.x"), Ownership::owned());
        assert_eq!(own("p.x"), Ownership::owned_if(0));
        assert_eq!(own("this.x"), Ownership::Unowned);
        assert_eq!(own("this.next.x"), Ownership::Unowned);
    }

    #[test]
    fn formal_substitution_and_ownership_resolution() {
        let sm = summaries(
            "@ThreadSafe class A { int x; B b; void m() { B fresh = new B(); set(this.b); set(fresh); } \
             void set(B t) { t.y = 1; } } class B { int y; }",
        );
        let m = sm.get("A", "m").unwrap();
        let writes: Vec<_> = m.snapshots.iter().filter(|s| s.is_write()).collect();
        assert_eq!(writes.len(), 2);
        let shared = writes.iter().find(|s| s.path.to_string() == "this.b.y").unwrap();
        assert_eq!(shared.ownership, Ownership::Unowned);
        assert_eq!(shared.trace, vec![TraceFrame::new("A", "set")]);
        let owned = writes.iter().find(|s| s.path.to_string() == "fresh.y").unwrap();
        assert_eq!(owned.ownership, Ownership::owned());
    }

    #[test]
    fn callee_locals_do_not_propagate() {
        let sm = summaries("@ThreadSafe class A { int x; void m() { n(); } void n() { A t = new A(); t.x = 1; } }");
        assert!(sm.get("A", "m").unwrap().snapshots.is_empty());
        assert_eq!(sm.get("A", "n").unwrap().snapshots.len(), 1);
    }

    #[test]
    fn volatile_fields_are_not_tracked() {
        let sm = summaries("@ThreadSafe class A { volatile int v; volatile int[] xs; void m() { v = 1; xs[0] = 2; } }");
        let paths: Vec<String> = sm
            .get("A", "m")
            .unwrap()
            .snapshots
            .iter()
            .map(|s| format!("{}:{}", s.path, s.kind.short()))
            .collect();
        // The array reference is volatile, its elements are not.
        assert_eq!(paths, vec!["this.xs.[*]:wr"]);
    }

    #[test]
    fn thread_kinds() {
        let p = parse_program(
            "class Main { static void main() { Lib l = new Lib(); l.touch(); } } \
             class Lib { int x; void touch() { x = 1; } } \
             class W implements Runnable { Shared s; public void run() { s.go(); } } \
             class Shared { int y; void go() { y = 1; } } class Idle { void z() {} }",
            "t",
        )
        .unwrap();
        let a = analyze_program_full(&p);
        let k = |c: &str, m: &str| a.thread_kinds[&(c.to_string(), m.to_string())];
        assert_eq!(k("Main", "main"), ThreadKind::AnyThreadButMain);
        assert_eq!(k("Lib", "touch"), ThreadKind::AnyThreadButMain);
        assert_eq!(k("W", "run"), ThreadKind::AnyThread);
        assert_eq!(k("Shared", "go"), ThreadKind::AnyThread);
        assert_eq!(k("Idle", "z"), ThreadKind::NoThread);
    }

    #[test]
    fn unresolved_calls_warn() {
        let p = parse_program("class A { void m() { Thread t = new Thread(); t.start(); } }", "t").unwrap();
        let a = analyze_program_full(&p);
        assert_eq!(a.warnings.len(), 1);
        assert!(a.warnings[0].message.contains("start"));
    }
}
