//! Detection of classes whose instances may be used by several threads.

use std::collections::BTreeSet;

use crate::lang::{normalize_path, ClassDecl, Expr, MethodDecl, Program, Scope, Stmt, StmtKind};

use super::typing::{calls_in, path_type, resolve_call};

pub const THREAD_SAFE: &str = "ThreadSafe";

/// Result of concurrent-class inference.
///
/// `roots` are flagged by their own syntax or by use inside a thread body;
/// their methods are checked against each other. `reached` are classes
/// reachable from roots through field and parameter types; their methods
/// run concurrently but their accesses are reported through the root
/// methods that call them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConcurrentClasses {
    pub roots: BTreeSet<String>,
    pub reached: BTreeSet<String>,
}

impl ConcurrentClasses {
    pub fn all(&self) -> BTreeSet<String> {
        self.roots.union(&self.reached).cloned().collect()
    }

    pub fn contains(&self, class: &str) -> bool {
        self.roots.contains(class) || self.reached.contains(class)
    }
}

/// A thread entry point: `run()` of a class implementing `Runnable`.
pub fn is_thread_entry(class: &ClassDecl, method: &MethodDecl) -> bool {
    class.implements_runnable && method.name == "run" && method.params.is_empty() && !method.is_static
}

fn has_sync(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| {
        matches!(s.kind, StmtKind::Sync { .. }) || s.children().into_iter().any(|c| has_sync(c))
    })
}

pub fn infer_concurrent_classes(p: &Program) -> ConcurrentClasses {
    let mut roots = BTreeSet::new();
    for c in &p.classes {
        let synced = c
            .methods
            .iter()
            .any(|m| m.is_synchronized || has_sync(&m.body));
        if c.has_annotation(THREAD_SAFE) || synced {
            roots.insert(c.name.clone());
        }
    }
    for c in &p.classes {
        for m in &c.methods {
            if is_thread_entry(c, m) {
                roots.extend(classes_used_in(p, c, m));
            }
        }
    }

    let mut all = roots.clone();
    let mut work: Vec<String> = roots.iter().cloned().collect();
    while let Some(name) = work.pop() {
        let Some(c) = p.class(&name) else { continue };
        let mut types: Vec<&str> = c.fields.iter().map(|f| f.ty.name.as_str()).collect();
        for m in &c.methods {
            types.extend(m.params.iter().map(|prm| prm.ty.name.as_str()));
        }
        for t in types {
            if p.class(t).is_some() && all.insert(t.to_string()) {
                work.push(t.to_string());
            }
        }
    }
    let reached = all.difference(&roots).cloned().collect();
    ConcurrentClasses { roots, reached }
}

/// Classes whose instances (or statics) a thread body touches, other than
/// the thread object itself.
fn classes_used_in(p: &Program, class: &ClassDecl, method: &MethodDecl) -> BTreeSet<String> {
    let scope = Scope::new(p, class, Some(method));
    let mut out = BTreeSet::new();
    let mut exprs = Vec::new();
    collect_exprs(&method.body, &mut exprs);
    for e in exprs {
        match e {
            Expr::New { class, .. } if p.class(class).is_some() => {
                out.insert(class.clone());
            }
            Expr::Name(_) | Expr::Field { .. } | Expr::Index { .. } => {
                if let Ok(path) = normalize_path(e, &scope) {
                    let mut prefixes: Vec<_> = path.proper_prefixes().collect();
                    prefixes.push(path.clone());
                    if path.base != "this" && !scope.is_local(&path.base) && p.class(&path.base).is_some() {
                        out.insert(path.base.clone());
                    }
                    for prefix in prefixes.iter().filter(|q| !q.is_empty() || q.base != "this") {
                        if let Some(ty) = path_type(prefix, &scope) {
                            if p.class(&ty.name).is_some() {
                                out.insert(ty.name);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    for (_, call) in calls_in(&method.body) {
        if let Some(target) = resolve_call(call, &scope) {
            if call.receiver.is_some() {
                out.insert(target.class);
            }
        }
    }
    out.remove(&class.name);
    out
}

fn collect_exprs<'a>(stmts: &'a [Stmt], out: &mut Vec<&'a Expr>) {
    fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
        out.push(e);
        match e {
            Expr::Field { target, .. } => walk(target, out),
            Expr::Index { target, index } => {
                walk(target, out);
                walk(index, out);
            }
            Expr::Call(c) => {
                if let Some(r) = &c.receiver {
                    walk(r, out);
                }
                c.args.iter().for_each(|a| walk(a, out));
            }
            Expr::New { args, .. } => args.iter().for_each(|a| walk(a, out)),
            Expr::NewArray { size, .. } => walk(size, out),
            Expr::Binary { lhs, rhs, .. } => {
                walk(lhs, out);
                walk(rhs, out);
            }
            Expr::Unary { expr, .. } => walk(expr, out),
            _ => {}
        }
    }
    for s in stmts {
        match &s.kind {
            StmtKind::LocalDecl { init, .. } => init.iter().for_each(|e| walk(e, out)),
            StmtKind::Assign { target, value, .. } => {
                walk(target, out);
                walk(value, out);
            }
            StmtKind::Sync { lock, .. } => walk(lock, out),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => walk(cond, out),
            StmtKind::Call(c) => {
                if let Some(r) = &c.receiver {
                    walk(r, out);
                }
                c.args.iter().for_each(|a| walk(a, out));
            }
            StmtKind::Return(e) => e.iter().for_each(|e| walk(e, out)),
            StmtKind::Expr(e) => walk(e, out),
        }
        for child in s.children() {
            collect_exprs(child, out);
        }
    }
}
