//! Static types of access paths and resolution of call targets.

use crate::lang::{AccessPath, CallExpr, ClassDecl, Expr, PathElem, Program, Scope, Stmt, StmtKind, TypeName};
use crate::lang::{normalize_path, path::THIS};

/// Declared type of a local or parameter in the scope's method.
pub fn local_type(scope: &Scope<'_>, name: &str) -> Option<TypeName> {
    let m = scope.method?;
    if let Some(p) = m.params.iter().find(|p| p.name == name) {
        return Some(p.ty.clone());
    }
    fn find(stmts: &[Stmt], name: &str) -> Option<TypeName> {
        for s in stmts {
            if let StmtKind::LocalDecl { ty, name: n, .. } = &s.kind {
                if n == name {
                    return Some(ty.clone());
                }
            }
            for child in s.children() {
                if let Some(t) = find(child, name) {
                    return Some(t);
                }
            }
        }
        None
    }
    find(&m.body, name)
}

/// True if `path` names a class itself (the receiver of a static call).
pub fn is_class_ref(path: &AccessPath, scope: &Scope<'_>) -> bool {
    path.elements.is_empty()
        && path.base != THIS
        && !scope.is_local(&path.base)
        && scope.program.class(&path.base).is_some()
}

/// Static type of the value denoted by `path`.
pub fn path_type(path: &AccessPath, scope: &Scope<'_>) -> Option<TypeName> {
    let mut ty = if path.base == THIS {
        TypeName::simple(scope.class.name.clone())
    } else if scope.is_local(&path.base) {
        local_type(scope, &path.base)?
    } else if scope.program.class(&path.base).is_some() {
        TypeName::simple(path.base.clone())
    } else {
        return None;
    };
    for elem in &path.elements {
        ty = match elem {
            PathElem::Wildcard => ty.element()?,
            PathElem::Field(name) => {
                if ty.is_array() {
                    return None;
                }
                let class = scope.program.class(&ty.name)?;
                class.field(name)?.ty.clone()
            }
        };
    }
    Some(ty)
}

/// Class that declares the innermost named field of `path`.
pub fn declaring_class(path: &AccessPath, scope: &Scope<'_>) -> Option<String> {
    let idx = path
        .elements
        .iter()
        .rposition(|e| matches!(e, PathElem::Field(_)))?;
    let owner = AccessPath {
        base: path.base.clone(),
        elements: path.elements[..idx].to_vec(),
    };
    let ty = path_type(&owner, scope)?;
    if ty.is_array() {
        return None;
    }
    scope.program.class(&ty.name).map(|c| c.name.clone())
}

/// Field declaration of the innermost element of `path`, if it is a field.
pub fn field_decl<'p>(path: &AccessPath, scope: &Scope<'p>) -> Option<&'p crate::lang::FieldDecl> {
    let Some(PathElem::Field(name)) = path.elements.last() else {
        return None;
    };
    let owner = path.parent()?;
    let ty = path_type(&owner, scope)?;
    if ty.is_array() {
        return None;
    }
    scope.program.class(&ty.name)?.field(name)
}

/// Static type of an arbitrary expression, where cheaply known.
pub fn expr_type(e: &Expr, scope: &Scope<'_>) -> Option<TypeName> {
    match e {
        Expr::New { class, .. } => Some(TypeName::simple(class.clone())),
        Expr::NewArray { elem, .. } => Some(TypeName {
            name: elem.name.clone(),
            dims: elem.dims + 1,
        }),
        Expr::Call(c) => {
            let target = resolve_call(c, scope)?;
            scope
                .program
                .method(&target.class, &target.method)?
                .ret
                .clone()
        }
        _ => path_type(&normalize_path(e, scope).ok()?, scope),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Receiver {
    /// Static call: no receiver object.
    Static,
    /// Instance call on the object denoted by this path.
    Path(AccessPath),
    /// Instance call on a freshly allocated object.
    Fresh,
    /// Instance call on a value with no access path (e.g. a call result).
    Opaque,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallTarget {
    pub class: String,
    pub method: String,
    pub receiver: Receiver,
}

/// Resolves a call to a declared method, or `None` if the callee is unknown.
pub fn resolve_call(call: &CallExpr, scope: &Scope<'_>) -> Option<CallTarget> {
    let program = scope.program;
    match call.receiver.as_deref() {
        None => {
            let m = scope.class.method(&call.method)?;
            let receiver = if m.is_static {
                Receiver::Static
            } else {
                Receiver::Path(AccessPath::this())
            };
            Some(CallTarget {
                class: scope.class.name.clone(),
                method: m.name.clone(),
                receiver,
            })
        }
        Some(recv) => {
            let (class, receiver) = match normalize_path(recv, scope) {
                Ok(path) if is_class_ref(&path, scope) => (path.base.clone(), Receiver::Static),
                Ok(path) => {
                    let ty = path_type(&path, scope)?;
                    if ty.is_array() {
                        return None;
                    }
                    (ty.name, Receiver::Path(path))
                }
                Err(_) => {
                    let ty = expr_type(recv, scope)?;
                    if ty.is_array() {
                        return None;
                    }
                    let r = if matches!(recv, Expr::New { .. }) {
                        Receiver::Fresh
                    } else {
                        Receiver::Opaque
                    };
                    (ty.name, r)
                }
            };
            let m = program.class(&class)?.method(&call.method)?;
            let receiver = if m.is_static { Receiver::Static } else { receiver };
            Some(CallTarget {
                class,
                method: m.name.clone(),
                receiver,
            })
        }
    }
}

/// Every call expression in `stmts`, in evaluation order, paired with the
/// statement that contains it.
pub fn calls_in(stmts: &[Stmt]) -> Vec<(&Stmt, &CallExpr)> {
    let mut out = Vec::new();
    for s in stmts {
        let mut exprs: Vec<&Expr> = Vec::new();
        match &s.kind {
            StmtKind::LocalDecl { init, .. } => exprs.extend(init.iter()),
            StmtKind::Assign { target, value, .. } => {
                exprs.push(value);
                exprs.push(target);
            }
            StmtKind::Sync { lock, .. } => exprs.push(lock),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => exprs.push(cond),
            StmtKind::Call(c) => {
                collect_calls_in_call(c, s, &mut out);
            }
            StmtKind::Return(e) => exprs.extend(e.iter()),
            StmtKind::Expr(e) => exprs.push(e),
        }
        for e in exprs {
            collect_calls(e, s, &mut out);
        }
        for child in s.children() {
            out.extend(calls_in(child));
        }
    }
    out
}

fn collect_calls_in_call<'a>(c: &'a CallExpr, s: &'a Stmt, out: &mut Vec<(&'a Stmt, &'a CallExpr)>) {
    if let Some(r) = &c.receiver {
        collect_calls(r, s, out);
    }
    for a in &c.args {
        collect_calls(a, s, out);
    }
    out.push((s, c));
}

fn collect_calls<'a>(e: &'a Expr, s: &'a Stmt, out: &mut Vec<(&'a Stmt, &'a CallExpr)>) {
    match e {
        Expr::Call(c) => collect_calls_in_call(c, s, out),
        Expr::Field { target, .. } => collect_calls(target, s, out),
        Expr::Index { target, index } => {
            collect_calls(target, s, out);
            collect_calls(index, s, out);
        }
        Expr::New { args, .. } => args.iter().for_each(|a| collect_calls(a, s, out)),
        Expr::NewArray { size, .. } => collect_calls(size, s, out),
        Expr::Binary { lhs, rhs, .. } => {
            collect_calls(lhs, s, out);
            collect_calls(rhs, s, out);
        }
        Expr::Unary { expr, .. } => collect_calls(expr, s, out),
        _ => {}
    }
}

/// Declared class names mentioned by a type, ignoring primitives.
pub fn class_of_type<'p>(program: &'p Program, ty: &TypeName) -> Option<&'p ClassDecl> {
    program.class(&ty.name)
}
