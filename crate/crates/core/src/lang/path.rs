//! Access paths: the syntactic names under which heap locations and locks
//! are compared.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::ast::{ClassDecl, Expr, MethodDecl, Program, Stmt, StmtKind};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PathElem {
    Field(String),
    /// An array element with its index erased.
    Wildcard,
}

impl fmt::Display for PathElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathElem::Field(name) => f.write_str(name),
            PathElem::Wildcard => f.write_str("[*]"),
        }
    }
}

/// `base.f1.f2...`; the base is `this`, a local or parameter, or a class name
/// for static members.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AccessPath {
    pub base: String,
    pub elements: Vec<PathElem>,
}

pub const THIS: &str = "this";

impl AccessPath {
    pub fn new(base: impl Into<String>) -> Self {
        AccessPath {
            base: base.into(),
            elements: Vec::new(),
        }
    }

    pub fn this() -> Self {
        AccessPath::new(THIS)
    }

    /// The monitor of a static synchronized method of `class`.
    pub fn class_literal(class: &str) -> Self {
        AccessPath::new(class).field("class")
    }

    pub fn field(mut self, name: impl Into<String>) -> Self {
        self.elements.push(PathElem::Field(name.into()));
        self
    }

    pub fn wildcard(mut self) -> Self {
        self.elements.push(PathElem::Wildcard);
        self
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_this_rooted(&self) -> bool {
        self.base == THIS
    }

    pub fn has_wildcard(&self) -> bool {
        self.elements.contains(&PathElem::Wildcard)
    }

    /// True if `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &AccessPath) -> bool {
        self.base == other.base
            && self.elements.len() <= other.elements.len()
            && other.elements[..self.elements.len()] == self.elements[..]
    }

    /// Strict prefixes that have at least one element, shortest first.
    pub fn proper_prefixes(&self) -> impl Iterator<Item = AccessPath> + '_ {
        (1..self.elements.len()).map(move |n| AccessPath {
            base: self.base.clone(),
            elements: self.elements[..n].to_vec(),
        })
    }

    pub fn parent(&self) -> Option<AccessPath> {
        if self.elements.is_empty() {
            return None;
        }
        Some(AccessPath {
            base: self.base.clone(),
            elements: self.elements[..self.elements.len() - 1].to_vec(),
        })
    }

    /// Innermost named field, skipping trailing wildcards.
    pub fn last_field(&self) -> Option<&str> {
        self.elements.iter().rev().find_map(|e| match e {
            PathElem::Field(name) => Some(name.as_str()),
            PathElem::Wildcard => None,
        })
    }

    /// Replaces the base with `root`, keeping this path's elements.
    pub fn rebase(&self, root: &AccessPath) -> AccessPath {
        let mut elements = root.elements.clone();
        elements.extend(self.elements.iter().cloned());
        AccessPath {
            base: root.base.clone(),
            elements,
        }
    }

    /// Source expression denoting this path, if it has no wildcard.
    pub fn to_expr(&self) -> Option<Expr> {
        let mut e = if self.base == THIS {
            Expr::This
        } else {
            Expr::Name(self.base.clone())
        };
        for elem in &self.elements {
            match elem {
                PathElem::Field(name) => e = Expr::field(e, name.clone()),
                PathElem::Wildcard => return None,
            }
        }
        Some(e)
    }
}

impl fmt::Display for AccessPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.base)?;
        for e in &self.elements {
            write!(f, ".{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed access path `{0}`")]
pub struct PathSyntaxError(pub String);

impl FromStr for AccessPath {
    type Err = PathSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('.');
        let base = parts.next().unwrap_or_default();
        if base.is_empty() || base == "[*]" {
            return Err(PathSyntaxError(s.to_string()));
        }
        let mut path = AccessPath::new(base);
        for p in parts {
            match p {
                "" => return Err(PathSyntaxError(s.to_string())),
                "[*]" => path.elements.push(PathElem::Wildcard),
                name => path.elements.push(PathElem::Field(name.to_string())),
            }
        }
        Ok(path)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("expression is not an access path")]
pub struct NotAPath;

/// True for field-dereference chains rooted at a name or `this`.
pub fn is_path_expr(e: &Expr) -> bool {
    match e {
        Expr::This | Expr::Name(_) => true,
        Expr::Field { target, .. } | Expr::Index { target, .. } => is_path_expr(target),
        _ => false,
    }
}

/// Name-resolution context for one method (or a field initializer when
/// `method` is `None`).
#[derive(Clone, Debug)]
pub struct Scope<'a> {
    pub program: &'a Program,
    pub class: &'a ClassDecl,
    pub method: Option<&'a MethodDecl>,
    locals: BTreeSet<String>,
}

impl<'a> Scope<'a> {
    pub fn new(program: &'a Program, class: &'a ClassDecl, method: Option<&'a MethodDecl>) -> Self {
        let mut locals = BTreeSet::new();
        if let Some(m) = method {
            locals.extend(m.params.iter().map(|p| p.name.clone()));
            collect_locals(&m.body, &mut locals);
        }
        Scope {
            program,
            class,
            method,
            locals,
        }
    }

    pub fn is_local(&self, name: &str) -> bool {
        self.locals.contains(name)
    }

    pub fn locals(&self) -> &BTreeSet<String> {
        &self.locals
    }

    pub fn is_static_context(&self) -> bool {
        self.method.is_some_and(|m| m.is_static)
    }
}

fn collect_locals(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    for s in stmts {
        if let StmtKind::LocalDecl { name, .. } = &s.kind {
            out.insert(name.clone());
        }
        for child in s.children() {
            collect_locals(child, out);
        }
    }
}

/// Normalizes a dereference chain to an access path: implicit `this` is made
/// explicit, static fields are rooted at their class, and every array index
/// becomes `[*]`.
pub fn normalize_path(expr: &Expr, scope: &Scope<'_>) -> Result<AccessPath, NotAPath> {
    match expr {
        Expr::This => Ok(AccessPath::this()),
        Expr::Name(name) => {
            if scope.is_local(name) {
                Ok(AccessPath::new(name.clone()))
            } else if let Some(f) = scope.class.field(name) {
                if f.is_static {
                    Ok(AccessPath::new(scope.class.name.clone()).field(name.clone()))
                } else {
                    Ok(AccessPath::this().field(name.clone()))
                }
            } else {
                // Class names and unknown names alike keep their spelling as base.
                Ok(AccessPath::new(name.clone()))
            }
        }
        Expr::Field { target, name } => {
            let base = normalize_path(target, scope)?;
            if base.base == THIS && base.elements.is_empty() {
                if let Some(f) = scope.class.field(name) {
                    if f.is_static {
                        return Ok(AccessPath::new(scope.class.name.clone()).field(name.clone()));
                    }
                }
            }
            Ok(base.field(name.clone()))
        }
        Expr::Index { target, .. } => Ok(normalize_path(target, scope)?.wildcard()),
        _ => Err(NotAPath),
    }
}
