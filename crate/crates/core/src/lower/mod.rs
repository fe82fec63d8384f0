//! Lowering of patch encodings to syntax-tree edits, and their application.

mod apply;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::lang::{
    render_field, render_stmts, AccessPath, AssignOp, Expr, FieldDecl, Program, Site, SourceSpan, Stmt, StmtKind,
    TypeName,
};
use crate::synth::{PatchAction, PatchEncoding, SyncTarget};

pub use apply::{apply_patch, find_stmt_addr, reparse, ApplyError, ListAddr};

/// Where an edit applies.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    /// A contiguous run of sibling statements in a method body, from the
    /// statement starting at `first` to the one starting at `last`.
    Stmts {
        class: String,
        method: String,
        first: Site,
        last: Site,
    },
    Field {
        class: String,
        name: String,
    },
    /// The member list of a class; inserting before it prepends a member.
    Members {
        class: String,
    },
}

impl NodeRef {
    pub fn class(&self) -> &str {
        match self {
            NodeRef::Stmts { class, .. } | NodeRef::Field { class, .. } | NodeRef::Members { class } => class,
        }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Stmts {
                class,
                method,
                first,
                last,
            } => {
                write!(f, "{class}.{method}@{}:{}", first.line, first.col)?;
                if first != last {
                    write!(f, "..{}:{}", last.line, last.col)?;
                }
                Ok(())
            }
            NodeRef::Field { class, name } => write!(f, "{class}.{name}"),
            NodeRef::Members { class } => write!(f, "{class}{{}}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NewNode {
    Stmts(Vec<Stmt>),
    Field(FieldDecl),
}

impl fmt::Display for NewNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NewNode::Stmts(s) => f.write_str(render_stmts(s, 0).trim_end()),
            NewNode::Field(d) => f.write_str(&render_field(d)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstAction {
    Replace { from: NodeRef, to: NewNode },
    InsertBefore { at: NodeRef, ins: NewNode },
    InsertAfter { at: NodeRef, ins: NewNode },
}

impl AstAction {
    pub fn node(&self) -> &NodeRef {
        match self {
            AstAction::Replace { from, .. } => from,
            AstAction::InsertBefore { at, .. } | AstAction::InsertAfter { at, .. } => at,
        }
    }
}

impl fmt::Display for AstAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AstAction::Replace { from, to } => write!(f, "REPLACE({from}, {to})"),
            AstAction::InsertBefore { at, ins } => write!(f, "INSERT_BEFORE({at}, {ins})"),
            AstAction::InsertAfter { at, ins } => write!(f, "INSERT_AFTER({at}, {ins})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AstPatch {
    Action(AstAction),
    And(Vec<AstPatch>),
    Or(Vec<AstPatch>),
}

impl AstPatch {
    pub fn empty() -> Self {
        AstPatch::And(Vec::new())
    }

    /// Standalone alternatives, each a flat list of actions.
    pub fn alternatives(&self) -> Vec<Vec<AstAction>> {
        match self {
            AstPatch::Action(a) => vec![vec![a.clone()]],
            AstPatch::Or(items) => items.iter().flat_map(|p| p.alternatives()).collect(),
            AstPatch::And(items) => items.iter().fold(vec![Vec::new()], |acc, p| {
                let alts = p.alternatives();
                acc.iter()
                    .flat_map(|prefix| {
                        alts.iter().map(move |alt| {
                            let mut v = prefix.clone();
                            v.extend(alt.iter().cloned());
                            v
                        })
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LowerError {
    #[error("stale patch: no statement at {site} in {class}.{method}")]
    StalePatch { class: String, method: String, site: Site },
    #[error("stale patch: unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },
    #[error("name `{name}` already used in class {class}")]
    FreshName { class: String, name: String },
    #[error("lock `{0}` cannot be written as an expression")]
    LockNotExpressible(AccessPath),
}

/// One normalized alternative of an encoding with its lowered edits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoweredFix {
    pub encoding: Vec<PatchAction>,
    pub actions: Vec<AstAction>,
    pub warnings: Vec<String>,
}

impl LoweredFix {
    pub fn is_volatile(&self) -> bool {
        self.encoding.iter().any(|a| matches!(a, PatchAction::Volatile { .. }))
    }
}

/// Merges SYNCs on the same lock whose targets all lie in one method.
pub fn merge_syncs(actions: &[PatchAction]) -> Vec<PatchAction> {
    let mut out: Vec<PatchAction> = Vec::new();
    let mut groups: BTreeMap<(AccessPath, String, String), usize> = BTreeMap::new();
    for a in actions {
        if let PatchAction::Sync { targets, lock } = a {
            let methods: BTreeSet<(&String, &String)> = targets.iter().map(|t| (&t.class, &t.method)).collect();
            if methods.len() == 1 {
                let (c, m) = methods.into_iter().next().unwrap();
                let key = (lock.clone(), c.clone(), m.clone());
                if let Some(&i) = groups.get(&key) {
                    if let PatchAction::Sync { targets: merged, .. } = &mut out[i] {
                        merged.extend(targets.iter().cloned());
                    }
                    continue;
                }
                groups.insert(key, out.len());
            }
        }
        out.push(a.clone());
    }
    out
}

/// Lowers every alternative of `enc` against `program`.
pub fn create_patch(enc: &PatchEncoding, program: &Program) -> Result<AstPatch, LowerError> {
    let fixes = lower_alternatives(enc, program)?;
    Ok(AstPatch::Or(
        fixes
            .into_iter()
            .map(|f| AstPatch::And(f.actions.into_iter().map(AstPatch::Action).collect()))
            .collect(),
    ))
}

pub fn lower_alternatives(enc: &PatchEncoding, program: &Program) -> Result<Vec<LoweredFix>, LowerError> {
    enc.dnf()
        .into_iter()
        .map(|alt| lower_alternative(&alt, program))
        .collect()
}

pub fn lower_alternative(alt: &[PatchAction], program: &Program) -> Result<LoweredFix, LowerError> {
    let merged = merge_syncs(alt);
    let mut actions = Vec::new();
    let mut warnings = Vec::new();
    for a in &merged {
        match a {
            PatchAction::Sync { targets, lock } => actions.extend(insert_lock(targets, lock, program)?),
            PatchAction::Declare {
                class,
                var,
                ty,
                is_static,
            } => actions.extend(declare_variable(class, var, ty, *is_static, program)?),
            PatchAction::Volatile { field, class } => {
                let (acts, w) = make_volatile(field, class, program)?;
                actions.extend(acts);
                warnings.extend(w);
            }
            PatchAction::Nil => {}
        }
    }
    Ok(LoweredFix {
        encoding: merged,
        actions,
        warnings,
    })
}

fn names_used(stmts: &[Stmt], out: &mut BTreeSet<String>) {
    fn expr(e: &Expr, out: &mut BTreeSet<String>) {
        match e {
            Expr::Name(n) => {
                out.insert(n.clone());
            }
            Expr::Field { target, .. } => expr(target, out),
            Expr::Index { target, index } => {
                expr(target, out);
                expr(index, out);
            }
            Expr::Call(c) => {
                if let Some(r) = &c.receiver {
                    expr(r, out);
                }
                c.args.iter().for_each(|a| expr(a, out));
            }
            Expr::New { args, .. } => args.iter().for_each(|a| expr(a, out)),
            Expr::NewArray { size, .. } => expr(size, out),
            Expr::Binary { lhs, rhs, .. } => {
                expr(lhs, out);
                expr(rhs, out);
            }
            Expr::Unary { expr: e, .. } => expr(e, out),
            _ => {}
        }
    }
    for s in stmts {
        match &s.kind {
            StmtKind::LocalDecl { init, .. } => init.iter().for_each(|e| expr(e, out)),
            StmtKind::Assign { target, value, .. } => {
                expr(target, out);
                expr(value, out);
            }
            StmtKind::Sync { lock, .. } => expr(lock, out),
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => expr(cond, out),
            StmtKind::Call(c) => expr(&Expr::Call(c.clone()), out),
            StmtKind::Return(e) => e.iter().for_each(|e| expr(e, out)),
            StmtKind::Expr(e) => expr(e, out),
        }
        for c in s.children() {
            names_used(c, out);
        }
    }
}

/// Wraps the smallest run of sibling statements covering all `targets` in
/// `synchronized(lock)`, hoisting declarations that are used after the run.
pub fn insert_lock(
    targets: &BTreeSet<SyncTarget>,
    lock: &AccessPath,
    program: &Program,
) -> Result<Vec<AstAction>, LowerError> {
    let first = targets.iter().next().expect("SYNC without targets");
    assert!(
        targets.iter().all(|t| t.class == first.class && t.method == first.method),
        "SYNC targets span several methods"
    );
    let (class, method) = (&first.class, &first.method);
    let m = program.method(class, method).ok_or_else(|| LowerError::Unknown {
        what: "method",
        name: format!("{class}.{method}"),
    })?;
    let lock_expr = lock.to_expr().ok_or_else(|| LowerError::LockNotExpressible(lock.clone()))?;

    let mut addrs = Vec::new();
    for t in targets {
        let addr = find_stmt_addr(&m.body, &t.site).ok_or_else(|| LowerError::StalePatch {
            class: class.clone(),
            method: method.clone(),
            site: t.site.clone(),
        })?;
        addrs.push(addr);
    }
    let (list_addr, lo, hi) = common_slice(&addrs);
    let list = apply::list_at(&m.body, &list_addr);
    let slice = &list[lo..=hi];

    let mut used_after = BTreeSet::new();
    names_used(&list[hi + 1..], &mut used_after);
    let mut hoisted = Vec::new();
    let mut body = Vec::new();
    for s in slice {
        match &s.kind {
            StmtKind::LocalDecl { ty, name, init } if used_after.contains(name) => {
                hoisted.push(Stmt::new(StmtKind::LocalDecl {
                    ty: ty.clone(),
                    name: name.clone(),
                    init: None,
                }));
                if let Some(init) = init {
                    body.push(Stmt {
                        kind: StmtKind::Assign {
                            target: Expr::Name(name.clone()),
                            op: AssignOp::Set,
                            value: init.clone(),
                        },
                        span: s.span.clone(),
                    });
                }
            }
            _ => body.push(s.clone()),
        }
    }
    let from = NodeRef::Stmts {
        class: class.clone(),
        method: method.clone(),
        first: slice[0].span.site(),
        last: slice[slice.len() - 1].span.site(),
    };
    let wrapped = Stmt::new(StmtKind::Sync { lock: lock_expr, body });
    let mut actions = Vec::new();
    if !hoisted.is_empty() {
        actions.push(AstAction::InsertBefore {
            at: NodeRef::Stmts {
                class: class.clone(),
                method: method.clone(),
                first: slice[0].span.site(),
                last: slice[0].span.site(),
            },
            ins: NewNode::Stmts(hoisted),
        });
    }
    actions.push(AstAction::Replace {
        from,
        to: NewNode::Stmts(vec![wrapped]),
    });
    Ok(actions)
}

/// Lowest common statement list of the addressed statements and the index
/// range of the run of its statements that contains them all.
fn common_slice(addrs: &[(ListAddr, usize)]) -> (ListAddr, usize, usize) {
    let (first, _) = &addrs[0];
    let mut k = first.len();
    for (a, _) in addrs {
        k = k.min(a.len());
        k = first.iter().zip(a.iter()).take(k).take_while(|(x, y)| x == y).count();
    }
    let positions: Vec<usize> = addrs
        .iter()
        .map(|(a, idx)| if a.len() > k { a[k].0 } else { *idx })
        .collect();
    let lo = *positions.iter().min().unwrap();
    let hi = *positions.iter().max().unwrap();
    (first[..k].to_vec(), lo, hi)
}

pub fn declare_variable(
    class: &str,
    name: &str,
    ty: &str,
    is_static: bool,
    program: &Program,
) -> Result<Vec<AstAction>, LowerError> {
    let c = program.class(class).ok_or_else(|| LowerError::Unknown {
        what: "class",
        name: class.to_string(),
    })?;
    if c.field(name).is_some() || c.method(name).is_some() {
        return Err(LowerError::FreshName {
            class: class.to_string(),
            name: name.to_string(),
        });
    }
    let decl = FieldDecl {
        name: name.to_string(),
        ty: TypeName::simple(ty),
        visibility: None,
        is_static,
        is_final: true,
        is_volatile: false,
        init: Some(Expr::New {
            class: ty.to_string(),
            args: Vec::new(),
        }),
        span: SourceSpan::synthetic(),
    };
    Ok(vec![AstAction::InsertBefore {
        at: NodeRef::Members {
            class: class.to_string(),
        },
        ins: NewNode::Field(decl),
    }])
}

/// Marks a field volatile. Already-volatile fields yield no edit; array
/// fields are marked but produce a warning, since the elements stay plain.
pub fn make_volatile(field: &str, class: &str, program: &Program) -> Result<(Vec<AstAction>, Vec<String>), LowerError> {
    let f = program
        .class(class)
        .and_then(|c| c.field(field))
        .ok_or_else(|| LowerError::Unknown {
            what: "field",
            name: format!("{class}.{field}"),
        })?;
    if f.is_volatile {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut warnings = Vec::new();
    if f.ty.is_array() {
        warnings.push(format!(
            "{class}.{field} is an array; volatile does not cover its elements"
        ));
    }
    let mut decl = f.clone();
    decl.is_volatile = true;
    Ok((
        vec![AstAction::Replace {
            from: NodeRef::Field {
                class: class.to_string(),
                name: field.to_string(),
            },
            to: NewNode::Field(decl),
        }],
        warnings,
    ))
}

/// Number of edited nodes.
pub fn cost(actions: &[AstAction]) -> usize {
    actions.len()
}
