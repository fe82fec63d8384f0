use std::collections::BTreeMap;

use thiserror::Error;

use crate::lang::{parse_program, render_program, FrontendError, Program, Site, Stmt};

use super::{AstAction, NewNode, NodeRef};

/// Route from a method body to a nested statement list: at each level the
/// index of the statement and which of its child lists to enter.
pub type ListAddr = Vec<(usize, usize)>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("conflicting edits at {0}")]
    Conflict(String),
    #[error("stale patch: {0} not found")]
    Stale(String),
    #[error("patched program does not reparse: {0}")]
    Reparse(#[from] FrontendError),
}

/// Statement list address and index of the statement starting at `site`.
pub fn find_stmt_addr(body: &[Stmt], site: &Site) -> Option<(ListAddr, usize)> {
    for (i, s) in body.iter().enumerate() {
        if s.span.start_line == site.line && s.span.start_col == site.col && !s.span.is_synthetic() {
            return Some((Vec::new(), i));
        }
        for (ci, child) in s.children().into_iter().enumerate() {
            if let Some((mut addr, idx)) = find_stmt_addr(child, site) {
                addr.insert(0, (i, ci));
                return Some((addr, idx));
            }
        }
    }
    None
}

pub(crate) fn list_at<'a>(body: &'a [Stmt], addr: &[(usize, usize)]) -> &'a [Stmt] {
    let mut list = body;
    for (i, ci) in addr {
        list = list[*i].children()[*ci];
    }
    list
}

fn list_at_mut<'a>(body: &'a mut Vec<Stmt>, addr: &[(usize, usize)]) -> &'a mut Vec<Stmt> {
    let mut list = body;
    for (i, ci) in addr {
        list = list[*i].children_mut().swap_remove(*ci);
    }
    list
}

/// Renders and parses again, so spans describe the new text.
pub fn reparse(p: &Program) -> Result<Program, FrontendError> {
    parse_program(&render_program(p), &p.source_name)
}

#[derive(Debug)]
enum ListEdit {
    Replace(usize, usize, Vec<Stmt>),
    Before(usize, Vec<Stmt>),
    After(usize, Vec<Stmt>),
}

impl ListEdit {
    /// Position used to order edits within one list, applied back to front.
    fn order_key(&self) -> (usize, u8) {
        match self {
            ListEdit::After(i, _) => (*i, 2),
            ListEdit::Replace(i, _, _) => (*i, 1),
            ListEdit::Before(i, _) => (*i, 0),
        }
    }
}

fn stmts(n: &NewNode, at: &NodeRef) -> Result<Vec<Stmt>, ApplyError> {
    match n {
        NewNode::Stmts(s) => Ok(s.clone()),
        NewNode::Field(_) => Err(ApplyError::Conflict(format!("field inserted among statements at {at}"))),
    }
}

/// Applies one alternative (a conjunction of edits) and reparses the result.
pub fn apply_patch(program: &Program, actions: &[AstAction]) -> Result<Program, ApplyError> {
    if actions.is_empty() {
        return Ok(program.clone());
    }
    let mut out = program.clone();
    // (class, method) -> list address -> edits
    let mut edits: BTreeMap<(String, String), BTreeMap<ListAddr, Vec<ListEdit>>> = BTreeMap::new();
    let mut replaced: Vec<(String, String, ListAddr, usize, usize)> = Vec::new();

    for a in actions {
        let node = a.node();
        match node {
            NodeRef::Stmts {
                class,
                method,
                first,
                last,
            } => {
                let m = program
                    .method(class, method)
                    .ok_or_else(|| ApplyError::Stale(format!("{class}.{method}")))?;
                let (addr, lo) = find_stmt_addr(&m.body, first).ok_or_else(|| ApplyError::Stale(node.to_string()))?;
                let (addr2, hi) = find_stmt_addr(&m.body, last).ok_or_else(|| ApplyError::Stale(node.to_string()))?;
                if addr != addr2 || hi < lo {
                    return Err(ApplyError::Stale(format!("{node} is not a sibling run")));
                }
                let edit = match a {
                    AstAction::Replace { to, .. } => {
                        replaced.push((class.clone(), method.clone(), addr.clone(), lo, hi));
                        ListEdit::Replace(lo, hi, stmts(to, node)?)
                    }
                    AstAction::InsertBefore { ins, .. } => ListEdit::Before(lo, stmts(ins, node)?),
                    AstAction::InsertAfter { ins, .. } => ListEdit::After(hi, stmts(ins, node)?),
                };
                edits
                    .entry((class.clone(), method.clone()))
                    .or_default()
                    .entry(addr)
                    .or_default()
                    .push(edit);
            }
            NodeRef::Field { class, name } => {
                let c = out
                    .class_mut(class)
                    .ok_or_else(|| ApplyError::Stale(class.clone()))?;
                let idx = c
                    .fields
                    .iter()
                    .position(|f| &f.name == name)
                    .ok_or_else(|| ApplyError::Stale(node.to_string()))?;
                let NewNode::Field(f) = (match a {
                    AstAction::Replace { to, .. } => to,
                    AstAction::InsertBefore { ins, .. } | AstAction::InsertAfter { ins, .. } => ins,
                }) else {
                    return Err(ApplyError::Conflict(format!("statements inserted among fields at {node}")));
                };
                match a {
                    AstAction::Replace { .. } => {
                        if c.fields[idx].span.is_synthetic() {
                            return Err(ApplyError::Conflict(node.to_string()));
                        }
                        let mut f = f.clone();
                        f.span = crate::lang::SourceSpan::synthetic();
                        c.fields[idx] = f;
                    }
                    AstAction::InsertBefore { .. } => c.fields.insert(idx, f.clone()),
                    AstAction::InsertAfter { .. } => c.fields.insert(idx + 1, f.clone()),
                }
            }
            NodeRef::Members { class } => {
                let c = out
                    .class_mut(class)
                    .ok_or_else(|| ApplyError::Stale(class.clone()))?;
                let NewNode::Field(f) = (match a {
                    AstAction::Replace { to, .. } => to,
                    AstAction::InsertBefore { ins, .. } | AstAction::InsertAfter { ins, .. } => ins,
                }) else {
                    return Err(ApplyError::Conflict(format!("statements inserted among members of {class}")));
                };
                if c.fields.iter().any(|g| g.name == f.name) || c.method(&f.name).is_some() {
                    return Err(ApplyError::Conflict(format!("{class}.{} declared twice", f.name)));
                }
                match a {
                    AstAction::InsertAfter { .. } => c.fields.push(f.clone()),
                    _ => c.fields.insert(0, f.clone()),
                }
            }
        }
    }

    check_overlaps(&replaced, &edits)?;

    for ((class, method), lists) in edits {
        let m = out
            .class_mut(&class)
            .and_then(|c| c.methods.iter_mut().find(|m| m.name == method))
            .expect("resolved above");
        // Deeper lists first: their edits never shift indices of outer lists.
        let mut ordered: Vec<(ListAddr, Vec<ListEdit>)> = lists.into_iter().collect();
        ordered.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| b.0.cmp(&a.0)));
        for (addr, mut list_edits) in ordered {
            list_edits.sort_by_key(|e| std::cmp::Reverse(e.order_key()));
            let list = list_at_mut(&mut m.body, &addr);
            for e in list_edits {
                match e {
                    ListEdit::Replace(lo, hi, new) => {
                        list.splice(lo..=hi, new);
                    }
                    ListEdit::Before(i, new) => {
                        list.splice(i..i, new);
                    }
                    ListEdit::After(i, new) => {
                        list.splice(i + 1..i + 1, new);
                    }
                }
            }
        }
    }
    Ok(reparse(&out)?)
}

/// Replaced runs must be disjoint and must not contain any other edit,
/// except insertions right at their boundary.
fn check_overlaps(
    replaced: &[(String, String, ListAddr, usize, usize)],
    edits: &BTreeMap<(String, String), BTreeMap<ListAddr, Vec<ListEdit>>>,
) -> Result<(), ApplyError> {
    for (i, (c, m, addr, lo, hi)) in replaced.iter().enumerate() {
        let inside = |a: &ListAddr| a.len() > addr.len() && a[..addr.len()] == addr[..] && (*lo..=*hi).contains(&a[addr.len()].0);
        for (c2, m2, addr2, lo2, hi2) in &replaced[i + 1..] {
            if c == c2 && m == m2 && ((addr == addr2 && lo <= hi2 && lo2 <= hi) || inside(addr2)) {
                return Err(ApplyError::Conflict(format!("{c}.{m}")));
            }
            if c == c2 && m == m2 {
                let inside2 =
                    addr.len() > addr2.len() && addr[..addr2.len()] == addr2[..] && (*lo2..=*hi2).contains(&addr[addr2.len()].0);
                if inside2 {
                    return Err(ApplyError::Conflict(format!("{c}.{m}")));
                }
            }
        }
        if let Some(lists) = edits.get(&(c.clone(), m.clone())) {
            if lists.keys().any(inside) {
                return Err(ApplyError::Conflict(format!("{c}.{m}")));
            }
            if let Some(same) = lists.get(addr) {
                for e in same {
                    let bad = match e {
                        ListEdit::Before(j, _) => j > lo && j <= hi,
                        ListEdit::After(j, _) => j >= lo && j < hi,
                        ListEdit::Replace(..) => false,
                    };
                    if bad {
                        return Err(ApplyError::Conflict(format!("{c}.{m}")));
                    }
                }
            }
        }
    }
    Ok(())
}
