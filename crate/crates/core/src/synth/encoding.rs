use std::collections::BTreeSet;
use std::fmt;

use crate::lang::{AccessPath, Site};

/// A statement to be guarded, identified by its site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SyncTarget {
    pub class: String,
    pub method: String,
    pub site: Site,
    /// Position of the method in the access's call chain (0 = summarized method).
    pub depth: usize,
}

impl fmt::Display for SyncTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}@{}:{}", self.class, self.method, self.site.line, self.site.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatchAction {
    Sync {
        targets: BTreeSet<SyncTarget>,
        lock: AccessPath,
    },
    Declare {
        class: String,
        var: String,
        ty: String,
        is_static: bool,
    },
    Volatile {
        field: String,
        class: String,
    },
    Nil,
}

impl fmt::Display for PatchAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatchAction::Sync { targets, lock } => {
                let ts: Vec<String> = targets.iter().map(|t| t.to_string()).collect();
                write!(f, "SYNC({{{}}}, {})", ts.join(", "), lock)
            }
            PatchAction::Declare {
                class,
                var,
                ty,
                is_static,
            } => {
                write!(f, "DECLARE({class}, {var}, {ty}")?;
                if *is_static {
                    f.write_str(", static")?;
                }
                f.write_str(")")
            }
            PatchAction::Volatile { field, class } => write!(f, "VOLATILE({field}, {class})"),
            PatchAction::Nil => f.write_str("NIL"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PatchEncoding {
    Action(PatchAction),
    And(Vec<PatchEncoding>),
    Or(Vec<PatchEncoding>),
}

impl PatchEncoding {
    /// Disjunctive normal form: each inner list is one standalone fix, with
    /// `NIL` dropped.
    pub fn dnf(&self) -> Vec<Vec<PatchAction>> {
        match self {
            PatchEncoding::Action(PatchAction::Nil) => vec![Vec::new()],
            PatchEncoding::Action(a) => vec![vec![a.clone()]],
            PatchEncoding::Or(items) => items.iter().flat_map(|e| e.dnf()).collect(),
            PatchEncoding::And(items) => items.iter().fold(vec![Vec::new()], |acc, e| {
                let alts = e.dnf();
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

    /// Rebuilds an encoding from its normal form.
    pub fn from_dnf(alternatives: Vec<Vec<PatchAction>>) -> PatchEncoding {
        PatchEncoding::Or(
            alternatives
                .into_iter()
                .map(|alt| PatchEncoding::And(alt.into_iter().map(PatchEncoding::Action).collect()))
                .collect(),
        )
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, inside_and: bool) -> fmt::Result {
        match self {
            PatchEncoding::Action(a) => write!(f, "{a}"),
            PatchEncoding::And(items) if items.is_empty() => f.write_str("NIL"),
            PatchEncoding::Or(items) if items.is_empty() => f.write_str("NIL"),
            PatchEncoding::And(items) => {
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" AND ")?;
                    }
                    e.fmt_prec(f, true)?;
                }
                Ok(())
            }
            PatchEncoding::Or(items) => {
                if inside_and {
                    f.write_str("(")?;
                }
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" OR ")?;
                    }
                    e.fmt_prec(f, false)?;
                }
                if inside_and {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

/// Infix rendering; `AND` binds tighter than `OR`.
impl fmt::Display for PatchEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, false)
    }
}

/// Renders one normalized alternative.
pub fn render_alternative(actions: &[PatchAction]) -> String {
    if actions.is_empty() {
        return "NIL".to_string();
    }
    actions.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" AND ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vol(f: &str) -> PatchEncoding {
        PatchEncoding::Action(PatchAction::Volatile {
            field: f.into(),
            class: "A".into(),
        })
    }

    #[test]
    fn dnf_distributes_and_over_or() {
        let e = PatchEncoding::And(vec![
            PatchEncoding::Or(vec![vol("a"), vol("b")]),
            PatchEncoding::Or(vec![vol("c"), PatchEncoding::Action(PatchAction::Nil)]),
        ]);
        let d = e.dnf();
        assert_eq!(d.len(), 4);
        assert_eq!(d[0].len(), 2);
        assert_eq!(d[1].len(), 1);
        assert_eq!(
            e.to_string(),
            "(VOLATILE(a, A) OR VOLATILE(b, A)) AND (VOLATILE(c, A) OR NIL)"
        );
        let n = PatchEncoding::from_dnf(d.clone());
        assert_eq!(n.dnf(), d);
    }

    #[test]
    fn nil_normalizes_to_empty_fix() {
        assert_eq!(PatchEncoding::Action(PatchAction::Nil).dnf(), vec![Vec::<PatchAction>::new()]);
        assert_eq!(render_alternative(&[]), "NIL");
    }
}
