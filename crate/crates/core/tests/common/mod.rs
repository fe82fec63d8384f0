#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use racefix_core::lang::path::THIS;
use racefix_core::race::BugKind;
use racefix_core::summary::{AccessSnapshot, ThreadKind};
use racefix_core::{parse_program, AccessPath, Program, Site, SummaryMap};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus")
}

/// Every corpus program as (stem, source name, source text).
pub fn corpus() -> Vec<(String, String, String)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "mjcc"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            let name = format!("{stem}.mjcc");
            (stem, name, std::fs::read_to_string(&p).unwrap())
        })
        .collect()
}

pub fn load(stem: &str) -> Program {
    let src = std::fs::read_to_string(corpus_dir().join(format!("{stem}.mjcc"))).unwrap();
    parse_program(&src, &format!("{stem}.mjcc")).unwrap()
}

pub fn site(p: &Program, line: u32, col: u32) -> Site {
    Site {
        file: p.source_name.clone(),
        line,
        col,
    }
}

pub type BugId = (BugKind, AccessPath, Vec<Site>);

fn may_run_concurrently(a: ThreadKind, b: ThreadKind) -> bool {
    a == ThreadKind::AnyThread || b == ThreadKind::AnyThread
}

fn unguarded_write(s: &AccessSnapshot) -> bool {
    s.is_write() && s.locks.is_empty() && s.thread == ThreadKind::AnyThread && s.ownership.is_unowned()
}

/// Straightforward all-pairs enumeration of races and unprotected writes
/// among the methods of `classes`.
pub fn brute_force_bugs(program: &Program, sm: &SummaryMap, classes: &BTreeSet<String>) -> BTreeSet<BugId> {
    let mut out = BTreeSet::new();
    let all: Vec<(&str, &AccessSnapshot)> = sm
        .iter()
        .filter(|m| classes.contains(&m.class))
        .flat_map(|m| m.snapshots.iter().map(move |s| (m.class.as_str(), s)))
        .collect();
    for (c1, s1) in &all {
        if unguarded_write(s1) {
            out.insert((BugKind::UnprotectedWrite, s1.path.clone(), vec![s1.site.clone()]));
        }
        for (c2, s2) in &all {
            let statically_rooted = s1.path.base != THIS && program.class(&s1.path.base).is_some();
            if c1 != c2 && !statically_rooted {
                continue;
            }
            if s1.path != s2.path || !(s1.is_write() || s2.is_write()) {
                continue;
            }
            if s1.locks.intersection(&s2.locks).next().is_some() {
                continue;
            }
            if !may_run_concurrently(s1.thread, s2.thread) {
                continue;
            }
            if !s1.ownership.is_unowned() || !s2.ownership.is_unowned() {
                continue;
            }
            if unguarded_write(s1) && unguarded_write(s2) {
                continue;
            }
            let mut sites = vec![s1.site.clone(), s2.site.clone()];
            sites.sort();
            out.insert((BugKind::Race, s1.path.clone(), sites));
        }
    }
    out
}

/// The bug-by-bug fix of the three-statement example: `s1` under `m1`,
/// `s3` additionally under `m1`, then `s1` additionally under `m2`.
pub fn example1_naive_fix(p: &Program) -> Program {
    use racefix_core::lower::{apply_patch, lower_alternative};
    use racefix_core::synth::{PatchAction, SyncTarget};
    let sync = |p: &Program, method: &str, line: u32, col: u32, lock: &str| PatchAction::Sync {
        targets: [SyncTarget {
            class: "Resource".into(),
            method: method.into(),
            site: site(p, line, col),
            depth: 0,
        }]
        .into_iter()
        .collect(),
        lock: lock.parse().unwrap(),
    };
    let first = [sync(p, "s1", 7, 9, "this.m1"), sync(p, "s3", 18, 13, "this.m1")];
    let fix = lower_alternative(&first, p).unwrap();
    let q = apply_patch(p, &fix.actions).unwrap();
    let second = [sync(&q, "s1", 8, 13, "this.m2")];
    let fix = lower_alternative(&second, &q).unwrap();
    apply_patch(&q, &fix.actions).unwrap()
}
