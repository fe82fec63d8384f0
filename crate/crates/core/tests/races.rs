mod common;

use std::collections::BTreeSet;

use common::{brute_force_bugs, corpus, load, site};
use racefix_core::race::{cluster_bugs, detect_bugs, render_report, BugKind};
use racefix_core::repair::detect;
use racefix_core::summary::analyze_program_full;
use racefix_core::parse_program;

#[test]
fn datarace_reports_the_four_balance_races() {
    let p = load("datarace");
    let det = detect(&p);
    let mut races: Vec<Vec<(u32, u32)>> = det
        .bugs
        .iter()
        .filter(|b| b.kind == BugKind::Race)
        .map(|b| b.accesses.iter().map(|a| (a.site().line, a.site().col)).collect())
        .collect();
    races.sort();
    assert_eq!(
        races,
        vec![
            vec![(5, 9), (7, 9)],
            vec![(5, 9), (13, 9)],
            vec![(7, 9), (11, 9)],
            vec![(11, 9), (13, 9)],
        ]
    );
    for b in &det.bugs {
        assert_eq!(b.path().to_string(), "this.accounts.[*].balance");
        assert_eq!(b.cls, "Account");
    }
    let writes: Vec<_> = det.bugs.iter().filter(|b| b.kind == BugKind::UnprotectedWrite).collect();
    assert_eq!(writes.len(), 2);
    assert_eq!(writes[0].accesses[0].snapshot.site, site(&p, 7, 9));
}

#[test]
fn datarace_forms_a_single_cluster() {
    let det = detect(&load("datarace"));
    let clusters = det.clusters();
    assert_eq!(clusters.len(), 1);
    assert_eq!(clusters[0].shared_path.to_string(), "this.accounts.[*].balance");
    assert_eq!(clusters[0].cls, "Account");
    assert_eq!(clusters[0].bugs.len(), det.bugs.len());
}

#[test]
fn detection_matches_brute_force_on_corpus() {
    for (stem, name, src) in corpus() {
        let p = parse_program(&src, &name).unwrap();
        let a = analyze_program_full(&p);
        let got: BTreeSet<_> = detect_bugs(&p, &a.summaries, &a.concurrent.roots)
            .iter()
            .map(|b| b.key())
            .collect();
        let want = brute_force_bugs(&p, &a.summaries, &a.concurrent.roots);
        assert_eq!(got, want, "{stem}");
    }
}

#[test]
fn common_lock_suppresses_race() {
    let p = parse_program(
        "class C implements Runnable { int x; \
         public void run() { synchronized(this) { x = 1; } } \
         public int get() { synchronized(this) { return x; } } }",
        "c.mjcc",
    )
    .unwrap();
    assert!(detect(&p).bugs.is_empty());
}

#[test]
fn owned_locals_do_not_race() {
    let p = parse_program(
        "class Box { int v; } \
         class Shared { Box shared; public void put() { Box b = new Box(); b.v = 1; shared.v = 2; } } \
         class T implements Runnable { Shared s; public void run() { s.put(); } }",
        "c.mjcc",
    )
    .unwrap();
    let bugs = detect(&p).bugs;
    assert!(!bugs.is_empty());
    assert!(bugs.iter().all(|b| b.path().to_string() == "this.shared.v"));
}

#[test]
fn main_only_accesses_do_not_race_each_other() {
    let p = parse_program(
        "class Main { static int n; public static void main() { n = 1; } }",
        "m.mjcc",
    )
    .unwrap();
    assert!(detect(&p).bugs.is_empty());
}

#[test]
fn clusters_partition_bugs_by_path_and_class() {
    for (stem, name, src) in corpus() {
        let p = parse_program(&src, &name).unwrap();
        let bugs = detect(&p).bugs;
        let clusters = cluster_bugs(&bugs);
        let total: usize = clusters.iter().map(|c| c.bugs.len()).sum();
        assert_eq!(total, bugs.len(), "{stem}");
        let keys: BTreeSet<_> = clusters.iter().map(|c| c.key()).collect();
        assert_eq!(keys.len(), clusters.len(), "{stem}");
        for c in &clusters {
            assert!(c.bugs.iter().all(|b| b.path() == &c.shared_path && b.cls == c.cls));
        }
    }
}

#[test]
fn report_lists_each_bug() {
    let det = detect(&load("wrongLock"));
    let text = render_report(&det.bugs);
    assert_eq!(text.lines().filter(|l| l.starts_with("race")).count(), 1);
    assert!(text.contains("this.data.value"));
}
