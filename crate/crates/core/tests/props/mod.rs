#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use proptest::test_runner::{RngSeed, TestCaseError, TestRunner};
use racefix_core::deadlock::build_lock_order;
use racefix_core::json::repair_to_json;
use racefix_core::lang::{render_expr, strip_spans, Stmt, StmtKind};
use racefix_core::lower::{apply_patch, lower_alternatives};
use racefix_core::race::{cluster_bugs, race};
use racefix_core::repair::detect;
use racefix_core::synth::{create_patch_encoding, SynthConfig};
use racefix_core::summary::{AccessKind, TraceFrame};
use racefix_core::{
    parse_program, render_program, repair, AccessPath, AccessSnapshot, Program, RepairConfig, Site, SummaryMap,
};

const FIELDS: [&str; 3] = ["f0", "f1", "g"];
const LOCKS: [&str; 4] = ["this", "l0", "l1", "S.class"];
const METHODS: usize = 4;

#[derive(Clone, Debug)]
enum G {
    Write(usize, i32),
    Read(usize),
    Call(usize),
    Sync(usize, Vec<G>),
}

fn stmt() -> impl Strategy<Value = G> {
    let leaf = prop_oneof![
        (0..FIELDS.len(), 0..9i32).prop_map(|(f, k)| G::Write(f, k)),
        (0..FIELDS.len()).prop_map(G::Read),
        (0..METHODS).prop_map(G::Call),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        (0..LOCKS.len(), prop::collection::vec(inner, 1..3)).prop_map(|(l, body)| G::Sync(l, body))
    })
}

#[derive(Clone, Debug)]
pub struct GenProgram {
    methods: Vec<(bool, Vec<G>)>,
    runs: Vec<usize>,
}

pub fn program() -> impl Strategy<Value = GenProgram> {
    (
        prop::collection::vec((prop::bool::weighted(0.2), prop::collection::vec(stmt(), 1..4)), METHODS),
        prop::collection::vec(0..METHODS, 1..3),
    )
        .prop_map(|(methods, runs)| GenProgram { methods, runs })
}

fn render_g(out: &mut String, g: &G, me: usize, depth: usize, fresh: &mut usize) {
    let pad = "    ".repeat(depth);
    match g {
        G::Write(f, k) => out.push_str(&format!("{pad}{} = {} + {k};\n", FIELDS[*f], FIELDS[*f])),
        G::Read(f) => {
            *fresh += 1;
            out.push_str(&format!("{pad}int t{fresh} = {};\n", FIELDS[*f]));
        }
        // Calls only go forward, so the call graph stays acyclic.
        G::Call(m) if *m > me => out.push_str(&format!("{pad}m{m}();\n")),
        G::Call(_) => out.push_str(&format!("{pad}f1 = f1 + 1;\n")),
        G::Sync(l, body) => {
            out.push_str(&format!("{pad}synchronized({}) {{\n", LOCKS[*l]));
            for s in body {
                render_g(out, s, me, depth + 1, fresh);
            }
            out.push_str(&format!("{pad}}}\n"));
        }
    }
}

fn source(g: &GenProgram) -> String {
    let mut out = String::from(
        "public class S {\n    static int g;\n    int f0;\n    int f1;\n    Object l0 = new Object();\n    Object l1 = new Object();\n",
    );
    for (i, (synced, body)) in g.methods.iter().enumerate() {
        let sync = if *synced { "synchronized " } else { "" };
        out.push_str(&format!("\n    public {sync}void m{i}() {{\n"));
        let mut fresh = 0;
        for s in body {
            render_g(&mut out, s, i, 2, &mut fresh);
        }
        out.push_str("    }\n");
    }
    out.push_str("}\n\npublic class T implements Runnable {\n    private S s;\n\n    public void run() {\n");
    for m in &g.runs {
        out.push_str(&format!("        s.m{m}();\n"));
    }
    out.push_str("    }\n}\n");
    out
}

fn parse(g: &GenProgram) -> Program {
    let src = source(g);
    parse_program(&src, "gen.mjcc").unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn sync_blocks(stmts: &[Stmt], out: &mut Vec<String>) {
    for s in stmts {
        if let StmtKind::Sync { lock, .. } = &s.kind {
            out.push(render_expr(lock));
        }
        for c in s.children() {
            sync_blocks(c, out);
        }
    }
}

/// Per method: whether it is synchronized and the multiset of its block locks.
fn locking(p: &Program) -> BTreeMap<(String, String), (bool, BTreeMap<String, usize>)> {
    p.methods()
        .map(|(c, m)| {
            let mut locks = Vec::new();
            sync_blocks(&m.body, &mut locks);
            let mut counts = BTreeMap::new();
            for l in locks {
                *counts.entry(l.replace("this.", "")).or_insert(0) += 1;
            }
            ((c.name.clone(), m.name.clone()), (m.is_synchronized, counts))
        })
        .collect()
}

type Occurrence = (String, String, AccessPath, AccessKind, Vec<TraceFrame>, usize);

/// Identifies a snapshot independently of line numbers: its method, path,
/// kind and trace, plus the rank of its site among the sites of snapshots
/// sharing those. Wrapping statements in blocks preserves that order.
fn occurrence(sm: &SummaryMap, class: &str, method: &str, snap: &AccessSnapshot) -> Occurrence {
    let mut same: Vec<&Site> = sm
        .get(class, method)
        .unwrap()
        .snapshots
        .iter()
        .filter(|s| s.path == snap.path && s.kind == snap.kind && s.trace == snap.trace)
        .map(|s| &s.site)
        .collect();
    same.sort();
    same.dedup();
    let rank = same.iter().position(|s| **s == snap.site).unwrap();
    (class.to_string(), method.to_string(), snap.path.clone(), snap.kind, snap.trace.clone(), rank)
}

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(0x7ace_f1c5),
        ..ProptestConfig::default()
    }
}

pub fn race_is_symmetric(g: &GenProgram) -> Result<(), TestCaseError> {
    let p = parse(g);
    let det = detect(&p);
    let snaps: Vec<_> = det.analysis.summaries.iter().flat_map(|s| s.snapshots.iter()).collect();
    for a in &snaps {
        for b in &snaps {
            prop_assert_eq!(race(a, b), race(b, a));
        }
    }
    Ok(())
}

pub fn patches_never_remove_locks(g: &GenProgram) -> Result<(), TestCaseError> {
    let p = parse(g);
    let det = detect(&p);
    let before = locking(&p);
    for c in det.clusters() {
        let enc = create_patch_encoding(&p, &det.analysis.summaries, &c, SynthConfig::default());
        let Ok(fixes) = lower_alternatives(&enc, &p) else { continue };
        for fix in fixes {
            let Ok(q) = apply_patch(&p, &fix.actions) else { continue };
            let after = locking(&q);
            for (key, (synced, counts)) in &before {
                let (synced2, counts2) = &after[key];
                prop_assert!(!synced || *synced2);
                for (lock, n) in counts {
                    prop_assert!(counts2.get(lock).copied().unwrap_or(0) >= *n, "{} lost {}", key.1, lock);
                }
            }
        }
    }
    Ok(())
}

pub fn clusters_partition_bugs(g: &GenProgram) -> Result<(), TestCaseError> {
    let p = parse(g);
    let bugs = detect(&p).bugs;
    let clusters = cluster_bugs(&bugs);
    let mut seen = BTreeSet::new();
    for c in &clusters {
        prop_assert!(!c.bugs.is_empty());
        for b in &c.bugs {
            prop_assert_eq!(b.path(), &c.shared_path);
            prop_assert_eq!(&b.cls, &c.cls);
            prop_assert!(seen.insert(b.key()));
        }
    }
    let all: BTreeSet<_> = bugs.iter().map(|b| b.key()).collect();
    prop_assert_eq!(seen, all);
    let keys: BTreeSet<_> = clusters.iter().map(|c| c.key()).collect();
    prop_assert_eq!(keys.len(), clusters.len());
    Ok(())
}

pub fn accepted_fix_guards_cluster_with_common_lock(g: &GenProgram) -> Result<(), TestCaseError> {
    let p = parse(g);
    let r = repair(&p, &RepairConfig::default());
    let mut program = p.clone();
    for patch in &r.applied {
        let before = detect(&program);
        let cluster = before
            .clusters()
            .into_iter()
            .find(|c| c.shared_path == patch.shared_path && c.cls == patch.cls)
            .expect("patched cluster existed");
        let after = parse_program(&patch.after, "gen.mjcc").unwrap();
        if patch.encoding.contains("VOLATILE") {
            program = after;
            continue;
        }
        let sm = detect(&after).analysis.summaries;
        // Accesses made at one call site through the same callee chain
        // cannot be told apart (and merge once their lock sets agree), so
        // require only as many guarded members of each such group as the
        // cluster contains.
        let mut wanted: BTreeMap<Occurrence, usize> = BTreeMap::new();
        for a in cluster.accesses() {
            *wanted.entry(occurrence(&before.analysis.summaries, &a.class, &a.method, &a.snapshot)).or_default() += 1;
        }
        let mut groups: BTreeMap<Occurrence, Vec<&BTreeSet<AccessPath>>> = BTreeMap::new();
        for s in sm.iter() {
            for snap in &s.snapshots {
                let o = occurrence(&sm, &s.class, &s.method, snap);
                if wanted.contains_key(&o) {
                    groups.entry(o).or_default().push(&snap.locks);
                }
            }
        }
        prop_assert_eq!(groups.len(), wanted.len());
        let candidates: BTreeSet<&AccessPath> = groups.values().flatten().flat_map(|l| l.iter()).collect();
        let shared = candidates.into_iter().any(|lock| {
            wanted
                .iter()
                .all(|(o, k)| groups[o].iter().filter(|l| l.contains(lock)).count() >= (*k).min(groups[o].len()))
        });
        prop_assert!(shared, "{}\n{}", patch.encoding, patch.before);
        program = after;
    }
    Ok(())
}

pub fn parse_render_round_trip(g: &GenProgram) -> Result<(), TestCaseError> {
    let src = source(g);
    let p = parse_program(&src, "gen.mjcc").unwrap();
    let text = render_program(&p);
    prop_assert_eq!(&text, &src);
    let q = parse_program(&text, "gen.mjcc").unwrap();
    prop_assert_eq!(strip_spans(&p), strip_spans(&q));
    Ok(())
}

pub fn lock_order_grows_monotonically(g: &GenProgram) -> Result<(), TestCaseError> {
    let p = parse(g);
    let det = detect(&p);
    let before = build_lock_order(&p).edge_set();
    for c in det.clusters() {
        let enc = create_patch_encoding(&p, &det.analysis.summaries, &c, SynthConfig::default());
        let Ok(fixes) = lower_alternatives(&enc, &p) else { continue };
        for fix in fixes {
            let Ok(q) = apply_patch(&p, &fix.actions) else { continue };
            let after = build_lock_order(&q).edge_set();
            prop_assert!(before.is_subset(&after), "{:?} vs {:?}", before, after);
        }
    }
    Ok(())
}

pub fn repair_output_is_deterministic(g: &GenProgram) -> Result<(), TestCaseError> {
    let p = parse(g);
    let a = repair(&p, &RepairConfig::default());
    let b = repair(&parse(g), &RepairConfig::default());
    prop_assert_eq!(render_program(&a.program), render_program(&b.program));
    let ja = serde_json::to_string(&repair_to_json("gen.mjcc", &a)).unwrap();
    let jb = serde_json::to_string(&repair_to_json("gen.mjcc", &b)).unwrap();
    prop_assert_eq!(ja, jb);
    Ok(())
}

pub type Property = fn(&GenProgram) -> Result<(), TestCaseError>;

/// Every property over generated programs, by name.
pub const PROPERTIES: [(&str, Property); 7] = [
    ("race_is_symmetric", race_is_symmetric),
    ("patches_never_remove_locks", patches_never_remove_locks),
    ("clusters_partition_bugs", clusters_partition_bugs),
    ("accepted_fix_guards_cluster_with_common_lock", accepted_fix_guards_cluster_with_common_lock),
    ("parse_render_round_trip", parse_render_round_trip),
    ("lock_order_grows_monotonically", lock_order_grows_monotonically),
    ("repair_output_is_deterministic", repair_output_is_deterministic),
];

pub const CASES: u32 = 1000;

/// Runs `prop` on `CASES` generated programs; the error carries the
/// minimized counterexample.
pub fn check(prop: Property) -> Result<(), String> {
    let mut runner = TestRunner::new(config(CASES));
    runner.run(&program(), |g| prop(&g)).map_err(|e| e.to_string())
}

pub fn path_strategy() -> impl Strategy<Value = String> {
    let base = prop_oneof![Just("this".to_string()), Just("S".to_string()), "[a-z][a-z0-9]{0,4}"];
    let elem = prop_oneof![Just("[*]".to_string()), "[a-z][a-z0-9]{0,4}"];
    (base, prop::collection::vec(elem, 0..5)).prop_map(|(b, es)| {
        std::iter::once(b).chain(es).collect::<Vec<_>>().join(".")
    })
}
