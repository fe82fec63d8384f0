//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p racefix-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;
#[path = "../../core/tests/props/mod.rs"]
mod props;

use std::collections::BTreeSet;
use std::fs;
use std::io::Cursor;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{brute_force_bugs, corpus, example1_naive_fix, load};
use racefix_cli::{run, Io};
use racefix_core::deadlock::{build_lock_order, find_deadlock_cycles, new_cycles};
use racefix_core::race::{detect_bugs, BugKind};
use racefix_core::repair::{detect, repair, validate, RepairConfig};
use racefix_core::summary::analyze_program_full;
use racefix_core::{parse_program, RepairStatus};

const SMALL_BUDGET: Duration = Duration::from_secs(1);
const CORPUS_BUDGET: Duration = Duration::from_secs(2);
const MIN_FIXED: usize = 10;
const MAX_ITERATIONS: usize = 10;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn races(bugs: &[racefix_core::Bug]) -> usize {
    bugs.iter().filter(|b| b.kind == BugKind::Race).count()
}

fn datarace() -> Outcome {
    let start = Instant::now();
    let p = load("datarace");
    let det = detect(&p);
    let n = races(&det.bugs);
    ensure!(n == 4, "{n} races");
    let clusters = det.clusters();
    ensure!(clusters.len() == 1, "{} clusters", clusters.len());
    let r = repair(&p, &RepairConfig::default());
    ensure!(r.applied.len() == 1, "{} patches", r.applied.len());
    let encoding = &r.applied[0].encoding;
    ensure!(
        encoding.matches("DECLARE(").count() == 1 && encoding.starts_with("DECLARE(Account, "),
        "encoding {encoding}"
    );
    let syncs = encoding.matches("SYNC(").count();
    ensure!(
        syncs == 2 && encoding.contains("Account.getBalance@") && encoding.contains("Account.setBalance@"),
        "encoding {encoding}"
    );
    let v = validate(&r.program);
    ensure!(v.bugs.is_empty() && v.cycles.is_empty(), "after fix: {} bugs, {} cycles", v.bugs.len(), v.cycles.len());
    let took = start.elapsed();
    ensure!(took < SMALL_BUDGET, "took {took:?}");
    Ok(format!("4 races, 1 cluster, {encoding}, {took:?}"))
}

fn example1() -> Outcome {
    let start = Instant::now();
    let p = load("example1");
    let r = repair(&p, &RepairConfig::default());
    ensure!(r.status == RepairStatus::Fixed, "status {}", r.status.name());
    let syncs: usize = r.applied.iter().map(|a| a.encoding.matches("SYNC(").count()).sum();
    ensure!(syncs == 2, "{syncs} SYNCs");
    let cycles = find_deadlock_cycles(&build_lock_order(&r.program));
    ensure!(cycles.is_empty(), "accepted fix has {} cycles", cycles.len());
    let before = find_deadlock_cycles(&build_lock_order(&p));
    let naive = new_cycles(&before, &find_deadlock_cycles(&build_lock_order(&example1_naive_fix(&p))));
    ensure!(naive.len() == 1, "naive patch: {} new cycles", naive.len());
    let locks = naive[0].lock_names();
    ensure!(locks == ["this.m1", "this.m2"], "naive cycle {locks:?}");
    let took = start.elapsed();
    ensure!(took < SMALL_BUDGET, "took {took:?}");
    Ok(format!("2 SYNCs, naive cycle {}, {took:?}", locks.join(" <-> ")))
}

fn wrong_lock() -> Outcome {
    let p = load("wrongLock");
    let det = detect(&p);
    let n = races(&det.bugs);
    ensure!(n >= 1, "no race");
    let r = repair(&p, &RepairConfig::default());
    ensure!(r.status == RepairStatus::Fixed, "status {}", r.status.name());
    // Both racing accesses, found again by method, path and kind, now
    // share a lock.
    let after = detect(&r.program).analysis.summaries;
    for b in det.bugs.iter().filter(|b| b.kind == BugKind::Race) {
        let lock_sets: Vec<_> = b
            .accesses
            .iter()
            .map(|a| {
                after
                    .get(&a.class, &a.method)
                    .into_iter()
                    .flat_map(|s| s.snapshots.iter())
                    .filter(|s| s.path == a.snapshot.path && s.kind == a.snapshot.kind)
                    .flat_map(|s| s.locks.iter().cloned())
                    .collect::<BTreeSet<_>>()
            })
            .collect();
        ensure!(
            lock_sets[0].intersection(&lock_sets[1]).next().is_some(),
            "no common lock on {}: {lock_sets:?}",
            b.path()
        );
    }
    let v = validate(&r.program);
    ensure!(v.is_clean(), "after fix: {} bugs, {} cycles", v.bugs.len(), v.cycles.len());
    Ok(format!("{n} race(s), {}", r.applied[0].encoding))
}

fn corpus_fixed() -> Outcome {
    let mut fixed = 0;
    let mut slowest = Duration::ZERO;
    for (stem, name, src) in corpus() {
        let p = parse_program(&src, &name).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let r = repair(&p, &RepairConfig::default());
        let took = start.elapsed();
        slowest = slowest.max(took);
        if r.status == RepairStatus::Fixed && r.iterations <= MAX_ITERATIONS && took < CORPUS_BUDGET {
            fixed += 1;
        } else {
            eprintln!("  {stem}: {} after {} iteration(s), {took:?}", r.status.name(), r.iterations);
        }
    }
    ensure!(fixed >= MIN_FIXED, "only {fixed} programs fixed");
    Ok(format!("{fixed} programs fixed, slowest {slowest:?}"))
}

fn brute_force() -> Outcome {
    let mut total = 0;
    for (stem, name, src) in corpus() {
        let p = parse_program(&src, &name).map_err(|e| e.to_string())?;
        let a = analyze_program_full(&p);
        let fast: BTreeSet<_> = detect_bugs(&p, &a.summaries, &a.concurrent.roots)
            .iter()
            .map(|b| b.key())
            .collect();
        let slow = brute_force_bugs(&p, &a.summaries, &a.concurrent.roots);
        ensure!(fast == slow, "{stem}: {} vs {} bugs", fast.len(), slow.len());
        total += fast.len();
    }
    Ok(format!("{} programs, {total} bugs agree", corpus().len()))
}

fn properties() -> Outcome {
    for (name, prop) in props::PROPERTIES {
        props::check(prop).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} properties x {} cases", props::PROPERTIES.len(), props::CASES))
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut input = Cursor::new(Vec::new());
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("racefix").chain(args.iter().copied()),
        &mut Io {
            input: &mut input,
            out: &mut out,
            err: &mut err,
        },
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn summaries_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (stem, name, src) in corpus() {
        let file = dir.path().join(&name);
        fs::write(&file, &src).map_err(|e| e.to_string())?;
        let file = file.to_str().unwrap();
        let (code, json, err) = cli(&["export-summaries", file]);
        ensure!(code == 0, "{stem}: export failed: {err}");
        let json_file = dir.path().join(format!("{stem}.json"));
        fs::write(&json_file, json).map_err(|e| e.to_string())?;

        let direct_out = dir.path().join(format!("{stem}.direct"));
        let via_out = dir.path().join(format!("{stem}.via"));
        let direct = cli(&["fix", "--out", direct_out.to_str().unwrap(), file]);
        let via = cli(&[
            "import-summaries",
            json_file.to_str().unwrap(),
            "fix",
            "--out",
            via_out.to_str().unwrap(),
            file,
        ]);
        ensure!(direct.0 == 0 && via.0 == 0, "{stem}: exit {} / {}", direct.0, via.0);
        let mut names: Vec<_> = fs::read_dir(&direct_out)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        ensure!(names.iter().any(|n| n.to_string_lossy().ends_with(".diff")), "{stem}: no patch");
        for n in names {
            let a = fs::read(direct_out.join(&n)).map_err(|e| e.to_string())?;
            let b = fs::read(via_out.join(&n)).map_err(|e| format!("{stem}: {e}"))?;
            ensure!(a == b, "{stem}: {} differs", n.to_string_lossy());
        }
    }
    Ok(format!("{} programs reproduce the direct patch", corpus().len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("datarace detection and fix", datarace),
        ("lock-order-aware fix of example1", example1),
        ("wrongLock gets a common lock", wrong_lock),
        ("corpus reaches Fixed", corpus_fixed),
        ("detection matches brute force", brute_force),
        ("property suite", properties),
        ("summary export/import reproduces fixes", summaries_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string()))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
