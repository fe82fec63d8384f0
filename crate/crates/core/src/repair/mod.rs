//! The detect, synthesize, apply, validate loop.

use std::collections::BTreeSet;

use crate::deadlock::{build_lock_order, find_deadlock_cycles, new_cycles, DeadlockCycle};
use crate::lang::{render_program, AccessPath, Program};
use crate::lower::{apply_patch, cost, lower_alternatives, LoweredFix};
use crate::race::{cluster_bugs, detect_bugs, Bug, BugCluster};
use crate::summary::{analyze_program_full, ProgramAnalysis, SummaryMap};
use crate::synth::{create_patch_encoding, render_alternative, LockStrategy, PatchTarget, SynthConfig};

pub const DEFAULT_MAX_ITERATIONS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Auto,
    Interactive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RepairConfig {
    pub max_iterations: usize,
    pub lock_strategy: LockStrategy,
    pub patch_target: PatchTarget,
    pub mode: Mode,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            lock_strategy: LockStrategy::Frequency,
            patch_target: PatchTarget::RootCause,
            mode: Mode::Auto,
        }
    }
}

impl RepairConfig {
    fn synth(&self) -> SynthConfig {
        SynthConfig {
            strategy: self.lock_strategy,
            target: self.patch_target,
        }
    }
}

/// Bugs of a program together with the analysis that found them.
#[derive(Clone, Debug)]
pub struct Detection {
    pub analysis: ProgramAnalysis,
    pub bugs: Vec<Bug>,
}

impl Detection {
    pub fn clusters(&self) -> Vec<BugCluster> {
        cluster_bugs(&self.bugs)
    }
}

pub fn detect(program: &Program) -> Detection {
    let analysis = analyze_program_full(program);
    let bugs = detect_bugs(program, &analysis.summaries, &analysis.concurrent.roots);
    Detection { analysis, bugs }
}

/// Detection driven by externally supplied summaries.
pub fn detect_with(program: &Program, summaries: SummaryMap) -> Detection {
    let mut analysis = analyze_program_full(program);
    analysis.summaries = summaries;
    let bugs = detect_bugs(program, &analysis.summaries, &analysis.concurrent.roots);
    Detection { analysis, bugs }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Validation {
    pub bugs: Vec<Bug>,
    pub cycles: Vec<DeadlockCycle>,
}

impl Validation {
    pub fn is_clean(&self) -> bool {
        self.bugs.is_empty() && self.cycles.is_empty()
    }
}

pub fn validate(program: &Program) -> Validation {
    Validation {
        bugs: detect(program).bugs,
        cycles: find_deadlock_cycles(&build_lock_order(program)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepairStatus {
    Fixed,
    Partial,
    Exhausted,
}

impl RepairStatus {
    pub fn name(self) -> &'static str {
        match self {
            RepairStatus::Fixed => "Fixed",
            RepairStatus::Partial => "Partial",
            RepairStatus::Exhausted => "Exhausted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AppliedPatch {
    pub iteration: usize,
    pub shared_path: AccessPath,
    pub cls: String,
    /// The chosen alternative in patch-encoding notation.
    pub encoding: String,
    pub actions: Vec<String>,
    pub cost: usize,
    pub before: String,
    pub after: String,
}

#[derive(Clone, Debug)]
pub struct RepairResult {
    pub status: RepairStatus,
    pub applied: Vec<AppliedPatch>,
    pub program: Program,
    pub final_bugs: Vec<Bug>,
    pub final_cycles: Vec<DeadlockCycle>,
    /// Alternatives discarded because they introduced a lock-order cycle.
    pub rejected_deadlocks: usize,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
    pub warnings: Vec<String>,
    /// Set when an interactive session ended without a selection.
    pub aborted: bool,
}

/// A validated alternative offered for one cluster.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub fix: LoweredFix,
    pub cost: usize,
    pub encoding: String,
    pub program: Program,
}

/// Chooses among validated alternatives in interactive mode.
pub trait Selector {
    /// Index into `candidates`, or `None` to abort the session.
    fn select(&mut self, cluster: &BugCluster, before: &Program, candidates: &[Candidate]) -> Option<usize>;
}

/// Always takes the first (cheapest) alternative.
pub struct FirstChoice;

impl Selector for FirstChoice {
    fn select(&mut self, _: &BugCluster, _: &Program, candidates: &[Candidate]) -> Option<usize> {
        (!candidates.is_empty()).then_some(0)
    }
}

/// Site-free bug identities.
fn signatures(bugs: &[Bug]) -> BTreeSet<String> {
    bugs.iter().map(|b| b.signature()).collect()
}

enum Verdict {
    Accept(Program),
    Deadlock,
    Rejected,
}

struct Judge<'a> {
    before: &'a Program,
    before_analysis: &'a ProgramAnalysis,
    before_cycles: &'a [DeadlockCycle],
    key: (AccessPath, String),
}

impl Judge<'_> {
    fn judge(&self, fix: &LoweredFix) -> Verdict {
        let Ok(after) = apply_patch(self.before, &fix.actions) else {
            return Verdict::Rejected;
        };
        let cycles = find_deadlock_cycles(&build_lock_order(&after));
        if !new_cycles(self.before_cycles, &cycles).is_empty() {
            return Verdict::Deadlock;
        }
        let det = detect(&after);
        if det
            .clusters()
            .iter()
            .any(|c| c.key() == self.key)
        {
            return Verdict::Rejected;
        }
        // Compare against the old program under the enlarged set of
        // concurrent classes, so newly visible classes are not held against
        // the patch.
        let roots: BTreeSet<String> = self
            .before_analysis
            .concurrent
            .roots
            .union(&det.analysis.concurrent.roots)
            .cloned()
            .collect();
        let old = detect_bugs(self.before, &self.before_analysis.summaries, &roots);
        if !signatures(&det.bugs).is_subset(&signatures(&old)) {
            return Verdict::Rejected;
        }
        Verdict::Accept(after)
    }
}

/// Orders alternatives: synchronization before volatile, then by cost,
/// then as synthesized.
fn ordered(fixes: Vec<LoweredFix>) -> Vec<LoweredFix> {
    let mut indexed: Vec<(usize, LoweredFix)> = fixes.into_iter().enumerate().collect();
    indexed.sort_by_key(|(i, f)| (f.is_volatile(), cost(&f.actions), *i));
    indexed.into_iter().map(|(_, f)| f).collect()
}

pub fn repair(program: &Program, cfg: &RepairConfig) -> RepairResult {
    repair_with(program, cfg, None, &mut FirstChoice)
}

/// Runs the repair loop. `imported` replaces the analysis for the first
/// detection only; `selector` is consulted in interactive mode.
pub fn repair_with(
    program: &Program,
    cfg: &RepairConfig,
    imported: Option<SummaryMap>,
    selector: &mut dyn Selector,
) -> RepairResult {
    assert!(cfg.max_iterations >= 1, "max_iterations must be positive");
    let mut current = program.clone();
    let mut imported = imported;
    let mut applied = Vec::new();
    let mut diagnostics = Vec::new();
    let mut warnings = Vec::new();
    let mut rejected_deadlocks = 0;
    let mut failed: BTreeSet<(AccessPath, String)> = BTreeSet::new();
    let mut iterations = 0;
    let mut aborted = false;
    let mut hit_cap = true;

    let fresh_detection = |p: &Program, imported: &mut Option<SummaryMap>| match imported.take() {
        Some(sm) => detect_with(p, sm),
        None => detect(p),
    };

    'outer: for iteration in 1..=cfg.max_iterations {
        let mut det = fresh_detection(&current, &mut imported);
        let keys: Vec<(AccessPath, String)> = det
            .clusters()
            .iter()
            .map(|c| c.key())
            .filter(|k| !failed.contains(k))
            .collect();
        if keys.is_empty() {
            hit_cap = false;
            break;
        }
        iterations = iteration;
        let mut progressed = false;
        for key in keys {
            let Some(cluster) = det.clusters().into_iter().find(|c| c.key() == key) else {
                continue;
            };
            let enc = create_patch_encoding(&current, &det.analysis.summaries, &cluster, cfg.synth());
            let fixes = match lower_alternatives(&enc, &current) {
                Ok(f) => ordered(f),
                Err(e) => {
                    diagnostics.push(format!("{} in {}: {e}", key.0, key.1));
                    failed.insert(key);
                    continue;
                }
            };
            let before_cycles = find_deadlock_cycles(&build_lock_order(&current));
            let judge = Judge {
                before: &current,
                before_analysis: &det.analysis,
                before_cycles: &before_cycles,
                key: key.clone(),
            };
            let mut chosen: Option<(LoweredFix, Program)> = None;
            match cfg.mode {
                Mode::Auto => {
                    for fix in fixes {
                        match judge.judge(&fix) {
                            Verdict::Accept(p) => {
                                chosen = Some((fix, p));
                                break;
                            }
                            Verdict::Deadlock => rejected_deadlocks += 1,
                            Verdict::Rejected => {}
                        }
                    }
                }
                Mode::Interactive => {
                    let mut candidates = Vec::new();
                    for fix in fixes {
                        match judge.judge(&fix) {
                            Verdict::Accept(p) => candidates.push(Candidate {
                                cost: cost(&fix.actions),
                                encoding: render_alternative(&fix.encoding),
                                fix,
                                program: p,
                            }),
                            Verdict::Deadlock => rejected_deadlocks += 1,
                            Verdict::Rejected => {}
                        }
                    }
                    if !candidates.is_empty() {
                        match selector.select(&cluster, &current, &candidates) {
                            Some(i) if i < candidates.len() => {
                                let c = candidates.swap_remove(i);
                                chosen = Some((c.fix, c.program));
                            }
                            _ => {
                                aborted = true;
                                break 'outer;
                            }
                        }
                    }
                }
            }
            match chosen {
                Some((fix, next)) => {
                    warnings.extend(fix.warnings.iter().cloned());
                    applied.push(AppliedPatch {
                        iteration,
                        shared_path: key.0.clone(),
                        cls: key.1.clone(),
                        encoding: render_alternative(&fix.encoding),
                        actions: fix.actions.iter().map(|a| a.to_string()).collect(),
                        cost: cost(&fix.actions),
                        before: render_program(&current),
                        after: render_program(&next),
                    });
                    current = next;
                    progressed = true;
                    det = detect(&current);
                }
                None => {
                    diagnostics.push(format!(
                        "no alternative fixes the cluster on {} in {}",
                        key.0, key.1
                    ));
                    failed.insert(key);
                }
            }
        }
        if !progressed && !failed.is_empty() {
            hit_cap = false;
            break;
        }
    }

    if aborted {
        let v = validate(program);
        return RepairResult {
            status: RepairStatus::Partial,
            applied: Vec::new(),
            program: program.clone(),
            final_bugs: v.bugs,
            final_cycles: v.cycles,
            rejected_deadlocks,
            iterations,
            diagnostics: vec!["interactive session aborted; nothing applied".to_string()],
            warnings,
            aborted: true,
        };
    }

    let v = validate(&current);
    let status = if v.is_clean() {
        RepairStatus::Fixed
    } else if hit_cap && failed.is_empty() {
        RepairStatus::Exhausted
    } else {
        RepairStatus::Partial
    };
    RepairResult {
        status,
        applied,
        program: current,
        final_bugs: v.bugs,
        final_cycles: v.cycles,
        rejected_deadlocks,
        iterations,
        diagnostics,
        warnings,
        aborted: false,
    }
}
