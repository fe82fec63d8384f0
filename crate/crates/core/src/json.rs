//! JSON exchange formats for summaries, bug reports, deadlocks and repair
//! results.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deadlock::DeadlockCycle;
use crate::lang::{AccessPath, Site};
use crate::race::Bug;
use crate::repair::RepairResult;
use crate::summary::{AccessKind, AccessSnapshot, MethodSummary, Ownership, SummaryMap, ThreadKind, TraceFrame};

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid access path `{0}`")]
    Path(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindJson {
    Rd,
    Wr,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreadJson {
    NoThread,
    AnyThreadButMain,
    AnyThread,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OwnershipJson {
    Unowned(UnownedTag),
    OwnedIf {
        #[serde(rename = "ownedIf")]
        owned_if: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnownedTag {
    Unowned,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameJson {
    pub class: String,
    pub method: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotJson {
    pub path: String,
    pub kind: KindJson,
    pub locks: Vec<String>,
    pub thread: ThreadJson,
    pub ownership: OwnershipJson,
    pub trace: Vec<FrameJson>,
    pub site: Site,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryJson {
    pub class: String,
    pub method: String,
    pub snapshots: Vec<SnapshotJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummariesJson {
    pub summaries: Vec<SummaryJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugJson {
    pub kind: String,
    pub snapshots: Vec<SnapshotJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BugsJson {
    pub bugs: Vec<BugJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleJson {
    pub locks: Vec<String>,
    pub witnesses: Vec<Site>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlocksJson {
    pub cycles: Vec<CycleJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterJson {
    pub path: String,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchJson {
    pub iteration: usize,
    pub cluster: ClusterJson,
    pub encoding: String,
    pub actions: Vec<String>,
    pub cost: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairJson {
    pub file: String,
    pub status: String,
    pub iterations: usize,
    pub patches: Vec<PatchJson>,
    pub remaining_bugs: BugsJson,
    pub deadlocks: DeadlocksJson,
    pub rejected_deadlocks: usize,
    pub diagnostics: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn snapshot_to_json(s: &AccessSnapshot) -> SnapshotJson {
    SnapshotJson {
        path: s.path.to_string(),
        kind: match s.kind {
            AccessKind::Read => KindJson::Rd,
            AccessKind::Write => KindJson::Wr,
        },
        locks: s.locks.iter().map(|l| l.to_string()).collect(),
        thread: match s.thread {
            ThreadKind::NoThread => ThreadJson::NoThread,
            ThreadKind::AnyThreadButMain => ThreadJson::AnyThreadButMain,
            ThreadKind::AnyThread => ThreadJson::AnyThread,
        },
        ownership: match &s.ownership {
            Ownership::Unowned => OwnershipJson::Unowned(UnownedTag::Unowned),
            Ownership::OwnedIf(set) => OwnershipJson::OwnedIf {
                owned_if: set.iter().copied().collect(),
            },
        },
        trace: s
            .trace
            .iter()
            .map(|f| FrameJson {
                class: f.class.clone(),
                method: f.method.clone(),
            })
            .collect(),
        site: s.site.clone(),
    }
}

fn path(s: &str) -> Result<AccessPath, JsonError> {
    s.parse().map_err(|_| JsonError::Path(s.to_string()))
}

pub fn snapshot_from_json(j: &SnapshotJson) -> Result<AccessSnapshot, JsonError> {
    Ok(AccessSnapshot {
        path: path(&j.path)?,
        kind: match j.kind {
            KindJson::Rd => AccessKind::Read,
            KindJson::Wr => AccessKind::Write,
        },
        locks: j.locks.iter().map(|l| path(l)).collect::<Result<BTreeSet<_>, _>>()?,
        thread: match j.thread {
            ThreadJson::NoThread => ThreadKind::NoThread,
            ThreadJson::AnyThreadButMain => ThreadKind::AnyThreadButMain,
            ThreadJson::AnyThread => ThreadKind::AnyThread,
        },
        ownership: match &j.ownership {
            OwnershipJson::Unowned(_) => Ownership::Unowned,
            OwnershipJson::OwnedIf { owned_if } => Ownership::OwnedIf(owned_if.iter().copied().collect()),
        },
        trace: j.trace.iter().map(|f| TraceFrame::new(f.class.clone(), f.method.clone())).collect(),
        site: j.site.clone(),
    })
}

pub fn summaries_to_json(sm: &SummaryMap) -> SummariesJson {
    SummariesJson {
        summaries: sm
            .iter()
            .map(|s| SummaryJson {
                class: s.class.clone(),
                method: s.method.clone(),
                snapshots: s.snapshots.iter().map(snapshot_to_json).collect(),
            })
            .collect(),
    }
}

pub fn summaries_from_json(j: &SummariesJson) -> Result<SummaryMap, JsonError> {
    j.summaries
        .iter()
        .map(|s| {
            Ok(MethodSummary {
                class: s.class.clone(),
                method: s.method.clone(),
                snapshots: s.snapshots.iter().map(snapshot_from_json).collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

pub fn export_summaries(sm: &SummaryMap) -> String {
    serde_json::to_string_pretty(&summaries_to_json(sm)).expect("summaries serialize")
}

pub fn import_summaries(text: &str) -> Result<SummaryMap, JsonError> {
    let j: SummariesJson = serde_json::from_str(text)?;
    summaries_from_json(&j)
}

pub fn bugs_to_json(bugs: &[Bug]) -> BugsJson {
    BugsJson {
        bugs: bugs
            .iter()
            .map(|b| BugJson {
                kind: b.kind.name().to_string(),
                snapshots: b.accesses.iter().map(|a| snapshot_to_json(&a.snapshot)).collect(),
            })
            .collect(),
    }
}

pub fn cycles_to_json(cycles: &[DeadlockCycle]) -> DeadlocksJson {
    DeadlocksJson {
        cycles: cycles
            .iter()
            .map(|c| CycleJson {
                locks: c.lock_names(),
                witnesses: c.witnesses.clone(),
            })
            .collect(),
    }
}

pub fn repair_to_json(file: &str, r: &RepairResult) -> RepairJson {
    RepairJson {
        file: file.to_string(),
        status: r.status.name().to_string(),
        iterations: r.iterations,
        patches: r
            .applied
            .iter()
            .map(|p| PatchJson {
                iteration: p.iteration,
                cluster: ClusterJson {
                    path: p.shared_path.to_string(),
                    class: p.cls.clone(),
                },
                encoding: p.encoding.clone(),
                actions: p.actions.clone(),
                cost: p.cost,
            })
            .collect(),
        remaining_bugs: bugs_to_json(&r.final_bugs),
        deadlocks: cycles_to_json(&r.final_cycles),
        rejected_deadlocks: r.rejected_deadlocks,
        diagnostics: r.diagnostics.clone(),
        warnings: r.warnings.clone(),
    }
}
