//! Static data-race detection and repair for MiniJava-CC programs.
//!
//! The pipeline: [`lang`] parses a program, [`summary`] infers per-method
//! access summaries, [`race`] pairs them into bugs and clusters, [`synth`]
//! proposes patch encodings, [`lower`] turns them into syntax-tree edits,
//! [`deadlock`] checks lock orders, and [`repair`] drives the loop.

pub mod deadlock;
pub mod diff;
pub mod json;
pub mod lang;
pub mod lower;
pub mod race;
pub mod repair;
pub mod summary;
pub mod synth;

pub use lang::{parse_program, render_program, AccessPath, Program, Site};
pub use race::{Bug, BugCluster, BugKind};
pub use repair::{repair, validate, RepairConfig, RepairResult, RepairStatus};
pub use summary::{analyze_program, AccessSnapshot, MethodSummary, SummaryMap};
