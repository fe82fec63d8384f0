//! Per-method access summaries.

mod analysis;
mod concurrent;
mod domain;
pub mod typing;

pub use analysis::{analyze_method, analyze_program, analyze_program_full, monitor_of, AnalysisWarning, ProgramAnalysis, MAX_PATH_LEN};
pub use concurrent::{infer_concurrent_classes, is_thread_entry, ConcurrentClasses, THREAD_SAFE};
pub use domain::*;
