//! The `racefix` command line: analyze, validate and fix MiniJava-CC
//! sources, and exchange method summaries as JSON.

mod interactive;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use racefix_core::diff::unified_diff;
use racefix_core::json::{bugs_to_json, cycles_to_json, export_summaries, import_summaries, repair_to_json};
use racefix_core::race::render_report;
use racefix_core::repair::{detect, repair_with, validate, FirstChoice, Mode, Selector, DEFAULT_MAX_ITERATIONS};
use racefix_core::synth::{LockStrategy, PatchTarget};
use racefix_core::{analyze_program, parse_program, render_program, Program, RepairConfig, RepairStatus, SummaryMap};
use thiserror::Error;

pub use interactive::StdinSelector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_BUGS: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "racefix", version, about = "Detect and repair data races in MiniJava-CC programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report races and unprotected writes.
    Analyze(ReportArgs),
    /// Report races, unprotected writes and lock-order cycles.
    Validate(ReportArgs),
    /// Repair races by inserting synchronization.
    Fix(FixArgs),
    /// Print the inferred method summaries as JSON.
    ExportSummaries(ExportArgs),
    /// Run a command on summaries read from a JSON file.
    ImportSummaries(ImportArgs),
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
    /// Write reports into this directory instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FixArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS as u32, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_iterations: u32,
    #[arg(long, value_enum, default_value_t = StrategyArg::Frequency)]
    pub lock_strategy: StrategyArg,
    #[arg(long, value_enum, default_value_t = TargetArg::Root)]
    pub target: TargetArg,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
    /// Write reports, per-patch diffs and fixed sources into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite the input files with the fixed programs.
    #[arg(long)]
    pub write: bool,
}

impl FixArgs {
    pub fn config(&self) -> RepairConfig {
        RepairConfig {
            max_iterations: self.max_iterations as usize,
            lock_strategy: match self.lock_strategy {
                StrategyArg::Frequency => LockStrategy::Frequency,
                StrategyArg::Distance => LockStrategy::Distance,
            },
            patch_target: match self.target {
                TargetArg::Root => PatchTarget::RootCause,
                TargetArg::Callsite => PatchTarget::CallSite,
            },
            mode: match self.mode {
                ModeArg::Auto => Mode::Auto,
                ModeArg::Interactive => Mode::Interactive,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Write `summaries.json` into this directory instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    pub json: PathBuf,
    #[command(subcommand)]
    pub then: ImportCommand,
}

#[derive(Debug, Subcommand)]
pub enum ImportCommand {
    Fix(FixArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Interactive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Frequency,
    Distance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Root,
    Callsite,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Frontend(#[from] racefix_core::lang::FrontendError),
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: racefix_core::json::JsonError,
    },
    #[error("class {class} is declared in both {first} and {second}")]
    DuplicateClass { class: String, first: String, second: String },
    #[error("cannot write output: {0}")]
    Output(#[from] std::io::Error),
}

/// Standard streams as seen by a command.
pub struct Io<'a> {
    pub input: &'a mut dyn BufRead,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = write!(io.err, "{}", e.render());
            return code;
        }
    };
    match execute(&cli.command, io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cmd: &Command, io: &mut Io<'_>) -> Result<i32, CliError> {
    match cmd {
        Command::Analyze(a) => analyze(a, false, io),
        Command::Validate(a) => analyze(a, true, io),
        Command::Fix(f) => fix(f, None, io),
        Command::ExportSummaries(e) => export(e, io),
        Command::ImportSummaries(i) => {
            let text = read(&i.json)?;
            let sm = import_summaries(&text).map_err(|source| CliError::Json {
                path: i.json.clone(),
                source,
            })?;
            match &i.then {
                ImportCommand::Fix(f) => fix(f, Some(&sm), io),
            }
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Source name used in sites: the path as given.
fn source_name(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".to_string())
}

fn load(path: &Path) -> Result<Program, CliError> {
    Ok(parse_program(&read(path)?, &source_name(path))?)
}

fn json_text<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn analyze(a: &ReportArgs, with_deadlocks: bool, io: &mut Io<'_>) -> Result<i32, CliError> {
    let programs = a.files.iter().map(|f| load(f)).collect::<Result<Vec<_>, _>>()?;
    let mut bugs = Vec::new();
    let mut cycles = Vec::new();
    for p in &programs {
        if with_deadlocks {
            let v = validate(p);
            bugs.extend(v.bugs);
            cycles.extend(v.cycles);
        } else {
            bugs.extend(detect(p).bugs);
        }
    }
    let text = match a.report {
        ReportFormat::Json if with_deadlocks => {
            let mut v = serde_json::to_value(bugs_to_json(&bugs)).expect("bugs serialize");
            v["cycles"] = serde_json::to_value(cycles_to_json(&cycles).cycles).expect("cycles serialize");
            json_text(&v)
        }
        ReportFormat::Json => json_text(&bugs_to_json(&bugs)),
        ReportFormat::Text => {
            let mut s = render_report(&bugs);
            for c in &cycles {
                let sites: Vec<String> = c.witnesses.iter().map(|w| w.to_string()).collect();
                s.push_str(&format!("deadlock {} @{}\n", c.lock_names().join(" -> "), sites.join(", ")));
            }
            let races = bugs.iter().filter(|b| b.kind == racefix_core::BugKind::Race).count();
            s.push_str(&format!(
                "{} race(s), {} unprotected write(s){}\n",
                races,
                bugs.len() - races,
                if with_deadlocks {
                    format!(", {} deadlock cycle(s)", cycles.len())
                } else {
                    String::new()
                }
            ));
            s
        }
    };
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            let name = match a.report {
                ReportFormat::Json => "report.json",
                ReportFormat::Text => "report.txt",
            };
            write_file(&dir.join(name), &text)?;
        }
        None => io.out.write_all(text.as_bytes())?,
    }
    Ok(if bugs.is_empty() && cycles.is_empty() {
        EXIT_OK
    } else {
        EXIT_BUGS
    })
}

/// Summaries of every input, merged; class names must be unique.
fn merged_summaries(files: &[PathBuf]) -> Result<SummaryMap, CliError> {
    let mut owner: BTreeMap<String, String> = BTreeMap::new();
    let mut all = SummaryMap::new();
    for f in files {
        let p = load(f)?;
        for c in &p.classes {
            if let Some(first) = owner.insert(c.name.clone(), source_name(f)) {
                return Err(CliError::DuplicateClass {
                    class: c.name.clone(),
                    first,
                    second: source_name(f),
                });
            }
        }
        for s in analyze_program(&p).iter() {
            all.insert(s.clone());
        }
    }
    Ok(all)
}

fn export(e: &ExportArgs, io: &mut Io<'_>) -> Result<i32, CliError> {
    let mut text = export_summaries(&merged_summaries(&e.files)?);
    text.push('\n');
    match &e.out {
        Some(dir) => {
            create_dir(dir)?;
            write_file(&dir.join("summaries.json"), &text)?;
        }
        None => io.out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

/// The imported summaries that belong to classes of `p`.
fn summaries_for(sm: &SummaryMap, p: &Program) -> SummaryMap {
    let mut out = SummaryMap::new();
    for s in sm.iter().filter(|s| p.class(&s.class).is_some()) {
        out.insert(s.clone());
    }
    out
}

fn fix(f: &FixArgs, imported: Option<&SummaryMap>, io: &mut Io<'_>) -> Result<i32, CliError> {
    let cfg = f.config();
    let mut reports = Vec::new();
    let mut text = String::new();
    let mut all_fixed = true;
    for file in &f.files {
        let p = load(file)?;
        let name = source_name(file);
        let result = {
            let imported = imported.map(|sm| summaries_for(sm, &p));
            match cfg.mode {
                Mode::Auto => repair_with(&p, &cfg, imported, &mut FirstChoice),
                Mode::Interactive => {
                    let mut sel = StdinSelector::new(&mut *io.input, &mut *io.err, &name);
                    repair_with(&p, &cfg, imported, &mut sel as &mut dyn Selector)
                }
            }
        };
        all_fixed &= result.status == RepairStatus::Fixed;
        let before = render_program(&p);
        let after = render_program(&result.program);
        let changed = !result.applied.is_empty();

        if let Some(dir) = &f.out {
            create_dir(dir)?;
            let stem = stem(file);
            for (k, patch) in result.applied.iter().enumerate() {
                let diff = unified_diff(&patch.before, &patch.after, &name);
                write_file(&dir.join(format!("{stem}.{}.{}.diff", patch.iteration, k + 1)), &diff)?;
            }
            if changed {
                write_file(&dir.join(format!("{stem}.mjcc")), &after)?;
            }
            write_file(&dir.join(format!("{stem}.report.json")), &json_text(&repair_to_json(&name, &result)))?;
        }
        if f.write && changed {
            write_file(file, &after)?;
        }

        match f.report {
            ReportFormat::Json => reports.push(repair_to_json(&name, &result)),
            ReportFormat::Text => {
                text.push_str(&format!(
                    "{name}: {} after {} iteration(s), {} patch(es)\n",
                    result.status.name(),
                    result.iterations,
                    result.applied.len()
                ));
                for patch in &result.applied {
                    text.push_str(&format!(
                        "  patch {} on {} in {} (cost {}): {}\n",
                        patch.iteration, patch.shared_path, patch.cls, patch.cost, patch.encoding
                    ));
                }
                for d in &result.diagnostics {
                    text.push_str(&format!("  note: {d}\n"));
                }
                for w in &result.warnings {
                    text.push_str(&format!("  warning: {w}\n"));
                }
                for b in &result.final_bugs {
                    text.push_str(&format!("  remaining: {b}\n"));
                }
                text.push_str(&unified_diff(&before, &after, &name));
            }
        }
    }
    if f.out.is_none() {
        match f.report {
            ReportFormat::Json => io.out.write_all(json_text(&serde_json::json!({ "reports": reports })).as_bytes())?,
            ReportFormat::Text => io.out.write_all(text.as_bytes())?,
        }
    }
    Ok(if all_fixed { EXIT_OK } else { EXIT_BUGS })
}
