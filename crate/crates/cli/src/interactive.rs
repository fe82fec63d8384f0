use std::io::{BufRead, Write};

use racefix_core::diff::unified_diff;
use racefix_core::lang::render_program;
use racefix_core::repair::{Candidate, Selector};
use racefix_core::{BugCluster, Program};

/// Invalid answers tolerated before the session is aborted.
pub const MAX_ATTEMPTS: usize = 3;

/// Prompts on `menu` and reads choices from `input`. `q` or end of input
/// aborts.
pub struct StdinSelector<'a> {
    input: &'a mut dyn BufRead,
    menu: &'a mut dyn Write,
    name: &'a str,
}

impl<'a> StdinSelector<'a> {
    pub fn new(input: &'a mut dyn BufRead, menu: &'a mut dyn Write, name: &'a str) -> Self {
        StdinSelector { input, menu, name }
    }

    fn show(&mut self, cluster: &BugCluster, before: &Program, candidates: &[Candidate]) -> std::io::Result<()> {
        writeln!(
            self.menu,
            "{}: {} bug(s) on {} in {}",
            self.name,
            cluster.bugs.len(),
            cluster.shared_path,
            cluster.cls
        )?;
        let old = render_program(before);
        for (i, c) in candidates.iter().enumerate() {
            writeln!(self.menu, "[{}] {} (cost {})", i + 1, c.encoding, c.cost)?;
            let diff = unified_diff(&old, &render_program(&c.program), self.name);
            for line in diff.lines() {
                writeln!(self.menu, "    {line}")?;
            }
        }
        Ok(())
    }
}

impl Selector for StdinSelector<'_> {
    fn select(&mut self, cluster: &BugCluster, before: &Program, candidates: &[Candidate]) -> Option<usize> {
        self.show(cluster, before, candidates).ok()?;
        for _ in 0..MAX_ATTEMPTS {
            write!(self.menu, "select 1-{} or q to quit: ", candidates.len()).ok()?;
            self.menu.flush().ok()?;
            let mut line = String::new();
            if self.input.read_line(&mut line).ok()? == 0 {
                let _ = writeln!(self.menu);
                return None;
            }
            let answer = line.trim();
            if answer.eq_ignore_ascii_case("q") {
                return None;
            }
            match answer.parse::<usize>() {
                Ok(n) if (1..=candidates.len()).contains(&n) => return Some(n - 1),
                _ => {
                    let _ = writeln!(self.menu, "invalid choice `{answer}`");
                }
            }
        }
        let _ = writeln!(self.menu, "too many invalid choices");
        None
    }
}
