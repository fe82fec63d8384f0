//! Inputs shared by the benchmarks.

use std::path::{Path, PathBuf};

use racefix_core::{parse_program, Program};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/corpus")
}

/// The corpus programs, parsed, in file-name order.
pub fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("corpus entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "mjcc"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            let src = std::fs::read_to_string(&p).expect("readable corpus file");
            let program = parse_program(&src, &format!("{stem}.mjcc")).expect("corpus parses");
            (stem, program)
        })
        .collect()
}

/// `n` copies of a racy account class, each with its own worker thread.
pub fn scaled_program(n: usize) -> Program {
    let mut src = String::new();
    for i in 0..n {
        src.push_str(&format!(
            "public class Account{i} {{
    private int balance;

    public int get() {{
        return balance;
    }}

    public void add(int x) {{
        balance = balance + x;
    }}
}}

public class Worker{i} implements Runnable {{
    private Account{i} a;

    public void run() {{
        a.add(a.get());
    }}
}}

"
        ));
    }
    parse_program(&src, "scaled.mjcc").expect("generated program parses")
}
