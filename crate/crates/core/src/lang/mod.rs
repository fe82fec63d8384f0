//! MiniJava-CC: a small Java-like language with classes, fields, methods,
//! lexically scoped `synchronized` blocks and `Runnable` threads.

pub mod ast;
mod lexer;
mod parser;
pub mod path;
mod printer;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use parser::parse_program;
pub use path::{normalize_path, AccessPath, NotAPath, PathElem, Scope};
pub use printer::{render_expr, render_field, render_program, render_stmts};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    fn lexical(line: u32, col: u32, msg: impl Into<String>) -> Self {
        ParseError {
            file: String::new(),
            line,
            col,
            expected: Vec::new(),
            found: msg.into(),
        }
    }

    fn in_file(mut self, file: &str) -> Self {
        self.file = file.to_string();
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: ", self.file, self.line, self.col)?;
        match self.expected.as_slice() {
            [] => f.write_str(&self.found),
            [one] => write!(f, "expected {one}, found {}", self.found),
            many => write!(f, "expected one of {}, found {}", many.join(", "), self.found),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("syntax error: {0}")]
    Syntax(ParseError),
    #[error("{file}:{line}:{col}: duplicate {what} `{name}`")]
    Duplicate {
        file: String,
        line: u32,
        col: u32,
        what: &'static str,
        name: String,
    },
}

/// Copy of `p` with every span cleared, for structural comparison.
pub fn strip_spans(p: &Program) -> Program {
    fn stmts(list: &mut [Stmt]) {
        for s in list {
            s.span = SourceSpan::synthetic();
            for child in s.children_mut() {
                stmts(child);
            }
        }
    }
    let mut p = p.clone();
    p.source_name.clear();
    for c in &mut p.classes {
        c.span = SourceSpan::synthetic();
        for f in &mut c.fields {
            f.span = SourceSpan::synthetic();
        }
        for m in &mut c.methods {
            m.span = SourceSpan::synthetic();
            stmts(&mut m.body);
        }
    }
    p
}

/// Depth-first search for the statement starting at `site`.
pub fn find_stmt(stmts: &[Stmt], line: u32, col: u32) -> Option<&Stmt> {
    for s in stmts {
        if s.span.start_line == line && s.span.start_col == col && !s.span.is_synthetic() {
            return Some(s);
        }
        for child in s.children() {
            if let Some(found) = find_stmt(child, line, col) {
                return Some(found);
            }
        }
    }
    None
}
