//! Canonical source printer. Output always reparses to the same tree.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn render_program(p: &Program) -> String {
    let mut out = String::new();
    for (i, c) in p.classes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        render_class(c, &mut out);
    }
    out
}

fn render_class(c: &ClassDecl, out: &mut String) {
    for a in &c.annotations {
        let _ = writeln!(out, "@{a}");
    }
    if c.is_public {
        out.push_str("public ");
    }
    let _ = write!(out, "class {}", c.name);
    if c.implements_runnable {
        out.push_str(" implements Runnable");
    }
    out.push_str(" {\n");
    for f in &c.fields {
        out.push_str(INDENT);
        out.push_str(&render_field(f));
        out.push('\n');
    }
    for (i, m) in c.methods.iter().enumerate() {
        if i > 0 || !c.fields.is_empty() {
            out.push('\n');
        }
        render_method(m, out);
    }
    out.push_str("}\n");
}

pub fn render_field(f: &FieldDecl) -> String {
    let mut s = String::new();
    if let Some(v) = f.visibility {
        s.push_str(v.keyword());
        s.push(' ');
    }
    if f.is_static {
        s.push_str("static ");
    }
    if f.is_final {
        s.push_str("final ");
    }
    if f.is_volatile {
        s.push_str("volatile ");
    }
    let _ = write!(s, "{} {}", f.ty, f.name);
    if let Some(init) = &f.init {
        let _ = write!(s, " = {}", render_expr(init));
    }
    s.push(';');
    s
}

fn render_method(m: &MethodDecl, out: &mut String) {
    out.push_str(INDENT);
    if let Some(v) = m.visibility {
        out.push_str(v.keyword());
        out.push(' ');
    }
    if m.is_static {
        out.push_str("static ");
    }
    if m.is_synchronized {
        out.push_str("synchronized ");
    }
    match &m.ret {
        Some(t) => {
            let _ = write!(out, "{t} ");
        }
        None => out.push_str("void "),
    }
    let params: Vec<String> = m.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
    let _ = writeln!(out, "{}({}) {{", m.name, params.join(", "));
    render_block(&m.body, 2, out);
    out.push_str(INDENT);
    out.push_str("}\n");
}

fn render_block(stmts: &[Stmt], depth: usize, out: &mut String) {
    for s in stmts {
        render_stmt(s, depth, out);
    }
}

fn pad(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

/// Renders statements at the given indentation depth.
pub fn render_stmts(stmts: &[Stmt], depth: usize) -> String {
    let mut out = String::new();
    render_block(stmts, depth, &mut out);
    out
}

fn render_stmt(s: &Stmt, depth: usize, out: &mut String) {
    pad(depth, out);
    match &s.kind {
        StmtKind::LocalDecl { ty, name, init } => {
            let _ = write!(out, "{ty} {name}");
            if let Some(e) = init {
                let _ = write!(out, " = {}", render_expr(e));
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { target, op, value } => {
            let _ = writeln!(out, "{} {} {};", render_expr(target), op.symbol(), render_expr(value));
        }
        StmtKind::Sync { lock, body } => {
            let _ = writeln!(out, "synchronized({}) {{", render_expr(lock));
            render_block(body, depth + 1, out);
            pad(depth, out);
            out.push_str("}\n");
        }
        StmtKind::If {
            cond,
            then_body,
            else_body,
        } => {
            render_if(cond, then_body, else_body.as_deref(), depth, out);
            out.push('\n');
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while ({}) {{", render_expr(cond));
            render_block(body, depth + 1, out);
            pad(depth, out);
            out.push_str("}\n");
        }
        StmtKind::Call(c) => {
            let _ = writeln!(out, "{};", render_call(c));
        }
        StmtKind::Return(e) => match e {
            Some(e) => {
                let _ = writeln!(out, "return {};", render_expr(e));
            }
            None => out.push_str("return;\n"),
        },
        StmtKind::Expr(e) => {
            let _ = writeln!(out, "{};", render_expr(e));
        }
    }
}

/// Writes an `if` chain without the trailing newline; `else if` is used when
/// the else branch is a lone `if`.
fn render_if(cond: &Expr, then_body: &[Stmt], else_body: Option<&[Stmt]>, depth: usize, out: &mut String) {
    let _ = writeln!(out, "if ({}) {{", render_expr(cond));
    render_block(then_body, depth + 1, out);
    pad(depth, out);
    out.push('}');
    if let Some(e) = else_body {
        if let [Stmt {
            kind:
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                },
            ..
        }] = e
        {
            out.push_str(" else ");
            render_if(cond, then_body, else_body.as_deref(), depth, out);
        } else {
            out.push_str(" else {\n");
            render_block(e, depth + 1, out);
            pad(depth, out);
            out.push('}');
        }
    }
}

fn render_call(c: &CallExpr) -> String {
    let args: Vec<String> = c.args.iter().map(render_expr).collect();
    match &c.receiver {
        Some(r) => format!("{}.{}({})", render_postfix_target(r), c.method, args.join(", ")),
        None => format!("{}({})", c.method, args.join(", ")),
    }
}

fn render_postfix_target(e: &Expr) -> String {
    match e {
        Expr::Binary { .. } | Expr::Unary { .. } => format!("({})", render_expr(e)),
        _ => render_expr(e),
    }
}

pub fn render_expr(e: &Expr) -> String {
    render_prec(e, 0)
}

fn render_prec(e: &Expr, min: u8) -> String {
    match e {
        Expr::Int(n) => n.to_string(),
        Expr::Bool(b) => b.to_string(),
        Expr::Str(s) => {
            let mut out = String::from("\"");
            for ch in s.chars() {
                match ch {
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    c => out.push(c),
                }
            }
            out.push('"');
            out
        }
        Expr::Null => "null".into(),
        Expr::This => "this".into(),
        Expr::Name(n) => n.clone(),
        Expr::Field { target, name } => format!("{}.{}", render_postfix_target(target), name),
        Expr::Index { target, index } => {
            format!("{}[{}]", render_postfix_target(target), render_expr(index))
        }
        Expr::Call(c) => render_call(c),
        Expr::New { class, args } => {
            let args: Vec<String> = args.iter().map(render_expr).collect();
            format!("new {}({})", class, args.join(", "))
        }
        Expr::NewArray { elem, size } => format!("new {}[{}]", elem, render_expr(size)),
        Expr::Binary { op, lhs, rhs } => {
            let p = op.precedence();
            let s = format!("{} {} {}", render_prec(lhs, p), op.symbol(), render_prec(rhs, p + 1));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
        Expr::Unary { op, expr } => {
            let inner = render_prec(expr, 7);
            let s = match op {
                UnOp::Not => format!("!{inner}"),
                // Keep `- -x` from lexing as `--`.
                UnOp::Neg if inner.starts_with('-') => format!("-({inner})"),
                UnOp::Neg => format!("-{inner}"),
            };
            if min > 7 {
                format!("({s})")
            } else {
                s
            }
        }
    }
}
