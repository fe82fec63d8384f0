//! Recursive-descent parser for MiniJava-CC.

use std::collections::HashSet;

use super::ast::*;
use super::lexer::{tokenize, Keyword, Tok, Token};
use super::path::is_path_expr;
use super::{FrontendError, ParseError};

/// Parses one compilation unit. `source_name` is recorded in every span.
pub fn parse_program(source: &str, source_name: &str) -> Result<Program, FrontendError> {
    let tokens = tokenize(source).map_err(|e| FrontendError::Syntax(e.in_file(source_name)))?;
    let mut p = Parser {
        tokens,
        pos: 0,
        file: source_name.to_string(),
    };
    let program = p
        .program()
        .map_err(|e| FrontendError::Syntax(e.in_file(source_name)))?;
    check_names(&program)?;
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    file: String,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let t = self.here();
        ParseError {
            file: String::new(),
            line: t.line,
            col: t.col,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.to_string(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, k: Keyword) -> bool {
        matches!(self.peek(), Tok::Kw(q) if *q == k)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: Keyword) -> bool {
        if self.is_kw(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<Token> {
        if self.is_punct(p) {
            Ok(self.advance())
        } else {
            Err(self.error(&[p]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn span_from(&self, start: &Token) -> SourceSpan {
        let last = &self.tokens[self.pos.saturating_sub(1)];
        SourceSpan {
            file: self.file.clone(),
            start_line: start.line,
            start_col: start.col,
            end_line: last.end_line,
            end_col: last.end_col,
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut classes = Vec::new();
        while *self.peek() != Tok::Eof {
            classes.push(self.class()?);
        }
        Ok(Program {
            source_name: self.file.clone(),
            classes,
        })
    }

    fn class(&mut self) -> PResult<ClassDecl> {
        let start = self.here().clone();
        let mut annotations = Vec::new();
        while self.eat_punct("@") {
            annotations.push(self.ident()?);
        }
        let is_public = self.eat_kw(Keyword::Public);
        if !self.is_kw(Keyword::Class) {
            let mut exp = vec!["class"];
            if annotations.is_empty() && !is_public {
                exp.extend(["@", "public"]);
            }
            return Err(self.error(&exp));
        }
        self.advance();
        let name = self.ident()?;
        let mut implements_runnable = false;
        if self.eat_kw(Keyword::Implements) {
            match self.peek() {
                Tok::Ident(s) if s == "Runnable" => {
                    self.advance();
                    implements_runnable = true;
                }
                _ => return Err(self.error(&["Runnable"])),
            }
        }
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error(&["}", "field", "method"]));
            }
            match self.member()? {
                Member::Field(f) => fields.push(f),
                Member::Method(m) => methods.push(m),
            }
        }
        self.advance();
        Ok(ClassDecl {
            name,
            annotations,
            is_public,
            implements_runnable,
            fields,
            methods,
            span: self.span_from(&start),
        })
    }

    fn member(&mut self) -> PResult<Member> {
        let start = self.here().clone();
        let mut visibility = None;
        let (mut is_static, mut is_final, mut is_volatile, mut is_sync) = (false, false, false, false);
        loop {
            let vis = match self.peek() {
                Tok::Kw(Keyword::Public) => Some(Visibility::Public),
                Tok::Kw(Keyword::Private) => Some(Visibility::Private),
                Tok::Kw(Keyword::Protected) => Some(Visibility::Protected),
                _ => None,
            };
            if let Some(v) = vis {
                if visibility.is_some() {
                    return Err(self.error(&["type", "void"]));
                }
                visibility = Some(v);
                self.advance();
                continue;
            }
            let flag = match self.peek() {
                Tok::Kw(Keyword::Static) => &mut is_static,
                Tok::Kw(Keyword::Final) => &mut is_final,
                Tok::Kw(Keyword::Volatile) => &mut is_volatile,
                Tok::Kw(Keyword::Synchronized) => &mut is_sync,
                _ => break,
            };
            *flag = true;
            self.advance();
        }

        let ret = if self.eat_kw(Keyword::Void) {
            None
        } else {
            Some(self.type_name()?)
        };
        let name = self.ident()?;
        if self.is_punct("(") {
            if is_volatile || is_final {
                return Err(self.error(&[";", "="]));
            }
            self.advance();
            let mut params = Vec::new();
            if !self.is_punct(")") {
                loop {
                    let ty = self.type_name()?;
                    let name = self.ident()?;
                    params.push(Param { name, ty });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let body = self.block()?;
            return Ok(Member::Method(MethodDecl {
                name,
                ret,
                visibility,
                is_static,
                is_synchronized: is_sync,
                params,
                body,
                span: self.span_from(&start),
            }));
        }

        let Some(ty) = ret else {
            return Err(self.error(&["("]));
        };
        if is_sync {
            return Err(self.error(&["("]));
        }
        let init = if self.eat_punct("=") {
            Some(self.expr()?)
        } else {
            None
        };
        self.expect_punct(";")?;
        Ok(Member::Field(FieldDecl {
            name,
            ty,
            visibility,
            is_static,
            is_final,
            is_volatile,
            init,
            span: self.span_from(&start),
        }))
    }

    fn type_name(&mut self) -> PResult<TypeName> {
        let name = match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                s
            }
            _ => return Err(self.error(&["type"])),
        };
        let mut dims = 0;
        while self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.advance();
            self.advance();
            dims += 1;
        }
        Ok(TypeName { name, dims })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.error(&["}", "statement"]));
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(stmts)
    }

    /// Body of `if`/`while`: a braced block or one statement.
    fn body(&mut self) -> PResult<Vec<Stmt>> {
        if self.is_punct("{") {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn starts_local_decl(&self) -> bool {
        matches!(
            (self.peek(), self.peek_at(1), self.peek_at(2)),
            (Tok::Ident(_), Tok::Ident(_), _) | (Tok::Ident(_), Tok::Punct("["), Tok::Punct("]"))
        )
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.here().clone();
        let kind = match self.peek() {
            Tok::Kw(Keyword::Synchronized) => {
                self.advance();
                self.expect_punct("(")?;
                let lock_tok = self.here().clone();
                let lock = self.expr()?;
                if !is_path_expr(&lock) {
                    return Err(ParseError {
                        file: String::new(),
                        line: lock_tok.line,
                        col: lock_tok.col,
                        expected: vec!["access path".into()],
                        found: "non-path monitor expression".into(),
                    });
                }
                self.expect_punct(")")?;
                let body = self.block()?;
                StmtKind::Sync { lock, body }
            }
            Tok::Kw(Keyword::If) => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let then_body = self.body()?;
                let else_body = if self.eat_kw(Keyword::Else) {
                    Some(self.body()?)
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_body,
                    else_body,
                }
            }
            Tok::Kw(Keyword::While) => {
                self.advance();
                self.expect_punct("(")?;
                let cond = self.expr()?;
                self.expect_punct(")")?;
                let body = self.body()?;
                StmtKind::While { cond, body }
            }
            Tok::Kw(Keyword::Return) => {
                self.advance();
                let value = if self.is_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                StmtKind::Return(value)
            }
            _ if self.starts_local_decl() => {
                let ty = self.type_name()?;
                let name = self.ident()?;
                let init = if self.eat_punct("=") {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect_punct(";")?;
                StmtKind::LocalDecl { ty, name, init }
            }
            _ => {
                let target_tok = self.here().clone();
                let e = self.expr()?;
                let op = match self.peek() {
                    Tok::Punct("=") => Some((AssignOp::Set, None)),
                    Tok::Punct("+=") => Some((AssignOp::Add, None)),
                    Tok::Punct("-=") => Some((AssignOp::Sub, None)),
                    Tok::Punct("++") => Some((AssignOp::Add, Some(Expr::Int(1)))),
                    Tok::Punct("--") => Some((AssignOp::Sub, Some(Expr::Int(1)))),
                    _ => None,
                };
                let kind = match op {
                    Some((op, implicit)) => {
                        if !is_path_expr(&e) || e == Expr::This {
                            return Err(ParseError {
                                file: String::new(),
                                line: target_tok.line,
                                col: target_tok.col,
                                expected: vec!["assignable expression".into()],
                                found: "non-assignable expression".into(),
                            });
                        }
                        self.advance();
                        let value = match implicit {
                            Some(v) => v,
                            None => self.expr()?,
                        };
                        StmtKind::Assign {
                            target: e,
                            op,
                            value,
                        }
                    }
                    None => match e {
                        Expr::Call(c) => StmtKind::Call(c),
                        other => StmtKind::Expr(other),
                    },
                };
                if !self.is_punct(";") {
                    let expected: &[&str] = if matches!(kind, StmtKind::Assign { .. }) {
                        &[";"]
                    } else {
                        &[";", "=", "+=", "-=", "++", "--"]
                    };
                    return Err(self.error(expected));
                }
                self.advance();
                kind
            }
        };
        Ok(Stmt {
            kind,
            span: self.span_from(&start),
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Punct("||") => BinOp::Or,
            Tok::Punct("&&") => BinOp::And,
            Tok::Punct("==") => BinOp::Eq,
            Tok::Punct("!=") => BinOp::Ne,
            Tok::Punct("<") => BinOp::Lt,
            Tok::Punct("<=") => BinOp::Le,
            Tok::Punct(">") => BinOp::Gt,
            Tok::Punct(">=") => BinOp::Ge,
            Tok::Punct("+") => BinOp::Add,
            Tok::Punct("-") => BinOp::Sub,
            Tok::Punct("*") => BinOp::Mul,
            Tok::Punct("/") => BinOp::Div,
            Tok::Punct("%") => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let op = if self.eat_punct("!") {
            UnOp::Not
        } else if self.eat_punct("-") {
            UnOp::Neg
        } else {
            return self.postfix();
        };
        Ok(Expr::Unary {
            op,
            expr: Box::new(self.unary()?),
        })
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct(".") {
                let name = if self.eat_kw(Keyword::Class) {
                    "class".to_string()
                } else {
                    self.ident()?
                };
                if self.is_punct("(") && name != "class" {
                    let args = self.args()?;
                    e = Expr::Call(CallExpr {
                        receiver: Some(Box::new(e)),
                        method: name,
                        args,
                    });
                } else {
                    e = Expr::field(e, name);
                }
            } else if self.eat_punct("[") {
                let index = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::Index {
                    target: Box::new(e),
                    index: Box::new(index),
                };
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let e = match self.peek().clone() {
            Tok::Int(n) => {
                self.advance();
                Expr::Int(n)
            }
            Tok::Str(s) => {
                self.advance();
                Expr::Str(s)
            }
            Tok::Kw(Keyword::True) => {
                self.advance();
                Expr::Bool(true)
            }
            Tok::Kw(Keyword::False) => {
                self.advance();
                Expr::Bool(false)
            }
            Tok::Kw(Keyword::Null) => {
                self.advance();
                Expr::Null
            }
            Tok::Kw(Keyword::This) => {
                self.advance();
                Expr::This
            }
            Tok::Ident(name) => {
                self.advance();
                if self.is_punct("(") {
                    let args = self.args()?;
                    Expr::Call(CallExpr {
                        receiver: None,
                        method: name,
                        args,
                    })
                } else {
                    Expr::Name(name)
                }
            }
            Tok::Kw(Keyword::New) => {
                self.advance();
                let class = self.ident()?;
                if self.eat_punct("[") {
                    let size = self.expr()?;
                    self.expect_punct("]")?;
                    Expr::NewArray {
                        elem: TypeName::simple(class),
                        size: Box::new(size),
                    }
                } else {
                    let args = self.args()?;
                    Expr::New { class, args }
                }
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                e
            }
            _ => return Err(self.error(&["expression"])),
        };
        Ok(e)
    }
}

enum Member {
    Field(FieldDecl),
    Method(MethodDecl),
}

fn check_names(p: &Program) -> Result<(), FrontendError> {
    let dup = |span: &SourceSpan, what: &'static str, name: &str| FrontendError::Duplicate {
        file: span.file.clone(),
        line: span.start_line,
        col: span.start_col,
        what,
        name: name.to_string(),
    };
    let mut classes = HashSet::new();
    for c in &p.classes {
        if !classes.insert(c.name.as_str()) {
            return Err(dup(&c.span, "class", &c.name));
        }
        let mut fields = HashSet::new();
        for f in &c.fields {
            if !fields.insert(f.name.as_str()) {
                return Err(dup(&f.span, "field", &f.name));
            }
        }
        let mut methods = HashSet::new();
        for m in &c.methods {
            if !methods.insert(m.name.as_str()) {
                return Err(dup(&m.span, "method", &m.name));
            }
            let mut params = HashSet::new();
            for prm in &m.params {
                if !params.insert(prm.name.as_str()) {
                    return Err(dup(&m.span, "parameter", &prm.name));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Program {
        parse_program(src, "t.mjcc").unwrap()
    }

    #[test]
    fn empty_input_has_no_classes() {
        assert!(parse("").classes.is_empty());
        assert!(parse("  // nothing\n").classes.is_empty());
    }

    #[test]
    fn sync_block_on_this() {
        let p = parse("class C { int x; void m(){ synchronized(this){ this.x = 1; } } }");
        assert_eq!(p.classes.len(), 1);
        let m = &p.classes[0].methods[0];
        assert_eq!(m.body.len(), 1);
        match &m.body[0].kind {
            StmtKind::Sync { lock, body } => {
                assert_eq!(*lock, Expr::This);
                assert_eq!(body.len(), 1);
                assert!(matches!(body[0].kind, StmtKind::Assign { op: AssignOp::Set, .. }));
            }
            other => panic!("expected sync block, got {other:?}"),
        }
    }

    #[test]
    fn statement_spans_nest() {
        let p = parse("class C {\n  int x;\n  void m() {\n    if (x > 0) {\n      x = 1;\n    }\n  }\n}\n");
        let outer = &p.classes[0].methods[0].body[0];
        assert_eq!((outer.span.start_line, outer.span.start_col), (4, 5));
        assert_eq!((outer.span.end_line, outer.span.end_col), (6, 5));
        let StmtKind::If { then_body, .. } = &outer.kind else {
            panic!()
        };
        assert!(outer.span.contains(&then_body[0].span));
        assert_eq!(then_body[0].span.end_col, 12);
    }

    #[test]
    fn increment_desugars_to_compound_assignment() {
        let p = parse("class C { int x; void m(){ x++; } }");
        assert!(matches!(
            &p.classes[0].methods[0].body[0].kind,
            StmtKind::Assign { op: AssignOp::Add, value: Expr::Int(1), .. }
        ));
    }

    #[test]
    fn syntax_error_reports_expected_tokens() {
        let err = parse_program("class C { void m() { x = 1 } }", "e.mjcc").unwrap_err();
        let FrontendError::Syntax(e) = err else {
            panic!()
        };
        assert_eq!((e.line, e.col), (1, 28));
        assert_eq!(e.expected, vec![";".to_string()]);
        assert_eq!(e.file, "e.mjcc");
    }

    #[test]
    fn non_path_monitor_is_rejected() {
        let err = parse_program("class C { void m() { synchronized(1 + 2) { } } }", "e").unwrap_err();
        assert!(matches!(err, FrontendError::Syntax(_)));
    }

    #[test]
    fn duplicates_are_rejected() {
        for src in [
            "class A {} class A {}",
            "class A { int x; int x; }",
            "class A { void m() {} void m() {} }",
            "class A { void m(int a, int a) {} }",
        ] {
            assert!(
                matches!(parse_program(src, "d"), Err(FrontendError::Duplicate { .. })),
                "{src}"
            );
        }
    }

    #[test]
    fn precedence_is_respected() {
        let p = parse("class C { int m(){ return 1 + 2 * 3 - 4; } }");
        let StmtKind::Return(Some(e)) = &p.classes[0].methods[0].body[0].kind else {
            panic!()
        };
        // ((1 + (2 * 3)) - 4)
        let Expr::Binary { op: BinOp::Sub, lhs, .. } = e else {
            panic!("{e:?}")
        };
        assert!(matches!(**lhs, Expr::Binary { op: BinOp::Add, .. }));
    }
}
