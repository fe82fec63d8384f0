//! Syntax tree for MiniJava-CC.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A region of a source file. Lines and columns are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceSpan {
    pub file: String,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

impl SourceSpan {
    /// Span attached to nodes created by patches rather than read from a file.
    pub fn synthetic() -> Self {
        SourceSpan::default()
    }

    pub fn is_synthetic(&self) -> bool {
        self.start_line == 0
    }

    pub fn site(&self) -> Site {
        Site {
            file: self.file.clone(),
            line: self.start_line,
            col: self.start_col,
        }
    }

    /// True if `other` lies within `self` (inclusive).
    pub fn contains(&self, other: &SourceSpan) -> bool {
        (self.start_line, self.start_col) <= (other.start_line, other.start_col)
            && (other.end_line, other.end_col) <= (self.end_line, self.end_col)
    }
}

/// Start position of a statement. Two statements of one program never share
/// a start position, so a site identifies a statement.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub file: String,
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub source_name: String,
    pub classes: Vec<ClassDecl>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut ClassDecl> {
        self.classes.iter_mut().find(|c| c.name == name)
    }

    pub fn method(&self, class: &str, method: &str) -> Option<&MethodDecl> {
        self.class(class).and_then(|c| c.method(method))
    }

    /// Every `(class, method)` pair in declaration order.
    pub fn methods(&self) -> impl Iterator<Item = (&ClassDecl, &MethodDecl)> {
        self.classes
            .iter()
            .flat_map(|c| c.methods.iter().map(move |m| (c, m)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Visibility {
    Public,
    Private,
    Protected,
}

impl Visibility {
    pub fn keyword(self) -> &'static str {
        match self {
            Visibility::Public => "public",
            Visibility::Private => "private",
            Visibility::Protected => "protected",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub annotations: Vec<String>,
    pub is_public: bool,
    pub implements_runnable: bool,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<MethodDecl>,
    pub span: SourceSpan,
}

impl ClassDecl {
    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods.iter().find(|m| m.name == name)
    }

    pub fn has_annotation(&self, name: &str) -> bool {
        self.annotations.iter().any(|a| a == name)
    }
}

/// A declared type: a class or primitive name plus array dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeName {
    pub name: String,
    pub dims: usize,
}

impl TypeName {
    pub fn simple(name: impl Into<String>) -> Self {
        TypeName {
            name: name.into(),
            dims: 0,
        }
    }

    /// Type of one element of an array type, or `None` for non-arrays.
    pub fn element(&self) -> Option<TypeName> {
        (self.dims > 0).then(|| TypeName {
            name: self.name.clone(),
            dims: self.dims - 1,
        })
    }

    pub fn is_array(&self) -> bool {
        self.dims > 0
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for _ in 0..self.dims {
            f.write_str("[]")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: TypeName,
    pub visibility: Option<Visibility>,
    pub is_static: bool,
    pub is_final: bool,
    pub is_volatile: bool,
    pub init: Option<Expr>,
    pub span: SourceSpan,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: TypeName,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MethodDecl {
    pub name: String,
    /// `None` for `void`.
    pub ret: Option<TypeName>,
    pub visibility: Option<Visibility>,
    pub is_static: bool,
    pub is_synchronized: bool,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub span: SourceSpan,
}

impl MethodDecl {
    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn is_main(&self) -> bool {
        self.is_static && self.name == "main" && self.ret.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: SourceSpan,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            kind,
            span: SourceSpan::synthetic(),
        }
    }

    /// Nested statement lists, in source order.
    pub fn children(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::Sync { body, .. } | StmtKind::While { body, .. } => vec![body],
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                let mut out = vec![then_body];
                if let Some(e) = else_body {
                    out.push(e);
                }
                out
            }
            _ => Vec::new(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Vec<Stmt>> {
        match &mut self.kind {
            StmtKind::Sync { body, .. } | StmtKind::While { body, .. } => vec![body],
            StmtKind::If {
                then_body,
                else_body,
                ..
            } => {
                let mut out = vec![then_body];
                if let Some(e) = else_body {
                    out.push(e);
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    LocalDecl {
        ty: TypeName,
        name: String,
        init: Option<Expr>,
    },
    Assign {
        target: Expr,
        op: AssignOp,
        value: Expr,
    },
    Sync {
        lock: Expr,
        body: Vec<Stmt>,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Option<Vec<Stmt>>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Call(CallExpr),
    Return(Option<Expr>),
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallExpr {
    /// `None` for an unqualified call on the enclosing instance or class.
    pub receiver: Option<Box<Expr>>,
    pub method: String,
    pub args: Vec<Expr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; higher binds tighter. All operators are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Str(String),
    Null,
    This,
    Name(String),
    Field {
        target: Box<Expr>,
        name: String,
    },
    Index {
        target: Box<Expr>,
        index: Box<Expr>,
    },
    Call(CallExpr),
    New {
        class: String,
        args: Vec<Expr>,
    },
    NewArray {
        elem: TypeName,
        size: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnOp,
        expr: Box<Expr>,
    },
}

impl Expr {
    pub fn field(target: Expr, name: impl Into<String>) -> Expr {
        Expr::Field {
            target: Box::new(target),
            name: name.into(),
        }
    }
}
