//! Expression language used for variable declarations, task annotations,
//! script tasks and gateway guards.
//!
//! ```text
//! declarations:  bool t1Field; int amount; text note;
//! annotation:    (bool t1Field) : (bool _t2Field) -> { t2Field = _t2Field; }
//! statements:    t2Field = true; amount = amount * 2 + 1;
//! guard:         t1Field && amount > 10
//! ```
//!
//! Integers are 64-bit signed; overflow and division by zero are runtime
//! errors. Programs are type-checked against a scope before they run.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Bool,
    Int,
    Text,
}

impl Type {
    pub fn name(self) -> &'static str {
        match self {
            Type::Bool => "bool",
            Type::Int => "int",
            Type::Text => "text",
        }
    }

    pub fn from_name(s: &str) -> Option<Type> {
        match s {
            "bool" => Some(Type::Bool),
            "int" => Some(Type::Int),
            "text" | "string" => Some(Type::Text),
            _ => None,
        }
    }

    pub fn default_value(self) -> Value {
        match self {
            Type::Bool => Value::Bool(false),
            Type::Int => Value::Int(0),
            Type::Text => Value::Text(String::new()),
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn ty(&self) -> Type {
        match self {
            Value::Bool(_) => Type::Bool,
            Value::Int(_) => Type::Int,
            Value::Text(_) => Type::Text,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Text(s) => serde_json::Value::String(s.clone()),
        }
    }

    /// Reads a JSON value as `ty`; `None` when the shapes differ.
    pub fn from_json(ty: Type, json: &serde_json::Value) -> Option<Value> {
        match ty {
            Type::Bool => json.as_bool().map(Value::Bool),
            Type::Int => json.as_i64().map(Value::Int),
            Type::Text => json.as_str().map(|s| Value::Text(s.to_string())),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => write!(f, "{s:?}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
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
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Lit(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assign {
    pub target: String,
    pub value: Expr,
}

pub type Program = Vec<Assign>;

/// Typed name, as in declarations and annotation signatures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub ty: Type,
    pub name: String,
}

/// `(exports) : (imports) -> { statements }`
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub exports: Vec<Param>,
    pub imports: Vec<Param>,
    pub body: Program,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared variable `{0}`")]
    Undeclared(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

// ---- lexer ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 22] = [
    "&&", "||", "==", "!=", "<=", ">=", "->", "!", "<", ">", "+", "-", "*", "/", "=", "(", ")",
    "{", "}", ",", ":", ";",
];

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ScriptError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = src[start..i].parse().map_err(|_| ScriptError::Syntax {
                pos: start,
                msg: "integer literal out of range".into(),
            })?;
            out.push((start, Tok::Int(n)));
        } else if c == '"' {
            let start = i;
            i += 1;
            let mut s = String::new();
            loop {
                match bytes.get(i) {
                    None => {
                        return Err(ScriptError::Syntax {
                            pos: start,
                            msg: "unterminated string".into(),
                        })
                    }
                    Some(b'"') => {
                        i += 1;
                        break;
                    }
                    Some(b'\\') if i + 1 < bytes.len() => {
                        s.push(bytes[i + 1] as char);
                        i += 2;
                    }
                    Some(_) => {
                        let ch = src[i..].chars().next().expect("in bounds");
                        s.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
            out.push((start, Tok::Str(s)));
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            out.push((i, Tok::Sym(sym)));
            i += sym.len();
        } else {
            return Err(ScriptError::Syntax {
                pos: i,
                msg: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(out)
}

// ---- parser ---------------------------------------------------------------

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ScriptError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            end: src.len(),
        })
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ScriptError> {
        Err(ScriptError::Syntax {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn eat(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, sym: &str) -> Result<(), ScriptError> {
        if self.eat(sym) {
            Ok(())
        } else {
            self.err(format!("expected `{sym}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ScriptError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn param(&mut self) -> Result<Param, ScriptError> {
        let at = self.offset();
        let ty_name = self.ident()?;
        let ty = Type::from_name(&ty_name).ok_or(ScriptError::Syntax {
            pos: at,
            msg: format!("unknown type `{ty_name}`"),
        })?;
        let name = self.ident()?;
        Ok(Param { ty, name })
    }

    fn param_list(&mut self) -> Result<Vec<Param>, ScriptError> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            out.push(self.param()?);
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn statements(&mut self, closing: Option<&str>) -> Result<Program, ScriptError> {
        let mut out = Vec::new();
        loop {
            match closing {
                Some(c) if self.eat(c) => return Ok(out),
                None if self.at_end() => return Ok(out),
                _ => {}
            }
            if self.at_end() {
                return self.err("unexpected end of input");
            }
            if self.eat(";") {
                continue;
            }
            let target = self.ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            self.expect(";")?;
            out.push(Assign { target, value });
        }
    }

    fn expr(&mut self) -> Result<Expr, ScriptError> {
        self.binary_level(0)
    }

    fn binary_level(&mut self, level: usize) -> Result<Expr, ScriptError> {
        const LEVELS: [&[(&str, BinOp)]; 5] = [
            &[("||", BinOp::Or)],
            &[("&&", BinOp::And)],
            &[
                ("==", BinOp::Eq),
                ("!=", BinOp::Ne),
                ("<=", BinOp::Le),
                (">=", BinOp::Ge),
                ("<", BinOp::Lt),
                (">", BinOp::Gt),
            ],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mul), ("/", BinOp::Div)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        'outer: loop {
            for (sym, op) in LEVELS[level] {
                if self.eat(sym) {
                    let rhs = self.binary_level(level + 1)?;
                    lhs = Expr::Binary(*op, Box::new(lhs), Box::new(rhs));
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ScriptError> {
        if self.eat("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ScriptError> {
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        let tok = self.peek().cloned();
        match tok {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                Ok(Expr::Lit(Value::Int(n)))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Expr::Lit(Value::Text(s)))
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(match s.as_str() {
                    "true" => Expr::Lit(Value::Bool(true)),
                    "false" => Expr::Lit(Value::Bool(false)),
                    _ => Expr::Var(s),
                })
            }
            _ => self.err("expected expression"),
        }
    }

    fn finish(&self) -> Result<(), ScriptError> {
        if self.at_end() {
            Ok(())
        } else {
            self.err("trailing input")
        }
    }
}

/// Parses `type name;` declarations.
pub fn parse_declarations(src: &str) -> Result<Vec<Param>, ScriptError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while !p.at_end() {
        if p.eat(";") {
            continue;
        }
        out.push(p.param()?);
        p.expect(";")?;
    }
    Ok(out)
}

pub fn parse_annotation(src: &str) -> Result<Annotation, ScriptError> {
    let mut p = Parser::new(src)?;
    let exports = p.param_list()?;
    p.expect(":")?;
    let imports = p.param_list()?;
    p.expect("->")?;
    p.expect("{")?;
    let body = p.statements(Some("}"))?;
    p.finish()?;
    Ok(Annotation {
        exports,
        imports,
        body,
    })
}

/// Parses a bare statement list, optionally wrapped in braces.
pub fn parse_program(src: &str) -> Result<Program, ScriptError> {
    let mut p = Parser::new(src)?;
    let body = if p.eat("{") {
        p.statements(Some("}"))?
    } else {
        p.statements(None)?
    };
    p.finish()?;
    Ok(body)
}

pub fn parse_expr(src: &str) -> Result<Expr, ScriptError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

// ---- type checking --------------------------------------------------------

pub type Scope = BTreeMap<String, Type>;

pub fn check_expr(e: &Expr, scope: &Scope) -> Result<Type, ScriptError> {
    match e {
        Expr::Lit(v) => Ok(v.ty()),
        Expr::Var(n) => scope
            .get(n)
            .copied()
            .ok_or_else(|| ScriptError::Undeclared(n.clone())),
        Expr::Unary(op, inner) => {
            let t = check_expr(inner, scope)?;
            let want = match op {
                UnOp::Not => Type::Bool,
                UnOp::Neg => Type::Int,
            };
            if t != want {
                return Err(ScriptError::Type(format!(
                    "operand of {op:?} must be {want}, got {t}"
                )));
            }
            Ok(want)
        }
        Expr::Binary(op, l, r) => {
            let (lt, rt) = (check_expr(l, scope)?, check_expr(r, scope)?);
            let mismatch = || ScriptError::Type(format!("{op:?} on {lt} and {rt}"));
            match op {
                BinOp::Or | BinOp::And if lt == Type::Bool && rt == Type::Bool => Ok(Type::Bool),
                BinOp::Eq | BinOp::Ne if lt == rt => Ok(Type::Bool),
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
                    if lt == Type::Int && rt == Type::Int =>
                {
                    Ok(Type::Bool)
                }
                BinOp::Add if lt == Type::Text && rt == Type::Text => Ok(Type::Text),
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div
                    if lt == Type::Int && rt == Type::Int =>
                {
                    Ok(Type::Int)
                }
                _ => Err(mismatch()),
            }
        }
    }
}

/// Checks a program whose assignment targets must be in `writable` and
/// whose expressions may read `readable`.
pub fn check_program(
    prog: &Program,
    writable: &Scope,
    readable: &Scope,
) -> Result<(), ScriptError> {
    for a in prog {
        let target = writable
            .get(&a.target)
            .ok_or_else(|| ScriptError::Undeclared(a.target.clone()))?;
        let t = check_expr(&a.value, readable)?;
        if t != *target {
            return Err(ScriptError::Type(format!(
                "cannot assign {t} to `{}` of type {target}",
                a.target
            )));
        }
    }
    Ok(())
}

// ---- evaluation -----------------------------------------------------------

/// Variables visible to a running program: the node's store plus
/// read-only locals (check-in parameters).
pub struct Env<'a> {
    pub vars: &'a mut BTreeMap<String, Value>,
    pub locals: &'a BTreeMap<String, Value>,
}

fn runtime(msg: impl Into<String>) -> ScriptError {
    ScriptError::Runtime(msg.into())
}

pub fn eval(
    e: &Expr,
    vars: &BTreeMap<String, Value>,
    locals: &BTreeMap<String, Value>,
) -> Result<Value, ScriptError> {
    match e {
        Expr::Lit(v) => Ok(v.clone()),
        Expr::Var(n) => locals
            .get(n)
            .or_else(|| vars.get(n))
            .cloned()
            .ok_or_else(|| ScriptError::Undeclared(n.clone())),
        Expr::Unary(op, inner) => match (op, eval(inner, vars, locals)?) {
            (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
            (UnOp::Neg, Value::Int(i)) => i
                .checked_neg()
                .map(Value::Int)
                .ok_or_else(|| runtime("overflow")),
            (op, v) => Err(runtime(format!("{op:?} on {}", v.ty()))),
        },
        Expr::Binary(BinOp::And, l, r) => match eval(l, vars, locals)? {
            Value::Bool(false) => Ok(Value::Bool(false)),
            Value::Bool(true) => eval(r, vars, locals),
            v => Err(runtime(format!("&& on {}", v.ty()))),
        },
        Expr::Binary(BinOp::Or, l, r) => match eval(l, vars, locals)? {
            Value::Bool(true) => Ok(Value::Bool(true)),
            Value::Bool(false) => eval(r, vars, locals),
            v => Err(runtime(format!("|| on {}", v.ty()))),
        },
        Expr::Binary(op, l, r) => {
            let (lv, rv) = (eval(l, vars, locals)?, eval(r, vars, locals)?);
            match (op, &lv, &rv) {
                (BinOp::Eq, _, _) if lv.ty() == rv.ty() => Ok(Value::Bool(lv == rv)),
                (BinOp::Ne, _, _) if lv.ty() == rv.ty() => Ok(Value::Bool(lv != rv)),
                (BinOp::Add, Value::Text(a), Value::Text(b)) => Ok(Value::Text(format!("{a}{b}"))),
                (_, Value::Int(a), Value::Int(b)) => {
                    let (a, b) = (*a, *b);
                    let out = match op {
                        BinOp::Lt => return Ok(Value::Bool(a < b)),
                        BinOp::Le => return Ok(Value::Bool(a <= b)),
                        BinOp::Gt => return Ok(Value::Bool(a > b)),
                        BinOp::Ge => return Ok(Value::Bool(a >= b)),
                        BinOp::Add => a.checked_add(b),
                        BinOp::Sub => a.checked_sub(b),
                        BinOp::Mul => a.checked_mul(b),
                        BinOp::Div if b == 0 => return Err(runtime("division by zero")),
                        BinOp::Div => a.checked_div(b),
                        _ => return Err(runtime(format!("{op:?} on int"))),
                    };
                    out.map(Value::Int).ok_or_else(|| runtime("overflow"))
                }
                _ => Err(runtime(format!("{op:?} on {} and {}", lv.ty(), rv.ty()))),
            }
        }
    }
}

impl Env<'_> {
    /// Runs the statements in order; on error the store may be partially
    /// updated, which the enclosing transaction rolls back.
    pub fn run(&mut self, prog: &Program) -> Result<(), ScriptError> {
        for a in prog {
            let v = eval(&a.value, self.vars, self.locals)?;
            match self.vars.get_mut(&a.target) {
                Some(slot) if slot.ty() == v.ty() => *slot = v,
                Some(slot) => {
                    return Err(runtime(format!(
                        "cannot assign {} to {}",
                        v.ty(),
                        slot.ty()
                    )))
                }
                None => return Err(ScriptError::Undeclared(a.target.clone())),
            }
        }
        Ok(())
    }
}
