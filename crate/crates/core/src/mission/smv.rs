//! SMV-dialect text for the mission model, and a small interpreter for the
//! same dialect so emitted text can be checked against the native model.
//!
//! The dialect is the one shown in the classic SMV examples: pairs written
//! `[x , y]` and indexed from 1, `case ... esac` tables, `init`/`next`
//! assignments, and `SPEC` lines in the CTL syntax of [`crate::ctl`].
//! Variables with no `next` assignment are unconstrained inputs.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::specs::parse_expected;
use super::{builtin_specs, neighbour_offsets, CatalogueEntry, CellChoice, Heading, MissionConfig, MissionError};
use crate::ctl::{parse_formula, print_formula};
use crate::kripke::{materialize, ExplicitKripke, ImplicitKripke, KripkeError, LabelRow, PropRegistry, StateId};

// ---------------------------------------------------------------- emitter

fn coord(base: &str, delta: i64) -> String {
    match delta {
        0 => base.to_string(),
        d if d > 0 => format!("{base}+{d}"),
        d => format!("{base}-{}", -d),
    }
}

/// In-grid condition for the neighbour at `(dx, dy)` cells away.
fn bound_check(cfg: &MissionConfig, (dx, dy): (i64, i64)) -> String {
    let g = &cfg.grid;
    let step = g.cell_size;
    let hi = |o: i64| o + (g.cells_per_side as i64 - 1) * step;
    let mut parts = Vec::new();
    for (axis, d, lo) in [(1, dx, g.origin[0]), (2, dy, g.origin[1])] {
        let expr = coord(&format!("current_cell[{axis}]"), d * step);
        if d > 0 {
            parts.push(format!("{expr} <= {}", hi(lo)));
        } else if d < 0 {
            parts.push(format!("{expr} >= {lo}"));
        }
    }
    if parts.is_empty() {
        "TRUE".to_string()
    } else {
        parts.join(" & ")
    }
}

/// Emits a self-contained SMV module for `config`. The output depends only
/// on the configuration.
pub fn emit_smv(config: &MissionConfig) -> Result<String, MissionError> {
    config.validate()?;
    let g = &config.grid;
    let step = g.cell_size;
    let top = |o: i64| o + (g.cells_per_side as i64 - 1) * step;
    let lo = g.origin[0].min(g.origin[1]);
    let hi = top(g.origin[0]).max(top(g.origin[1]));
    let [ix, iy] = g.centre(config.initial_cell);
    let park = [g.origin[0], top(g.origin[1])];
    let headings = [Heading::Deg90, Heading::Deg270];

    let mut o = String::new();
    let w = &mut o;
    writeln!(w, "-- single UAV cooperative search, {n} x {n} cells of {step} m", n = g.cells_per_side).unwrap();
    writeln!(w, "MODULE main").unwrap();
    writeln!(w, "VAR").unwrap();
    writeln!(w, "  current_cell : array 1..2 of {lo}..{hi};").unwrap();
    writeln!(w, "  initial_heading : {{90, 270}};").unwrap();
    writeln!(w, "  halted : boolean;").unwrap();
    writeln!(w, "  -- environment, declared non-deterministic").unwrap();
    for k in 1..=5 {
        writeln!(w, "  threat_in_cell{k} : boolean;").unwrap();
    }
    for k in 1..=5 {
        writeln!(w, "  other_uav_selected_cell{k} : boolean;").unwrap();
    }

    writeln!(w, "DEFINE").unwrap();
    writeln!(w, "  north_cell := case").unwrap();
    writeln!(w, "                  current_cell[2]={}:1;", top(g.origin[1])).unwrap();
    writeln!(w, "                  1:0;").unwrap();
    writeln!(w, "                esac;").unwrap();
    writeln!(w, "  south_cell := case").unwrap();
    writeln!(w, "                  current_cell[2]={}:1;", g.origin[1]).unwrap();
    writeln!(w, "                  1:0;").unwrap();
    writeln!(w, "                esac;").unwrap();
    for k in 1..=5 {
        writeln!(w, "  in_grid_cell{k} := case").unwrap();
        for h in headings {
            let off = neighbour_offsets(h)[k - 1].1;
            writeln!(w, "                    initial_heading = {} : {};", h.degrees(), bound_check(config, off))
                .unwrap();
        }
        writeln!(w, "                  esac;").unwrap();
        writeln!(w, "  free_cell{k} := in_grid_cell{k} & !threat_in_cell{k} & !other_uav_selected_cell{k};").unwrap();
    }
    writeln!(w, "  cell := case").unwrap();
    writeln!(w, "            halted : no_free_cell;").unwrap();
    writeln!(w, "            free_cell1 : cell1;").unwrap();
    writeln!(w, "            free_cell3 : cell3;").unwrap();
    writeln!(w, "            south_cell = 1 & initial_heading = 270 & free_cell4 : cell4;").unwrap();
    for c in &CellChoice::PREFERENCE[2..] {
        writeln!(w, "            free_{c} : {c};").unwrap();
    }
    writeln!(w, "            1 : no_free_cell;").unwrap();
    writeln!(w, "          esac;").unwrap();
    writeln!(w, "  destination_cell :=").unwrap();
    writeln!(w, "           case").unwrap();
    for c in CellChoice::NEIGHBOURS {
        writeln!(w, "             cell={c}  : case").unwrap();
        for h in headings {
            let k = c.number().unwrap();
            let (dx, dy) = neighbour_offsets(h)[k - 1].1;
            writeln!(
                w,
                "                initial_heading ={:<3}: [{} , {}];",
                h.degrees(),
                coord("current_cell[1]", dx * step),
                coord("current_cell[2]", dy * step)
            )
            .unwrap();
        }
        writeln!(w, "                           esac;").unwrap();
    }
    writeln!(w, "             1 : [{} , {}];", park[0], park[1]).unwrap();
    writeln!(w, "           esac;").unwrap();
    writeln!(w, "  destination_heading :=").unwrap();
    writeln!(w, "           case").unwrap();
    writeln!(w, "             cell=cell1 | cell=cell2 | cell=cell3 : initial_heading;").unwrap();
    writeln!(w, "             cell=cell4 | cell=cell5 : case").unwrap();
    writeln!(w, "                initial_heading =90 : 270;").unwrap();
    writeln!(w, "                initial_heading =270: 90;").unwrap();
    writeln!(w, "                           esac;").unwrap();
    writeln!(w, "             1 : 90;").unwrap();
    writeln!(w, "           esac;").unwrap();
    writeln!(w, "  heading_90 := initial_heading = 90;").unwrap();
    writeln!(w, "  heading_270 := initial_heading = 270;").unwrap();
    for k in 1..=5 {
        writeln!(w, "  choice_cell{k} := cell = cell{k};").unwrap();
    }
    writeln!(w, "  choice_no_free_cell := cell = no_free_cell;").unwrap();
    writeln!(w, "  at_sink := halted;").unwrap();

    writeln!(w, "ASSIGN").unwrap();
    writeln!(w, "  init(current_cell) := [{ix} , {iy}];").unwrap();
    writeln!(w, "  init(initial_heading):={};", config.initial_heading.degrees()).unwrap();
    writeln!(w, "  init(halted) := FALSE;").unwrap();
    writeln!(w, "  next(initial_heading) := destination_heading;").unwrap();
    writeln!(w, "  next(current_cell) := destination_cell;").unwrap();
    writeln!(w, "  next(halted) := cell = no_free_cell;").unwrap();

    for spec in builtin_specs() {
        let expect = if spec.expected == Some(false) { "false" } else { "true" };
        writeln!(w, "SPEC {} -- {} expect {expect}", print_formula(&spec.formula), spec.id).unwrap();
    }
    Ok(o)
}

// ---------------------------------------------------------------- values

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Sym(String),
    Pair([i64; 2]),
}

impl Value {
    /// Boolean reading; SMV accepts 0 and 1 in boolean position.
    fn truth(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(0) => Some(false),
            Value::Int(1) => Some(true),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(true) => f.write_str("TRUE"),
            Value::Bool(false) => f.write_str("FALSE"),
            Value::Int(n) => write!(f, "{n}"),
            Value::Sym(s) => f.write_str(s),
            Value::Pair([x, y]) => write!(f, "[{x} , {y}]"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("smv line {line}: {message}")]
pub struct SmvError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, SmvError> {
    Err(SmvError { line, message: message.into() })
}

// ---------------------------------------------------------------- lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Op(&'static str),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Op(s) => write!(f, "`{s}`"),
        }
    }
}

const OPS: [&str; 21] =
    [":=", "..", "!=", "<=", ">=", "->", ":", ";", ",", "[", "]", "(", ")", "{", "}", "=", "<", ">", "+", "-", "&"];

fn lex_line(text: &str, line: usize, out: &mut Vec<(Tok, usize)>) -> Result<(), SmvError> {
    let b = text.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i].parse().map_err(|_| SmvError { line, message: "integer too large".into() })?;
            out.push((Tok::Int(n), line));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), line));
        } else if c == '|' {
            out.push((Tok::Op("|"), line));
            i += 1;
        } else if c == '!' && !text[i..].starts_with("!=") {
            out.push((Tok::Op("!"), line));
            i += 1;
        } else if let Some(op) = OPS.iter().find(|op| text[i..].starts_with(**op)) {
            out.push((Tok::Op(op), line));
            i += op.len();
        } else {
            return err(line, format!("unexpected character {c:?}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- syntax

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Lit(Value),
    Name(String),
    Index(Box<Expr>, i64),
    Pair(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Bin(&'static str, Box<Expr>, Box<Expr>),
    Case(Vec<(Expr, Expr)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarType {
    Boolean,
    Enum(Vec<Value>),
    Range(i64, i64),
    /// Fixed-size integer array; only pairs are supported.
    Pair(i64, i64),
}

impl VarType {
    fn admits(&self, v: &Value) -> bool {
        match (self, v) {
            (VarType::Boolean, v) => v.truth().is_some(),
            (VarType::Enum(vals), v) => vals.contains(v),
            (VarType::Range(lo, hi), Value::Int(n)) => (lo..=hi).contains(&n),
            (VarType::Pair(lo, hi), Value::Pair(p)) => p.iter().all(|n| (lo..=hi).contains(&n)),
            _ => false,
        }
    }

    fn normalize(&self, v: Value) -> Value {
        match self {
            VarType::Boolean => Value::Bool(v.truth().unwrap()),
            _ => v,
        }
    }

    /// Explicit domain, when small enough to enumerate.
    fn domain(&self, limit: usize) -> Option<Vec<Value>> {
        match self {
            VarType::Boolean => Some(vec![Value::Bool(false), Value::Bool(true)]),
            VarType::Enum(v) => Some(v.clone()),
            VarType::Range(lo, hi) if ((hi - lo) as usize) < limit => Some((*lo..=*hi).map(Value::Int).collect()),
            VarType::Pair(lo, hi) if ((hi - lo + 1) as usize).saturating_pow(2) <= limit => {
                Some((*lo..=*hi).flat_map(|x| (*lo..=*hi).map(move |y| Value::Pair([x, y]))).collect())
            }
            _ => None,
        }
    }
}

/// Parsed SMV program.
#[derive(Debug, Clone, PartialEq)]
pub struct SmvProgram {
    pub vars: Vec<(String, VarType)>,
    defines: Vec<(String, Expr)>,
    init: HashMap<String, (Expr, usize)>,
    next: HashMap<String, (Expr, usize)>,
    /// `SPEC` lines; a trailing `-- id [expect true|false]` comment names
    /// them, otherwise they are numbered.
    pub specs: Vec<CatalogueEntry>,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |(_, l)| *l)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, op: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Op(o)) if *o == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: &str) -> Result<(), SmvError> {
        if self.eat(op) {
            return Ok(());
        }
        let line = self.line();
        match self.peek() {
            Some(t) => err(line, format!("expected `{op}`, found {t}")),
            None => err(line, format!("expected `{op}`, found end of input")),
        }
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn ident(&mut self) -> Result<String, SmvError> {
        let line = self.line();
        match self.bump() {
            Some(Tok::Ident(s)) => Ok(s),
            Some(t) => err(line, format!("expected identifier, found {t}")),
            None => err(line, "expected identifier, found end of input"),
        }
    }

    fn int(&mut self) -> Result<i64, SmvError> {
        let neg = self.eat("-");
        let line = self.line();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(if neg { -n } else { n }),
            Some(t) => err(line, format!("expected integer, found {t}")),
            None => err(line, "expected integer, found end of input"),
        }
    }

    fn var_type(&mut self) -> Result<VarType, SmvError> {
        if self.keyword("boolean") {
            self.pos += 1;
            return Ok(VarType::Boolean);
        }
        if self.keyword("array") {
            self.pos += 1;
            let line = self.line();
            let (a, b) = (self.int()?, {
                self.expect("..")?;
                self.int()?
            });
            if (a, b) != (1, 2) {
                return err(line, "only `array 1..2` is supported");
            }
            if self.ident()? != "of" {
                return err(line, "expected `of`");
            }
            let lo = self.int()?;
            self.expect("..")?;
            return Ok(VarType::Pair(lo, self.int()?));
        }
        if self.eat("{") {
            let mut vals = Vec::new();
            loop {
                vals.push(match self.peek() {
                    Some(Tok::Ident(_)) => Value::Sym(self.ident()?),
                    _ => Value::Int(self.int()?),
                });
                if self.eat("}") {
                    return Ok(VarType::Enum(vals));
                }
                self.expect(",")?;
            }
        }
        let lo = self.int()?;
        self.expect("..")?;
        Ok(VarType::Range(lo, self.int()?))
    }

    fn expr(&mut self) -> Result<Expr, SmvError> {
        let lhs = self.or()?;
        if self.eat("->") {
            let rhs = self.expr()?;
            return Ok(Expr::Bin("|", Box::new(Expr::Not(Box::new(lhs))), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, SmvError> {
        let mut lhs = self.and()?;
        while self.eat("|") {
            lhs = Expr::Bin("|", Box::new(lhs), Box::new(self.and()?));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SmvError> {
        let mut lhs = self.cmp()?;
        while self.eat("&") {
            lhs = Expr::Bin("&", Box::new(lhs), Box::new(self.cmp()?));
        }
        Ok(lhs)
    }

    fn cmp(&mut self) -> Result<Expr, SmvError> {
        let lhs = self.add()?;
        for op in ["=", "!=", "<=", ">=", "<", ">"] {
            if self.eat(op) {
                return Ok(Expr::Bin(op, Box::new(lhs), Box::new(self.add()?)));
            }
        }
        Ok(lhs)
    }

    fn add(&mut self) -> Result<Expr, SmvError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat("+") {
                "+"
            } else if self.eat("-") {
                "-"
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, SmvError> {
        if self.eat("!") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let mut e = self.primary()?;
        while self.eat("[") {
            let line = self.line();
            let i = self.int()?;
            if !(1..=2).contains(&i) {
                return err(line, format!("index {i} out of range 1..2"));
            }
            self.expect("]")?;
            e = Expr::Index(Box::new(e), i);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, SmvError> {
        let line = self.line();
        match self.bump() {
            Some(Tok::Int(n)) => Ok(Expr::Lit(Value::Int(n))),
            Some(Tok::Ident(s)) => Ok(match s.as_str() {
                "TRUE" => Expr::Lit(Value::Bool(true)),
                "FALSE" => Expr::Lit(Value::Bool(false)),
                "case" => {
                    let mut arms = Vec::new();
                    while !self.keyword("esac") {
                        if self.peek().is_none() {
                            return err(line, "unterminated `case`");
                        }
                        let cond = self.expr()?;
                        self.expect(":")?;
                        let val = self.expr()?;
                        self.expect(";")?;
                        arms.push((cond, val));
                    }
                    self.pos += 1;
                    Expr::Case(arms)
                }
                _ => Expr::Name(s),
            }),
            Some(Tok::Op("(")) => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(Tok::Op("[")) => {
                let a = self.expr()?;
                self.expect(",")?;
                let b = self.expr()?;
                self.expect("]")?;
                Ok(Expr::Pair(Box::new(a), Box::new(b)))
            }
            Some(t) => err(line, format!("unexpected {t}")),
            None => err(line, "unexpected end of input"),
        }
    }
}

/// Parses the dialect emitted by [`emit_smv`].
pub fn parse_smv(text: &str) -> Result<SmvProgram, SmvError> {
    let mut toks = Vec::new();
    let mut specs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (code, comment) = match raw.find("--") {
            // `->` never starts a comment
            Some(at) if !raw[at..].starts_with("->") => (&raw[..at], Some(raw[at + 2..].trim())),
            _ => (raw, None),
        };
        if let Some(rest) = code.trim_start().strip_prefix("SPEC") {
            let f = parse_formula(rest).map_err(|e| SmvError { line, message: format!("SPEC: {e}") })?;
            let (id, expected) = match comment.and_then(|c| c.split_once(char::is_whitespace).or(Some((c, "")))) {
                Some((id, rest)) if !id.is_empty() => (id.to_string(), parse_expected(rest)),
                _ => ((specs.len() + 1).to_string(), None),
            };
            specs.push(CatalogueEntry { id, formula: f, expected });
            continue;
        }
        lex_line(code, line, &mut toks)?;
    }
    let last_line = toks.last().map_or(1, |(_, l)| *l);
    let mut p = Parser { toks, pos: 0, last_line };
    let mut prog =
        SmvProgram { vars: Vec::new(), defines: Vec::new(), init: HashMap::new(), next: HashMap::new(), specs };
    if !p.keyword("MODULE") {
        return err(p.line(), "expected `MODULE main`");
    }
    p.pos += 1;
    if p.ident()? != "main" {
        return err(p.line(), "only `MODULE main` is supported");
    }
    let mut section = "";
    while let Some(tok) = p.peek().cloned() {
        let line = p.line();
        if let Tok::Ident(kw) = &tok {
            if matches!(kw.as_str(), "VAR" | "DEFINE" | "ASSIGN") {
                section = match kw.as_str() {
                    "VAR" => "VAR",
                    "DEFINE" => "DEFINE",
                    _ => "ASSIGN",
                };
                p.pos += 1;
                continue;
            }
        }
        match section {
            "VAR" => {
                let name = p.ident()?;
                p.expect(":")?;
                let ty = p.var_type()?;
                p.expect(";")?;
                if prog.vars.iter().any(|(n, _)| *n == name) {
                    return err(line, format!("variable `{name}` declared twice"));
                }
                prog.vars.push((name, ty));
            }
            "DEFINE" => {
                let name = p.ident()?;
                p.expect(":=")?;
                let e = p.expr()?;
                p.expect(";")?;
                if prog.defines.iter().any(|(n, _)| *n == name) {
                    return err(line, format!("`{name}` defined twice"));
                }
                prog.defines.push((name, e));
            }
            "ASSIGN" => {
                let kind = p.ident()?;
                p.expect("(")?;
                let name = p.ident()?;
                p.expect(")")?;
                p.expect(":=")?;
                let e = p.expr()?;
                p.expect(";")?;
                let table = match kind.as_str() {
                    "init" => &mut prog.init,
                    "next" => &mut prog.next,
                    _ => return err(line, format!("expected `init` or `next`, found `{kind}`")),
                };
                if table.insert(name.clone(), (e, line)).is_some() {
                    return err(line, format!("{kind}({name}) assigned twice"));
                }
            }
            _ => return err(line, format!("unexpected {tok} outside a section")),
        }
    }
    for name in prog.init.keys().chain(prog.next.keys()) {
        if !prog.vars.iter().any(|(n, _)| n == name) {
            let line = prog.init.get(name).or(prog.next.get(name)).unwrap().1;
            return err(line, format!("assignment to undeclared variable `{name}`"));
        }
    }
    Ok(prog)
}

// ---------------------------------------------------------------- evaluation

struct Eval<'p> {
    prog: &'p SmvProgram,
    var_index: HashMap<&'p str, usize>,
    def_index: HashMap<&'p str, usize>,
    symbols: Vec<String>,
}

struct Frame<'a> {
    vars: &'a [Option<Value>],
    defs: Vec<Option<Value>>,
    busy: Vec<bool>,
}

impl<'p> Eval<'p> {
    fn new(prog: &'p SmvProgram) -> Self {
        let mut symbols = Vec::new();
        for (_, ty) in &prog.vars {
            if let VarType::Enum(vals) = ty {
                symbols.extend(vals.iter().filter_map(|v| match v {
                    Value::Sym(s) => Some(s.clone()),
                    _ => None,
                }));
            }
        }
        // symbolic constants that only appear as case results
        fn collect(e: &Expr, names: &mut Vec<String>) {
            match e {
                Expr::Name(n) => names.push(n.clone()),
                Expr::Index(a, _) | Expr::Not(a) | Expr::Neg(a) => collect(a, names),
                Expr::Pair(a, b) | Expr::Bin(_, a, b) => {
                    collect(a, names);
                    collect(b, names)
                }
                Expr::Case(arms) => arms.iter().for_each(|(c, v)| {
                    collect(c, names);
                    collect(v, names)
                }),
                Expr::Lit(_) => {}
            }
        }
        let mut names = Vec::new();
        for (_, e) in &prog.defines {
            collect(e, &mut names);
        }
        for (e, _) in prog.init.values().chain(prog.next.values()) {
            collect(e, &mut names);
        }
        let var_index: HashMap<_, _> = prog.vars.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
        let def_index: HashMap<_, _> = prog.defines.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i)).collect();
        symbols.extend(
            names.into_iter().filter(|n| !var_index.contains_key(n.as_str()) && !def_index.contains_key(n.as_str())),
        );
        symbols.sort();
        symbols.dedup();
        Eval { prog, var_index, def_index, symbols }
    }

    fn frame<'a>(&self, vars: &'a [Option<Value>]) -> Frame<'a> {
        let n = self.prog.defines.len();
        Frame { vars, defs: vec![None; n], busy: vec![false; n] }
    }

    fn define(&self, fr: &mut Frame, i: usize) -> Result<Value, String> {
        if let Some(v) = &fr.defs[i] {
            return Ok(v.clone());
        }
        if fr.busy[i] {
            return Err(format!("`{}` is defined in terms of itself", self.prog.defines[i].0));
        }
        fr.busy[i] = true;
        let v = self.eval(fr, &self.prog.defines[i].1)?;
        fr.busy[i] = false;
        fr.defs[i] = Some(v.clone());
        Ok(v)
    }

    fn eval(&self, fr: &mut Frame, e: &Expr) -> Result<Value, String> {
        let int = |v: Value| match v {
            Value::Int(n) => Ok(n),
            other => Err(format!("expected an integer, got {other}")),
        };
        let truth = |v: Value| v.truth().ok_or_else(|| format!("expected a boolean, got {v}"));
        Ok(match e {
            Expr::Lit(v) => v.clone(),
            Expr::Name(n) => {
                if let Some(&i) = self.var_index.get(n.as_str()) {
                    fr.vars[i].clone().ok_or_else(|| format!("`{n}` has no value here"))?
                } else if let Some(&i) = self.def_index.get(n.as_str()) {
                    self.define(fr, i)?
                } else if self.symbols.binary_search(n).is_ok() {
                    Value::Sym(n.clone())
                } else {
                    return Err(format!("unknown name `{n}`"));
                }
            }
            Expr::Index(a, i) => match self.eval(fr, a)? {
                Value::Pair(p) => Value::Int(p[*i as usize - 1]),
                other => return Err(format!("cannot index {other}")),
            },
            Expr::Pair(a, b) => Value::Pair([int(self.eval(fr, a)?)?, int(self.eval(fr, b)?)?]),
            Expr::Not(a) => Value::Bool(!truth(self.eval(fr, a)?)?),
            Expr::Neg(a) => Value::Int(-int(self.eval(fr, a)?)?),
            Expr::Bin(op, a, b) => match *op {
                "&" => Value::Bool(truth(self.eval(fr, a)?)? && truth(self.eval(fr, b)?)?),
                "|" => Value::Bool(truth(self.eval(fr, a)?)? || truth(self.eval(fr, b)?)?),
                "=" | "!=" => {
                    let (x, y) = (self.eval(fr, a)?, self.eval(fr, b)?);
                    let same = match (x.truth(), y.truth()) {
                        (Some(p), Some(q)) if matches!(x, Value::Bool(_)) || matches!(y, Value::Bool(_)) => p == q,
                        _ => x == y,
                    };
                    Value::Bool(same == (*op == "="))
                }
                _ => {
                    let (x, y) = (int(self.eval(fr, a)?)?, int(self.eval(fr, b)?)?);
                    match *op {
                        "+" => Value::Int(x + y),
                        "-" => Value::Int(x - y),
                        "<" => Value::Bool(x < y),
                        ">" => Value::Bool(x > y),
                        "<=" => Value::Bool(x <= y),
                        ">=" => Value::Bool(x >= y),
                        _ => unreachable!("operator {op}"),
                    }
                }
            },
            Expr::Case(arms) => {
                for (c, v) in arms {
                    if truth(self.eval(fr, c)?)? {
                        return self.eval(fr, v);
                    }
                }
                return Err("no case arm applies".into());
            }
        })
    }
}

/// An SMV program compiled to a Kripke structure.
///
/// Variables with a `next` assignment form the core; the rest are free
/// inputs, numbered in mixed radix with the first declared input as the
/// lowest digit. Only cores reachable from the initial states are built.
/// Propositions are the boolean variables and every define whose value is
/// boolean (or 0/1) in all states.
#[derive(Debug, Clone)]
pub struct SmvModel {
    kripke: ImplicitKripke,
    core_vars: Vec<String>,
    input_vars: Vec<(String, Vec<Value>)>,
    cores: Vec<Vec<Value>>,
    pub specs: Vec<CatalogueEntry>,
}

impl std::ops::Deref for SmvModel {
    type Target = ImplicitKripke;

    fn deref(&self) -> &ImplicitKripke {
        &self.kripke
    }
}

impl SmvModel {
    pub fn kripke(&self) -> &ImplicitKripke {
        &self.kripke
    }

    /// Variable assignment of a state, in declaration order of cores then inputs.
    pub fn valuation(&self, s: StateId) -> Vec<(String, Value)> {
        let (core, input) = self.kripke.decode(s);
        let mut out: Vec<_> = self.core_vars.iter().cloned().zip(self.cores[core].iter().cloned()).collect();
        let mut rest = input;
        for (name, dom) in &self.input_vars {
            out.push((name.clone(), dom[rest % dom.len()].clone()));
            rest /= dom.len();
        }
        out
    }

    pub fn core_values(&self, core: usize) -> &[Value] {
        &self.cores[core]
    }

    pub fn to_explicit(&self, max_states: usize) -> Result<ExplicitKripke, KripkeError> {
        materialize(&self.kripke, max_states)
    }
}

const DOMAIN_LIMIT: usize = 1 << 16;

/// Interprets `prog`, exploring at most `max_cores` core valuations.
pub fn compile_smv(prog: &SmvProgram, max_cores: usize) -> Result<SmvModel, SmvError> {
    let ev = Eval::new(prog);
    let nvars = prog.vars.len();
    let (core_idx, input_idx): (Vec<usize>, Vec<usize>) =
        (0..nvars).partition(|&i| prog.next.contains_key(&prog.vars[i].0));
    let mut input_doms = Vec::new();
    for &i in &input_idx {
        let (name, ty) = &prog.vars[i];
        match ty.domain(DOMAIN_LIMIT) {
            Some(d) => input_doms.push(d),
            None => return err(0, format!("input `{name}` has too large a domain")),
        }
    }
    let input_count =
        input_doms.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len()).filter(|&n| n <= DOMAIN_LIMIT));
    let Some(input_count) = input_count else {
        return err(0, "too many input valuations");
    };
    let input_vals = |mut code: usize| -> Vec<Value> {
        input_doms
            .iter()
            .map(|d| {
                let v = d[code % d.len()].clone();
                code /= d.len();
                v
            })
            .collect()
    };

    // initial core valuations
    let empty = vec![None; nvars];
    let mut init_choices: Vec<Vec<Value>> = vec![Vec::new()];
    for &i in &core_idx {
        let (name, ty) = &prog.vars[i];
        let options = match prog.init.get(name) {
            Some((e, line)) => {
                let v = ev.eval(&mut ev.frame(&empty), e).map_err(|m| SmvError { line: *line, message: m })?;
                if !ty.admits(&v) {
                    return err(*line, format!("init({name}) = {v} is outside the declared type"));
                }
                vec![ty.normalize(v)]
            }
            None => ty
                .domain(DOMAIN_LIMIT)
                .ok_or_else(|| SmvError { line: 0, message: format!("`{name}` needs an init assignment") })?,
        };
        init_choices = init_choices
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push(o.clone());
                    p
                })
            })
            .collect();
        if init_choices.len() > max_cores {
            return err(0, "too many initial states");
        }
    }
    let mut init_inputs = Vec::new();
    'inputs: for code in 0..input_count {
        let vals = input_vals(code);
        for (k, &i) in input_idx.iter().enumerate() {
            let (name, ty) = &prog.vars[i];
            if let Some((e, line)) = prog.init.get(name) {
                let v = ev.eval(&mut ev.frame(&empty), e).map_err(|m| SmvError { line: *line, message: m })?;
                if ty.normalize(v) != vals[k] {
                    continue 'inputs;
                }
            }
        }
        init_inputs.push(code);
    }

    // explore cores breadth first
    let mut cores: Vec<Vec<Value>> = Vec::new();
    let mut index: HashMap<Vec<Value>, usize> = HashMap::new();
    for c in init_choices.iter() {
        if !index.contains_key(c) {
            index.insert(c.clone(), cores.len());
            cores.push(c.clone());
        }
    }
    let initial_cores: Vec<usize> = init_choices.iter().map(|c| index[c]).collect();

    let candidates: Vec<String> = prog
        .vars
        .iter()
        .filter(|(_, t)| *t == VarType::Boolean)
        .map(|(n, _)| n.clone())
        .chain(prog.defines.iter().map(|(n, _)| n.clone()))
        .collect();
    let nbool = prog.vars.iter().filter(|(_, t)| *t == VarType::Boolean).count();
    let words = candidates.len().div_ceil(64).max(1);
    let mut is_prop = vec![true; candidates.len()];
    let mut table: Vec<usize> = Vec::new();
    let mut bits: Vec<u64> = Vec::new();
    let next_exprs: Vec<(usize, &Expr, usize)> =
        core_idx.iter().map(|&i| (i, &prog.next[&prog.vars[i].0].0, prog.next[&prog.vars[i].0].1)).collect();
    let mut vars = vec![None; nvars];
    let mut c = 0;
    while c < cores.len() {
        for (k, &i) in core_idx.iter().enumerate() {
            vars[i] = Some(cores[c][k].clone());
        }
        for code in 0..input_count {
            for (k, v) in input_vals(code).into_iter().enumerate() {
                vars[input_idx[k]] = Some(v);
            }
            let mut fr = ev.frame(&vars);
            let mut next = Vec::with_capacity(core_idx.len());
            for &(i, e, line) in &next_exprs {
                let v = ev.eval(&mut fr, e).map_err(|m| SmvError { line, message: m })?;
                let (name, ty) = &prog.vars[i];
                if !ty.admits(&v) {
                    return err(line, format!("next({name}) = {v} is outside the declared type"));
                }
                next.push(ty.normalize(v));
            }
            let row_start = bits.len();
            bits.resize(row_start + words, 0);
            for (p, name) in candidates.iter().enumerate() {
                let v = if p < nbool {
                    vars[ev.var_index[name.as_str()]].clone().unwrap()
                } else {
                    ev.define(&mut fr, p - nbool).map_err(|m| SmvError { line: 0, message: format!("{name}: {m}") })?
                };
                match v.truth() {
                    Some(true) => bits[row_start + p / 64] |= 1 << (p % 64),
                    Some(false) => {}
                    None => is_prop[p] = false,
                }
            }
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if cores.len() >= max_cores {
                        return err(0, format!("more than {max_cores} reachable core states"));
                    }
                    index.insert(next.clone(), cores.len());
                    cores.push(next);
                    cores.len() - 1
                }
            };
            table.push(id);
        }
        c += 1;
    }

    let mut props = PropRegistry::new();
    let ids: Vec<_> = candidates.iter().zip(&is_prop).map(|(n, &keep)| keep.then(|| props.intern(n))).collect();
    let initial: Vec<(usize, usize)> =
        initial_cores.iter().flat_map(|&c| init_inputs.iter().map(move |&i| (c, i))).collect();
    if initial.is_empty() {
        return err(0, "no initial state");
    }
    let kripke = ImplicitKripke::new(
        cores.len(),
        input_count,
        props,
        initial,
        |c, i| table[c * input_count + i],
        |c, i, row: &mut LabelRow| {
            let at = (c * input_count + i) * words;
            for (p, id) in ids.iter().enumerate() {
                if let Some(id) = id {
                    if bits[at + p / 64] >> (p % 64) & 1 == 1 {
                        row.set(*id);
                    }
                }
            }
        },
    );
    Ok(SmvModel {
        kripke,
        core_vars: core_idx.iter().map(|&i| prog.vars[i].0.clone()).collect(),
        input_vars: input_idx.iter().map(|&i| prog.vars[i].0.clone()).zip(input_doms).collect(),
        cores,
        specs: prog.specs.clone(),
    })
}

/// Parses and compiles SMV text in one step.
pub fn load_smv(text: &str, max_cores: usize) -> Result<SmvModel, SmvError> {
    compile_smv(&parse_smv(text)?, max_cores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kripke::Kripke;
    use crate::mission::{build_mission_kripke, Cell, PROPOSITIONS};

    #[test]
    fn emitted_text_has_the_classic_fragments() {
        let text = emit_smv(&MissionConfig::default()).unwrap();
        for needle in [
            "init(current_cell) := [50 , 50];",
            "init(initial_heading):=90;",
            "next(initial_heading) := destination_heading;",
            "next(current_cell) := destination_cell;",
            "current_cell[2]=1950:1;",
            "current_cell[2]=50:1;",
            "initial_heading =90 : [current_cell[1] , current_cell[2]+100];",
            "initial_heading =270: [current_cell[1] , current_cell[2]-100];",
            "SPEC AG (!choice_no_free_cell) -- S5 expect false",
        ] {
            assert!(text.contains(needle), "missing {needle:?}");
        }
        assert_eq!(text.matches("\nSPEC ").count(), 9);
        assert_eq!(text, emit_smv(&MissionConfig::default()).unwrap());
    }

    #[test]
    fn parse_errors_have_lines() {
        let e = parse_smv("MODULE main\nVAR\n  x : boolean;\nASSIGN\n  next(y) := x;\n").unwrap_err();
        assert_eq!(e.line, 5);
        let e = parse_smv("MODULE main\nVAR\n  x : boolean\n").unwrap_err();
        assert!(e.message.contains("`;`"), "{e}");
        assert!(parse_smv("MODULE main\nVAR x : boolean;\nSPEC AG (\n").is_err());
    }

    #[test]
    fn small_program() {
        let text = "MODULE main\nVAR\n  n : 0..3;\n  go : boolean;\nDEFINE\n  top := n = 3;\nASSIGN\n  init(n) := 0;\n  next(n) := case go & n < 3 : n + 1; 1 : n; esac;\nSPEC EF top -- reach\n";
        let m = load_smv(text, 100).unwrap();
        assert_eq!(m.core_count(), 4);
        assert_eq!(m.input_count(), 2);
        assert_eq!(m.initial_states().len(), 2);
        assert_eq!((m.specs[0].id.as_str(), m.specs[0].expected), ("reach", None));
        assert!(crate::checker::verify(&*m, &m.specs[0].formula).unwrap().holds);
        let names: Vec<_> = m.props().iter().map(|(_, n)| n.to_string()).collect();
        assert_eq!(names, ["go", "top"]);
    }

    /// Reader output matches the native model on every reachable core.
    fn agrees_with_native(cfg: MissionConfig) {
        let native = build_mission_kripke(&cfg).unwrap();
        let smv = load_smv(&emit_smv(&cfg).unwrap(), 10_000).unwrap();
        assert_eq!(smv.input_count(), native.input_count());
        let to_native = |core: usize| -> usize {
            let vals = smv.core_values(core);
            let names: Vec<_> = smv.core_vars.iter().map(String::as_str).collect();
            assert_eq!(names, ["current_cell", "initial_heading", "halted"]);
            if vals[2] == Value::Bool(true) {
                return native.sink_core();
            }
            let (Value::Pair([x, y]), Value::Int(h)) = (&vals[0], &vals[1]) else { panic!("{vals:?}") };
            let cell: Cell = cfg.grid.cell_at_centre(*x as f64, *y as f64).unwrap();
            native.core_of(cell, Heading::from_degrees(*h).unwrap())
        };
        let mut native_init: Vec<_> = native.initial_states().to_vec();
        let mut mapped: Vec<_> = smv
            .initial_states()
            .iter()
            .map(|&s| {
                let (c, i) = smv.decode(s);
                native.kripke().encode(to_native(c), i)
            })
            .collect();
        native_init.sort();
        mapped.sort();
        assert_eq!(mapped, native_init);
        for c in 0..smv.core_count() {
            let nc = to_native(c);
            for i in 0..smv.input_count() {
                let s = smv.encode(c, i);
                let t = native.kripke().encode(nc, i);
                assert_eq!(to_native(smv.next_core(s)), native.next_core(t), "core {c} input {i}");
                let mut a: Vec<_> =
                    smv.label_names(s).into_iter().filter(|p| PROPOSITIONS.contains(&p.as_str())).collect();
                let mut b = native.label_names(t);
                a.sort();
                b.sort();
                assert_eq!(a, b, "labels at core {c} input {i}");
            }
        }
        let reachable: std::collections::BTreeSet<_> = (0..smv.core_count()).map(to_native).collect();
        assert_eq!(reachable.len(), smv.core_count());
    }

    #[test]
    fn emitted_model_matches_native_n2() {
        agrees_with_native(MissionConfig::with_cells(2));
    }

    #[test]
    fn emitted_model_matches_native_n3_heading_south() {
        let mut cfg = MissionConfig::with_cells(3);
        cfg.initial_cell = Cell::new(1, 2);
        cfg.initial_heading = Heading::Deg270;
        agrees_with_native(cfg);
    }
}
