//! CTL formulas: abstract syntax, a recursive-descent parser for the ASCII
//! concrete syntax, a round-tripping printer, and the rewrite into the
//! existential fragment {EX, EU, EG} used by the checker.
//!
//! Concrete syntax, tightest binding first:
//!
//! ```text
//! unary   !f  AX f  EX f  AF f  EF f  AG f  EG f
//! and     f & g          (left-assoc)
//! or      f | g          (left-assoc)
//! implies f -> g         (right-assoc)
//! atoms   true  false  ident  ( f )  A [ f U g ]  E [ f U g ]
//! ```

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Bottom,
    Top,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    AX(Box<Formula>),
    EX(Box<Formula>),
    AF(Box<Formula>),
    EF(Box<Formula>),
    AG(Box<Formula>),
    EG(Box<Formula>),
    AU(Box<Formula>, Box<Formula>),
    EU(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Self {
        Formula::Atom(name.into())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Self) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Self) -> Self {
        Formula::Or(Box::new(self), Box::new(other))
    }

    pub fn implies(self, other: Self) -> Self {
        Formula::Implies(Box::new(self), Box::new(other))
    }

    pub fn ax(self) -> Self {
        Formula::AX(Box::new(self))
    }

    pub fn ex(self) -> Self {
        Formula::EX(Box::new(self))
    }

    pub fn af(self) -> Self {
        Formula::AF(Box::new(self))
    }

    pub fn ef(self) -> Self {
        Formula::EF(Box::new(self))
    }

    pub fn ag(self) -> Self {
        Formula::AG(Box::new(self))
    }

    pub fn eg(self) -> Self {
        Formula::EG(Box::new(self))
    }

    pub fn au(self, until: Self) -> Self {
        Formula::AU(Box::new(self), Box::new(until))
    }

    pub fn eu(self, until: Self) -> Self {
        Formula::EU(Box::new(self), Box::new(until))
    }

    /// True when the formula contains no temporal operator.
    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::Bottom | Formula::Top | Formula::Atom(_) => true,
            Formula::Not(f) => f.is_propositional(),
            Formula::And(f, g) | Formula::Or(f, g) | Formula::Implies(f, g) => {
                f.is_propositional() && g.is_propositional()
            }
            _ => false,
        }
    }

    /// Atom names in order of first occurrence.
    pub fn atoms(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Formula::Bottom | Formula::Top => {}
            Formula::Atom(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Formula::Not(f)
            | Formula::AX(f)
            | Formula::EX(f)
            | Formula::AF(f)
            | Formula::EF(f)
            | Formula::AG(f)
            | Formula::EG(f) => f.collect_atoms(out),
            Formula::And(f, g) | Formula::Or(f, g) | Formula::Implies(f, g) | Formula::AU(f, g) | Formula::EU(f, g) => {
                f.collect_atoms(out);
                g.collect_atoms(out);
            }
        }
    }

    /// Number of nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Bottom | Formula::Top | Formula::Atom(_) => 1,
            Formula::Not(f)
            | Formula::AX(f)
            | Formula::EX(f)
            | Formula::AF(f)
            | Formula::EF(f)
            | Formula::AG(f)
            | Formula::EG(f) => 1 + f.depth(),
            Formula::And(f, g) | Formula::Or(f, g) | Formula::Implies(f, g) | Formula::AU(f, g) | Formula::EU(f, g) => {
                1 + f.depth().max(g.depth())
            }
        }
    }

    /// True when every node belongs to {⊥, ⊤, atom, ¬, ∧, EX, EU, EG}.
    pub fn is_existential_normal_form(&self) -> bool {
        match self {
            Formula::Bottom | Formula::Top | Formula::Atom(_) => true,
            Formula::Not(f) | Formula::EX(f) | Formula::EG(f) => f.is_existential_normal_form(),
            Formula::And(f, g) | Formula::EU(f, g) => f.is_existential_normal_form() && g.is_existential_normal_form(),
            _ => false,
        }
    }
}

/// Rewrites `f` into the adequate fragment {⊥, ⊤, atom, ¬, ∧, EX, EU, EG}.
pub fn to_existential_normal_form(f: &Formula) -> Formula {
    use Formula::*;
    let enf = to_existential_normal_form;
    match f {
        Bottom => Bottom,
        Top => Top,
        Atom(name) => Atom(name.clone()),
        Not(g) => enf(g).not(),
        And(g, h) => enf(g).and(enf(h)),
        // g | h  ==  !(!g & !h)
        Or(g, h) => enf(g).not().and(enf(h).not()).not(),
        // g -> h  ==  !(g & !h)
        Implies(g, h) => enf(g).and(enf(h).not()).not(),
        EX(g) => enf(g).ex(),
        AX(g) => enf(g).not().ex().not(),
        EF(g) => Top.eu(enf(g)),
        AG(g) => Top.eu(enf(g).not()).not(),
        EG(g) => enf(g).eg(),
        AF(g) => enf(g).not().eg().not(),
        EU(g, h) => enf(g).eu(enf(h)),
        // A[g U h]  ==  !(E[!h U (!g & !h)] | EG !h), with the | rewritten as above
        AU(g, h) => {
            let g = enf(g);
            let h = enf(h);
            let stuck = h.clone().not().eu(g.not().and(h.clone().not()));
            let never = h.not().eg();
            stuck.not().and(never.not()).not().not()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { start, end }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnknownCharacter(char),
    UnbalancedBracket(char),
    Syntax { found: String, expected: Vec<&'static str> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {span}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: SourceSpan,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnknownCharacter(c) => write!(f, "unknown character {c:?}"),
            ParseErrorKind::UnbalancedBracket(c) => write!(f, "unbalanced bracket {c:?}"),
            ParseErrorKind::Syntax { found, expected } => {
                write!(f, "syntax error: found {found}, expected one of {}", expected.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    True,
    False,
    Ident(String),
    Not,
    And,
    Or,
    Arrow,
    LParen,
    RParen,
    LBrack,
    RBrack,
    A,
    E,
    U,
    Unary(UnaryOp),
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnaryOp {
    AX,
    EX,
    AF,
    EF,
    AG,
    EG,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::True => "`true`".into(),
            Tok::False => "`false`".into(),
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Not => "`!`".into(),
            Tok::And => "`&`".into(),
            Tok::Or => "`|`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::A => "`A`".into(),
            Tok::E => "`E`".into(),
            Tok::U => "`U`".into(),
            Tok::Unary(op) => format!("`{op:?}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

const FORMULA_START: &[&str] =
    &["true", "false", "identifier", "(", "!", "AX", "EX", "AF", "EF", "AG", "EG", "A [", "E ["];

fn tokenize(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        let single = |t: Tok| (t, SourceSpan::new(start, start + 1));
        match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '!' => toks.push(single(Tok::Not)),
            '&' => toks.push(single(Tok::And)),
            '|' => toks.push(single(Tok::Or)),
            '(' => toks.push(single(Tok::LParen)),
            ')' => toks.push(single(Tok::RParen)),
            '[' => toks.push(single(Tok::LBrack)),
            ']' => toks.push(single(Tok::RBrack)),
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    toks.push((Tok::Arrow, SourceSpan::new(i, i + 2)));
                    i += 2;
                    continue;
                }
                return Err(ParseError {
                    kind: ParseErrorKind::UnknownCharacter('-'),
                    span: SourceSpan::new(i, i + 1),
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let word: String = chars[i..j].iter().collect();
                let tok = match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "A" => Tok::A,
                    "E" => Tok::E,
                    "U" => Tok::U,
                    "AX" => Tok::Unary(UnaryOp::AX),
                    "EX" => Tok::Unary(UnaryOp::EX),
                    "AF" => Tok::Unary(UnaryOp::AF),
                    "EF" => Tok::Unary(UnaryOp::EF),
                    "AG" => Tok::Unary(UnaryOp::AG),
                    "EG" => Tok::Unary(UnaryOp::EG),
                    _ => Tok::Ident(word),
                };
                toks.push((tok, SourceSpan::new(i, j)));
                i = j;
                continue;
            }
            other => {
                return Err(ParseError {
                    kind: ParseErrorKind::UnknownCharacter(other),
                    span: SourceSpan::new(i, i + 1),
                })
            }
        }
        i += 1;
    }
    toks.push((Tok::Eof, SourceSpan::new(chars.len(), chars.len())));
    Ok(toks)
}

/// Returns true for names usable as atoms (not keywords).
pub fn is_valid_atom_name(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(name, "true" | "false" | "A" | "E" | "U" | "AX" | "EX" | "AF" | "EF" | "AG" | "EG")
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    // open brackets with their spans, innermost last
    open: Vec<(char, SourceSpan)>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if t.0 != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        let (tok, span) = &self.toks[self.pos];
        match tok {
            Tok::Eof if !self.open.is_empty() => {
                let (c, span) = *self.open.last().unwrap();
                ParseError { kind: ParseErrorKind::UnbalancedBracket(c), span }
            }
            Tok::RParen | Tok::RBrack if self.open.is_empty() => ParseError {
                kind: ParseErrorKind::UnbalancedBracket(if *tok == Tok::RParen { ')' } else { ']' }),
                span: *span,
            },
            _ => ParseError {
                kind: ParseErrorKind::Syntax { found: tok.describe(), expected: expected.to_vec() },
                span: *span,
            },
        }
    }

    fn expect(&mut self, want: Tok, label: &'static str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[label]))
        }
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(lhs.implies(rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = lhs.or(self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = lhs.and(self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(self.unary()?.not())
            }
            Tok::Unary(op) => {
                self.bump();
                let f = self.unary()?;
                Ok(match op {
                    UnaryOp::AX => f.ax(),
                    UnaryOp::EX => f.ex(),
                    UnaryOp::AF => f.af(),
                    UnaryOp::EF => f.ef(),
                    UnaryOp::AG => f.ag(),
                    UnaryOp::EG => f.eg(),
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::True => {
                self.bump();
                Ok(Formula::Top)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::Bottom)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Atom(name))
            }
            Tok::LParen => {
                let (_, span) = self.bump();
                self.open.push(('(', span));
                let f = self.implies()?;
                self.expect(Tok::RParen, ")")?;
                self.open.pop();
                Ok(f)
            }
            Tok::A | Tok::E => {
                let (quant, _) = self.bump();
                let span = self.span();
                self.expect(Tok::LBrack, "[")?;
                self.open.push(('[', span));
                let lhs = self.implies()?;
                self.expect(Tok::U, "U")?;
                let rhs = self.implies()?;
                self.expect(Tok::RBrack, "]")?;
                self.open.pop();
                Ok(if quant == Tok::A { lhs.au(rhs) } else { lhs.eu(rhs) })
            }
            _ => Err(self.unexpected(FORMULA_START)),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, open: Vec::new() };
    let f = p.implies()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected(&["&", "|", "->", "end of input"]));
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

// binding strength used by the printer; higher binds tighter
const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_UNARY: u8 = 4;

fn write_prec(f: &Formula, min: u8, out: &mut String) {
    use Formula::*;
    let (prec, op, lhs, rhs, lmin, rmin) = match f {
        Bottom => return out.push_str("false"),
        Top => return out.push_str("true"),
        Atom(name) => return out.push_str(name),
        Not(g) => {
            out.push('!');
            return write_prec(g, PREC_UNARY, out);
        }
        AX(g) | EX(g) | AF(g) | EF(g) | AG(g) | EG(g) => {
            let kw = match f {
                AX(_) => "AX",
                EX(_) => "EX",
                AF(_) => "AF",
                EF(_) => "EF",
                AG(_) => "AG",
                _ => "EG",
            };
            out.push_str(kw);
            out.push_str(" (");
            write_prec(g, 0, out);
            out.push(')');
            return;
        }
        AU(g, h) | EU(g, h) => {
            out.push_str(if matches!(f, AU(..)) { "A [ " } else { "E [ " });
            write_prec(g, 0, out);
            out.push_str(" U ");
            write_prec(h, 0, out);
            out.push_str(" ]");
            return;
        }
        And(g, h) => (PREC_AND, " & ", g, h, PREC_AND, PREC_AND + 1),
        Or(g, h) => (PREC_OR, " | ", g, h, PREC_OR, PREC_OR + 1),
        Implies(g, h) => (PREC_IMPLIES, " -> ", g, h, PREC_IMPLIES + 1, PREC_IMPLIES),
    };
    let wrap = prec < min;
    if wrap {
        out.push('(');
    }
    write_prec(lhs, lmin, out);
    out.push_str(op);
    write_prec(rhs, rmin, out);
    if wrap {
        out.push(')');
    }
}

/// Renders `f` in the concrete syntax accepted by [`parse_formula`].
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_prec(f, 0, &mut out);
    out
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_formula(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> Formula {
        Formula::atom(name)
    }

    #[test]
    fn parses_heading_invariant() {
        let f = parse_formula("AG (heading_90 | heading_270)").unwrap();
        assert_eq!(f, p("heading_90").or(p("heading_270")).ag());
    }

    #[test]
    fn literals() {
        assert_eq!(parse_formula("true").unwrap(), Formula::Top);
        assert_eq!(parse_formula("false").unwrap(), Formula::Bottom);
    }

    #[test]
    fn implication_is_right_associative() {
        let f = parse_formula("p -> q -> r").unwrap();
        assert_eq!(f, p("p").implies(p("q").implies(p("r"))));
    }

    #[test]
    fn precedence_table() {
        let f = parse_formula("!p & q | r -> s").unwrap();
        assert_eq!(f, p("p").not().and(p("q")).or(p("r")).implies(p("s")));
        let f = parse_formula("AG p & q").unwrap();
        assert_eq!(f, p("p").ag().and(p("q")));
        let f = parse_formula("a & b & c").unwrap();
        assert_eq!(f, p("a").and(p("b")).and(p("c")));
    }

    #[test]
    fn until_forms() {
        let f = parse_formula("E [ true U q ]").unwrap();
        assert_eq!(f, Formula::Top.eu(p("q")));
        let f = parse_formula("A[p U q -> r]").unwrap();
        assert_eq!(f, p("p").au(p("q").implies(p("r"))));
    }

    #[test]
    fn missing_until_rhs_points_at_bracket() {
        let err = parse_formula("A [ p U ]").unwrap_err();
        assert_eq!(err.span, SourceSpan { start: 8, end: 9 });
        match err.kind {
            ParseErrorKind::Syntax { expected, .. } => assert!(expected.contains(&"identifier")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_character() {
        let err = parse_formula("p $ q").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownCharacter('$'));
        assert_eq!(err.span, SourceSpan { start: 2, end: 3 });
    }

    #[test]
    fn unbalanced_brackets() {
        let err = parse_formula("(p & q").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedBracket('('));
        assert_eq!(err.span.start, 0);
        let err = parse_formula("p)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnbalancedBracket(')'));
        assert_eq!(err.span.start, 1);
    }

    #[test]
    fn printing() {
        assert_eq!(print_formula(&p("p").ag()), "AG (p)");
        assert_eq!(print_formula(&Formula::Top.eu(p("q"))), "E [ true U q ]");
        assert_eq!(print_formula(&p("c").not().ag()), "AG (!c)");
        let f = p("a").and(p("b").not()).and(p("c")).implies(p("d"));
        assert_eq!(print_formula(&f), "a & !b & c -> d");
        let f = p("a").implies(p("b")).implies(p("c"));
        assert_eq!(print_formula(&f), "(a -> b) -> c");
        assert_eq!(parse_formula(&print_formula(&f)).unwrap(), f);
    }

    #[test]
    fn enf_dualities() {
        assert_eq!(to_existential_normal_form(&p("p").ax()), p("p").not().ex().not());
        assert_eq!(to_existential_normal_form(&p("p").ag()), Formula::Top.eu(p("p").not()).not());
        let f = p("a").au(p("b")).or(p("c").af()).implies(p("d").ef());
        assert!(to_existential_normal_form(&f).is_existential_normal_form());
    }

    #[test]
    fn atom_names() {
        assert!(is_valid_atom_name("threat_in_cell1"));
        assert!(is_valid_atom_name("_x"));
        assert!(!is_valid_atom_name("1x"));
        assert!(!is_valid_atom_name("AG"));
        assert!(!is_valid_atom_name(""));
    }
}
