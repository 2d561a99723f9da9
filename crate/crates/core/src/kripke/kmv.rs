//! `.kmv` text format.
//!
//! ```text
//! # comment
//! prop p q          # optional: registers propositions up front
//! state s0 p        # state id followed by the propositions true in it
//! state s1
//! init s0
//! edge s0 s1
//! edge s1 s1
//! ```
//!
//! The order of `state` lines defines state numbering. `init` and `edge`
//! lines may refer to states declared further down.

use std::fmt::Write;

use super::{ExplicitBuilder, ExplicitKripke, Kripke, KripkeError, StateId};
use crate::ctl::is_valid_atom_name;

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn check_ident(word: &str, line: usize) -> Result<(), KripkeError> {
    if is_valid_atom_name(word) {
        Ok(())
    } else {
        Err(KripkeError::Syntax { line, message: format!("`{word}` is not a valid identifier") })
    }
}

pub fn load_kmv(text: &str, allow_deadlock_selfloop: bool) -> Result<ExplicitKripke, KripkeError> {
    let mut b = ExplicitBuilder::new();
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, words)| !words.is_empty())
        .collect();

    for (line, words) in &lines {
        match words[0] {
            "prop" => {
                for p in &words[1..] {
                    check_ident(p, *line)?;
                    b.declare_prop(p);
                }
            }
            "state" => {
                let Some(id) = words.get(1) else {
                    return Err(KripkeError::Syntax { line: *line, message: "`state` needs an id".into() });
                };
                check_ident(id, *line)?;
                for p in &words[2..] {
                    check_ident(p, *line)?;
                }
                b.add_state(id, words[2..].iter().copied()).map_err(|e| match e {
                    KripkeError::DuplicateState { id, .. } => KripkeError::DuplicateState { line: *line, id },
                    other => other,
                })?;
            }
            "init" | "edge" => {}
            other => return Err(KripkeError::Syntax { line: *line, message: format!("unknown directive `{other}`") }),
        }
    }

    let resolve = |b: &ExplicitBuilder, id: &str, line: usize| {
        b.state(id).ok_or_else(|| KripkeError::UndeclaredState { line, id: id.to_string() })
    };
    for (line, words) in &lines {
        match words[0] {
            "init" => {
                if words.len() != 2 {
                    return Err(KripkeError::Syntax { line: *line, message: "`init` takes one state id".into() });
                }
                let s = resolve(&b, words[1], *line)?;
                b.add_initial(s);
            }
            "edge" => {
                if words.len() != 3 {
                    return Err(KripkeError::Syntax { line: *line, message: "`edge` takes two state ids".into() });
                }
                let from = resolve(&b, words[1], *line)?;
                let to = resolve(&b, words[2], *line)?;
                b.add_edge(from, to);
            }
            _ => {}
        }
    }
    b.build(allow_deadlock_selfloop)
}

pub fn save_kmv(model: &ExplicitKripke) -> String {
    let mut out = String::new();
    if !model.props().is_empty() {
        out.push_str("prop");
        for (_, name) in model.props().iter() {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');
    }
    for i in 0..model.state_count() {
        let s = StateId::new(i);
        out.push_str("state ");
        out.push_str(model.name(s));
        for p in model.label_names(s) {
            out.push(' ');
            out.push_str(&p);
        }
        out.push('\n');
    }
    for &s in model.initial_states() {
        writeln!(out, "init {}", model.name(s)).unwrap();
    }
    for i in 0..model.state_count() {
        let s = StateId::new(i);
        for &t in model.successor_slice(s) {
            writeln!(out, "edge {} {}", model.name(s), model.name(t)).unwrap();
        }
    }
    out
}
