use thiserror::Error;

use crate::ctl::{is_valid_atom_name, parse_formula, Formula, ParseError};

/// One property of a catalogue: `id: formula # expected`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogueEntry {
    pub id: String,
    pub formula: Formula,
    /// Expected verdict, when the catalogue states one.
    pub expected: Option<bool>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CatalogueError {
    #[error("line {line}: {source}")]
    Formula { line: usize, source: ParseError },
    #[error("line {line}: duplicate spec id `{id}`")]
    DuplicateId { line: usize, id: String },
}

/// The five mission properties; S3 expands to one formula per neighbour.
pub fn builtin_specs() -> Vec<CatalogueEntry> {
    let entry = |id: &str, text: &str, expected: bool| CatalogueEntry {
        id: id.to_string(),
        formula: parse_formula(text).expect("builtin spec parses"),
        expected: Some(expected),
    };
    let mut out = vec![
        entry(
            "S1",
            "AG (heading_90 & !threat_in_cell1 & !other_uav_selected_cell1 & !north_cell -> choice_cell1)",
            true,
        ),
        entry(
            "S2",
            "AG (heading_270 & !threat_in_cell1 & !other_uav_selected_cell1 & !south_cell -> choice_cell1)",
            true,
        ),
    ];
    for k in 1..=5 {
        out.push(entry(
            &format!("S3.{k}"),
            &format!("AG (threat_in_cell{k} | other_uav_selected_cell{k} -> !choice_cell{k})"),
            true,
        ));
    }
    out.push(entry("S4", "AG (heading_90 | heading_270)", true));
    out.push(entry("S5", "AG (!choice_no_free_cell)", false));
    out
}

pub(crate) fn parse_expected(comment: &str) -> Option<bool> {
    let words: Vec<String> = comment.split_whitespace().map(str::to_ascii_lowercase).collect();
    let value = match words.as_slice() {
        [v] => v,
        [k, v] if k == "expect" || k == "expected" => v,
        _ => return None,
    };
    match value.as_str() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

/// Parses a spec catalogue: one formula per line, optionally prefixed by
/// `id:` and followed by `# true` / `# false` (or `# expected false`).
/// Other `#` text is a comment. Lines without an id are numbered.
pub fn parse_catalogue(text: &str) -> Result<Vec<CatalogueEntry>, CatalogueError> {
    let mut out: Vec<CatalogueEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let (body, comment) = match raw.split_once('#') {
            Some((b, c)) => (b, Some(c)),
            None => (raw, None),
        };
        if body.trim().is_empty() {
            continue;
        }
        let (id, formula_text) = match body.split_once(':') {
            Some((id, rest)) if is_valid_atom_name(id.trim()) || id.trim().contains('.') => {
                (id.trim().to_string(), rest)
            }
            _ => ((out.len() + 1).to_string(), body),
        };
        let formula = parse_formula(formula_text).map_err(|source| CatalogueError::Formula { line, source })?;
        if out.iter().any(|e| e.id == id) {
            return Err(CatalogueError::DuplicateId { line, id });
        }
        out.push(CatalogueEntry { id, formula, expected: comment.and_then(parse_expected) });
    }
    Ok(out)
}
