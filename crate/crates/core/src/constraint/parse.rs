//! Answer grammar: `space group: <int>` and `El[<mult><letter>] ...`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::ConstraintError;
use crate::symmetry::{SiteAssignment, SpaceGroupId, SymmetryConstraint, WyckoffTable};

/// First integer in `1..=230` anywhere in the text.
pub fn parse_space_group_response(text: &str) -> Result<SpaceGroupId, ConstraintError> {
    static INT: OnceLock<Regex> = OnceLock::new();
    let re = INT.get_or_init(|| Regex::new(r"\d+").unwrap());
    let mut seen = Vec::new();
    for m in re.find_iter(text) {
        // digits glued to letters or decimals (e.g. "TiO2", "1.5") are not answers
        let before = text[..m.start()].chars().next_back();
        let after = text[m.end()..].chars().next();
        let decimal_before =
            before == Some('.') && text[..m.start() - 1].chars().next_back().is_some_and(|c| c.is_ascii_digit());
        let decimal_after =
            after == Some('.') && text[m.end() + 1..].chars().next().is_some_and(|c| c.is_ascii_digit());
        if before.is_some_and(char::is_alphanumeric)
            || after.is_some_and(char::is_alphanumeric)
            || decimal_before
            || decimal_after
        {
            continue;
        }
        if let Ok(n) = m.as_str().parse::<i64>() {
            if let Ok(sg) = SpaceGroupId::new(n) {
                return Ok(sg);
            }
            seen.push(n);
        }
    }
    if seen.is_empty() {
        Err(ConstraintError::Parse(format!("no space-group number in {text:?}")))
    } else {
        Err(ConstraintError::Parse(format!("space-group numbers {seen:?} outside 1..=230")))
    }
}

pub fn format_space_group_answer(sg: SpaceGroupId) -> String {
    format!("space group: {}", sg.index())
}

/// Parses `El[<mult><letter>]` tokens in order, checking the letter against
/// `candidates`, the multiplicity against the table and the element against
/// `elements`.
pub fn parse_wyckoff_response(
    text: &str,
    elements: &[String],
    sg: SpaceGroupId,
    candidates: &[char],
) -> Result<Vec<SiteAssignment>, ConstraintError> {
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    let re = TOKEN.get_or_init(|| Regex::new(r"([A-Z][a-z]?)\s*\[\s*(\d+)\s*([A-Za-z])\s*\]").unwrap());
    let table = WyckoffTable::global();
    let mut out = Vec::new();
    for cap in re.captures_iter(text) {
        let el = &cap[1];
        let mult: usize =
            cap[2].parse().map_err(|_| ConstraintError::Parse(format!("bad multiplicity in {}", &cap[0])))?;
        let letter = cap[3].chars().next().unwrap();
        if !elements.iter().any(|e| e == el) {
            return Err(ConstraintError::Parse(format!("element {el} is not in the request")));
        }
        if !candidates.contains(&letter) {
            return Err(ConstraintError::Parse(format!("letter {letter} is not a candidate for space group {sg}")));
        }
        let w = table.position(sg, letter)?;
        if w.multiplicity != mult {
            return Err(ConstraintError::Parse(format!(
                "{}: position {letter} of group {sg} has multiplicity {}, not {mult}",
                &cap[0], w.multiplicity
            )));
        }
        out.push(SiteAssignment::new(el, letter));
    }
    if out.is_empty() {
        return Err(ConstraintError::Parse(format!("no Wyckoff tokens in {text:?}")));
    }
    Ok(out)
}

pub fn format_wyckoff_answer(constraint: &SymmetryConstraint) -> String {
    let table = WyckoffTable::global();
    constraint
        .assignments
        .iter()
        .map(|a| {
            let m = table.position(constraint.space_group, a.letter).map(|w| w.multiplicity).unwrap_or(0);
            format!("{}[{}{}]", a.element, m, a.letter)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Checks that parameter-free letters are occupied at most once and that
/// every requested element appears.
pub fn check_assignments(
    sg: SpaceGroupId,
    assignments: &[SiteAssignment],
    elements: &[String],
) -> Result<(), ConstraintError> {
    let table = WyckoffTable::global();
    let mut fixed_used = BTreeMap::new();
    for a in assignments {
        let w = table.position(sg, a.letter)?;
        if w.is_fixed() {
            if let Some(prev) = fixed_used.insert(a.letter, &a.element) {
                return Err(ConstraintError::Parse(format!(
                    "fixed position {} occupied by both {prev} and {}",
                    a.letter, a.element
                )));
            }
        }
    }
    for e in elements {
        if !assignments.iter().any(|a| &a.element == e) {
            return Err(ConstraintError::Parse(format!("element {e} has no Wyckoff position")));
        }
    }
    Ok(())
}
