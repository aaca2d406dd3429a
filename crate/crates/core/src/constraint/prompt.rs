//! Prompt templates for the space-group and Wyckoff stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::request::{Composition, ConstraintRequest};
use crate::error::ConstraintError;
use crate::property::PropertyKind;
use crate::symmetry::{space_group_symbol, SpaceGroupId, WyckoffTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    SpaceGroup,
    Wyckoff,
}

/// Instruction and input texts with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub instruction: String,
    pub input: String,
    pub mode: PromptMode,
}

/// A rendered prompt, kept in its two parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub instruction: String,
    pub input: String,
}

impl RenderedPrompt {
    /// Single-message form sent to a backend.
    pub fn text(&self) -> String {
        format!("Instruction:\n{}\n\nInput:\n{}\n", self.instruction, self.input)
    }
}

impl PromptTemplate {
    pub fn space_group() -> Self {
        Self {
            mode: PromptMode::SpaceGroup,
            instruction: "You are an expert in crystallography. Based on the chemical composition and target \
                properties in the input, determine the most suitable space group for the material. Valid space \
                group types range from 0 to 230. Reply in the form \"space group: <number>\"."
                .into(),
            input: "{composition_label}: {composition}\nProperties: {properties}".into(),
        }
    }

    pub fn wyckoff() -> Self {
        Self {
            mode: PromptMode::Wyckoff,
            instruction: "You are an expert in crystallography. Based on the chemical composition, target \
                properties and space group in the input, choose the most suitable Wyckoff positions for the atoms, \
                using only the candidate Wyckoff letters. Reply with one token per occupied orbit in the form \
                Element[<multiplicity><letter>], separated by spaces."
                .into(),
            input: "{composition_label}: {composition}\nProperties: {properties}\nSpace group: {space_group} \
                ({space_group_symbol})\nCandidate Wyckoff letters: {candidates}"
                .into(),
        }
    }

    pub fn default_for(mode: PromptMode) -> Self {
        match mode {
            PromptMode::SpaceGroup => Self::space_group(),
            PromptMode::Wyckoff => Self::wyckoff(),
        }
    }

    pub fn render(&self, bindings: &BTreeMap<&str, String>) -> Result<RenderedPrompt, ConstraintError> {
        Ok(RenderedPrompt { instruction: fill(&self.instruction, bindings)?, input: fill(&self.input, bindings)? })
    }
}

fn fill(text: &str, bindings: &BTreeMap<&str, String>) -> Result<String, ConstraintError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| ConstraintError::Template(after.to_string()))?;
        let name = &after[..close];
        let is_name = name.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !is_name {
            // literal brace, as in the answer grammar
            out.push('{');
            rest = after;
            continue;
        }
        let value = bindings.get(name).ok_or_else(|| ConstraintError::Template(name.to_string()))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Three decimals, half away from zero, plus the kind's unit.
pub fn standardize_property(kind: PropertyKind, value: f64) -> Result<String, ConstraintError> {
    if !value.is_finite() {
        return Err(ConstraintError::InvalidInput(format!("{kind} value {value} is not finite")));
    }
    let scaled = (value * 1000.0).round() / 1000.0;
    let scaled = if scaled == 0.0 { 0.0 } else { scaled };
    Ok(format!("{scaled:.3} {}", kind.unit()))
}

fn properties_text(req: &ConstraintRequest) -> Result<String, ConstraintError> {
    if req.properties.is_empty() {
        return Ok("none".into());
    }
    let mut parts = Vec::new();
    for kind in PropertyKind::ALL {
        if let Some(v) = req.property(kind) {
            parts.push(format!("{} = {}", kind.label(), standardize_property(kind, v)?));
        }
    }
    Ok(parts.join("; "))
}

fn request_bindings(req: &ConstraintRequest) -> Result<BTreeMap<&'static str, String>, ConstraintError> {
    req.validate()?;
    let mut b = BTreeMap::new();
    let label = match req.composition {
        Composition::Elements(_) => "Elements",
        Composition::Formula(_) => "Formula",
    };
    b.insert("composition_label", label.to_string());
    b.insert("composition", req.composition.to_string());
    b.insert("properties", properties_text(req)?);
    Ok(b)
}

pub fn render_space_group_prompt(
    req: &ConstraintRequest,
    tpl: &PromptTemplate,
) -> Result<RenderedPrompt, ConstraintError> {
    tpl.render(&request_bindings(req)?)
}

/// Letters of `sg` in table order, general position last.
pub fn candidate_wyckoff_letters(sg: SpaceGroupId) -> Vec<char> {
    WyckoffTable::global().letters(sg)
}

pub fn render_wyckoff_prompt(
    req: &ConstraintRequest,
    sg: SpaceGroupId,
    candidates: &[char],
    tpl: &PromptTemplate,
) -> Result<RenderedPrompt, ConstraintError> {
    let mut b = request_bindings(req)?;
    let table = WyckoffTable::global();
    let mut listed = Vec::with_capacity(candidates.len());
    for c in candidates {
        let w = table.position(sg, *c)?;
        listed.push(format!("{} ({})", c, w.multiplicity));
    }
    b.insert("space_group", sg.index().to_string());
    b.insert("space_group_symbol", space_group_symbol(sg).to_string());
    b.insert("candidates", listed.join(", "));
    tpl.render(&b)
}
