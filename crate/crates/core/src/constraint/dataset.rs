//! Instruction-tuning records built from gold constraints.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::parse::{format_space_group_answer, format_wyckoff_answer};
use super::prompt::{candidate_wyckoff_letters, render_space_group_prompt, render_wyckoff_prompt, PromptTemplate};
use super::request::{Composition, ConstraintRequest};
use crate::error::ConstraintError;
use crate::property::PropertyTarget;
use crate::symmetry::SymmetryConstraint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

/// A structure's gold constraint with its properties.
#[derive(Debug, Clone)]
pub struct GoldExample {
    pub constraint: SymmetryConstraint,
    pub properties: Vec<PropertyTarget>,
}

impl GoldExample {
    /// Formula-mode request: elements in first-appearance order with counts
    /// reduced by their gcd.
    pub fn request(&self) -> Result<ConstraintRequest, ConstraintError> {
        let counts = self.constraint.element_counts();
        let mut order: Vec<String> = Vec::new();
        for a in &self.constraint.assignments {
            if !order.contains(&a.element) {
                order.push(a.element.clone());
            }
        }
        let g = counts.values().fold(0usize, |g, v| gcd(g, *v)).max(1);
        let formula = order.into_iter().map(|e| {
            let n = (counts[&e] / g) as u32;
            (e, n)
        });
        ConstraintRequest::new(Composition::Formula(formula.collect()), self.properties.clone())
    }

    /// The space-group record followed by the Wyckoff record.
    pub fn records(&self) -> Result<[InstructionRecord; 2], ConstraintError> {
        let req = self.request()?;
        let sg = self.constraint.space_group;
        let p1 = render_space_group_prompt(&req, &PromptTemplate::space_group())?;
        let p2 = render_wyckoff_prompt(&req, sg, &candidate_wyckoff_letters(sg), &PromptTemplate::wyckoff())?;
        Ok([
            InstructionRecord { instruction: p1.instruction, input: p1.input, output: format_space_group_answer(sg) },
            InstructionRecord {
                instruction: p2.instruction,
                input: p2.input,
                output: format_wyckoff_answer(&self.constraint),
            },
        ])
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Writes two JSONL records per example, in input order.
pub fn emit_instruction_dataset(examples: &[GoldExample], path: &Path) -> Result<usize, ConstraintError> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut n = 0;
    for ex in examples {
        for r in ex.records()? {
            serde_json::to_writer(&mut w, &r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            n += 1;
        }
    }
    w.flush()?;
    Ok(n)
}
