//! Two-stage constraint generation with per-stage retries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::backend::Backend;
use super::parse::{check_assignments, parse_space_group_response, parse_wyckoff_response};
use super::prompt::{
    candidate_wyckoff_letters, render_space_group_prompt, render_wyckoff_prompt, PromptMode, PromptTemplate,
};
use super::request::{Composition, ConstraintRequest};
use crate::error::ConstraintError;
use crate::par::derive_seed;
use crate::symmetry::{SiteAssignment, SpaceGroupId, SymmetryConstraint, WyckoffTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Re-asks per stage after a response fails to parse or validate.
    pub max_retries: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { max_retries: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub stage: PromptMode,
    pub prompt: String,
    pub response: String,
    /// Parse or validation failure, if any.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResult {
    pub space_group: SpaceGroupId,
    pub assignments: Vec<SiteAssignment>,
    /// Per-element multiplicity sums reduced by their gcd; set for
    /// element-only requests.
    pub ratio: Option<BTreeMap<String, u64>>,
    pub raw_responses: Vec<Transcript>,
}

impl ConstraintResult {
    pub fn constraint(&self) -> Result<SymmetryConstraint, ConstraintError> {
        Ok(SymmetryConstraint::new(self.space_group, self.assignments.clone())?)
    }

    /// Re-checks letters against the candidates and ratio consistency.
    pub fn validate(&self) -> Result<(), ConstraintError> {
        let cands = candidate_wyckoff_letters(self.space_group);
        if let Some(a) = self.assignments.iter().find(|a| !cands.contains(&a.letter)) {
            return Err(ConstraintError::Parse(format!("letter {} is not a candidate", a.letter)));
        }
        if let Some(ratio) = &self.ratio {
            let counts = element_counts(self.space_group, &self.assignments)?;
            if reduce(&counts) != *ratio {
                return Err(ConstraintError::Parse("ratio does not match assigned multiplicities".into()));
            }
        }
        Ok(())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn reduce(counts: &BTreeMap<String, u64>) -> BTreeMap<String, u64> {
    let g = counts.values().fold(0, |g, v| gcd(g, *v)).max(1);
    counts.iter().map(|(k, v)| (k.clone(), v / g)).collect()
}

fn element_counts(sg: SpaceGroupId, assignments: &[SiteAssignment]) -> Result<BTreeMap<String, u64>, ConstraintError> {
    let table = WyckoffTable::global();
    let mut m = BTreeMap::new();
    for a in assignments {
        *m.entry(a.element.clone()).or_insert(0) += table.position(sg, a.letter)?.multiplicity as u64;
    }
    Ok(m)
}

/// Ratio of assigned multiplicities per element, reduced by their gcd.
pub fn composition_ratio(
    sg: SpaceGroupId,
    assignments: &[SiteAssignment],
) -> Result<BTreeMap<String, u64>, ConstraintError> {
    Ok(reduce(&element_counts(sg, assignments)?))
}

fn check_formula(
    sg: SpaceGroupId,
    assignments: &[SiteAssignment],
    formula: &[(String, u32)],
) -> Result<(), ConstraintError> {
    let counts = element_counts(sg, assignments)?;
    let want: BTreeMap<String, u64> = formula.iter().map(|(e, n)| (e.clone(), *n as u64)).collect();
    if reduce(&counts) != reduce(&want) {
        return Err(ConstraintError::Parse(format!("assigned counts {counts:?} are not proportional to the formula")));
    }
    Ok(())
}

fn run_stage<T>(
    backend: &dyn Backend,
    stage: PromptMode,
    prompt: &str,
    config: &GenerationConfig,
    transcripts: &mut Vec<Transcript>,
    parse: impl Fn(&str) -> Result<T, ConstraintError>,
) -> Result<T, ConstraintError> {
    let attempts = config.max_retries + 1;
    let mut last = String::new();
    for attempt in 0..attempts {
        let seed = derive_seed(config.seed, &format!("{stage:?}/{attempt}"));
        let response = backend.complete(prompt, if attempt == 0 { config.seed } else { seed })?;
        match parse(&response) {
            Ok(v) => {
                transcripts.push(Transcript { stage, prompt: prompt.to_string(), response, error: None });
                return Ok(v);
            }
            Err(e) => {
                log::debug!("{stage:?} attempt {attempt}: {e}");
                transcripts.push(Transcript {
                    stage,
                    prompt: prompt.to_string(),
                    response: response.clone(),
                    error: Some(e.to_string()),
                });
                last = response;
            }
        }
    }
    Err(ConstraintError::Generation { attempts, last_response: last })
}

/// Space-group stage, then Wyckoff stage on the chosen group.
pub fn generate_constraints(
    req: &ConstraintRequest,
    backend: &dyn Backend,
    config: &GenerationConfig,
) -> Result<ConstraintResult, ConstraintError> {
    req.validate()?;
    let mut transcripts = Vec::new();
    let sg_prompt = render_space_group_prompt(req, &PromptTemplate::space_group())?.text();
    let sg =
        run_stage(backend, PromptMode::SpaceGroup, &sg_prompt, config, &mut transcripts, parse_space_group_response)?;
    let candidates = candidate_wyckoff_letters(sg);
    let wy_prompt = render_wyckoff_prompt(req, sg, &candidates, &PromptTemplate::wyckoff())?.text();
    let elements = req.composition.elements();
    let assignments = run_stage(backend, PromptMode::Wyckoff, &wy_prompt, config, &mut transcripts, |text| {
        let a = parse_wyckoff_response(text, &elements, sg, &candidates)?;
        check_assignments(sg, &a, &elements)?;
        if let Composition::Formula(f) = &req.composition {
            check_formula(sg, &a, f)?;
        }
        Ok(a)
    })?;
    let ratio = match req.composition {
        Composition::Elements(_) => Some(composition_ratio(sg, &assignments)?),
        Composition::Formula(_) => None,
    };
    let result = ConstraintResult { space_group: sg, assignments, ratio, raw_responses: transcripts };
    result.validate()?;
    Ok(result)
}
