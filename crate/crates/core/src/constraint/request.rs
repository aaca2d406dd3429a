//! Composition and property requests.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::elements;
use crate::error::ConstraintError;
use crate::property::{PropertyKind, PropertyTarget};

/// Requested chemistry: either bare elements or a formula with counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    Elements(Vec<String>),
    Formula(Vec<(String, u32)>),
}

impl Composition {
    pub fn elements(&self) -> Vec<String> {
        match self {
            Composition::Elements(e) => e.clone(),
            Composition::Formula(f) => f.iter().map(|(e, _)| e.clone()).collect(),
        }
    }

    pub fn is_formula(&self) -> bool {
        matches!(self, Composition::Formula(_))
    }

    /// Parses formulas such as `TiO2`, `Ba3Si2O7` or `Li2(SO4)`.
    pub fn parse_formula(text: &str) -> Result<Self, ConstraintError> {
        let bad = |msg: &str| ConstraintError::InvalidRequest(format!("formula {text:?}: {msg}"));
        let chars: Vec<char> = text.trim().chars().collect();
        let mut stack: Vec<Vec<(String, u32)>> = vec![Vec::new()];
        let mut i = 0;
        let read_count = |i: &mut usize| -> Result<u32, ConstraintError> {
            let start = *i;
            while *i < chars.len() && chars[*i].is_ascii_digit() {
                *i += 1;
            }
            if start == *i {
                return Ok(1);
            }
            let s: String = chars[start..*i].iter().collect();
            match s.parse::<u32>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(bad("counts must be positive integers")),
            }
        };
        while i < chars.len() {
            let c = chars[i];
            if c.is_ascii_uppercase() {
                let mut sym = c.to_string();
                i += 1;
                if i < chars.len() && chars[i].is_ascii_lowercase() {
                    sym.push(chars[i]);
                    i += 1;
                }
                if !elements::is_element(&sym) {
                    return Err(bad(&format!("unknown element {sym}")));
                }
                let n = read_count(&mut i)?;
                stack.last_mut().unwrap().push((sym, n));
            } else if c == '(' {
                stack.push(Vec::new());
                i += 1;
            } else if c == ')' {
                i += 1;
                let n = read_count(&mut i)?;
                let group = stack.pop().filter(|_| !stack.is_empty()).ok_or_else(|| bad("unbalanced parentheses"))?;
                let top = stack.last_mut().ok_or_else(|| bad("unbalanced parentheses"))?;
                top.extend(group.into_iter().map(|(e, k)| (e, k * n)));
            } else if c.is_whitespace() {
                i += 1;
            } else {
                return Err(bad(&format!("unexpected character {c:?}")));
            }
        }
        if stack.len() != 1 {
            return Err(bad("unbalanced parentheses"));
        }
        let mut merged: Vec<(String, u32)> = Vec::new();
        for (e, n) in stack.pop().unwrap() {
            match merged.iter_mut().find(|(m, _)| *m == e) {
                Some((_, k)) => *k += n,
                None => merged.push((e, n)),
            }
        }
        if merged.is_empty() {
            return Err(bad("no elements"));
        }
        Ok(Composition::Formula(merged))
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Composition::Elements(e) => f.write_str(&e.join(", ")),
            Composition::Formula(items) => {
                for (e, n) in items {
                    if *n == 1 {
                        write!(f, "{e}")?;
                    } else {
                        write!(f, "{e}{n}")?;
                    }
                }
                Ok(())
            }
        }
    }
}

/// Composition plus at most one target value per property kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRequest {
    pub composition: Composition,
    pub properties: Vec<PropertyTarget>,
}

impl ConstraintRequest {
    pub fn new(composition: Composition, properties: Vec<PropertyTarget>) -> Result<Self, ConstraintError> {
        let r = Self { composition, properties };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ConstraintError> {
        let els = self.composition.elements();
        if els.is_empty() {
            return Err(ConstraintError::InvalidRequest("at least one element is required".into()));
        }
        let mut seen = BTreeSet::new();
        for e in &els {
            if !elements::is_element(e) {
                return Err(ConstraintError::InvalidRequest(format!("unknown element {e:?}")));
            }
            if !seen.insert(e) {
                return Err(ConstraintError::InvalidRequest(format!("element {e} listed twice")));
            }
        }
        if let Composition::Formula(f) = &self.composition {
            if f.iter().any(|(_, n)| *n == 0) {
                return Err(ConstraintError::InvalidRequest("formula counts must be positive".into()));
            }
        }
        let mut kinds = BTreeSet::new();
        for p in &self.properties {
            if !p.value.is_finite() {
                return Err(ConstraintError::InvalidRequest(format!("{} value is not finite", p.kind)));
            }
            if !kinds.insert(p.kind) {
                return Err(ConstraintError::InvalidRequest(format!("more than one {} value", p.kind)));
            }
        }
        Ok(())
    }

    pub fn property(&self, kind: PropertyKind) -> Option<f64> {
        self.properties.iter().find(|p| p.kind == kind).map(|p| p.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        assert_eq!(
            Composition::parse_formula("TiO2").unwrap(),
            Composition::Formula(vec![("Ti".into(), 1), ("O".into(), 2)])
        );
        assert_eq!(
            Composition::parse_formula("Ca3(PO4)2").unwrap(),
            Composition::Formula(vec![("Ca".into(), 3), ("P".into(), 2), ("O".into(), 8)])
        );
        assert_eq!(Composition::parse_formula("NaCl").unwrap().to_string(), "NaCl");
        assert!(Composition::parse_formula("Xx2").is_err());
        assert!(Composition::parse_formula("Na0Cl").is_err());
        assert!(Composition::parse_formula("(NaCl").is_err());
        assert!(Composition::parse_formula("").is_err());
    }

    #[test]
    fn request_validation() {
        let el = |v: &[&str]| Composition::Elements(v.iter().map(|s| s.to_string()).collect());
        assert!(ConstraintRequest::new(el(&[]), vec![]).is_err());
        assert!(ConstraintRequest::new(el(&["Na", "Na"]), vec![]).is_err());
        let bg = PropertyTarget::new(PropertyKind::BandGap, 1.0);
        assert!(ConstraintRequest::new(el(&["Na", "Cl"]), vec![bg, bg]).is_err());
        assert!(
            ConstraintRequest::new(el(&["Na"]), vec![PropertyTarget::new(PropertyKind::BandGap, f64::NAN)]).is_err()
        );
        assert!(ConstraintRequest::new(el(&["Na", "Cl"]), vec![bg]).is_ok());
    }
}
