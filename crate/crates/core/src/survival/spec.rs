use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SurvivalError;

/// A single model term: a predictor column or the product of two.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Main(String),
    Interaction(String, String),
}

impl Term {
    pub fn name(&self) -> String {
        match self {
            Term::Main(n) => n.clone(),
            Term::Interaction(a, b) => format!("{a}:{b}"),
        }
    }

    /// Parses `a` or `a:b`.
    pub fn parse(s: &str) -> Result<Term, SurvivalError> {
        let s = s.trim();
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        match parts.as_slice() {
            [a] if !a.is_empty() => Ok(Term::Main(a.to_string())),
            [a, b] if !a.is_empty() && !b.is_empty() => {
                Ok(Term::Interaction(a.to_string(), b.to_string()))
            }
            _ => Err(SurvivalError::MalformedTerm(s.to_string())),
        }
    }

    // Interactions are symmetric, so `a:b` and `b:a` name the same column.
    fn canonical(&self) -> String {
        match self {
            Term::Main(n) => n.clone(),
            Term::Interaction(a, b) if a <= b => format!("{a}:{b}"),
            Term::Interaction(a, b) => format!("{b}:{a}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Ordered list of model terms.
///
/// Serialised as `{"terms": ["a", "b", "a:b"]}`; the form
/// `{"predictors": [...], "interactions": [["a", "b"]]}` is accepted on input.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecOut")]
pub struct ModelSpec {
    terms: Vec<Term>,
}

impl ModelSpec {
    /// Main effects first, then the interaction products in the given order.
    pub fn new<S: AsRef<str>>(
        predictors: &[S],
        interactions: &[(S, S)],
    ) -> Result<Self, SurvivalError> {
        let mut terms: Vec<Term> =
            predictors.iter().map(|p| Term::Main(p.as_ref().to_string())).collect();
        terms.extend(
            interactions
                .iter()
                .map(|(a, b)| Term::Interaction(a.as_ref().to_string(), b.as_ref().to_string())),
        );
        Self::from_terms(terms)
    }

    pub fn from_terms(terms: Vec<Term>) -> Result<Self, SurvivalError> {
        let mut seen = HashSet::new();
        for t in &terms {
            if let Term::Main(n) = t {
                if n.contains(':') || n.trim().is_empty() {
                    return Err(SurvivalError::MalformedTerm(n.clone()));
                }
            }
            if !seen.insert(t.canonical()) {
                return Err(SurvivalError::DuplicateTerm(t.name()));
            }
        }
        Ok(ModelSpec { terms })
    }

    pub fn parse_terms<S: AsRef<str>>(terms: &[S]) -> Result<Self, SurvivalError> {
        let terms = terms.iter().map(|t| Term::parse(t.as_ref())).collect::<Result<_, _>>()?;
        Self::from_terms(terms)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(Term::name).collect()
    }

    /// Number of estimated coefficients.
    pub fn k(&self) -> usize {
        self.terms.len()
    }

    pub fn predictors(&self) -> Vec<&str> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Main(n) => Some(n.as_str()),
                Term::Interaction(..) => None,
            })
            .collect()
    }

    pub fn interactions(&self) -> Vec<(&str, &str)> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Interaction(a, b) => Some((a.as_str(), b.as_str())),
                Term::Main(_) => None,
            })
            .collect()
    }

    /// Every raw column the spec needs, in first-use order.
    pub fn base_columns(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut push = |n: &str| {
            if !out.iter().any(|o| o == n) {
                out.push(n.to_string());
            }
        };
        for t in &self.terms {
            match t {
                Term::Main(n) => push(n),
                Term::Interaction(a, b) => {
                    push(a);
                    push(b);
                }
            }
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Terms {
        terms: Vec<String>,
    },
    Split {
        predictors: Vec<String>,
        #[serde(default)]
        interactions: Vec<(String, String)>,
    },
}

#[derive(Serialize)]
struct SpecOut {
    terms: Vec<String>,
}

impl TryFrom<SpecRepr> for ModelSpec {
    type Error = SurvivalError;

    fn try_from(r: SpecRepr) -> Result<Self, Self::Error> {
        match r {
            SpecRepr::Terms { terms } => ModelSpec::parse_terms(&terms),
            SpecRepr::Split { predictors, interactions } => {
                ModelSpec::new(&predictors, &interactions)
            }
        }
    }
}

impl From<ModelSpec> for SpecOut {
    fn from(s: ModelSpec) -> Self {
        SpecOut { terms: s.term_names() }
    }
}
