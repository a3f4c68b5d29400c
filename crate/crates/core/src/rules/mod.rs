//! Rule-based issue spotting.
//!
//! A [`RuleSet`] is a deterministic stand-in for a human walking through a
//! state while wearing one facet extreme as a lens: each [`Rule`] names a
//! facet, a side, and a condition over state attributes.

pub mod cond;
pub mod dsl;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use cond::{CmpOp, Condition, Literal};
pub use dsl::ParseError;

use crate::facet::{Extreme, FacetId, FacetType, FacetValue, Side};
use crate::issue::{Issue, IssueSet, Provenance, Severity};
use crate::usecase::State;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RulesError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("{line}:{column}: rule code `{code}` is already defined")]
    DuplicateRuleCode {
        code: String,
        line: usize,
        column: usize,
    },
    #[error("facet value `{facet}` at level {level} is not an extreme")]
    InteriorValue { facet: String, level: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub code: String,
    pub facet_id: FacetId,
    pub side: Side,
    pub condition: Condition,
    /// Message template; `{state}` expands to the state label.
    pub message: String,
    /// Issue code reported when the rule fires. Defaults to the rule code,
    /// letting several rules report one underlying problem.
    pub issue_code: Option<String>,
    pub severity: Option<Severity>,
}

impl Rule {
    pub fn issue_code(&self) -> &str {
        self.issue_code.as_deref().unwrap_or(&self.code)
    }

    pub fn fires(&self, state: &State) -> bool {
        self.condition.eval(state)
    }

    fn issue_at(&self, state: &State) -> Issue {
        Issue {
            code: self.issue_code().to_owned(),
            state_id: state.id.clone(),
            message: self.message.replace("{state}", &state.label),
            provenance: BTreeSet::from([Provenance::new(self.facet_id.clone(), self.side)]),
            severity: self.severity,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    id: String,
    rules: Vec<Rule>,
    by_lens: BTreeMap<(FacetId, Side), Vec<usize>>,
}

impl RuleSet {
    pub fn new(id: impl Into<String>, rules: Vec<Rule>) -> Result<Self, RulesError> {
        let mut seen = BTreeSet::new();
        let mut by_lens: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            if !seen.insert(r.code.as_str()) {
                return Err(RulesError::DuplicateRuleCode {
                    code: r.code.clone(),
                    line: 0,
                    column: 0,
                });
            }
            by_lens
                .entry((r.facet_id.clone(), r.side))
                .or_default()
                .push(i);
        }
        Ok(Self {
            id: id.into(),
            rules,
            by_lens,
        })
    }

    pub fn empty(id: impl Into<String>) -> Self {
        Self::new(id, Vec::new()).expect("no rules, no duplicates")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules that apply to one facet extreme.
    pub fn rules_for<'a>(&'a self, facet: &FacetId, side: Side) -> impl Iterator<Item = &'a Rule> + 'a {
        self.by_lens
            .get(&(facet.clone(), side))
            .into_iter()
            .flatten()
            .map(move |&i| &self.rules[i])
    }
}

/// Parses rules text. The resulting set has id `rules`; loaders rename it.
pub fn parse_rules(text: &str) -> Result<RuleSet, RulesError> {
    dsl::parse_rules_with_id("rules", text)
}

/// Something that can spot issues for one facet extreme in one state.
///
/// Implementations must be pure: equal inputs give equal outputs.
pub trait Spotter: Sync {
    fn spot_side(&self, facet: &FacetId, side: Side, state: &State) -> IssueSet;

    /// Identifies the spotter in result provenance, e.g. `rules:base`.
    fn source(&self) -> String;
}

impl Spotter for RuleSet {
    fn spot_side(&self, facet: &FacetId, side: Side, state: &State) -> IssueSet {
        self.rules_for(facet, side)
            .filter(|r| r.fires(state))
            .map(|r| r.issue_at(state))
            .collect()
    }

    fn source(&self) -> String {
        format!("rules:{}", self.id)
    }
}

/// Issues spotted through one extreme facet value in one state.
pub fn spot(value: &FacetValue, state: &State, rules: &impl Spotter) -> Result<IssueSet, RulesError> {
    let side = match value.extreme {
        Extreme::Min => Side::Min,
        Extreme::Max => Side::Max,
        Extreme::Interior => {
            return Err(RulesError::InteriorValue {
                facet: value.facet_id.to_string(),
                level: value.level_index,
            })
        }
    };
    Ok(rules.spot_side(&value.facet_id, side, state))
}

/// Union of [`spot`] over both extremes of a facet.
pub fn spot_bar(facet: &FacetType, state: &State, rules: &impl Spotter) -> IssueSet {
    let lo = rules.spot_side(facet.id(), Side::Min, state);
    let hi = rules.spot_side(facet.id(), Side::Max, state);
    lo.union(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facet::FacetType;

    const RULES: &str = r#"
rule no-progress-low-se: facet computer-self-efficacy MIN when not has(progress_indicator) => "No feedback; low self-efficacy users may abandon"
rule lo: facet f MIN when has(a) => "lo"
rule hi: facet f MAX when has(a) => "hi at {state}"
rule both-lo: facet g MIN when has(a) => "both" issue both
rule both-hi: facet g MAX when has(a) => "both" issue both
"#;

    fn cse() -> FacetType {
        FacetType::new("computer-self-efficacy", "CSE", vec!["low".into(), "high".into()]).unwrap()
    }

    #[test]
    fn spot_matches_rule() {
        let rs = parse_rules(RULES).unwrap();
        let bare = State::new("s1", "S1");
        let v = cse().extreme_value(Side::Min);
        let found = spot(&v, &bare, &rs).unwrap();
        assert_eq!(found.len(), 1);
        let issue = found.get("no-progress-low-se", "s1").unwrap();
        assert_eq!(
            issue.provenance,
            BTreeSet::from([Provenance::new(v.facet_id.clone(), Side::Min)])
        );

        let with = State::new("s1", "S1").with("progress_indicator", true);
        assert!(spot(&v, &with, &rs).unwrap().is_empty());
        assert!(spot(&cse().extreme_value(Side::Max), &bare, &rs).unwrap().is_empty());
    }

    #[test]
    fn spot_rejects_interior() {
        let f = FacetType::new("f", "F", vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let rs = parse_rules(RULES).unwrap();
        let err = spot(&f.value(1).unwrap(), &State::new("s", "S"), &rs).unwrap_err();
        assert!(matches!(err, RulesError::InteriorValue { level: 1, .. }));
    }

    #[test]
    fn spot_bar_unions_sides() {
        let rs = parse_rules(RULES).unwrap();
        let s = State::new("s", "Checkout").with("a", true);
        let f = FacetType::new("f", "F", vec!["0".into(), "1".into()]).unwrap();
        let found = spot_bar(&f, &s, &rs);
        assert_eq!(found.len(), 2);
        assert_eq!(found.get("hi", "s").unwrap().message, "hi at Checkout");

        let g = FacetType::new("g", "G", vec!["0".into(), "1".into()]).unwrap();
        let found = spot_bar(&g, &s, &rs);
        assert_eq!(found.len(), 1);
        let prov = &found.get("both", "s").unwrap().provenance;
        assert_eq!(
            prov.iter().map(|p| p.side).collect::<Vec<_>>(),
            vec![Side::Min, Side::Max]
        );
    }

    #[test]
    fn unknown_facet_rules_never_fire() {
        let rs = parse_rules(RULES).unwrap();
        let other = FacetType::new("other", "O", vec!["0".into(), "1".into()]).unwrap();
        assert!(spot_bar(&other, &State::new("s", "S").with("a", true), &rs).is_empty());
    }
}
