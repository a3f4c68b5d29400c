//! Facet-type algebra and compositional issue evaluation.
//!
//! A [`Dimension`] is a set of facet types, each an ordered scale whose two
//! ends are the extremes a walkthrough examines. Issues are spotted per
//! facet extreme and per use-case state, by a rule set or by people
//! recording judgments in a [`Session`]. Because evaluation is a union over
//! facets, evaluating a joined dimension equals merging the evaluations of
//! its operands; [`verify_composition`] checks exactly that.

pub mod artifacts;
pub mod evaluator;
pub mod facet;
pub mod fixtures;
pub mod issue;
pub mod rules;
pub mod session;
pub mod store;
pub mod usecase;

#[cfg(feature = "testkit")]
pub mod testkit;

pub use evaluator::{
    evaluate, evaluate_sequential, merge_all, merge_results, sampling_baseline,
    verify_composition, BaselineReport, CellKey, CellStatus, CoverageMatrix, EvalError, EvalResult,
    SamplingWeights, VerificationReport,
};
#[cfg(feature = "parallel")]
pub use evaluator::{evaluate_parallel, sampling_baseline_parallel};
pub use facet::{
    join, join_all, partition, synthesize_personas, Dimension, Extreme, FacetError, FacetId, FacetType,
    FacetValue, Persona, Side,
};
pub use issue::{Issue, IssueKey, IssueSet, Provenance, Severity};
pub use rules::{parse_rules, spot, spot_bar, Rule, RuleSet, RulesError, Spotter};
pub use session::{merge_sessions, session_result, Judgment, Session, SessionError, SessionEvent};
pub use usecase::{AttrValue, State, UseCase};
