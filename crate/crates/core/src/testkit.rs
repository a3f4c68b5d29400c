//! Random instance generators and brute-force oracles for tests and benches.
//!
//! The oracles here deliberately avoid the library's evaluation paths:
//! they walk every (facet, extreme, state, rule) combination directly and
//! evaluate conditions with their own interpreter.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::facet::{Dimension, FacetId, FacetType, Side};
use crate::issue::Severity;
use crate::rules::{CmpOp, Condition, Literal, Rule, RuleSet};
use crate::session::{JudgedIssue, Judgment};
use crate::usecase::{AttrValue, State, UseCase};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Size limits for generated instances.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_facets: usize,
    pub max_levels: usize,
    pub max_states: usize,
    pub max_rules: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_facets: 8,
            max_levels: 6,
            max_states: 6,
            max_rules: 30,
        }
    }
}

const BOOL_ATTRS: &[&str] = &["help", "undo", "progress", "icons", "account"];
const NUM_ATTRS: &[&str] = &["jargon", "timeout", "steps"];
const TEXT_ATTRS: &[&str] = &["default", "method"];
const TEXT_VALUES: &[&str] = &["card", "cash", "auto-renew", "none"];
// Mentioned by rules but never set on states.
const MISSING_ATTRS: &[&str] = &["ghost"];

/// A pool of facet types with fixed scales. Dimensions drawn from one pool
/// never conflict when joined.
pub fn facet_pool(rng: &mut impl Rng, size: usize, max_levels: usize) -> Vec<FacetType> {
    (0..size)
        .map(|i| {
            let levels = rng.random_range(2..=max_levels.max(2));
            let scale = (0..levels).map(|l| format!("l{l}")).collect();
            FacetType::new(format!("f{i:02}"), format!("Facet {i}"), scale).expect("generated facet")
        })
        .collect()
}

/// A dimension of 1..=`max_facets` facets drawn from `pool`.
pub fn dimension_from(rng: &mut impl Rng, id: &str, pool: &[FacetType], max_facets: usize) -> Dimension {
    let n = rng.random_range(1..=max_facets.min(pool.len()).max(1));
    let facets = pool.choose_multiple(rng, n).cloned().collect();
    Dimension::new(id, id, facets).expect("generated dimension")
}

pub fn random_use_case(rng: &mut impl Rng, max_states: usize) -> UseCase {
    let n = rng.random_range(1..=max_states.max(1));
    let states = (0..n)
        .map(|i| {
            let mut s = State::new(format!("s{i}"), format!("State {i}"));
            for a in BOOL_ATTRS {
                if rng.random_bool(0.7) {
                    s = s.with(*a, rng.random_bool(0.5));
                }
            }
            for a in NUM_ATTRS {
                if rng.random_bool(0.7) {
                    s = s.with(*a, rng.random_range(0..10i64));
                }
            }
            for a in TEXT_ATTRS {
                if rng.random_bool(0.6) {
                    s = s.with(*a, *TEXT_VALUES.choose(rng).unwrap());
                }
            }
            s
        })
        .collect();
    UseCase::new("uc", "Use case", states).expect("generated use case")
}

fn random_attr(rng: &mut impl Rng) -> &'static str {
    let all: Vec<&'static str> = BOOL_ATTRS
        .iter()
        .chain(NUM_ATTRS)
        .chain(TEXT_ATTRS)
        .chain(MISSING_ATTRS)
        .copied()
        .collect();
    all.choose(rng).unwrap()
}

fn random_literal(rng: &mut impl Rng) -> Literal {
    match rng.random_range(0..3) {
        0 => Literal::Bool(rng.random_bool(0.5)),
        1 => Literal::Number(rng.random_range(0..10) as f64),
        _ => Literal::Text((*TEXT_VALUES.choose(rng).unwrap()).to_owned()),
    }
}

pub fn random_condition(rng: &mut impl Rng, depth: u32) -> Condition {
    let leaf = depth == 0 || rng.random_bool(0.4);
    if leaf {
        if rng.random_bool(0.4) {
            Condition::has(random_attr(rng))
        } else {
            let op = *[CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]
                .choose(rng)
                .unwrap();
            Condition::cmp(random_attr(rng), op, random_literal(rng))
        }
    } else {
        match rng.random_range(0..3) {
            0 => random_condition(rng, depth - 1).and(random_condition(rng, depth - 1)),
            1 => random_condition(rng, depth - 1).or(random_condition(rng, depth - 1)),
            _ => random_condition(rng, depth - 1).not(),
        }
    }
}

/// Up to `max_rules` rules over facets of `pool`. Some rules share an
/// issue code so that one issue can carry several provenances.
pub fn random_rules(rng: &mut impl Rng, pool: &[FacetType], max_rules: usize) -> RuleSet {
    let n = rng.random_range(0..=max_rules);
    let rules = (0..n)
        .map(|i| {
            let facet = pool.choose(rng).unwrap().id().clone();
            let side = if rng.random_bool(0.5) { Side::Min } else { Side::Max };
            let issue_code = rng.random_bool(0.3).then(|| format!("shared-{}", rng.random_range(0..3)));
            let severity = [None, Some(Severity::Low), Some(Severity::High)].choose(rng).copied().flatten();
            Rule {
                code: format!("r{i:02}"),
                facet_id: facet,
                side,
                condition: random_condition(rng, 3),
                message: format!("rule {i} at {{state}}"),
                issue_code,
                severity,
            }
        })
        .collect();
    RuleSet::new("gen", rules).expect("unique generated codes")
}

/// Two dimensions sharing facets, a use case and a rule set.
#[derive(Debug, Clone)]
pub struct Instance {
    pub d1: Dimension,
    pub d2: Dimension,
    pub use_case: UseCase,
    pub rules: RuleSet,
}

pub fn random_instance(rng: &mut impl Rng, limits: Limits) -> Instance {
    let pool = facet_pool(rng, limits.max_facets + limits.max_facets / 2, limits.max_levels);
    let d1 = dimension_from(rng, "da", &pool, limits.max_facets);
    let mut d2 = dimension_from(rng, "db", &pool, limits.max_facets);
    // Force at least one shared facet most of the time.
    if rng.random_bool(0.8) && d1.shared_ids(&d2).is_empty() {
        let shared = d1.facets().next().unwrap().clone();
        let mut facets: Vec<FacetType> = d2.facets().cloned().collect();
        if facets.len() >= limits.max_facets {
            facets.pop();
        }
        facets.push(shared);
        d2 = Dimension::new("db", "db", facets).expect("generated dimension");
    }
    Instance {
        d1,
        d2,
        use_case: random_use_case(rng, limits.max_states),
        rules: random_rules(rng, &pool, limits.max_rules),
    }
}

/// Random assignment of every facet of `d` to one of `k` groups, using
/// each group at least once when `d` has at least `k` facets.
pub fn random_assignment(rng: &mut impl Rng, d: &Dimension, k: usize) -> BTreeMap<FacetId, String> {
    let mut ids: Vec<FacetId> = d.facet_ids().into_iter().collect();
    ids.shuffle(rng);
    ids.into_iter()
        .enumerate()
        .map(|(i, f)| {
            let g = if i < k { i } else { rng.random_range(0..k) };
            (f, format!("g{g}"))
        })
        .collect()
}

fn oracle_holds(cond: &Condition, state: &State) -> bool {
    match cond {
        Condition::And(a, b) => oracle_holds(a, state) && oracle_holds(b, state),
        Condition::Or(a, b) => oracle_holds(a, state) || oracle_holds(b, state),
        Condition::Not(c) => !oracle_holds(c, state),
        Condition::Has(attr) => state.attributes.contains_key(attr),
        Condition::Compare { attr, op, value } => {
            let Some(actual) = state.attributes.get(attr) else {
                return false;
            };
            match (actual, value) {
                (AttrValue::Number(a), Literal::Number(b)) => match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                },
                (AttrValue::Text(a), Literal::Text(b)) => match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    CmpOp::Lt => a < b,
                    CmpOp::Le => a <= b,
                    CmpOp::Gt => a > b,
                    CmpOp::Ge => a >= b,
                },
                (AttrValue::Bool(a), Literal::Bool(b)) => match op {
                    CmpOp::Eq => a == b,
                    CmpOp::Ne => a != b,
                    _ => false,
                },
                _ => false,
            }
        }
    }
}

/// Issue keys `(code, state)` with their `(facet, side)` provenance.
pub type OracleIssues = BTreeMap<(String, String), BTreeSet<(String, Side)>>;

/// Every issue any rule raises for any extreme of any facet of `dims`,
/// by exhaustive enumeration.
pub fn oracle_issues(dims: &[&Dimension], u: &UseCase, rules: &RuleSet) -> OracleIssues {
    let facets: BTreeSet<&str> = dims
        .iter()
        .flat_map(|d| d.facets().map(|f| f.id().as_str()))
        .collect();
    let mut out = OracleIssues::new();
    for facet in &facets {
        for side in [Side::Min, Side::Max] {
            for state in u.states() {
                for rule in rules.rules() {
                    if rule.facet_id.as_str() == *facet && rule.side == side && oracle_holds(&rule.condition, state) {
                        let code = rule.issue_code.clone().unwrap_or_else(|| rule.code.clone());
                        out.entry((code, state.id.clone()))
                            .or_default()
                            .insert((facet.to_string(), side));
                    }
                }
            }
        }
    }
    out
}

/// Projects a library issue set into the oracle's shape.
pub fn as_oracle(issues: &crate::issue::IssueSet) -> OracleIssues {
    issues
        .iter()
        .map(|i| {
            (
                (i.code.clone(), i.state_id.clone()),
                i.provenance.iter().map(|p| (p.facet.to_string(), p.side)).collect(),
            )
        })
        .collect()
}

/// Random judgments over the cells of `d` × `u`, with timestamps drawn
/// from a small range so that ties and out-of-order arrivals occur.
pub fn random_judgments(rng: &mut impl Rng, d: &Dimension, u: &UseCase, n: usize) -> Vec<Judgment> {
    let facets: Vec<&FacetType> = d.facets().collect();
    (0..n)
        .map(|_| {
            let facet = facets.choose(rng).unwrap();
            let state = u.states().choose(rng).unwrap();
            let side = if rng.random_bool(0.5) { Side::Min } else { Side::Max };
            let k = rng.random_range(0..3);
            let issues = (0..k)
                .map(|_| JudgedIssue {
                    code: format!("j{}", rng.random_range(0..4)),
                    message: "judged".into(),
                    severity: None,
                })
                .collect();
            Judgment {
                state_id: state.id.clone(),
                facet_id: facet.id().clone(),
                side,
                issues,
                author: ["ana", "bo", "cy"].choose(rng).unwrap().to_string(),
                timestamp: format!("2026-03-01T10:{:02}:00Z", rng.random_range(0..20)),
            }
        })
        .collect()
}
