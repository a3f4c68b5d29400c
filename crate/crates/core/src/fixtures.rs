//! Fixture dimensions, use case and rule set shipped in `fixtures/`.
//!
//! The SES facet names follow the published SESMag mapping; their scales and
//! descriptions, the age dimension, the use case and the rules are
//! repo-invented.

use crate::facet::Dimension;
use crate::rules::{dsl::parse_rules_with_id, RuleSet};
use crate::usecase::UseCase;

pub const GENDER_DIM: &str = include_str!("../../../fixtures/gender.dim.json");
pub const SES_DIM: &str = include_str!("../../../fixtures/ses.dim.json");
pub const AGE_DIM: &str = include_str!("../../../fixtures/age.dim.json");
pub const CHECKOUT_USE_CASE: &str = include_str!("../../../fixtures/checkout.usecase.json");
pub const BASE_RULES: &str = include_str!("../../../fixtures/base.rules");

pub fn gender() -> Dimension {
    serde_json::from_str(GENDER_DIM).expect("gender fixture")
}

pub fn ses() -> Dimension {
    serde_json::from_str(SES_DIM).expect("ses fixture")
}

pub fn age() -> Dimension {
    serde_json::from_str(AGE_DIM).expect("age fixture")
}

pub fn checkout() -> UseCase {
    serde_json::from_str(CHECKOUT_USE_CASE).expect("checkout fixture")
}

pub fn base_rules() -> RuleSet {
    parse_rules_with_id("base", BASE_RULES).expect("base rules fixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facet::join;

    #[test]
    fn fixture_sizes() {
        assert_eq!(gender().len(), 5);
        assert_eq!(ses().len(), 5);
        let shared: Vec<_> = gender().shared_ids(&ses()).into_iter().map(|f| f.to_string()).collect();
        assert_eq!(shared, ["attitude-toward-risk", "computer-self-efficacy"]);
        assert_eq!(join(&gender(), &ses()).unwrap().len(), 8);
        assert_eq!(checkout().len(), 4);
        assert!(!base_rules().is_empty());
    }
}
