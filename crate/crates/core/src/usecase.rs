//! Use cases as ordered lists of states, each an open bag of attributes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facet::is_canonical_id;

pub const USE_CASE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UseCaseError {
    #[error("identifier `{0}` is not canonical")]
    BadId(String),
    #[error("state id `{0}` appears more than once")]
    DuplicateState(String),
    #[error("state `{id}` has index {index} but sits at position {position}")]
    IndexMismatch {
        id: String,
        index: usize,
        position: usize,
    },
}

/// Attribute value of a state.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

// Integral numbers are written without a fraction so that hand-written
// documents stay canonical.
impl Serialize for AttrValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AttrValue::Bool(b) => s.serialize_bool(*b),
            AttrValue::Number(n) if n.fract() == 0.0 && n.abs() < 9.0e15 => s.serialize_i64(*n as i64),
            AttrValue::Number(n) => s.serialize_f64(*n),
            AttrValue::Text(t) => s.serialize_str(t),
        }
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Bool(b) => write!(f, "{b}"),
            AttrValue::Number(n) => write!(f, "{n}"),
            AttrValue::Text(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<bool> for AttrValue {
    fn from(v: bool) -> Self {
        AttrValue::Bool(v)
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Number(v)
    }
}

impl From<i64> for AttrValue {
    fn from(v: i64) -> Self {
        AttrValue::Number(v as f64)
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Text(v.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub id: String,
    pub index: usize,
    pub label: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttrValue>,
}

impl State {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            index: 0,
            label: label.into(),
            attributes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<AttrValue>) -> Self {
        self.attributes.insert(name.into(), value.into());
        self
    }

    pub fn attr(&self, name: &str) -> Option<&AttrValue> {
        self.attributes.get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct UseCaseDoc {
    format_version: u32,
    id: String,
    label: String,
    states: Vec<State>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UseCaseDoc", into = "UseCaseDoc")]
pub struct UseCase {
    id: String,
    label: String,
    states: Vec<State>,
}

impl UseCase {
    /// Builds a use case, assigning each state its position as index.
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        states: Vec<State>,
    ) -> Result<Self, UseCaseError> {
        let states = states
            .into_iter()
            .enumerate()
            .map(|(i, s)| State { index: i, ..s })
            .collect();
        Self::from_parts(id.into(), label.into(), states)
    }

    fn from_parts(id: String, label: String, states: Vec<State>) -> Result<Self, UseCaseError> {
        if !is_canonical_id(&id) {
            return Err(UseCaseError::BadId(id));
        }
        let mut seen = BTreeSet::new();
        for (position, s) in states.iter().enumerate() {
            if !is_canonical_id(&s.id) {
                return Err(UseCaseError::BadId(s.id.clone()));
            }
            if !seen.insert(s.id.as_str()) {
                return Err(UseCaseError::DuplicateState(s.id.clone()));
            }
            if s.index != position {
                return Err(UseCaseError::IndexMismatch {
                    id: s.id.clone(),
                    index: s.index,
                    position,
                });
            }
        }
        Ok(Self { id, label, states })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, id: &str) -> Option<&State> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn state_ids(&self) -> BTreeSet<String> {
        self.states.iter().map(|s| s.id.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }
}

impl TryFrom<UseCaseDoc> for UseCase {
    type Error = UseCaseError;

    fn try_from(doc: UseCaseDoc) -> Result<Self, Self::Error> {
        Self::from_parts(doc.id, doc.label, doc.states)
    }
}

impl From<UseCase> for UseCaseDoc {
    fn from(u: UseCase) -> Self {
        UseCaseDoc {
            format_version: USE_CASE_FORMAT_VERSION,
            id: u.id,
            label: u.label,
            states: u.states,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_follow_positions() {
        let u = UseCase::new("u", "U", vec![State::new("a", "A"), State::new("b", "B")]).unwrap();
        assert_eq!(u.states()[1].index, 1);
        let dup = UseCase::new("u", "U", vec![State::new("a", "A"), State::new("a", "B")]);
        assert_eq!(dup, Err(UseCaseError::DuplicateState("a".into())));
    }

    #[test]
    fn document_checks_index() {
        let text = r#"{"format_version":1,"id":"u","label":"U","states":[
            {"id":"a","index":1,"label":"A","attributes":{"x":true,"n":2,"s":"v"}}]}"#;
        assert!(serde_json::from_str::<UseCase>(text).is_err());
        let ok = text.replace("\"index\":1", "\"index\":0");
        let u: UseCase = serde_json::from_str(&ok).unwrap();
        let s = &u.states()[0];
        assert_eq!(s.attr("x"), Some(&AttrValue::Bool(true)));
        assert_eq!(s.attr("n"), Some(&AttrValue::Number(2.0)));
        assert_eq!(s.attr("s"), Some(&AttrValue::Text("v".into())));
    }
}
