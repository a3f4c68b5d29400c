//! Issues and issue sets with `(code, state_id)` identity.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::facet::{FacetId, Side};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Low,
    Medium,
    High,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Medium => "medium",
            Severity::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Severity> {
        match s {
            "low" => Some(Severity::Low),
            "medium" => Some(Severity::Medium),
            "high" => Some(Severity::High),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The facet extreme through which an issue was spotted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub facet: FacetId,
    pub side: Side,
}

impl Provenance {
    pub fn new(facet: FacetId, side: Side) -> Self {
        Self { facet, side }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IssueKey {
    pub code: String,
    pub state_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: String,
    pub state_id: String,
    pub message: String,
    pub provenance: BTreeSet<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
}

impl Issue {
    pub fn key(&self) -> IssueKey {
        IssueKey {
            code: self.code.clone(),
            state_id: self.state_id.clone(),
        }
    }

    /// Folds another observation of the same issue into this one. Provenance
    /// is unioned; the message and severity are chosen independently of
    /// argument order.
    fn absorb(&mut self, other: &Issue) {
        debug_assert_eq!(self.key(), other.key());
        self.provenance.extend(other.provenance.iter().cloned());
        if other.message < self.message {
            self.message.clone_from(&other.message);
        }
        self.severity = self.severity.max(other.severity);
    }
}

/// A set of issues under `(code, state_id)` identity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IssueSet {
    issues: BTreeMap<IssueKey, Issue>,
}

impl IssueSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, issue: Issue) {
        match self.issues.entry(issue.key()) {
            Entry::Vacant(v) => {
                v.insert(issue);
            }
            Entry::Occupied(mut o) => o.get_mut().absorb(&issue),
        }
    }

    pub fn extend_from(&mut self, other: &IssueSet) {
        for issue in other.issues.values() {
            self.insert(issue.clone());
        }
    }

    pub fn union(mut self, other: IssueSet) -> IssueSet {
        if self.issues.len() < other.issues.len() {
            let mut big = other;
            big.extend_from(&self);
            return big;
        }
        for issue in other.issues.into_values() {
            self.insert(issue);
        }
        self
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn get(&self, code: &str, state_id: &str) -> Option<&Issue> {
        self.issues.get(&IssueKey {
            code: code.to_owned(),
            state_id: state_id.to_owned(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Issue> {
        self.issues.values()
    }

    pub fn keys(&self) -> BTreeSet<IssueKey> {
        self.issues.keys().cloned().collect()
    }

    /// Identity-level equality, ignoring provenance, messages and severity.
    pub fn same_issues(&self, other: &IssueSet) -> bool {
        self.issues.len() == other.issues.len() && self.issues.keys().eq(other.issues.keys())
    }

    /// Identity-level subset test.
    pub fn is_subset(&self, other: &IssueSet) -> bool {
        self.issues.keys().all(|k| other.issues.contains_key(k))
    }

    /// Keys present here but not in `other`.
    pub fn difference(&self, other: &IssueSet) -> Vec<IssueKey> {
        self.issues
            .keys()
            .filter(|k| !other.issues.contains_key(k))
            .cloned()
            .collect()
    }
}

impl FromIterator<Issue> for IssueSet {
    fn from_iter<T: IntoIterator<Item = Issue>>(iter: T) -> Self {
        let mut set = IssueSet::new();
        for issue in iter {
            set.insert(issue);
        }
        set
    }
}

impl Extend<Issue> for IssueSet {
    fn extend<T: IntoIterator<Item = Issue>>(&mut self, iter: T) {
        for issue in iter {
            self.insert(issue);
        }
    }
}

impl Serialize for IssueSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.issues.values())
    }
}

impl<'de> Deserialize<'de> for IssueSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let issues = Vec::<Issue>::deserialize(deserializer)?;
        if let Some(bad) = issues.iter().find(|i| i.provenance.is_empty()) {
            return Err(serde::de::Error::custom(format!(
                "issue `{}` at `{}` has empty provenance",
                bad.code, bad.state_id
            )));
        }
        Ok(issues.into_iter().collect())
    }
}
