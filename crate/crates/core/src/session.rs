//! Live walkthrough sessions.
//!
//! A session is an event-sourced aggregate: every accepted mutation appends
//! one [`SessionEvent`] to its log, bumps the version by one, and
//! [`Session::replay`] rebuilds an identical aggregate from the log.
//! Mutations take the version the caller last saw and fail with
//! [`SessionError::VersionConflict`] if someone else got there first.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{merge_results, CellKey, CellStatus, CoverageMatrix, EvalError, EvalResult};
use crate::facet::{is_canonical_id, join_all, Dimension, FacetError, FacetId, Side};
use crate::issue::{Issue, IssueSet, Provenance, Severity};
use crate::rules::Spotter;
use crate::usecase::UseCase;

/// Subteam used when a session is created without explicit assignments.
pub const DEFAULT_SUBTEAM: &str = "all";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Facet(#[from] FacetError),
    #[error("facet `{facet}` is assigned to both `{first}` and `{second}`")]
    OverlappingAssignment {
        facet: String,
        first: String,
        second: String,
    },
    #[error("version conflict: expected {expected}, current is {current}")]
    VersionConflict { expected: u64, current: u64 },
    #[error("judgment is out of scope: {0}")]
    OutOfScope(String),
    #[error("session `{0}` is closed")]
    SessionClosed(String),
    #[error("invalid judgment: {0}")]
    InvalidJudgment(String),
    #[error("malformed session log: {0}")]
    MalformedLog(String),
    #[error("no sessions to merge")]
    NoSessions,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SessionStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgedIssue {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
}

/// One human application of `spot`. An empty `issues` list records that
/// the cell was considered and nothing was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub state_id: String,
    pub facet_id: FacetId,
    pub side: Side,
    #[serde(default)]
    pub issues: Vec<JudgedIssue>,
    pub author: String,
    /// RFC 3339 timestamp.
    pub timestamp: String,
}

impl Judgment {
    pub fn cell(&self) -> CellKey {
        CellKey {
            facet: self.facet_id.clone(),
            side: self.side,
            state: self.state_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        dimensions: Vec<Dimension>,
        use_case: UseCase,
        assignments: BTreeMap<String, BTreeSet<FacetId>>,
    },
    Judgment(Judgment),
    Closed {
        author: String,
        timestamp: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    dimensions: Vec<Dimension>,
    use_case: UseCase,
    assignments: BTreeMap<String, BTreeSet<FacetId>>,
    scope: BTreeSet<FacetId>,
    judgments: Vec<Judgment>,
    status: SessionStatus,
    version: u64,
    log: Vec<SessionEvent>,
}

fn parse_timestamp(ts: &str) -> Result<DateTime<FixedOffset>, SessionError> {
    DateTime::parse_from_rfc3339(ts)
        .map_err(|e| SessionError::InvalidJudgment(format!("timestamp `{ts}`: {e}")))
}

impl Session {
    /// Opens a session at version 1 with every cell pending.
    pub fn create(
        id: impl Into<String>,
        dims: &[Dimension],
        use_case: &UseCase,
        assignments: BTreeMap<String, BTreeSet<FacetId>>,
    ) -> Result<Self, SessionError> {
        let event = SessionEvent::Created {
            session_id: id.into(),
            dimensions: dims.to_vec(),
            use_case: use_case.clone(),
            assignments,
        };
        Self::from_created(event)
    }

    fn from_created(event: SessionEvent) -> Result<Self, SessionError> {
        let SessionEvent::Created {
            session_id,
            dimensions,
            use_case,
            assignments,
        } = &event
        else {
            return Err(SessionError::MalformedLog("log must start with `created`".into()));
        };
        if !is_canonical_id(session_id) {
            return Err(FacetError::BadId(session_id.clone()).into());
        }
        let joined = join_all(dimensions)?;
        let assignments = if assignments.is_empty() {
            BTreeMap::from([(DEFAULT_SUBTEAM.to_owned(), joined.facet_ids())])
        } else {
            assignments.clone()
        };
        let mut owner: BTreeMap<&FacetId, &str> = BTreeMap::new();
        for (team, facets) in &assignments {
            if !is_canonical_id(team) {
                return Err(FacetError::BadId(team.clone()).into());
            }
            for f in facets {
                if !joined.contains(f.as_str()) {
                    return Err(FacetError::UnknownFacet(f.to_string()).into());
                }
                if let Some(first) = owner.insert(f, team) {
                    return Err(SessionError::OverlappingAssignment {
                        facet: f.to_string(),
                        first: first.to_owned(),
                        second: team.clone(),
                    });
                }
            }
        }
        let scope = owner.keys().map(|f| (*f).clone()).collect();
        let mut log_event = event.clone();
        if let SessionEvent::Created { assignments: a, .. } = &mut log_event {
            a.clone_from(&assignments);
        }
        Ok(Self {
            id: session_id.clone(),
            dimensions: dimensions.clone(),
            use_case: use_case.clone(),
            assignments,
            scope,
            judgments: Vec::new(),
            status: SessionStatus::Open,
            version: 1,
            log: vec![log_event],
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn dimension_ids(&self) -> Vec<&str> {
        self.dimensions.iter().map(Dimension::id).collect()
    }

    pub fn use_case(&self) -> &UseCase {
        &self.use_case
    }

    pub fn assignments(&self) -> &BTreeMap<String, BTreeSet<FacetId>> {
        &self.assignments
    }

    /// Facet ids some subteam is responsible for.
    pub fn scope(&self) -> &BTreeSet<FacetId> {
        &self.scope
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    /// Every event accepted so far, oldest first.
    pub fn events(&self) -> &[SessionEvent] {
        &self.log
    }

    fn check_writable(&self, expected_version: u64) -> Result<(), SessionError> {
        if self.status == SessionStatus::Closed {
            return Err(SessionError::SessionClosed(self.id.clone()));
        }
        if expected_version != self.version {
            return Err(SessionError::VersionConflict {
                expected: expected_version,
                current: self.version,
            });
        }
        Ok(())
    }

    fn validate(&self, j: &Judgment) -> Result<(), SessionError> {
        if self.use_case.state(&j.state_id).is_none() {
            return Err(SessionError::OutOfScope(format!(
                "state `{}` is not in use case `{}`",
                j.state_id,
                self.use_case.id()
            )));
        }
        if !self.scope.contains(&j.facet_id) {
            return Err(SessionError::OutOfScope(format!(
                "facet `{}` is not assigned to any subteam",
                j.facet_id
            )));
        }
        if j.author.trim().is_empty() {
            return Err(SessionError::InvalidJudgment("author is empty".into()));
        }
        parse_timestamp(&j.timestamp)?;
        if let Some(bad) = j.issues.iter().find(|i| !is_canonical_id(&i.code)) {
            return Err(SessionError::InvalidJudgment(format!(
                "issue code `{}` is not canonical",
                bad.code
            )));
        }
        Ok(())
    }

    /// Appends a judgment and returns the new version.
    pub fn record_judgment(&mut self, judgment: Judgment, expected_version: u64) -> Result<u64, SessionError> {
        self.check_writable(expected_version)?;
        self.validate(&judgment)?;
        self.log.push(SessionEvent::Judgment(judgment.clone()));
        self.judgments.push(judgment);
        self.version += 1;
        Ok(self.version)
    }

    pub fn close(&mut self, expected_version: u64, author: &str, timestamp: &str) -> Result<u64, SessionError> {
        self.check_writable(expected_version)?;
        parse_timestamp(timestamp)?;
        self.log.push(SessionEvent::Closed {
            author: author.to_owned(),
            timestamp: timestamp.to_owned(),
        });
        self.status = SessionStatus::Closed;
        self.version += 1;
        Ok(self.version)
    }

    /// Applies one logged event, as during replay.
    pub fn apply(&mut self, event: SessionEvent) -> Result<u64, SessionError> {
        match event {
            SessionEvent::Created { .. } => Err(SessionError::MalformedLog(
                "`created` event after the first line".into(),
            )),
            SessionEvent::Judgment(j) => self.record_judgment(j, self.version),
            SessionEvent::Closed { author, timestamp } => self.close(self.version, &author, &timestamp),
        }
    }

    /// Rebuilds a session from its event log.
    pub fn replay(events: impl IntoIterator<Item = SessionEvent>) -> Result<Self, SessionError> {
        let mut iter = events.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| SessionError::MalformedLog("empty log".into()))?;
        let mut session = Self::from_created(first)?;
        for (i, event) in iter.enumerate() {
            session
                .apply(event)
                .map_err(|e| SessionError::MalformedLog(format!("event {}: {e}", i + 2)))?;
        }
        Ok(session)
    }

    /// The judgment that counts for each cell: latest timestamp, ties broken
    /// by log position.
    pub fn latest_judgments(&self) -> BTreeMap<CellKey, &Judgment> {
        let mut latest: BTreeMap<CellKey, (DateTime<FixedOffset>, &Judgment)> = BTreeMap::new();
        for j in &self.judgments {
            let ts = parse_timestamp(&j.timestamp).expect("validated on record");
            latest
                .entry(j.cell())
                .and_modify(|cur| {
                    if ts >= cur.0 {
                        *cur = (ts, j);
                    }
                })
                .or_insert((ts, j));
        }
        latest.into_iter().map(|(k, (_, j))| (k, j)).collect()
    }

    pub fn coverage(&self) -> CoverageMatrix {
        let mut coverage = CoverageMatrix::full(&self.scope, self.use_case.states(), CellStatus::Pending);
        for key in self.latest_judgments().keys() {
            coverage.set_status(key, CellStatus::Evaluated);
        }
        coverage
    }
}

/// Issues from the latest judgment of every cell, with pending cells marked
/// in the coverage matrix.
pub fn session_result(session: &Session) -> EvalResult {
    let mut issues = IssueSet::new();
    for (key, j) in session.latest_judgments() {
        for ji in &j.issues {
            issues.insert(Issue {
                code: ji.code.clone(),
                state_id: key.state.clone(),
                message: ji.message.clone(),
                provenance: BTreeSet::from([Provenance::new(key.facet.clone(), key.side)]),
                severity: ji.severity,
            });
        }
    }
    let mut coverage = session.coverage();
    coverage.recount(&issues);
    let mut result = EvalResult::empty(&session.use_case);
    result.inputs.dimensions = session.dimensions.iter().flat_map(Dimension::atomic_ids).collect();
    result.inputs.sources.insert(format!("session:{}", session.id));
    result.issues = issues;
    result.coverage = coverage;
    result.spot_invocations = session.judgments.len() as u64;
    result
}

/// Merges the results of several sessions over one use case.
pub fn merge_sessions(sessions: &[&Session]) -> Result<EvalResult, SessionError> {
    let (first, rest) = sessions.split_first().ok_or(SessionError::NoSessions)?;
    for s in rest {
        for d in s.dimensions() {
            for f in first.dimensions() {
                d.check_compatible(f)?;
            }
        }
    }
    let mut acc = session_result(first);
    for s in rest {
        acc = merge_results(&acc, &session_result(s))?;
    }
    Ok(acc)
}

/// Judgments a facilitator following `spotter` would record for every
/// in-scope cell of `session`, in facet, side, state order.
pub fn judgments_from_spotter(
    session: &Session,
    spotter: &impl Spotter,
    author: &str,
    timestamp: &str,
) -> Vec<Judgment> {
    let mut out = Vec::new();
    for facet in session.scope() {
        for side in Side::BOTH {
            for state in session.use_case().states() {
                let issues = spotter
                    .spot_side(facet, side, state)
                    .iter()
                    .map(|i| JudgedIssue {
                        code: i.code.clone(),
                        message: i.message.clone(),
                        severity: i.severity,
                    })
                    .collect();
                out.push(Judgment {
                    state_id: state.id.clone(),
                    facet_id: facet.clone(),
                    side,
                    issues,
                    author: author.to_owned(),
                    timestamp: timestamp.to_owned(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::evaluate;
    use crate::facet::join;
    use crate::fixtures;

    const TS: &str = "2026-03-01T10:00:00Z";

    fn fid(s: &str) -> FacetId {
        FacetId::new(s).unwrap()
    }

    fn two_team_session() -> Session {
        let g = fixtures::gender();
        let ids: Vec<_> = g.facet_ids().into_iter().collect();
        let assignments = BTreeMap::from([
            ("first".to_string(), ids[..3].iter().cloned().collect()),
            ("rest".to_string(), ids[3..].iter().cloned().collect()),
        ]);
        Session::create("s1", &[g], &fixtures::checkout(), assignments).unwrap()
    }

    fn judgment(facet: &str, state: &str, codes: &[&str], ts: &str) -> Judgment {
        Judgment {
            state_id: state.into(),
            facet_id: fid(facet),
            side: Side::Min,
            issues: codes
                .iter()
                .map(|c| JudgedIssue {
                    code: (*c).into(),
                    message: format!("{c}!"),
                    severity: None,
                })
                .collect(),
            author: "ana".into(),
            timestamp: ts.into(),
        }
    }

    #[test]
    fn create_with_subteams() {
        let s = two_team_session();
        assert_eq!(s.version(), 1);
        assert_eq!(s.status(), SessionStatus::Open);
        assert_eq!(s.scope().len(), 5);
        assert!(s.coverage().cells().all(|c| c.status == CellStatus::Pending));

        let g = fixtures::gender();
        let a = fixtures::age();
        let by_dimension = BTreeMap::from([
            ("age-team".to_string(), a.facet_ids()),
            (
                "gender-team".to_string(),
                g.facet_ids().difference(&a.facet_ids()).cloned().collect(),
            ),
        ]);
        let s = Session::create("s2", &[a, g], &fixtures::checkout(), by_dimension).unwrap();
        assert_eq!(s.scope().len(), 7);
    }

    #[test]
    fn overlapping_assignment_rejected() {
        let g = fixtures::gender();
        let assignments = BTreeMap::from([
            ("a".to_string(), BTreeSet::from([fid("motivations")])),
            ("b".to_string(), BTreeSet::from([fid("motivations")])),
        ]);
        assert!(matches!(
            Session::create("s", &[g], &fixtures::checkout(), assignments),
            Err(SessionError::OverlappingAssignment { .. })
        ));
    }

    #[test]
    fn scale_conflict_rejected() {
        let g = fixtures::gender();
        let f = crate::facet::FacetType::new("motivations", "M", vec!["x".into(), "y".into()]).unwrap();
        let other = Dimension::new("other", "O", vec![f]).unwrap();
        assert!(matches!(
            Session::create("s", &[g, other], &fixtures::checkout(), BTreeMap::new()),
            Err(SessionError::Facet(FacetError::ScaleConflict { .. }))
        ));
    }

    #[test]
    fn optimistic_versioning() {
        let mut s = two_team_session();
        s.record_judgment(judgment("motivations", "browse", &[], TS), 1).unwrap();
        s.record_judgment(judgment("motivations", "account", &[], TS), 2).unwrap();
        assert_eq!(s.version(), 3);
        assert_eq!(s.record_judgment(judgment("motivations", "payment", &[], TS), 3), Ok(4));
        assert_eq!(
            s.record_judgment(judgment("motivations", "payment", &[], TS), 2),
            Err(SessionError::VersionConflict { expected: 2, current: 4 })
        );
        assert_eq!(s.version(), 4);
    }

    #[test]
    fn out_of_scope_and_closed() {
        let g = fixtures::gender();
        let assignments = BTreeMap::from([("a".to_string(), BTreeSet::from([fid("motivations")]))]);
        let mut s = Session::create("s", &[g], &fixtures::checkout(), assignments).unwrap();
        assert!(matches!(
            s.record_judgment(judgment("learning-style", "browse", &[], TS), 1),
            Err(SessionError::OutOfScope(_))
        ));
        assert!(matches!(
            s.record_judgment(judgment("motivations", "nowhere", &[], TS), 1),
            Err(SessionError::OutOfScope(_))
        ));
        assert!(matches!(
            s.record_judgment(judgment("motivations", "browse", &[], "yesterday"), 1),
            Err(SessionError::InvalidJudgment(_))
        ));
        s.close(1, "ana", TS).unwrap();
        assert_eq!(
            s.record_judgment(judgment("motivations", "browse", &[], TS), 2),
            Err(SessionError::SessionClosed("s".into()))
        );
    }

    #[test]
    fn empty_session_result() {
        let r = session_result(&two_team_session());
        assert!(r.issues.is_empty());
        assert_eq!(r.coverage.density(), 0.0);
        assert_eq!(r.coverage.len(), 5 * 2 * 4);
    }

    #[test]
    fn latest_judgment_wins() {
        let mut s = two_team_session();
        s.record_judgment(judgment("motivations", "browse", &["icon-only"], TS), 1).unwrap();
        s.record_judgment(judgment("motivations", "browse", &[], "2026-03-01T11:00:00+01:00"), 2).unwrap();
        // same instant as the second, later in the log
        s.record_judgment(judgment("motivations", "browse", &["late"], "2026-03-01T10:00:00Z"), 3).unwrap();
        let r = session_result(&s);
        assert!(r.issues.get("icon-only", "browse").is_none());
        assert!(r.issues.get("late", "browse").is_some());
        assert_eq!(s.judgments().len(), 3);

        let mut s = two_team_session();
        s.record_judgment(judgment("motivations", "browse", &["x"], "2026-03-02T00:00:00Z"), 1).unwrap();
        s.record_judgment(judgment("motivations", "browse", &[], "2026-03-01T00:00:00Z"), 2).unwrap();
        let r = session_result(&s);
        assert!(r.issues.get("x", "browse").is_some());
        let key = CellKey { facet: fid("motivations"), side: Side::Min, state: "browse".into() };
        assert_eq!(r.coverage.get(&key).unwrap().status, CellStatus::Evaluated);
    }

    #[test]
    fn replay_reconstructs_state() {
        let mut s = two_team_session();
        s.record_judgment(judgment("motivations", "browse", &["a"], TS), 1).unwrap();
        s.close(2, "ana", TS).unwrap();
        let replayed = Session::replay(s.events().to_vec()).unwrap();
        assert_eq!(replayed, s);
        assert!(matches!(Session::replay(vec![]), Err(SessionError::MalformedLog(_))));
    }

    #[test]
    fn rule_replay_matches_engine() {
        let g = fixtures::gender();
        let ses = fixtures::ses();
        let u = fixtures::checkout();
        let rs = fixtures::base_rules();
        let mut a = Session::create("ga", std::slice::from_ref(&g), &u, BTreeMap::new()).unwrap();
        let mut b = Session::create("sa", std::slice::from_ref(&ses), &u, BTreeMap::new()).unwrap();
        for s in [&mut a, &mut b] {
            for j in judgments_from_spotter(s, &rs, "bot", TS) {
                let v = s.version();
                s.record_judgment(j, v).unwrap();
            }
        }
        let engine = evaluate(&join(&g, &ses).unwrap(), &u, &rs).unwrap();
        let merged = merge_sessions(&[&a, &b]).unwrap();
        assert!(merged.issues.same_issues(&engine.issues));
        assert_eq!(merged.coverage, engine.coverage);
        assert_eq!(merge_sessions(&[&b, &a]).unwrap(), merged);
        assert_eq!(merge_sessions(&[]), Err(SessionError::NoSessions));
    }

    #[test]
    fn event_serialization() {
        let s = two_team_session();
        let line = serde_json::to_string(&s.events()[0]).unwrap();
        assert!(line.starts_with("{\"event\":\"created\""));
        let j = SessionEvent::Judgment(judgment("motivations", "browse", &[], TS));
        let text = serde_json::to_string(&j).unwrap();
        assert_eq!(serde_json::from_str::<SessionEvent>(&text).unwrap(), j);
    }
}
