//! One error type for the CLI and the service, classified so each front end
//! can map it to an exit code or an HTTP status.

use std::fmt;

use facetmag_core::artifacts::ArtifactError;
use facetmag_core::facet::FacetError;
use facetmag_core::store::StoreError;
use facetmag_core::usecase::UseCaseError;
use facetmag_core::{EvalError, RulesError, SessionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Malformed input: schema errors, rule syntax, bad logs.
    Invalid,
    NotFound,
    /// Stale `expected_version` or an id that already exists.
    Conflict,
    /// Well-formed input the domain rejects, e.g. a scale conflict.
    Domain,
    Io,
}

#[derive(Debug, Clone)]
pub struct AppError {
    pub kind: Kind,
    pub code: &'static str,
    pub message: String,
    /// Current version of the resource, for conflicts.
    pub version: Option<u64>,
}

impl AppError {
    pub fn new(kind: Kind, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            code,
            message: message.into(),
            version: None,
        }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(Kind::NotFound, "not_found", format!("{what} `{id}` not found"))
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(Kind::Invalid, "schema", message)
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for AppError {}

fn facet_code(e: &FacetError) -> &'static str {
    match e {
        FacetError::BadId(_) => "bad_id",
        FacetError::ScaleTooShort { .. } => "scale_too_short",
        FacetError::DuplicateLevel { .. } => "duplicate_level",
        FacetError::DuplicateFacetId(_) => "duplicate_facet_id",
        FacetError::ScaleConflict { .. } => "scale_conflict",
        FacetError::UnassignedFacet(_) => "unassigned_facet",
        FacetError::UnknownFacet(_) => "unknown_facet",
        FacetError::EmptyDimension(_) => "empty_dimension",
        FacetError::LevelOutOfRange { .. } => "level_out_of_range",
        FacetError::ExtremeMismatch { .. } => "extreme_mismatch",
        FacetError::DimensionMismatch { .. } => "dimension_mismatch",
    }
}

impl From<FacetError> for AppError {
    fn from(e: FacetError) -> Self {
        AppError::new(Kind::Domain, facet_code(&e), e.to_string())
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        let code = match &e {
            EvalError::Facet(f) => facet_code(f),
            EvalError::EmptyDimension(_) => "empty_dimension",
            EvalError::EmptyUseCase(_) => "empty_use_case",
            EvalError::UseCaseMismatch { .. } => "use_case_mismatch",
            EvalError::WeightLength { .. } | EvalError::BadWeights(_) => "bad_weights",
        };
        AppError::new(Kind::Domain, code, e.to_string())
    }
}

impl From<SessionError> for AppError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::Facet(f) => f.into(),
            SessionError::Eval(ev) => ev.into(),
            SessionError::VersionConflict { current, .. } => AppError {
                kind: Kind::Conflict,
                code: "version_conflict",
                message,
                version: Some(current),
            },
            SessionError::OverlappingAssignment { .. } => {
                AppError::new(Kind::Domain, "overlapping_assignment", message)
            }
            SessionError::OutOfScope(_) => AppError::new(Kind::Domain, "out_of_scope", message),
            SessionError::SessionClosed(_) => AppError::new(Kind::Domain, "session_closed", message),
            SessionError::InvalidJudgment(_) => AppError::new(Kind::Domain, "invalid_judgment", message),
            SessionError::MalformedLog(_) => AppError::new(Kind::Invalid, "malformed_log", message),
            SessionError::NoSessions => AppError::new(Kind::Domain, "no_sessions", message),
        }
    }
}

impl From<RulesError> for AppError {
    fn from(e: RulesError) -> Self {
        let code = match &e {
            RulesError::Parse(_) => "parse_error",
            RulesError::DuplicateRuleCode { .. } => "duplicate_rule_code",
            RulesError::InteriorValue { .. } => "interior_value",
        };
        AppError::new(Kind::Invalid, code, e.to_string())
    }
}

impl From<UseCaseError> for AppError {
    fn from(e: UseCaseError) -> Self {
        AppError::new(Kind::Invalid, "schema", e.to_string())
    }
}

impl From<ArtifactError> for AppError {
    fn from(e: ArtifactError) -> Self {
        match e {
            ArtifactError::Facet(f) => f.into(),
            ArtifactError::Eval(ev) => ev.into(),
            ArtifactError::ZeroQuestions => AppError::new(Kind::Domain, "zero_questions", e.to_string()),
            ArtifactError::NoDimensions => AppError::new(Kind::Domain, "no_dimensions", e.to_string()),
            ArtifactError::Csv(_) => AppError::new(Kind::Io, "io", e.to_string()),
        }
    }
}

impl From<StoreError> for AppError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                AppError::new(Kind::NotFound, "not_found", message)
            }
            StoreError::Io { .. } => AppError::new(Kind::Io, "io", message),
            StoreError::Schema { .. } => AppError::new(Kind::Invalid, "schema", message),
            StoreError::Rules { source, .. } => AppError {
                message,
                ..source.into()
            },
            StoreError::Session { source, .. } => AppError {
                message,
                ..source.into()
            },
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::new(Kind::Io, "io", e.to_string())
    }
}
