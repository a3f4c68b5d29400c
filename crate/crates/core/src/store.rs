//! File formats and workspace persistence.
//!
//! | object     | file                 | format                          |
//! |------------|----------------------|---------------------------------|
//! | dimension  | `<id>.dim.json`      | JSON document                   |
//! | use case   | `<id>.usecase.json`  | JSON document                   |
//! | rule set   | `<id>.rules`         | rules language, plain text      |
//! | session    | `<id>.session.jsonl` | one event per line              |
//! | result     | `<id>.result.json`   | JSON document                   |
//!
//! Saved documents are canonical: fixed field order, map keys and facet
//! lists sorted, two-space indentation and a trailing newline. Loading and
//! saving a canonical file reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::EvalResult;
use crate::facet::Dimension;
use crate::rules::{dsl::parse_rules_with_id, RuleSet, RulesError};
use crate::session::{Session, SessionError, SessionEvent};
use crate::usecase::UseCase;

pub const DIMENSION_EXT: &str = ".dim.json";
pub const USE_CASE_EXT: &str = ".usecase.json";
pub const RULES_EXT: &str = ".rules";
pub const SESSION_EXT: &str = ".session.jsonl";
pub const RESULT_EXT: &str = ".result.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: at `{field}`: {message}")]
    Schema {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Rules {
        path: PathBuf,
        #[source]
        source: RulesError,
    },
    #[error("{path}: {source}")]
    Session {
        path: PathBuf,
        #[source]
        source: SessionError,
    },
}

impl StoreError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

/// Canonical JSON text of a document.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    text
}

/// Parses a JSON document, reporting the failing field path.
pub fn from_json_str<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T, StoreError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        StoreError::Schema {
            path: path.to_owned(),
            field,
            message: e.into_inner().to_string(),
        }
    })
}

fn read(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|e| StoreError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), StoreError> {
    fs::write(path, text).map_err(|e| StoreError::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    from_json_str(path, &read(path)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<(), StoreError> {
    write(path, &to_canonical_json(value))
}

pub fn load_dimension(path: &Path) -> Result<Dimension, StoreError> {
    load_json(path)
}

pub fn save_dimension(d: &Dimension, path: &Path) -> Result<(), StoreError> {
    save_json(d, path)
}

pub fn load_use_case(path: &Path) -> Result<UseCase, StoreError> {
    load_json(path)
}

pub fn save_use_case(u: &UseCase, path: &Path) -> Result<(), StoreError> {
    save_json(u, path)
}

pub fn load_result(path: &Path) -> Result<EvalResult, StoreError> {
    load_json(path)
}

pub fn save_result(r: &EvalResult, path: &Path) -> Result<(), StoreError> {
    save_json(r, path)
}

/// File name without the given multi-part extension.
pub fn stem_of<'a>(path: &'a Path, ext: &str) -> Option<&'a str> {
    path.file_name()?.to_str()?.strip_suffix(ext)
}

/// Loads a rule set; its id is the file name minus `.rules`.
pub fn load_rules(path: &Path) -> Result<RuleSet, StoreError> {
    let id = stem_of(path, RULES_EXT)
        .or_else(|| path.file_stem().and_then(|s| s.to_str()))
        .unwrap_or("rules");
    parse_rules_with_id(id, &read(path)?).map_err(|source| StoreError::Rules {
        path: path.to_owned(),
        source,
    })
}

pub fn save_rules(r: &RuleSet, path: &Path) -> Result<(), StoreError> {
    write(path, &r.to_string())
}

/// Appends one event as a single line under an exclusive advisory lock.
pub fn append_session_event(path: &Path, event: &SessionEvent) -> Result<(), StoreError> {
    let mut line = serde_json::to_string(event).expect("events serialize");
    line.push('\n');
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| StoreError::io(path, e))?;
    file.lock().map_err(|e| StoreError::io(path, e))?;
    let res = file.write_all(line.as_bytes()).and_then(|_| file.flush());
    let _ = file.unlock();
    res.map_err(|e| StoreError::io(path, e))
}

/// Writes a whole session log, replacing any existing file.
pub fn write_session_log(path: &Path, events: &[SessionEvent]) -> Result<(), StoreError> {
    let mut text = String::new();
    for e in events {
        text.push_str(&serde_json::to_string(e).expect("events serialize"));
        text.push('\n');
    }
    write(path, &text)
}

/// Reads every complete line of a session log. A trailing line without a
/// newline is an append still in flight and is ignored.
pub fn read_session_events(path: &Path) -> Result<Vec<SessionEvent>, StoreError> {
    let file = File::open(path).map_err(|e| StoreError::io(path, e))?;
    file.lock_shared().map_err(|e| StoreError::io(path, e))?;
    let mut reader = BufReader::new(&file);
    let mut events = Vec::new();
    let mut line = String::new();
    let mut lineno = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| StoreError::io(path, e))?;
        if n == 0 || !line.ends_with('\n') {
            break;
        }
        lineno += 1;
        if line.trim().is_empty() {
            continue;
        }
        let event = from_json_str(path, &line).map_err(|e| match e {
            StoreError::Schema { path, field, message } => StoreError::Schema {
                path,
                field: format!("line {lineno}: {field}"),
                message,
            },
            other => other,
        })?;
        events.push(event);
    }
    let _ = file.unlock();
    Ok(events)
}

pub fn replay_session(path: &Path) -> Result<Session, StoreError> {
    let events = read_session_events(path)?;
    Session::replay(events).map_err(|source| StoreError::Session {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

/// Every object stored under a workspace root, keyed by id.
#[derive(Debug, Default)]
pub struct Workspace {
    pub root: PathBuf,
    pub dimensions: BTreeMap<String, Dimension>,
    pub use_cases: BTreeMap<String, UseCase>,
    pub rule_sets: BTreeMap<String, RuleSet>,
    pub sessions: BTreeMap<String, Session>,
    pub results: BTreeMap<String, EvalResult>,
}

impl Workspace {
    pub fn dimension_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}{DIMENSION_EXT}"))
    }

    pub fn use_case_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}{USE_CASE_EXT}"))
    }

    pub fn rules_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}{RULES_EXT}"))
    }

    pub fn session_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}{SESSION_EXT}"))
    }

    pub fn result_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}{RESULT_EXT}"))
    }

    /// Loads everything it can; problems come back as diagnostics rather
    /// than aborting the scan.
    pub fn load(root: &Path) -> Result<(Workspace, Vec<Diagnostic>), StoreError> {
        let mut ws = Workspace {
            root: root.to_owned(),
            ..Default::default()
        };
        let mut diags = Vec::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(root)
            .map_err(|e| StoreError::io(root, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();

        let mut diag = |path: &Path, message: String| {
            diags.push(Diagnostic {
                path: path.to_owned(),
                message,
            })
        };

        for path in &entries {
            if let Some(stem) = stem_of(path, DIMENSION_EXT) {
                match load_dimension(path) {
                    Ok(d) => {
                        if d.id() != stem {
                            diag(path, format!("id `{}` does not match file name", d.id()));
                        }
                        ws.dimensions.insert(d.id().to_owned(), d);
                    }
                    Err(e) => diag(path, error_message(&e)),
                }
            } else if let Some(stem) = stem_of(path, USE_CASE_EXT) {
                match load_use_case(path) {
                    Ok(u) => {
                        if u.id() != stem {
                            diag(path, format!("id `{}` does not match file name", u.id()));
                        }
                        ws.use_cases.insert(u.id().to_owned(), u);
                    }
                    Err(e) => diag(path, error_message(&e)),
                }
            } else if stem_of(path, RULES_EXT).is_some() {
                match load_rules(path) {
                    Ok(r) => {
                        ws.rule_sets.insert(r.id().to_owned(), r);
                    }
                    Err(e) => diag(path, error_message(&e)),
                }
            } else if let Some(stem) = stem_of(path, SESSION_EXT) {
                match replay_session(path) {
                    Ok(s) => {
                        if s.id() != stem {
                            diag(path, format!("id `{}` does not match file name", s.id()));
                        }
                        ws.sessions.insert(s.id().to_owned(), s);
                    }
                    Err(e) => diag(path, format!("malformed session log: {}", error_message(&e))),
                }
            } else if let Some(stem) = stem_of(path, RESULT_EXT) {
                match load_result(path) {
                    Ok(r) => {
                        ws.results.insert(stem.to_owned(), r);
                    }
                    Err(e) => diag(path, error_message(&e)),
                }
            }
        }
        Ok((ws, diags))
    }

    /// Cross-object integrity checks: scale conflicts between stored
    /// dimensions and references that do not resolve.
    pub fn check(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let dims: Vec<&Dimension> = self.dimensions.values().collect();
        for (i, a) in dims.iter().enumerate() {
            for b in &dims[i + 1..] {
                if let Err(e) = a.check_compatible(b) {
                    diags.push(Diagnostic {
                        path: self.dimension_path(b.id()),
                        message: e.to_string(),
                    });
                }
            }
        }
        let known_dimension = |id: &str| {
            self.dimensions.contains_key(id)
                || id
                    .split_once('.')
                    .is_some_and(|(base, _)| self.dimensions.contains_key(base))
        };
        for (id, s) in &self.sessions {
            let path = self.session_path(id);
            if !self.use_cases.contains_key(s.use_case().id()) {
                diags.push(Diagnostic {
                    path: path.clone(),
                    message: format!("references unknown use case `{}`", s.use_case().id()),
                });
            }
            for d in s.dimensions() {
                for atomic in d.atomic_ids() {
                    if !known_dimension(&atomic) {
                        diags.push(Diagnostic {
                            path: path.clone(),
                            message: format!("references unknown dimension `{atomic}`"),
                        });
                    }
                }
            }
        }
        for (id, r) in &self.results {
            let path = self.result_path(id);
            if !self.use_cases.contains_key(&r.inputs.use_case) {
                diags.push(Diagnostic {
                    path: path.clone(),
                    message: format!("references unknown use case `{}`", r.inputs.use_case),
                });
            }
            for d in &r.inputs.dimensions {
                if !known_dimension(d) {
                    diags.push(Diagnostic {
                        path: path.clone(),
                        message: format!("references unknown dimension `{d}`"),
                    });
                }
            }
            for source in &r.inputs.sources {
                let resolved = match source.split_once(':') {
                    Some(("rules", rid)) => self.rule_sets.contains_key(rid),
                    Some(("session", sid)) => self.sessions.contains_key(sid),
                    _ => false,
                };
                if !resolved {
                    diags.push(Diagnostic {
                        path: path.clone(),
                        message: format!("references unknown source `{source}`"),
                    });
                }
            }
        }
        diags
    }
}

fn error_message(e: &StoreError) -> String {
    match e {
        StoreError::Schema { field, message, .. } => format!("at `{field}`: {message}"),
        StoreError::Io { source, .. } => source.to_string(),
        StoreError::Rules { source, .. } => source.to_string(),
        StoreError::Session { source, .. } => source.to_string(),
    }
}

/// All integrity diagnostics for a workspace, sorted by path.
pub fn validate_workspace(root: &Path) -> Result<Vec<Diagnostic>, StoreError> {
    let (ws, mut diags) = Workspace::load(root)?;
    diags.extend(ws.check());
    diags.sort();
    Ok(diags)
}
