//! Practitioner artifacts: facet surveys, persona cards and reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{merge_all, CellKey, CellStatus, EvalError, EvalResult};
use crate::facet::{join_all, synthesize_personas, Dimension, FacetError, FacetId, Side};

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Facet(#[from] FacetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("questions per facet must be at least 1")]
    ZeroQuestions,
    #[error("no dimensions given")]
    NoDimensions,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyQuestion {
    pub facet_id: FacetId,
    pub prompt: String,
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Survey {
    pub id: String,
    pub source_dimension_ids: Vec<String>,
    pub questions: Vec<SurveyQuestion>,
}

impl Survey {
    /// `facet_id,prompt,level…` rows, one per question, without a header.
    pub fn to_csv(&self) -> Result<String, ArtifactError> {
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .has_headers(false)
            .from_writer(Vec::new());
        for q in &self.questions {
            let mut row = vec![q.facet_id.as_str(), q.prompt.as_str()];
            row.extend(q.levels.iter().map(String::as_str));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 input"))
    }
}

/// `q` questions for every facet of the joined dimensions; shared facets are
/// asked about once.
pub fn generate_survey(dims: &[Dimension], q: usize) -> Result<Survey, ArtifactError> {
    if q == 0 {
        return Err(ArtifactError::ZeroQuestions);
    }
    let joined = join_all(dims)?;
    let mut questions = Vec::with_capacity(q * joined.len());
    for facet in joined.facets() {
        for k in 1..=q {
            let base = format!(
                "Where do you place yourself on {}, from \"{}\" to \"{}\"?",
                facet.label().to_lowercase(),
                facet.min_label(),
                facet.max_label()
            );
            let prompt = if q == 1 {
                base
            } else {
                format!("[{k}/{q}] {base}")
            };
            questions.push(SurveyQuestion {
                facet_id: facet.id().clone(),
                prompt,
                levels: facet.scale().to_vec(),
            });
        }
    }
    let mut source_dimension_ids: Vec<String> = dims.iter().map(|d| d.id().to_owned()).collect();
    source_dimension_ids.sort();
    source_dimension_ids.dedup();
    Ok(Survey {
        id: format!("survey-{}", joined.id().replace('+', "-")),
        source_dimension_ids,
        questions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardLine {
    pub facet_id: FacetId,
    pub facet_label: String,
    pub level: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaCard {
    pub dimension_id: String,
    pub persona_id: String,
    pub name: String,
    pub side: Side,
    pub lines: Vec<CardLine>,
}

impl PersonaCard {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("### {} ({}, {})\n\n", self.name, self.dimension_id, self.side);
        for l in &self.lines {
            let _ = writeln!(out, "- **{}**: {}", l.facet_label, l.level);
        }
        out
    }
}

/// The minimum and maximum persona of every dimension, two cards each.
pub fn persona_cards(dims: &[Dimension]) -> Result<Vec<PersonaCard>, ArtifactError> {
    if dims.is_empty() {
        return Err(ArtifactError::NoDimensions);
    }
    let mut cards = Vec::with_capacity(dims.len() * 2);
    for d in dims {
        let (lo, hi) = synthesize_personas(
            d,
            &format!("{} minimum persona", d.label()),
            &format!("{} maximum persona", d.label()),
        )?;
        for (persona, side) in [(lo, Side::Min), (hi, Side::Max)] {
            let lines = persona
                .values
                .iter()
                .map(|(fid, value)| {
                    let facet = d.facet(fid.as_str()).expect("persona built from d");
                    CardLine {
                        facet_id: fid.clone(),
                        facet_label: facet.label().to_owned(),
                        level: facet.scale()[value.level_index].clone(),
                    }
                })
                .collect();
            cards.push(PersonaCard {
                dimension_id: d.id().to_owned(),
                persona_id: persona.id,
                name: persona.name,
                side,
                lines,
            });
        }
    }
    Ok(cards)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportDocument {
    pub format: ReportFormat,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueRow {
    pub state_index: usize,
    pub state_id: String,
    pub code: String,
    pub facets: String,
    pub severity: String,
    pub message: String,
}

/// Issue table sorted by state index, first provenance facet, then code.
pub fn issue_rows(result: &EvalResult) -> Vec<IssueRow> {
    let mut rows: Vec<(usize, String, IssueRow)> = result
        .issues
        .iter()
        .map(|i| {
            let state_index = result.state_index(&i.state_id).unwrap_or(usize::MAX);
            let first = i
                .provenance
                .iter()
                .next()
                .map(|p| p.facet.to_string())
                .unwrap_or_default();
            let facets = i
                .provenance
                .iter()
                .map(|p| format!("{} {}", p.facet, p.side))
                .collect::<Vec<_>>()
                .join("; ");
            let row = IssueRow {
                state_index,
                state_id: i.state_id.clone(),
                code: i.code.clone(),
                facets,
                severity: i.severity.map(|s| s.to_string()).unwrap_or_default(),
                message: i.message.clone(),
            };
            (state_index, first, row)
        })
        .collect();
    rows.sort_by(|a, b| (a.0, &a.1, &a.2.code).cmp(&(b.0, &b.1, &b.2.code)));
    rows.into_iter().map(|(_, _, r)| r).collect()
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn render_markdown(result: Option<&EvalResult>) -> String {
    let mut out = String::from("# Inclusivity evaluation report\n\n");
    let Some(r) = result else {
        out.push_str("No results.\n\n## Coverage\n\n- cells: 0\n- evaluated: 0\n- density: 0.000\n\n## Issues\n\n| State | Code | Facets | Severity | Message |\n|---|---|---|---|---|\n");
        return out;
    };
    let join = |set: &BTreeSet<String>| set.iter().cloned().collect::<Vec<_>>().join(", ");
    let _ = writeln!(out, "- use case: {}", r.inputs.use_case);
    let _ = writeln!(out, "- dimensions: {}", join(&r.inputs.dimensions));
    let _ = writeln!(out, "- sources: {}\n", join(&r.inputs.sources));

    out.push_str("## Coverage\n\n");
    let _ = writeln!(out, "- cells: {}", r.coverage.len());
    let _ = writeln!(out, "- evaluated: {}", r.coverage.evaluated());
    let _ = writeln!(out, "- density: {:.3}\n", r.coverage.density());

    let facets: BTreeSet<&FacetId> = r.coverage.cells().map(|c| &c.key.facet).collect();
    for side in Side::BOTH {
        let _ = writeln!(out, "### {side} extremes\n");
        out.push_str("| Facet |");
        for s in &r.inputs.states {
            let _ = write!(out, " {s} |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(r.inputs.states.len()));
        out.push('\n');
        for facet in &facets {
            let _ = write!(out, "| {facet} |");
            for s in &r.inputs.states {
                let key = CellKey {
                    facet: (*facet).clone(),
                    side,
                    state: s.clone(),
                };
                let cell = match r.coverage.get(&key) {
                    None => "-".to_owned(),
                    Some(c) if c.status == CellStatus::Pending => "pending".to_owned(),
                    Some(c) => c.issues.to_string(),
                };
                let _ = write!(out, " {cell} |");
            }
            out.push('\n');
        }
        out.push('\n');
    }

    out.push_str("## Issues\n\n| State | Code | Facets | Severity | Message |\n|---|---|---|---|---|\n");
    for row in issue_rows(r) {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            row.state_id,
            row.code,
            row.facets,
            row.severity,
            md_escape(&row.message)
        );
    }
    out
}

fn render_csv(result: Option<&EvalResult>) -> Result<String, ArtifactError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["state_index", "state_id", "code", "facets", "severity", "message"])?;
    if let Some(r) = result {
        for row in issue_rows(r) {
            w.write_record([
                row.state_index.to_string(),
                row.state_id,
                row.code,
                row.facets,
                row.severity,
                row.message,
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 input"))
}

/// Merges the results and renders them. Output depends only on the merged
/// result, so identical inputs give byte-identical documents.
pub fn compose_report(results: &[EvalResult], format: ReportFormat) -> Result<ReportDocument, ArtifactError> {
    let merged = merge_all(results)?;
    let content = match format {
        ReportFormat::Markdown => render_markdown(merged.as_ref()),
        ReportFormat::Csv => render_csv(merged.as_ref())?,
    };
    Ok(ReportDocument { format, content })
}
