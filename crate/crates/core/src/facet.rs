//! Facet types, dimensions and personas.
//!
//! A [`FacetType`] is an ordered scale of levels whose first and last levels
//! are the two extremes an analysis evaluates. A [`Dimension`] is a set of
//! facet types keyed by id; dimensions compose with [`join`] and decompose
//! with [`partition`]. All values here are immutable once built.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Format version written into every dimension document.
pub const DIMENSION_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FacetError {
    #[error("identifier `{0}` is not canonical (lowercase letters, digits and single hyphens)")]
    BadId(String),
    #[error("facet `{facet}` needs at least two levels, got {len}")]
    ScaleTooShort { facet: String, len: usize },
    #[error("facet `{facet}` lists level `{level}` more than once")]
    DuplicateLevel { facet: String, level: String },
    #[error("facet id `{0}` appears more than once in the dimension")]
    DuplicateFacetId(String),
    #[error("facet `{facet}` is defined with different scales in `{left}` and `{right}`")]
    ScaleConflict {
        facet: String,
        left: String,
        right: String,
    },
    #[error("facet `{0}` has no group in the partition assignment")]
    UnassignedFacet(String),
    #[error("facet `{0}` is not part of the dimension")]
    UnknownFacet(String),
    #[error("dimension `{0}` has no facet types")]
    EmptyDimension(String),
    #[error("level index {index} is out of range for facet `{facet}` ({len} levels)")]
    LevelOutOfRange {
        facet: String,
        index: usize,
        len: usize,
    },
    #[error("facet value for `{facet}` claims extreme {claimed} but level {index} is {actual}")]
    ExtremeMismatch {
        facet: String,
        index: usize,
        claimed: Extreme,
        actual: Extreme,
    },
    #[error("persona `{persona}` does not match dimension `{dimension}`: {reason}")]
    DimensionMismatch {
        persona: String,
        dimension: String,
        reason: String,
    },
}

/// Returns true for ids made of lowercase ASCII letters and digits separated
/// by single hyphens, e.g. `attitude-toward-risk`.
pub fn is_canonical_id(s: &str) -> bool {
    !s.is_empty()
        && s.split('-').all(|part| {
            !part.is_empty()
                && part
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
        })
}

/// Dimension ids may additionally be composites built by [`join`] (`a+b`) and
/// [`partition`] (`a.group`).
pub fn is_dimension_id(s: &str) -> bool {
    !s.is_empty()
        && s.split('+')
            .all(|part| !part.is_empty() && part.split('.').all(is_canonical_id))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FacetId(String);

impl FacetId {
    pub fn new(id: impl Into<String>) -> Result<Self, FacetError> {
        let id = id.into();
        if is_canonical_id(&id) {
            Ok(Self(id))
        } else {
            Err(FacetError::BadId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for FacetId {
    type Error = FacetError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FacetId> for String {
    fn from(value: FacetId) -> Self {
        value.0
    }
}

impl fmt::Display for FacetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for FacetId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

/// Position of a level on its scale, as far as the analysis is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Extreme {
    Min,
    Max,
    /// Interior level. Representable, never evaluated.
    #[serde(rename = "NONE")]
    Interior,
}

impl fmt::Display for Extreme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Extreme::Min => "MIN",
            Extreme::Max => "MAX",
            Extreme::Interior => "NONE",
        })
    }
}

/// One of the two extremes of a facet type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Min,
    Max,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Min, Side::Max];

    pub fn opposite(self) -> Side {
        match self {
            Side::Min => Side::Max,
            Side::Max => Side::Min,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Min => "MIN",
            Side::Max => "MAX",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<Side> for Extreme {
    fn from(side: Side) -> Self {
        match side {
            Side::Min => Extreme::Min,
            Side::Max => Extreme::Max,
        }
    }
}

impl TryFrom<Extreme> for Side {
    type Error = Extreme;

    fn try_from(value: Extreme) -> Result<Self, Self::Error> {
        match value {
            Extreme::Min => Ok(Side::Min),
            Extreme::Max => Ok(Side::Max),
            Extreme::Interior => Err(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FacetTypeDoc {
    id: String,
    label: String,
    scale: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

/// An ordered scale of levels. `scale[0]` is the minimum extreme and the
/// last level is the maximum extreme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FacetTypeDoc", into = "FacetTypeDoc")]
pub struct FacetType {
    id: FacetId,
    label: String,
    scale: Vec<String>,
    description: Option<String>,
}

impl FacetType {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        scale: Vec<String>,
    ) -> Result<Self, FacetError> {
        let id = FacetId::new(id)?;
        if scale.len() < 2 {
            return Err(FacetError::ScaleTooShort {
                facet: id.0,
                len: scale.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for level in &scale {
            if !seen.insert(level.as_str()) {
                return Err(FacetError::DuplicateLevel {
                    facet: id.0,
                    level: level.clone(),
                });
            }
        }
        Ok(Self {
            id,
            label: label.into(),
            scale,
            description: None,
        })
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    pub fn id(&self) -> &FacetId {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn scale(&self) -> &[String] {
        &self.scale
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_label(&self) -> &str {
        &self.scale[0]
    }

    pub fn max_label(&self) -> &str {
        &self.scale[self.scale.len() - 1]
    }

    pub fn extreme_of(&self, level_index: usize) -> Extreme {
        if level_index == 0 {
            Extreme::Min
        } else if level_index + 1 == self.scale.len() {
            Extreme::Max
        } else {
            Extreme::Interior
        }
    }

    pub fn level_index(&self, side: Side) -> usize {
        match side {
            Side::Min => 0,
            Side::Max => self.scale.len() - 1,
        }
    }

    pub fn level_label(&self, side: Side) -> &str {
        &self.scale[self.level_index(side)]
    }

    pub fn value(&self, level_index: usize) -> Result<FacetValue, FacetError> {
        if level_index >= self.scale.len() {
            return Err(FacetError::LevelOutOfRange {
                facet: self.id.0.clone(),
                index: level_index,
                len: self.scale.len(),
            });
        }
        Ok(FacetValue {
            facet_id: self.id.clone(),
            level_index,
            extreme: self.extreme_of(level_index),
        })
    }

    pub fn extreme_value(&self, side: Side) -> FacetValue {
        FacetValue {
            facet_id: self.id.clone(),
            level_index: self.level_index(side),
            extreme: side.into(),
        }
    }

    /// Facets are interchangeable across dimensions when their scales agree.
    pub fn same_scale(&self, other: &FacetType) -> bool {
        self.scale == other.scale
    }
}

impl TryFrom<FacetTypeDoc> for FacetType {
    type Error = FacetError;

    fn try_from(doc: FacetTypeDoc) -> Result<Self, Self::Error> {
        let mut facet = FacetType::new(doc.id, doc.label, doc.scale)?;
        facet.description = doc.description;
        Ok(facet)
    }
}

impl From<FacetType> for FacetTypeDoc {
    fn from(f: FacetType) -> Self {
        FacetTypeDoc {
            id: f.id.0,
            label: f.label,
            scale: f.scale,
            description: f.description,
        }
    }
}

/// A single level of a facet type.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FacetValue {
    pub facet_id: FacetId,
    pub level_index: usize,
    pub extreme: Extreme,
}

impl FacetValue {
    /// Checks the value against the facet it claims to belong to.
    pub fn validate(&self, facet: &FacetType) -> Result<(), FacetError> {
        if self.facet_id != facet.id {
            return Err(FacetError::UnknownFacet(self.facet_id.0.clone()));
        }
        let actual = facet.value(self.level_index)?.extreme;
        if actual != self.extreme {
            return Err(FacetError::ExtremeMismatch {
                facet: self.facet_id.0.clone(),
                index: self.level_index,
                claimed: self.extreme,
                actual,
            });
        }
        Ok(())
    }

    pub fn side(&self) -> Option<Side> {
        Side::try_from(self.extreme).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct DimensionDoc {
    format_version: u32,
    id: String,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    notes: Option<String>,
    facets: Vec<FacetType>,
}

/// A named set of facet types keyed by facet id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DimensionDoc", into = "DimensionDoc")]
pub struct Dimension {
    id: String,
    label: String,
    notes: Option<String>,
    facets: BTreeMap<FacetId, FacetType>,
}

impl Dimension {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        facets: Vec<FacetType>,
    ) -> Result<Self, FacetError> {
        let id = id.into();
        if !is_dimension_id(&id) {
            return Err(FacetError::BadId(id));
        }
        let mut map = BTreeMap::new();
        for facet in facets {
            let key = facet.id.clone();
            if map.insert(key.clone(), facet).is_some() {
                return Err(FacetError::DuplicateFacetId(key.0));
            }
        }
        Ok(Self {
            id,
            label: label.into(),
            notes: None,
            facets: map,
        })
    }

    pub fn empty(id: impl Into<String>) -> Result<Self, FacetError> {
        let id = id.into();
        let label = id.clone();
        Self::new(id, label, Vec::new())
    }

    pub fn with_notes(mut self, notes: impl Into<String>) -> Self {
        self.notes = Some(notes.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn notes(&self) -> Option<&str> {
        self.notes.as_deref()
    }

    pub fn facets(&self) -> impl ExactSizeIterator<Item = &FacetType> + Clone {
        self.facets.values()
    }

    pub fn facet(&self, id: &str) -> Option<&FacetType> {
        self.facets.get(id)
    }

    pub fn facet_ids(&self) -> BTreeSet<FacetId> {
        self.facets.keys().cloned().collect()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.facets.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    /// The atomic dimension ids this dimension was composed from.
    pub fn atomic_ids(&self) -> BTreeSet<String> {
        self.id.split('+').map(str::to_owned).collect()
    }

    /// Equality of the underlying facet sets, ignoring ids and labels.
    pub fn same_facets(&self, other: &Dimension) -> bool {
        self.facets == other.facets
    }

    /// Facet ids shared with `other`.
    pub fn shared_ids(&self, other: &Dimension) -> BTreeSet<FacetId> {
        self.facets
            .keys()
            .filter(|id| other.facets.contains_key(id.as_str()))
            .cloned()
            .collect()
    }

    /// Checks that every facet shared with `other` has an identical scale.
    pub fn check_compatible(&self, other: &Dimension) -> Result<(), FacetError> {
        for (id, facet) in &self.facets {
            if let Some(theirs) = other.facets.get(id) {
                if !facet.same_scale(theirs) {
                    return Err(FacetError::ScaleConflict {
                        facet: id.0.clone(),
                        left: self.id.clone(),
                        right: other.id.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl TryFrom<DimensionDoc> for Dimension {
    type Error = FacetError;

    fn try_from(doc: DimensionDoc) -> Result<Self, Self::Error> {
        let mut d = Dimension::new(doc.id, doc.label, doc.facets)?;
        d.notes = doc.notes;
        Ok(d)
    }
}

impl From<Dimension> for DimensionDoc {
    fn from(d: Dimension) -> Self {
        DimensionDoc {
            format_version: DIMENSION_FORMAT_VERSION,
            id: d.id,
            label: d.label,
            notes: d.notes,
            facets: d.facets.into_values().collect(),
        }
    }
}

fn composite_id<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let parts: BTreeSet<&str> = ids.into_iter().flat_map(|id| id.split('+')).collect();
    parts.into_iter().collect::<Vec<_>>().join("+")
}

/// Set union of two dimensions keyed by facet id.
///
/// Shared ids must carry identical scales. The composite id is the sorted,
/// deduplicated set of atomic operand ids joined with `+`.
pub fn join(d1: &Dimension, d2: &Dimension) -> Result<Dimension, FacetError> {
    d1.check_compatible(d2)?;
    let id = composite_id([d1.id.as_str(), d2.id.as_str()]);
    let label = if d1.id == d2.id {
        d1.label.clone()
    } else {
        let (a, b) = if d1.id <= d2.id { (d1, d2) } else { (d2, d1) };
        format!("{} + {}", a.label, b.label)
    };
    let mut facets = d1.facets.clone();
    for (key, theirs) in &d2.facets {
        match facets.get_mut(key) {
            None => {
                facets.insert(key.clone(), theirs.clone());
            }
            // Same scale; keep the smaller metadata so the result does not
            // depend on operand order.
            Some(ours) => {
                if (&theirs.label, &theirs.description) < (&ours.label, &ours.description) {
                    *ours = theirs.clone();
                }
            }
        }
    }
    Ok(Dimension {
        id,
        label,
        notes: None,
        facets,
    })
}

/// Folds [`join`] over a list of dimensions. An empty list yields an empty
/// dimension with id `empty`.
pub fn join_all<'a>(dims: impl IntoIterator<Item = &'a Dimension>) -> Result<Dimension, FacetError> {
    let mut iter = dims.into_iter();
    let Some(first) = iter.next() else {
        return Dimension::empty("empty");
    };
    iter.try_fold(first.clone(), |acc, d| join(&acc, d))
}

/// Splits a dimension into disjoint parts, one per group key, ordered by key.
/// Part ids are `<dimension>.<group>`.
pub fn partition(
    d: &Dimension,
    assignment: &BTreeMap<FacetId, String>,
) -> Result<Vec<Dimension>, FacetError> {
    for facet in assignment.keys() {
        if !d.facets.contains_key(facet) {
            return Err(FacetError::UnknownFacet(facet.0.clone()));
        }
    }
    let mut groups: BTreeMap<&str, Vec<FacetType>> = BTreeMap::new();
    for (id, facet) in &d.facets {
        let group = assignment
            .get(id)
            .ok_or_else(|| FacetError::UnassignedFacet(id.0.clone()))?;
        if !is_canonical_id(group) {
            return Err(FacetError::BadId(group.clone()));
        }
        groups.entry(group).or_default().push(facet.clone());
    }
    groups
        .into_iter()
        .map(|(group, facets)| {
            Dimension::new(
                format!("{}.{}", d.id, group),
                format!("{} ({})", d.label, group),
                facets,
            )
        })
        .collect()
}

/// An assignment of one extreme per facet type of a dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub dimension_id: String,
    pub name: String,
    pub values: BTreeMap<FacetId, FacetValue>,
}

impl Persona {
    /// Builds a persona for `d` from a side per facet. Every facet of `d`
    /// must be assigned exactly once.
    pub fn new(
        id: impl Into<String>,
        d: &Dimension,
        name: impl Into<String>,
        sides: &BTreeMap<FacetId, Side>,
    ) -> Result<Self, FacetError> {
        let id = id.into();
        for key in sides.keys() {
            if !d.contains(key.as_str()) {
                return Err(FacetError::DimensionMismatch {
                    persona: id,
                    dimension: d.id.clone(),
                    reason: format!("unknown facet `{key}`"),
                });
            }
        }
        let mut values = BTreeMap::new();
        for facet in d.facets() {
            let side = sides
                .get(facet.id())
                .ok_or_else(|| FacetError::DimensionMismatch {
                    persona: id.clone(),
                    dimension: d.id.clone(),
                    reason: format!("no value for facet `{}`", facet.id()),
                })?;
            values.insert(facet.id().clone(), facet.extreme_value(*side));
        }
        Ok(Self {
            id,
            dimension_id: d.id.clone(),
            name: name.into(),
            values,
        })
    }

    pub fn side(&self, facet: &str) -> Option<Side> {
        self.values.get(facet).and_then(FacetValue::side)
    }
}

/// Builds the all-minimum and all-maximum personas of a dimension.
pub fn synthesize_personas(
    d: &Dimension,
    name_min: &str,
    name_max: &str,
) -> Result<(Persona, Persona), FacetError> {
    if d.is_empty() {
        return Err(FacetError::EmptyDimension(d.id.clone()));
    }
    let make = |side: Side, name: &str| {
        let sides = d.facets.keys().map(|k| (k.clone(), side)).collect();
        Persona::new(
            format!("{}-{}", d.id, side.as_str().to_lowercase()),
            d,
            name,
            &sides,
        )
    };
    Ok((make(Side::Min, name_min)?, make(Side::Max, name_max)?))
}

/// Which (facet, extreme) endpoints a set of personas reaches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaCoverageReport {
    pub covered: BTreeSet<(FacetId, Side)>,
    pub missing: BTreeSet<(FacetId, Side)>,
    pub complete: bool,
}

pub fn coverage_check(
    personas: &[Persona],
    d: &Dimension,
) -> Result<PersonaCoverageReport, FacetError> {
    let mut covered = BTreeSet::new();
    for p in personas {
        let mismatch = |reason: String| FacetError::DimensionMismatch {
            persona: p.id.clone(),
            dimension: d.id.clone(),
            reason,
        };
        if p.dimension_id != d.id {
            return Err(mismatch(format!("references `{}`", p.dimension_id)));
        }
        if p.values.len() != d.len() || p.values.keys().any(|k| !d.contains(k.as_str())) {
            return Err(mismatch("facet set differs".into()));
        }
        for (facet_id, value) in &p.values {
            let facet = &d.facets[facet_id];
            value
                .validate(facet)
                .map_err(|e| mismatch(e.to_string()))?;
            let side = value
                .side()
                .ok_or_else(|| mismatch(format!("interior value for `{facet_id}`")))?;
            covered.insert((facet_id.clone(), side));
        }
    }
    let missing: BTreeSet<_> = d
        .facets
        .keys()
        .flat_map(|k| Side::BOTH.map(|s| (k.clone(), s)))
        .filter(|cell| !covered.contains(cell))
        .collect();
    Ok(PersonaCoverageReport {
        complete: missing.is_empty(),
        covered,
        missing,
    })
}
