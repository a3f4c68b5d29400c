//! Whole-dimension evaluation, result merging, composition checks and the
//! random-sampling baseline.
//!
//! [`evaluate`] applies `spot` to both extremes of every facet in every state
//! and unions the results. With the `parallel` feature the `(facet, state)`
//! pairs fan out over rayon; the sequential path is always available as
//! [`evaluate_sequential`] and must produce identical results.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facet::{join, join_all, Dimension, FacetError, FacetId, FacetType, Side};
use crate::issue::{IssueKey, IssueSet};
use crate::rules::Spotter;
use crate::usecase::{State, UseCase};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("dimension `{0}` has no facet types")]
    EmptyDimension(String),
    #[error("use case `{0}` has no states")]
    EmptyUseCase(String),
    #[error("results refer to different use cases: `{left}` and `{right}`")]
    UseCaseMismatch { left: String, right: String },
    #[error(transparent)]
    Facet(#[from] FacetError),
    #[error("weight vector has {got} entries, expected {expected} (2^facets)")]
    WeightLength { got: usize, expected: usize },
    #[error("weight vector is not usable: {0}")]
    BadWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CellStatus {
    Pending,
    Evaluated,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub facet: FacetId,
    pub side: Side,
    pub state: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(flatten)]
    pub key: CellKey,
    pub status: CellStatus,
    /// Issues in this state whose provenance includes this facet extreme.
    pub issues: usize,
}

/// Status of every `(facet, extreme, state)` triple of an evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageMatrix {
    cells: BTreeMap<CellKey, Cell>,
}

impl CoverageMatrix {
    /// All cells of `facets × {MIN, MAX} × states` with the given status.
    pub fn full<'a>(
        facets: impl IntoIterator<Item = &'a FacetId>,
        states: &[State],
        status: CellStatus,
    ) -> Self {
        let mut cells = BTreeMap::new();
        for facet in facets {
            for side in Side::BOTH {
                for s in states {
                    let key = CellKey {
                        facet: facet.clone(),
                        side,
                        state: s.id.clone(),
                    };
                    cells.insert(
                        key.clone(),
                        Cell {
                            key,
                            status,
                            issues: 0,
                        },
                    );
                }
            }
        }
        Self { cells }
    }

    pub fn set_status(&mut self, key: &CellKey, status: CellStatus) -> bool {
        match self.cells.get_mut(key) {
            Some(cell) => {
                cell.status = status;
                true
            }
            None => false,
        }
    }

    pub fn get(&self, key: &CellKey) -> Option<&Cell> {
        self.cells.get(key)
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn evaluated(&self) -> usize {
        self.cells
            .values()
            .filter(|c| c.status == CellStatus::Evaluated)
            .count()
    }

    /// Fraction of cells evaluated; an empty matrix has density 0.
    pub fn density(&self) -> f64 {
        if self.cells.is_empty() {
            0.0
        } else {
            self.evaluated() as f64 / self.cells.len() as f64
        }
    }

    /// Cell union; an evaluated cell stays evaluated.
    pub fn merge(&mut self, other: &CoverageMatrix) {
        for (key, cell) in &other.cells {
            self.cells
                .entry(key.clone())
                .and_modify(|c| c.status = c.status.max(cell.status))
                .or_insert_with(|| cell.clone());
        }
    }

    /// Recomputes per-cell issue counts from an issue set.
    pub fn recount(&mut self, issues: &IssueSet) {
        for cell in self.cells.values_mut() {
            cell.issues = 0;
        }
        for issue in issues.iter() {
            for p in &issue.provenance {
                let key = CellKey {
                    facet: p.facet.clone(),
                    side: p.side,
                    state: issue.state_id.clone(),
                };
                if let Some(cell) = self.cells.get_mut(&key) {
                    cell.issues += 1;
                }
            }
        }
    }
}

impl Serialize for CoverageMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.cells.values())
    }
}

impl<'de> Deserialize<'de> for CoverageMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let cells = Vec::<Cell>::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for cell in cells {
            if map.insert(cell.key.clone(), cell).is_some() {
                return Err(serde::de::Error::custom("duplicate coverage cell"));
            }
        }
        Ok(Self { cells: map })
    }
}

/// What an evaluation was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultInputs {
    /// Atomic dimension ids; a joined dimension contributes each operand.
    pub dimensions: BTreeSet<String>,
    pub use_case: String,
    /// State ids in use-case order.
    pub states: Vec<String>,
    /// Spotters that produced the issues, e.g. `rules:base` or `session:s1`.
    pub sources: BTreeSet<String>,
}

pub const RESULT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub format_version: u32,
    pub inputs: ResultInputs,
    pub issues: IssueSet,
    pub coverage: CoverageMatrix,
    /// Calls to `spot` performed in this process. Not part of the result
    /// document and not part of result equality.
    #[serde(skip)]
    pub spot_invocations: u64,
}

impl PartialEq for EvalResult {
    fn eq(&self, other: &Self) -> bool {
        self.inputs == other.inputs && self.issues == other.issues && self.coverage == other.coverage
    }
}

impl EvalResult {
    /// The identity element for [`merge_results`] over `u`.
    pub fn empty(u: &UseCase) -> Self {
        Self {
            format_version: RESULT_FORMAT_VERSION,
            inputs: ResultInputs {
                dimensions: BTreeSet::new(),
                use_case: u.id().to_owned(),
                states: u.states().iter().map(|s| s.id.clone()).collect(),
                sources: BTreeSet::new(),
            },
            issues: IssueSet::new(),
            coverage: CoverageMatrix::default(),
            spot_invocations: 0,
        }
    }

    pub fn state_index(&self, state_id: &str) -> Option<usize> {
        self.inputs.states.iter().position(|s| s == state_id)
    }
}

fn check_inputs(d: &Dimension, u: &UseCase) -> Result<(), EvalError> {
    if d.is_empty() {
        return Err(EvalError::EmptyDimension(d.id().to_owned()));
    }
    if u.is_empty() {
        return Err(EvalError::EmptyUseCase(u.id().to_owned()));
    }
    Ok(())
}

fn assemble(d: &Dimension, u: &UseCase, spotter: &impl Spotter, issues: IssueSet, calls: u64) -> EvalResult {
    let ids = d.facet_ids();
    let mut coverage = CoverageMatrix::full(&ids, u.states(), CellStatus::Evaluated);
    coverage.recount(&issues);
    let mut result = EvalResult::empty(u);
    result.inputs.dimensions = d.atomic_ids();
    result.inputs.sources.insert(spotter.source());
    result.issues = issues;
    result.coverage = coverage;
    result.spot_invocations = calls;
    result
}

fn spot_pair(facet: &FacetType, state: &State, spotter: &impl Spotter) -> (IssueSet, u64) {
    let lo = spotter.spot_side(facet.id(), Side::Min, state);
    let hi = spotter.spot_side(facet.id(), Side::Max, state);
    (lo.union(hi), 2)
}

fn union_pair(a: (IssueSet, u64), b: (IssueSet, u64)) -> (IssueSet, u64) {
    (a.0.union(b.0), a.1 + b.1)
}

pub fn evaluate_sequential(d: &Dimension, u: &UseCase, spotter: &impl Spotter) -> Result<EvalResult, EvalError> {
    check_inputs(d, u)?;
    let (issues, calls) = d
        .facets()
        .flat_map(|f| u.states().iter().map(move |s| (f, s)))
        .map(|(f, s)| spot_pair(f, s, spotter))
        .fold((IssueSet::new(), 0), union_pair);
    Ok(assemble(d, u, spotter, issues, calls))
}

#[cfg(feature = "parallel")]
pub fn evaluate_parallel(d: &Dimension, u: &UseCase, spotter: &impl Spotter) -> Result<EvalResult, EvalError> {
    use rayon::prelude::*;

    check_inputs(d, u)?;
    let pairs: Vec<(&FacetType, &State)> = d
        .facets()
        .flat_map(|f| u.states().iter().map(move |s| (f, s)))
        .collect();
    let (issues, calls) = pairs
        .par_iter()
        .map(|(f, s)| spot_pair(f, s, spotter))
        .reduce(|| (IssueSet::new(), 0), union_pair);
    Ok(assemble(d, u, spotter, issues, calls))
}

/// Union of `spot` over both extremes of every facet of `d` in every state
/// of `u`. Performs exactly `2·|facets|·|states|` spot calls.
pub fn evaluate(d: &Dimension, u: &UseCase, spotter: &impl Spotter) -> Result<EvalResult, EvalError> {
    #[cfg(feature = "parallel")]
    {
        evaluate_parallel(d, u, spotter)
    }
    #[cfg(not(feature = "parallel"))]
    {
        evaluate_sequential(d, u, spotter)
    }
}

/// Union of two results over the same use case.
pub fn merge_results(a: &EvalResult, b: &EvalResult) -> Result<EvalResult, EvalError> {
    if a.inputs.use_case != b.inputs.use_case || a.inputs.states != b.inputs.states {
        return Err(EvalError::UseCaseMismatch {
            left: a.inputs.use_case.clone(),
            right: b.inputs.use_case.clone(),
        });
    }
    let mut out = a.clone();
    out.inputs.dimensions.extend(b.inputs.dimensions.iter().cloned());
    out.inputs.sources.extend(b.inputs.sources.iter().cloned());
    out.issues.extend_from(&b.issues);
    out.coverage.merge(&b.coverage);
    out.coverage.recount(&out.issues);
    out.spot_invocations = a.spot_invocations + b.spot_invocations;
    Ok(out)
}

/// Folds [`merge_results`] over a non-empty list.
pub fn merge_all<'a>(results: impl IntoIterator<Item = &'a EvalResult>) -> Result<Option<EvalResult>, EvalError> {
    let mut iter = results.into_iter();
    let Some(first) = iter.next() else {
        return Ok(None);
    };
    iter.try_fold(first.clone(), |acc, r| merge_results(&acc, r))
        .map(Some)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub equal: bool,
    /// Issues found only by evaluating the joined dimension.
    pub only_joined: Vec<IssueKey>,
    /// Issues found only by merging the separate evaluations.
    pub only_merged: Vec<IssueKey>,
    pub joined_invocations: u64,
    pub separate_invocations: u64,
}

impl VerificationReport {
    pub fn diff(&self) -> Vec<&IssueKey> {
        self.only_joined.iter().chain(&self.only_merged).collect()
    }
}

/// Evaluates `join(d1, d2)` directly and as the merge of separate runs and
/// compares the issue sets. An empty operand contributes no issues.
pub fn verify_composition(
    d1: &Dimension,
    d2: &Dimension,
    u: &UseCase,
    spotter: &impl Spotter,
) -> Result<VerificationReport, EvalError> {
    let joined_dim = join(d1, d2)?;
    let eval_or_empty = |d: &Dimension| -> Result<EvalResult, EvalError> {
        if d.is_empty() {
            if u.is_empty() {
                return Err(EvalError::EmptyUseCase(u.id().to_owned()));
            }
            Ok(EvalResult::empty(u))
        } else {
            evaluate(d, u, spotter)
        }
    };
    let joined = eval_or_empty(&joined_dim)?;
    let left = eval_or_empty(d1)?;
    let right = eval_or_empty(d2)?;
    let merged = merge_results(&left, &right)?;
    let only_joined = joined.issues.difference(&merged.issues);
    let only_merged = merged.issues.difference(&joined.issues);
    Ok(VerificationReport {
        equal: only_joined.is_empty() && only_merged.is_empty(),
        only_joined,
        only_merged,
        joined_invocations: joined.spot_invocations,
        separate_invocations: merged.spot_invocations,
    })
}

/// How sampled users are distributed over the extreme-combination cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum SamplingWeights {
    /// Every facet level equally likely, independently per facet.
    #[default]
    Uniform,
    /// One weight per cell, indexed by a bitmask over facets in id order
    /// (bit set = upper half of that facet's scale).
    PerCell(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub budget: u64,
    pub seed: u64,
    pub facets: usize,
    /// Number of extreme-combination cells, `2^facets`.
    pub total_cells: f64,
    pub occupied_cells: usize,
    /// `occupied_cells / total_cells`.
    pub cell_density: f64,
    pub issues_found: IssueSet,
    /// Sampled users who sat at an extreme on at least one facet.
    pub users_at_any_extreme: u64,
}

/// Lower half of a scale is `index < ceil(len / 2)`.
fn upper_half(index: usize, len: usize) -> bool {
    index >= len.div_ceil(2)
}

struct Sample {
    cell: Vec<u64>,
    issues: IssueSet,
    any_extreme: bool,
}

fn draw_sample(
    facets: &[&FacetType],
    u: &UseCase,
    spotter: &impl Spotter,
    seed: u64,
    index: u64,
    cells: Option<&WeightedIndex<f64>>,
) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let target = cells.map(|w| w.sample(&mut rng));
    let mut cell = vec![0u64; facets.len().div_ceil(64).max(1)];
    let mut issues = IssueSet::new();
    let mut any_extreme = false;
    for (bit, facet) in facets.iter().enumerate() {
        let len = facet.len();
        let level = match target {
            None => rng.random_range(0..len),
            Some(t) => {
                let split = len.div_ceil(2);
                if (t >> bit) & 1 == 1 {
                    rng.random_range(split..len)
                } else {
                    rng.random_range(0..split)
                }
            }
        };
        if upper_half(level, len) {
            cell[bit / 64] |= 1 << (bit % 64);
        }
        let side = if level == 0 {
            Some(Side::Min)
        } else if level + 1 == len {
            Some(Side::Max)
        } else {
            None
        };
        if let Some(side) = side {
            any_extreme = true;
            for state in u.states() {
                issues.extend_from(&spotter.spot_side(facet.id(), side, state));
            }
        }
    }
    Sample {
        cell,
        issues,
        any_extreme,
    }
}

fn baseline_setup(
    dims: &[Dimension],
    weights: &SamplingWeights,
) -> Result<(Dimension, Option<WeightedIndex<f64>>), EvalError> {
    let joined = join_all(dims)?;
    let cells = match weights {
        SamplingWeights::Uniform => None,
        SamplingWeights::PerCell(w) => {
            let expected = 1usize
                .checked_shl(joined.len() as u32)
                .filter(|_| joined.len() < 32)
                .ok_or(EvalError::WeightLength {
                    got: w.len(),
                    expected: usize::MAX,
                })?;
            if w.len() != expected {
                return Err(EvalError::WeightLength {
                    got: w.len(),
                    expected,
                });
            }
            Some(WeightedIndex::new(w).map_err(|e| EvalError::BadWeights(e.to_string()))?)
        }
    };
    Ok((joined, cells))
}

fn baseline_report(budget: u64, seed: u64, facets: usize, samples: impl Iterator<Item = Sample>) -> BaselineReport {
    let mut occupied = BTreeSet::new();
    let mut issues = IssueSet::new();
    let mut at_extreme = 0;
    for s in samples {
        occupied.insert(s.cell);
        issues.extend_from(&s.issues);
        at_extreme += u64::from(s.any_extreme);
    }
    let total_cells = 2f64.powi(facets as i32);
    BaselineReport {
        budget,
        seed,
        facets,
        total_cells,
        occupied_cells: occupied.len(),
        cell_density: occupied.len() as f64 / total_cells,
        issues_found: issues,
        users_at_any_extreme: at_extreme,
    }
}

/// Value-based comparison point for the type-based evaluation: draws
/// `budget` users with one level per facet of the joined dimensions and
/// examines each in every state. Rules fire only for facets where the user
/// actually sits at an extreme. Each sample has its own RNG stream, so the
/// report is a function of `seed` alone.
pub fn sampling_baseline_sequential(
    dims: &[Dimension],
    u: &UseCase,
    spotter: &impl Spotter,
    budget: u64,
    seed: u64,
    weights: &SamplingWeights,
) -> Result<BaselineReport, EvalError> {
    let (joined, cells) = baseline_setup(dims, weights)?;
    let facets: Vec<&FacetType> = joined.facets().collect();
    let samples = (0..budget).map(|i| draw_sample(&facets, u, spotter, seed, i, cells.as_ref()));
    Ok(baseline_report(budget, seed, facets.len(), samples))
}

#[cfg(feature = "parallel")]
pub fn sampling_baseline_parallel(
    dims: &[Dimension],
    u: &UseCase,
    spotter: &impl Spotter,
    budget: u64,
    seed: u64,
    weights: &SamplingWeights,
) -> Result<BaselineReport, EvalError> {
    use rayon::prelude::*;

    let (joined, cells) = baseline_setup(dims, weights)?;
    let facets: Vec<&FacetType> = joined.facets().collect();
    let samples: Vec<Sample> = (0..budget)
        .into_par_iter()
        .map(|i| draw_sample(&facets, u, spotter, seed, i, cells.as_ref()))
        .collect();
    Ok(baseline_report(budget, seed, facets.len(), samples.into_iter()))
}

pub fn sampling_baseline(
    dims: &[Dimension],
    u: &UseCase,
    spotter: &impl Spotter,
    budget: u64,
    seed: u64,
    weights: &SamplingWeights,
) -> Result<BaselineReport, EvalError> {
    #[cfg(feature = "parallel")]
    {
        sampling_baseline_parallel(dims, u, spotter, budget, seed, weights)
    }
    #[cfg(not(feature = "parallel"))]
    {
        sampling_baseline_sequential(dims, u, spotter, budget, seed, weights)
    }
}
