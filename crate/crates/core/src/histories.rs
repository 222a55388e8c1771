//! History families on a discrete time grid, chain kets, the consistency
//! conditions and extended-Born-rule probabilities.
//!
//! A family is built from an initial state at `t_0`, a [`TimeGrid`] carrying
//! one propagator per interval, and a list of [`History`] values holding one
//! [`Event`] per later time. The initial event `[Ψ_0]` is implicit, as is the
//! zero-weight complement history `(I − [Ψ_0]) ⊙ I ⊙ … ⊙ I`.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::{embed_factor, ComplexMatrix, Ket, LinalgError, C64};
use crate::objects::{Isometry, ObjectError, Projector};
use crate::Tolerances;

/// Families whose history space (product of the post-`t_0` dimensions) is
/// larger than this are only checked for completeness structurally.
const EXACT_COMPLETENESS_MAX_DIM: usize = 1024;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HistoryError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error("time grid needs at least two times, got {0}")]
    TooFewTimes(usize),
    #[error("{labels} time labels for {propagators} propagators")]
    GridShape { labels: usize, propagators: usize },
    #[error("duplicate time label `{0}`")]
    DuplicateTime(String),
    #[error("space dimension mismatch at time `{time}`: expected {expected}, got {actual}")]
    DimensionMismatch {
        time: String,
        expected: usize,
        actual: usize,
    },
    #[error("initial state is not normalized (norm {0})")]
    NotNormalized(f64),
    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),
    #[error("family has no histories")]
    EmptyFamily,
    #[error("history has {actual} events, grid has {expected} times after t0")]
    SlotCount { expected: usize, actual: usize },
    #[error("event label `{label}` at time `{time}` names two different projectors")]
    LabelConflict { time: String, label: String },
    #[error("history `{0}` appears twice")]
    DuplicateHistory(String),
    #[error("factor {factor} out of range for a layout with {factors} factors")]
    UnknownFactor { factor: usize, factors: usize },
    #[error("event touches factor {0} twice")]
    OverlappingFactors(usize),
    #[error("family is not complete (deficit {deficit:e})")]
    Incomplete { deficit: f64 },
    #[error("family is inconsistent (max off-diagonal {:e} on pair {:?})", .0.max_off_diagonal, .0.worst_pair)]
    Inconsistent(Box<ConsistencyReport>),
    #[error("conditioning event has probability {0:e}")]
    ZeroConditioningEvent(f64),
    #[error("unknown time label `{0}`")]
    UnknownTime(String),
}

/// Tensor-factor dimensions of the space at one time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    factors: Vec<usize>,
}

impl Layout {
    pub fn simple(dim: usize) -> Self {
        Self { factors: vec![dim] }
    }

    pub fn product(factors: Vec<usize>) -> Self {
        assert!(!factors.is_empty() && factors.iter().all(|&d| d > 0));
        Self { factors }
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().product()
    }
}

/// Ordered symbolic times `t_0 < … < t_n` with the propagator for each
/// interval. A propagator maps the space at `t_i` into the space at
/// `t_{i+1}`: a unitary when both have the same dimension, otherwise a
/// measurement isometry.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    labels: Vec<String>,
    layouts: Vec<Layout>,
    propagators: Vec<Isometry>,
}

impl TimeGrid {
    pub fn new(labels: Vec<String>, layouts: Vec<Layout>, propagators: Vec<Isometry>) -> Result<Self, HistoryError> {
        if labels.len() < 2 {
            return Err(HistoryError::TooFewTimes(labels.len()));
        }
        if propagators.len() + 1 != labels.len() || layouts.len() != labels.len() {
            return Err(HistoryError::GridShape {
                labels: labels.len(),
                propagators: propagators.len(),
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(HistoryError::DuplicateTime(l.clone()));
            }
        }
        for (i, p) in propagators.iter().enumerate() {
            if p.source_dim() != layouts[i].dim() {
                return Err(HistoryError::DimensionMismatch {
                    time: labels[i].clone(),
                    expected: layouts[i].dim(),
                    actual: p.source_dim(),
                });
            }
            if p.target_dim() != layouts[i + 1].dim() {
                return Err(HistoryError::DimensionMismatch {
                    time: labels[i + 1].clone(),
                    expected: layouts[i + 1].dim(),
                    actual: p.target_dim(),
                });
            }
        }
        Ok(Self {
            labels,
            layouts,
            propagators,
        })
    }

    /// Grid `t0, t1, …` on a single space with identity propagators.
    pub fn trivial(layout: Layout, times: usize) -> Result<Self, HistoryError> {
        let n = layout.dim();
        Self::new(
            default_time_labels(times),
            vec![layout; times],
            vec![Isometry::identity(n); times.saturating_sub(1)],
        )
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn layouts(&self) -> &[Layout] {
        &self.layouts
    }

    pub fn propagators(&self) -> &[Isometry] {
        &self.propagators
    }

    /// Number of intervals `n`.
    pub fn intervals(&self) -> usize {
        self.propagators.len()
    }

    pub fn position(&self, time: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == time)
    }
}

/// `t0, t1, …, t{n-1}`.
pub fn default_time_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| alloc::format!("t{i}")).collect()
}

/// Label of an event: one atom per tensor factor it constrains, or a single
/// atom for a plain event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventLabel(pub Vec<String>);

impl EventLabel {
    pub fn atom(s: impl Into<String>) -> Self {
        Self(vec![s.into()])
    }

    /// Whether every atom of `pattern` occurs in `self`.
    pub fn contains_all(&self, pattern: &EventLabel) -> bool {
        pattern.0.iter().all(|a| self.0.contains(a))
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("&")?;
            }
            f.write_str(a)?;
        }
        Ok(())
    }
}

impl From<&str> for EventLabel {
    fn from(s: &str) -> Self {
        EventLabel(s.split('&').map(ToString::to_string).collect())
    }
}

/// The operator part of an event. Local events name projectors on single
/// tensor factors; factors they leave out carry the identity.
#[derive(Debug, Clone, PartialEq)]
pub enum EventOperator {
    Full(Projector),
    Local(Vec<(usize, Projector)>),
}

/// A property at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub label: EventLabel,
    pub operator: EventOperator,
}

impl Event {
    pub fn full(label: impl Into<String>, projector: Projector) -> Self {
        Self {
            label: EventLabel::atom(label),
            operator: EventOperator::Full(projector),
        }
    }

    /// Projector on factor `factor`, promoted by identities on the rest.
    pub fn local(label: impl Into<String>, factor: usize, projector: Projector) -> Self {
        Self {
            label: EventLabel::atom(label),
            operator: EventOperator::Local(vec![(factor, projector)]),
        }
    }

    /// The trivial event `I`.
    pub fn identity() -> Self {
        Self {
            label: EventLabel::atom("I"),
            operator: EventOperator::Local(Vec::new()),
        }
    }

    /// Conjunction of two local events on disjoint factors.
    pub fn and(&self, other: &Event) -> Result<Event, HistoryError> {
        let (EventOperator::Local(a), EventOperator::Local(b)) = (&self.operator, &other.operator) else {
            return Err(HistoryError::OverlappingFactors(0));
        };
        let mut factors = a.clone();
        for (f, p) in b {
            if factors.iter().any(|(g, _)| g == f) {
                return Err(HistoryError::OverlappingFactors(*f));
            }
            factors.push((*f, p.clone()));
        }
        let mut atoms = self.label.0.clone();
        atoms.extend(other.label.0.iter().cloned());
        Ok(Event {
            label: EventLabel(atoms),
            operator: EventOperator::Local(factors),
        })
    }

    /// The full-space projector on `layout`.
    pub fn resolve(&self, layout: &Layout) -> Result<ComplexMatrix, HistoryError> {
        match &self.operator {
            EventOperator::Full(p) => {
                if p.dim() != layout.dim() {
                    return Err(HistoryError::DimensionMismatch {
                        time: String::new(),
                        expected: layout.dim(),
                        actual: p.dim(),
                    });
                }
                Ok(p.matrix().clone())
            }
            EventOperator::Local(factors) => {
                let n = layout.dim();
                let mut m = ComplexMatrix::identity(n);
                for (f, p) in factors {
                    if *f >= layout.factors().len() {
                        return Err(HistoryError::UnknownFactor {
                            factor: *f,
                            factors: layout.factors().len(),
                        });
                    }
                    m = m.try_mul(&embed_factor(layout.factors(), *f, p.matrix())?)?;
                }
                Ok(m)
            }
        }
    }
}

/// One history: events at `t_1, …, t_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub events: Vec<Event>,
}

impl History {
    pub fn new(events: Vec<Event>) -> Self {
        Self { events }
    }

    pub fn label(&self) -> HistoryLabel {
        HistoryLabel(self.events.iter().map(|e| e.label.clone()).collect())
    }
}

/// Composite label `α = (α_1, …, α_n)` of a history.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HistoryLabel(pub Vec<EventLabel>);

impl fmt::Display for HistoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" , ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Pure state or ensemble `{(p_i, |ψ_i⟩)}` at `t_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Pure(Ket),
    Ensemble(Vec<(f64, Ket)>),
}

impl InitialState {
    pub fn validate(&self, tol: f64) -> Result<(), HistoryError> {
        let members = self.members();
        let dim = members[0].1.dim();
        let mut total = 0.0;
        for (p, k) in &members {
            if !p.is_finite() || *p < 0.0 {
                return Err(HistoryError::InvalidEnsemble(alloc::format!(
                    "weight {p} is not a probability"
                )));
            }
            if k.dim() != dim {
                return Err(HistoryError::InvalidEnsemble("members differ in dimension".into()));
            }
            if !k.is_normalized(tol) {
                return Err(HistoryError::NotNormalized(k.norm()));
            }
            total += p;
        }
        if (total - 1.0).abs() > tol {
            return Err(HistoryError::InvalidEnsemble(alloc::format!("weights sum to {total}")));
        }
        Ok(())
    }

    pub fn members(&self) -> Vec<(f64, &Ket)> {
        match self {
            InitialState::Pure(k) => vec![(1.0, k)],
            InitialState::Ensemble(m) => m.iter().map(|(p, k)| (*p, k)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialState::Pure(k) => k.dim(),
            InitialState::Ensemble(m) => m.first().map_or(0, |(_, k)| k.dim()),
        }
    }

    /// `Tr(ρ X)`.
    pub fn expectation(&self, x: &ComplexMatrix) -> Result<f64, LinalgError> {
        let mut acc = 0.0;
        for (p, k) in self.members() {
            acc += p * k.expectation(x)?.re;
        }
        Ok(acc)
    }

    /// `ρ = Σ p_i [ψ_i]`.
    pub fn density_matrix(&self) -> ComplexMatrix {
        let n = self.dim();
        self.members()
            .into_iter()
            .fold(ComplexMatrix::zeros(n, n), |acc, (p, k)| {
                &acc + &k.projector().scale_real(p)
            })
    }
}

/// Initial state, time grid and product histories with the implicit
/// complement history.
#[derive(Debug, Clone)]
pub struct HistoryFamily {
    initial: InitialState,
    grid: TimeGrid,
    histories: Vec<History>,
    include_complement: bool,
    resolved: Vec<Vec<ComplexMatrix>>,
}

impl HistoryFamily {
    /// Validates dimensions, label coherence and completeness.
    pub fn new(
        initial: InitialState,
        grid: TimeGrid,
        histories: Vec<History>,
        tol: &Tolerances,
    ) -> Result<Self, HistoryError> {
        if histories.is_empty() {
            return Err(HistoryError::EmptyFamily);
        }
        initial.validate(tol.derived())?;
        if initial.dim() != grid.layouts[0].dim() {
            return Err(HistoryError::DimensionMismatch {
                time: grid.labels[0].clone(),
                expected: grid.layouts[0].dim(),
                actual: initial.dim(),
            });
        }
        let n = grid.intervals();
        let mut resolved = Vec::with_capacity(histories.len());
        let mut by_label: Vec<BTreeMap<&EventLabel, &ComplexMatrix>> = vec![BTreeMap::new(); n];
        let mut seen = BTreeMap::new();
        for h in &histories {
            if h.events.len() != n {
                return Err(HistoryError::SlotCount {
                    expected: n,
                    actual: h.events.len(),
                });
            }
            let mats = h
                .events
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    e.resolve(&grid.layouts[i + 1]).map_err(|err| match err {
                        HistoryError::DimensionMismatch { expected, actual, .. } => HistoryError::DimensionMismatch {
                            time: grid.labels[i + 1].clone(),
                            expected,
                            actual,
                        },
                        other => other,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if seen.insert(h.label(), ()).is_some() {
                return Err(HistoryError::DuplicateHistory(h.label().to_string()));
            }
            resolved.push(mats);
        }
        for (h, mats) in histories.iter().zip(&resolved) {
            for (i, (e, m)) in h.events.iter().zip(mats).enumerate() {
                if let Some(prev) = by_label[i].insert(&e.label, m) {
                    if prev.max_abs_diff(m).unwrap_or(f64::INFINITY) > tol.numeric {
                        return Err(HistoryError::LabelConflict {
                            time: grid.labels[i + 1].clone(),
                            label: e.label.to_string(),
                        });
                    }
                }
            }
        }
        let family = Self {
            initial,
            grid,
            histories,
            include_complement: true,
            resolved,
        };
        family.check_completeness(tol.derived())?;
        Ok(family)
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn include_complement(&self) -> bool {
        self.include_complement
    }

    /// Labels `t_1 … t_n` of the event slots.
    pub fn slot_times(&self) -> &[String] {
        &self.grid.labels[1..]
    }

    pub fn labels(&self) -> Vec<HistoryLabel> {
        self.histories.iter().map(History::label).collect()
    }

    /// Event projectors of history `index` on the full space at each time.
    pub fn resolved_events(&self, index: usize) -> &[ComplexMatrix] {
        &self.resolved[index]
    }

    fn check_completeness(&self, tol: f64) -> Result<(), HistoryError> {
        let idx: Vec<usize> = (0..self.histories.len()).collect();
        let n = self.grid.intervals();
        let prefix = self.tree_deficit(&idx, 0, n, true)?;
        if prefix <= tol {
            return Ok(());
        }
        let suffix = self.tree_deficit(&idx, 0, n, false)?;
        if suffix <= tol {
            return Ok(());
        }
        let space: usize = self.grid.layouts[1..].iter().map(Layout::dim).product();
        if space > EXACT_COMPLETENESS_MAX_DIM {
            return Err(HistoryError::Incomplete {
                deficit: prefix.min(suffix),
            });
        }
        let mut sum = ComplexMatrix::zeros(space, space);
        for mats in &self.resolved {
            let mut term = mats[0].clone();
            for m in &mats[1..] {
                term = term.kron(m);
            }
            sum = &sum + &term;
        }
        let deficit = sum.identity_defect()?;
        if deficit > tol {
            Err(HistoryError::Incomplete { deficit })
        } else {
            Ok(())
        }
    }

    /// Largest identity deficit met while walking the family as a tree,
    /// from `t_1` forward (`forward`) or from `t_n` backward. At each node the
    /// distinct events following (preceding) a fixed choice must sum to `I`.
    fn tree_deficit(&self, members: &[usize], depth: usize, n: usize, forward: bool) -> Result<f64, HistoryError> {
        if depth == n {
            return Ok(if members.len() == 1 { 0.0 } else { f64::INFINITY });
        }
        let slot = if forward { depth } else { n - 1 - depth };
        let mut groups: BTreeMap<&EventLabel, Vec<usize>> = BTreeMap::new();
        for &h in members {
            groups.entry(&self.histories[h].events[slot].label).or_default().push(h);
        }
        let dim = self.grid.layouts[slot + 1].dim();
        let mut sum = ComplexMatrix::zeros(dim, dim);
        for hs in groups.values() {
            sum = &sum + &self.resolved[hs[0]][slot];
        }
        let mut worst = sum.identity_defect()?;
        for hs in groups.values() {
            worst = worst.max(self.tree_deficit(hs, depth + 1, n, forward)?);
        }
        Ok(worst)
    }
}

/// `F_n T(t_n,t_{n−1}) ⋯ F_1 T(t_1,t_0) |ψ⟩` for history `index`.
pub fn chain_ket_for(family: &HistoryFamily, index: usize, psi: &Ket) -> Result<Ket, HistoryError> {
    let mut v = psi.clone();
    for (t, f) in family.grid.propagators.iter().zip(&family.resolved[index]) {
        v = t.apply(&v)?;
        v = f.try_apply(&v)?;
    }
    Ok(v)
}

/// Chain ket of `history`, which must be one of the family's histories, for
/// a pure initial state (the first member of an ensemble otherwise).
pub fn chain_ket(family: &HistoryFamily, history: &History) -> Result<Ket, HistoryError> {
    let index = family
        .histories
        .iter()
        .position(|h| h == history)
        .ok_or_else(|| HistoryError::DuplicateHistory(history.label().to_string()))?;
    let members = family.initial.members();
    chain_ket_for(family, index, members[0].1)
}

/// Chain kets of every history (per ensemble member) and the weighted Gram
/// matrix `D(α, α') = Σ_i p_i ⟨Y_i^α|Y_i^α'⟩`.
#[derive(Debug, Clone)]
pub struct ChainKetTable {
    pub members: Vec<(f64, Vec<Ket>)>,
    pub gram: ComplexMatrix,
}

pub fn chain_kets(family: &HistoryFamily) -> Result<ChainKetTable, HistoryError> {
    let h = family.histories.len();
    let mut gram = ComplexMatrix::zeros(h, h);
    let mut members = Vec::new();
    for (p, psi) in family.initial.members() {
        let kets = (0..h)
            .map(|i| chain_ket_for(family, i, psi))
            .collect::<Result<Vec<_>, _>>()?;
        for a in 0..h {
            for b in a..h {
                let z = kets[a].inner(&kets[b])? * p;
                gram[(a, b)] += z;
                if a != b {
                    gram[(b, a)] += z.conj();
                }
            }
        }
        members.push((p, kets));
    }
    for a in 0..h {
        gram[(a, a)] = C64::new(gram[(a, a)].re, 0.0);
    }
    Ok(ChainKetTable { members, gram })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Consistent,
    /// Every chain ket is (numerically) zero.
    TriviallyConsistent,
    Inconsistent,
}

impl Verdict {
    pub fn is_consistent(self) -> bool {
        !matches!(self, Verdict::Inconsistent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::TriviallyConsistent => "trivially consistent",
            Verdict::Inconsistent => "inconsistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub labels: Vec<HistoryLabel>,
    pub gram: ComplexMatrix,
    pub max_diagonal: f64,
    pub max_off_diagonal: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub verdict: Verdict,
    pub tolerance: f64,
}

/// Consistent when the largest off-diagonal Gram entry is at most
/// `tol × max diagonal`.
pub fn check_consistency(family: &HistoryFamily, tol: f64) -> Result<ConsistencyReport, HistoryError> {
    let table = chain_kets(family)?;
    let g = &table.gram;
    let h = g.rows();
    let max_diagonal = (0..h).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    let mut max_off_diagonal = 0.0;
    let mut worst_pair = None;
    for a in 0..h {
        for b in a + 1..h {
            let m = g[(a, b)].norm();
            if m > max_off_diagonal {
                max_off_diagonal = m;
                worst_pair = Some((a, b));
            }
        }
    }
    let verdict = if max_diagonal <= tol {
        Verdict::TriviallyConsistent
    } else if max_off_diagonal <= tol * max_diagonal {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Ok(ConsistencyReport {
        labels: family.labels(),
        gram: table.gram,
        max_diagonal,
        max_off_diagonal,
        worst_pair,
        verdict,
        tolerance: tol,
    })
}

/// History probabilities, keyed by composite label.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    pub times: Vec<String>,
    pub entries: Vec<(HistoryLabel, f64)>,
    /// False when the table was produced for an inconsistent family.
    pub normative: bool,
}

impl ProbabilityTable {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn get(&self, label: &HistoryLabel) -> Option<f64> {
        self.entries.iter().find(|(l, _)| l == label).map(|(_, p)| *p)
    }

    /// Probability of every history matching `pattern`.
    pub fn probability(&self, pattern: &EventPattern) -> Result<f64, HistoryError> {
        let slots = pattern.resolve(&self.times)?;
        Ok(self
            .entries
            .iter()
            .filter(|(l, _)| matches(l, &slots))
            .map(|(_, p)| p)
            .sum())
    }

    /// Labels occurring at `time`, in first-appearance order.
    pub fn labels_at(&self, time: &str) -> Result<Vec<EventLabel>, HistoryError> {
        let slot = self
            .times
            .iter()
            .position(|t| t == time)
            .ok_or_else(|| HistoryError::UnknownTime(time.into()))?;
        let mut out: Vec<EventLabel> = Vec::new();
        for (l, _) in &self.entries {
            if !out.contains(&l.0[slot]) {
                out.push(l.0[slot].clone());
            }
        }
        Ok(out)
    }
}

/// Selects histories by per-time label atoms; unnamed times are wildcards.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventPattern {
    pub constraints: Vec<(String, EventLabel)>,
}

impl EventPattern {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn at(mut self, time: impl Into<String>, label: impl Into<EventLabel>) -> Self {
        self.constraints.push((time.into(), label.into()));
        self
    }

    pub fn and(&self, other: &EventPattern) -> EventPattern {
        let mut constraints = self.constraints.clone();
        constraints.extend(other.constraints.iter().cloned());
        EventPattern { constraints }
    }

    fn resolve(&self, times: &[String]) -> Result<Vec<(usize, &EventLabel)>, HistoryError> {
        self.constraints
            .iter()
            .map(|(t, l)| {
                times
                    .iter()
                    .position(|x| x == t)
                    .map(|i| (i, l))
                    .ok_or_else(|| HistoryError::UnknownTime(t.clone()))
            })
            .collect()
    }
}

impl From<String> for EventLabel {
    fn from(s: String) -> Self {
        EventLabel::from(s.as_str())
    }
}

fn matches(label: &HistoryLabel, slots: &[(usize, &EventLabel)]) -> bool {
    slots.iter().all(|(i, l)| label.0[*i].contains_all(l))
}

fn probabilities_from(family: &HistoryFamily, table: &ChainKetTable, normative: bool) -> ProbabilityTable {
    let entries = family
        .labels()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, table.gram[(i, i)].re.clamp(0.0, 1.0)))
        .collect();
    ProbabilityTable {
        times: family.slot_times().to_vec(),
        entries,
        normative,
    }
}

/// Extended Born rule `Pr(Y^α) = ⟨Y^α|Y^α⟩`; refuses inconsistent families.
pub fn assign_probabilities(family: &HistoryFamily, tol: &Tolerances) -> Result<ProbabilityTable, HistoryError> {
    let report = check_consistency(family, tol.consistency)?;
    if !report.verdict.is_consistent() {
        return Err(HistoryError::Inconsistent(Box::new(report)));
    }
    let table = chain_kets(family)?;
    Ok(probabilities_from(family, &table, true))
}

/// Diagnostic variant that skips the consistency gate; the table is marked
/// non-normative when the family is inconsistent.
pub fn assign_probabilities_unchecked(
    family: &HistoryFamily,
    tol: &Tolerances,
) -> Result<ProbabilityTable, HistoryError> {
    let report = check_consistency(family, tol.consistency)?;
    let table = chain_kets(family)?;
    Ok(probabilities_from(family, &table, report.verdict.is_consistent()))
}

/// `Pr(target ∧ given) / Pr(given)`.
pub fn conditional_probability(
    table: &ProbabilityTable,
    given: &EventPattern,
    target: &EventPattern,
    tol: f64,
) -> Result<f64, HistoryError> {
    let denom = table.probability(given)?;
    if denom <= tol {
        return Err(HistoryError::ZeroConditioningEvent(denom));
    }
    let joint = table.probability(&given.and(target))?;
    Ok((joint / denom).clamp(0.0, 1.0))
}

/// Sums probabilities over the discarded time slots.
pub fn marginalize(table: &ProbabilityTable, keep: &[&str]) -> Result<ProbabilityTable, HistoryError> {
    let mut slots = Vec::new();
    for k in keep {
        let i = table
            .times
            .iter()
            .position(|t| t == k)
            .ok_or_else(|| HistoryError::UnknownTime((*k).into()))?;
        if !slots.contains(&i) {
            slots.push(i);
        }
    }
    slots.sort_unstable();
    let mut entries: Vec<(HistoryLabel, f64)> = Vec::new();
    for (l, p) in &table.entries {
        let reduced = HistoryLabel(slots.iter().map(|&i| l.0[i].clone()).collect());
        match entries.iter_mut().find(|(r, _)| *r == reduced) {
            Some((_, acc)) => *acc += p,
            None => entries.push((reduced, *p)),
        }
    }
    Ok(ProbabilityTable {
        times: slots.iter().map(|&i| table.times[i].clone()).collect(),
        entries,
        normative: table.normative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objects::Isometry;
    use core::f64::consts::FRAC_1_SQRT_2 as S;

    fn k(v: &[f64]) -> Ket {
        Ket::from_real(v).unwrap()
    }

    fn proj(v: &[f64]) -> Projector {
        Projector::from_ket(&k(v), 1e-10).unwrap()
    }

    fn two_slot_family(initial: Ket, first: [(&str, Projector); 2], second: [(&str, Projector); 2]) -> HistoryFamily {
        let grid = TimeGrid::trivial(Layout::simple(2), 3).unwrap();
        let mut hs = Vec::new();
        for (a, pa) in &first {
            for (b, pb) in &second {
                hs.push(History::new(vec![
                    Event::full(*a, pa.clone()),
                    Event::full(*b, pb.clone()),
                ]));
            }
        }
        HistoryFamily::new(InitialState::Pure(initial), grid, hs, &Tolerances::default()).unwrap()
    }

    #[test]
    fn two_time_chain_ket_is_projected_state() {
        let grid = TimeGrid::trivial(Layout::simple(2), 2).unwrap();
        let psi = k(&[0.6, 0.8]);
        let h = History::new(vec![Event::full("zp", proj(&[1.0, 0.0]))]);
        let other = History::new(vec![Event::full("zm", proj(&[0.0, 1.0]))]);
        let fam = HistoryFamily::new(
            InitialState::Pure(psi),
            grid,
            vec![h.clone(), other],
            &Tolerances::default(),
        )
        .unwrap();
        let y = chain_ket(&fam, &h).unwrap();
        assert!(y.max_abs_diff(&k(&[0.6, 0.0])).unwrap() < 1e-15);
    }

    #[test]
    fn incomplete_family_rejected() {
        let grid = TimeGrid::trivial(Layout::simple(2), 2).unwrap();
        let h = History::new(vec![Event::full("zp", proj(&[1.0, 0.0]))]);
        let err = HistoryFamily::new(
            InitialState::Pure(k(&[1.0, 0.0])),
            grid,
            vec![h],
            &Tolerances::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HistoryError::Incomplete { .. }));
    }

    #[test]
    fn duplicate_and_conflicting_labels() {
        let grid = TimeGrid::trivial(Layout::simple(2), 2).unwrap();
        let a = History::new(vec![Event::full("p", proj(&[1.0, 0.0]))]);
        let b = History::new(vec![Event::full("p", proj(&[0.0, 1.0]))]);
        let err = HistoryFamily::new(
            InitialState::Pure(k(&[1.0, 0.0])),
            grid,
            vec![a, b],
            &Tolerances::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HistoryError::DuplicateHistory(_)));
    }

    #[test]
    fn label_conflict_detected() {
        let grid = TimeGrid::trivial(Layout::simple(2), 3).unwrap();
        let zp = proj(&[1.0, 0.0]);
        let zm = proj(&[0.0, 1.0]);
        let hs = vec![
            History::new(vec![Event::full("a", zp.clone()), Event::full("x", zp.clone())]),
            History::new(vec![Event::full("a", zp.clone()), Event::full("y", zm.clone())]),
            History::new(vec![Event::full("b", zm.clone()), Event::full("x", zm.clone())]),
            History::new(vec![Event::full("b", zm.clone()), Event::full("y", zp.clone())]),
        ];
        let err = HistoryFamily::new(InitialState::Pure(k(&[1.0, 0.0])), grid, hs, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, HistoryError::LabelConflict { .. }));
    }

    #[test]
    fn ordering_of_noncommuting_events_matters() {
        let xp = proj(&[S, S]);
        let xm = proj(&[S, -S]);
        let zp = proj(&[1.0, 0.0]);
        let zm = proj(&[0.0, 1.0]);
        // x events then z events starting from x+: only the x+ branch survives
        let fam = two_slot_family(
            k(&[S, S]),
            [("xp", xp.clone()), ("xm", xm.clone())],
            [("zp", zp.clone()), ("zm", zm.clone())],
        );
        let rep = check_consistency(&fam, 1e-8).unwrap();
        assert_eq!(rep.verdict, Verdict::Consistent);
        let fam = two_slot_family(k(&[1.0, 0.0]), [("zp", zp), ("zm", zm)], [("xp", xp), ("xm", xm)]);
        let rep = check_consistency(&fam, 1e-8).unwrap();
        assert_eq!(rep.verdict, Verdict::Consistent, "z+ start kills the z− branch");
    }

    #[test]
    fn inconsistent_family_refused_unless_unchecked() {
        let xp = proj(&[S, S]);
        let xm = proj(&[S, -S]);
        let zp = proj(&[1.0, 0.0]);
        let zm = proj(&[0.0, 1.0]);
        let fam = two_slot_family(k(&[S, S]), [("zp", zp), ("zm", zm)], [("xp", xp), ("xm", xm)]);
        let err = assign_probabilities(&fam, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, HistoryError::Inconsistent(_)));
        let table = assign_probabilities_unchecked(&fam, &Tolerances::default()).unwrap();
        assert!(!table.normative);
    }

    #[test]
    fn conditional_and_marginal_queries() {
        let zp = proj(&[1.0, 0.0]);
        let zm = proj(&[0.0, 1.0]);
        let fam = two_slot_family(
            k(&[0.6, 0.8]),
            [("zp", zp.clone()), ("zm", zm.clone())],
            [("Mp", zp), ("Mm", zm)],
        );
        let table = assign_probabilities(&fam, &Tolerances::default()).unwrap();
        assert!((table.total() - 1.0).abs() < 1e-12);
        let c = conditional_probability(
            &table,
            &EventPattern::any().at("t2", "Mp"),
            &EventPattern::any().at("t1", "zp"),
            1e-12,
        )
        .unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        let m = marginalize(&table, &["t2"]).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert!((m.entries[0].1 - 0.36).abs() < 1e-12);
        assert!(matches!(
            conditional_probability(&table, &EventPattern::any().at("t9", "Mp"), &EventPattern::any(), 1e-12),
            Err(HistoryError::UnknownTime(_))
        ));
        let zero = conditional_probability(
            &table,
            &EventPattern::any().at("t1", "zp").at("t2", "Mm"),
            &EventPattern::any(),
            1e-12,
        );
        assert!(matches!(zero, Err(HistoryError::ZeroConditioningEvent(_))));
    }

    #[test]
    fn single_history_marginal() {
        let grid = TimeGrid::trivial(Layout::simple(2), 2).unwrap();
        let h = History::new(vec![Event::identity()]);
        let fam = HistoryFamily::new(InitialState::Pure(k(&[S, S])), grid, vec![h], &Tolerances::default()).unwrap();
        let table = assign_probabilities(&fam, &Tolerances::default()).unwrap();
        let m = marginalize(&table, &[]).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert!((m.entries[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_events_promote_with_identity() {
        let layout = Layout::product(vec![2, 2]);
        let e = Event::local("zp_b", 1, proj(&[1.0, 0.0]));
        let m = e.resolve(&layout).unwrap();
        assert_eq!(m, ComplexMatrix::identity(2).kron(&k(&[1.0, 0.0]).projector()));
        let both = Event::local("zp_a", 0, proj(&[1.0, 0.0])).and(&e).unwrap();
        assert_eq!(both.label.to_string(), "zp_a&zp_b");
        assert!(Event::local("x", 2, proj(&[1.0, 0.0])).resolve(&layout).is_err());
        assert!(e.and(&e).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(
            TimeGrid::new(vec!["t0".into()], vec![Layout::simple(2)], vec![]),
            Err(HistoryError::TooFewTimes(1))
        ));
        let j = Isometry::new(ComplexMatrix::identity(3), 1e-10).unwrap();
        assert!(matches!(
            TimeGrid::new(
                vec!["t0".into(), "t1".into()],
                vec![Layout::simple(2), Layout::simple(3)],
                vec![j]
            ),
            Err(HistoryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ensemble_probabilities_are_weighted() {
        let grid = TimeGrid::trivial(Layout::simple(2), 2).unwrap();
        let hs = vec![
            History::new(vec![Event::full("zp", proj(&[1.0, 0.0]))]),
            History::new(vec![Event::full("zm", proj(&[0.0, 1.0]))]),
        ];
        let init = InitialState::Ensemble(vec![(0.25, k(&[1.0, 0.0])), (0.75, k(&[S, S]))]);
        let fam = HistoryFamily::new(init, grid, hs, &Tolerances::default()).unwrap();
        let t = assign_probabilities(&fam, &Tolerances::default()).unwrap();
        assert!((t.entries[0].1 - (0.25 + 0.75 * 0.5)).abs() < 1e-12);
        let bad = InitialState::Ensemble(vec![(0.5, k(&[1.0, 0.0]))]);
        assert!(matches!(bad.validate(1e-9), Err(HistoryError::InvalidEnsemble(_))));
    }
}
