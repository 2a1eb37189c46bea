//! Knowledge-base representation: variables, weighted causal arcs and the
//! compiled, immutable [`KnowledgeBase`] the inference engine reasons over.

mod compile;
mod format;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::{compile_kb, decompose, SubDucg};
pub use format::{parse_kb, serialize_kb};
pub use validate::{validate_kb, RuleCode, Violation};

/// Index of a state within a variable. State 0 is always the normal state.
pub type StateId = u32;

/// Tolerance used when checking complement and column-sum identities.
pub const PROBABILITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VarKind {
    /// Root cause; the hypothesis variable.
    B,
    /// Consequence variable, usually bound to a measure point.
    X,
    /// Default (unspecified) cause of an X variable.
    D,
    /// Integrated cause of a group of B variables. Parsed but not evaluable.
    BX,
    /// Logic gate. Parsed but not evaluable.
    G,
}

impl VarKind {
    pub fn symbol(self) -> &'static str {
        match self {
            VarKind::B => "B",
            VarKind::X => "X",
            VarKind::D => "D",
            VarKind::BX => "BX",
            VarKind::G => "G",
        }
    }

    pub fn is_supported(self) -> bool {
        matches!(self, VarKind::B | VarKind::X | VarKind::D)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Normal,
    Abnormal,
}

/// Half-open value range `(lower, upper]` that selects a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn contains(&self, value: f64) -> bool {
        value > self.lower && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDef {
    pub id: StateId,
    pub name: String,
    pub severity: Severity,
    pub interval: Option<Interval>,
}

impl StateDef {
    pub fn new(id: StateId, name: impl Into<String>) -> Self {
        let severity = if id == 0 { Severity::Normal } else { Severity::Abnormal };
        Self { id, name: name.into(), severity, interval: None }
    }

    pub fn with_interval(mut self, lower: f64, upper: f64) -> Self {
        self.interval = Some(Interval::new(lower, upper));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub kind: VarKind,
    pub label: String,
    pub states: Vec<StateDef>,
    pub measure_point: Option<String>,
    /// Prior probability of each abnormal state; B variables only.
    pub prior: Option<BTreeMap<StateId, f64>>,
}

impl Variable {
    pub fn new(id: u32, kind: VarKind, label: impl Into<String>, states: Vec<StateDef>) -> Self {
        Self {
            id: VarId(id),
            kind,
            label: label.into(),
            states,
            measure_point: None,
            prior: None,
        }
    }

    pub fn with_prior(mut self, prior: impl IntoIterator<Item = (StateId, f64)>) -> Self {
        self.prior = Some(prior.into_iter().collect());
        self
    }

    pub fn with_measure_point(mut self, key: impl Into<String>) -> Self {
        self.measure_point = Some(key.into());
        self
    }

    pub fn state(&self, id: StateId) -> Option<&StateDef> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn has_state(&self, id: StateId) -> bool {
        self.state(id).is_some()
    }

    pub fn is_abnormal(&self, id: StateId) -> bool {
        self.state(id).is_some_and(|s| s.severity == Severity::Abnormal)
    }

    pub fn abnormal_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.states
            .iter()
            .filter(|s| s.severity == Severity::Abnormal)
            .map(|s| s.id)
    }

    pub fn prior_of(&self, state: StateId) -> Option<f64> {
        self.prior.as_ref().and_then(|p| p.get(&state).copied())
    }

    pub fn has_intervals(&self) -> bool {
        self.states.iter().any(|s| s.interval.is_some())
    }

    /// `B1`, `X71`, ...
    pub fn symbol(&self) -> String {
        format!("{}{}", self.kind.symbol(), self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateLiteral {
    pub var: VarId,
    pub state: StateId,
}

impl StateLiteral {
    pub fn new(var: VarId, state: StateId) -> Self {
        Self { var, state }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Undetermined,
}

/// Disjunction of conjunctions of variable-state literals guarding a conditional arc.
///
/// Stored in canonical form: literals sorted within a clause, clauses sorted and
/// deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    clauses: Vec<Vec<StateLiteral>>,
}

impl Condition {
    pub fn all(literals: impl IntoIterator<Item = StateLiteral>) -> Self {
        Self::any(vec![literals.into_iter().collect()])
    }

    pub fn any(clauses: Vec<Vec<StateLiteral>>) -> Self {
        let mut clauses: Vec<Vec<StateLiteral>> = clauses
            .into_iter()
            .map(|mut c| {
                c.sort();
                c.dedup();
                c
            })
            .collect();
        clauses.sort();
        clauses.dedup();
        Self { clauses }
    }

    pub fn clauses(&self) -> &[Vec<StateLiteral>] {
        &self.clauses
    }

    pub fn literals(&self) -> impl Iterator<Item = &StateLiteral> {
        self.clauses.iter().flatten()
    }

    /// Three-valued evaluation: unobserved variables make a literal undetermined.
    pub fn evaluate(&self, observed: &BTreeMap<VarId, StateId>) -> Truth {
        let mut any_undetermined = false;
        for clause in &self.clauses {
            let mut clause_truth = Truth::True;
            for lit in clause {
                match observed.get(&lit.var) {
                    Some(&s) if s == lit.state => {}
                    Some(_) => {
                        clause_truth = Truth::False;
                        break;
                    }
                    None => clause_truth = Truth::Undetermined,
                }
            }
            match clause_truth {
                Truth::True => return Truth::True,
                Truth::Undetermined => any_undetermined = true,
                Truth::False => {}
            }
        }
        if any_undetermined {
            Truth::Undetermined
        } else {
            Truth::False
        }
    }
}

/// Intensity matrix of a functional event, keyed child state -> parent state.
///
/// Only the entries the author supplied are stored; the child-normal row is
/// derived as the complement of each parent column's abnormal mass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntensityMatrix {
    entries: BTreeMap<StateId, BTreeMap<StateId, f64>>,
}

impl IntensityMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, child_state: StateId, parent_state: StateId, p: f64) {
        self.entries.entry(child_state).or_default().insert(parent_state, p);
    }

    pub fn with(mut self, child_state: StateId, parent_state: StateId, p: f64) -> Self {
        self.set(child_state, parent_state, p);
        self
    }

    pub fn get(&self, child_state: StateId, parent_state: StateId) -> Option<f64> {
        self.entries.get(&child_state)?.get(&parent_state).copied()
    }

    pub fn rows(&self) -> &BTreeMap<StateId, BTreeMap<StateId, f64>> {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, StateId, f64)> + '_ {
        self.entries
            .iter()
            .flat_map(|(&k, row)| row.iter().map(move |(&j, &p)| (k, j, p)))
    }

    /// Sum of the explicit abnormal-child entries in parent column `j`.
    pub fn abnormal_mass(&self, parent_state: StateId) -> f64 {
        self.entries
            .iter()
            .filter(|(&k, _)| k != 0)
            .filter_map(|(_, row)| row.get(&parent_state))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(|r| r.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalArc {
    pub child: VarId,
    pub parent: VarId,
    /// Relative weight `r_{n;i}`.
    pub weight: f64,
    pub matrix: IntensityMatrix,
    pub condition: Option<Condition>,
}

impl CausalArc {
    pub fn new(child: u32, parent: u32, matrix: IntensityMatrix) -> Self {
        Self {
            child: VarId(child),
            parent: VarId(parent),
            weight: 1.0,
            matrix,
            condition: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = Some(condition);
        self
    }

    /// Identity used for duplicate detection: two arcs with the same key are the
    /// same causal relation.
    pub fn key(&self) -> (VarId, VarId, Option<&Condition>) {
        (self.child, self.parent, self.condition.as_ref())
    }

    /// Intensity `a_{nk;ij}` with the child-normal entry completed as the
    /// complement of the column's abnormal mass. A parent in its normal state
    /// exerts no effect, so column 0 is always zero.
    pub fn intensity(&self, child_state: StateId, parent_state: StateId) -> f64 {
        if parent_state == 0 {
            return 0.0;
        }
        match self.matrix.get(child_state, parent_state) {
            Some(p) => p,
            None if child_state == 0 => (1.0 - self.matrix.abnormal_mass(parent_state)).max(0.0),
            None => 0.0,
        }
    }

    /// Returns a copy whose child-normal row is explicit for every abnormal
    /// state of `parent`.
    pub fn complete_normal_rows(&self, parent: &Variable) -> Result<CausalArc, KbError> {
        let mut out = self.clone();
        for j in parent.abnormal_states() {
            let complement = 1.0 - self.matrix.abnormal_mass(j);
            match self.matrix.get(0, j) {
                Some(explicit) if (explicit - complement).abs() > PROBABILITY_EPSILON => {
                    return Err(KbError::InconsistentNormalRow {
                        child: self.child,
                        parent: self.parent,
                        parent_state: j,
                        explicit,
                        complement,
                    });
                }
                Some(_) => {}
                None => out.matrix.set(0, j, complement.max(0.0)),
            }
        }
        Ok(out)
    }
}

/// Declared authoring module: the variables grouped under one root cause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubDucgDecl {
    pub root: VarId,
    pub variables: BTreeSet<VarId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArcId(pub usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KbError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported KB version {0}")]
    UnsupportedVersion(u32),
    #[error("duplicate variable id {0}")]
    DuplicateVariable(VarId),
    #[error("unknown variable {id} referenced by {context}")]
    UnknownVariable { id: VarId, context: String },
    #[error("KB must contain ≥1 B-type variable")]
    NoRootVariable,
    #[error(
        "inconsistent normal row on arc {parent}->{child} column {parent_state}: \
         explicit {explicit}, complement {complement}"
    )]
    InconsistentNormalRow {
        child: VarId,
        parent: VarId,
        parent_state: StateId,
        explicit: f64,
        complement: f64,
    },
    #[error("conflicting definition of variable {0} across sub-DUCGs")]
    ConflictingVariable(VarId),
    #[error("conflicting parameters for arc {parent}->{child} across sub-DUCGs")]
    ConflictingArc { child: VarId, parent: VarId },
    #[error("sub-DUCG rooted at {root} is malformed: {reason}")]
    MalformedSubDucg { root: VarId, reason: String },
}

impl KbError {
    /// The violation record this error is reported as.
    pub fn to_violation(&self) -> Violation {
        let (code, ids) = match self {
            KbError::Syntax { line, column, .. } => (RuleCode::Syntax, vec![*line as u32, *column as u32]),
            KbError::UnsupportedVersion(v) => (RuleCode::Syntax, vec![*v]),
            KbError::DuplicateVariable(id) => (RuleCode::DuplicateId, vec![id.0]),
            KbError::UnknownVariable { id, .. } => (RuleCode::DanglingReference, vec![id.0]),
            KbError::NoRootVariable => (RuleCode::NoRoot, vec![]),
            KbError::InconsistentNormalRow { child, parent, parent_state, .. } => {
                (RuleCode::InconsistentNormalRow, vec![child.0, parent.0, *parent_state])
            }
            KbError::ConflictingVariable(id) => (RuleCode::ConflictingDefinition, vec![id.0]),
            KbError::ConflictingArc { child, parent } => {
                (RuleCode::ConflictingDefinition, vec![child.0, parent.0])
            }
            KbError::MalformedSubDucg { root, .. } => (RuleCode::SubDucg, vec![root.0]),
        };
        Violation { code, ids }
    }
}

/// Immutable compiled reasoning graph `G(V, R)`.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    variables: BTreeMap<VarId, Variable>,
    arcs: Vec<CausalArc>,
    subducgs: Vec<SubDucgDecl>,
    incoming: BTreeMap<VarId, Vec<ArcId>>,
    outgoing: BTreeMap<VarId, Vec<ArcId>>,
    measure_points: HashMap<String, VarId>,
}

impl PartialEq for KnowledgeBase {
    fn eq(&self, other: &Self) -> bool {
        self.variables == other.variables && self.arcs == other.arcs && self.subducgs == other.subducgs
    }
}

impl KnowledgeBase {
    /// Builds a KB, checking structure only: unique ids, resolvable references
    /// and at least one root. Rule checks live in [`validate_kb`].
    pub fn new(
        variables: Vec<Variable>,
        mut arcs: Vec<CausalArc>,
        subducgs: Vec<SubDucgDecl>,
    ) -> Result<Self, KbError> {
        let mut vars = BTreeMap::new();
        for v in variables {
            let id = v.id;
            if vars.insert(id, v).is_some() {
                return Err(KbError::DuplicateVariable(id));
            }
        }
        if !vars.values().any(|v| v.kind == VarKind::B) {
            return Err(KbError::NoRootVariable);
        }
        let unknown = |id: VarId, context: String| KbError::UnknownVariable { id, context };
        for arc in &arcs {
            for end in [arc.child, arc.parent] {
                if !vars.contains_key(&end) {
                    return Err(unknown(end, format!("arc {}->{}", arc.parent, arc.child)));
                }
            }
            if let Some(cond) = &arc.condition {
                for lit in cond.literals() {
                    if !vars.contains_key(&lit.var) {
                        return Err(unknown(
                            lit.var,
                            format!("condition of arc {}->{}", arc.parent, arc.child),
                        ));
                    }
                }
            }
        }
        for decl in &subducgs {
            for id in std::iter::once(&decl.root).chain(&decl.variables) {
                if !vars.contains_key(id) {
                    return Err(unknown(*id, format!("sub-DUCG {}", decl.root)));
                }
            }
        }
        arcs.sort_by(|a, b| a.key().cmp(&b.key()));
        let mut subducgs = subducgs;
        subducgs.sort_by_key(|d| d.root);

        let mut incoming: BTreeMap<VarId, Vec<ArcId>> = BTreeMap::new();
        let mut outgoing: BTreeMap<VarId, Vec<ArcId>> = BTreeMap::new();
        for (i, arc) in arcs.iter().enumerate() {
            incoming.entry(arc.child).or_default().push(ArcId(i));
            outgoing.entry(arc.parent).or_default().push(ArcId(i));
        }
        let measure_points = vars
            .values()
            .filter_map(|v| v.measure_point.clone().map(|mp| (mp, v.id)))
            .collect();
        Ok(Self { variables: vars, arcs, subducgs, incoming, outgoing, measure_points })
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.variables.values()
    }

    pub fn variable(&self, id: VarId) -> Option<&Variable> {
        self.variables.get(&id)
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn arcs(&self) -> &[CausalArc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &CausalArc {
        &self.arcs[id.0]
    }

    pub fn arc_ids(&self) -> impl Iterator<Item = ArcId> {
        (0..self.arcs.len()).map(ArcId)
    }

    pub fn find_arc(&self, arc: &CausalArc) -> Option<ArcId> {
        self.incoming
            .get(&arc.child)?
            .iter()
            .copied()
            .find(|&id| self.arcs[id.0].key() == arc.key())
    }

    pub fn subducg_decls(&self) -> &[SubDucgDecl] {
        &self.subducgs
    }

    pub fn incoming(&self, child: VarId) -> &[ArcId] {
        self.incoming.get(&child).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn outgoing(&self, parent: VarId) -> &[ArcId] {
        self.outgoing.get(&parent).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Root-cause variables in id order.
    pub fn roots(&self) -> impl Iterator<Item = &Variable> {
        self.variables.values().filter(|v| v.kind == VarKind::B)
    }

    pub fn by_measure_point(&self, key: &str) -> Option<&Variable> {
        self.measure_points.get(key).and_then(|id| self.variables.get(id))
    }

    /// `r_n`: the sum of incoming arc weights over every parent of `child`.
    ///
    /// Inference normalizes over the arcs retained in each simplified graph
    /// instead; this is the whole-KB value.
    pub fn r_denominator(&self, child: VarId) -> f64 {
        self.incoming(child).iter().map(|id| self.arcs[id.0].weight).sum()
    }

    pub fn r_denominators(&self) -> BTreeMap<VarId, f64> {
        self.incoming.keys().map(|&c| (c, self.r_denominator(c))).collect()
    }

    /// Replaces the declared authoring modules.
    pub fn with_subducg_decls(mut self, decls: Vec<SubDucgDecl>) -> Result<Self, KbError> {
        let vars = std::mem::take(&mut self.variables).into_values().collect();
        self = KnowledgeBase::new(vars, self.arcs, decls)?;
        Ok(self)
    }
}
