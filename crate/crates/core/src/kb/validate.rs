use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{KnowledgeBase, Severity, VarKind, Variable, PROBABILITY_EPSILON};

/// Construction rule a KB can break. Serialized in SCREAMING_SNAKE_CASE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleCode {
    Syntax,
    DuplicateId,
    DanglingReference,
    NoRoot,
    StateIds,
    StateSeverity,
    PriorPresence,
    MissingPrior,
    PriorRange,
    PriorSum,
    MeasurePointKind,
    DuplicateMeasurePoint,
    IntervalKind,
    IntervalPartition,
    Weight,
    EntryRange,
    ColumnSum,
    ParentNormalEntry,
    StateReference,
    InconsistentNormalRow,
    RootHasParent,
    DefaultCauseHasParent,
    SelfLoop,
    DuplicateArc,
    UnsupportedKind,
    SubDucg,
    ConflictingDefinition,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: RuleCode,
    pub ids: Vec<u32>,
}

impl Violation {
    fn new(code: RuleCode, ids: impl Into<Vec<u32>>) -> Self {
        Self { code, ids: ids.into() }
    }

    /// One JSON line: `{"code":"COLUMN_SUM","ids":[...]}`.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("violation serializes")
    }
}

/// Checks every construction rule. Returns an empty list iff the KB is usable
/// for inference.
pub fn validate_kb(kb: &KnowledgeBase) -> Vec<Violation> {
    let mut out = Vec::new();
    for v in kb.variables() {
        check_variable(v, &mut out);
    }

    let mut seen_mp: BTreeMap<&str, u32> = BTreeMap::new();
    for v in kb.variables() {
        if let Some(mp) = v.measure_point.as_deref() {
            if let Some(first) = seen_mp.insert(mp, v.id.0) {
                out.push(Violation::new(RuleCode::DuplicateMeasurePoint, [first, v.id.0]));
            }
        }
    }

    let mut seen_arcs = BTreeSet::new();
    for arc in kb.arcs() {
        let (c, p) = (arc.child.0, arc.parent.0);
        let child = kb.variable(arc.child).expect("structural check");
        let parent = kb.variable(arc.parent).expect("structural check");

        if !seen_arcs.insert(arc.key()) {
            out.push(Violation::new(RuleCode::DuplicateArc, [c, p]));
        }
        if c == p {
            out.push(Violation::new(RuleCode::SelfLoop, [c]));
        }
        if !child.kind.is_supported() || !parent.kind.is_supported() {
            out.push(Violation::new(RuleCode::UnsupportedKind, [c, p]));
        }
        match child.kind {
            VarKind::B => out.push(Violation::new(RuleCode::RootHasParent, [c, p])),
            VarKind::D => out.push(Violation::new(RuleCode::DefaultCauseHasParent, [c, p])),
            _ => {}
        }
        if !(arc.weight.is_finite() && arc.weight > 0.0) {
            out.push(Violation::new(RuleCode::Weight, [c, p]));
        }

        let mut columns: BTreeSet<u32> = BTreeSet::new();
        for (k, j, a) in arc.matrix.iter() {
            if !child.has_state(k) || !parent.has_state(j) {
                out.push(Violation::new(RuleCode::StateReference, [c, p, k, j]));
                continue;
            }
            if !(0.0..=1.0).contains(&a) {
                out.push(Violation::new(RuleCode::EntryRange, [c, p, k, j]));
            }
            if j == 0 {
                out.push(Violation::new(RuleCode::ParentNormalEntry, [c, p, k]));
            }
            columns.insert(j);
        }
        for j in columns.into_iter().filter(|&j| j != 0) {
            let mass = arc.matrix.abnormal_mass(j);
            if mass > 1.0 + PROBABILITY_EPSILON {
                out.push(Violation::new(RuleCode::ColumnSum, [c, p, j]));
            } else if let Some(explicit) = arc.matrix.get(0, j) {
                if (explicit - (1.0 - mass)).abs() > PROBABILITY_EPSILON {
                    out.push(Violation::new(RuleCode::InconsistentNormalRow, [c, p, j]));
                }
            }
        }

        if let Some(cond) = &arc.condition {
            for lit in cond.literals() {
                let known = kb.variable(lit.var).is_some_and(|v| v.has_state(lit.state));
                if !known {
                    out.push(Violation::new(RuleCode::StateReference, [c, p, lit.var.0, lit.state]));
                }
            }
        }
    }

    for decl in kb.subducg_decls() {
        let roots = decl
            .variables
            .iter()
            .filter(|id| kb.variable(**id).is_some_and(|v| v.kind == VarKind::B))
            .count();
        let root_ok = kb.variable(decl.root).is_some_and(|v| v.kind == VarKind::B);
        if !root_ok || roots != 1 || !decl.variables.contains(&decl.root) {
            out.push(Violation::new(RuleCode::SubDucg, [decl.root.0]));
        }
    }

    out.sort();
    out.dedup();
    out
}

fn check_variable(v: &Variable, out: &mut Vec<Violation>) {
    let id = v.id.0;
    let ids_ok = v.states.len() >= 2
        && v.states.iter().enumerate().all(|(i, s)| s.id as usize == i);
    if !ids_ok {
        out.push(Violation::new(RuleCode::StateIds, [id]));
    }
    for s in &v.states {
        let expected = if s.id == 0 { Severity::Normal } else { Severity::Abnormal };
        if s.severity != expected {
            out.push(Violation::new(RuleCode::StateSeverity, [id, s.id]));
        }
    }

    match (&v.prior, v.kind) {
        (Some(prior), VarKind::B) => {
            for (&state, &p) in prior {
                if !v.is_abnormal(state) || !(0.0..=1.0).contains(&p) {
                    out.push(Violation::new(RuleCode::PriorRange, [id, state]));
                }
            }
            if prior.values().sum::<f64>() > 1.0 + PROBABILITY_EPSILON {
                out.push(Violation::new(RuleCode::PriorSum, [id]));
            }
            for state in v.abnormal_states() {
                if !prior.contains_key(&state) {
                    out.push(Violation::new(RuleCode::MissingPrior, [id, state]));
                }
            }
        }
        (None, VarKind::B) => out.push(Violation::new(RuleCode::MissingPrior, [id])),
        (Some(_), _) => out.push(Violation::new(RuleCode::PriorPresence, [id])),
        (None, _) => {}
    }

    if v.measure_point.is_some() && v.kind != VarKind::X {
        out.push(Violation::new(RuleCode::MeasurePointKind, [id]));
    }
    if v.has_intervals() {
        if v.kind != VarKind::X {
            out.push(Violation::new(RuleCode::IntervalKind, [id]));
        }
        check_intervals(v, out);
    }
}

/// Intervals must cover every state, be non-empty, and tile one contiguous
/// range with no overlap under the `(lower, upper]` convention.
fn check_intervals(v: &Variable, out: &mut Vec<Violation>) {
    let id = v.id.0;
    let mut spans = Vec::new();
    for s in &v.states {
        match s.interval {
            Some(i) if i.lower.is_finite() && i.upper.is_finite() && i.lower < i.upper => {
                spans.push((i.lower, i.upper, s.id))
            }
            _ => out.push(Violation::new(RuleCode::IntervalPartition, [id, s.id])),
        }
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in spans.windows(2) {
        let (_, upper, a) = w[0];
        let (lower, _, b) = w[1];
        if upper != lower {
            out.push(Violation::new(RuleCode::IntervalPartition, [id, a, b]));
        }
    }
}
