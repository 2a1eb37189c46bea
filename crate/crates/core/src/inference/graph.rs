//! Per-tick slice simplification and the time-layered cubic graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::gateway::{EvidenceSnapshot, Tick};
use crate::kb::{ArcId, KnowledgeBase, StateId, SubDucg, Truth, VarId, VarKind};

use super::InferenceError;

/// One root's simplified causal graph at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGraph {
    pub root: VarId,
    pub tick: Tick,
    /// Ordinal `m` of the diagnosis step that produced the slice (1-based; 0
    /// until assigned by a session).
    pub step: usize,
    /// Retained variables with their observed state, if any.
    pub variables: BTreeMap<VarId, Option<StateId>>,
    pub arcs: Vec<ArcId>,
    pub valid: bool,
    /// Abnormal evidence the root cannot reach.
    pub unexplained: Vec<VarId>,
}

impl SliceGraph {
    pub fn with_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.variables.contains_key(&var)
    }

    pub fn evidence(&self) -> BTreeMap<VarId, StateId> {
        self.variables
            .iter()
            .filter_map(|(v, s)| s.map(|s| (*v, s)))
            .collect()
    }

    /// Variables reachable from the root along retained arcs.
    pub fn reachable(&self, kb: &KnowledgeBase) -> BTreeSet<VarId> {
        reach(self.root, self.arcs.iter().map(|id| kb.arc(*id)).map(|a| (a.parent, a.child)))
    }
}

fn reach(root: VarId, edges: impl Iterator<Item = (VarId, VarId)>) -> BTreeSet<VarId> {
    let mut adj: BTreeMap<VarId, Vec<VarId>> = BTreeMap::new();
    for (p, c) in edges {
        adj.entry(p).or_default().push(c);
    }
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &c in adj.get(&v).into_iter().flatten() {
            if seen.insert(c) {
                queue.push_back(c);
            }
        }
    }
    seen
}

/// Arcs of `sub` that can carry an effect under `ev`: conditional arcs whose
/// condition is false are dropped, as are arcs out of a parent observed in its
/// normal state. Undetermined conditions keep the arc.
pub(crate) fn active_arcs(kb: &KnowledgeBase, sub: &SubDucg, ev: &EvidenceSnapshot) -> Vec<ArcId> {
    let mut out: Vec<ArcId> = sub
        .arcs
        .iter()
        .filter(|arc| {
            arc.condition
                .as_ref()
                .is_none_or(|c| c.evaluate(&ev.assignments) != Truth::False)
        })
        .filter(|arc| ev.state_of(arc.parent) != Some(0))
        .map(|arc| kb.find_arc(arc).expect("sub-DUCG arcs come from the KB"))
        .collect();
    out.sort();
    out
}

/// Reduces a root's sub-DUCG to the part that links the root to the current
/// evidence.
///
/// Keeps evidenced variables the root can reach and every variable on a path
/// from the root to them. The slice is invalid when some abnormal evidence is
/// outside the sub-DUCG or cut off from the root.
pub fn simplify(kb: &KnowledgeBase, sub: &SubDucg, ev: &EvidenceSnapshot) -> Result<SliceGraph, InferenceError> {
    if !ev.has_abnormal() {
        return Err(InferenceError::NoAbnormalEvidence);
    }
    let root = sub.root;
    let active = active_arcs(kb, sub, ev);
    let reachable = reach(root, active.iter().map(|id| kb.arc(*id)).map(|a| (a.parent, a.child)));

    let unexplained: Vec<VarId> = ev.abnormal.iter().copied().filter(|v| !reachable.contains(v)).collect();

    let is_default = |v: VarId| kb.variable(v).is_some_and(|v| v.kind == VarKind::D);
    let mut incoming: BTreeMap<VarId, Vec<ArcId>> = BTreeMap::new();
    for &id in &active {
        incoming.entry(kb.arc(id).child).or_default().push(id);
    }

    let mut relevant: BTreeSet<VarId> = ev
        .assignments
        .keys()
        .copied()
        .filter(|v| *v != root && reachable.contains(v))
        .collect();
    let mut queue: VecDeque<VarId> = relevant.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for &id in incoming.get(&v).into_iter().flatten() {
            let p = kb.arc(id).parent;
            if p != root && (reachable.contains(&p) || is_default(p)) && relevant.insert(p) {
                queue.push_back(p);
            }
        }
    }

    let mut variables: BTreeMap<VarId, Option<StateId>> =
        relevant.iter().map(|v| (*v, ev.state_of(*v))).collect();
    variables.insert(root, ev.state_of(root));
    let arcs = active
        .into_iter()
        .filter(|id| {
            let a = kb.arc(*id);
            relevant.contains(&a.child) && variables.contains_key(&a.parent)
        })
        .collect();

    Ok(SliceGraph {
        root,
        tick: ev.tick,
        step: 0,
        variables,
        arcs,
        valid: unexplained.is_empty(),
        unexplained,
    })
}

/// Cross-slice edge joining the same variable in consecutive slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Linkage {
    pub var: VarId,
    /// Index of the earlier slice in [`CubicGraph::slices`].
    pub from: usize,
    pub to: usize,
    pub from_state: Option<StateId>,
    pub to_state: Option<StateId>,
}

impl Linkage {
    pub fn changed(&self) -> bool {
        self.from_state != self.to_state
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicGraph {
    pub root: VarId,
    pub slices: Vec<SliceGraph>,
    pub linkage: Vec<Linkage>,
    pub current_evidence: BTreeMap<VarId, StateId>,
}

impl CubicGraph {
    pub fn latest(&self) -> &SliceGraph {
        self.slices.last().expect("a cubic graph has at least one slice")
    }

    /// Linkage edges across which a variable changed state.
    pub fn state_changes(&self) -> impl Iterator<Item = &Linkage> {
        self.linkage.iter().filter(|l| l.changed())
    }
}

/// Appends a valid slice to a root's cubic graph, linking every variable the
/// new slice shares with the previous one.
pub fn merge_cubic(prev: Option<CubicGraph>, slice: SliceGraph) -> Result<CubicGraph, InferenceError> {
    if !slice.valid {
        return Err(InferenceError::InvalidSlice(slice.root));
    }
    let current_evidence = slice.evidence();
    let Some(mut cubic) = prev else {
        return Ok(CubicGraph {
            root: slice.root,
            slices: vec![slice],
            linkage: Vec::new(),
            current_evidence,
        });
    };
    if cubic.root != slice.root {
        return Err(InferenceError::RootMismatch { expected: cubic.root, got: slice.root });
    }
    let from = cubic.slices.len() - 1;
    let last = &cubic.slices[from];
    let links: Vec<Linkage> = slice
        .variables
        .iter()
        .filter_map(|(var, state)| {
            last.variables.get(var).map(|prev_state| Linkage {
                var: *var,
                from,
                to: from + 1,
                from_state: *prev_state,
                to_state: *state,
            })
        })
        .collect();
    cubic.linkage.extend(links);
    cubic.slices.push(slice);
    cubic.current_evidence = current_evidence;
    Ok(cubic)
}

/// True iff the latest slice explains every abnormal variable of `ev`.
pub fn check_valid(kb: &KnowledgeBase, cubic: &CubicGraph, ev: &EvidenceSnapshot) -> bool {
    let latest = cubic.latest();
    let reachable = latest.reachable(kb);
    ev.abnormal
        .iter()
        .all(|v| latest.contains(*v) && reachable.contains(v))
}
