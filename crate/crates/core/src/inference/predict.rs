use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::gateway::EvidenceSnapshot;
use crate::kb::{ArcId, KnowledgeBase, StateId, StateLiteral, SubDucg, VarId, VarKind};

use super::graph::active_arcs;
use super::InferenceError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub var: VarId,
    pub state: StateId,
    pub probability: f64,
}

struct Forward<'a> {
    kb: &'a KnowledgeBase,
    hyp: StateLiteral,
    incoming: BTreeMap<VarId, Vec<ArcId>>,
    r_n: BTreeMap<VarId, f64>,
    memo: BTreeMap<(VarId, StateId), f64>,
}

impl Forward<'_> {
    fn prob(&mut self, var: VarId, state: StateId, chain: &mut BTreeSet<VarId>) -> f64 {
        if var == self.hyp.var {
            return if state == self.hyp.state { 1.0 } else { 0.0 };
        }
        if self.kb.variable(var).is_some_and(|v| v.kind == VarKind::D) {
            return if state == 1 { 1.0 } else { 0.0 };
        }
        if let Some(p) = self.memo.get(&(var, state)) {
            return *p;
        }
        if !chain.insert(var) {
            return 0.0;
        }
        let arcs = self.incoming.get(&var).cloned().unwrap_or_default();
        let mut total = 0.0;
        for id in arcs {
            let arc = self.kb.arc(id);
            let Some(parent) = self.kb.variable(arc.parent) else { continue };
            let fraction = arc.weight / self.r_n[&var];
            for j in parent.abnormal_states().collect::<Vec<_>>() {
                let a = arc.intensity(state, j);
                if a > 0.0 {
                    total += fraction * a * self.prob(arc.parent, j, chain);
                }
            }
        }
        chain.remove(&var);
        if chain.is_empty() {
            self.memo.insert((var, state), total);
        }
        total
    }
}

/// Forward-chains the hypothesis `hyp` through the root's sub-DUCG and returns
/// the probability of every abnormal state of each variable not currently
/// abnormal.
///
/// Arcs cut off by the evidence (false conditions, parents observed normal)
/// do not propagate. Results are sorted by probability descending.
pub fn predict(
    kb: &KnowledgeBase,
    sub: &SubDucg,
    ev: &EvidenceSnapshot,
    hyp: StateLiteral,
) -> Result<Vec<Prediction>, InferenceError> {
    if hyp.var != sub.root {
        return Err(InferenceError::UnknownRoot(hyp.var));
    }
    if !sub.root_variable().is_abnormal(hyp.state) {
        return Err(InferenceError::NotAHypothesis(hyp.var, hyp.state));
    }

    let mut incoming: BTreeMap<VarId, Vec<ArcId>> = BTreeMap::new();
    let mut r_n: BTreeMap<VarId, f64> = BTreeMap::new();
    for id in active_arcs(kb, sub, ev) {
        let arc = kb.arc(id);
        incoming.entry(arc.child).or_default().push(id);
        *r_n.entry(arc.child).or_default() += arc.weight;
    }
    let mut fwd = Forward { kb, hyp, incoming, r_n, memo: BTreeMap::new() };

    let mut out = Vec::new();
    for var in sub.variables.values() {
        if var.id == sub.root || var.kind != VarKind::X || ev.abnormal.contains(&var.id) {
            continue;
        }
        for k in var.abnormal_states() {
            let p = fwd.prob(var.id, k, &mut BTreeSet::new());
            if p > 0.0 {
                out.push(Prediction { var: var.id, state: k, probability: p });
            }
        }
    }
    out.sort_by(|a, b| {
        b.probability
            .partial_cmp(&a.probability)
            .unwrap_or(Ordering::Equal)
            .then(a.var.cmp(&b.var))
            .then(a.state.cmp(&b.state))
    });
    Ok(out)
}
