use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::gateway::EvidenceSnapshot;
use crate::kb::{ArcId, KnowledgeBase, StateId, StateLiteral, VarId, VarKind};

use super::expr::{EventExpression, FLiteral, Product};
use super::graph::CubicGraph;
use super::InferenceError;

#[derive(Debug, Clone, Copy)]
pub struct ExpandOptions {
    /// Longest ancestor chain an expansion may follow.
    pub max_depth: usize,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self { max_depth: 256 }
    }
}

struct Expander<'a> {
    kb: &'a KnowledgeBase,
    root: VarId,
    incoming: BTreeMap<VarId, Vec<ArcId>>,
    r_n: BTreeMap<VarId, f64>,
    max_depth: usize,
}

impl Expander<'_> {
    fn literal(&self, var: VarId, state: StateId, chain: &mut Vec<VarId>) -> Result<EventExpression, InferenceError> {
        let lit = StateLiteral::new(var, state);
        if var == self.root {
            return Ok(EventExpression::root(lit));
        }
        let kind = self.kb.variable(var).map(|v| v.kind);
        if kind == Some(VarKind::D) {
            // default causes are always present
            return Ok(if state == 0 {
                EventExpression::zero()
            } else {
                EventExpression::from_terms([Product::fact(lit)])
            });
        }
        if chain.contains(&var) {
            return Ok(EventExpression::zero());
        }
        if chain.len() >= self.max_depth {
            return Err(InferenceError::CycleLimit(var));
        }

        chain.push(var);
        let mut terms = Vec::new();
        for &id in self.incoming.get(&var).into_iter().flatten() {
            let arc = self.kb.arc(id);
            let parent = self
                .kb
                .variable(arc.parent)
                .ok_or_else(|| InferenceError::MissingParameter(format!("variable {}", arc.parent)))?;
            let weight = arc.weight / self.r_n[&var];
            for j in parent.abnormal_states() {
                if arc.intensity(state, j) == 0.0 {
                    continue;
                }
                let f = FLiteral {
                    child: var,
                    child_state: state,
                    parent: arc.parent,
                    parent_state: j,
                    arc: id,
                    weight,
                };
                let Some(cause) = Product::cause(f) else { continue };
                let upstream = self.literal(arc.parent, j, chain)?;
                terms.extend(upstream.terms().iter().filter_map(|t| cause.mul(t)));
            }
        }
        chain.pop();
        Ok(EventExpression::from_terms(terms))
    }
}

/// Expands the evidence on a cubic graph's latest slice into a sum of products
/// of root and functional literals.
///
/// Evidence on variables outside the graph is omitted. Weight fractions use
/// the arcs retained in the slice. Products explained only by default causes
/// are spread over the root's abnormal states, so every product names one.
pub fn expand(ev: &EvidenceSnapshot, cubic: &CubicGraph, kb: &KnowledgeBase) -> Result<EventExpression, InferenceError> {
    expand_with(ev, cubic, kb, ExpandOptions::default())
}

pub fn expand_with(
    ev: &EvidenceSnapshot,
    cubic: &CubicGraph,
    kb: &KnowledgeBase,
    options: ExpandOptions,
) -> Result<EventExpression, InferenceError> {
    let slice = cubic.latest();
    let mut incoming: BTreeMap<VarId, Vec<ArcId>> = BTreeMap::new();
    let mut r_n: BTreeMap<VarId, f64> = BTreeMap::new();
    for &id in &slice.arcs {
        let arc = kb.arc(id);
        incoming.entry(arc.child).or_default().push(id);
        *r_n.entry(arc.child).or_default() += arc.weight;
    }
    let expander = Expander { kb, root: cubic.root, incoming, r_n, max_depth: options.max_depth };

    let mut expr = EventExpression::one();
    for (&var, &state) in &ev.assignments {
        if !slice.contains(var) {
            continue;
        }
        let e = expander.literal(var, state, &mut Vec::new())?;
        expr = expr.mul(&e);
        if expr.is_empty() {
            break;
        }
    }

    let root = kb
        .variable(cubic.root)
        .ok_or(InferenceError::UnknownRoot(cubic.root))?;
    let abnormal_root = EventExpression::from_terms(
        root.abnormal_states().map(|k| Product::root(StateLiteral::new(root.id, k))),
    );
    let (with_root, without): (Vec<Product>, Vec<Product>) =
        expr.terms().iter().cloned().partition(|p| p.has_root(root.id));
    let spread = EventExpression::from_terms(without).mul(&abnormal_root);
    Ok(EventExpression::from_terms(with_root).add(&spread))
}

/// Probability of a normalized expression: the sum over products of
/// `Π (r_{n;i}/r_n)·a_{nk;ij} · Π b`.
pub fn eval_expression(expr: &EventExpression, kb: &KnowledgeBase) -> Result<f64, InferenceError> {
    let mut total = 0.0;
    for term in expr.terms() {
        let mut p = 1.0;
        for f in term.causes() {
            if f.arc.0 >= kb.arcs().len() {
                return Err(InferenceError::MissingParameter(f.to_string()));
            }
            let arc = kb.arc(f.arc);
            let known = kb.variable(f.child).is_some_and(|v| v.has_state(f.child_state))
                && kb.variable(f.parent).is_some_and(|v| v.has_state(f.parent_state));
            if !known || arc.child != f.child || arc.parent != f.parent {
                return Err(InferenceError::MissingParameter(f.to_string()));
            }
            p *= f.weight * arc.intensity(f.child_state, f.parent_state);
        }
        for lit in term.root_literals() {
            p *= root_prior(kb, lit)?;
        }
        total += p;
    }
    Ok(total)
}

fn root_prior(kb: &KnowledgeBase, lit: StateLiteral) -> Result<f64, InferenceError> {
    let missing = || InferenceError::MissingParameter(format!("B{},{}", lit.var, lit.state));
    let var = kb.variable(lit.var).ok_or_else(missing)?;
    if lit.state == 0 {
        let abnormal: f64 = var.prior.as_ref().map_or(0.0, |p| p.values().sum());
        return Ok(1.0 - abnormal);
    }
    var.prior_of(lit.state).ok_or_else(missing)
}

/// Ranked hypothesis `H_{kj}` with its supporting quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisResult {
    pub root: VarId,
    pub state: StateId,
    pub posterior: f64,
    /// `ζ`: probability of the evidence on this root's cubic graph.
    pub zeta: f64,
    /// `ξ`: this graph's share of the evidence probability across graphs.
    pub xi: f64,
    /// `Pr{H E}` on this root's cubic graph.
    pub joint: f64,
}

/// Per-graph quantities before normalization across graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEvaluation {
    pub root: VarId,
    pub expression: EventExpression,
    pub zeta: f64,
    pub joints: Vec<(StateId, f64)>,
}

pub fn evaluate_graph(cubic: &CubicGraph, ev: &EvidenceSnapshot, kb: &KnowledgeBase) -> Result<GraphEvaluation, InferenceError> {
    let expression = expand(ev, cubic, kb)?;
    let zeta = eval_expression(&expression, kb)?;
    let root = kb.variable(cubic.root).ok_or(InferenceError::UnknownRoot(cubic.root))?;
    let joints = root
        .abnormal_states()
        .map(|k| {
            let joint = eval_expression(&expression.conjoin(StateLiteral::new(root.id, k)), kb)?;
            Ok((k, joint))
        })
        .collect::<Result<Vec<_>, InferenceError>>()?;
    Ok(GraphEvaluation { root: cubic.root, expression, zeta, joints })
}

/// Scores every abnormal root state hosted by the surviving graphs.
///
/// Posterior is `ξ_i · Pr{H E} / ζ_i` with `ξ_i = ζ_i / Σ ζ`; `ξ` is exactly 1
/// when one graph carries all the support. Hypotheses with zero joint
/// probability are dropped. Order: posterior descending, then root and state
/// ascending.
pub fn rank_hypotheses(
    graphs: &[CubicGraph],
    ev: &EvidenceSnapshot,
    kb: &KnowledgeBase,
) -> Result<Vec<HypothesisResult>, InferenceError> {
    let evals = graphs
        .par_iter()
        .map(|g| evaluate_graph(g, ev, kb))
        .collect::<Result<Vec<_>, _>>()?;
    rank_evaluations(&evals)
}

pub fn rank_evaluations(evals: &[GraphEvaluation]) -> Result<Vec<HypothesisResult>, InferenceError> {
    let supported: Vec<&GraphEvaluation> = evals.iter().filter(|e| e.zeta > 0.0).collect();
    if supported.is_empty() {
        return Err(InferenceError::EmptyHypothesisSpace);
    }
    let total: f64 = supported.iter().map(|e| e.zeta).sum();
    let single = supported.len() == 1;

    let mut out: Vec<HypothesisResult> = supported
        .iter()
        .flat_map(|e| {
            let xi = if single { 1.0 } else { e.zeta / total };
            e.joints
                .iter()
                .filter(|(_, joint)| *joint > 0.0)
                .map(move |&(state, joint)| HypothesisResult {
                    root: e.root,
                    state,
                    posterior: xi * joint / e.zeta,
                    zeta: e.zeta,
                    xi,
                    joint,
                })
        })
        .collect();
    out.sort_by(|a, b| {
        b.posterior
            .partial_cmp(&a.posterior)
            .unwrap_or(Ordering::Equal)
            .then(a.root.cmp(&b.root))
            .then(a.state.cmp(&b.state))
    });
    Ok(out)
}
