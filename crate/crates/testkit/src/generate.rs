//! Seeded random knowledge bases and evidence.

use std::collections::BTreeMap;

use ducg_core::gateway::EvidenceSnapshot;
use ducg_core::kb::{
    validate_kb, CausalArc, Condition, IntensityMatrix, KnowledgeBase, StateDef, StateId, StateLiteral, VarId,
    VarKind, Variable,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub max_roots: usize,
    pub max_variables: usize,
    pub max_abnormal_states: u32,
    pub max_depth: usize,
    /// Chance of adding one default cause.
    pub default_cause: f64,
    /// Chance that an arc carries a condition.
    pub conditional: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_roots: 3,
            max_variables: 8,
            max_abnormal_states: 2,
            max_depth: 3,
            default_cause: 0.25,
            conditional: 0.1,
        }
    }
}

fn states(rng: &mut ChaCha8Rng, max_abnormal: u32) -> Vec<StateDef> {
    let n = rng.gen_range(1..=max_abnormal);
    (0..=n).map(|i| StateDef::new(i, format!("s{i}"))).collect()
}

fn column_matrix(rng: &mut ChaCha8Rng, child: &Variable, parent: &Variable) -> IntensityMatrix {
    let mut m = IntensityMatrix::new();
    for j in parent.abnormal_states() {
        if rng.gen_bool(0.15) {
            continue;
        }
        let raw: Vec<f64> = child.abnormal_states().map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen() }).collect();
        let sum: f64 = raw.iter().sum();
        if sum == 0.0 {
            continue;
        }
        let mass = rng.gen_range(0.1..1.0);
        for (k, a) in child.abnormal_states().zip(raw) {
            if a > 0.0 {
                m.set(k, j, a / sum * mass);
            }
        }
    }
    m
}

/// A random valid knowledge base: roots, X variables in up to `max_depth`
/// layers with parents from earlier layers, and an optional default cause.
pub fn random_kb(seed: u64, config: GenConfig) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roots = rng.gen_range(1..=config.max_roots);
    let has_default = rng.gen_bool(config.default_cause);
    let budget = config.max_variables - roots - usize::from(has_default);
    let xs = rng.gen_range(budget.div_ceil(2)..=budget).max(1);

    let mut vars: Vec<Variable> = Vec::new();
    let mut layer: BTreeMap<VarId, usize> = BTreeMap::new();
    let mut next = 1u32;
    for _ in 0..roots {
        let st = states(&mut rng, config.max_abnormal_states);
        let n = st.len() as u32 - 1;
        let total = rng.gen_range(0.05..0.9);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let wsum: f64 = weights.iter().sum();
        let prior: Vec<(StateId, f64)> = (1..=n).zip(weights).map(|(k, w)| (k, w / wsum * total)).collect();
        vars.push(Variable::new(next, VarKind::B, format!("root {next}"), st).with_prior(prior));
        layer.insert(VarId(next), 0);
        next += 1;
    }
    let default = has_default.then(|| {
        let id = next;
        next += 1;
        vars.push(Variable::new(id, VarKind::D, "default", vec![StateDef::new(0, "absent"), StateDef::new(1, "present")]));
        VarId(id)
    });
    for _ in 0..xs {
        let st = states(&mut rng, config.max_abnormal_states);
        let depth = rng.gen_range(1..=config.max_depth);
        vars.push(Variable::new(next, VarKind::X, format!("x{next}"), st).with_measure_point(format!("MP{next}")));
        layer.insert(VarId(next), depth);
        next += 1;
    }

    let mut arcs = Vec::new();
    let ids: Vec<VarId> = vars.iter().map(|v| v.id).collect();
    for child in vars.iter().filter(|v| v.kind == VarKind::X) {
        let depth = layer[&child.id];
        let mut candidates: Vec<VarId> = ids
            .iter()
            .copied()
            .filter(|p| layer.get(p).is_some_and(|d| *d < depth))
            .collect();
        candidates.shuffle(&mut rng);
        let count = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=candidates.len().clamp(1, 3)) };
        let mut parents: Vec<VarId> = candidates.into_iter().take(count).collect();
        if let Some(d) = default {
            if rng.gen_bool(0.5) {
                parents.push(d);
            }
        }
        for p in parents {
            let parent = vars.iter().find(|v| v.id == p).expect("parent exists");
            let matrix = column_matrix(&mut rng, child, parent);
            let weight = *[0.5, 1.0, 2.0].choose(&mut rng).expect("non-empty");
            let mut arc = CausalArc::new(child.id.0, p.0, matrix).with_weight(weight);
            if rng.gen_bool(config.conditional) {
                let others: Vec<&Variable> =
                    vars.iter().filter(|v| v.kind == VarKind::X && v.id != child.id).collect();
                if let Some(v) = others.choose(&mut rng) {
                    let s = rng.gen_range(0..v.states.len() as u32);
                    arc = arc.with_condition(Condition::all([StateLiteral::new(v.id, s)]));
                }
            }
            arcs.push(arc);
        }
    }

    let kb = KnowledgeBase::new(vars, arcs, Vec::new()).expect("generated KB is well formed");
    debug_assert!(validate_kb(&kb).is_empty(), "{:?}", validate_kb(&kb));
    kb
}

/// Random evidence over the X variables with at least one abnormal reading.
pub fn random_evidence(kb: &KnowledgeBase, seed: u64, tick: i64) -> EvidenceSnapshot {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let xs: Vec<&Variable> = kb.variables().filter(|v| v.kind == VarKind::X).collect();
    let mut assignments: BTreeMap<VarId, StateId> = BTreeMap::new();
    for v in &xs {
        if rng.gen_bool(0.35) {
            continue;
        }
        assignments.insert(v.id, rng.gen_range(0..v.states.len() as u32));
    }
    if !assignments.iter().any(|(v, s)| kb.variable(*v).is_some_and(|x| x.is_abnormal(*s))) {
        let v = xs.choose(&mut rng).expect("at least one X");
        let s = rng.gen_range(1..v.states.len() as u32);
        assignments.insert(v.id, s);
    }
    EvidenceSnapshot::from_assignments(tick, kb, assignments)
}

/// Grows `prev` by observing one more variable or turning a normal reading
/// abnormal; returns `None` when nothing is left to add.
pub fn accumulate(kb: &KnowledgeBase, prev: &EvidenceSnapshot, seed: u64) -> Option<EvidenceSnapshot> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let open: Vec<&Variable> = kb
        .variables()
        .filter(|v| v.kind == VarKind::X && prev.state_of(v.id).is_none_or(|s| s == 0))
        .collect();
    let v = open.choose(&mut rng)?;
    let s = rng.gen_range(1..v.states.len() as u32);
    let mut assignments = prev.assignments.clone();
    assignments.insert(v.id, s);
    Some(EvidenceSnapshot::from_assignments(prev.tick + 1, kb, assignments))
}
