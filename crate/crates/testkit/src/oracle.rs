//! Brute-force evidence probabilities for one root, by explicit enumeration.
//!
//! Every configuration picks an abnormal root state, a state (or absence) for
//! each unobserved variable, and one causing arc per present variable. A
//! configuration counts when each present variable traces back to the root or
//! a default cause, and every unobserved variable it marks present actually
//! causes something. Its weight is the root prior times, per present variable,
//! the arc's weight share and intensity.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ducg_core::kb::{CausalArc, KnowledgeBase, StateId, VarId, VarKind};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// False when some abnormal evidence cannot be reached from the root.
    pub valid: bool,
    pub zeta: f64,
    pub joints: BTreeMap<StateId, f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tri {
    True,
    False,
    Unknown,
}

fn condition_holds(arc: &CausalArc, evidence: &BTreeMap<VarId, StateId>) -> Tri {
    let Some(cond) = &arc.condition else { return Tri::True };
    let mut result = Tri::False;
    for clause in cond.clauses() {
        let mut c = Tri::True;
        for lit in clause {
            match evidence.get(&lit.var) {
                Some(s) if *s == lit.state => {}
                Some(_) => {
                    c = Tri::False;
                    break;
                }
                None => c = Tri::Unknown,
            }
        }
        match c {
            Tri::True => return Tri::True,
            Tri::Unknown => result = Tri::Unknown,
            Tri::False => {}
        }
    }
    result
}

fn intensity(arc: &CausalArc, k: StateId, j: StateId) -> f64 {
    if j == 0 {
        return 0.0;
    }
    if let Some(a) = arc.matrix.get(k, j) {
        return a;
    }
    if k == 0 {
        let abnormal: f64 = arc
            .matrix
            .iter()
            .filter(|(ck, cj, _)| *ck != 0 && *cj == j)
            .map(|(_, _, a)| a)
            .sum();
        return 1.0 - abnormal;
    }
    0.0
}

fn forward_closure(root: VarId, arcs: &[&CausalArc]) -> BTreeSet<VarId> {
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for a in arcs.iter().filter(|a| a.parent == v) {
            if seen.insert(a.child) {
                queue.push_back(a.child);
            }
        }
    }
    seen
}

pub fn oracle(kb: &KnowledgeBase, root: VarId, evidence: &BTreeMap<VarId, StateId>) -> OracleResult {
    let is_default = |v: VarId| kb.variable(v).is_some_and(|x| x.kind == VarKind::D);
    let root_var = kb.variable(root).expect("root exists");

    let all: Vec<&CausalArc> = kb.arcs().iter().collect();
    let mut sub = forward_closure(root, &all);
    let defaults: Vec<VarId> = all
        .iter()
        .filter(|a| sub.contains(&a.child) && is_default(a.parent))
        .map(|a| a.parent)
        .collect();
    sub.extend(defaults);

    let active: Vec<&CausalArc> = all
        .iter()
        .copied()
        .filter(|a| sub.contains(&a.child) && sub.contains(&a.parent))
        .filter(|a| condition_holds(a, evidence) != Tri::False)
        .filter(|a| evidence.get(&a.parent) != Some(&0))
        .collect();
    let reach = forward_closure(root, &active);

    let is_abnormal = |v: VarId, s: StateId| kb.variable(v).is_some_and(|x| x.is_abnormal(s));
    let valid = evidence.iter().filter(|(v, s)| is_abnormal(**v, **s)).all(|(v, _)| reach.contains(v));

    let observed: Vec<VarId> = evidence.keys().copied().filter(|v| *v != root && reach.contains(v)).collect();
    let mut relevant: BTreeSet<VarId> = observed.iter().copied().collect();
    loop {
        let grow: Vec<VarId> = active
            .iter()
            .filter(|a| relevant.contains(&a.child))
            .map(|a| a.parent)
            .filter(|p| *p != root && (reach.contains(p) || is_default(*p)) && !relevant.contains(p))
            .collect();
        if grow.is_empty() {
            break;
        }
        relevant.extend(grow);
    }
    let slice_arcs: Vec<&CausalArc> = active
        .iter()
        .copied()
        .filter(|a| relevant.contains(&a.child) && (relevant.contains(&a.parent) || a.parent == root))
        .collect();
    let mut r: BTreeMap<VarId, f64> = BTreeMap::new();
    for a in &slice_arcs {
        *r.entry(a.child).or_default() += a.weight;
    }
    let hidden: Vec<VarId> = relevant
        .iter()
        .copied()
        .filter(|v| !evidence.contains_key(v) && !is_default(*v))
        .collect();

    let mut joints = BTreeMap::new();
    for k in root_var.abnormal_states() {
        let prior = root_var.prior_of(k).unwrap_or(0.0);
        let mut sum = 0.0;
        for_each_hidden_assignment(kb, &hidden, &mut |hidden_states| {
            let mut state: BTreeMap<VarId, StateId> = evidence
                .iter()
                .filter(|(v, _)| relevant.contains(v))
                .map(|(v, s)| (*v, *s))
                .collect();
            for (v, s) in hidden.iter().zip(hidden_states) {
                if let Some(s) = s {
                    state.insert(*v, *s);
                }
            }
            let present: Vec<VarId> = state.keys().copied().collect();
            state.insert(root, k);
            for v in relevant.iter().filter(|v| is_default(**v)) {
                state.insert(*v, 1);
            }
            sum += sum_cause_choices(&present, &state, &slice_arcs, &r, root, &is_default, &hidden);
        });
        joints.insert(k, prior * sum);
    }
    let zeta = joints.values().sum();
    OracleResult { valid, zeta, joints }
}

fn for_each_hidden_assignment(kb: &KnowledgeBase, hidden: &[VarId], f: &mut dyn FnMut(&[Option<StateId>])) {
    fn go(
        kb: &KnowledgeBase,
        hidden: &[VarId],
        acc: &mut Vec<Option<StateId>>,
        f: &mut dyn FnMut(&[Option<StateId>]),
    ) {
        if acc.len() == hidden.len() {
            f(acc);
            return;
        }
        let var = kb.variable(hidden[acc.len()]).expect("known variable");
        let choices: Vec<Option<StateId>> =
            std::iter::once(None).chain(var.abnormal_states().map(Some)).collect();
        for c in choices {
            acc.push(c);
            go(kb, hidden, acc, f);
            acc.pop();
        }
    }
    go(kb, hidden, &mut Vec::new(), f);
}

fn sum_cause_choices(
    present: &[VarId],
    state: &BTreeMap<VarId, StateId>,
    arcs: &[&CausalArc],
    r: &BTreeMap<VarId, f64>,
    root: VarId,
    is_default: &dyn Fn(VarId) -> bool,
    hidden: &[VarId],
) -> f64 {
    let options: Vec<Vec<(usize, f64)>> = present
        .iter()
        .map(|v| {
            arcs.iter()
                .enumerate()
                .filter(|(_, a)| a.child == *v)
                .filter_map(|(i, a)| {
                    let j = *state.get(&a.parent)?;
                    let p = a.weight / r[v] * intensity(a, state[v], j);
                    (p != 0.0).then_some((i, p))
                })
                .collect()
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        return 0.0;
    }

    let mut total = 0.0;
    let mut pick = vec![0usize; present.len()];
    loop {
        let cause: BTreeMap<VarId, VarId> = present
            .iter()
            .zip(&pick)
            .enumerate()
            .map(|(n, (v, &i))| (*v, arcs[options[n][i].0].parent))
            .collect();
        let used: BTreeSet<VarId> = cause.values().copied().collect();
        let minimal = hidden.iter().filter(|h| cause.contains_key(h)).all(|h| used.contains(h));
        let grounded = present.iter().all(|v| {
            let mut seen = BTreeSet::new();
            let mut cur = *v;
            loop {
                if cur == root || is_default(cur) {
                    return true;
                }
                if !seen.insert(cur) {
                    return false;
                }
                match cause.get(&cur) {
                    Some(p) => cur = *p,
                    None => return false,
                }
            }
        });
        if minimal && grounded {
            total += pick.iter().enumerate().map(|(n, &i)| options[n][i].1).product::<f64>();
        }

        let mut n = 0;
        loop {
            if n == pick.len() {
                return total;
            }
            pick[n] += 1;
            if pick[n] < options[n].len() {
                break;
            }
            pick[n] = 0;
            n += 1;
        }
    }
}
