use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{CausalArc, KbError, KnowledgeBase, SubDucgDecl, VarId, VarKind, Variable};

/// One root cause together with every variable and arc it can influence.
#[derive(Debug, Clone, PartialEq)]
pub struct SubDucg {
    pub root: VarId,
    pub variables: BTreeMap<VarId, Variable>,
    pub arcs: Vec<CausalArc>,
}

impl SubDucg {
    /// Builds the module a declaration describes: its variables and every KB
    /// arc with both endpoints inside it.
    pub fn from_decl(kb: &KnowledgeBase, decl: &SubDucgDecl) -> Result<SubDucg, KbError> {
        let malformed = |reason: &str| KbError::MalformedSubDucg { root: decl.root, reason: reason.into() };
        let mut variables = BTreeMap::new();
        for &id in &decl.variables {
            let v = kb.variable(id).ok_or(KbError::UnknownVariable {
                id,
                context: format!("sub-DUCG {}", decl.root),
            })?;
            variables.insert(id, v.clone());
        }
        let roots: Vec<_> = variables.values().filter(|v| v.kind == VarKind::B).collect();
        if roots.len() != 1 || roots[0].id != decl.root {
            return Err(malformed("must contain exactly its root as B-type variable"));
        }
        let arcs: Vec<CausalArc> = kb
            .arcs()
            .iter()
            .filter(|a| variables.contains_key(&a.child) && variables.contains_key(&a.parent))
            .cloned()
            .collect();
        if arcs.iter().any(|a| a.child == decl.root) {
            return Err(malformed("root has a parent"));
        }
        Ok(SubDucg { root: decl.root, variables, arcs })
    }

    pub fn contains(&self, id: VarId) -> bool {
        self.variables.contains_key(&id)
    }

    pub fn root_variable(&self) -> &Variable {
        &self.variables[&self.root]
    }
}

/// Splits a KB into one sub-DUCG per B variable: everything reachable from
/// that root, plus the default causes (D) feeding those variables.
pub fn decompose(kb: &KnowledgeBase) -> Vec<SubDucg> {
    kb.roots().map(|root| reachable_subducg(kb, root.id)).collect()
}

fn reachable_subducg(kb: &KnowledgeBase, root: VarId) -> SubDucg {
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &id in kb.outgoing(v) {
            let child = kb.arc(id).child;
            if seen.insert(child) {
                queue.push_back(child);
            }
        }
    }
    let defaults: Vec<VarId> = seen
        .iter()
        .flat_map(|&v| kb.incoming(v).iter().map(|&id| kb.arc(id).parent))
        .filter(|p| kb.variable(*p).is_some_and(|v| v.kind == VarKind::D))
        .collect();
    seen.extend(defaults);

    let variables = seen
        .iter()
        .map(|id| (*id, kb.variable(*id).expect("reachable ids exist").clone()))
        .collect();
    let arcs = kb
        .arcs()
        .iter()
        .filter(|a| seen.contains(&a.child) && seen.contains(&a.parent))
        .cloned()
        .collect();
    SubDucg { root, variables, arcs }
}

/// Merges the selected sub-DUCGs into one reasoning KB.
///
/// Shared variables must be defined identically; arcs with the same child,
/// parent and condition must carry identical parameters. Any disagreement is
/// rejected. An empty selection means every sub-DUCG.
pub fn compile_kb(subgraphs: &[SubDucg], selection: &BTreeSet<VarId>) -> Result<KnowledgeBase, KbError> {
    let mut variables: BTreeMap<VarId, Variable> = BTreeMap::new();
    let mut arcs: Vec<CausalArc> = Vec::new();

    for sub in subgraphs
        .iter()
        .filter(|s| selection.is_empty() || selection.contains(&s.root))
    {
        for (id, v) in &sub.variables {
            match variables.get(id) {
                Some(existing) if existing != v => return Err(KbError::ConflictingVariable(*id)),
                Some(_) => {}
                None => {
                    variables.insert(*id, v.clone());
                }
            }
        }
        for arc in &sub.arcs {
            match arcs.iter().find(|a| a.key() == arc.key()) {
                Some(existing) if existing != arc => {
                    return Err(KbError::ConflictingArc { child: arc.child, parent: arc.parent })
                }
                Some(_) => {}
                None => arcs.push(arc.clone()),
            }
        }
    }
    KnowledgeBase::new(variables.into_values().collect(), arcs, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{IntensityMatrix, StateDef};

    fn two_state(id: u32, kind: VarKind) -> Variable {
        let v = Variable::new(id, kind, format!("v{id}"), vec![StateDef::new(0, "n"), StateDef::new(1, "a")]);
        if kind == VarKind::B {
            v.with_prior([(1, 0.1)])
        } else {
            v
        }
    }

    fn sample() -> KnowledgeBase {
        KnowledgeBase::new(
            vec![
                two_state(1, VarKind::B),
                two_state(2, VarKind::B),
                two_state(3, VarKind::X),
                two_state(4, VarKind::X),
                two_state(9, VarKind::D),
            ],
            vec![
                CausalArc::new(3, 1, IntensityMatrix::new().with(1, 1, 0.5)),
                CausalArc::new(4, 3, IntensityMatrix::new().with(1, 1, 0.5)),
                CausalArc::new(4, 2, IntensityMatrix::new().with(1, 1, 0.5)),
                CausalArc::new(4, 9, IntensityMatrix::new().with(1, 1, 0.01)),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn decompose_follows_reachability_and_defaults() {
        let subs = decompose(&sample());
        assert_eq!(subs.len(), 2);
        let ids = |s: &SubDucg| s.variables.keys().map(|v| v.0).collect::<Vec<_>>();
        assert_eq!(ids(&subs[0]), vec![1, 3, 4, 9]);
        assert_eq!(ids(&subs[1]), vec![2, 4, 9]);
        assert_eq!(subs[1].arcs.len(), 2);
    }

    #[test]
    fn compile_inverts_decompose() {
        let kb = sample();
        let subs = decompose(&kb);
        assert_eq!(compile_kb(&subs, &BTreeSet::new()).unwrap(), kb);
        let again = compile_kb(&decompose(&kb), &BTreeSet::new()).unwrap();
        assert_eq!(compile_kb(&decompose(&again), &BTreeSet::new()).unwrap(), again);
    }

    #[test]
    fn single_selection_is_identity() {
        let subs = decompose(&sample());
        let one = compile_kb(&subs, &BTreeSet::from([VarId(2)])).unwrap();
        assert_eq!(one.variable_count(), 3);
        assert_eq!(decompose(&one)[0], subs[1]);
    }

    #[test]
    fn conflicting_shared_variable_is_rejected() {
        let mut subs = decompose(&sample());
        subs[1].variables.get_mut(&VarId(4)).unwrap().states[1].name = "other".into();
        assert_eq!(
            compile_kb(&subs, &BTreeSet::new()).unwrap_err(),
            KbError::ConflictingVariable(VarId(4))
        );
    }

    #[test]
    fn conflicting_arc_parameters_are_rejected() {
        let mut subs = decompose(&sample());
        let arc = subs[1].arcs.iter_mut().find(|a| a.parent == VarId(9)).unwrap();
        arc.matrix.set(1, 1, 0.02);
        assert_eq!(
            compile_kb(&subs, &BTreeSet::new()).unwrap_err(),
            KbError::ConflictingArc { child: VarId(4), parent: VarId(9) }
        );
    }

    #[test]
    fn decl_requires_exactly_one_root() {
        let kb = sample();
        let decl = SubDucgDecl { root: VarId(1), variables: BTreeSet::from([VarId(1), VarId(2), VarId(3)]) };
        assert!(matches!(SubDucg::from_decl(&kb, &decl), Err(KbError::MalformedSubDucg { .. })));
        let decl = SubDucgDecl { root: VarId(1), variables: BTreeSet::from([VarId(1), VarId(3)]) };
        let sub = SubDucg::from_decl(&kb, &decl).unwrap();
        assert_eq!(sub.arcs.len(), 1);
    }
}
