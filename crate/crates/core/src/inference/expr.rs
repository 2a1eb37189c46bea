//! Sum-of-products event algebra under weighted exclusive OR.
//!
//! A [`Product`] is a conjunction of root literals `B_{i,k}` and functional
//! literals `F_{nk;ij}`. Multiplying products collapses identical literals and
//! annihilates any product that would put one variable in two states, give
//! one child two different causes, or hold two different root causes.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::kb::{ArcId, StateId, StateLiteral, VarId};

/// Weighted functional event `(r_{n;i}/r_n) A_{nk;ij}`.
#[derive(Debug, Clone, Copy)]
pub struct FLiteral {
    pub child: VarId,
    pub child_state: StateId,
    pub parent: VarId,
    pub parent_state: StateId,
    pub arc: ArcId,
    /// `r_{n;i} / r_n` within the graph the literal was expanded in.
    pub weight: f64,
}

impl FLiteral {
    fn key(&self) -> (VarId, StateId, VarId, StateId, ArcId) {
        (self.child, self.child_state, self.parent, self.parent_state, self.arc)
    }
}

impl PartialEq for FLiteral {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for FLiteral {}

impl PartialOrd for FLiteral {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FLiteral {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl fmt::Display for FLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "F{},{};{},{}",
            self.child, self.child_state, self.parent, self.parent_state
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Product {
    roots: BTreeMap<VarId, StateId>,
    causes: BTreeMap<VarId, FLiteral>,
    states: BTreeMap<VarId, StateId>,
}

impl Product {
    /// The certain event.
    pub fn unit() -> Self {
        Self::default()
    }

    pub fn root(lit: StateLiteral) -> Self {
        let mut p = Self::unit();
        p.roots.insert(lit.var, lit.state);
        p.states.insert(lit.var, lit.state);
        p
    }

    /// A state that holds with certainty, such as an always-present default cause.
    pub fn fact(lit: StateLiteral) -> Self {
        let mut p = Self::unit();
        p.states.insert(lit.var, lit.state);
        p
    }

    pub fn cause(lit: FLiteral) -> Option<Self> {
        let mut p = Self::unit();
        p.causes.insert(lit.child, lit);
        p.assert_state(lit.child, lit.child_state)
            .then_some(())
            .and_then(|_| p.assert_state(lit.parent, lit.parent_state).then_some(p))
    }

    fn assert_state(&mut self, var: VarId, state: StateId) -> bool {
        *self.states.entry(var).or_insert(state) == state
    }

    /// Conjunction, or `None` when the two products are mutually exclusive.
    pub fn mul(&self, other: &Product) -> Option<Product> {
        let mut out = self.clone();
        for (&var, &state) in &other.states {
            if !out.assert_state(var, state) {
                return None;
            }
        }
        for (&child, lit) in &other.causes {
            match out.causes.get(&child) {
                Some(existing) if existing != lit => return None,
                Some(_) => {}
                None => {
                    out.causes.insert(child, *lit);
                }
            }
        }
        out.roots.extend(other.roots.iter().map(|(k, v)| (*k, *v)));
        // hypotheses are single faults
        (out.roots.len() <= 1).then_some(out)
    }

    pub fn root_literals(&self) -> impl Iterator<Item = StateLiteral> + '_ {
        self.roots.iter().map(|(v, s)| StateLiteral::new(*v, *s))
    }

    pub fn causes(&self) -> impl Iterator<Item = &FLiteral> {
        self.causes.values()
    }

    pub fn state_of(&self, var: VarId) -> Option<StateId> {
        self.states.get(&var).copied()
    }

    pub fn has_root(&self, root: VarId) -> bool {
        self.roots.contains_key(&root)
    }
}

impl fmt::Display for Product {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.causes.values().map(ToString::to_string).collect();
        parts.sort();
        parts.extend(self.roots.iter().map(|(v, s)| format!("B{v},{s}")));
        if parts.is_empty() {
            return f.write_str("1");
        }
        f.write_str(&parts.join(" "))
    }
}

/// Normalized sum of pairwise-distinct products. The empty sum is the
/// impossible event.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventExpression {
    terms: Vec<Product>,
}

impl EventExpression {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_terms([Product::unit()])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = Product>) -> Self {
        let mut terms: Vec<Product> = terms.into_iter().collect();
        terms.sort();
        terms.dedup();
        Self { terms }
    }

    pub fn root(lit: StateLiteral) -> Self {
        Self::from_terms([Product::root(lit)])
    }

    pub fn terms(&self) -> &[Product] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Weighted-exclusive-OR sum; identical products collapse.
    pub fn add(&self, other: &EventExpression) -> EventExpression {
        Self::from_terms(self.terms.iter().chain(&other.terms).cloned())
    }

    pub fn mul(&self, other: &EventExpression) -> EventExpression {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                if let Some(p) = a.mul(b) {
                    out.push(p);
                }
            }
        }
        Self::from_terms(out)
    }

    /// Multiplies by a single literal, dropping annihilated products.
    pub fn conjoin(&self, hyp: StateLiteral) -> EventExpression {
        self.mul(&EventExpression::root(hyp))
    }
}

impl fmt::Display for EventExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.terms.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(" + "))
    }
}

/// Free-standing form of [`EventExpression::conjoin`].
pub fn conjoin(expr: &EventExpression, hyp: StateLiteral) -> EventExpression {
    expr.conjoin(hyp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(v: u32, s: u32) -> StateLiteral {
        StateLiteral::new(VarId(v), s)
    }

    fn f(child: u32, cs: u32, parent: u32, ps: u32) -> FLiteral {
        FLiteral {
            child: VarId(child),
            child_state: cs,
            parent: VarId(parent),
            parent_state: ps,
            arc: ArcId((child * 100 + parent) as usize),
            weight: 1.0,
        }
    }

    fn term(lits: &[FLiteral], root: StateLiteral) -> Product {
        lits.iter()
            .fold(Product::root(root), |acc, l| acc.mul(&Product::cause(*l).unwrap()).unwrap())
    }

    #[test]
    fn cross_terms_annihilate() {
        // (F5,1;2,1 B2,1 + F5,1;2,2 B2,2)(F6,0;2,1 B2,1 + F6,0;2,2 B2,2)
        let x5 = EventExpression::from_terms([
            term(&[f(5, 1, 2, 1)], b(2, 1)),
            term(&[f(5, 1, 2, 2)], b(2, 2)),
        ]);
        let x6 = EventExpression::from_terms([
            term(&[f(6, 0, 2, 1)], b(2, 1)),
            term(&[f(6, 0, 2, 2)], b(2, 2)),
        ]);
        let e = x5.mul(&x6);
        assert_eq!(e.to_string(), "F5,1;2,1 F6,0;2,1 B2,1 + F5,1;2,2 F6,0;2,2 B2,2");
        assert_eq!(e.conjoin(b(2, 1)).to_string(), "F5,1;2,1 F6,0;2,1 B2,1");
        assert!(e.conjoin(b(1, 1)).is_empty());
    }

    #[test]
    fn different_causes_of_one_child_annihilate() {
        let a = Product::cause(f(4, 1, 5, 1)).unwrap();
        let c = Product::cause(f(4, 1, 3, 1)).unwrap();
        assert!(a.mul(&c).is_none());
        assert_eq!(a.mul(&a), Some(a.clone()));
    }

    #[test]
    fn empty_expression_prints_zero() {
        assert_eq!(EventExpression::zero().to_string(), "0");
        assert_eq!(EventExpression::one().to_string(), "1");
    }

    fn arb_product() -> impl Strategy<Value = Product> {
        (1u32..4, 1u32..3, proptest::collection::vec((3u32..7, 0u32..3, 1u32..4, 1u32..3), 0..4)).prop_map(
            |(root, rs, lits)| {
                lits.into_iter().fold(Product::root(b(root, rs)), |acc, (c, cs, p, ps)| {
                    match Product::cause(f(c, cs, p, ps)).and_then(|x| acc.mul(&x)) {
                        Some(next) => next,
                        None => acc,
                    }
                })
            },
        )
    }

    fn arb_expr() -> impl Strategy<Value = EventExpression> {
        proptest::collection::vec(arb_product(), 0..5).prop_map(EventExpression::from_terms)
    }

    proptest! {
        #[test]
        fn conjoin_is_idempotent(e in arb_expr(), root in 1u32..4, s in 1u32..3) {
            let once = e.conjoin(b(root, s));
            prop_assert_eq!(once.conjoin(b(root, s)), once);
        }

        #[test]
        fn different_states_are_exclusive(e in arb_expr(), root in 1u32..4) {
            prop_assert!(e.conjoin(b(root, 1)).conjoin(b(root, 2)).is_empty());
        }

        #[test]
        fn different_roots_are_exclusive(e in arb_expr(), r in 1u32..4, s in 1u32..3) {
            let other = r % 3 + 1;
            prop_assert!(e.conjoin(b(r, s)).conjoin(b(other, 1)).is_empty());
        }

        #[test]
        fn literals_are_idempotent(e in arb_expr()) {
            for t in e.terms() {
                prop_assert_eq!(t.mul(t), Some(t.clone()));
            }
            let squared = e.mul(&e);
            prop_assert!(e.terms().iter().all(|t| squared.terms().contains(t)));
            prop_assert_eq!(e.add(&e), e);
        }

        #[test]
        fn product_commutes(a in arb_expr(), c in arb_expr()) {
            prop_assert_eq!(a.mul(&c), c.mul(&a));
        }
    }
}
