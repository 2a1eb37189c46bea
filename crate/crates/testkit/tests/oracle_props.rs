use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use ducg_core::gateway::EvidenceSnapshot;
use ducg_core::inference::{evaluate_graph, merge_cubic, simplify, Session};
use ducg_core::kb::{decompose, StateId, VarId};
use ducg_core::Status;
use ducg_testkit::{accumulate, load_kb, oracle, random_evidence, random_kb, GenConfig};
use proptest::prelude::*;

fn ev(pairs: &[(u32, StateId)]) -> BTreeMap<VarId, StateId> {
    pairs.iter().map(|(v, s)| (VarId(*v), *s)).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

#[test]
fn oracle_reproduces_hand_computed_appendix_values() {
    let kb = load_kb("appendix_a.json");
    let t1 = ev(&[(3, 0), (5, 1), (6, 0)]);
    let b1 = oracle(&kb, VarId(1), &t1);
    assert!(b1.valid);
    assert!(close(b1.zeta, 0.5 * 0.1 * 0.6 * 0.2));
    let b2 = oracle(&kb, VarId(2), &t1);
    assert!(close(b2.joints[&1], 0.5 * 0.5 * 0.1));
    assert!(close(b2.joints[&2], 0.5 * 0.1 * 0.3));

    let t3 = ev(&[(3, 0), (4, 1), (5, 1), (6, 1), (7, 1)]);
    assert!(!oracle(&kb, VarId(1), &t3).valid);
    let b2 = oracle(&kb, VarId(2), &t3);
    assert!(b2.valid);
    assert!(close(b2.joints[&1], 0.7 * 0.5 * 0.5 * 0.3 * 0.1));
    assert!(close(b2.joints[&2], 0.7 * 0.5 * 0.9 * 0.8 * 0.3));
    assert!(close(b2.zeta, 0.08085));
}

#[test]
fn oracle_treats_unobserved_intermediates_as_latent() {
    // X4 unobserved: X5 can be caused directly or through X4.
    let kb = load_kb("appendix_a.json");
    let e = ev(&[(4, 1)]);
    let b1 = oracle(&kb, VarId(1), &e);
    // B1 -> X3 -> X4 (0.5 * 0.2) or B1 -> X5 -> X4 (0.1 * 0.7), each at half weight.
    let expected = 0.2 * (0.5 * 0.5 * 0.2 + 0.5 * 0.1 * 0.7);
    assert!(close(b1.zeta, expected), "{} vs {expected}", b1.zeta);
}

fn check_engine_against_oracle(seed: u64) -> Result<(), TestCaseError> {
    let kb = random_kb(seed, GenConfig::default());
    let snapshot = random_evidence(&kb, seed, 1);
    for sub in decompose(&kb) {
        let expected = oracle(&kb, sub.root, &snapshot.assignments);
        let slice = simplify(&kb, &sub, &snapshot).unwrap();
        prop_assert_eq!(slice.valid, expected.valid, "root {}", sub.root);
        if !slice.valid {
            continue;
        }
        let cubic = merge_cubic(None, slice).unwrap();
        let got = evaluate_graph(&cubic, &snapshot, &kb).unwrap();
        prop_assert!(close(got.zeta, expected.zeta), "root {}: zeta {} vs {}", sub.root, got.zeta, expected.zeta);
        for (state, joint) in &got.joints {
            let want = expected.joints[state];
            prop_assert!(close(*joint, want), "root {} state {}: {} vs {}", sub.root, state, joint, want);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn engine_matches_oracle(seed in any::<u64>()) {
        check_engine_against_oracle(seed)?;
    }

    #[test]
    fn posteriors_and_weights_normalize(seed in any::<u64>()) {
        let kb = Arc::new(random_kb(seed, GenConfig::default()));
        let mut session = Session::new(kb.clone()).unwrap();
        let mut snapshot = random_evidence(&kb, seed, 1);
        for step in 0..3u64 {
            let report = session.diagnose_tick(&snapshot).unwrap();
            if !report.hypotheses.is_empty() {
                let total: f64 = report.hypotheses.iter().map(|h| h.posterior).sum();
                prop_assert!((total - 1.0).abs() <= 1e-9, "posteriors sum to {}", total);
                let xi: BTreeMap<VarId, f64> = report.hypotheses.iter().map(|h| (h.root, h.xi)).collect();
                prop_assert!((xi.values().sum::<f64>() - 1.0).abs() <= 1e-9);
                for h in &report.hypotheses {
                    prop_assert!(h.joint >= 0.0 && h.joint <= h.zeta + 1e-12);
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&h.posterior));
                }
                if xi.len() == 1 {
                    prop_assert_eq!(report.status, Status::Diagnosed);
                    prop_assert_eq!(xi.values().next().copied(), Some(1.0));
                }
            }
            match accumulate(&kb, &snapshot, seed.wrapping_add(step)) {
                Some(next) => snapshot = next,
                None => break,
            }
        }
    }

    #[test]
    fn hypothesis_space_only_shrinks_as_evidence_accumulates(seed in any::<u64>()) {
        let kb = Arc::new(random_kb(seed, GenConfig::default()));
        let mut session = Session::new(kb.clone()).unwrap();
        let mut snapshot = random_evidence(&kb, seed, 1);
        let mut survivors: Option<BTreeSet<VarId>> = None;
        for step in 0..4u64 {
            let report = session.diagnose_tick(&snapshot).unwrap();
            let roots: BTreeSet<VarId> = report.hypotheses.iter().map(|h| h.root).collect();
            if let Some(prev) = &survivors {
                prop_assert!(roots.is_subset(prev), "{:?} not within {:?}", roots, prev);
            }
            if roots.is_empty() {
                break;
            }
            survivors = Some(roots);
            match accumulate(&kb, &snapshot, seed.wrapping_add(step)) {
                Some(next) => snapshot = next,
                None => break,
            }
        }
    }

    #[test]
    fn sessions_are_deterministic(seed in any::<u64>()) {
        let kb = Arc::new(random_kb(seed, GenConfig::default()));
        let snapshot = random_evidence(&kb, seed, 1);
        let run = || {
            let mut s = Session::new(kb.clone()).unwrap();
            let mut r = s.diagnose_tick(&snapshot).unwrap();
            r.timing_ms = 0.0;
            r.to_json_line()
        };
        let first = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        prop_assert_eq!(pool.install(run), first);
    }

    #[test]
    fn unreachable_abnormal_evidence_discards_the_root(seed in any::<u64>()) {
        let kb = random_kb(seed, GenConfig::default());
        let snapshot = random_evidence(&kb, seed, 1);
        for sub in decompose(&kb) {
            let outside: Vec<VarId> = kb
                .variables()
                .filter(|v| v.kind == ducg_core::kb::VarKind::X && !sub.contains(v.id))
                .map(|v| v.id)
                .collect();
            let Some(&orphan) = outside.first() else { continue };
            let mut assignments = snapshot.assignments.clone();
            assignments.insert(orphan, 1);
            let injected = EvidenceSnapshot::from_assignments(1, &kb, assignments);
            prop_assert!(!simplify(&kb, &sub, &injected).unwrap().valid);
            let mut session = Session::new(Arc::new(kb.clone())).unwrap();
            let report = session.diagnose_tick(&injected).unwrap();
            prop_assert!(report.hypotheses.iter().all(|h| h.root != sub.root));
        }
    }
}

#[test]
fn generated_cases_are_not_degenerate() {
    let (mut valid, mut supported, mut multi_term, mut defaults) = (0, 0, 0, 0);
    for seed in 0..300u64 {
        let kb = random_kb(seed, GenConfig::default());
        let snapshot = random_evidence(&kb, seed, 1);
        defaults += usize::from(kb.variables().any(|v| v.kind == ducg_core::kb::VarKind::D));
        for sub in decompose(&kb) {
            let slice = simplify(&kb, &sub, &snapshot).unwrap();
            if !slice.valid {
                continue;
            }
            valid += 1;
            let got = evaluate_graph(&merge_cubic(None, slice).unwrap(), &snapshot, &kb).unwrap();
            supported += usize::from(got.zeta > 0.0);
            multi_term += usize::from(got.expression.len() > 2);
        }
    }
    eprintln!("valid {valid}, supported {supported}, multi-term {multi_term}, with default {defaults}");
    assert!(supported >= 100 && multi_term >= 30 && defaults >= 30);
}
