use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::gateway::EvidenceSnapshot;
use crate::kb::{decompose, validate_kb, KnowledgeBase, StateLiteral, SubDucg, VarId};
use crate::report::{DiagnosisReport, Status};

use super::graph::{check_valid, merge_cubic, simplify, CubicGraph};
use super::predict::{predict, Prediction};
use super::rank::{evaluate_graph, rank_evaluations};
use super::InferenceError;

/// Diagnosis state carried across ticks: one cubic graph per surviving root.
#[derive(Debug)]
pub struct Session {
    kb: Arc<KnowledgeBase>,
    subs: Vec<SubDucg>,
    graphs: BTreeMap<VarId, CubicGraph>,
    /// Roots still in the hypothesis space; `None` before the first diagnosis.
    candidates: Option<Vec<VarId>>,
    step: usize,
    evidence: Option<EvidenceSnapshot>,
}

impl Session {
    pub fn new(kb: Arc<KnowledgeBase>) -> Result<Self, InferenceError> {
        let violations = validate_kb(&kb);
        if !violations.is_empty() {
            return Err(InferenceError::InvalidKb(violations));
        }
        let subs = decompose(&kb);
        Ok(Self { kb, subs, graphs: BTreeMap::new(), candidates: None, step: 0, evidence: None })
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn subducgs(&self) -> &[SubDucg] {
        &self.subs
    }

    pub fn graphs(&self) -> impl Iterator<Item = &CubicGraph> {
        self.graphs.values()
    }

    pub fn graph(&self, root: VarId) -> Option<&CubicGraph> {
        self.graphs.get(&root)
    }

    /// Number of diagnosis steps run since the last reset.
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn reset(&mut self) {
        self.graphs.clear();
        self.candidates = None;
        self.step = 0;
        self.evidence = None;
    }

    /// Runs one diagnosis step on triggered evidence.
    ///
    /// Evidence without abnormal assignments ends the episode: the session is
    /// reset and a `no_trigger` report returned. When no graph explains the
    /// evidence the report is `unexplained` and the next trigger starts over.
    pub fn diagnose_tick(&mut self, ev: &EvidenceSnapshot) -> Result<DiagnosisReport, InferenceError> {
        let started = Instant::now();
        if !ev.has_abnormal() {
            self.reset();
            return Ok(DiagnosisReport::new(ev, Status::NoTrigger));
        }
        self.step += 1;
        let step = self.step;
        let kb = &*self.kb;
        let candidates: Vec<&SubDucg> = match &self.candidates {
            Some(roots) => self.subs.iter().filter(|s| roots.contains(&s.root)).collect(),
            None => self.subs.iter().collect(),
        };

        let mut previous = std::mem::take(&mut self.graphs);
        let prior: Vec<Option<CubicGraph>> = candidates.iter().map(|s| previous.remove(&s.root)).collect();
        let outcomes = candidates
            .par_iter()
            .zip(prior)
            .map(|(sub, prev)| {
                let slice = simplify(kb, sub, ev)?.with_step(step);
                if !slice.valid {
                    return Ok(None);
                }
                let cubic = merge_cubic(prev, slice)?;
                if !check_valid(kb, &cubic, ev) {
                    return Ok(None);
                }
                let eval = evaluate_graph(&cubic, ev, kb)?;
                Ok((eval.zeta > 0.0).then_some((cubic, eval)))
            })
            .collect::<Result<Vec<_>, InferenceError>>()?;

        let (graphs, evals): (Vec<CubicGraph>, Vec<_>) = outcomes.into_iter().flatten().unzip();
        let mut report = match rank_evaluations(&evals) {
            Ok(hypotheses) => {
                let status = if graphs.len() == 1 { Status::Diagnosed } else { Status::Ambiguous };
                let mut r = DiagnosisReport::new(ev, status);
                r.hypotheses = hypotheses;
                r
            }
            Err(InferenceError::EmptyHypothesisSpace) => DiagnosisReport::new(ev, Status::Unexplained),
            Err(e) => return Err(e),
        };
        report.step = step;

        if graphs.is_empty() {
            self.reset();
        } else {
            self.candidates = Some(graphs.iter().map(|g| g.root).collect());
            self.graphs = graphs.iter().map(|g| (g.root, g.clone())).collect();
            self.evidence = Some(ev.clone());
        }
        report.graphs = graphs;
        report.timing_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok(report)
    }

    /// Forward prediction from a surviving hypothesis on the latest evidence.
    pub fn predict(&self, hyp: StateLiteral) -> Result<Vec<Prediction>, InferenceError> {
        let (Some(_), Some(ev)) = (self.graphs.get(&hyp.var), &self.evidence) else {
            return Err(InferenceError::NotAHypothesis(hyp.var, hyp.state));
        };
        let sub = self
            .subs
            .iter()
            .find(|s| s.root == hyp.var)
            .ok_or(InferenceError::UnknownRoot(hyp.var))?;
        predict(&self.kb, sub, ev, hyp)
    }
}
