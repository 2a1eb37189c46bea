//! Per-tick diagnosis reports: JSON lines and a ranked text table.

use std::fmt::Write as _;

use serde::Serialize;

use crate::gateway::{EvidenceLiteral, EvidenceSnapshot, Tick};
use crate::inference::{CubicGraph, HypothesisResult};
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    NoTrigger,
    Diagnosed,
    Ambiguous,
    Unexplained,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::NoTrigger => "no_trigger",
            Status::Diagnosed => "diagnosed",
            Status::Ambiguous => "ambiguous",
            Status::Unexplained => "unexplained",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvidenceReport {
    pub abnormal: Vec<EvidenceLiteral>,
    pub normal: Vec<EvidenceLiteral>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisReport {
    pub tick: Tick,
    pub status: Status,
    pub hypotheses: Vec<HypothesisResult>,
    pub evidence: EvidenceReport,
    /// Surviving cubic graphs, for export.
    #[serde(skip)]
    pub graphs: Vec<CubicGraph>,
    /// Diagnosis step `m` within the current episode; 0 for `no_trigger`.
    #[serde(skip)]
    pub step: usize,
    pub timing_ms: f64,
}

impl DiagnosisReport {
    pub fn new(ev: &EvidenceSnapshot, status: Status) -> Self {
        Self {
            tick: ev.tick,
            status,
            hypotheses: Vec::new(),
            evidence: EvidenceReport {
                abnormal: ev.abnormal_literals().into_iter().map(Into::into).collect(),
                normal: ev.normal_literals().into_iter().map(Into::into).collect(),
            },
            graphs: Vec::new(),
            step: 0,
            timing_ms: 0.0,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }

    /// Ranked table of hypotheses in the style of a monitoring screen.
    pub fn to_table(&self, kb: &KnowledgeBase) -> String {
        let mut out = format!("tick {}  {}  ({:.3} ms)\n", self.tick, self.status.as_str(), self.timing_ms);
        if self.hypotheses.is_empty() {
            return out;
        }
        let label = |h: &HypothesisResult| {
            let var = kb.variable(h.root);
            let name = var.map_or("", |v| v.label.as_str());
            let state = var.and_then(|v| v.state(h.state)).map_or("", |s| s.name.as_str());
            format!("B{},{} {} {}", h.root, h.state, name, state).trim_end().to_string()
        };
        let width = self.hypotheses.iter().map(|h| label(h).chars().count()).max().unwrap_or(0).max(10);
        let _ = writeln!(out, "{:>4}  {:<width$}  {:>10}  {:>10}", "rank", "hypothesis", "posterior", "xi");
        for (i, h) in self.hypotheses.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:>4}  {:<width$}  {:>10}  {:>10}",
                i + 1,
                label(h),
                fmt_prob(h.posterior),
                fmt_prob(h.xi)
            );
        }
        out
    }
}

/// Four significant digits, with anything below 1e-5 shown as `<1e-5`.
pub fn fmt_prob(p: f64) -> String {
    if p == 0.0 {
        return "0".into();
    }
    if p.abs() < 1e-5 {
        return "<1e-5".into();
    }
    let magnitude = p.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    let s = format!("{p:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
