//! Gateway and session glued into a per-tick monitoring loop.

use std::sync::Arc;

use thiserror::Error;

use crate::gateway::{ingest_tick, EvidenceSnapshot, GatewayConfig, GatewayError, Reading};
use crate::inference::{InferenceError, Session};
use crate::kb::KnowledgeBase;
use crate::report::{DiagnosisReport, Status};

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub report: DiagnosisReport,
    /// Whether the tick triggered inference.
    pub triggered: bool,
}

#[derive(Debug)]
pub struct Monitor {
    session: Session,
    config: GatewayConfig,
    snapshot: Option<EvidenceSnapshot>,
}

impl Monitor {
    pub fn new(kb: Arc<KnowledgeBase>, config: GatewayConfig) -> Result<Self, InferenceError> {
        Ok(Self { session: Session::new(kb)?, config, snapshot: None })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn snapshot(&self) -> Option<&EvidenceSnapshot> {
        self.snapshot.as_ref()
    }

    /// Feeds one tick of readings. Non-triggering ticks yield a `no_trigger`
    /// report.
    pub fn push_tick(&mut self, readings: &[Reading]) -> Result<TickOutcome, MonitorError> {
        let (snap, triggered) = ingest_tick(self.snapshot.as_ref(), readings, self.session.kb(), self.config)?;
        let report = if triggered {
            self.session.diagnose_tick(&snap)?
        } else {
            DiagnosisReport::new(&snap, Status::NoTrigger)
        };
        self.snapshot = Some(snap);
        Ok(TickOutcome { report, triggered })
    }
}
