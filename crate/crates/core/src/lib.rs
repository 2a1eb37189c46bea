//! Cubic DUCG fault diagnosis.
//!
//! A [`kb::KnowledgeBase`] holds expert-authored causal knowledge. The
//! [`gateway`] turns measure-point readings into evidence snapshots and decides
//! when a tick warrants inference. The [`inference`] engine builds one
//! time-layered graph per root cause, expands the evidence symbolically and
//! ranks the surviving hypotheses. [`report`] and [`dot`] render the results.

pub mod dot;
pub mod gateway;
pub mod inference;
pub mod kb;
pub mod monitor;
pub mod report;

pub use gateway::{EvidenceSnapshot, Reading};
pub use inference::{HypothesisResult, Session};
pub use kb::{KnowledgeBase, VarId};
pub use report::{DiagnosisReport, Status};
