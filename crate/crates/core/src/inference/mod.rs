//! Cubic DUCG inference: slice simplification, cubic merge, symbolic
//! expansion, ranking and forward prediction.

mod expr;
mod graph;
mod predict;
mod rank;
mod session;

use thiserror::Error;

use crate::kb::{StateId, VarId, Violation};

pub use expr::{conjoin, EventExpression, FLiteral, Product};
pub use graph::{check_valid, merge_cubic, simplify, CubicGraph, Linkage, SliceGraph};
pub use predict::{predict, Prediction};
pub use rank::{
    eval_expression, evaluate_graph, expand, expand_with, rank_evaluations, rank_hypotheses, ExpandOptions,
    GraphEvaluation, HypothesisResult,
};
pub use session::Session;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("evidence holds no abnormal assignment")]
    NoAbnormalEvidence,
    #[error("cannot merge a slice of root {got} into the cubic graph of root {expected}")]
    RootMismatch { expected: VarId, got: VarId },
    #[error("slice of root {0} does not explain all abnormal evidence")]
    InvalidSlice(VarId),
    #[error("expansion of variable {0} exceeded the ancestor chain limit")]
    CycleLimit(VarId),
    #[error("no parameter for {0}")]
    MissingParameter(String),
    #[error("no cubic graph can explain the evidence")]
    EmptyHypothesisSpace,
    #[error("knowledge base fails validation ({} violations)", .0.len())]
    InvalidKb(Vec<Violation>),
    #[error("variable {0} is not a root cause")]
    UnknownRoot(VarId),
    #[error("B{0},{1} is not a current hypothesis")]
    NotAHypothesis(VarId, StateId),
}

impl InferenceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoAbnormalEvidence => "NO_ABNORMAL_EVIDENCE",
            Self::RootMismatch { .. } => "ROOT_MISMATCH",
            Self::InvalidSlice(_) => "INVALID_SLICE",
            Self::CycleLimit(_) => "CYCLE_LIMIT",
            Self::MissingParameter(_) => "MISSING_PARAMETER",
            Self::EmptyHypothesisSpace => "EMPTY_HYPOTHESIS_SPACE",
            Self::InvalidKb(_) => "INVALID_KB",
            Self::UnknownRoot(_) => "UNKNOWN_ROOT",
            Self::NotAHypothesis(..) => "NOT_A_HYPOTHESIS",
        }
    }
}
