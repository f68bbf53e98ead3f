//! The three-step elicitation session.
//!
//! Each step runs a data-driven proposal, shows it to the decision-maker as
//! a card chain, accepts card edits and commits the edited chain:
//!
//! 1. value scale: C-FKM centroids become the validated centroids;
//! 2. cores: cores extracted from the memberships become validated cores;
//! 3. sides: confidence levels and breakpoints of one side of one class,
//!    repeated as often as the decision-maker wants.
//!
//! Every operation is appended to a transcript that can be replayed.

mod cores;
mod session;
mod side;
mod transcript;

pub use cores::{extract_cores, CoreExtraction};
pub use session::{
    AdvanceRequest, ChainTarget, CommitOutcome, CommitRequest, FinalOutput, Proposal, Session, SessionParams, Stage,
    Step1State, Step2State, SCHEMA_VERSION,
};
pub use side::{Side, SideRefinement};
pub use transcript::{replay, Operation, ReplayError, ReplayMode, TranscriptEntry};

use thiserror::Error;

use crate::cards::CardError;
use crate::cfkm::CfkmError;
use crate::fuzzy::{FuzzyError, Interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("cannot {operation} in stage {stage:?}")]
    Stage { operation: &'static str, stage: Stage },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("invalid request: {0}")]
    Request(String),
    #[error("clustering failed: {0}")]
    Clustering(#[from] CfkmError),
    #[error("card chain: {0}")]
    Card(#[from] CardError),
    #[error("edit {index} rejected: {source}")]
    Edit {
        index: usize,
        #[source]
        source: CardError,
    },
    #[error("validated centroid {index} ({centroid}) lies outside its core [{}, {}]", core.lower, core.upper)]
    CentroidOutsideCore { index: usize, centroid: f64, core: Interval },
    #[error("cores {0} and {} overlap or are out of order", .0 + 1)]
    CoreOrder(usize),
    #[error("class {class} has no {side:?} side to refine")]
    NoSide { class: usize, side: Side },
    #[error("{side:?} side of class {class} has {distinct} distinct membership values, need {needed}")]
    InsufficientData { class: usize, side: Side, distinct: usize, needed: usize },
    #[error("membership function invalid: {0}")]
    Fuzzy(#[from] FuzzyError),
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;
