use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AdvanceRequest, ChainTarget, CommitRequest, PipelineError, Session, SessionParams, Stage};
use crate::cards::CardEdit;
use crate::cfkm::SampleSet;
use crate::fuzzy::FuzzyPartition;

/// One recorded operation; `stage` is the stage the session reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: Stage,
    #[serde(flatten)]
    pub operation: Operation,
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operation", content = "payload", rename_all = "snake_case")]
pub enum Operation {
    Create(SessionParams),
    Advance(AdvanceRequest),
    Edits {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<ChainTarget>,
        edits: Vec<CardEdit>,
    },
    /// The chains that were committed.
    Commit(CommitRequest),
    Finalize {
        partition: FuzzyPartition,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Re-run every proposal and edit; any difference from the recorded
    /// commits is a divergence.
    #[default]
    Strict,
    /// Commit the recorded chains, so a transcript from other data still
    /// replays; edits that no longer apply are skipped.
    Recorded,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("transcript must start with a create entry")]
    NoCreate,
    #[error("step {index} ({operation}) failed: {source}")]
    Step {
        index: usize,
        operation: &'static str,
        #[source]
        source: PipelineError,
    },
    #[error("step {index} diverges from the transcript: {detail}")]
    Divergence { index: usize, detail: String },
}

impl ReplayError {
    pub fn index(&self) -> Option<usize> {
        match self {
            ReplayError::NoCreate => None,
            ReplayError::Step { index, .. } | ReplayError::Divergence { index, .. } => Some(*index),
        }
    }
}

fn differs(recorded: &CommitRequest, pending: &CommitRequest) -> Option<&'static str> {
    let pairs = [
        ("chain", &recorded.chain, &pending.chain),
        ("level chain", &recorded.level_chain, &pending.level_chain),
        ("breakpoint chain", &recorded.breakpoint_chain, &pending.breakpoint_chain),
    ];
    pairs.into_iter().find_map(|(name, r, p)| match (r, p) {
        (Some(r), Some(p)) if r.same_cards(p) => None,
        (None, None) => None,
        _ => Some(name),
    })
}

/// Re-runs a transcript on `dataset` and returns the resulting session.
pub fn replay(dataset: SampleSet, entries: &[TranscriptEntry], mode: ReplayMode) -> Result<Session, ReplayError> {
    let Some((first, rest)) = entries.split_first() else {
        return Err(ReplayError::NoCreate);
    };
    let Operation::Create(params) = &first.operation else {
        return Err(ReplayError::NoCreate);
    };
    let mut session = Session::new(dataset, params.clone()).map_err(|source| ReplayError::Step {
        index: 0,
        operation: "create",
        source,
    })?;

    for (offset, entry) in rest.iter().enumerate() {
        let index = offset + 1;
        let step = |operation| move |source| ReplayError::Step { index, operation, source };
        match &entry.operation {
            Operation::Create(_) => {
                return Err(ReplayError::Divergence { index, detail: "second create entry".into() })
            }
            Operation::Advance(request) => {
                session.advance(request).map_err(step("advance"))?;
            }
            Operation::Edits { target, edits } => match (session.apply_edits(*target, edits), mode) {
                (Ok(_), _) => {}
                (Err(source), ReplayMode::Strict) => {
                    return Err(ReplayError::Step { index, operation: "edits", source })
                }
                (Err(e), ReplayMode::Recorded) => log::warn!("step {index}: skipping edits ({e})"),
            },
            Operation::Commit(recorded) => {
                match mode {
                    ReplayMode::Strict => {
                        let pending = session.pending_commit().map_err(step("commit"))?;
                        if let Some(name) = differs(recorded, &pending) {
                            return Err(ReplayError::Divergence {
                                index,
                                detail: format!("the {name} to commit differs from the recorded one"),
                            });
                        }
                        session.commit(&CommitRequest::default())
                    }
                    ReplayMode::Recorded => session.commit(recorded),
                }
                .map_err(step("commit"))?;
            }
            Operation::Finalize { partition } => {
                let out = session.finalize().map_err(step("finalize"))?;
                if mode == ReplayMode::Strict && &out.partition != partition {
                    return Err(ReplayError::Divergence {
                        index,
                        detail: "final partition differs from the recorded one".into(),
                    });
                }
            }
        }
        if mode == ReplayMode::Strict && session.stage() != entry.stage {
            return Err(ReplayError::Divergence {
                index,
                detail: format!("reached {:?}, transcript records {:?}", session.stage(), entry.stage),
            });
        }
    }
    Ok(session)
}
