//! Qualitative behaviour of the pipeline on synthetic distribution shapes.
//!
//! Each run clusters a synthetic sample with percentile initialisation and
//! accepts every proposal unchanged through Step 2.

use serde::{Deserialize, Serialize};

use crate::cfkm::InitStrategy;
use crate::data::{summarize, synth_generate, DatasetSummary, Shape};
use crate::fuzzy::{FuzzyPartition, Interval};
use crate::pipeline::{AdvanceRequest, CommitRequest, PipelineError, Proposal, Session, SessionParams};

/// Distance allowed between a class crossover and the nearest KDE valley.
pub const VALLEY_TOLERANCE: f64 = 0.05;
/// Largest coefficient of variation of centroid spacings on symmetric data.
pub const SPACING_CV_LIMIT: f64 = 0.15;
pub const DEFAULT_N: usize = 1000;
pub const DEFAULT_SEED: u64 = 42;

/// The shape and class count each qualitative check is defined for.
pub const STUDY_CASES: [(Shape, usize); 3] = [(Shape::Skewed, 3), (Shape::Multimodal, 3), (Shape::Symmetric, 5)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRun {
    pub shape: Shape,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
    pub summary: DatasetSummary,
    /// Centroids as fitted, before the value scale rounds them to cards.
    pub fitted_centroids: Vec<f64>,
    pub centroids: Vec<f64>,
    pub cores: Vec<Interval>,
    pub crossovers: Vec<f64>,
    pub partition: FuzzyPartition,
    pub checks: Vec<StudyCheck>,
}

impl StudyRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn spacing_cv(centroids: &[f64]) -> f64 {
    let d: Vec<f64> = centroids.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
    var.sqrt() / mean
}

fn checks(shape: Shape, k: usize, run: &StudyRun) -> Vec<StudyCheck> {
    let mut out = Vec::new();
    match shape {
        Shape::Skewed => {
            let lowest = run.cores[0].width();
            let highest = run.partition.classes()[k - 1].support().width();
            out.push(StudyCheck {
                name: "narrow lowest core".into(),
                passed: lowest < highest,
                detail: format!("lowest core width {lowest:.4} vs highest support width {highest:.4}"),
            });
        }
        Shape::Multimodal => {
            let valleys = run.summary.kde.valleys();
            let worst = run
                .crossovers
                .iter()
                .map(|&x| valleys.iter().map(|v| (v - x).abs()).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            out.push(StudyCheck {
                name: "crossovers in density valleys".into(),
                passed: worst <= VALLEY_TOLERANCE,
                detail: format!(
                    "crossovers {:?}, valleys {:?}, largest distance {worst:.4}",
                    round(&run.crossovers),
                    round(&valleys)
                ),
            });
        }
        Shape::Symmetric => {
            let cv = spacing_cv(&run.fitted_centroids);
            out.push(StudyCheck {
                name: "even centroid spacing".into(),
                passed: cv < SPACING_CV_LIMIT,
                detail: format!("spacing coefficient of variation {cv:.4}"),
            });
        }
    }
    out
}

fn round(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

/// Runs Steps 1 and 2 with identity commits on one synthetic sample.
pub fn run_study(
    shape: Shape,
    k: usize,
    n: usize,
    seed: u64,
    params: &SessionParams,
) -> Result<StudyRun, PipelineError> {
    let data = synth_generate(shape, n, seed).map_err(|e| PipelineError::Request(e.to_string()))?;
    let summary = summarize(&data, 30, None).map_err(|e| PipelineError::Request(e.to_string()))?;
    let params = SessionParams { k, init: InitStrategy::Percentile, ..params.clone() };
    let mut session = Session::new(data, params)?;
    let Proposal::ValueScale { centroids: fitted, .. } = session.advance(&AdvanceRequest::default())? else {
        unreachable!("first proposal is the value scale")
    };
    session.commit(&CommitRequest::default())?;
    session.advance(&AdvanceRequest::default())?;
    session.commit(&CommitRequest::default())?;
    let partition = session.partition().expect("committed").clone();
    let mut run = StudyRun {
        shape,
        k,
        n,
        seed,
        summary,
        fitted_centroids: fitted.into_vec(),
        centroids: session.centroids().expect("committed").as_slice().to_vec(),
        cores: session.cores().expect("committed").to_vec(),
        crossovers: partition.crossovers(),
        partition,
        checks: Vec::new(),
    };
    run.checks = checks(shape, k, &run);
    Ok(run)
}
