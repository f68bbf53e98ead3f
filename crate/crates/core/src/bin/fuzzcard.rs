//! Batch front-end: fit a dataset, replay a transcript, run the distribution
//! study or serve the HTTP API.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid input, 3 replay divergence.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use fuzzcard::cards::CardChain;
use fuzzcard::cfkm::{CentroidVector, FitReport, InitStrategy, SampleSet};
use fuzzcard::data::{load_csv, quiz_standin, synth_generate, Shape};
use fuzzcard::fuzzy::{FuzzyPartition, Interval};
use fuzzcard::pipeline::{
    replay, AdvanceRequest, CommitRequest, PipelineError, Proposal, ReplayMode, Session, SessionParams, Stage,
    TranscriptEntry,
};
use fuzzcard::service::{serve, AppState, SessionStore};
use fuzzcard::study::{run_study, StudyRun, DEFAULT_N, DEFAULT_SEED, STUDY_CASES};

#[derive(Debug, Parser)]
#[command(name = "fuzzcard", version, about = "Fuzzy-number elicitation from data and card chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a dataset and print centroids, the value-scale chain and the partition.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a session transcript and print the resulting partition.
    Replay {
        #[command(flatten)]
        data: DataArgs,
        /// Transcript JSON as exported by the service.
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long, value_enum, default_value_t = ReplayMode::Strict)]
        mode: ReplayMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the distribution study on synthetic shapes.
    Study {
        /// Shapes to run; defaults to each shape with the class count its check is defined for.
        #[arg(long = "shape", value_enum)]
        shapes: Vec<Shape>,
        /// Class counts; combined with every requested shape.
        #[arg(long = "k")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "FUZZCARD_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory holding one JSON document per session.
        #[arg(long, env = "FUZZCARD_STORE", default_value = "sessions")]
        store: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["csv", "synth", "standin"])))]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, requires = "column")]
    csv: Option<PathBuf>,
    #[arg(long)]
    column: Option<String>,
    /// Synthetic sample on [0, 1].
    #[arg(long, value_enum)]
    synth: Option<Shape>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Bundled stand-in for the quiz-marks data on [2.8, 10].
    #[arg(long)]
    standin: bool,
    /// Domain bounds; CSV data defaults to its observed range.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    bounds: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct ParamArgs {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    fuzzifier: Option<f64>,
    #[arg(long, value_enum)]
    init: Option<InitStrategy>,
    /// Decimal places of the value-scale chain.
    #[arg(long)]
    precision: Option<u32>,
    /// Core tolerance: memberships of at least 1 - tau count as full.
    #[arg(long)]
    tau: Option<f64>,
    /// Convergence tolerance on the largest centroid shift.
    #[arg(long)]
    tol_conv: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl ParamArgs {
    fn params(&self) -> Result<SessionParams, Failure> {
        let d = SessionParams::default();
        let params = SessionParams {
            k: self.k.unwrap_or(d.k),
            fuzzifier: self.fuzzifier.unwrap_or(d.fuzzifier),
            init: self.init.unwrap_or(d.init),
            scale_precision: self.precision.unwrap_or(d.scale_precision),
            core_tolerance: self.tau.unwrap_or(d.core_tolerance),
            convergence_tolerance: self.tol_conv.unwrap_or(d.convergence_tolerance),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            ..d
        };
        let errors = params.field_errors();
        if errors.is_empty() {
            Ok(params)
        } else {
            let lines: Vec<String> = errors.iter().map(|(f, m)| format!("{f}: {m}")).collect();
            Err(Failure::Invalid(format!("invalid parameters: {}", lines.join("; "))))
        }
    }
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Diverged(String),
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Params(_) | PipelineError::Request(_) | PipelineError::InsufficientData { .. } => {
                Failure::Invalid(e.to_string())
            }
            e => Failure::Other(e.to_string()),
        }
    }
}

impl DataArgs {
    fn bounds(&self) -> Option<(f64, f64)> {
        self.bounds.as_ref().map(|b| (b[0], b[1]))
    }

    fn load(&self) -> Result<(SampleSet, usize), Failure> {
        let invalid = |e: &dyn std::fmt::Display| Failure::Invalid(e.to_string());
        if let Some(path) = &self.csv {
            let column = self.column.as_deref().expect("clap requires --column with --csv");
            let loaded = load_csv(path, column, self.bounds()).map_err(|e| invalid(&e))?;
            if loaded.dropped > 0 {
                log::warn!("dropped {} non-numeric rows from column {column}", loaded.dropped);
            }
            return Ok((loaded.samples, loaded.dropped));
        }
        let data = match self.synth {
            Some(shape) => synth_generate(shape, self.n, self.seed).map_err(|e| invalid(&e))?,
            None => quiz_standin(),
        };
        match self.bounds() {
            Some((a, b)) => Ok((SampleSet::new(data.values().to_vec(), a, b).map_err(|e| invalid(&e))?, 0)),
            None => Ok((data, 0)),
        }
    }
}

#[derive(Serialize)]
struct DatasetInfo {
    n: usize,
    lower: f64,
    upper: f64,
    dropped: usize,
}

#[derive(Serialize)]
struct FitOutput {
    dataset: DatasetInfo,
    params: SessionParams,
    centroids: CentroidVector,
    report: FitReport,
    chain: CardChain,
    scale: CentroidVector,
    partition: FuzzyPartition,
}

#[derive(Serialize)]
struct ReplayOutput<'a> {
    stage: Stage,
    centroids: Option<&'a CentroidVector>,
    cores: Option<&'a [Interval]>,
    partition: Option<&'a FuzzyPartition>,
}

fn write_json(out: Option<&Path>, value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("outputs serialise") + "\n";
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::Other(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fit(data: &DataArgs, params: &ParamArgs, out: Option<&Path>) -> Result<(), Failure> {
    let params = params.params()?;
    let (samples, dropped) = data.load()?;
    let dataset = DatasetInfo { n: samples.len(), lower: samples.lower(), upper: samples.upper(), dropped };
    let mut session = Session::new(samples, params.clone())?;
    let Proposal::ValueScale { chain, centroids, report, .. } = session.advance(&AdvanceRequest::default())? else {
        unreachable!("first proposal is the value scale")
    };
    session.commit(&CommitRequest::default())?;
    let output = FitOutput {
        dataset,
        params,
        centroids,
        report,
        chain,
        scale: session.centroids().expect("committed").clone(),
        partition: session.partition().expect("committed").clone(),
    };
    write_json(out, &output)
}

fn replay_file(data: &DataArgs, transcript: &Path, mode: ReplayMode, out: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(transcript)
        .map_err(|e| Failure::Invalid(format!("cannot read {}: {e}", transcript.display())))?;
    let entries: Vec<TranscriptEntry> = serde_json::from_str(&text)
        .map_err(|e| Failure::Invalid(format!("malformed transcript {}: {e}", transcript.display())))?;
    let (samples, _) = data.load()?;
    let session = replay(samples, &entries, mode).map_err(|e| Failure::Diverged(e.to_string()))?;
    let output = ReplayOutput {
        stage: session.stage(),
        centroids: session.centroids(),
        cores: session.cores(),
        partition: session.partition(),
    };
    write_json(out, &output)
}

fn study(shapes: &[Shape], ks: &[usize], n: usize, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let cases: Vec<(Shape, usize)> = match (shapes.is_empty(), ks.is_empty()) {
        (true, true) => STUDY_CASES.to_vec(),
        (false, true) => {
            shapes.iter().map(|&s| (s, STUDY_CASES.iter().find(|c| c.0 == s).map_or(3, |c| c.1))).collect()
        }
        (true, false) => Shape::ALL.iter().flat_map(|&s| ks.iter().map(move |&k| (s, k))).collect(),
        (false, false) => shapes.iter().flat_map(|&s| ks.iter().map(move |&k| (s, k))).collect(),
    };
    let params = SessionParams::default();
    let mut runs: Vec<StudyRun> = Vec::new();
    for (shape, k) in cases {
        let run = run_study(shape, k, n, seed, &params)?;
        for check in &run.checks {
            let verdict = if check.passed { "PASS" } else { "FAIL" };
            eprintln!("{verdict} {} k={k}: {} ({})", shape.name(), check.name, check.detail);
        }
        runs.push(run);
    }
    write_json(out, &runs)?;
    if runs.iter().all(StudyRun::passed) {
        Ok(())
    } else {
        Err(Failure::Other("some study checks failed".into()))
    }
}

fn serve_api(addr: SocketAddr, store: &Path, params: &ParamArgs) -> Result<(), Failure> {
    let defaults = params.params()?;
    let store = SessionStore::open(store).map_err(|e| Failure::Other(e.to_string()))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Other(e.to_string()))?;
    log::info!("listening on {addr}, sessions in {}", store.root().display());
    runtime
        .block_on(serve(addr, AppState::new(store, defaults)))
        .map_err(|e| Failure::Other(format!("server failed: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit { data, params, out } => fit(data, params, out.as_deref()),
        Command::Replay { data, transcript, mode, out } => replay_file(data, transcript, *mode, out.as_deref()),
        Command::Study { shapes, ks, n, seed, out } => study(shapes, ks, *n, *seed, out.as_deref()),
        Command::Serve { addr, store, params } => serve_api(*addr, store, params),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Invalid(msg) | Failure::Diverged(msg) | Failure::Other(msg)) = &failure;
            eprintln!("error: {msg}");
            ExitCode::from(failure.code())
        }
    }
}
