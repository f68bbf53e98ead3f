use serde::{Deserialize, Serialize};

use super::side::{side_gap, SideInput};
use super::transcript::{Operation, TranscriptEntry};
use super::{extract_cores, CoreExtraction, PipelineError, Result, Side, SideRefinement};
use crate::cards::{
    required_precision, values_to_cards, values_to_cards_with_ties, CardChain, CardEdit, CardError, ChainDraft,
    MAX_PRECISION,
};
use crate::cfkm::{
    layout_from_memberships, membership_pair, run_cfkm, update_memberships, CentroidVector, CfkmConfig, FitReport,
    InitStrategy, MembershipMatrix, SampleSet,
};
use crate::fuzzy::{Breakpoint, FuzzyPartition, Interval, PartitionLayout};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Created,
    Step1Proposed,
    Step1Committed,
    Step2Proposed,
    Step2Committed,
    Step3InProgress,
    Finalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionParams {
    pub k: usize,
    pub fuzzifier: f64,
    /// Memberships within this distance of one count as full membership
    /// when cores are read off the data.
    pub core_tolerance: f64,
    pub convergence_tolerance: f64,
    pub max_iter: usize,
    pub init: InitStrategy,
    pub scale_precision: u32,
    pub core_precision: u32,
    pub level_precision: u32,
    pub breakpoint_precision: u32,
    pub side_clusters: usize,
}

impl Default for SessionParams {
    fn default() -> Self {
        Self {
            k: 3,
            fuzzifier: 2.0,
            core_tolerance: 0.01,
            convergence_tolerance: 1e-6,
            max_iter: 500,
            init: InitStrategy::Even,
            scale_precision: 2,
            core_precision: 2,
            level_precision: 2,
            breakpoint_precision: 3,
            side_clusters: 3,
        }
    }
}

impl SessionParams {
    /// Every offending field with a message.
    pub fn field_errors(&self) -> Vec<(&'static str, String)> {
        let mut errors = Vec::new();
        if self.k < 2 {
            errors.push(("k", format!("must be at least 2, got {}", self.k)));
        }
        if !(self.fuzzifier.is_finite() && self.fuzzifier > 1.0) {
            errors.push(("fuzzifier", format!("must be > 1, got {}", self.fuzzifier)));
        }
        if !(0.0..1.0).contains(&self.core_tolerance) {
            errors.push(("core_tolerance", format!("must be in [0, 1), got {}", self.core_tolerance)));
        }
        if !(self.convergence_tolerance.is_finite() && self.convergence_tolerance > 0.0) {
            errors.push(("convergence_tolerance", format!("must be > 0, got {}", self.convergence_tolerance)));
        }
        if self.max_iter == 0 {
            errors.push(("max_iter", "must be at least 1".into()));
        }
        for (name, p) in [
            ("scale_precision", self.scale_precision),
            ("core_precision", self.core_precision),
            ("level_precision", self.level_precision),
            ("breakpoint_precision", self.breakpoint_precision),
        ] {
            if p == 0 || p > MAX_PRECISION {
                errors.push((name, format!("must be in 1..={MAX_PRECISION}, got {p}")));
            }
        }
        if self.side_clusters == 0 {
            errors.push(("side_clusters", "must be at least 1".into()));
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.field_errors();
        if errors.is_empty() {
            return Ok(());
        }
        let msg = errors.iter().map(|(f, m)| format!("{f}: {m}")).collect::<Vec<_>>().join("; ");
        Err(PipelineError::Params(msg))
    }

    fn cfkm_config(&self) -> CfkmConfig {
        CfkmConfig::new(self.k)
            .with_fuzzifier(self.fuzzifier)
            .with_init(self.init)
            .with_tolerance(self.convergence_tolerance)
            .with_max_iter(self.max_iter)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1State {
    pub proposed: CentroidVector,
    pub report: FitReport,
    pub draft: ChainDraft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2State {
    pub extraction: CoreExtraction,
    pub draft: ChainDraft,
}

/// Body of an advance request; the fields only matter for Step 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdvanceRequest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_side: Option<usize>,
}

impl AdvanceRequest {
    pub fn side(class: usize, side: Side, k_side: Option<usize>) -> Self {
        Self { class: Some(class), side: Some(side), k_side }
    }
}

/// Which chain of an open side refinement an edit addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainTarget {
    Levels,
    Breakpoints,
}

/// Chains to commit. Absent chains default to the edited drafts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommitRequest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<CardChain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_chain: Option<CardChain>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakpoint_chain: Option<CardChain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Proposal {
    ValueScale { chain: CardChain, centroids: CentroidVector, report: FitReport, preview: FuzzyPartition },
    Cores { chain: CardChain, cores: Vec<Interval>, fallbacks: Vec<usize>, preview: Option<FuzzyPartition> },
    Side { refinement: SideRefinement, preview: Option<FuzzyPartition> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum CommitOutcome {
    ValueScale { centroids: CentroidVector, memberships: MembershipMatrix, partition: FuzzyPartition },
    Cores { cores: Vec<Interval>, partition: FuzzyPartition },
    Side { class: usize, side: Side, levels: Vec<f64>, breakpoints: Vec<f64>, partition: FuzzyPartition },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalOutput {
    pub partition: FuzzyPartition,
    pub centroids: CentroidVector,
    pub cores: Vec<Interval>,
    pub transcript: Vec<TranscriptEntry>,
}

/// One elicitation over one dataset.
///
/// Every method either succeeds and appends to the transcript or fails
/// leaving the session untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    schema_version: u32,
    id: String,
    created_at: String,
    dataset: SampleSet,
    params: SessionParams,
    stage: Stage,
    step1: Option<Step1State>,
    centroids: Option<CentroidVector>,
    memberships: Option<MembershipMatrix>,
    step2: Option<Step2State>,
    cores: Option<Vec<Interval>>,
    layout: Option<PartitionLayout>,
    partition: Option<FuzzyPartition>,
    refinement: Option<SideRefinement>,
    transcript: Vec<TranscriptEntry>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn scale_labels(k: usize) -> Vec<String> {
    let mut labels = vec!["a".to_string()];
    labels.extend((1..=k).map(|j| format!("v_{j}")));
    labels.push("b".into());
    labels
}

fn core_labels(k: usize) -> Vec<String> {
    (1..=k).flat_map(|j| [format!("c_{j}^-"), format!("c_{j}^+")]).collect()
}

fn ensure_compatible(draft: &ChainDraft, chain: &CardChain) -> Result<()> {
    let current = &draft.current;
    if chain.domain() != current.domain() || chain.labels() != current.labels() {
        return Err(PipelineError::Request(
            "committed chain must have the domain and anchors of the proposed chain".into(),
        ));
    }
    Ok(())
}

/// Card position of `x`, rounded up, in a chain of `total` cards.
fn ceil_units(domain: Interval, x: f64, total: u64) -> u64 {
    let scaled = total as f64 * (x - domain.lower) / domain.width();
    let nearest = scaled.round();
    if (scaled - nearest).abs() <= 1e-12 * scaled.abs().max(1.0) {
        nearest as u64
    } else {
        scaled.ceil() as u64
    }
}

/// Encodes core bounds so that every decoded core still contains its
/// centroid: upper bounds are pushed up to the centroid's card when
/// flooring would drop below it.
fn core_chain(domain: Interval, cores: &[Interval], centroids: &[f64], start: u32) -> Result<CardChain> {
    let values: Vec<f64> = cores.iter().flat_map(|c| [c.lower, c.upper]).collect();
    let labels = core_labels(cores.len());
    let mut p = required_precision(domain, &values, start)?;
    loop {
        let chain = values_to_cards_with_ties(domain, labels.clone(), &values, p)?;
        let total = chain.total();
        let mut cum: Vec<u64> = chain.anchors().iter().map(|a| a.cumulative).collect();
        for (j, &v) in centroids.iter().enumerate() {
            cum[2 * j + 1] = cum[2 * j + 1].max(ceil_units(domain, v, total));
        }
        let last = cum.len() - 1;
        let ordered = cum.windows(2).enumerate().all(|(i, w)| if i % 2 == 1 { w[0] < w[1] } else { w[0] <= w[1] })
            && cum[1..last].iter().all(|&c| c > 0 && c < total);
        if ordered {
            let gaps = cum.windows(2).map(|w| w[1] - w[0]).collect();
            return Ok(CardChain::from_gaps(domain, labels, gaps, p, 0)?);
        }
        if p >= MAX_PRECISION {
            return Err(CardError::PrecisionExhausted.into());
        }
        p += 1;
    }
}

fn decode_cores(chain: &CardChain) -> Vec<Interval> {
    chain.values().chunks(2).map(|c| Interval::new(c[0], c[1])).collect()
}

fn check_cores(cores: &[Interval], centroids: &CentroidVector, domain: Interval) -> Result<()> {
    if cores.len() != centroids.len() {
        return Err(PipelineError::Request(format!("{} cores for {} centroids", cores.len(), centroids.len())));
    }
    for (j, pair) in cores.windows(2).enumerate() {
        if !(pair[0].upper < pair[1].lower) {
            return Err(PipelineError::CoreOrder(j));
        }
    }
    let slack = 1e-9 * domain.width();
    for (index, (core, &centroid)) in cores.iter().zip(centroids.as_slice()).enumerate() {
        if core.lower > core.upper || centroid < core.lower - slack || centroid > core.upper + slack {
            return Err(PipelineError::CentroidOutsideCore { index, centroid, core: *core });
        }
    }
    Ok(())
}

/// Layout after Step 2: full membership inside the cores and, between
/// cores, the two-cluster rule with the facing core bounds as centroids.
fn core_layout(data: &SampleSet, cores: &[Interval], fuzzifier: f64) -> PartitionLayout {
    let mut xs = data.values().to_vec();
    xs.dedup();
    let gaps = cores
        .windows(2)
        .map(|pair| {
            let (left, right) = (pair[0].upper, pair[1].lower);
            xs.iter()
                .filter(|&&x| x > left && x < right)
                .map(|&x| Breakpoint::new(x, membership_pair((x - left).powi(2), (x - right).powi(2), fuzzifier)))
                .collect()
        })
        .collect();
    PartitionLayout::new(data.lower(), data.upper(), cores.to_vec(), gaps)
}

fn render(layout: &PartitionLayout) -> Result<FuzzyPartition> {
    let partition = layout.to_partition()?;
    partition.validate()?;
    Ok(partition)
}

impl Session {
    pub fn new(dataset: SampleSet, params: SessionParams) -> Result<Self> {
        params.validate()?;
        let mut session = Self {
            schema_version: SCHEMA_VERSION,
            id: uuid::Uuid::new_v4().to_string(),
            created_at: now(),
            dataset,
            params: params.clone(),
            stage: Stage::Created,
            step1: None,
            centroids: None,
            memberships: None,
            step2: None,
            cores: None,
            layout: None,
            partition: None,
            refinement: None,
            transcript: Vec::new(),
        };
        session.record(Operation::Create(params));
        Ok(session)
    }

    fn record(&mut self, operation: Operation) {
        self.transcript.push(TranscriptEntry { stage: self.stage, operation, timestamp: now() });
    }

    fn stage_error(&self, operation: &'static str) -> PipelineError {
        PipelineError::Stage { operation, stage: self.stage }
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn dataset(&self) -> &SampleSet {
        &self.dataset
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn step1(&self) -> Option<&Step1State> {
        self.step1.as_ref()
    }

    pub fn step2(&self) -> Option<&Step2State> {
        self.step2.as_ref()
    }

    /// Validated centroids, once Step 1 is committed.
    pub fn centroids(&self) -> Option<&CentroidVector> {
        self.centroids.as_ref()
    }

    pub fn memberships(&self) -> Option<&MembershipMatrix> {
        self.memberships.as_ref()
    }

    /// Validated cores, once Step 2 is committed.
    pub fn cores(&self) -> Option<&[Interval]> {
        self.cores.as_deref()
    }

    pub fn layout(&self) -> Option<&PartitionLayout> {
        self.layout.as_ref()
    }

    /// Latest committed partition.
    pub fn partition(&self) -> Option<&FuzzyPartition> {
        self.partition.as_ref()
    }

    pub fn refinement(&self) -> Option<&SideRefinement> {
        self.refinement.as_ref()
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    /// The chain awaiting edits in the current stage, if any.
    pub fn current_chain(&self) -> Option<&CardChain> {
        match self.stage {
            Stage::Step1Proposed => self.step1.as_ref().map(|s| &s.draft.current),
            Stage::Step2Proposed => self.step2.as_ref().map(|s| &s.draft.current),
            _ => None,
        }
    }

    /// Runs the proposal matching the current stage.
    pub fn advance(&mut self, request: &AdvanceRequest) -> Result<Proposal> {
        match self.stage {
            Stage::Created => self.propose_scale(request),
            Stage::Step1Committed => self.propose_cores(request),
            Stage::Step2Committed | Stage::Step3InProgress => self.propose_side(request),
            _ => Err(self.stage_error("advance")),
        }
    }

    fn propose_scale(&mut self, request: &AdvanceRequest) -> Result<Proposal> {
        let fit = run_cfkm(&self.dataset, &self.params.cfkm_config())?;
        let domain = Interval::new(self.dataset.lower(), self.dataset.upper());
        let mut tuple = vec![domain.lower];
        tuple.extend_from_slice(fit.centroids.as_slice());
        tuple.push(domain.upper);
        let p = required_precision(domain, &tuple, self.params.scale_precision)?;
        let chain = values_to_cards(domain, scale_labels(self.params.k), &tuple, p)?;
        let preview = render(&layout_from_memberships(&self.dataset, &fit.centroids, &fit.memberships)?)?;

        self.step1 = Some(Step1State {
            proposed: fit.centroids.clone(),
            report: fit.report.clone(),
            draft: ChainDraft::new(chain.clone()),
        });
        self.stage = Stage::Step1Proposed;
        self.record(Operation::Advance(request.clone()));
        Ok(Proposal::ValueScale { chain, centroids: fit.centroids, report: fit.report, preview })
    }

    fn propose_cores(&mut self, request: &AdvanceRequest) -> Result<Proposal> {
        let centroids = self.centroids.as_ref().ok_or_else(|| self.stage_error("advance"))?;
        let memberships = self.memberships.as_ref().ok_or_else(|| self.stage_error("advance"))?;
        let extraction = extract_cores(&self.dataset, centroids, memberships, self.params.core_tolerance)?;
        let domain = Interval::new(self.dataset.lower(), self.dataset.upper());
        let chain = core_chain(domain, &extraction.cores, centroids.as_slice(), self.params.core_precision)?;
        let decoded = decode_cores(&chain);
        let preview = check_cores(&decoded, centroids, domain)
            .and_then(|_| render(&core_layout(&self.dataset, &decoded, self.params.fuzzifier)))
            .ok();

        let proposal = Proposal::Cores {
            chain: chain.clone(),
            cores: extraction.cores.clone(),
            fallbacks: extraction.fallbacks.clone(),
            preview,
        };
        self.step2 = Some(Step2State { extraction, draft: ChainDraft::new(chain) });
        self.stage = Stage::Step2Proposed;
        self.record(Operation::Advance(request.clone()));
        Ok(proposal)
    }

    fn propose_side(&mut self, request: &AdvanceRequest) -> Result<Proposal> {
        let (Some(class), Some(side)) = (request.class, request.side) else {
            return Err(PipelineError::Request("step 3 needs a class and a side".into()));
        };
        let k_side = request.k_side.unwrap_or(self.params.side_clusters);
        let layout = self.layout.as_ref().ok_or_else(|| self.stage_error("advance"))?;
        let partition = self.partition.as_ref().ok_or_else(|| self.stage_error("advance"))?;
        side_gap(layout, class, side)?;
        let refinement = SideRefinement::propose(SideInput {
            data: &self.dataset,
            layout,
            class: &partition.classes()[class],
            class_index: class,
            side,
            k_side,
            fuzzifier: self.params.fuzzifier,
            tolerance: self.params.convergence_tolerance,
            max_iter: self.params.max_iter,
            level_precision: self.params.level_precision,
            breakpoint_precision: self.params.breakpoint_precision,
        })?;
        let preview =
            self.side_layout(&refinement, &refinement.levels, &refinement.breakpoints).and_then(|l| render(&l)).ok();

        if let Some(open) = &self.refinement {
            log::info!("replacing open refinement of class {} {:?} side", open.class, open.side);
        }
        self.refinement = Some(refinement.clone());
        self.stage = Stage::Step3InProgress;
        self.record(Operation::Advance(AdvanceRequest::side(class, side, Some(k_side))));
        Ok(Proposal::Side { refinement, preview })
    }

    fn side_layout(&self, r: &SideRefinement, levels: &[f64], breakpoints: &[f64]) -> Result<PartitionLayout> {
        let mut layout = self.layout.clone().ok_or_else(|| self.stage_error("commit"))?;
        let gap = side_gap(&layout, r.class, r.side)?;
        layout.gaps[gap] = r.gap_profile(levels, breakpoints);
        Ok(layout)
    }

    /// Applies edits to the chain of the current stage, all or none.
    pub fn apply_edits(&mut self, target: Option<ChainTarget>, edits: &[CardEdit]) -> Result<CardChain> {
        let edit_error = |(index, source)| PipelineError::Edit { index, source };
        let chain = match self.stage {
            Stage::Step1Proposed | Stage::Step2Proposed => {
                let draft = match self.stage {
                    Stage::Step1Proposed => self.step1.as_mut().map(|s| &mut s.draft),
                    _ => self.step2.as_mut().map(|s| &mut s.draft),
                };
                let draft = draft.ok_or(PipelineError::Stage { operation: "edit", stage: self.stage })?;
                draft.apply_all(edits).map_err(edit_error)?;
                draft.current.clone()
            }
            Stage::Step3InProgress if self.refinement.is_some() => {
                let target = target.ok_or_else(|| {
                    PipelineError::Request("step 3 edits need a target: levels or breakpoints".into())
                })?;
                let mut r = self.refinement.clone().expect("checked above");
                match target {
                    ChainTarget::Levels => {
                        r.level_chain.apply_all(edits).map_err(edit_error)?;
                        if !edits.is_empty() {
                            let class = &self.partition.as_ref().expect("step 3 has a partition").classes()[r.class];
                            r.rebuild_breakpoints(class)?;
                        }
                    }
                    ChainTarget::Breakpoints => {
                        r.breakpoint_chain.apply_all(edits).map_err(edit_error)?;
                        r.refresh_breakpoints();
                    }
                }
                let chain = match target {
                    ChainTarget::Levels => r.level_chain.current.clone(),
                    ChainTarget::Breakpoints => r.breakpoint_chain.current.clone(),
                };
                self.refinement = Some(r);
                chain
            }
            _ => return Err(self.stage_error("edit")),
        };
        if !edits.is_empty() {
            self.record(Operation::Edits { target, edits: edits.to_vec() });
        }
        Ok(chain)
    }

    /// The chains a commit without overrides would use.
    pub fn pending_commit(&self) -> Result<CommitRequest> {
        match self.stage {
            Stage::Step1Proposed | Stage::Step2Proposed => {
                Ok(CommitRequest { chain: self.current_chain().cloned(), ..Default::default() })
            }
            Stage::Step3InProgress if self.refinement.is_some() => {
                let r = self.refinement.as_ref().expect("checked above");
                Ok(CommitRequest {
                    level_chain: Some(r.level_chain.current.clone()),
                    breakpoint_chain: Some(r.breakpoint_chain.current.clone()),
                    ..Default::default()
                })
            }
            _ => Err(self.stage_error("commit")),
        }
    }

    /// Commits the edited chain of the current stage and recomputes the
    /// partition.
    pub fn commit(&mut self, request: &CommitRequest) -> Result<CommitOutcome> {
        match self.stage {
            Stage::Step1Proposed => self.commit_scale(request),
            Stage::Step2Proposed => self.commit_cores(request),
            Stage::Step3InProgress if self.refinement.is_some() => self.commit_side(request),
            _ => Err(self.stage_error("commit")),
        }
    }

    fn commit_scale(&mut self, request: &CommitRequest) -> Result<CommitOutcome> {
        let state = self.step1.as_ref().ok_or_else(|| self.stage_error("commit"))?;
        let chain = match &request.chain {
            Some(chain) => {
                ensure_compatible(&state.draft, chain)?;
                chain.clone()
            }
            None => state.draft.current.clone(),
        };
        let centroids = CentroidVector::new(chain.interior_values(), self.dataset.lower(), self.dataset.upper())?;
        let memberships = update_memberships(&self.dataset, &centroids, self.params.fuzzifier)?;
        let layout = layout_from_memberships(&self.dataset, &centroids, &memberships)?;
        let partition = render(&layout)?;

        self.centroids = Some(centroids.clone());
        self.memberships = Some(memberships.clone());
        self.layout = Some(layout);
        self.partition = Some(partition.clone());
        self.stage = Stage::Step1Committed;
        self.record(Operation::Commit(CommitRequest { chain: Some(chain), ..Default::default() }));
        Ok(CommitOutcome::ValueScale { centroids, memberships, partition })
    }

    fn commit_cores(&mut self, request: &CommitRequest) -> Result<CommitOutcome> {
        let state = self.step2.as_ref().ok_or_else(|| self.stage_error("commit"))?;
        let centroids = self.centroids.as_ref().ok_or_else(|| self.stage_error("commit"))?;
        let chain = match &request.chain {
            Some(chain) => {
                ensure_compatible(&state.draft, chain)?;
                chain.clone()
            }
            None => state.draft.current.clone(),
        };
        let cores = decode_cores(&chain);
        check_cores(&cores, centroids, chain.domain())?;
        let layout = core_layout(&self.dataset, &cores, self.params.fuzzifier);
        let partition = render(&layout)?;

        self.cores = Some(cores.clone());
        self.layout = Some(layout);
        self.partition = Some(partition.clone());
        self.stage = Stage::Step2Committed;
        self.record(Operation::Commit(CommitRequest { chain: Some(chain), ..Default::default() }));
        Ok(CommitOutcome::Cores { cores, partition })
    }

    fn commit_side(&mut self, request: &CommitRequest) -> Result<CommitOutcome> {
        let mut r = self.refinement.clone().ok_or_else(|| self.stage_error("commit"))?;
        if let Some(levels) = &request.level_chain {
            ensure_compatible(&r.level_chain, levels)?;
            if !levels.same_cards(&r.level_chain.current) {
                r.level_chain.current = levels.clone();
                let class = &self.partition.as_ref().expect("step 3 has a partition").classes()[r.class];
                r.rebuild_breakpoints(class)?;
            }
        }
        if let Some(breakpoints) = &request.breakpoint_chain {
            ensure_compatible(&r.breakpoint_chain, breakpoints)?;
            r.breakpoint_chain.current = breakpoints.clone();
            r.refresh_breakpoints();
        }
        let levels = r.level_chain.current.interior_values();
        let breakpoints = r.breakpoint_chain.current.interior_values();
        let strictly_inside = |v: &[f64], lo: f64, hi: f64| {
            v.first().is_none_or(|&f| f > lo) && v.last().is_none_or(|&l| l < hi) && v.windows(2).all(|w| w[0] < w[1])
        };
        if levels.len() != breakpoints.len()
            || !strictly_inside(&levels, 0.0, 1.0)
            || !strictly_inside(&breakpoints, r.interval.lower, r.interval.upper)
        {
            return Err(PipelineError::Request(
                "levels must increase inside (0, 1) and breakpoints inside the side interval".into(),
            ));
        }
        let layout = self.side_layout(&r, &levels, &breakpoints)?;
        let partition = render(&layout)?;

        self.layout = Some(layout);
        self.partition = Some(partition.clone());
        self.refinement = None;
        self.record(Operation::Commit(CommitRequest {
            chain: None,
            level_chain: Some(r.level_chain.current.clone()),
            breakpoint_chain: Some(r.breakpoint_chain.current.clone()),
        }));
        Ok(CommitOutcome::Side { class: r.class, side: r.side, levels, breakpoints, partition })
    }

    /// Freezes the partition. Calling it again returns the same output.
    pub fn finalize(&mut self) -> Result<FinalOutput> {
        match self.stage {
            Stage::Step2Committed | Stage::Step3InProgress => {
                let partition = self.partition.clone().ok_or_else(|| self.stage_error("finalize"))?;
                if self.refinement.take().is_some() {
                    log::info!("discarding open side refinement at finalize");
                }
                self.stage = Stage::Finalized;
                self.record(Operation::Finalize { partition });
            }
            Stage::Finalized => {}
            _ => return Err(self.stage_error("finalize")),
        }
        self.final_output().ok_or_else(|| self.stage_error("finalize"))
    }

    pub fn final_output(&self) -> Option<FinalOutput> {
        if self.stage != Stage::Finalized {
            return None;
        }
        Some(FinalOutput {
            partition: self.partition.clone()?,
            centroids: self.centroids.clone()?,
            cores: self.cores.clone()?,
            transcript: self.transcript.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, Shape};

    fn symmetric_session(k: usize) -> Session {
        let data = synth_generate(Shape::Symmetric, 600, 4).unwrap();
        Session::new(data, SessionParams { k, ..Default::default() }).unwrap()
    }

    #[test]
    fn params_report_each_field() {
        let params = SessionParams { k: 1, fuzzifier: 1.0, ..Default::default() };
        let fields: Vec<_> = params.field_errors().into_iter().map(|(f, _)| f).collect();
        assert_eq!(fields, vec!["k", "fuzzifier"]);
        let data = SampleSet::new(vec![0.5], 0.0, 1.0).unwrap();
        assert!(matches!(Session::new(data, params), Err(PipelineError::Params(_))));
    }

    #[test]
    fn full_walk_with_identity_commits() {
        let mut s = symmetric_session(3);
        let Proposal::ValueScale { chain, .. } = s.advance(&AdvanceRequest::default()).unwrap() else {
            panic!("expected a value scale proposal")
        };
        assert_eq!(chain.gaps().len(), 4);
        s.commit(&CommitRequest::default()).unwrap();
        let Proposal::Cores { chain, .. } = s.advance(&AdvanceRequest::default()).unwrap() else {
            panic!("expected a cores proposal")
        };
        assert_eq!(chain.anchors().len(), 6);
        s.commit(&CommitRequest::default()).unwrap();
        let partition = s.partition().unwrap().clone();
        partition.validate().unwrap();
        for (core, &v) in s.cores().unwrap().iter().zip(s.centroids().unwrap().as_slice()) {
            assert!(core.contains(v));
        }

        s.advance(&AdvanceRequest::side(1, Side::Left, None)).unwrap();
        let outcome = s.commit(&CommitRequest::default()).unwrap();
        let CommitOutcome::Side { partition, levels, .. } = outcome else { panic!() };
        assert_eq!(levels.len(), 3);
        partition.validate().unwrap();
        assert_eq!(s.stage(), Stage::Step3InProgress);

        let out = s.finalize().unwrap();
        assert_eq!(s.finalize().unwrap(), out);
        assert_eq!(s.stage(), Stage::Finalized);
        assert!(matches!(s.advance(&AdvanceRequest::default()), Err(PipelineError::Stage { .. })));
    }

    #[test]
    fn illegal_stage_operations() {
        let mut s = symmetric_session(3);
        assert!(matches!(s.commit(&CommitRequest::default()), Err(PipelineError::Stage { .. })));
        assert!(matches!(s.finalize(), Err(PipelineError::Stage { .. })));
        assert!(matches!(s.apply_edits(None, &[]), Err(PipelineError::Stage { .. })));
        s.advance(&AdvanceRequest::default()).unwrap();
        assert!(matches!(s.advance(&AdvanceRequest::default()), Err(PipelineError::Stage { .. })));
        s.commit(&CommitRequest::default()).unwrap();
        assert!(matches!(s.finalize(), Err(PipelineError::Stage { .. })));
    }

    #[test]
    fn failed_edits_leave_the_session_untouched() {
        let mut s = symmetric_session(3);
        s.advance(&AdvanceRequest::default()).unwrap();
        let before = s.clone();
        let collapse = CardEdit::Remove { gap_index: 1, count: s.current_chain().unwrap().gaps()[1] };
        let ok = CardEdit::Insert { gap_index: 0, count: 1 };
        let err = s.apply_edits(None, &[ok, collapse]).unwrap_err();
        assert!(matches!(err, PipelineError::Edit { index: 1, .. }));
        assert_eq!(s, before);
    }

    #[test]
    fn step2_rejects_centroid_outside_core() {
        let mut s = symmetric_session(3);
        s.advance(&AdvanceRequest::default()).unwrap();
        s.commit(&CommitRequest::default()).unwrap();
        s.advance(&AdvanceRequest::default()).unwrap();
        let domain = s.current_chain().unwrap().domain();
        // core 2 spans [0.55, 0.60] of the domain, right of the middle centroid
        let chain = CardChain::from_gaps(domain, core_labels(3), vec![45, 10, 5, 2, 38], 2, 0).unwrap();
        let request = CommitRequest { chain: Some(chain), ..Default::default() };
        let err = s.commit(&request).unwrap_err();
        assert!(matches!(err, PipelineError::CentroidOutsideCore { index: 1, .. }), "{err}");
        assert_eq!(s.stage(), Stage::Step2Proposed);
    }

    #[test]
    fn core_chain_keeps_centroid_inside() {
        let domain = Interval::new(0.0, 1.0);
        // centroid off the decimal grid, as after an insert in Step 1
        let v = 17.0 / 105.0;
        let cores = [Interval::new(0.0, v), Interval::new(0.5, 1.0)];
        let chain = core_chain(domain, &cores, &[v, 0.7], 2).unwrap();
        let decoded = decode_cores(&chain);
        assert!(decoded[0].upper >= v, "{decoded:?}");
        assert_eq!(chain.gaps().iter().sum::<u64>(), 100);
    }
}
