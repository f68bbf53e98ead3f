//! Piecewise-linear fuzzy numbers and fuzzy partitions of a closed interval.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Membership values within this distance of one are treated as full.
const FULL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("breakpoints must have strictly increasing x (index {0})")]
    NotIncreasing(usize),
    #[error("membership {mu} at x = {x} is outside [0, 1]")]
    OutOfRange { x: f64, mu: f64 },
    #[error("class never reaches membership one")]
    NotNormal,
    #[error("class is not unimodal around its core (at x = {0})")]
    NotUnimodal(f64),
    #[error("class {class}: {source}")]
    Class {
        class: usize,
        #[source]
        source: Box<FuzzyError>,
    },
    #[error("cores of classes {0} and {} overlap or are out of order", .0 + 1)]
    CoreOrder(usize),
    #[error("memberships sum to {sum} at x = {x}")]
    Unity { x: f64, sum: f64 },
    #[error("invalid layout: {0}")]
    Layout(String),
}

/// Closed interval, serialised as `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

impl From<[f64; 2]> for Interval {
    fn from([lower, upper]: [f64; 2]) -> Self {
        Self { lower, upper }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lower, i.upper]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub x: f64,
    pub mu: f64,
}

impl Breakpoint {
    pub fn new(x: f64, mu: f64) -> Self {
        Self { x, mu }
    }
}

/// A normal, convex membership function given by linear interpolation of
/// its breakpoints, zero outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFuzzyNumber")]
pub struct FuzzyNumberPL {
    breakpoints: Vec<Breakpoint>,
    core: Interval,
    support: Interval,
}

#[derive(Deserialize)]
struct RawFuzzyNumber {
    breakpoints: Vec<Breakpoint>,
}

impl TryFrom<RawFuzzyNumber> for FuzzyNumberPL {
    type Error = FuzzyError;

    fn try_from(raw: RawFuzzyNumber) -> Result<Self, FuzzyError> {
        FuzzyNumberPL::new(raw.breakpoints)
    }
}

impl FuzzyNumberPL {
    /// Derives core and support from the breakpoints and checks normality
    /// and unimodality.
    pub fn new(mut breakpoints: Vec<Breakpoint>) -> Result<Self, FuzzyError> {
        for (i, pair) in breakpoints.windows(2).enumerate() {
            if !(pair[0].x < pair[1].x) {
                return Err(FuzzyError::NotIncreasing(i + 1));
            }
        }
        for bp in &mut breakpoints {
            if !(-FULL..=1.0 + FULL).contains(&bp.mu) || !bp.x.is_finite() {
                return Err(FuzzyError::OutOfRange { x: bp.x, mu: bp.mu });
            }
            bp.mu = bp.mu.clamp(0.0, 1.0);
            if bp.mu >= 1.0 - FULL {
                bp.mu = 1.0;
            }
        }
        let first_full = breakpoints.iter().position(|b| b.mu == 1.0).ok_or(FuzzyError::NotNormal)?;
        let last_full = breakpoints.iter().rposition(|b| b.mu == 1.0).unwrap_or(first_full);

        for pair in breakpoints[..=first_full].windows(2) {
            if pair[1].mu < pair[0].mu {
                return Err(FuzzyError::NotUnimodal(pair[1].x));
            }
        }
        if let Some(dip) = breakpoints[first_full..=last_full].iter().find(|b| b.mu != 1.0) {
            return Err(FuzzyError::NotUnimodal(dip.x));
        }
        for pair in breakpoints[last_full..].windows(2) {
            if pair[1].mu > pair[0].mu {
                return Err(FuzzyError::NotUnimodal(pair[1].x));
            }
        }

        let first_pos = breakpoints.iter().position(|b| b.mu > 0.0).unwrap_or(first_full);
        let last_pos = breakpoints.iter().rposition(|b| b.mu > 0.0).unwrap_or(last_full);
        let s_lower = breakpoints[first_pos.saturating_sub(1)].x;
        let s_upper = breakpoints[(last_pos + 1).min(breakpoints.len() - 1)].x;

        Ok(Self {
            core: Interval::new(breakpoints[first_full].x, breakpoints[last_full].x),
            support: Interval::new(s_lower, s_upper),
            breakpoints,
        })
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn core(&self) -> Interval {
        self.core
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    pub fn eval(&self, x: f64) -> f64 {
        let bps = &self.breakpoints;
        let first = bps[0];
        let last = bps[bps.len() - 1];
        if x < first.x || x > last.x {
            return 0.0;
        }
        let idx = bps.partition_point(|b| b.x <= x);
        if idx == 0 {
            return first.mu;
        }
        let left = bps[idx - 1];
        if left.x == x || idx == bps.len() {
            return left.mu;
        }
        let right = bps[idx];
        left.mu + (right.mu - left.mu) * (x - left.x) / (right.x - left.x)
    }
}

/// Fuzzy numbers over a common domain whose memberships sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition {
    pub lower: f64,
    pub upper: f64,
    classes: Vec<FuzzyNumberPL>,
}

/// Number of grid points used by [`FuzzyPartition::validate`].
pub const UNITY_GRID: usize = 10_001;
pub const UNITY_TOLERANCE: f64 = 1e-6;

impl FuzzyPartition {
    pub fn new(lower: f64, upper: f64, classes: Vec<FuzzyNumberPL>) -> Self {
        Self { lower, upper, classes }
    }

    pub fn classes(&self) -> &[FuzzyNumberPL] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        self.classes.iter().map(|c| c.eval(x)).collect()
    }

    pub fn grid(&self, points: usize) -> Vec<f64> {
        let step = (self.upper - self.lower) / (points.max(2) - 1) as f64;
        (0..points.max(2))
            .map(|i| if i + 1 == points.max(2) { self.upper } else { self.lower + step * i as f64 })
            .collect()
    }

    /// Largest deviation of the summed memberships from one over an evenly
    /// spaced grid plus every breakpoint.
    pub fn unity_deviation(&self, grid_points: usize) -> (f64, f64) {
        let mut xs = self.grid(grid_points);
        xs.extend(self.classes.iter().flat_map(|c| c.breakpoints().iter().map(|b| b.x)));
        xs.into_iter()
            .filter(|x| (self.lower..=self.upper).contains(x))
            .map(|x| (x, (self.classes.iter().map(|c| c.eval(x)).sum::<f64>() - 1.0).abs()))
            .fold((self.lower, 0.0), |worst, cur| if cur.1 > worst.1 { cur } else { worst })
    }

    /// Checks ordered disjoint cores and partition of unity.
    pub fn validate(&self) -> Result<(), FuzzyError> {
        for (j, pair) in self.classes.windows(2).enumerate() {
            if !(pair[0].core().upper < pair[1].core().lower) {
                return Err(FuzzyError::CoreOrder(j));
            }
        }
        let (x, dev) = self.unity_deviation(UNITY_GRID);
        if dev > UNITY_TOLERANCE {
            let sum = self.classes.iter().map(|c| c.eval(x)).sum();
            return Err(FuzzyError::Unity { x, sum });
        }
        Ok(())
    }

    /// Points between consecutive cores where the two neighbouring classes
    /// both equal one half.
    pub fn crossovers(&self) -> Vec<f64> {
        self.classes
            .windows(2)
            .map(|pair| {
                let (left, right) = (&pair[0], &pair[1]);
                let (mut lo, mut hi) = (left.core().upper, right.core().lower);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if left.eval(mid) > right.eval(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }
}

/// Cores plus the shared profile of each gap between consecutive cores.
///
/// `gaps[g]` holds interior points `(x, mu)` where `mu` is the membership of
/// class `g`; class `g + 1` gets `1 - mu`. Rendering both neighbours from
/// the same points keeps the partition of unity exact at every breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionLayout {
    pub lower: f64,
    pub upper: f64,
    pub cores: Vec<Interval>,
    pub gaps: Vec<Vec<Breakpoint>>,
}

impl PartitionLayout {
    pub fn new(lower: f64, upper: f64, cores: Vec<Interval>, gaps: Vec<Vec<Breakpoint>>) -> Self {
        Self { lower, upper, cores, gaps }
    }

    /// Interval between the cores of classes `gap` and `gap + 1`.
    pub fn gap_interval(&self, gap: usize) -> Interval {
        Interval::new(self.cores[gap].upper, self.cores[gap + 1].lower)
    }

    pub fn check(&self) -> Result<(), FuzzyError> {
        let k = self.cores.len();
        if k == 0 || self.gaps.len() + 1 != k {
            return Err(FuzzyError::Layout(format!("{k} cores with {} gaps", self.gaps.len())));
        }
        if self.cores[0].lower != self.lower || self.cores[k - 1].upper != self.upper {
            return Err(FuzzyError::Layout("outer cores must reach the domain bounds".into()));
        }
        for (j, core) in self.cores.iter().enumerate() {
            if !(core.lower <= core.upper) {
                return Err(FuzzyError::Layout(format!("core {j} is reversed")));
            }
        }
        for g in 0..self.gaps.len() {
            let span = self.gap_interval(g);
            if !(span.lower < span.upper) {
                return Err(FuzzyError::CoreOrder(g));
            }
            let mut prev = (span.lower, 1.0);
            for bp in &self.gaps[g] {
                if !(bp.x > prev.0 && bp.x < span.upper) {
                    return Err(FuzzyError::Layout(format!(
                        "gap {g}: point {} not strictly increasing inside ({}, {})",
                        bp.x, span.lower, span.upper
                    )));
                }
                if !(0.0..=prev.1).contains(&bp.mu) {
                    return Err(FuzzyError::NotUnimodal(bp.x));
                }
                prev = (bp.x, bp.mu);
            }
        }
        Ok(())
    }

    pub fn to_partition(&self) -> Result<FuzzyPartition, FuzzyError> {
        self.check()?;
        let k = self.cores.len();
        let mut classes = Vec::with_capacity(k);
        for j in 0..k {
            let mut bps = Vec::new();
            if j > 0 {
                bps.push(Breakpoint::new(self.cores[j - 1].upper, 0.0));
                bps.extend(self.gaps[j - 1].iter().map(|b| Breakpoint::new(b.x, 1.0 - b.mu)));
            }
            let core = self.cores[j];
            bps.push(Breakpoint::new(core.lower, 1.0));
            if core.upper > core.lower {
                bps.push(Breakpoint::new(core.upper, 1.0));
            }
            if j + 1 < k {
                bps.extend(self.gaps[j].iter().copied());
                bps.push(Breakpoint::new(self.cores[j + 1].lower, 0.0));
            }
            let class = FuzzyNumberPL::new(bps).map_err(|e| FuzzyError::Class { class: j, source: Box::new(e) })?;
            classes.push(class);
        }
        Ok(FuzzyPartition::new(self.lower, self.upper, classes))
    }
}
