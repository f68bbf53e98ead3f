use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::cards::{required_precision, values_to_cards, CardChain, ChainDraft};
use crate::cfkm::{run_cfkm, CfkmConfig, InitStrategy, SampleSet};
use crate::fuzzy::{Breakpoint, FuzzyNumberPL, Interval, PartitionLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Confidence levels and breakpoints proposed for one monotone branch.
///
/// `levels` increase; `breakpoints` increase in `x`, so on a right side the
/// first breakpoint carries the highest level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideRefinement {
    pub class: usize,
    pub side: Side,
    pub interval: Interval,
    pub side_clusters: usize,
    /// Levels found by clustering, before card quantisation.
    pub clustered_levels: Vec<f64>,
    pub levels: Vec<f64>,
    pub level_chain: ChainDraft,
    pub breakpoints: Vec<f64>,
    pub breakpoint_chain: ChainDraft,
    breakpoint_precision: u32,
}

/// Index of the layout gap holding `side` of `class`.
pub(crate) fn side_gap(layout: &PartitionLayout, class: usize, side: Side) -> Result<usize> {
    let k = layout.cores.len();
    match side {
        Side::Left if class >= 1 && class < k => Ok(class - 1),
        Side::Right if class + 1 < k => Ok(class),
        _ => Err(PipelineError::NoSide { class, side }),
    }
}

/// Solves `class(x) = level` on the branch of `class` over `interval`.
fn invert(class: &FuzzyNumberPL, interval: Interval, level: f64) -> f64 {
    let mut pts: Vec<Breakpoint> =
        class.breakpoints().iter().copied().filter(|b| b.x > interval.lower && b.x < interval.upper).collect();
    pts.insert(0, Breakpoint::new(interval.lower, class.eval(interval.lower)));
    pts.push(Breakpoint::new(interval.upper, class.eval(interval.upper)));
    for w in pts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let (lo, hi) = if p.mu <= q.mu { (p.mu, q.mu) } else { (q.mu, p.mu) };
        if lo <= level && level <= hi && p.mu != q.mu {
            return p.x + (level - p.mu) * (q.x - p.x) / (q.mu - p.mu);
        }
    }
    // a level outside (0, 1) cannot reach here; fall back to the midpoint
    0.5 * (interval.lower + interval.upper)
}

fn cluster_levels(
    values: Vec<f64>,
    k_side: usize,
    fuzzifier: f64,
    tolerance: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    if k_side == 1 {
        return Ok(vec![values.iter().sum::<f64>() / values.len() as f64]);
    }
    let data = SampleSet::new(values, 0.0, 1.0)?;
    let config = CfkmConfig::new(k_side).with_fuzzifier(fuzzifier).with_tolerance(tolerance).with_max_iter(max_iter);
    let fit = match run_cfkm(&data, &config) {
        Ok(fit) => fit,
        Err(e) => {
            log::warn!("even initialisation failed on side memberships ({e}); retrying with percentiles");
            run_cfkm(&data, &config.with_init(InitStrategy::Percentile))?
        }
    };
    Ok(fit.centroids.into_vec())
}

fn level_labels(q: usize) -> Vec<String> {
    let mut labels = vec!["0".to_string()];
    labels.extend((1..=q).map(|l| format!("c_{l}")));
    labels.push("1".into());
    labels
}

fn breakpoint_labels(q: usize) -> Vec<String> {
    let mut labels = vec!["s".to_string()];
    labels.extend((1..=q).map(|l| format!("x_{l}")));
    labels.push("e".into());
    labels
}

fn breakpoint_chain(class: &FuzzyNumberPL, interval: Interval, levels: &[f64], start: u32) -> Result<CardChain> {
    let mut xs: Vec<f64> = levels.iter().map(|&c| invert(class, interval, c)).collect();
    xs.sort_by(f64::total_cmp);
    let mut tuple = vec![interval.lower];
    tuple.extend_from_slice(&xs);
    tuple.push(interval.upper);
    let p = required_precision(interval, &tuple, start)?;
    Ok(values_to_cards(interval, breakpoint_labels(xs.len()), &tuple, p)?)
}

pub(crate) struct SideInput<'a> {
    pub data: &'a SampleSet,
    pub layout: &'a PartitionLayout,
    pub class: &'a FuzzyNumberPL,
    pub class_index: usize,
    pub side: Side,
    pub k_side: usize,
    pub fuzzifier: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub level_precision: u32,
    pub breakpoint_precision: u32,
}

impl SideRefinement {
    pub(crate) fn propose(input: SideInput<'_>) -> Result<Self> {
        let gap = side_gap(input.layout, input.class_index, input.side)?;
        let interval = input.layout.gap_interval(gap);
        let values: Vec<f64> = input
            .data
            .values()
            .iter()
            .filter(|&&x| x > interval.lower && x < interval.upper)
            .map(|&x| input.class.eval(x))
            .collect();
        let mut distinct = values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if input.k_side == 0 || distinct.len() < input.k_side {
            return Err(PipelineError::InsufficientData {
                class: input.class_index,
                side: input.side,
                distinct: distinct.len(),
                needed: input.k_side.max(1),
            });
        }
        let clustered = cluster_levels(values, input.k_side, input.fuzzifier, input.tolerance, input.max_iter)?;

        let unit = Interval::new(0.0, 1.0);
        let mut tuple = vec![0.0];
        tuple.extend_from_slice(&clustered);
        tuple.push(1.0);
        let p = required_precision(unit, &tuple, input.level_precision)?;
        let level_chain = values_to_cards(unit, level_labels(clustered.len()), &tuple, p)?;

        let levels = level_chain.interior_values();
        let breakpoint_chain = breakpoint_chain(input.class, interval, &levels, input.breakpoint_precision)?;
        Ok(SideRefinement {
            class: input.class_index,
            side: input.side,
            interval,
            side_clusters: input.k_side,
            clustered_levels: clustered,
            levels,
            level_chain: ChainDraft::new(level_chain),
            breakpoints: breakpoint_chain.interior_values(),
            breakpoint_chain: ChainDraft::new(breakpoint_chain),
            breakpoint_precision: input.breakpoint_precision,
        })
    }

    /// Re-interpolates breakpoints from the current levels and starts a
    /// fresh breakpoint chain.
    pub(crate) fn rebuild_breakpoints(&mut self, class: &FuzzyNumberPL) -> Result<()> {
        let levels = self.level_chain.current.interior_values();
        let chain = breakpoint_chain(class, self.interval, &levels, self.breakpoint_precision)?;
        self.levels = levels;
        self.breakpoints = chain.interior_values();
        self.breakpoint_chain = ChainDraft::new(chain);
        Ok(())
    }

    pub(crate) fn refresh_breakpoints(&mut self) {
        self.breakpoints = self.breakpoint_chain.current.interior_values();
    }

    /// Gap profile of the refined side, expressed as the membership of the
    /// gap's left class.
    pub(crate) fn gap_profile(&self, levels: &[f64], breakpoints: &[f64]) -> Vec<Breakpoint> {
        let q = levels.len();
        breakpoints
            .iter()
            .enumerate()
            .map(|(i, &x)| match self.side {
                // class j rises through the levels; the gap stores class j - 1
                Side::Left => Breakpoint::new(x, 1.0 - levels[i]),
                Side::Right => Breakpoint::new(x, levels[q - 1 - i]),
            })
            .collect()
    }
}
