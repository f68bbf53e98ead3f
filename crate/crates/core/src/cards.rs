//! Deck-of-Cards encoding of ordered value tuples.
//!
//! A tuple `a = x_0 < x_1 < ... < x_n = b` becomes a chain of anchors with
//! integer counts of blank cards between consecutive anchors. At precision
//! `p` the chain holds `N = 10^p` cards and anchor `i` sits after
//! `floor(10^p (x_i - a) / (b - a))` of them. Decoding maps a cumulative
//! count `c` back to `a + (b - a) c / N`, where `N` is the chain's current
//! total, so edits that add or remove cards rescale the unit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::Interval;

pub const MAX_PRECISION: u32 = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CardError {
    #[error("values are not ordered: {0}")]
    Ordering(String),
    #[error(
        "precision {precision} maps anchors {index} and {} to the same card; \
         use choose_precision to find an adequate precision", .index - 1
    )]
    Precision { index: usize, precision: u32 },
    #[error("no precision up to {MAX_PRECISION} separates the values")]
    PrecisionExhausted,
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("edit count must be positive")]
    ZeroCount,
    #[error("gap index {index} out of range for a chain with {gaps} gaps")]
    GapIndex { index: usize, gaps: usize },
    #[error("source and target gap are both {0}")]
    SameGap(usize),
    #[error("gap {gap} holds {available} cards, cannot take {requested}")]
    NegativeGap { gap: usize, available: u64, requested: u64 },
    #[error("gap {gap} would drop to {remaining} cards, below the minimum of {min}")]
    WouldCollapse { gap: usize, remaining: u64, min: u64 },
}

pub type Result<T, E = CardError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub label: String,
    pub cumulative: u64,
}

/// Anchors with card counts between them over a pinned interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawChain")]
pub struct CardChain {
    domain: Interval,
    precision: u32,
    total: u64,
    anchors: Vec<Anchor>,
    gaps: Vec<u64>,
    /// Smallest count any gap may hold; 1 for order-preserving chains.
    min_gap: u64,
}

#[derive(Deserialize)]
struct RawChain {
    domain: Interval,
    precision: u32,
    total: u64,
    anchors: Vec<Anchor>,
    gaps: Vec<u64>,
    #[serde(default = "default_min_gap")]
    min_gap: u64,
}

fn default_min_gap() -> u64 {
    1
}

impl TryFrom<RawChain> for CardChain {
    type Error = CardError;

    fn try_from(raw: RawChain) -> Result<Self> {
        let labels: Vec<String> = raw.anchors.iter().map(|a| a.label.clone()).collect();
        let chain = CardChain::from_gaps(raw.domain, labels, raw.gaps, raw.precision, raw.min_gap)?;
        if chain.total != raw.total || chain.anchors != raw.anchors {
            return Err(CardError::InvalidChain("anchor cumulatives or total disagree with the gaps".into()));
        }
        Ok(chain)
    }
}

/// Card count reached by a normalised position, snapping values within
/// rounding noise of an integer (0.18 * 100 must give 18, not 17).
fn units(scaled: f64) -> u64 {
    let nearest = scaled.round();
    if (scaled - nearest).abs() <= 1e-12 * scaled.abs().max(1.0) {
        nearest as u64
    } else {
        scaled.floor() as u64
    }
}

fn check_domain(domain: Interval) -> Result<()> {
    if domain.lower.is_finite() && domain.upper.is_finite() && domain.lower < domain.upper {
        Ok(())
    } else {
        Err(CardError::InvalidChain(format!("domain [{}, {}] must be finite and nonempty", domain.lower, domain.upper)))
    }
}

fn check_tuple(domain: Interval, values: &[f64], strict: bool) -> Result<()> {
    if values.len() < 2 {
        return Err(CardError::Ordering("need at least the two endpoints".into()));
    }
    let tol = 1e-12 * domain.width();
    if (values[0] - domain.lower).abs() > tol || (values[values.len() - 1] - domain.upper).abs() > tol {
        return Err(CardError::Ordering(format!("tuple must start at {} and end at {}", domain.lower, domain.upper)));
    }
    for (i, pair) in values.windows(2).enumerate() {
        let ok = if strict { pair[0] < pair[1] } else { pair[0] <= pair[1] };
        if !ok || !pair[1].is_finite() {
            return Err(CardError::Ordering(format!(
                "value {} at position {} does not follow {}",
                pair[1],
                i + 1,
                pair[0]
            )));
        }
    }
    Ok(())
}

fn cumulative_units(domain: Interval, values: &[f64], precision: u32) -> Vec<u64> {
    let total = 10u64.pow(precision);
    let last = values.len() - 1;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| match i {
            0 => 0,
            i if i == last => total,
            _ => units(total as f64 * (x - domain.lower) / domain.width()).min(total),
        })
        .collect()
}

/// First anchor whose card position collides with a different predecessor.
fn first_collision(values: &[f64], cumulative: &[u64]) -> Option<usize> {
    (1..values.len()).find(|&i| values[i] > values[i - 1] && cumulative[i] <= cumulative[i - 1])
}

/// Smallest precision `p >= 1` at which consecutive values of a tuple on
/// `[0, 1]` land on distinct card positions.
pub fn choose_precision(values: &[f64]) -> Result<u32> {
    let unit = Interval::new(0.0, 1.0);
    check_tuple(unit, values, true)?;
    required_precision(unit, values, 1)
}

/// Smallest precision `p >= start` separating the distinct values of a
/// nondecreasing tuple over `domain`.
pub fn required_precision(domain: Interval, values: &[f64], start: u32) -> Result<u32> {
    check_domain(domain)?;
    check_tuple(domain, values, false)?;
    (start.max(1)..=MAX_PRECISION)
        .find(|&p| first_collision(values, &cumulative_units(domain, values, p)).is_none())
        .ok_or(CardError::PrecisionExhausted)
}

/// Encodes a strictly increasing tuple running from `domain.lower` to
/// `domain.upper` at precision `p`.
pub fn values_to_cards(domain: Interval, labels: Vec<String>, values: &[f64], precision: u32) -> Result<CardChain> {
    encode(domain, labels, values, precision, 1)
}

/// Like [`values_to_cards`] but tied values are allowed and become empty
/// gaps; the resulting chain permits gaps of zero cards.
pub fn values_to_cards_with_ties(
    domain: Interval,
    labels: Vec<String>,
    values: &[f64],
    precision: u32,
) -> Result<CardChain> {
    encode(domain, labels, values, precision, 0)
}

fn encode(domain: Interval, labels: Vec<String>, values: &[f64], precision: u32, min_gap: u64) -> Result<CardChain> {
    check_domain(domain)?;
    check_tuple(domain, values, min_gap > 0)?;
    if labels.len() != values.len() {
        return Err(CardError::InvalidChain(format!("{} labels for {} values", labels.len(), values.len())));
    }
    if precision == 0 || precision > MAX_PRECISION {
        return Err(CardError::InvalidChain(format!("precision must be in 1..={MAX_PRECISION}, got {precision}")));
    }
    let cumulative = cumulative_units(domain, values, precision);
    if let Some(index) = first_collision(values, &cumulative) {
        return Err(CardError::Precision { index, precision });
    }
    let gaps = cumulative.windows(2).map(|w| w[1] - w[0]).collect();
    CardChain::from_gaps(domain, labels, gaps, precision, min_gap)
}

/// Decodes every anchor with the cumulative-card rule.
pub fn cards_to_values(chain: &CardChain) -> Vec<f64> {
    chain.values()
}

pub fn apply_edit(chain: &CardChain, edit: &CardEdit) -> Result<CardChain> {
    chain.apply(edit)
}

impl CardChain {
    /// Builds a chain from explicit gap counts, checking every invariant.
    pub fn from_gaps(
        domain: Interval,
        labels: Vec<String>,
        gaps: Vec<u64>,
        precision: u32,
        min_gap: u64,
    ) -> Result<Self> {
        check_domain(domain)?;
        if labels.len() < 2 || labels.len() != gaps.len() + 1 {
            return Err(CardError::InvalidChain(format!(
                "{} anchors need {} gaps, got {}",
                labels.len(),
                labels.len().saturating_sub(1),
                gaps.len()
            )));
        }
        let mut cumulative = 0u64;
        let mut anchors = Vec::with_capacity(labels.len());
        for (i, label) in labels.into_iter().enumerate() {
            if i > 0 {
                cumulative += gaps[i - 1];
            }
            anchors.push(Anchor { label, cumulative });
        }
        let chain = Self { domain, precision, total: cumulative, anchors, gaps, min_gap };
        chain.check()?;
        Ok(chain)
    }

    fn check(&self) -> Result<()> {
        if self.total == 0 {
            return Err(CardError::InvalidChain("chain holds no cards".into()));
        }
        if let Some(gap) = self.gaps.iter().position(|&g| g < self.min_gap) {
            return Err(CardError::WouldCollapse { gap, remaining: self.gaps[gap], min: self.min_gap });
        }
        let last = self.anchors.len() - 1;
        for anchor in &self.anchors[1..last] {
            if anchor.cumulative == 0 || anchor.cumulative >= self.total {
                return Err(CardError::InvalidChain(format!(
                    "interior anchor {} must sit strictly inside the chain",
                    anchor.label
                )));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn gaps(&self) -> &[u64] {
        &self.gaps
    }

    pub fn min_gap(&self) -> u64 {
        self.min_gap
    }

    pub fn labels(&self) -> Vec<String> {
        self.anchors.iter().map(|a| a.label.clone()).collect()
    }

    /// Decoded anchor positions; the endpoints are exactly the domain bounds.
    pub fn values(&self) -> Vec<f64> {
        let Interval { lower, upper } = self.domain;
        self.anchors
            .iter()
            .map(|a| match a.cumulative {
                0 => lower,
                c if c == self.total => upper,
                c => lower + (upper - lower) * c as f64 / self.total as f64,
            })
            .collect()
    }

    /// Decoded positions without the two pinned endpoints.
    pub fn interior_values(&self) -> Vec<f64> {
        let mut v = self.values();
        v.pop();
        v.remove(0);
        v
    }

    /// True when both chains have the same domain, labels and counts.
    pub fn same_cards(&self, other: &CardChain) -> bool {
        self.domain == other.domain && self.anchors == other.anchors && self.gaps == other.gaps
    }

    fn gap_index(&self, index: usize) -> Result<()> {
        if index < self.gaps.len() {
            Ok(())
        } else {
            Err(CardError::GapIndex { index, gaps: self.gaps.len() })
        }
    }

    fn take(&self, gaps: &mut [u64], gap: usize, count: u64) -> Result<()> {
        let available = gaps[gap];
        if count > available {
            return Err(CardError::NegativeGap { gap, available, requested: count });
        }
        if available - count < self.min_gap {
            return Err(CardError::WouldCollapse { gap, remaining: available - count, min: self.min_gap });
        }
        gaps[gap] -= count;
        Ok(())
    }

    pub fn apply(&self, edit: &CardEdit) -> Result<CardChain> {
        if edit.count() == 0 {
            return Err(CardError::ZeroCount);
        }
        let mut gaps = self.gaps.clone();
        match *edit {
            CardEdit::Insert { gap_index, count } => {
                self.gap_index(gap_index)?;
                gaps[gap_index] += count;
            }
            CardEdit::Remove { gap_index, count } => {
                self.gap_index(gap_index)?;
                self.take(&mut gaps, gap_index, count)?;
            }
            CardEdit::Move { gap_index, target_gap_index, count } => {
                self.gap_index(gap_index)?;
                self.gap_index(target_gap_index)?;
                if gap_index == target_gap_index {
                    return Err(CardError::SameGap(gap_index));
                }
                self.take(&mut gaps, gap_index, count)?;
                gaps[target_gap_index] += count;
            }
        }
        CardChain::from_gaps(self.domain, self.labels(), gaps, self.precision, self.min_gap)
    }
}

/// A decision-maker's change to a chain. Gap indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CardEdit {
    Insert { gap_index: usize, count: u64 },
    Remove { gap_index: usize, count: u64 },
    Move { gap_index: usize, target_gap_index: usize, count: u64 },
}

impl CardEdit {
    pub fn count(&self) -> u64 {
        match *self {
            CardEdit::Insert { count, .. } | CardEdit::Remove { count, .. } | CardEdit::Move { count, .. } => count,
        }
    }
}

/// A proposed chain, its edited state and the audit log of applied edits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraft {
    pub proposed: CardChain,
    pub current: CardChain,
    pub log: Vec<CardEdit>,
}

impl ChainDraft {
    pub fn new(proposed: CardChain) -> Self {
        Self { current: proposed.clone(), proposed, log: Vec::new() }
    }

    /// Applies all edits or none; on failure reports the offending position.
    pub fn apply_all(&mut self, edits: &[CardEdit]) -> std::result::Result<(), (usize, CardError)> {
        let mut chain = self.current.clone();
        for (i, edit) in edits.iter().enumerate() {
            chain = chain.apply(edit).map_err(|e| (i, e))?;
        }
        self.current = chain;
        self.log.extend_from_slice(edits);
        Ok(())
    }
}
