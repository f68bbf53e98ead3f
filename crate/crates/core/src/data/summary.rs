use serde::{Deserialize, Serialize};

use super::DataError;
use crate::cfkm::SampleSet;

const KDE_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kde {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl Kde {
    /// Interior grid positions that are strict local maxima.
    pub fn modes(&self) -> Vec<f64> {
        self.extrema(|prev, cur, next| cur > prev && cur >= next)
    }

    /// Interior grid positions that are strict local minima.
    pub fn valleys(&self) -> Vec<f64> {
        self.extrema(|prev, cur, next| cur < prev && cur <= next)
    }

    fn extrema(&self, pick: impl Fn(f64, f64, f64) -> bool) -> Vec<f64> {
        self.density
            .windows(3)
            .enumerate()
            .filter(|(_, w)| pick(w[0], w[1], w[2]))
            .map(|(i, _)| self.x[i + 1])
            .collect()
    }

    /// Trapezoid-rule integral of the density over its grid.
    pub fn integral(&self) -> f64 {
        self.x.windows(2).zip(self.density.windows(2)).map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1])).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub histogram: Histogram,
    pub kde: Kde,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb, falling back to a twentieth of the domain for
/// samples without spread.
fn silverman(data: &SampleSet) -> f64 {
    let v = data.values();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    let iqr = quantile(v, 0.75) - quantile(v, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        (false, true) => iqr / 1.34,
        (false, false) => return data.width() / 20.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Histogram over the sample's bounds and a Gaussian KDE.
///
/// `bandwidth` defaults to Silverman's rule. The KDE grid extends four
/// bandwidths past the data so the density integrates to one.
pub fn summarize(data: &SampleSet, bin_count: usize, bandwidth: Option<f64>) -> Result<DatasetSummary, DataError> {
    if bin_count == 0 {
        return Err(DataError::Parameter("bin_count must be at least 1".into()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(DataError::Parameter(format!("bandwidth must be > 0, got {h}"))),
        None => silverman(data),
    };
    let v = data.values();
    let (a, b) = (data.lower(), data.upper());
    let edges: Vec<f64> =
        (0..=bin_count).map(|i| if i == bin_count { b } else { a + (b - a) * i as f64 / bin_count as f64 }).collect();
    let mut counts = vec![0usize; bin_count];
    for &x in v {
        let bin = edges.partition_point(|&e| e <= x).saturating_sub(1).min(bin_count - 1);
        counts[bin] += 1;
    }

    let (lo, hi) = (v[0] - 4.0 * h, v[v.len() - 1] + 4.0 * h);
    let step = (hi - lo) / (KDE_POINTS - 1) as f64;
    let norm = 1.0 / (v.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let x: Vec<f64> = (0..KDE_POINTS).map(|i| lo + step * i as f64).collect();
    let density =
        x.iter().map(|&g| v.iter().map(|&xi| (-0.5 * ((g - xi) / h).powi(2)).exp()).sum::<f64>() * norm).collect();

    Ok(DatasetSummary {
        n: v.len(),
        min: v[0],
        max: v[v.len() - 1],
        mean: v.iter().sum::<f64>() / v.len() as f64,
        histogram: Histogram { edges, counts },
        kde: Kde { bandwidth: h, x, density },
    })
}
