use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::cfkm::{CentroidVector, MembershipMatrix, SampleSet};
use crate::fuzzy::Interval;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreExtraction {
    pub cores: Vec<Interval>,
    /// Classes where no observation reached `1 - tau`; their core is the
    /// centroid alone.
    pub fallbacks: Vec<usize>,
}

/// Cores read off the data: class `j` covers every observation with
/// membership at least `1 - tau` together with its centroid.
///
/// The first core starts at `a` and the last ends at `b`.
pub fn extract_cores(
    data: &SampleSet,
    centroids: &CentroidVector,
    memberships: &MembershipMatrix,
    tau: f64,
) -> Result<CoreExtraction> {
    if !(0.0..1.0).contains(&tau) {
        return Err(PipelineError::Params(format!("core tolerance must be in [0, 1), got {tau}")));
    }
    let k = centroids.len();
    if memberships.clusters() != k || memberships.len() != data.len() {
        return Err(PipelineError::Request("memberships do not match the data and centroids".into()));
    }
    let mut cores: Vec<Interval> = centroids.as_slice().iter().map(|&v| Interval::new(v, v)).collect();
    let mut hit = vec![false; k];
    for (i, &x) in data.values().iter().enumerate() {
        for (j, u) in memberships.row(i).entries() {
            if u >= 1.0 - tau {
                hit[j] = true;
                cores[j].lower = cores[j].lower.min(x);
                cores[j].upper = cores[j].upper.max(x);
            }
        }
    }
    cores[0].lower = data.lower();
    cores[k - 1].upper = data.upper();

    let fallbacks: Vec<usize> = (0..k).filter(|&j| !hit[j]).collect();
    for &j in &fallbacks {
        log::warn!("no observation reaches membership {} in class {j}; core falls back to its centroid", 1.0 - tau);
    }
    Ok(CoreExtraction { cores, fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfkm::update_memberships;

    #[test]
    fn singleton_core_when_only_the_centroid_qualifies() {
        let data = SampleSet::new(vec![0.0, 0.3, 0.5, 0.7, 1.0], 0.0, 1.0).unwrap();
        let v = CentroidVector::new(vec![0.25, 0.5, 0.75], 0.0, 1.0).unwrap();
        let u = update_memberships(&data, &v, 2.0).unwrap();
        let ex = extract_cores(&data, &v, &u, 0.01).unwrap();
        assert_eq!(ex.cores[1], Interval::new(0.5, 0.5));
        assert_eq!(ex.cores[0], Interval::new(0.0, 0.25));
        assert_eq!(ex.cores[2], Interval::new(0.75, 1.0));
        assert!(ex.fallbacks.is_empty());
    }

    #[test]
    fn fallback_is_reported() {
        let data = SampleSet::new(vec![0.0, 0.45, 1.0], 0.0, 1.0).unwrap();
        let v = CentroidVector::new(vec![0.2, 0.5, 0.8], 0.0, 1.0).unwrap();
        let u = update_memberships(&data, &v, 2.0).unwrap();
        let ex = extract_cores(&data, &v, &u, 0.01).unwrap();
        assert_eq!(ex.fallbacks, vec![1]);
        assert_eq!(ex.cores[1], Interval::new(0.5, 0.5));
    }

    #[test]
    fn dense_grid_core_radius_matches_inversion() {
        // two clusters at 0.25 and 0.75, m = 2: the left membership is 0.99
        // where (t / (0.5 - t))^2 = 1/99 for a distance t from the centroid
        let values: Vec<f64> = (0..=10_000).map(|i| i as f64 / 10_000.0).collect();
        let data = SampleSet::new(values, 0.0, 1.0).unwrap();
        let v = CentroidVector::new(vec![0.25, 0.75], 0.0, 1.0).unwrap();
        let u = update_memberships(&data, &v, 2.0).unwrap();
        let ex = extract_cores(&data, &v, &u, 0.01).unwrap();
        let radius = 0.5 / (1.0 + 99f64.sqrt());
        assert!((ex.cores[0].upper - (0.25 + radius)).abs() <= 1e-4, "{:?}", ex.cores);
        assert!((ex.cores[1].lower - (0.75 - radius)).abs() <= 1e-4, "{:?}", ex.cores);
    }
}
