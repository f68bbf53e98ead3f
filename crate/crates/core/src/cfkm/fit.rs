use serde::{Deserialize, Serialize};

use super::update::check_fuzzifier;
use super::{
    objective, update_centers, update_memberships, CentroidVector, CfkmError, MembershipMatrix, Result, SampleSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// `v_j = a + (b - a) j / (k + 1)`
    #[default]
    Even,
    /// Empirical percentiles `100 j / (k + 1)` with linear interpolation.
    Percentile,
}

/// Linear-interpolation ("inclusive") percentile of sorted data.
pub(crate) fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn init_centroids(data: &SampleSet, k: usize, strategy: InitStrategy) -> Result<CentroidVector> {
    if k < 2 {
        return Err(CfkmError::Parameter(format!("need at least 2 clusters, got {k}")));
    }
    let (a, b) = (data.lower(), data.upper());
    let centroids: Vec<f64> = match strategy {
        InitStrategy::Even => (1..=k).map(|j| a + (b - a) * j as f64 / (k + 1) as f64).collect(),
        InitStrategy::Percentile => {
            (1..=k).map(|j| percentile(data.values(), 100.0 * j as f64 / (k + 1) as f64)).collect()
        }
    };
    match strategy {
        InitStrategy::Even => CentroidVector::new(centroids, a, b),
        InitStrategy::Percentile => {
            CentroidVector::new(centroids.clone(), a, b).map_err(|_| CfkmError::InitTies(format!("{centroids:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfkmConfig {
    pub clusters: usize,
    pub fuzzifier: f64,
    pub init: InitStrategy,
    /// Stop once no centroid moves by this much or more.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl CfkmConfig {
    pub fn new(clusters: usize) -> Self {
        Self { clusters, ..Self::default() }
    }

    pub fn with_fuzzifier(mut self, fuzzifier: f64) -> Self {
        self.fuzzifier = fuzzifier;
        self
    }

    pub fn with_init(mut self, init: InitStrategy) -> Self {
        self.init = init;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters < 2 {
            return Err(CfkmError::Parameter(format!("need at least 2 clusters, got {}", self.clusters)));
        }
        check_fuzzifier(self.fuzzifier)?;
        if !(self.tolerance > 0.0) {
            return Err(CfkmError::Parameter(format!("convergence tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_iter == 0 {
            return Err(CfkmError::Parameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for CfkmConfig {
    fn default() -> Self {
        Self { clusters: 3, fuzzifier: 2.0, init: InitStrategy::Even, tolerance: 1e-6, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `J(U^(t), V^(t))` after each full iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub fuzzifier: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfkmFit {
    pub centroids: CentroidVector,
    /// Memberships recomputed for the final centroids.
    pub memberships: MembershipMatrix,
    pub report: FitReport,
}

/// Alternates the closed-form membership and centre steps until the
/// largest centroid displacement drops below the tolerance.
pub fn run_cfkm(data: &SampleSet, config: &CfkmConfig) -> Result<CfkmFit> {
    config.validate()?;
    let m = config.fuzzifier;
    let mut centroids = init_centroids(data, config.clusters, config.init)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let at = |iteration: usize| move |e: CfkmError| CfkmError::AtIteration { iteration, source: Box::new(e) };

    while iterations < config.max_iter {
        iterations += 1;
        let u = update_memberships(data, &centroids, m).map_err(at(iterations))?;
        let next = update_centers(data, &u, m).map_err(at(iterations))?;
        trace.push(objective(data, &u, &next, m));
        let shift = next.max_displacement(&centroids);
        centroids = next;
        if shift < config.tolerance {
            converged = true;
            break;
        }
    }
    log::debug!("c-fkm stopped after {iterations} iterations (converged: {converged})");

    let memberships = update_memberships(data, &centroids, m)?;
    Ok(CfkmFit {
        centroids,
        memberships,
        report: FitReport { objective_trace: trace, iterations, converged, fuzzifier: m, tolerance: config.tolerance },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_init() {
        let data = SampleSet::new(vec![0.5], 0.0, 1.0).unwrap();
        let v = init_centroids(&data, 4, InitStrategy::Even).unwrap();
        for (got, want) in v.as_slice().iter().zip([0.2, 0.4, 0.6, 0.8]) {
            assert!((got - want).abs() < 1e-15);
        }
        let data = SampleSet::new(vec![5.0], 2.8, 10.0).unwrap();
        let v = init_centroids(&data, 5, InitStrategy::Even).unwrap();
        for (got, want) in v.as_slice().iter().zip([4.0, 5.2, 6.4, 7.6, 8.8]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(init_centroids(&data, 1, InitStrategy::Even).is_err());
    }

    #[test]
    fn percentile_init_matches_sort_and_interpolate() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let data = SampleSet::new(values.clone(), 0.0, 101.0).unwrap();
        let v = init_centroids(&data, 3, InitStrategy::Percentile).unwrap();
        // oracle: rank p/100 * (n - 1), interpolate neighbours
        for (j, got) in v.as_slice().iter().enumerate() {
            let rank = (j + 1) as f64 / 4.0 * 99.0;
            let (lo, frac) = (rank.floor() as usize, rank.fract());
            let want = values[lo] * (1.0 - frac) + values[lo + 1] * frac;
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(v.as_slice(), &[25.75, 50.5, 75.25]);
    }

    #[test]
    fn percentile_ties_are_reported() {
        let data = SampleSet::new(vec![0.5; 10], 0.0, 1.0).unwrap();
        assert!(matches!(init_centroids(&data, 3, InitStrategy::Percentile), Err(CfkmError::InitTies(_))));
    }

    #[test]
    fn fixed_point_converges_immediately() {
        let data = SampleSet::new(vec![0.25, 0.5, 0.75], 0.0, 1.0).unwrap();
        let fit = run_cfkm(&data, &CfkmConfig::new(3)).unwrap();
        assert_eq!(fit.report.iterations, 1);
        assert!(fit.report.converged);
        assert_eq!(fit.report.objective_trace, vec![0.0]);
    }

    #[test]
    fn separated_blobs() {
        let mut values = Vec::new();
        for centre in [0.1, 0.5, 0.9] {
            for s in 0..21 {
                values.push(centre - 0.01 + 0.001 * s as f64);
            }
        }
        let data = SampleSet::new(values, 0.0, 1.0).unwrap();
        let fit = run_cfkm(&data, &CfkmConfig::new(3)).unwrap();
        for (v, centre) in fit.centroids.as_slice().iter().zip([0.1, 0.5, 0.9]) {
            assert!((v - centre).abs() < 0.05, "{v} vs {centre}");
        }
        for pair in fit.report.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let data = SampleSet::new(vec![0.5], 0.0, 1.0).unwrap();
        assert!(run_cfkm(&data, &CfkmConfig::new(1)).is_err());
        assert!(run_cfkm(&data, &CfkmConfig::new(2).with_fuzzifier(1.0)).is_err());
        assert!(run_cfkm(&data, &CfkmConfig::new(2).with_tolerance(0.0)).is_err());
        assert!(run_cfkm(&data, &CfkmConfig::new(2).with_max_iter(0)).is_err());
    }

    #[test]
    fn errors_carry_iteration() {
        // all mass in the middle: the outer clusters lose their weight
        let data = SampleSet::new(vec![0.5; 4], 0.0, 1.0).unwrap();
        let err = run_cfkm(&data, &CfkmConfig::new(3)).unwrap_err();
        assert!(matches!(err, CfkmError::AtIteration { iteration: 1, .. }), "{err}");
    }
}
