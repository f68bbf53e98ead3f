//! Convex fuzzy k-means (C-FKM) on one-dimensional data.
//!
//! Each observation may only hold membership in the two clusters whose
//! centroids bracket it, which makes every class a fuzzy number. Both
//! alternating steps have closed forms; see [`update_memberships`] and
//! [`update_centers`].

mod fit;
mod sample;
mod update;

pub use fit::{init_centroids, run_cfkm, CfkmConfig, CfkmFit, FitReport, InitStrategy};
pub use sample::SampleSet;
pub(crate) use update::layout_from_memberships;
pub use update::{
    bracketing_index, membership_pair, objective, partition_from_memberships, update_centers, update_memberships,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CfkmError {
    #[error("invalid sample set: {0}")]
    InvalidSample(String),
    #[error("value {x} lies outside the domain [{lower}, {upper}]")]
    Domain { x: f64, lower: f64, upper: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid centroids: {0}")]
    InvalidCentroids(String),
    #[error("invalid membership matrix: {0}")]
    InvalidMemberships(String),
    #[error("cluster {cluster} has zero total weight")]
    DegenerateCluster { cluster: usize },
    #[error("centroid ordering violated at cluster {cluster}: {left} is not below {right}")]
    Ordering { cluster: usize, left: f64, right: f64 },
    #[error(
        "percentile initialisation produced non-increasing centroids ({0}); \
         add jitter to tied observations or use the even strategy"
    )]
    InitTies(String),
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<CfkmError>,
    },
}

pub type Result<T, E = CfkmError> = std::result::Result<T, E>;

/// Ordered cluster centres, strictly inside the domain `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CentroidVector(Vec<f64>);

impl CentroidVector {
    /// Validates strict ordering inside the open interval `(lower, upper)`.
    ///
    /// A single centroid is accepted here so that degenerate one-level
    /// refinements can share the type; the clustering entry points require
    /// at least two.
    pub fn new(centroids: Vec<f64>, lower: f64, upper: f64) -> Result<Self> {
        if centroids.is_empty() {
            return Err(CfkmError::InvalidCentroids("no centroids".into()));
        }
        if let Some(bad) = centroids.iter().find(|v| !v.is_finite()) {
            return Err(CfkmError::InvalidCentroids(format!("non-finite centroid {bad}")));
        }
        for (cluster, pair) in centroids.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(CfkmError::Ordering { cluster, left: pair[0], right: pair[1] });
            }
        }
        let first = centroids[0];
        let last = centroids[centroids.len() - 1];
        if first <= lower || last >= upper {
            return Err(CfkmError::InvalidCentroids(format!(
                "centroids must lie strictly inside ({lower}, {upper}), got [{first}, {last}]"
            )));
        }
        Ok(Self(centroids))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    /// Largest absolute displacement between two centroid vectors of equal length.
    pub fn max_displacement(&self, other: &CentroidVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// One sparse row of the membership matrix.
///
/// The observation belongs to `cluster` with `degree` and to `cluster + 1`
/// with `1 - degree`. A degree of one means there is no second entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipRow {
    pub cluster: usize,
    pub degree: f64,
}

impl MembershipRow {
    pub fn crisp(cluster: usize) -> Self {
        Self { cluster, degree: 1.0 }
    }

    /// Nonzero `(cluster, degree)` entries of the row.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> {
        let first = (self.degree > 0.0).then_some((self.cluster, self.degree));
        let second = (self.degree < 1.0).then_some((self.cluster + 1, 1.0 - self.degree));
        first.into_iter().chain(second)
    }

    pub fn get(&self, j: usize) -> f64 {
        if j == self.cluster {
            self.degree
        } else if j == self.cluster + 1 {
            1.0 - self.degree
        } else {
            0.0
        }
    }
}

/// Membership degrees of `n` observations in `k` clusters, stored sparsely
/// so the adjacency constraint holds by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    clusters: usize,
    rows: Vec<MembershipRow>,
}

impl MembershipMatrix {
    pub fn from_rows(clusters: usize, rows: Vec<MembershipRow>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if !(0.0..=1.0).contains(&row.degree) {
                return Err(CfkmError::InvalidMemberships(format!("row {i}: degree {} outside [0, 1]", row.degree)));
            }
            let top = if row.degree < 1.0 { row.cluster + 1 } else { row.cluster };
            if top >= clusters {
                return Err(CfkmError::InvalidMemberships(format!(
                    "row {i}: cluster index {top} out of range for k = {clusters}"
                )));
            }
        }
        Ok(Self { clusters, rows })
    }

    /// Builds a matrix from dense rows, checking the simplex and adjacency
    /// constraints (row sums within 1e-9, nonzeros on at most two adjacent
    /// clusters).
    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let clusters = dense.first().map_or(0, Vec::len);
        let mut rows = Vec::with_capacity(dense.len());
        for (i, row) in dense.iter().enumerate() {
            if row.len() != clusters {
                return Err(CfkmError::InvalidMemberships(format!("row {i} has ragged length")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|u| *u < 0.0) {
                return Err(CfkmError::InvalidMemberships(format!(
                    "row {i} violates the simplex constraint (sum {sum})"
                )));
            }
            let nonzero: Vec<usize> = (0..clusters).filter(|&j| row[j] > 0.0).collect();
            let parsed = match nonzero.as_slice() {
                [j] => MembershipRow::crisp(*j),
                [j, l] if *l == j + 1 => MembershipRow { cluster: *j, degree: row[*j] },
                _ => {
                    return Err(CfkmError::InvalidMemberships(format!(
                        "row {i} has nonzero entries {nonzero:?}, not two adjacent clusters"
                    )))
                }
            };
            rows.push(parsed);
        }
        Self::from_rows(clusters, rows)
    }

    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[MembershipRow] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &MembershipRow {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|row| (0..self.clusters).map(|j| row.get(j)).collect()).collect()
    }
}
