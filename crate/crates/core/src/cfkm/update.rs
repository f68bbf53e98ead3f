use super::{CentroidVector, CfkmError, MembershipMatrix, MembershipRow, Result, SampleSet};
use crate::fuzzy::{Breakpoint, FuzzyPartition, Interval, PartitionLayout};

/// Number of centroids at or to the left of `x`.
///
/// With the sentinels `v_0 = lower` and `v_{k+1} = upper` this is the index
/// `j` such that `v_j <= x < v_{j+1}` (1-based centroids); `x == upper`
/// yields `k`.
pub fn bracketing_index(x: f64, centroids: &CentroidVector, lower: f64, upper: f64) -> Result<usize> {
    if !(lower..=upper).contains(&x) {
        return Err(CfkmError::Domain { x, lower, upper });
    }
    Ok(centroids.as_slice().partition_point(|&v| v <= x))
}

/// Optimal membership of the left cluster in a two-cluster subproblem with
/// squared distances `d_left` and `d_right`.
///
/// Minimises `t^m d_left + (1 - t)^m d_right` over `t` in `[0, 1]`.
pub fn membership_pair(d_left: f64, d_right: f64, fuzzifier: f64) -> f64 {
    if d_left == 0.0 {
        return 1.0;
    }
    if d_right == 0.0 {
        return 0.0;
    }
    let ratio = (d_left / d_right).powf(1.0 / (fuzzifier - 1.0));
    1.0 / (1.0 + ratio)
}

pub(crate) fn check_fuzzifier(fuzzifier: f64) -> Result<()> {
    if fuzzifier.is_finite() && fuzzifier > 1.0 {
        Ok(())
    } else {
        Err(CfkmError::Parameter(format!("fuzzifier must be > 1, got {fuzzifier}")))
    }
}

fn membership_row(x: f64, centroids: &[f64], fuzzifier: f64) -> MembershipRow {
    let k = centroids.len();
    let j = centroids.partition_point(|&v| v <= x);
    if j == 0 {
        // left tail [a, v_1): only cluster 1 is a real neighbour
        return MembershipRow::crisp(0);
    }
    if j == k {
        return MembershipRow::crisp(k - 1);
    }
    let left = centroids[j - 1];
    let right = centroids[j];
    let degree = membership_pair((x - left).powi(2), (x - right).powi(2), fuzzifier);
    MembershipRow { cluster: j - 1, degree }
}

/// Closed-form membership step for fixed centroids.
///
/// Points in `[a, v_1)` and `[v_k, b]` have a single real neighbouring
/// cluster and receive full membership in it.
pub fn update_memberships(data: &SampleSet, centroids: &CentroidVector, fuzzifier: f64) -> Result<MembershipMatrix> {
    check_fuzzifier(fuzzifier)?;
    let v = centroids.as_slice();
    if v[0] <= data.lower() || v[v.len() - 1] >= data.upper() {
        return Err(CfkmError::InvalidCentroids(format!(
            "centroids must lie strictly inside ({}, {})",
            data.lower(),
            data.upper()
        )));
    }
    let mut rows = Vec::with_capacity(data.len());
    let mut previous: Option<(f64, MembershipRow)> = None;
    for &x in data.values() {
        // sorted input: duplicates share the row computed for their first copy
        let row = match previous {
            Some((px, row)) if px == x => row,
            _ => membership_row(x, v, fuzzifier),
        };
        previous = Some((x, row));
        rows.push(row);
    }
    MembershipMatrix::from_rows(v.len(), rows)
}

/// Closed-form centre step: weighted means with weights `u_ij^m`.
pub fn update_centers(data: &SampleSet, memberships: &MembershipMatrix, fuzzifier: f64) -> Result<CentroidVector> {
    check_fuzzifier(fuzzifier)?;
    if memberships.len() != data.len() {
        return Err(CfkmError::InvalidMemberships(format!(
            "{} rows for {} observations",
            memberships.len(),
            data.len()
        )));
    }
    let k = memberships.clusters();
    let mut numer = vec![0.0; k];
    let mut denom = vec![0.0; k];
    for (&x, row) in data.values().iter().zip(memberships.rows()) {
        for (j, u) in row.entries() {
            let w = u.powf(fuzzifier);
            numer[j] += w * x;
            denom[j] += w;
        }
    }
    let mut centers = Vec::with_capacity(k);
    for j in 0..k {
        if !(denom[j] > 0.0) {
            return Err(CfkmError::DegenerateCluster { cluster: j });
        }
        centers.push(numer[j] / denom[j]);
    }
    if centers[0] <= data.lower() {
        return Err(CfkmError::Ordering { cluster: 0, left: data.lower(), right: centers[0] });
    }
    if centers[k - 1] >= data.upper() {
        return Err(CfkmError::Ordering { cluster: k - 1, left: centers[k - 1], right: data.upper() });
    }
    CentroidVector::new(centers, data.lower(), data.upper())
}

/// `J(U, V) = sum_i sum_j u_ij^m (x_i - v_j)^2`.
pub fn objective(data: &SampleSet, memberships: &MembershipMatrix, centroids: &CentroidVector, fuzzifier: f64) -> f64 {
    let v = centroids.as_slice();
    data.values()
        .iter()
        .zip(memberships.rows())
        .map(|(&x, row)| row.entries().map(|(j, u)| u.powf(fuzzifier) * (x - v[j]).powi(2)).sum::<f64>())
        .sum()
}

/// Core/gap layout of the C-FKM classes: cores are the centroids (the
/// boundary classes extend to the domain bounds) and each gap carries the
/// observed memberships of its left class.
pub(crate) fn layout_from_memberships(
    data: &SampleSet,
    centroids: &CentroidVector,
    memberships: &MembershipMatrix,
) -> Result<PartitionLayout> {
    let v = centroids.as_slice();
    let k = v.len();
    if memberships.clusters() != k || memberships.len() != data.len() {
        return Err(CfkmError::InvalidMemberships(format!(
            "matrix is {}x{}, expected {}x{k}",
            memberships.len(),
            memberships.clusters(),
            data.len()
        )));
    }
    let mut cores: Vec<Interval> = v.iter().map(|&c| Interval::new(c, c)).collect();
    cores[0].lower = data.lower();
    cores[k - 1].upper = data.upper();

    let mut gaps: Vec<Vec<Breakpoint>> = vec![Vec::new(); k.saturating_sub(1)];
    let values = data.values();
    let mut i = 0;
    while i < values.len() {
        let x = values[i];
        let mut end = i;
        while end < values.len() && values[end] == x {
            end += 1;
        }
        let g = v.partition_point(|&c| c <= x);
        if g >= 1 && g < k && x > v[g - 1] {
            let mean = (i..end).map(|r| memberships.get(r, g - 1)).sum::<f64>() / (end - i) as f64;
            gaps[g - 1].push(Breakpoint::new(x, mean));
        }
        i = end;
    }
    Ok(PartitionLayout::new(data.lower(), data.upper(), cores, gaps))
}

/// Interpolates the memberships into piecewise-linear classes.
pub fn partition_from_memberships(
    data: &SampleSet,
    centroids: &CentroidVector,
    memberships: &MembershipMatrix,
) -> Result<FuzzyPartition> {
    layout_from_memberships(data, centroids, memberships)?
        .to_partition()
        .map_err(|e| CfkmError::InvalidMemberships(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[f64]) -> CentroidVector {
        CentroidVector::new(v.to_vec(), 0.0, 1.0).unwrap()
    }

    // independent oracle: minimise t^m d1 + (1-t)^m d2 on a grid
    fn grid_min(d1: f64, d2: f64, m: f64, step: f64) -> (f64, f64) {
        let steps = (1.0 / step).round() as usize;
        (0..=steps)
            .map(|s| {
                let t = s as f64 * step;
                (t, t.powf(m) * d1 + (1.0 - t).powf(m) * d2)
            })
            .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    #[test]
    fn bracketing_examples() {
        let v = cv(&[0.2, 0.5, 0.8]);
        assert_eq!(bracketing_index(0.5, &v, 0.0, 1.0).unwrap(), 2);
        assert_eq!(bracketing_index(0.1, &v, 0.0, 1.0).unwrap(), 0);
        assert_eq!(bracketing_index(1.0, &v, 0.0, 1.0).unwrap(), 3);
        assert_eq!(bracketing_index(0.0, &v, 0.0, 1.0).unwrap(), 0);
        assert!(bracketing_index(1.2, &v, 0.0, 1.0).is_err());

        // linear scan over the sentinel-extended gaps
        let ext = [0.0, 0.2, 0.5, 0.8, 1.0];
        for s in 0..1000 {
            let x = s as f64 / 1000.0;
            let expected = (0..4).find(|&j| ext[j] <= x && x < ext[j + 1]).unwrap();
            assert_eq!(bracketing_index(x, &v, 0.0, 1.0).unwrap(), expected, "x = {x}");
        }
    }

    #[test]
    fn membership_pair_matches_grid_oracle() {
        // x = 0.25 between centres 0 and 1, m = 2
        let (t, _) = grid_min(0.0625, 0.5625, 2.0, 1e-6);
        assert!((t - 0.9).abs() < 1e-5);
        assert!((membership_pair(0.0625, 0.5625, 2.0) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn membership_symmetry_and_zero_distance() {
        assert_eq!(membership_pair(0.04, 0.04, 2.0), 0.5);
        assert_eq!(membership_pair(0.0, 0.3, 1.5), 1.0);
        assert_eq!(membership_pair(0.3, 0.0, 1.5), 0.0);
    }

    #[test]
    fn update_memberships_rows() {
        let data = SampleSet::new(vec![0.1, 0.35, 0.5, 0.9], 0.0, 1.0).unwrap();
        let u = update_memberships(&data, &cv(&[0.2, 0.5, 0.8]), 2.0).unwrap();
        assert_eq!(u.row(0), &MembershipRow::crisp(0));
        assert!((u.get(1, 0) - 0.5).abs() < 1e-12);
        assert!((u.get(1, 0) + u.get(1, 1) - 1.0).abs() < 1e-15);
        assert_eq!(u.row(2), &MembershipRow::crisp(1));
        assert_eq!(u.row(3), &MembershipRow::crisp(2));
        assert!(update_memberships(&data, &cv(&[0.2, 0.5]), 1.0).is_err());
    }

    #[test]
    fn update_centers_examples() {
        let data = SampleSet::new(vec![0.0, 1.0], -1.0, 2.0).unwrap();
        let u = MembershipMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(update_centers(&data, &u, 2.0).unwrap().as_slice(), &[0.0, 1.0]);

        let data = SampleSet::new(vec![0.0, 0.5, 1.0], -1.0, 2.0).unwrap();
        let u = MembershipMatrix::from_dense(&[vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let v = update_centers(&data, &u, 2.0).unwrap();
        assert!((v.get(0) - 0.1).abs() < 1e-12);

        // golden-section minimisation of J in v_1 agrees with the weighted mean
        let j_of = |c: f64| {
            let probe = CentroidVector::new(vec![c, 1.5], -1.0, 2.0).unwrap();
            objective(&data, &u, &probe, 2.0)
        };
        let (mut lo, mut hi) = (-0.5_f64, 0.9_f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = hi - phi * (hi - lo);
            let d = lo + phi * (hi - lo);
            if j_of(c) < j_of(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        assert!(((lo + hi) / 2.0 - 0.1).abs() < 1e-8);
    }

    #[test]
    fn update_centers_errors() {
        let data = SampleSet::new(vec![0.1, 0.2], 0.0, 1.0).unwrap();
        let u = MembershipMatrix::from_dense(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(update_centers(&data, &u, 2.0), Err(CfkmError::DegenerateCluster { cluster: 1 }));
        let u = MembershipMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(update_centers(&data, &u, 2.0), Err(CfkmError::Ordering { .. })));
    }

    #[test]
    fn objective_examples() {
        let data = SampleSet::new(vec![0.2, 0.6], 0.0, 1.0).unwrap();
        let v = cv(&[0.2, 0.6]);
        let u = MembershipMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(objective(&data, &u, &v, 2.0), 0.0);

        let data = SampleSet::new(vec![1.0], -1.0, 2.0).unwrap();
        let v = CentroidVector::new(vec![0.0, 1.5], -1.0, 2.0).unwrap();
        let u = MembershipMatrix::from_dense(&[vec![1.0, 0.0]]).unwrap();
        assert_eq!(objective(&data, &u, &v, 2.0), 1.0);
    }

    #[test]
    fn objective_matches_naive_double_loop() {
        let data = SampleSet::new(vec![0.05, 0.3, 0.41, 0.66, 0.7, 0.93], 0.0, 1.0).unwrap();
        let v = cv(&[0.25, 0.5, 0.75]);
        let u = update_memberships(&data, &v, 1.7).unwrap();
        let dense = u.to_dense();
        let mut naive = 0.0;
        for (i, x) in data.values().iter().enumerate() {
            for (j, c) in v.as_slice().iter().enumerate() {
                naive += dense[i][j].powf(1.7) * (x - c) * (x - c);
            }
        }
        assert!((objective(&data, &u, &v, 1.7) - naive).abs() < 1e-14);
    }

    #[test]
    fn partition_crosses_at_midpoint() {
        let values: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let data = SampleSet::new(values, 0.0, 1.0).unwrap();
        let v = cv(&[0.25, 0.75]);
        let u = update_memberships(&data, &v, 2.0).unwrap();
        let p = partition_from_memberships(&data, &v, &u).unwrap();
        assert!((p.classes()[0].eval(0.5) - 0.5).abs() < 1e-12);
        assert!((p.classes()[1].eval(0.5) - 0.5).abs() < 1e-12);
        p.validate().unwrap();
    }

    #[test]
    fn crisp_partition_peaks_at_centroids() {
        let data = SampleSet::new(vec![0.2, 0.5, 0.8], 0.0, 1.0).unwrap();
        let v = cv(&[0.2, 0.5, 0.8]);
        let u = update_memberships(&data, &v, 2.0).unwrap();
        let p = partition_from_memberships(&data, &v, &u).unwrap();
        for (class, c) in p.classes().iter().zip(v.as_slice()) {
            assert_eq!(class.eval(*c), 1.0);
        }
        assert_eq!(p.classes()[1].support(), Interval::new(0.2, 0.8));
        for &x in data.values() {
            let s: f64 = p.classes().iter().map(|c| c.eval(x)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
