//! Size-constrained K-means: the standard Lloyd iteration with the
//! assignment step replaced by an optimal transportation solve, so every
//! cluster ends each iteration within its `[min_size, max_size]` bounds.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::flow::min_cost_assignment;
use super::ClusterError;
use crate::stream_seed;

pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_MAX_ITER: usize = 100;

fn squared_distance(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, j: usize) -> f64 {
    let d = points.ncols();
    (0..d)
        .map(|c| {
            let delta = points[(i, c)] - centroids[(j, c)];
            delta * delta
        })
        .sum()
}

/// One optimal bounded assignment step for fixed centroids: labels minimize
/// the total squared distance subject to `min_size <= |cluster| <= max_size`.
pub fn assign_with_bounds(
    points: &DMatrix<f64>,
    centroids: &DMatrix<f64>,
    min_size: usize,
    max_size: usize,
) -> Result<Vec<usize>, ClusterError> {
    let m = points.nrows();
    let k = centroids.nrows();
    if points.ncols() != centroids.ncols() {
        return Err(ClusterError::Shape(format!(
            "points have {} dims, centroids {}",
            points.ncols(),
            centroids.ncols()
        )));
    }
    check_feasible(m, k, min_size, max_size)?;
    let mut costs = vec![0.0; m * k];
    for i in 0..m {
        for j in 0..k {
            costs[i * k + j] = squared_distance(points, i, centroids, j);
        }
    }
    min_cost_assignment(&costs, m, k, min_size, max_size)
        .ok_or_else(|| ClusterError::Infeasible("assignment flow infeasible".into()))
}

fn check_feasible(m: usize, k: usize, min_size: usize, max_size: usize) -> Result<(), ClusterError> {
    if k == 0 || m == 0 {
        return Err(ClusterError::Shape("empty points or zero clusters".into()));
    }
    if min_size > max_size || k * min_size > m || m > k * max_size {
        return Err(ClusterError::Infeasible(format!(
            "no assignment of {m} points to {k} clusters with sizes in [{min_size}, {max_size}]"
        )));
    }
    Ok(())
}

fn kmeanspp_init(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = points.nrows();
    let d = points.ncols();
    let mut centroids = DMatrix::zeros(k, d);
    let first = rng.gen_range(0..m);
    centroids.row_mut(0).copy_from(&points.row(first));
    let mut best_d2 = vec![f64::INFINITY; m];
    for c in 1..k {
        for i in 0..m {
            let dist = squared_distance(points, i, &centroids, c - 1);
            if dist < best_d2[i] {
                best_d2[i] = dist;
            }
        }
        let total: f64 = best_d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut x = rng.gen_range(0.0..total);
            let mut pick = m - 1;
            for (i, &w) in best_d2.iter().enumerate() {
                x -= w;
                if x < 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.gen_range(0..m)
        };
        centroids.row_mut(c).copy_from(&points.row(chosen));
    }
    centroids
}

fn update_centroids(
    points: &DMatrix<f64>,
    labels: &[usize],
    previous: &DMatrix<f64>,
) -> DMatrix<f64> {
    let k = previous.nrows();
    let d = points.ncols();
    let mut sums = DMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &label) in labels.iter().enumerate() {
        counts[label] += 1;
        for c in 0..d {
            sums[(label, c)] += points[(i, c)];
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            // Empty clusters (possible when min_size = 0) keep their centroid.
            sums.row_mut(j).copy_from(&previous.row(j));
        } else {
            let inv = 1.0 / counts[j] as f64;
            for c in 0..d {
                sums[(j, c)] *= inv;
            }
        }
    }
    sums
}

fn objective(points: &DMatrix<f64>, labels: &[usize], centroids: &DMatrix<f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &j)| squared_distance(points, i, centroids, j))
        .sum()
}

/// Relabels clusters so ids appear in order of their lowest member index;
/// ids of empty clusters follow in their original order.
pub(crate) fn canonicalize_labels(labels: &mut [usize], k: usize) {
    let mut remap = vec![usize::MAX; k];
    let mut next = 0;
    for &label in labels.iter() {
        if remap[label] == usize::MAX {
            remap[label] = next;
            next += 1;
        }
    }
    for slot in remap.iter_mut() {
        if *slot == usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    for label in labels.iter_mut() {
        *label = remap[*label];
    }
}

/// Size-constrained K-means over the rows of `points`: k-means++ seeding,
/// [`KMEANS_RESTARTS`] restarts keeping the lowest final objective (ties go
/// to the earliest restart), at most [`KMEANS_MAX_ITER`] iterations each,
/// stopping when the assignment stops changing. Labels are canonicalized by
/// lowest member index.
pub fn constrained_kmeans(
    points: &DMatrix<f64>,
    k: usize,
    min_size: usize,
    max_size: usize,
    seed: u64,
) -> Result<Vec<usize>, ClusterError> {
    let m = points.nrows();
    check_feasible(m, k, min_size, max_size)?;

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, restart as u64));
        let mut centroids = kmeanspp_init(points, k, &mut rng);
        let mut labels = assign_with_bounds(points, &centroids, min_size, max_size)?;
        for _ in 0..KMEANS_MAX_ITER {
            centroids = update_centroids(points, &labels, &centroids);
            let next = assign_with_bounds(points, &centroids, min_size, max_size)?;
            if next == labels {
                break;
            }
            labels = next;
        }
        centroids = update_centroids(points, &labels, &centroids);
        let cost = objective(points, &labels, &centroids);
        let better = match &best {
            None => true,
            Some((best_cost, _)) => cost < *best_cost,
        };
        if better {
            best = Some((cost, labels));
        }
    }
    let (_, mut labels) = best.expect("at least one restart");
    canonicalize_labels(&mut labels, k);
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            rows.len(),
            rows[0].len(),
            &rows.iter().flat_map(|r| r.iter().copied()).collect::<Vec<_>>(),
        )
    }

    /// Brute force over all label vectors respecting the size bounds.
    fn brute_force_assignment(
        points: &DMatrix<f64>,
        centroids: &DMatrix<f64>,
        min_size: usize,
        max_size: usize,
    ) -> f64 {
        let m = points.nrows();
        let k = centroids.nrows();
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; m];
        loop {
            let mut sizes = vec![0usize; k];
            for &l in &labels {
                sizes[l] += 1;
            }
            if sizes.iter().all(|&s| (min_size..=max_size).contains(&s)) {
                let cost: f64 = labels
                    .iter()
                    .enumerate()
                    .map(|(i, &j)| squared_distance(points, i, centroids, j))
                    .sum();
                if cost < best {
                    best = cost;
                }
            }
            // Odometer increment.
            let mut pos = 0;
            loop {
                if pos == m {
                    return best;
                }
                labels[pos] += 1;
                if labels[pos] < k {
                    break;
                }
                labels[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn rectangle_pairs_by_short_edge() {
        // Corners of a 1 x 10 rectangle; balanced 2-clustering groups the
        // short edges.
        let points = matrix(&[
            &[0.0, 0.0],
            &[1.0, 0.0],
            &[0.0, 10.0],
            &[1.0, 10.0],
        ]);
        let labels = constrained_kmeans(&points, 2, 2, 2, 3).unwrap();
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
        assert_eq!(labels[0], 0); // canonical: station 0's cluster is id 0
    }

    #[test]
    fn singleton_bounds_force_identity_partition() {
        let points = matrix(&[&[0.0, 0.0], &[5.0, 0.0], &[0.0, 5.0]]);
        let labels = constrained_kmeans(&points, 3, 1, 1, 9).unwrap();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn bounds_override_natural_blobs() {
        // Blobs of sizes 6/3/3 with k = 3 and bounds [4, 4]: sizes must be
        // 4/4/4 even though the natural blobs are unbalanced.
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..6 {
            rows.push(vec![0.0 + 0.01 * i as f64, 0.0]);
        }
        for i in 0..3 {
            rows.push(vec![10.0 + 0.01 * i as f64, 0.0]);
        }
        for i in 0..3 {
            rows.push(vec![0.0 + 0.01 * i as f64, 10.0]);
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let points = matrix(&refs);
        let labels = constrained_kmeans(&points, 3, 4, 4, 5).unwrap();
        let mut sizes = vec![0usize; 3];
        for &l in &labels {
            sizes[l] += 1;
        }
        assert_eq!(sizes, vec![4, 4, 4]);

        // The final assignment step must be optimal for the final centroids.
        let mut centroids = DMatrix::zeros(3, 2);
        centroids = update_centroids(&points, &labels, &centroids);
        let flow_labels = assign_with_bounds(&points, &centroids, 4, 4).unwrap();
        let flow_cost = objective(&points, &flow_labels, &centroids);
        let brute = brute_force_assignment(&points, &centroids, 4, 4);
        assert!((flow_cost - brute).abs() <= 1e-9 * brute.max(1.0));
    }

    #[test]
    fn assignment_step_matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.gen_range(4..=8);
            let k = rng.gen_range(2..=3);
            let min_size = rng.gen_range(0..=m / k);
            let max_size = rng.gen_range((m + k - 1) / k..=m);
            let points = DMatrix::from_fn(m, 2, |_, _| rng.gen_range(-5.0..5.0));
            let centroids = DMatrix::from_fn(k, 2, |_, _| rng.gen_range(-5.0..5.0));
            let labels = assign_with_bounds(&points, &centroids, min_size, max_size).unwrap();
            let cost = objective(&points, &labels, &centroids);
            let brute = brute_force_assignment(&points, &centroids, min_size, max_size);
            assert!(
                (cost - brute).abs() <= 1e-9 * brute.max(1.0),
                "seed {seed}: flow {cost} vs brute {brute}"
            );
        }
    }

    #[test]
    fn objective_non_increasing_across_iterations() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points = DMatrix::from_fn(12, 2, |_, _| rng.gen_range(-1.0..1.0));
        let mut init_rng = ChaCha8Rng::seed_from_u64(stream_seed(9, 0));
        let mut centroids = kmeanspp_init(&points, 3, &mut init_rng);
        let mut labels = assign_with_bounds(&points, &centroids, 3, 5).unwrap();
        let mut last = objective(&points, &labels, &centroids);
        for _ in 0..20 {
            centroids = update_centroids(&points, &labels, &centroids);
            let after_update = objective(&points, &labels, &centroids);
            assert!(after_update <= last + 1e-12);
            labels = assign_with_bounds(&points, &centroids, 3, 5).unwrap();
            let after_assign = objective(&points, &labels, &centroids);
            assert!(after_assign <= after_update + 1e-12);
            last = after_assign;
        }
    }

    #[test]
    fn infeasible_bounds_error() {
        let points = matrix(&[&[0.0], &[1.0], &[2.0]]);
        assert!(matches!(
            constrained_kmeans(&points, 2, 2, 2, 1),
            Err(ClusterError::Infeasible(_))
        ));
    }
}
