//! Trajectory evaluation metrics: success, oracle success, navigation error,
//! path-length-weighted success, and normalized dynamic time warping.

use thiserror::Error;

use crate::scalar::{cast, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("shortest path length must be positive, got {0}")]
    NonPositiveShortest(f64),
    #[error("polyline must be nonempty")]
    EmptyPath,
}

fn dist<S: Scalar>(a: (S, S), b: (S, S)) -> S {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    (dx * dx + dy * dy).sqrt()
}

/// Euclidean distance from the final position to the goal.
pub fn navigation_error<S: Scalar>(finalpos: (S, S), goal: (S, S)) -> S {
    dist(finalpos, goal)
}

/// Success: the episode ends within `radius` of the goal (inclusive).
pub fn success<S: Scalar>(finalpos: (S, S), goal: (S, S), radius: S) -> bool {
    navigation_error(finalpos, goal) <= radius
}

/// Oracle success: any trajectory point ever came within `radius` of the goal.
pub fn oracle_success<S: Scalar>(trajectory: &[(S, S)], goal: (S, S), radius: S) -> bool {
    trajectory.iter().any(|&p| dist(p, goal) <= radius)
}

/// Total length of a polyline.
pub fn path_length<S: Scalar>(path: &[(S, S)]) -> S {
    path.windows(2).map(|w| dist(w[0], w[1])).sum()
}

/// Success weighted by path length: `success * shortest / max(shortest, actual)`.
pub fn spl<S: Scalar>(success: bool, shortest: S, actual: S) -> Result<S, MetricsError> {
    if shortest <= S::zero() {
        return Err(MetricsError::NonPositiveShortest(shortest.to_f64_lossy()));
    }
    if !success {
        return Ok(S::zero());
    }
    Ok(shortest / shortest.max(actual))
}

/// Dynamic-time-warping alignment cost between two point sequences under
/// Euclidean point distance.
pub fn dtw_cost<S: Scalar>(a: &[(S, S)], b: &[(S, S)]) -> Result<S, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyPath);
    }
    // Rolling two-row dynamic program over the (a, b) alignment lattice.
    let mut prev = vec![S::infinity(); b.len() + 1];
    let mut curr = vec![S::infinity(); b.len() + 1];
    prev[0] = S::zero();
    for i in 1..=a.len() {
        curr[0] = S::infinity();
        for j in 1..=b.len() {
            let cost = dist(a[i - 1], b[j - 1]);
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[b.len()])
}

/// Normalized DTW: `exp(-DTW / (|reference| * radius))`, where `|reference|`
/// is the reference point count and `radius` the episode success radius.
pub fn ndtw<S: Scalar>(
    trajectory: &[(S, S)],
    reference: &[(S, S)],
    radius: S,
) -> Result<S, MetricsError> {
    let cost = dtw_cost(trajectory, reference)?;
    let norm = cast::<S>(reference.len() as f64) * radius;
    Ok((-cost / norm).exp())
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn exact_arrival_is_success_with_zero_error() {
        assert_eq!(navigation_error((1.0, 2.0), (1.0, 2.0)), 0.0);
        assert!(success((1.0, 2.0), (1.0, 2.0), 3.0));
    }

    #[test]
    fn success_radius_is_inclusive() {
        assert!(success((3.0, 0.0), (0.0, 0.0), 3.0));
        assert!(!success((3.01, 0.0), (0.0, 0.0), 3.0));
    }

    #[test]
    fn oracle_success_counts_pass_bys() {
        let pass_by = [(-5.0, 1.0), (0.0, 1.0), (5.0, 1.0)];
        let goal = (0.0, 0.0);
        assert!(oracle_success(&pass_by, goal, 3.0));
        assert!(!success((5.0, 1.0), goal, 3.0));

        let far = [(-5.0, 10.0), (5.0, 10.0)];
        assert!(!oracle_success(&far, goal, 3.0));
    }

    #[test]
    fn oracle_success_dominates_success() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let traj: Vec<(f64, f64)> = (0..10)
                .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let goal = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let sr = success(*traj.last().unwrap(), goal, 3.0);
            let osr = oracle_success(&traj, goal, 3.0);
            assert!(osr >= sr);
        }
    }

    #[test]
    fn spl_formula() {
        assert_eq!(spl(true, 2.0, 2.0).unwrap(), 1.0);
        assert_eq!(spl(true, 2.0, 4.0).unwrap(), 0.5);
        assert_eq!(spl(false, 2.0, 0.5).unwrap(), 0.0);
        // Actual shorter than shortest cannot exceed 1.
        assert_eq!(spl(true, 2.0, 1.0).unwrap(), 1.0);
        assert!(matches!(
            spl(true, 0.0, 1.0),
            Err(MetricsError::NonPositiveShortest(_))
        ));
    }

    #[test]
    fn ndtw_of_identical_paths_is_one() {
        let path: [(f64, f64); 3] = [(0.0, 0.0), (1.0, 0.5), (2.0, 1.5)];
        assert!((ndtw(&path, &path, 3.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ndtw_single_point_closed_form() {
        let d = 1.7;
        let got = ndtw(&[(d, 0.0)], &[(0.0, 0.0)], 3.0).unwrap();
        assert!((got - (-d / 3.0f64).exp()).abs() < 1e-12);
    }

    /// Memoized exhaustive recursion over all alignments; independent of the
    /// iterative lattice above.
    fn dtw_recursive_oracle(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
        fn go(
            a: &[(f64, f64)],
            b: &[(f64, f64)],
            i: usize,
            j: usize,
            memo: &mut HashMap<(usize, usize), f64>,
        ) -> f64 {
            if i == 0 && j == 0 {
                let dx = a[0].0 - b[0].0;
                let dy = a[0].1 - b[0].1;
                return (dx * dx + dy * dy).sqrt();
            }
            if let Some(&v) = memo.get(&(i, j)) {
                return v;
            }
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(a, b, i - 1, j, memo));
            }
            if j > 0 {
                best = best.min(go(a, b, i, j - 1, memo));
            }
            if i > 0 && j > 0 {
                best = best.min(go(a, b, i - 1, j - 1, memo));
            }
            let dx = a[i].0 - b[j].0;
            let dy = a[i].1 - b[j].1;
            let v = best + (dx * dx + dy * dy).sqrt();
            memo.insert((i, j), v);
            v
        }
        let mut memo = HashMap::new();
        go(a, b, a.len() - 1, b.len() - 1, &mut memo)
    }

    #[test]
    fn dtw_matches_recursive_oracle_on_random_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let n = rng.gen_range(1..=20);
            let m = rng.gen_range(1..=20);
            let a: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let b: Vec<(f64, f64)> = (0..m)
                .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let got = dtw_cost(&a, &b).unwrap();
            let want = dtw_recursive_oracle(&a, &b);
            assert!((got - want).abs() < 1e-9, "got {got} want {want}");
        }
    }

    #[test]
    fn ndtw_is_bounded_and_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(1..=15);
            let a: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let b: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let v = ndtw(&a, &b, 3.0).unwrap();
            assert!((0.0..=1.0).contains(&v));
            let (tx, ty) = (rng.gen_range(-9.0..9.0), rng.gen_range(-9.0..9.0));
            let shift = |p: &[(f64, f64)]| -> Vec<(f64, f64)> {
                p.iter().map(|&(x, y)| (x + tx, y + ty)).collect()
            };
            let w = ndtw(&shift(&a), &shift(&b), 3.0).unwrap();
            assert!((v - w).abs() < 1e-9);
        }
    }

    #[test]
    fn path_length_sums_segments() {
        assert_eq!(path_length::<f64>(&[(0.0, 0.0)]), 0.0);
        assert!((path_length::<f64>(&[(0.0, 0.0), (3.0, 4.0), (3.0, 5.0)]) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn empty_paths_are_rejected() {
        assert!(matches!(
            dtw_cost::<f64>(&[], &[(0.0, 0.0)]),
            Err(MetricsError::EmptyPath)
        ));
    }
}
