//! Exact 1-D Wasserstein distance between empirical samples.

use crate::scalar::Scalar;

use super::{OtError, Result};

/// Ground cost `c(d)` applied to quantile gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostExponent {
    /// `c(d) = d` (W1).
    Linear,
    /// `c(d) = d^2` (W2 squared).
    Squared,
}

impl CostExponent {
    #[inline]
    fn apply<T: Scalar>(self, d: T) -> T {
        match self {
            CostExponent::Linear => d,
            CostExponent::Squared => d * d,
        }
    }
}

/// Exact `int_0^1 c(|Fa^-1(q) - Fb^-1(q)|) dq` for two uniformly weighted
/// samples, computed by walking the merged quantile breakpoints of the two
/// step CDFs. Inputs must be sorted ascending; sizes may differ.
///
/// For equal-size samples this reduces to the mean cost of the sorted
/// matching, term for term.
pub fn wasserstein_1d<T: Scalar>(a: &[T], b: &[T], cost: CostExponent) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(OtError::EmptySample);
    }
    debug_assert!(a.windows(2).all(|w| w[0] <= w[1]), "sample a not sorted");
    debug_assert!(b.windows(2).all(|w| w[0] <= w[1]), "sample b not sorted");

    let n = a.len();
    let m = b.len();
    let nf = T::c(n as f64);
    let mf = T::c(m as f64);

    let mut total = T::zero();
    let mut i = 0usize;
    let mut j = 0usize;
    let mut q_prev = T::zero();
    while i < n && j < m {
        // Next breakpoint: compare (i+1)/n with (j+1)/m exactly in integers.
        let lhs = (i + 1) * m;
        let rhs = (j + 1) * n;
        let q = if lhs <= rhs {
            T::c((i + 1) as f64) / nf
        } else {
            T::c((j + 1) as f64) / mf
        };
        total += (q - q_prev) * cost.apply((a[i] - b[j]).abs());
        q_prev = q;
        if lhs <= rhs {
            i += 1;
        }
        if rhs <= lhs {
            j += 1;
        }
    }
    Ok(total)
}

/// Convenience for unsorted data: sorts copies, then calls [`wasserstein_1d`].
pub fn wasserstein_1d_unsorted<T: Scalar>(a: &[T], b: &[T], cost: CostExponent) -> Result<T> {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).expect("finite sample"));
    sb.sort_by(|x, y| x.partial_cmp(y).expect("finite sample"));
    wasserstein_1d(&sa, &sb, cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn shifted_point_mass() {
        let w = wasserstein_1d(&[0.0], &[3.0], CostExponent::Linear).unwrap();
        assert_eq!(w, 3.0);
    }

    #[test]
    fn identical_samples_are_at_distance_zero() {
        let s = [0.5, 1.0, 2.5, 7.0];
        assert_eq!(wasserstein_1d(&s, &s, CostExponent::Linear).unwrap(), 0.0);
        assert_eq!(wasserstein_1d(&s, &s, CostExponent::Squared).unwrap(), 0.0);
    }

    #[test]
    fn two_point_shift() {
        // Sorted matching oracle: (|0-1| + |1-2|) / 2 = 1.
        let w = wasserstein_1d(&[0.0, 1.0], &[1.0, 2.0], CostExponent::Linear).unwrap();
        assert_abs_diff_eq!(w, 1.0);
    }

    #[test]
    fn different_sizes_merge_breakpoints() {
        // a = {0, 1} (quantile jumps at 1/2), b = {0, 0, 3} (jumps at 1/3, 2/3).
        // Segments: [0,1/3): |0-0|, [1/3,1/2): |0-0|, [1/2,2/3): |1-0|, [2/3,1): |1-3|.
        let w = wasserstein_1d(&[0.0, 1.0], &[0.0, 0.0, 3.0], CostExponent::Linear).unwrap();
        assert_abs_diff_eq!(w, (1.0 / 6.0) * 1.0 + (1.0 / 3.0) * 2.0, epsilon = 1e-12);
    }

    #[test]
    fn matches_sorted_matching_oracle_exactly_on_equal_sizes() {
        let mut rng = crate::rng::stream(11, "w1-test", 0);
        for _ in 0..200 {
            let mut a: Vec<f64> = (0..16).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut b: Vec<f64> = (0..16).map(|_| rng.gen_range(-5.0..5.0)).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for cost in [CostExponent::Linear, CostExponent::Squared] {
                let w = wasserstein_1d(&a, &b, cost).unwrap();
                let oracle = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| cost.apply((x - y).abs()))
                    .sum::<f64>()
                    / 16.0;
                assert_eq!(w, oracle, "cost {cost:?}");
            }
        }
    }

    proptest! {
        // Scaling both samples by s > 0 scales W1 by s.
        #[test]
        fn scale_equivariance(
            mut a in proptest::collection::vec(-100.0f64..100.0, 1..20),
            mut b in proptest::collection::vec(-100.0f64..100.0, 1..20),
            s in 0.01f64..50.0,
        ) {
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let w = wasserstein_1d(&a, &b, CostExponent::Linear).unwrap();
            let sa: Vec<f64> = a.iter().map(|x| x * s).collect();
            let sb: Vec<f64> = b.iter().map(|x| x * s).collect();
            let ws = wasserstein_1d(&sa, &sb, CostExponent::Linear).unwrap();
            prop_assert!((ws - s * w).abs() <= 1e-9 * (1.0 + ws.abs()));
        }

        #[test]
        fn symmetric_and_nonnegative(
            mut a in proptest::collection::vec(-10.0f64..10.0, 1..24),
            mut b in proptest::collection::vec(-10.0f64..10.0, 1..24),
        ) {
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let ab = wasserstein_1d(&a, &b, CostExponent::Linear).unwrap();
            let ba = wasserstein_1d(&b, &a, CostExponent::Linear).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()));
        }
    }

    #[test]
    fn empty_sample_is_an_argument_error() {
        assert!(matches!(
            wasserstein_1d::<f64>(&[], &[1.0], CostExponent::Linear),
            Err(OtError::EmptySample)
        ));
    }
}
