//! Total-variation penalty on observable profiles.

use crate::bench::metrics::total_variation;

/// `sum_r relu(TV(U_r) - TV(U_{r-1}))` over consecutive profiles.
pub fn tvd_penalty(profiles: &[Vec<f64>]) -> f64 {
    let tv: Vec<f64> = profiles.iter().map(|p| total_variation(p)).collect();
    tvd_penalty_from_tv(&tv)
}

pub fn tvd_penalty_from_tv(tv: &[f64]) -> f64 {
    tv.windows(2).map(|w| (w[1] - w[0]).max(0.0)).sum()
}

/// `sum_r relu(TV_r - TV_{r-1}) / TV_{r-1}`: summed relative growth of the
/// total variation, used to compare oscillation levels of two runs.
pub fn relative_tv_increase(profiles: &[Vec<f64>]) -> f64 {
    let tv: Vec<f64> = profiles.iter().map(|p| total_variation(p)).collect();
    tv.windows(2)
        .map(|w| if w[0] > 0.0 { (w[1] - w[0]).max(0.0) / w[0] } else { 0.0 })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn profile_tv() {
        assert_eq!(total_variation(&[0.0, 1.0, 1.0, 0.0]), 2.0);
    }

    #[test]
    fn constant_trajectory_is_free() {
        let p = vec![vec![0.0, 2.0, 1.0]; 4];
        assert_eq!(tvd_penalty(&p), 0.0);
    }

    #[test]
    fn sequence_three_two_four() {
        assert_eq!(tvd_penalty_from_tv(&[3.0, 2.0, 4.0]), 2.0);
        let p = vec![vec![0.0, 3.0], vec![0.0, 2.0], vec![0.0, 4.0]];
        assert_eq!(tvd_penalty(&p), 2.0);
    }

    proptest! {
        #[test]
        fn non_negative_and_zero_iff_non_increasing(tv in prop::collection::vec(0.0f64..10.0, 1..12)) {
            let pen = tvd_penalty_from_tv(&tv);
            prop_assert!(pen >= 0.0);
            let non_increasing = tv.windows(2).all(|w| w[1] <= w[0]);
            prop_assert_eq!(pen == 0.0, non_increasing);
        }
    }
}
