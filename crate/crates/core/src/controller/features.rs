//! The 12 confidence statistics the filter sees. Natural logs throughout.

use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 12;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "conf_max",
    "conf_std",
    "conf_entropy",
    "conf_ratio",
    "top10_sum",
    "logit_mean",
    "logit_max",
    "logit_std",
    "logit_delta12",
    "loss_pseudo_ce",
    "margin_ce",
    "energy",
];

/// Top-2 logit gaps beyond this saturate `conf_ratio` instead of overflowing.
const MAX_LOG_RATIO: f64 = 700.0;

pub type FeatureVector = [f64; FEATURE_COUNT];

/// Features in [`FEATURE_NAMES`] order. With fewer than ten classes
/// `top10_sum` sums all of them.
pub fn extract_features(z: &[f64]) -> Result<FeatureVector> {
    let k = z.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 logits, got {k}"
        )));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let kf = k as f64;
    let mut sorted = z.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let z1 = sorted[0];
    let delta = z1 - sorted[1];

    let e: Vec<f64> = z.iter().map(|&v| (v - z1).exp()).collect();
    let se: f64 = e.iter().sum();
    let lse = z1 + se.ln();
    let p: Vec<f64> = e.iter().map(|&v| v / se).collect();

    let p_max = 1.0 / se;
    let p_mean = 1.0 / kf;
    let p_std = (p.iter().map(|&v| (v - p_mean).powi(2)).sum::<f64>() / kf).sqrt();
    let entropy = -p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>();
    let mut ps = p.clone();
    ps.sort_by(|a, b| b.total_cmp(a));
    let top10: f64 = ps.iter().take(10).sum();

    let z_mean = z.iter().sum::<f64>() / kf;
    let z_std = (z.iter().map(|&v| (v - z_mean).powi(2)).sum::<f64>() / kf).sqrt();

    Ok([
        p_max,
        p_std,
        entropy.max(0.0),
        delta.min(MAX_LOG_RATIO).exp(),
        top10,
        z_mean,
        z1,
        z_std,
        delta,
        lse - z1,
        delta,
        -lse,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    #[allow(clippy::approx_constant, clippy::excessive_precision)]
    fn reference_fixture() {
        let f = extract_features(&[2.0, 1.0, 0.0]).unwrap();
        let want = [
            0.6652409557748219,
            0.2430430171506486,
            0.8323955818399389,
            2.718281828459045,
            1.0,
            1.0,
            2.0,
            0.816496580927726,
            1.0,
            0.4076059644443803,
            1.0,
            -2.4076059644443803,
        ];
        for (i, (a, b)) in f.iter().zip(want).enumerate() {
            assert!((a - b).abs() < 1e-9, "{}: {a} vs {b}", FEATURE_NAMES[i]);
        }
    }

    #[test]
    fn uniform_logits() {
        let f = extract_features(&[0.3; 5]).unwrap();
        assert!((f[0] - 0.2).abs() < 1e-15);
        assert!((f[2] - 5f64.ln()).abs() < 1e-12);
        assert_eq!(f[3], 1.0);
        assert_eq!(f[8], 0.0);
        assert_eq!(f[10], 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(extract_features(&[1.0]).is_err());
        assert!(extract_features(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn top10_truncates() {
        let z: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let f = extract_features(&z).unwrap();
        assert!(f[4] < 1.0 && f[4] > 0.5);
    }

    #[test]
    fn huge_gap_saturates() {
        let f = extract_features(&[1000.0, 0.0]).unwrap();
        assert!(f.iter().all(|v| v.is_finite()));
        assert_eq!(f[0], 1.0);
    }

    proptest! {
        #[test]
        fn invariants(z in prop::collection::vec(-20.0f64..20.0, 2..16), t in -50.0f64..50.0) {
            let f = extract_features(&z).unwrap();
            prop_assert!(f[0] > 0.0 && f[0] <= 1.0);
            prop_assert!(f[2] >= 0.0);
            prop_assert!(f[3] >= 1.0);
            prop_assert!(f[8] >= 0.0);
            prop_assert!((f[10] - f[3].ln()).abs() < 1e-9);
            let shifted: Vec<f64> = z.iter().map(|v| v + t).collect();
            let g = extract_features(&shifted).unwrap();
            for i in [0, 1, 2, 3, 4, 7, 8, 9, 10] {
                prop_assert!((f[i] - g[i]).abs() < 1e-9 * f[i].abs().max(1.0));
            }
            prop_assert!((g[11] - f[11] + t).abs() < 1e-9);
            prop_assert!((g[5] - f[5] - t).abs() < 1e-9);
            prop_assert!((g[6] - f[6] - t).abs() < 1e-9);
        }
    }
}
