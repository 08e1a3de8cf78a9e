//! Statistical calibration checks: conformal validity over resampled
//! splits, and elicitation of the constant-quantile fitter against a
//! brute-force pinball minimizer.

use qrmia_core::seed::{rng_for, shuffle, uniform_open01};
use qrmia_core::stats::sample_std_normal;
use qrmia_core::{
    conformal_shift, lira_attack, pinball_loss, Attack, FeatureRow, Membership, QuantileLevel,
    ScoredRow, Verdict,
};

fn level(l: f64) -> QuantileLevel {
    QuantileLevel::new(l).unwrap()
}

/// Over 200 resampled calibration/test splits of exchangeable scores, the
/// mean test FPR after a conformal shift stays within the binomial band of
/// alpha.
#[test]
fn conformal_shift_hits_target_fpr_on_average() {
    let n = 2000usize;
    let mut rng = rng_for(71, "conformal-validity");
    for &alpha in &[0.01f64, 0.05, 0.1] {
        let lv = level(1.0 - alpha);
        let mut fpr_sum = 0.0f64;
        let trials = 200usize;
        for _ in 0..trials {
            // Exchangeable pool with a skewed, heavy-ish tail.
            let pool: Vec<f64> = (0..n)
                .map(|_| {
                    let z = sample_std_normal(&mut rng);
                    z + 0.5 * z * z * z.signum()
                })
                .collect();
            let mut idx: Vec<usize> = (0..n).collect();
            shuffle(&mut rng, &mut idx);
            let (cal_idx, test_idx) = idx.split_at(n / 2);
            let features = vec![0.0f64];
            let calib: Vec<ScoredRow<'_, f64>> = cal_idx
                .iter()
                .map(|&i| ScoredRow {
                    id: i as u64,
                    features: &features,
                    score: pool[i],
                    membership: Membership::NonMember,
                })
                .collect();
            // Start from an arbitrary miscalibrated rule and let the shift
            // do all the work.
            let base: Attack<f64> = lira_attack(-3.0);
            let shifted = conformal_shift(&base, &calib, lv).unwrap();
            let x = FeatureRow::anonymous(features.as_slice());
            let rejected = test_idx
                .iter()
                .filter(|&&i| shifted.decide(x, pool[i]).unwrap() == Verdict::RejectNull)
                .count();
            fpr_sum += rejected as f64 / test_idx.len() as f64;
        }
        let mean_fpr = fpr_sum / trials as f64;
        let band = 3.0 * (alpha * (1.0 - alpha) / n as f64).sqrt();
        assert!(
            (mean_fpr - alpha).abs() <= band,
            "alpha {alpha}: mean fpr {mean_fpr}, band {band}"
        );
    }
}

/// Brute-force oracle for the best constant under empirical pinball loss:
/// evaluates the loss at every sample value via prefix sums and returns the
/// position of a minimizer in the sorted sample.
fn brute_force_best_rank(sorted: &[f64], lv: QuantileLevel) -> usize {
    let n = sorted.len();
    let mut prefix = vec![0.0f64; n + 1];
    for (i, &s) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + s;
    }
    let total: f64 = prefix[n];
    let alpha = lv.alpha();
    let mut best = (f64::INFINITY, 0usize);
    for k in 0..n {
        let q = sorted[k];
        // sum over s < q of alpha*(q - s) plus sum over s > q of (1-alpha)*(s - q),
        // using the sorted order (ties contribute zero either way).
        let below = prefix[k];
        let above = total - prefix[k + 1];
        let loss = alpha * (q * k as f64 - below)
            + (1.0 - alpha) * (above - q * (n - k - 1) as f64);
        if loss < best.0 {
            best = (loss, k);
        }
    }
    best.1
}

/// The oracle itself is checked against direct summation on small samples.
#[test]
fn brute_force_oracle_matches_direct_summation() {
    let mut rng = rng_for(72, "oracle-check");
    for _ in 0..20 {
        let mut sample: Vec<f64> = (0..50).map(|_| sample_std_normal(&mut rng)).collect();
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &l in &[0.5, 0.9, 0.99] {
            let lv = level(l);
            let direct: Vec<f64> = sample
                .iter()
                .map(|&q| sample.iter().map(|&s| pinball_loss(q, s, lv)).sum::<f64>())
                .collect();
            let direct_best = direct
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let fast_best = brute_force_best_rank(&sample, lv);
            assert!(
                (direct[fast_best] - direct[direct_best]).abs() < 1e-9,
                "prefix-sum oracle disagrees with direct summation"
            );
        }
    }
}

/// The rank-rule constant quantile agrees with brute-force pinball
/// minimization within one adjacent order statistic.
#[test]
fn constant_quantile_elicits_pinball_minimizer() {
    let mut rng = rng_for(73, "elicitation");
    for trial in 0..50 {
        // Mixed distributions: normal, lognormal-ish, uniform.
        let n = 1000;
        let mut sample: Vec<f64> = (0..n)
            .map(|i| match (trial + i) % 3 {
                0 => sample_std_normal(&mut rng),
                1 => libm::exp(0.5 * sample_std_normal(&mut rng)),
                _ => 4.0 * uniform_open01(&mut rng) - 2.0,
            })
            .collect();
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &l in &[0.5, 0.9, 0.99] {
            let lv = level(l);
            let fitted = qrmia_core::fit_constant_quantile(&sample, lv).unwrap();
            let fit_rank = sample
                .iter()
                .position(|&s| s == fitted)
                .expect("fitted value is a sample point");
            let brute_rank = brute_force_best_rank(&sample, lv);
            assert!(
                fit_rank.abs_diff(brute_rank) <= 1,
                "trial {trial} level {l}: rank {fit_rank} vs brute {brute_rank}"
            );
        }
    }
}
