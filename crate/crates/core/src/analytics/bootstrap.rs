use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::AnalyticsError;

pub const DEFAULT_BOOTSTRAP_ITERATIONS: usize = 10_000;

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_ci(values: &[f64], iterations: usize, level: f64, seed: u64) -> Result<(f64, f64), AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    if iterations == 0 {
        return Err(AnalyticsError::ZeroIterations);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(AnalyticsError::BadLevel);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..iterations)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&means, tail), quantile(&means, 1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_and_deterministic() {
        let (lo, hi) = bootstrap_ci(&[0.4; 12], 500, 0.95, 1).unwrap();
        assert!((lo - 0.4).abs() < 1e-12 && (hi - 0.4).abs() < 1e-12);
        let v = [0.0, 1.0, 1.0, 0.5, 0.2];
        assert_eq!(bootstrap_ci(&v, 300, 0.95, 7).unwrap(), bootstrap_ci(&v, 300, 0.95, 7).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(bootstrap_ci(&[], 10, 0.95, 0), Err(AnalyticsError::EmptyInput)));
        assert!(matches!(bootstrap_ci(&[1.0], 0, 0.95, 0), Err(AnalyticsError::ZeroIterations)));
        assert!(matches!(bootstrap_ci(&[1.0], 5, 1.0, 0), Err(AnalyticsError::BadLevel)));
    }

    #[test]
    fn coverage_on_bernoulli() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let covered = (0..100)
            .filter(|t| {
                let v: Vec<f64> = (0..200).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
                let (lo, hi) = bootstrap_ci(&v, 1000, 0.95, *t).unwrap();
                lo <= 0.3 && 0.3 <= hi
            })
            .count();
        assert!(covered >= 90, "covered {covered}");
    }
}
