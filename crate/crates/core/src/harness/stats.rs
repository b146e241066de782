//! Exact binomial confidence limits.

use statrs::function::beta::beta_reg;

/// Inverts the regularised incomplete beta function `I_x(a, b) = p` by
/// bisection.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper-Pearson limits for `successes` out of `trials` at the
/// given confidence: `(lower, upper)`, each valid on its own.
///
/// ```
/// use backbone::harness::clopper_pearson;
///
/// let (lo, hi) = clopper_pearson(0, 100, 0.99);
/// assert_eq!(lo, 0.0);
/// assert!((hi - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-9);
/// ```
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let (x, n) = (successes as f64, trials as f64);
    let alpha = 1.0 - confidence;
    let lower = if successes == 0 { 0.0 } else { beta_quantile(alpha, x, n - x + 1.0) };
    let upper = if successes == trials { 1.0 } else { beta_quantile(1.0 - alpha, x + 1.0, n - x) };
    (lower, upper)
}

/// Two-sided 95% Clopper-Pearson interval.
pub fn clopper_pearson_95(successes: u64, trials: u64) -> (f64, f64) {
    clopper_pearson(successes, trials, 0.975)
}
