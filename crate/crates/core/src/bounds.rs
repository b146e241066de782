//! Closed-form quantities and probability bounds.
//!
//! Every function here is a direct formula evaluation. Natural logarithms
//! are used throughout. Failure-probability bounds of 1 or more carry a
//! `vacuous` flag instead of being clamped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{check_delta_typ, ParamError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("epsilon {eps} must be below {limit}")]
    EpsilonTooLarge { eps: f64, limit: f64 },
    #[error("confirmation time diverges: 1 - g is {0}")]
    Diverges(f64),
}

/// Quantities derived from `(alpha, delta_net, delta_typ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub alpha: f64,
    pub delta_net: f64,
    pub delta_typ: f64,
    /// Propagation discount `e^{-alpha delta_net}`.
    pub g: f64,
    /// Exponent rate `delta^2 g^2 alpha`.
    pub eta: f64,
    /// Prefactor of the typical-event bound.
    pub mu: f64,
    /// `1 - 41 delta / 40`.
    pub growth_coeff: f64,
}

/// Evaluates `g`, `eta`, `mu` and the growth coefficient.
///
/// ```
/// let d = backbone::bounds::derive(1.0, 0.0, 0.2).unwrap();
/// assert_eq!(d.g, 1.0);
/// assert!((d.eta - 0.04).abs() < 1e-15);
/// ```
pub fn derive(alpha: f64, delta_net: f64, delta_typ: f64) -> Result<DerivedParams, BoundsError> {
    check_delta_typ(delta_typ)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ParamError::Alpha(alpha).into());
    }
    if !(delta_net >= 0.0 && delta_net.is_finite()) {
        return Err(ParamError::DeltaNet(delta_net).into());
    }
    let g = (-alpha * delta_net).exp();
    let eta = delta_typ * delta_typ * g * g * alpha;
    Ok(DerivedParams { alpha, delta_net, delta_typ, g, eta, mu: mu(eta), growth_coeff: 1.0 - 41.0 * delta_typ / 40.0 })
}

/// `mu = 9 e^{2 eta / 27} / (1 - e^{-eta / 27})^2`.
pub fn mu(eta: f64) -> f64 {
    let x = eta / 27.0;
    9.0 * (2.0 * x).exp() / (-(-x).exp_m1()).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub ok: bool,
    /// `(1 - 81 delta / 40) g^2 alpha`, which must exceed beta.
    pub lhs: f64,
}

pub fn admissible(alpha: f64, beta: f64, delta_net: f64, delta_typ: f64) -> Result<Admissibility, BoundsError> {
    let d = derive(alpha, delta_net, delta_typ)?;
    let lhs = (1.0 - 81.0 * delta_typ / 40.0) * d.g * d.g * alpha;
    Ok(Admissibility { ok: lhs > beta, lhs })
}

/// A failure-probability bound and whether it says nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub vacuous: bool,
}

impl Bound {
    pub fn new(value: f64) -> Self {
        Self { value, vacuous: !(value < 1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventBounds {
    /// Bound on the probability that the good event fails.
    pub good: Bound,
    /// Bound on the probability that the typical event fails.
    pub typical: Bound,
}

pub fn event_bounds(derived: &DerivedParams, s: f64, t: f64) -> EventBounds {
    let len = t - s;
    EventBounds {
        good: Bound::new(9.0 * (-derived.eta * len / 24.0).exp()),
        typical: Bound::new(derived.mu * (-derived.eta * len / 27.0).exp()),
    }
}

/// Bound on the probability that a `k`-deep prefix is not permanent.
pub fn depth_bound(derived: &DerivedParams, alpha: f64, k: f64, delta_net: f64) -> f64 {
    derived.mu * (-(derived.eta / 27.0) * (k / (2.0 * alpha) - 2.0 * delta_net)).exp()
}

/// Largest admissible epsilon for a Prism confirmation with `factor`
/// chains in the union bound.
fn eps_limit(derived: &DerivedParams, factor: f64) -> f64 {
    let d = derived;
    factor * d.mu * (-3.0 * (1.0 + d.delta_net) * d.delta_typ * d.g * d.g * d.alpha).exp()
}

/// Time after which the leader sequence up to height `h` is permanent with
/// probability at least `1 - eps`, given the first publication time `r_h`.
pub fn prism_leader_time(
    r_h: f64,
    eps: f64,
    m: usize,
    derived: &DerivedParams,
    alpha: f64,
    delta_net: f64,
) -> Result<f64, BoundsError> {
    let limit = eps_limit(derived, m as f64);
    if !(eps > 0.0 && eps < limit) {
        return Err(BoundsError::EpsilonTooLarge { eps, limit });
    }
    let d = derived;
    let one_minus_g = -(-alpha * delta_net).exp_m1();
    if !(one_minus_g > 0.0) {
        return Err(BoundsError::Diverges(one_minus_g));
    }
    let scale = 1.0 / (d.growth_coeff * one_minus_g * d.g * alpha);
    let depth = (54.0 * alpha / d.eta) * (m as f64 * d.mu / eps).ln() + 4.0 * alpha * delta_net + 1.0;
    Ok(r_h + scale * depth + delta_net)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TxConfirmation {
    pub k: u64,
    pub t: f64,
}

/// Depth and time after which a transaction credible at `r` is permanent
/// with probability at least `1 - eps`.
pub fn prism_tx_time(
    r: f64,
    eps: f64,
    m: usize,
    derived: &DerivedParams,
    alpha: f64,
    delta_net: f64,
) -> Result<TxConfirmation, BoundsError> {
    let limit = eps_limit(derived, (m + 1) as f64);
    if !(eps > 0.0 && eps < limit) {
        return Err(BoundsError::EpsilonTooLarge { eps, limit });
    }
    let d = derived;
    let one_minus_g = -(-alpha * delta_net).exp_m1();
    if !(one_minus_g > 0.0) {
        return Err(BoundsError::Diverges(one_minus_g));
    }
    let k = ((54.0 * alpha / d.eta) * ((m + 1) as f64 * d.mu / eps).ln() + 4.0 * alpha * delta_net).ceil() as u64;
    Ok(TxConfirmation { k, t: prism_tx_time_for_depth(r, k, derived, alpha, delta_net) })
}

/// The time formula of [`prism_tx_time`] at an explicit depth `k`.
pub fn prism_tx_time_for_depth(r: f64, k: u64, derived: &DerivedParams, alpha: f64, delta_net: f64) -> f64 {
    let d = derived;
    let one_minus_g = -(-alpha * delta_net).exp_m1();
    let denom = d.growth_coeff.powi(2) * one_minus_g.powi(2) * d.g * d.g * alpha;
    r + 2.0 * (k as f64 + 1.0) / denom + delta_net
}

/// Minimum interval length for the event lemmas, `80 (1 + delta_net) / delta`.
pub fn min_interval(delta_net: f64, delta_typ: f64) -> f64 {
    80.0 * (1.0 + delta_net) / delta_typ
}

/// Minimum depth for the depth-k theorems, `160 alpha (1 + delta_net) / delta`.
pub fn min_depth(alpha: f64, delta_net: f64, delta_typ: f64) -> f64 {
    160.0 * alpha * (1.0 + delta_net) / delta_typ
}

/// Reference prefactor for `eta = 0.65`, carried so reports can compare it
/// with the formula.
pub const QUOTED_MU: f64 = 201.8;

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> DerivedParams {
        derive(6.0, 1.0 / 1800.0, 0.3285).unwrap()
    }

    #[test]
    fn zero_delay_limit() {
        let d = derive(2.0, 0.0, 0.3).unwrap();
        assert_eq!(d.g, 1.0);
        assert!((d.eta - 0.18).abs() < 1e-15);
    }

    #[test]
    fn worked_example_values() {
        let d = example();
        assert!(((d.g - (-1.0f64 / 300.0).exp()) / d.g).abs() < 1e-12);
        assert!((d.eta - 0.643_171_37).abs() < 1e-7);
        assert!((d.mu - 17_034.61).abs() < 0.05);
        let a = admissible(6.0, 2.0, 1.0 / 1800.0, 0.3285).unwrap();
        assert!((a.lhs - 1.995_378_04).abs() < 1e-7);
        assert!(!a.ok);
    }

    #[test]
    fn mu_hand_value() {
        let m = mu(27.0 * 2f64.ln());
        assert!((m - 144.0).abs() / 144.0 < 1e-9, "{m}");
    }

    #[test]
    fn invalid_delta_is_rejected() {
        for bad in [0.0, 40.0 / 81.0, 0.6, -0.1] {
            assert!(matches!(derive(1.0, 0.1, bad), Err(BoundsError::Param(ParamError::InvalidDelta(_)))));
            assert!(admissible(1.0, 0.0, 0.1, bad).is_err());
        }
    }

    #[test]
    fn admissibility_edges() {
        assert!(admissible(1.0, 0.0, 0.3, 0.2).unwrap().ok);
        let near = admissible(1.0, 1e-3, 0.0, 40.0 / 81.0 - 1e-9).unwrap();
        assert!(near.lhs < 1e-6 && !near.ok);
    }

    #[test]
    fn event_bounds_shape() {
        let d = DerivedParams { eta: 0.65, ..example() };
        let b = event_bounds(&d, 0.0, 100.0);
        assert!((b.good.value - 9.0 * (-65.0f64 / 24.0).exp()).abs() < 1e-15);
        let tiny = event_bounds(&d, 0.0, 1e-12);
        assert!(tiny.good.vacuous && (tiny.good.value - 9.0).abs() < 1e-9);
        let grid: Vec<f64> = (1..50).map(|i| event_bounds(&d, 0.0, i as f64 * 10.0).good.value).collect();
        assert!(grid.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn depth_bound_quoted_and_recomputed() {
        let quoted = DerivedParams { eta: 0.65, mu: QUOTED_MU, ..example() };
        assert!(depth_bound(&quoted, 6.0, 26_000.0, 1.0 / 1800.0) < 1e-20);
        let d = example();
        let alt = depth_bound(&d, 6.0, 26_000.0, 1.0 / 1800.0);
        assert!(alt > 1e-20 && alt < 1e-17);
        let at_zero = depth_bound(&d, 6.0, 4.0 * 6.0 / 1800.0, 1.0 / 1800.0);
        assert!((at_zero - d.mu).abs() / d.mu < 1e-12);
    }

    #[test]
    fn depth_bound_doubling_identity() {
        let d = example();
        for k in [100.0, 1000.0, 5000.0] {
            let ratio = depth_bound(&d, 6.0, 2.0 * k, 1.0 / 1800.0) / depth_bound(&d, 6.0, k, 1.0 / 1800.0);
            let expected = (-(d.eta / 27.0) * (k / 12.0)).exp();
            assert!((ratio - expected).abs() / expected < 1e-9);
        }
    }

    #[test]
    fn leader_time_halving_epsilon_increment() {
        let d = example();
        let (dn, m) = (1.0 / 1800.0, 100);
        let t1 = prism_leader_time(0.0, 1e-9, m, &d, 6.0, dn).unwrap();
        let t2 = prism_leader_time(0.0, 0.5e-9, m, &d, 6.0, dn).unwrap();
        let one_minus_g = -(-6.0 * dn).exp_m1();
        let expected = (54.0 * 6.0 / d.eta) * 2f64.ln() / (d.growth_coeff * one_minus_g * d.g * 6.0);
        assert!(t1.is_finite());
        assert!(((t2 - t1) - expected).abs() / expected < 1e-9);
    }

    #[test]
    fn leader_time_epsilon_boundary_is_strict() {
        let d = example();
        let limit = eps_limit(&d, 3.0);
        assert!(matches!(
            prism_leader_time(0.0, limit, 3, &d, 6.0, 1.0 / 1800.0),
            Err(BoundsError::EpsilonTooLarge { .. })
        ));
        assert!(prism_tx_time(0.0, eps_limit(&d, 4.0), 3, &d, 6.0, 1.0 / 1800.0).is_err());
    }

    #[test]
    fn leader_time_diverges_without_delay() {
        let d = derive(6.0, 0.0, 0.3285).unwrap();
        assert!(matches!(prism_leader_time(0.0, 1e-9, 10, &d, 6.0, 0.0), Err(BoundsError::Diverges(_))));
    }

    #[test]
    fn tx_depth_dominates_leader_depth_and_meets_epsilon() {
        let d = example();
        let (dn, m, eps) = (1.0 / 1800.0, 100, 1e-9);
        let tx = prism_tx_time(0.0, eps, m, &d, 6.0, dn).unwrap();
        let leader_depth = (54.0 * 6.0 / d.eta) * (m as f64 * d.mu / eps).ln() + 4.0 * 6.0 * dn;
        assert!(tx.k as f64 > leader_depth);
        let union = (m + 1) as f64 * d.mu * (-(d.eta / 27.0) * (tx.k as f64 / 12.0 - 2.0 * dn)).exp();
        assert!(union <= eps * (1.0 + 1e-9), "{union}");
    }

    #[test]
    fn tx_time_is_linear_in_depth() {
        let d = example();
        let dn = 1.0 / 1800.0;
        let ts: Vec<f64> = (1..6).map(|k| prism_tx_time_for_depth(3.0, k * 100, &d, 6.0, dn)).collect();
        let slope = (ts[1] - ts[0]) / 100.0;
        for w in ts.windows(2) {
            assert!(((w[1] - w[0]) / 100.0 - slope).abs() / slope < 1e-9);
        }
    }
}
