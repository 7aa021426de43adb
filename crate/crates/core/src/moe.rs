//! Linear routers, linear experts, tempered gate weights, and the margin
//! quantities that control how far a soft gate is from its hard limit.
//!
//! The gate weights at temperature `tau` are
//!
//! ```text
//!     p_k(x) = exp(a_k(x) / tau) / sum_j exp(a_j(x) / tau)
//! ```
//!
//! for router logits `a(x)`. As `tau` shrinks the weights concentrate on
//! the top logit at a rate governed by the top-two margin
//! `delta = a_(1) - a_(2)`: the entire off-winner mass is bounded by
//! `(K - 1) exp(-delta / tau)`. That inequality is the quantitative bridge
//! between soft routing and hard top-1 routing and everything downstream
//! (boundary mass, risk gaps) leans on it.

use alloc::vec::Vec;

use crate::linalg::{dot, Mat};
use crate::math::exp;
use crate::{Error, Result};

fn validate_logits(logits: &[f64]) -> Result<()> {
    if logits.len() < 2 {
        return Err(Error::invalid("need at least two logits"));
    }
    if logits.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("logits must be finite"));
    }
    Ok(())
}

fn validate_temperature(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("temperature must be finite and positive"));
    }
    Ok(())
}

/// Softmax gate weights at temperature `tau`.
///
/// The largest logit is subtracted before exponentiation, so the result is
/// overflow-free for any finite logits and any positive `tau`, including
/// temperatures small enough that every off-winner weight underflows to
/// zero. The weights are non-negative and sum to one up to rounding.
///
/// # Arguments
///
/// * `logits` - router scores `a_1 .. a_K`, `K >= 2`, all finite.
/// * `tau` - gate temperature, finite and strictly positive. The hard rule
///   is deliberately *not* reachable here; use [`hard_winner`] for it.
///
/// # Errors
///
/// `InvalidArgument` on fewer than two logits, non-finite logits, or a
/// temperature that is not finite and positive.
pub fn softmax_weights(logits: &[f64], tau: f64) -> Result<Vec<f64>> {
    validate_logits(logits)?;
    validate_temperature(tau)?;
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|&a| exp((a - m) / tau)).collect();
    let z: f64 = w.iter().sum();
    for v in &mut w {
        *v /= z;
    }
    Ok(w)
}

/// Top-two margin `a_(1) - a_(2)`: the gap between the largest and the
/// second-largest logit. Zero exactly when the top is tied.
pub fn top_two_margin(logits: &[f64]) -> Result<f64> {
    validate_logits(logits)?;
    let mut best = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &a in logits {
        if a > best {
            second = best;
            best = a;
        } else if a > second {
            second = a;
        }
    }
    Ok(best - second)
}

/// Smallest pairwise logit gap `min_{k != l} |a_k - a_l|`.
///
/// After sorting, the minimum over all pairs is attained by an adjacent
/// pair, so this runs in `O(K log K)` rather than `O(K^2)`. Always at most
/// [`top_two_margin`].
pub fn pairwise_min_margin(logits: &[f64]) -> Result<f64> {
    validate_logits(logits)?;
    let mut sorted: Vec<f64> = logits.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut min_gap = f64::INFINITY;
    for w in sorted.windows(2) {
        min_gap = min_gap.min(w[1] - w[0]);
    }
    Ok(min_gap)
}

/// Index of the winning expert under the hard top-1 rule.
///
/// Ties are resolved to the smallest index, and only bit-equal logits count
/// as tied; there is no epsilon window. This makes the hard rule a total,
/// deterministic function of the logits, which the paired soft/hard risk
/// estimates rely on.
pub fn hard_winner(logits: &[f64]) -> Result<usize> {
    validate_logits(logits)?;
    let mut best = 0;
    for (k, &a) in logits.iter().enumerate().skip(1) {
        if a > logits[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Off-winner gate mass together with its exponential bound.
///
/// Returns `(1 - p_winner, (K - 1) exp(-delta / tau))` where `delta` is the
/// top-two margin. The first component never exceeds the second; the pair
/// is returned so callers can report how tight the bound is.
pub fn offwinner_mass_and_bound(logits: &[f64], tau: f64) -> Result<(f64, f64)> {
    let w = softmax_weights(logits, tau)?;
    let k = hard_winner(logits)?;
    let delta = top_two_margin(logits)?;
    let actual = 1.0 - w[k];
    let bound = (logits.len() - 1) as f64 * exp(-delta / tau);
    Ok((actual, bound))
}

/// Linear router: logits `a(x) = W x + b` with one row per expert.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRouter {
    weight: Mat,
    bias: Vec<f64>,
}

impl LinearRouter {
    /// Builds a router from a `K x d` weight matrix and a length-`K` bias.
    pub fn new(weight: Mat, bias: Vec<f64>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::invalid("router weight rows and bias length differ"));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("router bias must be finite"));
        }
        Ok(LinearRouter { weight, bias })
    }

    /// Number of experts routed to.
    pub fn num_experts(&self) -> usize {
        self.bias.len()
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.weight.cols()
    }

    /// Router logits at `x`.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut a = self.weight.matvec(x);
        for (v, b) in a.iter_mut().zip(&self.bias) {
            *v += b;
        }
        a
    }

    /// Weight row for expert `k`.
    pub fn weight_row(&self, k: usize) -> &[f64] {
        self.weight.row(k)
    }

    /// Bias for expert `k`.
    pub fn bias(&self, k: usize) -> f64 {
        self.bias[k]
    }

    /// Same router with `delta` added to the bias of expert `k`. Used by
    /// the interface shape-derivative check, which nudges one bias.
    pub fn with_bias_shift(&self, k: usize, delta: f64) -> Self {
        let mut shifted = self.clone();
        shifted.bias[k] += delta;
        shifted
    }
}

/// A bank of scalar linear experts `f_k(x) = w_k . x + c_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearExpertSet {
    weight: Mat,
    bias: Vec<f64>,
}

impl LinearExpertSet {
    /// Builds the expert bank from a `K x d` weight matrix and a
    /// length-`K` bias vector.
    pub fn new(weight: Mat, bias: Vec<f64>) -> Result<Self> {
        if weight.rows() != bias.len() {
            return Err(Error::invalid("expert weight rows and bias length differ"));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid("expert bias must be finite"));
        }
        Ok(LinearExpertSet { weight, bias })
    }

    /// Number of experts.
    pub fn len(&self) -> usize {
        self.bias.len()
    }

    /// True when the bank is empty.
    pub fn is_empty(&self) -> bool {
        self.bias.is_empty()
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.weight.cols()
    }

    /// All expert outputs at `x`.
    pub fn predictions(&self, x: &[f64]) -> Vec<f64> {
        let mut f = self.weight.matvec(x);
        for (v, b) in f.iter_mut().zip(&self.bias) {
            *v += b;
        }
        f
    }

    /// Output of expert `k` alone.
    pub fn predict_one(&self, k: usize, x: &[f64]) -> f64 {
        dot(self.weight.row(k), x) + self.bias[k]
    }
}

/// A routed model: linear router, linear experts, and a gate temperature.
///
/// `temperature > 0` gates softly; `temperature == 0` is the hard top-1
/// sentinel and is dispatched as its own code path, not as a limit of the
/// soft one.
#[derive(Debug, Clone, PartialEq)]
pub struct MoeModel {
    router: LinearRouter,
    experts: LinearExpertSet,
    temperature: f64,
}

impl MoeModel {
    /// Assembles a model, checking that router and experts agree on the
    /// number of experts (`K >= 2`) and the input dimension, and that the
    /// temperature is finite and non-negative.
    pub fn new(router: LinearRouter, experts: LinearExpertSet, temperature: f64) -> Result<Self> {
        if router.num_experts() != experts.len() {
            return Err(Error::invalid("router and expert bank sizes differ"));
        }
        if router.num_experts() < 2 {
            return Err(Error::invalid("need at least two experts"));
        }
        if router.dim() != experts.dim() {
            return Err(Error::invalid(
                "router and expert input dimensions differ",
            ));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::invalid(
                "temperature must be finite and non-negative",
            ));
        }
        Ok(MoeModel {
            router,
            experts,
            temperature,
        })
    }

    /// The router.
    pub fn router(&self) -> &LinearRouter {
        &self.router
    }

    /// The expert bank.
    pub fn experts(&self) -> &LinearExpertSet {
        &self.experts
    }

    /// Gate temperature (0 means hard routing).
    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Number of experts.
    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.experts.dim()
    }

    /// Same model at a different temperature.
    pub fn with_temperature(&self, tau: f64) -> Result<Self> {
        MoeModel::new(self.router.clone(), self.experts.clone(), tau)
    }

    /// Prediction at the model's own temperature: soft when positive, hard
    /// top-1 when the temperature is the zero sentinel.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if self.temperature == 0.0 {
            Ok(self.hard_predict(x)?.0)
        } else {
            self.soft_predict(x)
        }
    }

    /// Softly gated prediction `sum_k p_k(x) f_k(x)` at the model's
    /// temperature. Errors when the temperature is the hard sentinel.
    pub fn soft_predict(&self, x: &[f64]) -> Result<f64> {
        let logits = self.router.logits(x);
        let w = softmax_weights(&logits, self.temperature)?;
        let f = self.experts.predictions(x);
        Ok(dot(&w, &f))
    }

    /// Hard top-1 prediction and the winning expert index.
    pub fn hard_predict(&self, x: &[f64]) -> Result<(f64, usize)> {
        let logits = self.router.logits(x);
        let k = hard_winner(&logits)?;
        Ok((self.experts.predict_one(k, x), k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // Independent oracle: sort descending, read off the top-two gap.
    fn margin_by_sort(logits: &[f64]) -> f64 {
        let mut s = logits.to_vec();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s[0] - s[1]
    }

    // Independent oracle: brute-force minimum over all pairs.
    fn min_margin_by_pairs(logits: &[f64]) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..logits.len() {
            for j in (i + 1)..logits.len() {
                min = min.min((logits[i] - logits[j]).abs());
            }
        }
        min
    }

    fn random_logits(rng: &mut ChaCha8Rng) -> Vec<f64> {
        let k = rng.random_range(2..=8);
        (0..k).map(|_| rng.random_range(-5.0..5.0)).collect()
    }

    #[test]
    fn softmax_two_case_frozen_values() {
        // sigma(2) and 1 - sigma(2), to fifteen digits.
        let w = softmax_weights(&[1.0, 0.0], 0.5).unwrap();
        assert!((w[0] - 0.880797077977882444).abs() < 1e-15);
        assert!((w[1] - 0.119202922022117556).abs() < 1e-15);
    }

    #[test]
    fn softmax_normalises_and_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let z = random_logits(&mut rng);
            let tau = rng.random_range(0.01..2.0);
            let w = softmax_weights(&z, tau).unwrap();
            let sum: f64 = w.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn softmax_gauge_invariance() {
        let z = [3.0, -1.0, 0.5, 2.9];
        let base = softmax_weights(&z, 0.3).unwrap();
        for shift in [-1e4, -7.3, 0.1, 123.456] {
            let shifted: Vec<f64> = z.iter().map(|a| a + shift).collect();
            let w = softmax_weights(&shifted, 0.3).unwrap();
            for (a, b) in w.iter().zip(&base) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_survives_extreme_temperatures_and_logits() {
        // Underflow path: off-winner weight flushes to exactly zero.
        let w = softmax_weights(&[1.0, 0.0], 1e-300).unwrap();
        assert_eq!(w, vec![1.0, 0.0]);
        // Bit-equal tied leaders split the mass evenly.
        let w = softmax_weights(&[2.0, 2.0, 0.0], 1e-300).unwrap();
        assert_eq!(w, vec![0.5, 0.5, 0.0]);
        // Huge logits must not overflow thanks to max subtraction.
        let w = softmax_weights(&[709.0, 710.0], 1.0).unwrap();
        assert!(w.iter().all(|p| p.is_finite()));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(softmax_weights(&[1.0], 0.5).is_err());
        assert!(softmax_weights(&[1.0, f64::NAN], 0.5).is_err());
        assert!(softmax_weights(&[1.0, 0.0], 0.0).is_err());
        assert!(softmax_weights(&[1.0, 0.0], -0.1).is_err());
        assert!(softmax_weights(&[1.0, 0.0], f64::INFINITY).is_err());
    }

    #[test]
    fn margins_match_their_oracles() {
        assert_eq!(top_two_margin(&[3.0, 1.0, 0.5]).unwrap(), 2.0);
        assert_eq!(pairwise_min_margin(&[3.0, 1.0, 0.5]).unwrap(), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let z = random_logits(&mut rng);
            let top = top_two_margin(&z).unwrap();
            let min = pairwise_min_margin(&z).unwrap();
            assert_eq!(top, margin_by_sort(&z));
            assert_eq!(min, min_margin_by_pairs(&z));
            assert!(min <= top);
        }
    }

    #[test]
    fn margins_handle_exact_ties() {
        assert_eq!(top_two_margin(&[1.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(pairwise_min_margin(&[1.0, 0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn hard_winner_breaks_ties_to_smallest_index() {
        assert_eq!(hard_winner(&[1.0, 1.0, 0.0]).unwrap(), 0);
        assert_eq!(hard_winner(&[0.5, 0.7, 0.7]).unwrap(), 1);
        assert_eq!(hard_winner(&[-1.0, -0.5, -2.0]).unwrap(), 1);
    }

    #[test]
    fn offwinner_mass_frozen_values_and_bound() {
        // The off-winner mass is computed as 1 - p_winner, so its absolute
        // accuracy is limited by an ulp of 1, not by its own magnitude.
        let (actual, bound) = offwinner_mass_and_bound(&[1.0, 0.0], 0.1).unwrap();
        assert!((actual - 4.53978687024344e-5).abs() < 1e-15);
        assert!((bound - 4.53999297624849e-5).abs() < 1e-15);
        assert!(actual <= bound);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..2000 {
            let z = random_logits(&mut rng);
            let tau = rng.random_range(0.01..1.0);
            let (actual, bound) = offwinner_mass_and_bound(&z, tau).unwrap();
            assert!(actual <= bound + 1e-15);
        }
    }

    fn toy_model(tau: f64) -> MoeModel {
        let router = LinearRouter::new(
            Mat::from_rows(2, 1, vec![1.0, 0.0]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let experts = LinearExpertSet::new(
            Mat::from_rows(2, 1, vec![0.0, 0.0]).unwrap(),
            vec![2.0, -1.0],
        )
        .unwrap();
        MoeModel::new(router, experts, tau).unwrap()
    }

    #[test]
    fn soft_and_hard_predict_hand_example() {
        // Logits (1, 0) at x = 1 and tau = 0.5 give the frozen two-case
        // weights; experts output the constants 2 and -1.
        let model = toy_model(0.5);
        let soft = model.soft_predict(&[1.0]).unwrap();
        assert!((soft - 1.642391233933647).abs() < 1e-15);
        let (hard, winner) = model.hard_predict(&[1.0]).unwrap();
        assert_eq!(hard, 2.0);
        assert_eq!(winner, 0);
    }

    #[test]
    fn predict_dispatches_on_the_zero_sentinel() {
        let hard_model = toy_model(0.0);
        assert_eq!(hard_model.predict(&[1.0]).unwrap(), 2.0);
        assert!(hard_model.soft_predict(&[1.0]).is_err());
        let soft_model = toy_model(0.5);
        assert!((soft_model.predict(&[1.0]).unwrap() - 1.642391233933647).abs() < 1e-15);
    }

    #[test]
    fn soft_predict_is_permutation_symmetric() {
        let router = LinearRouter::new(
            Mat::from_rows(3, 2, vec![1.0, 0.5, -0.3, 0.2, 0.0, 1.1]).unwrap(),
            vec![0.1, -0.2, 0.0],
        )
        .unwrap();
        let experts = LinearExpertSet::new(
            Mat::from_rows(3, 2, vec![0.4, -1.0, 0.7, 0.2, -0.5, 0.9]).unwrap(),
            vec![1.0, 0.0, -0.7],
        )
        .unwrap();
        let model = MoeModel::new(router, experts, 0.3).unwrap();

        // Swap experts 0 and 2 in both router and bank.
        let router_p = LinearRouter::new(
            Mat::from_rows(3, 2, vec![0.0, 1.1, -0.3, 0.2, 1.0, 0.5]).unwrap(),
            vec![0.0, -0.2, 0.1],
        )
        .unwrap();
        let experts_p = LinearExpertSet::new(
            Mat::from_rows(3, 2, vec![-0.5, 0.9, 0.7, 0.2, 0.4, -1.0]).unwrap(),
            vec![-0.7, 0.0, 1.0],
        )
        .unwrap();
        let model_p = MoeModel::new(router_p, experts_p, 0.3).unwrap();

        for x in [[0.3, -0.8], [1.5, 0.2], [-0.1, -0.1]] {
            let a = model.soft_predict(&x).unwrap();
            let b = model_p.soft_predict(&x).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn model_construction_rejects_mismatches() {
        let router = LinearRouter::new(
            Mat::from_rows(2, 1, vec![1.0, 0.0]).unwrap(),
            vec![0.0, 0.0],
        )
        .unwrap();
        let experts3 = LinearExpertSet::new(
            Mat::from_rows(3, 1, vec![0.0; 3]).unwrap(),
            vec![0.0; 3],
        )
        .unwrap();
        assert!(MoeModel::new(router.clone(), experts3, 0.5).is_err());

        let experts_wrong_dim = LinearExpertSet::new(
            Mat::from_rows(2, 2, vec![0.0; 4]).unwrap(),
            vec![0.0; 2],
        )
        .unwrap();
        assert!(MoeModel::new(router.clone(), experts_wrong_dim, 0.5).is_err());

        let experts = LinearExpertSet::new(
            Mat::from_rows(2, 1, vec![0.0; 2]).unwrap(),
            vec![0.0; 2],
        )
        .unwrap();
        assert!(MoeModel::new(router.clone(), experts.clone(), -1.0).is_err());
        assert!(MoeModel::new(router, experts, f64::NAN).is_err());
    }
}
