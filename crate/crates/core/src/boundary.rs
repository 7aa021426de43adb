//! Boundary-mass profiles: how much probability sits where the router's
//! decision is nearly tied.
//!
//! Three profiles of the same phenomenon, ordered by inclusion:
//!
//! ```text
//!     {delta <= kappa_eps * tau}            (top-two margin slab)
//!       subset of  {max_k p_k <= 1 - eps}   (ambiguous gate)
//!       subset of  {delta <= kappa_eps_K * tau}
//!       subset of  {delta_min <= kappa_eps_K * tau}
//! ```
//!
//! with the width constants `kappa_eps = log((1-eps)/eps)` and
//! `kappa_eps_K = log((K-1)(1-eps)/eps)`. The inclusions hold sample by
//! sample, not just in expectation, and the verification suite checks them
//! at the indicator level.
//!
//! For a linear score `S(x) = nu . x + b` under a Gaussian law the slab
//! probability `P(|S| <= r)` has the exact normal-CDF form implemented by
//! [`analytic_slab_prob`], and for small widths it grows linearly with
//! slope [`coarea_coeff_gaussian`].

use alloc::vec::Vec;

use crate::math::{ln, normal_cdf, normal_pdf, sqrt};
use crate::moe::{self, MoeModel};
use crate::sampling::{gaussian_sample, mc_proportion, GaussianLaw, McEstimate, SampleBatch};
use crate::stats::ols_line;
use crate::{Error, Result};

/// Which near-tie profile an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    /// `P(top-two margin <= w)`.
    TopMargin,
    /// `P(min pairwise margin <= w)`.
    PairwiseMargin,
    /// `P(max_k p_k <= 1 - eps)` at the model's temperature.
    AmbiguousGate,
}

/// A boundary-mass estimate together with the width (or tolerance) it was
/// measured at.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryMassEstimate {
    /// Profile being estimated.
    pub kind: ProfileKind,
    /// Slab width `w` for the margin profiles, `eps` for the ambiguous
    /// gate.
    pub width: f64,
    /// The Monte Carlo estimate.
    pub estimate: McEstimate,
}

/// Width constant `kappa_eps = log((1 - eps) / eps)` of the ambiguous-gate
/// region inside the top-margin slab. Requires `0 < eps < 1/2`.
pub fn kappa_eps(eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid("eps must lie strictly between 0 and 1/2"));
    }
    Ok(ln((1.0 - eps) / eps))
}

/// Width constant `kappa_eps_K = log((K - 1)(1 - eps) / eps)` of the
/// top-margin slab containing the ambiguous-gate region. Requires
/// `0 < eps < 1/2` and `K >= 2`; reduces to [`kappa_eps`] at `K = 2`.
pub fn kappa_eps_k(eps: f64, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("need at least two experts"));
    }
    Ok(kappa_eps(eps)? + ln((k - 1) as f64))
}

fn check_model_law(model: &MoeModel, law: &GaussianLaw) -> Result<()> {
    if model.dim() != law.dim() {
        return Err(Error::invalid("model and law dimensions differ"));
    }
    Ok(())
}

fn check_width(w: f64) -> Result<()> {
    if !(w.is_finite() && w >= 0.0) {
        return Err(Error::invalid("slab width must be finite and non-negative"));
    }
    Ok(())
}

/// Top-two margin at every point of a batch.
pub fn top_margins(model: &MoeModel, batch: &SampleBatch) -> Result<Vec<f64>> {
    if model.dim() != batch.dim() {
        return Err(Error::invalid("model and batch dimensions differ"));
    }
    batch
        .iter()
        .map(|x| moe::top_two_margin(&model.router().logits(x)))
        .collect()
}

/// Minimum pairwise margin at every point of a batch.
pub fn pairwise_min_margins(model: &MoeModel, batch: &SampleBatch) -> Result<Vec<f64>> {
    if model.dim() != batch.dim() {
        return Err(Error::invalid("model and batch dimensions differ"));
    }
    batch
        .iter()
        .map(|x| moe::pairwise_min_margin(&model.router().logits(x)))
        .collect()
}

/// Largest gate weight `max_k p_k` at every point of a batch, at the
/// model's own (positive) temperature.
pub fn max_gate_weights(model: &MoeModel, batch: &SampleBatch) -> Result<Vec<f64>> {
    if model.dim() != batch.dim() {
        return Err(Error::invalid("model and batch dimensions differ"));
    }
    batch
        .iter()
        .map(|x| {
            let w = moe::softmax_weights(&model.router().logits(x), model.temperature())?;
            Ok(w.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect()
}

fn profile_estimate(
    kind: ProfileKind,
    width: f64,
    hits: usize,
    n: usize,
) -> Result<BoundaryMassEstimate> {
    Ok(BoundaryMassEstimate {
        kind,
        width,
        estimate: mc_proportion(hits, n)?,
    })
}

/// Monte Carlo estimate of the top-margin profile `P(delta <= w)` on a
/// fresh batch drawn from `law`.
pub fn estimate_bm_top(
    model: &MoeModel,
    law: &GaussianLaw,
    w: f64,
    n: usize,
    seed: u64,
) -> Result<BoundaryMassEstimate> {
    check_model_law(model, law)?;
    check_width(w)?;
    let batch = gaussian_sample(law, n, seed)?;
    let hits = top_margins(model, &batch)?.iter().filter(|&&d| d <= w).count();
    profile_estimate(ProfileKind::TopMargin, w, hits, n)
}

/// Monte Carlo estimate of the pairwise profile `P(delta_min <= w)`.
pub fn estimate_bm_pair(
    model: &MoeModel,
    law: &GaussianLaw,
    w: f64,
    n: usize,
    seed: u64,
) -> Result<BoundaryMassEstimate> {
    check_model_law(model, law)?;
    check_width(w)?;
    let batch = gaussian_sample(law, n, seed)?;
    let hits = pairwise_min_margins(model, &batch)?
        .iter()
        .filter(|&&d| d <= w)
        .count();
    profile_estimate(ProfileKind::PairwiseMargin, w, hits, n)
}

/// Monte Carlo estimate of the ambiguous-gate profile
/// `P(max_k p_k <= 1 - eps)` at the model's own temperature, which must be
/// positive: the hard gate is never ambiguous.
pub fn estimate_bm_amb(
    model: &MoeModel,
    law: &GaussianLaw,
    eps: f64,
    n: usize,
    seed: u64,
) -> Result<BoundaryMassEstimate> {
    check_model_law(model, law)?;
    if !(eps.is_finite() && eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid("eps must lie strictly between 0 and 1/2"));
    }
    if model.temperature() <= 0.0 {
        return Err(Error::invalid("ambiguous-gate mass needs a positive temperature"));
    }
    let batch = gaussian_sample(law, n, seed)?;
    let hits = max_gate_weights(model, &batch)?
        .iter()
        .filter(|&&p| p <= 1.0 - eps)
        .count();
    profile_estimate(ProfileKind::AmbiguousGate, eps, hits, n)
}

/// A linear score `S(x) = nu . x + b` viewed under a Gaussian law, with
/// its mean and standard deviation precomputed.
#[derive(Debug, Clone)]
pub struct LinearScore {
    nu: Vec<f64>,
    /// Mean of `S` under the law: `nu . mean + b`.
    mean: f64,
    /// Standard deviation of `S`: `sqrt(nu^T cov nu)`.
    sigma: f64,
}

impl LinearScore {
    /// Builds the score and checks it is non-degenerate under `law`
    /// (`nu` nonzero and `nu^T cov nu > 0`).
    pub fn new(nu: Vec<f64>, b: f64, law: &GaussianLaw) -> Result<Self> {
        if nu.len() != law.dim() {
            return Err(Error::invalid("score direction and law dimensions differ"));
        }
        if !b.is_finite() || nu.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("score parameters must be finite"));
        }
        if nu.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("score direction must be nonzero"));
        }
        let var = law.quad_form(&nu);
        if var <= 0.0 {
            return Err(Error::numerical("score has zero variance under the law"));
        }
        let mean = crate::linalg::dot(&nu, law.mean()) + b;
        Ok(LinearScore {
            nu,
            mean,
            sigma: sqrt(var),
        })
    }

    /// The direction `nu`.
    pub fn direction(&self) -> &[f64] {
        &self.nu
    }

    /// Mean of the score under the law.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard deviation of the score under the law.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Exact probability that the score lands in `[lo, hi]`.
    pub fn interval_prob(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("interval bounds must be finite and ordered"));
        }
        Ok(normal_cdf((hi - self.mean) / self.sigma) - normal_cdf((lo - self.mean) / self.sigma))
    }
}

/// Exact Gaussian slab probability `P(|S| <= r)` for a linear score:
/// `Phi((r - m)/sigma) - Phi((-r - m)/sigma)` with `m` and `sigma` the
/// score's mean and standard deviation under the law.
pub fn analytic_slab_prob(score: &LinearScore, r: f64) -> Result<f64> {
    check_width(r)?;
    score.interval_prob(-r, r)
}

/// Small-width growth coefficient of the ambiguous-gate mass for a binary
/// linear score under a Gaussian law:
///
/// ```text
///     P(gate eps-ambiguous at temperature tau) ~ C_eps * tau,
///     C_eps = 2 kappa_eps phi(m / sigma) / sigma,
/// ```
///
/// the coarea (surface-density) constant of the interface `{S = 0}`.
pub fn coarea_coeff_gaussian(score: &LinearScore, eps: f64) -> Result<f64> {
    let kappa = kappa_eps(eps)?;
    Ok(2.0 * kappa * normal_pdf(score.mean / score.sigma) / score.sigma)
}

/// Result of a log-log tail fit of the pairwise margin profile.
#[derive(Debug, Clone)]
pub struct TailFit {
    /// `(width, estimate)` pairs, in the caller's width order.
    pub points: Vec<(f64, McEstimate)>,
    /// Number of grid widths whose estimate was exactly zero; these carry
    /// no log-scale information and are left out of the fit.
    pub excluded_zero: usize,
    /// `(slope, intercept)` of the least-squares line through
    /// `(log w, log estimate)`, or `None` when fewer than two estimates
    /// were positive. A missing fit is a flag, not an answer.
    pub fit: Option<(f64, f64)>,
}

/// Estimates `P(delta_min <= w)` on one shared batch across a grid of
/// widths and fits the tail exponent `alpha` in `P ~ C w^alpha` by least
/// squares on log-log axes.
pub fn margin_tail_slope(
    model: &MoeModel,
    law: &GaussianLaw,
    widths: &[f64],
    n: usize,
    seed: u64,
) -> Result<TailFit> {
    check_model_law(model, law)?;
    if widths.len() < 2 {
        return Err(Error::invalid("need at least two widths for a tail fit"));
    }
    for &w in widths {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::invalid("tail widths must be finite and positive"));
        }
    }
    let batch = gaussian_sample(law, n, seed)?;
    let margins = pairwise_min_margins(model, &batch)?;
    let mut points = Vec::with_capacity(widths.len());
    for &w in widths {
        let hits = margins.iter().filter(|&&d| d <= w).count();
        points.push((w, mc_proportion(hits, n)?));
    }

    let mut log_w = Vec::new();
    let mut log_p = Vec::new();
    for &(w, est) in &points {
        if est.value > 0.0 {
            log_w.push(ln(w));
            log_p.push(ln(est.value));
        }
    }
    let excluded_zero = points.len() - log_w.len();
    let fit = if log_w.len() >= 2 {
        ols_line(&log_w, &log_p).ok()
    } else {
        None
    };
    Ok(TailFit {
        points,
        excluded_zero,
        fit,
    })
}
