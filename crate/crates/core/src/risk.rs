//! Paired soft/hard risk estimation and the bounds that tie the soft-hard
//! risk gap to boundary mass.
//!
//! All estimators here evaluate the soft and the hard predictor on the
//! *same* batch, point by point, so gaps are measured without independent
//! sampling noise and the chain of inequalities
//!
//! ```text
//!     |L_tau - L_0|  <=  4 B_f (B_Y + B_f) (K - 1) mean(exp(-delta/tau))
//! ```
//!
//! holds exactly on the empirical measure, with `B_f` and `B_Y` the batch
//! suprema of expert outputs and targets. The verification suite checks
//! the inequality on every configuration it touches; it is a theorem, not
//! a heuristic, so a violation is a bug by definition.

use alloc::vec::Vec;

use crate::boundary::LinearScore;
use crate::linalg::dot;
use crate::math::{exp, normal_pdf};
use crate::moe::{self, LinearExpertSet, LinearRouter, MoeModel};
use crate::sampling::{derive_seed, gaussian_sample, mc_mean, GaussianLaw, McEstimate, SampleBatch};
use crate::{Error, Result};

/// A hard-routed data generator: targets are `y(x) = f_{k*(x)}(x)` for the
/// teacher's own router and experts, with the deterministic min-index tie
/// rule. Noiseless by construction.
#[derive(Debug, Clone)]
pub struct Teacher {
    model: MoeModel,
}

impl Teacher {
    /// Builds the teacher; the temperature of the underlying model is
    /// pinned to the hard sentinel.
    pub fn new(router: LinearRouter, experts: LinearExpertSet) -> Result<Self> {
        Ok(Teacher {
            model: MoeModel::new(router, experts, 0.0)?,
        })
    }

    /// The underlying hard-routed model.
    pub fn model(&self) -> &MoeModel {
        &self.model
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Target response at `x`. `x` must have the teacher's dimension,
    /// which every estimator in this module checks before looping.
    pub fn respond(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        let (y, _) = self.model.hard_predict(x).expect("teacher was validated");
        y
    }
}

/// Soft and hard empirical risks measured on one shared batch.
#[derive(Debug, Clone, Copy)]
pub struct RiskEstimate {
    /// Gate temperature the soft risk was measured at.
    pub tau: f64,
    /// Empirical risk of the softly gated predictor.
    pub soft: McEstimate,
    /// Empirical risk of the hard top-1 predictor.
    pub hard: McEstimate,
    /// `|soft - hard|`, the paired risk gap.
    pub gap: f64,
}

fn check_student(student: &MoeModel, batch: &SampleBatch) -> Result<()> {
    if student.dim() != batch.dim() {
        return Err(Error::invalid("student and batch dimensions differ"));
    }
    if student.temperature() <= 0.0 {
        return Err(Error::invalid(
            "paired risk estimation needs a positive student temperature",
        ));
    }
    Ok(())
}

fn check_teacher(teacher: &Teacher, batch: &SampleBatch) -> Result<()> {
    if teacher.dim() != batch.dim() {
        return Err(Error::invalid("teacher and batch dimensions differ"));
    }
    Ok(())
}

/// Squared-error risks of the soft and hard predictors against the
/// teacher, paired on the given batch.
pub fn estimate_risks(
    student: &MoeModel,
    teacher: &Teacher,
    batch: &SampleBatch,
) -> Result<RiskEstimate> {
    check_student(student, batch)?;
    check_teacher(teacher, batch)?;
    let n = batch.len();
    let mut soft_losses = Vec::with_capacity(n);
    let mut hard_losses = Vec::with_capacity(n);
    for x in batch.iter() {
        let y = teacher.respond(x);
        let hs = student.soft_predict(x)?;
        let (hh, _) = student.hard_predict(x)?;
        soft_losses.push((y - hs) * (y - hs));
        hard_losses.push((y - hh) * (y - hh));
    }
    let soft = mc_mean(&soft_losses)?;
    let hard = mc_mean(&hard_losses)?;
    Ok(RiskEstimate {
        tau: student.temperature(),
        soft,
        hard,
        gap: (soft.value - hard.value).abs(),
    })
}

/// Batch supremum of `|f_k(x)|` over experts and points.
fn batch_expert_sup(student: &MoeModel, batch: &SampleBatch) -> f64 {
    let mut sup = 0.0f64;
    for x in batch.iter() {
        for f in student.experts().predictions(x) {
            sup = sup.max(f.abs());
        }
    }
    sup
}

/// Largest violation of the pointwise predictor gap bound
/// `|h_tau(x) - h_0(x)| <= 2 B_f (K - 1) exp(-delta(x)/tau)` over the
/// batch, with `B_f` taken as the batch supremum. Non-positive means the
/// bound held everywhere; the bound is provable for the batch supremum, so
/// a positive return indicates a broken implementation.
pub fn pointwise_gap_bound_check(student: &MoeModel, batch: &SampleBatch) -> Result<f64> {
    check_student(student, batch)?;
    let b_f = batch_expert_sup(student, batch);
    let k1 = (student.num_experts() - 1) as f64;
    let tau = student.temperature();
    let mut worst = f64::NEG_INFINITY;
    for x in batch.iter() {
        let logits = student.router().logits(x);
        let delta = moe::top_two_margin(&logits)?;
        let hs = student.soft_predict(x)?;
        let (hh, _) = student.hard_predict(x)?;
        let violation = (hs - hh).abs() - 2.0 * b_f * k1 * exp(-delta / tau);
        worst = worst.max(violation);
    }
    Ok(worst)
}

/// The measured risk gap next to its margin-tail bound, with the
/// ingredients the bound was assembled from.
#[derive(Debug, Clone, Copy)]
pub struct GapBoundReport {
    /// Paired `|L_tau - L_0|` on the batch.
    pub gap: f64,
    /// `4 B_f (B_Y + B_f) (K - 1) mean(exp(-delta/tau))`.
    pub bound: f64,
    /// Batch supremum of expert outputs.
    pub b_f: f64,
    /// Batch supremum of targets.
    pub b_y: f64,
    /// `mean(exp(-delta/tau))` over the batch.
    pub mean_exp_margin: f64,
}

/// Measures the paired risk gap and assembles the chain bound from batch
/// suprema. The inequality `gap <= bound` holds exactly on the empirical
/// measure.
pub fn gap_bound_chain(
    student: &MoeModel,
    teacher: &Teacher,
    batch: &SampleBatch,
) -> Result<GapBoundReport> {
    check_student(student, batch)?;
    check_teacher(teacher, batch)?;
    let risks = estimate_risks(student, teacher, batch)?;
    let b_f = batch_expert_sup(student, batch);
    let mut b_y = 0.0f64;
    let mut exp_sum = 0.0;
    let tau = student.temperature();
    for x in batch.iter() {
        b_y = b_y.max(teacher.respond(x).abs());
        let delta = moe::top_two_margin(&student.router().logits(x))?;
        exp_sum += exp(-delta / tau);
    }
    let mean_exp_margin = exp_sum / batch.len() as f64;
    let k1 = (student.num_experts() - 1) as f64;
    Ok(GapBoundReport {
        gap: risks.gap,
        bound: 4.0 * b_f * (b_y + b_f) * k1 * mean_exp_margin,
        b_f,
        b_y,
        mean_exp_margin,
    })
}

/// Soft risk split into the contribution of confidently gated points and
/// the near-tie remainder.
#[derive(Debug, Clone, Copy)]
pub struct RiskSplit {
    /// Gate temperature.
    pub tau: f64,
    /// Ambiguity tolerance defining the boundary region
    /// `{max_k p_k <= 1 - eps}`.
    pub eps: f64,
    /// Full empirical soft risk, accumulated in one pass.
    pub total: f64,
    /// Contribution of points gated confidently (`max_k p_k > 1 - eps`).
    pub interior: f64,
    /// Contribution of the eps-ambiguous points.
    pub boundary: f64,
    /// Fraction of the batch that is eps-ambiguous.
    pub ambiguous_fraction: f64,
    /// `(2 B^2 + 2 B_stu^2) * ambiguous_fraction`, the a priori cap on the
    /// boundary part; provable samplewise from the batch suprema.
    pub boundary_bound: f64,
}

/// Splits the empirical soft risk over the confident and ambiguous parts
/// of the batch. The two parts sum to the total by construction (up to
/// floating-point reassociation, since the total is accumulated in one
/// unmasked pass).
pub fn risk_decomposition(
    student: &MoeModel,
    teacher: &Teacher,
    batch: &SampleBatch,
    eps: f64,
) -> Result<RiskSplit> {
    check_student(student, batch)?;
    check_teacher(teacher, batch)?;
    if !(eps.is_finite() && eps > 0.0 && eps < 0.5) {
        return Err(Error::invalid("eps must lie strictly between 0 and 1/2"));
    }
    let n = batch.len() as f64;
    let tau = student.temperature();
    let mut total = 0.0;
    let mut interior = 0.0;
    let mut boundary = 0.0;
    let mut ambiguous = 0usize;
    let mut b_y = 0.0f64;
    let b_stu = batch_expert_sup(student, batch);
    for x in batch.iter() {
        let y = teacher.respond(x);
        b_y = b_y.max(y.abs());
        let w = moe::softmax_weights(&student.router().logits(x), tau)?;
        let p_max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let f = student.experts().predictions(x);
        let loss = {
            let h = dot(&w, &f);
            (y - h) * (y - h)
        };
        total += loss;
        if p_max <= 1.0 - eps {
            ambiguous += 1;
            boundary += loss;
        } else {
            interior += loss;
        }
    }
    let ambiguous_fraction = ambiguous as f64 / n;
    Ok(RiskSplit {
        tau,
        eps,
        total: total / n,
        interior: interior / n,
        boundary: boundary / n,
        ambiguous_fraction,
        boundary_bound: (2.0 * b_y * b_y + 2.0 * b_stu * b_stu) * ambiguous_fraction,
    })
}

/// Paired risk gap maximised over a family of students, per temperature.
///
/// One batch is drawn once and shared by every `(student, tau)` pair, so
/// the sweep isolates the temperature dependence. Each returned row is
/// `(tau, max over students of the paired gap)`.
pub fn uniform_gap_sweep(
    teacher: &Teacher,
    students: &[(LinearRouter, LinearExpertSet)],
    law: &GaussianLaw,
    tau_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if students.is_empty() {
        return Err(Error::invalid("need at least one student configuration"));
    }
    if tau_grid.is_empty() {
        return Err(Error::invalid("need at least one temperature"));
    }
    if law.dim() != teacher.dim() {
        return Err(Error::invalid("teacher and law dimensions differ"));
    }
    let batch = gaussian_sample(law, n, seed)?;
    let mut rows = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let mut max_gap = 0.0f64;
        for (router, experts) in students {
            let student = MoeModel::new(router.clone(), experts.clone(), tau)?;
            let r = estimate_risks(&student, teacher, &batch)?;
            max_gap = max_gap.max(r.gap);
        }
        rows.push((tau, max_gap));
    }
    Ok(rows)
}

/// Outcome of the interface shape-derivative cross-check.
#[derive(Debug, Clone, Copy)]
pub struct ShapeDerivativeCheck {
    /// Central finite difference of the hard risk in the router bias,
    /// paired on one batch.
    pub fd: McEstimate,
    /// Surface-integral value: `E[D_01(X) | S(X) = 0] * f_S(0)` estimated
    /// on conditional hyperplane samples.
    pub surface: McEstimate,
    /// `|fd - surface|`.
    pub abs_diff: f64,
    /// Root-sum-square of the two standard errors.
    pub combined_std_error: f64,
    /// Step used for the finite difference.
    pub db: f64,
    /// Set when `db` exceeds one percent of the score's standard
    /// deviation, where curvature of the risk in the bias starts to
    /// contaminate a central difference at these tolerances.
    pub db_warning: bool,
}

/// Cross-checks the derivative of the hard risk in the router bias
/// against its surface form on the decision interface.
///
/// The model must have exactly two experts, so the interface is the single
/// hyperplane `{S = 0}` with score `S(x) = (r_0 - r_1) . x + (c_0 - c_1)`.
/// Differentiating the hard risk `E[(target - f_winner)^2]` in the bias
/// gap moves only the interface, giving
///
/// ```text
///     d L_0 / d b  =  E[ D_01(X) | S(X) = 0 ] * f_S(0),
///     D_01 = (f_0 - target)^2 - (f_1 - target)^2,
/// ```
///
/// where `f_S(0)` is the Gaussian density of the score at zero. The left
/// side is estimated by a central difference at `b +- db` on one shared
/// batch (only points whose winner flips contribute); the right side by
/// averaging `D_01` over exact conditional samples from the hyperplane,
/// built by Gaussian regression of `X` on its score.
pub fn hard_risk_bias_derivative_check<F: Fn(&[f64]) -> f64>(
    model: &MoeModel,
    target: F,
    law: &GaussianLaw,
    db: f64,
    n: usize,
    seed: u64,
) -> Result<ShapeDerivativeCheck> {
    if model.num_experts() != 2 {
        return Err(Error::invalid(
            "shape-derivative check needs exactly two experts",
        ));
    }
    if model.dim() != law.dim() {
        return Err(Error::invalid("model and law dimensions differ"));
    }
    if !(db.is_finite() && db > 0.0) {
        return Err(Error::invalid("finite-difference step must be positive"));
    }

    let router = model.router();
    let d = model.dim();
    let nu: Vec<f64> = (0..d)
        .map(|i| router.weight_row(0)[i] - router.weight_row(1)[i])
        .collect();
    let b_gap = router.bias(0) - router.bias(1);
    let score = LinearScore::new(nu.clone(), b_gap, law)?;
    let sigma = score.sigma();
    let db_warning = db > 0.01 * sigma;

    // Finite-difference side: hard risks at b +- db, paired per point.
    let plus = model.router().with_bias_shift(0, db);
    let minus = model.router().with_bias_shift(0, -db);
    let batch = gaussian_sample(law, n, seed)?;
    let mut diffs = Vec::with_capacity(n);
    for x in batch.iter() {
        let y = target(x);
        let kp = moe::hard_winner(&plus.logits(x))?;
        let km = moe::hard_winner(&minus.logits(x))?;
        let lp = {
            let f = model.experts().predict_one(kp, x);
            (y - f) * (y - f)
        };
        let lm = {
            let f = model.experts().predict_one(km, x);
            (y - f) * (y - f)
        };
        diffs.push((lp - lm) / (2.0 * db));
    }
    let fd = mc_mean(&diffs)?;

    // Surface side: condition X on S(X) = 0 by regression,
    //   X_cond = X' + (cov nu / sigma^2) (0 - S(X')),
    // then average the loss contrast times the score density at zero.
    let cov_nu = law.cov().matvec(&nu);
    let var = sigma * sigma;
    let density = normal_pdf(score.mean() / sigma) / sigma;
    let cond_batch = gaussian_sample(law, n, derive_seed(seed, 0x5face))?;
    let mut vals = Vec::with_capacity(n);
    let mut xc = alloc::vec![0.0f64; d];
    for x in cond_batch.iter() {
        let s = dot(&nu, x) + b_gap;
        let shift = -s / var;
        for i in 0..d {
            xc[i] = x[i] + cov_nu[i] * shift;
        }
        let y = target(&xc);
        let f0 = model.experts().predict_one(0, &xc);
        let f1 = model.experts().predict_one(1, &xc);
        let contrast = (f0 - y) * (f0 - y) - (f1 - y) * (f1 - y);
        vals.push(contrast * density);
    }
    let surface = mc_mean(&vals)?;

    Ok(ShapeDerivativeCheck {
        fd,
        surface,
        abs_diff: (fd.value - surface.value).abs(),
        combined_std_error: crate::math::hypot(fd.std_error, surface.std_error),
        db,
        db_warning,
    })
}
