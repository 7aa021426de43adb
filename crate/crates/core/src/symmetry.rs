//! Reduced two-expert model for symmetry breaking in router training.
//!
//! The teacher splits space along a hyperplane `{v . x = 0}` and responds
//! `baseline +- (1/2) d_star . x` on the two sides. The student keeps two
//! fixed experts and trains only an antisymmetric router with logits
//! `(u . x, -u . x)`, gated at temperature `tau`, so the single vector `u`
//! carries all routing. Averaging the gradient feedback over the teacher's
//! sides yields the effective operator
//!
//! ```text
//!     M = E[ g(v . X) (d_star . X) X X^T ]        (symmetrised)
//! ```
//!
//! whose Rayleigh quotient along the separator normal has the closed form
//! `v^T M v = kappa_g(s) (d_star^T cov v) sqrt(v^T cov v)`, with
//! `kappa_g(s) = E[g(G) G^3] / s^3` for `G ~ N(0, s^2)`. A positive value
//! certifies that the symmetric (unaligned) router is linearly unstable:
//! gradient flow pushes `u` toward the separator. The linearised update
//! `u ← (I + (eta/tau) M) u` then separates over eigencomponents, and the
//! ratio of the top two growth factors gives the alignment rate.

use alloc::vec::Vec;

use crate::linalg::{dot, norm2, sym_eigen, Mat, SymEigen};
use crate::math::{normal_pdf, sqrt, tanh};
use crate::moe::LinearExpertSet;
use crate::quadrature::integrate;
use crate::sampling::{gaussian_sample, mc_mean, GaussianLaw, McEstimate, SampleBatch};
use crate::{Error, Result};

/// `E[|G|^3] / s^3` for a centred Gaussian: the sign-response constant
/// `2 sqrt(2/pi)`.
pub const SIGN_RESPONSE_KAPPA: f64 = 1.5957691216057308;

/// Odd response shape `g` applied to the separator score.
#[derive(Debug, Clone, Copy)]
pub enum ResponseFn {
    /// `g(z) = sign(z)`, with `g(0) = 1` to match the hard tie rule.
    Sign,
    /// `g(z) = tanh(gamma z)`.
    Tanh(f64),
    /// Any odd integrable response, evaluated by quadrature.
    Custom(fn(f64) -> f64),
}

impl ResponseFn {
    /// Evaluates the response at `z`.
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            ResponseFn::Sign => {
                if z >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            ResponseFn::Tanh(gamma) => tanh(gamma * z),
            ResponseFn::Custom(g) => g(z),
        }
    }
}

/// Scale-resolved response constant `kappa_g(s) = E[g(G) G^3] / s^3` for
/// `G ~ N(0, s^2)`.
///
/// For the sign response this is `2 sqrt(2/pi)` at every scale. Other
/// responses are integrated adaptively over `(-8s, 8s)`; the discarded
/// Gaussian tail is below 1e-14 of the integral for any bounded `g`.
pub fn kappa_g(g: &ResponseFn, s: f64) -> Result<f64> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::invalid("score scale must be finite and positive"));
    }
    if let ResponseFn::Sign = g {
        return Ok(SIGN_RESPONSE_KAPPA);
    }
    let g = *g;
    let density = move |z: f64| {
        let t = z / s;
        g.eval(z) * z * z * z * normal_pdf(t) / s
    };
    let moment = integrate(density, -8.0 * s, 8.0 * s, 1e-13 * s * s * s * s, 1e-11)?;
    Ok(moment / (s * s * s))
}

/// The teacher geometry of the reduced model: separator normal, contrast
/// direction, input law, and a constant shared baseline.
#[derive(Debug, Clone)]
pub struct SymmetrySpec {
    v: Vec<f64>,
    d_star: Vec<f64>,
    law: GaussianLaw,
    baseline: f64,
}

impl SymmetrySpec {
    /// Builds the spec, normalising `v` to unit Euclidean length.
    pub fn new(v: Vec<f64>, d_star: Vec<f64>, law: GaussianLaw, baseline: f64) -> Result<Self> {
        if v.len() != law.dim() || d_star.len() != law.dim() {
            return Err(Error::invalid("spec and law dimensions differ"));
        }
        if v.iter().chain(&d_star).any(|x| !x.is_finite()) || !baseline.is_finite() {
            return Err(Error::invalid("spec parameters must be finite"));
        }
        let nv = norm2(&v);
        if nv == 0.0 {
            return Err(Error::invalid("separator normal must be nonzero"));
        }
        let v = v.iter().map(|x| x / nv).collect();
        Ok(SymmetrySpec {
            v,
            d_star,
            law,
            baseline,
        })
    }

    /// Unit separator normal.
    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Teacher contrast direction.
    pub fn d_star(&self) -> &[f64] {
        &self.d_star
    }

    /// Input law.
    pub fn law(&self) -> &GaussianLaw {
        &self.law
    }

    /// Shared constant baseline of the teacher pair.
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Standard deviation `s = sqrt(v^T cov v)` of the separator score.
    pub fn score_scale(&self) -> f64 {
        sqrt(self.law.quad_form(&self.v))
    }

    /// Teacher response: `baseline + (1/2) d_star . x` on the side
    /// `v . x >= 0`, the mirror image on the other side. The boundary
    /// itself takes the plus branch, matching the min-index hard rule.
    pub fn teacher_response(&self, x: &[f64]) -> f64 {
        let side = if dot(&self.v, x) >= 0.0 { 0.5 } else { -0.5 };
        self.baseline + side * dot(&self.d_star, x)
    }

    /// The matched pair of student experts `baseline +- (1/2) d_star . x`:
    /// the teacher's own branches, handed to the student as fixed experts
    /// so that only the router remains to be learned.
    pub fn teacher_experts(&self) -> LinearExpertSet {
        let d = self.d_star.len();
        let mut w = Mat::zeros(2, d);
        for i in 0..d {
            w[(0, i)] = 0.5 * self.d_star[i];
            w[(1, i)] = -0.5 * self.d_star[i];
        }
        LinearExpertSet::new(w, alloc::vec![self.baseline; 2]).expect("shape is consistent")
    }

    /// A deterministic router initialisation with `|cos(u0, v)| ==
    /// alignment` and `|u0| == norm`. The off-separator component points
    /// along the coordinate axis least aligned with `v`, orthogonalised.
    pub fn router_with_alignment(&self, alignment: f64, norm: f64) -> Result<Vec<f64>> {
        if !(0.0..=1.0).contains(&alignment) {
            return Err(Error::invalid("alignment must lie in [0, 1]"));
        }
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("router norm must be positive"));
        }
        let d = self.v.len();
        if alignment == 1.0 || d == 1 {
            return Ok(self.v.iter().map(|x| x * norm).collect());
        }
        // Axis with the smallest |v_j| is the farthest from v.
        let j = (0..d)
            .min_by(|&a, &b| self.v[a].abs().partial_cmp(&self.v[b].abs()).unwrap())
            .unwrap();
        let mut w: Vec<f64> = (0..d).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        let proj = self.v[j];
        for (wi, vi) in w.iter_mut().zip(&self.v) {
            *wi -= proj * vi;
        }
        let nw = norm2(&w);
        let beta = sqrt(1.0 - alignment * alignment);
        Ok((0..d)
            .map(|i| norm * (alignment * self.v[i] + beta * w[i] / nw))
            .collect())
    }
}

/// `|cos|` between a router vector and a direction; 1 means aligned.
pub fn alignment(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::invalid("alignment of vectors of different lengths"));
    }
    let nu = norm2(u);
    let nv = norm2(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("alignment of a zero vector"));
    }
    Ok((dot(u, v) / (nu * nv)).abs())
}

/// The effective symmetry-breaking operator with its spectrum.
#[derive(Debug, Clone)]
pub struct EffectiveOperator {
    matrix: Mat,
    eigen: SymEigen,
}

impl EffectiveOperator {
    /// Wraps a (near-)symmetric matrix: symmetrises it exactly and
    /// eigendecomposes.
    pub fn from_matrix(mut matrix: Mat) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::invalid("effective operator must be square"));
        }
        for i in 0..matrix.rows() {
            for j in (i + 1)..matrix.cols() {
                let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                matrix[(i, j)] = v;
                matrix[(j, i)] = v;
            }
        }
        let eigen = sym_eigen(&matrix)?;
        Ok(EffectiveOperator { matrix, eigen })
    }

    /// The symmetrised matrix.
    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// Eigenvector for the `k`-th eigenvalue.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigen.vector(k)
    }

    /// Quadratic form `u^T M u / |u|^2`.
    pub fn rayleigh(&self, u: &[f64]) -> f64 {
        let mu = self.matrix.matvec(u);
        dot(u, &mu) / dot(u, u)
    }

    /// Norm of the projection of `dir` onto the span of eigenvectors with
    /// positive eigenvalue; positive when `dir` has an unstable component.
    pub fn positive_subspace_overlap(&self, dir: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, &lambda) in self.eigen.values.iter().enumerate() {
            if lambda > 0.0 {
                let c = dot(&self.eigen.vector(k), dir);
                s += c * c;
            }
        }
        sqrt(s)
    }
}

/// Monte Carlo estimate of the effective operator
/// `M = E[g(v . X)(d_star . X) X X^T]`, explicitly symmetrised.
pub fn build_m_mc(
    g: &ResponseFn,
    spec: &SymmetrySpec,
    n: usize,
    seed: u64,
) -> Result<EffectiveOperator> {
    let d = spec.v.len();
    let batch = gaussian_sample(spec.law(), n, seed)?;
    let mut acc = Mat::zeros(d, d);
    for x in batch.iter() {
        let w = g.eval(dot(&spec.v, x)) * dot(&spec.d_star, x);
        for i in 0..d {
            let wi = w * x[i];
            for j in 0..d {
                acc[(i, j)] += wi * x[j];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = acc[(i, j)] * inv_n;
        }
    }
    EffectiveOperator::from_matrix(m)
}

/// Monte Carlo Rayleigh quotient `v^T M v` along the separator normal,
/// with a standard error. Same samples and summands as [`build_m_mc`],
/// reduced as a scalar so the error is meaningful.
pub fn rayleigh_mc(
    g: &ResponseFn,
    spec: &SymmetrySpec,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    let batch = gaussian_sample(spec.law(), n, seed)?;
    let mut vals = Vec::with_capacity(n);
    for x in batch.iter() {
        let z = dot(&spec.v, x);
        vals.push(g.eval(z) * dot(&spec.d_star, x) * z * z);
    }
    mc_mean(&vals)
}

/// Closed-form Rayleigh quotient along the separator normal:
/// `kappa_g(s) * (d_star^T cov v) * s` with `s = sqrt(v^T cov v)`.
pub fn rayleigh_analytic(g: &ResponseFn, spec: &SymmetrySpec) -> Result<f64> {
    let s = spec.score_scale();
    if s <= 0.0 {
        return Err(Error::numerical("separator score has zero variance"));
    }
    let cov_v = spec.law().cov().matvec(&spec.v);
    Ok(kappa_g(g, s)? * dot(&spec.d_star, &cov_v) * s)
}

/// Linearised router iteration `u_{t+1} = (I + (eta/tau) M) u_t`.
///
/// Returns the whole trajectory `u_0 .. u_steps`. In the eigenbasis of
/// `M` the components evolve exactly as `(1 + eta lambda_i / tau)^t`,
/// which is what the verification suite checks this against.
pub fn linearized_iterate(
    m: &Mat,
    u0: &[f64],
    eta: f64,
    tau: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if m.rows() != m.cols() || m.rows() != u0.len() {
        return Err(Error::invalid("operator and router dimensions differ"));
    }
    if !(eta.is_finite() && eta > 0.0 && tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("eta and tau must be positive"));
    }
    let rate = eta / tau;
    let mut traj = Vec::with_capacity(steps + 1);
    let mut u = u0.to_vec();
    traj.push(u.clone());
    for _ in 0..steps {
        let mu = m.matvec(&u);
        for i in 0..u.len() {
            u[i] += rate * mu[i];
        }
        traj.push(u.clone());
    }
    Ok(traj)
}

/// Ratio of the second growth factor to the first in the linearised
/// dynamics: `|(1 + eta lambda2 / tau) / (1 + eta lambda1 / tau)|`.
/// Tends to `lambda2 / lambda1` as `tau` shrinks; below one it certifies
/// that alignment with the top eigenvector wins.
pub fn alignment_rate(lambda1: f64, lambda2: f64, eta: f64, tau: f64) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0 && tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("eta and tau must be positive"));
    }
    if !(lambda1.is_finite() && lambda2.is_finite()) {
        return Err(Error::invalid("eigenvalues must be finite"));
    }
    let denom = 1.0 + eta * lambda1 / tau;
    if denom == 0.0 {
        return Err(Error::numerical("top growth factor is zero"));
    }
    Ok(((1.0 + eta * lambda2 / tau) / denom).abs())
}

/// Gradient of the empirical squared-error risk in the antisymmetric
/// router weight `u`, for two fixed experts gated by `p_1 =
/// sigmoid(2 u . x / tau)`:
///
/// ```text
///     grad = -(4 / tau) mean[ (y - h) p_1 p_2 (f_1 - f_2) x ]
/// ```
pub fn reduced_gradient(
    u: &[f64],
    experts: &LinearExpertSet,
    targets: &[f64],
    batch: &SampleBatch,
    tau: f64,
) -> Result<Vec<f64>> {
    if experts.len() != 2 {
        return Err(Error::invalid("reduced model has exactly two experts"));
    }
    if u.len() != batch.dim() || experts.dim() != batch.dim() {
        return Err(Error::invalid("router, experts, and batch dimensions differ"));
    }
    if targets.len() != batch.len() {
        return Err(Error::invalid("one target per batch point is required"));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let d = u.len();
    let mut grad = alloc::vec![0.0f64; d];
    for (i, x) in batch.iter().enumerate() {
        let f = experts.predictions(x);
        let z = 2.0 * dot(u, x) / tau;
        let p1 = crate::math::sigmoid(z);
        let p2 = 1.0 - p1;
        let h = p1 * f[0] + p2 * f[1];
        let coef = (targets[i] - h) * p1 * p2 * (f[0] - f[1]);
        for k in 0..d {
            grad[k] += coef * x[k];
        }
    }
    let scale = -4.0 / (tau * batch.len() as f64);
    for gk in grad.iter_mut() {
        *gk *= scale;
    }
    Ok(grad)
}

/// One recorded step of router training. Gate entropy and slab mass are
/// endpoint quantities; [`gate_profile`] recovers them for any recorded
/// router state without slowing the training loop down.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// Step index; 0 is the initialisation.
    pub step: usize,
    /// Router weights at this step.
    pub u: Vec<f64>,
    /// `|cos(u, v)|` against the teacher separator.
    pub alignment: f64,
    /// Empirical soft risk at this step.
    pub risk: f64,
}

/// Full gradient-descent trace of the reduced router.
#[derive(Debug, Clone)]
pub struct RouterTrace {
    /// Gate temperature trained at.
    pub tau: f64,
    /// Step size.
    pub eta: f64,
    /// Records for steps `0 ..= steps` (fewer if training diverged).
    pub records: Vec<StepRecord>,
    /// Set when `|u|` left the trust region (1e6) and training stopped.
    pub diverged: bool,
}

impl RouterTrace {
    /// The last recorded step.
    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("trace always has step 0")
    }
}

const DIVERGENCE_RADIUS: f64 = 1e6;

/// Trains the antisymmetric router by full-batch gradient descent against
/// the spec's teacher, recording alignment, risk, gate entropy, and
/// boundary mass at every step.
///
/// The batch is drawn once from the spec's law and reused for every step,
/// so runs at different temperatures with the same seed see identical
/// data. Experts stay fixed at the teacher pair; only `u` moves.
pub fn reduced_router_train(
    spec: &SymmetrySpec,
    u0: &[f64],
    eta: f64,
    tau: f64,
    steps: usize,
    n: usize,
    seed: u64,
) -> Result<RouterTrace> {
    if u0.len() != spec.v.len() {
        return Err(Error::invalid("router and spec dimensions differ"));
    }
    if norm2(u0) == 0.0 {
        return Err(Error::invalid("router initialisation must be nonzero"));
    }
    if !(eta.is_finite() && eta > 0.0 && tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("eta and tau must be positive"));
    }
    let batch = gaussian_sample(spec.law(), n, seed)?;
    let d = spec.v.len();
    let nf = n as f64;

    // Per-sample constants: target, expert contrast, expert midpoint.
    // With the teacher pair as experts the midpoint is the baseline and
    // the contrast is d_star . x.
    let mut targets = Vec::with_capacity(n);
    let mut contrast = Vec::with_capacity(n);
    for x in batch.iter() {
        targets.push(spec.teacher_response(x));
        contrast.push(dot(&spec.d_star, x));
    }

    let mut u = u0.to_vec();
    let mut grad = alloc::vec![0.0f64; d];
    let mut records = Vec::with_capacity(steps + 1);
    let mut diverged = false;

    for step in 0..=steps {
        let mut risk = 0.0;
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        for (i, x) in batch.iter().enumerate() {
            let s = dot(&u, x);
            let p1 = crate::math::sigmoid(2.0 * s / tau);
            let p2 = 1.0 - p1;
            // h = baseline + (p1 - p2)/2 * contrast for the teacher pair.
            let h = spec.baseline + (p1 - 0.5) * contrast[i];
            let r = targets[i] - h;
            risk += r * r;
            let coef = r * p1 * p2 * contrast[i];
            for k in 0..d {
                grad[k] += coef * x[k];
            }
        }
        records.push(StepRecord {
            step,
            u: u.clone(),
            alignment: alignment(&u, &spec.v)?,
            risk: risk / nf,
        });
        if step == steps {
            break;
        }
        let scale = eta * 4.0 / (tau * nf);
        for k in 0..d {
            u[k] += scale * grad[k];
        }
        if norm2(&u) > DIVERGENCE_RADIUS {
            diverged = true;
            break;
        }
    }
    Ok(RouterTrace {
        tau,
        eta,
        records,
        diverged,
    })
}

/// Mean gate entropy (nats) and slab mass of a trained router on a fresh
/// batch; convenience for endpoint reporting.
pub fn gate_profile(
    u: &[f64],
    law: &GaussianLaw,
    tau: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if u.len() != law.dim() {
        return Err(Error::invalid("router and law dimensions differ"));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let batch = gaussian_sample(law, n, seed)?;
    let mut entropy = 0.0;
    let mut in_slab = 0usize;
    for x in batch.iter() {
        let s = dot(u, x);
        entropy += crate::math::binary_entropy_from_logit(2.0 * s / tau);
        if s.abs() <= tau {
            in_slab += 1;
        }
    }
    let nf = batch.len() as f64;
    Ok((entropy / nf, in_slab as f64 / nf))
}
