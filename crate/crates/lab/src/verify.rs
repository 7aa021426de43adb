//! The invariant checklist behind the `verify` subcommand.
//!
//! Every check is phrased as `observed <= tolerance`. Exact identities
//! carry absolute tolerances near machine precision; Monte Carlo
//! comparisons are normalised by `max(floor, 3 standard errors)` so the
//! same checklist passes at any sample count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use softgate_core::boundary::{
    coarea_coeff_gaussian, estimate_bm_top, kappa_eps, kappa_eps_k, max_gate_weights,
    pairwise_min_margins, top_margins, LinearScore,
};
use softgate_core::linalg::{dot, norm2, Mat};
use softgate_core::math::sigmoid;
use softgate_core::moe::{
    offwinner_mass_and_bound, pairwise_min_margin, softmax_weights, top_two_margin,
    LinearExpertSet, LinearRouter, MoeModel,
};
use softgate_core::risk::{
    gap_bound_chain, hard_risk_bias_derivative_check, pointwise_gap_bound_check,
    risk_decomposition, Teacher,
};
use softgate_core::sampling::{derive_seed, gaussian_sample, GaussianLaw, SampleBatch};
use softgate_core::symmetry::{
    alignment_rate, linearized_iterate, rayleigh_analytic, rayleigh_mc, reduced_gradient,
    EffectiveOperator, ResponseFn, SymmetrySpec,
};

use crate::config::RunConfig;
use crate::report::{sig6, write_atomic};
use crate::{exp1, exp2, Failure};

/// One checklist entry.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    /// Stable identifier printed in the report.
    pub name: String,
    /// Measured value, in the units of the tolerance.
    pub observed: f64,
    /// Largest acceptable value.
    pub tolerance: f64,
    /// `observed <= tolerance`.
    pub passed: bool,
}

/// Everything the `verify` subcommand measured.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// Master seed the sub-streams were derived from.
    pub seed: u64,
    /// Base sample count for the statistical checks.
    pub n: usize,
    /// Wall-clock seconds for the whole checklist.
    pub wall_secs: f64,
    /// Conjunction of all entries.
    pub all_passed: bool,
    /// The entries, in execution order.
    pub checks: Vec<Check>,
}

fn push(checks: &mut Vec<Check>, name: &str, observed: f64, tolerance: f64) {
    checks.push(Check {
        name: name.to_string(),
        observed,
        tolerance,
        passed: observed <= tolerance,
    });
}

/// Rows of a standard Gaussian batch, scaled entrywise.
fn scaled_rows(dim: usize, count: usize, scale: f64, seed: u64) -> Result<Vec<Vec<f64>>, Failure> {
    let batch = gaussian_sample(&GaussianLaw::standard(dim)?, count, seed)?;
    Ok(batch
        .iter()
        .map(|row| row.iter().map(|&v| v * scale).collect())
        .collect())
}

fn softmax_checks(checks: &mut Vec<Check>, n: usize, seed: u64) -> Result<(), Failure> {
    let tau = 0.1;
    let mut norm_dev = 0.0f64;
    let mut gauge_dev = 0.0f64;
    let mut overflow_dev = 0.0f64;
    let mut tail_excess = f64::NEG_INFINITY;
    let mut order_excess = f64::NEG_INFINITY;
    let mut union_mismatches = 0usize;

    for (i, &k) in [2usize, 3, 5, 8].iter().enumerate() {
        let rows = scaled_rows(k, (n / 4).max(100), 20.0, derive_seed(seed, 100 + i as u64))?;
        for z in &rows {
            let p = softmax_weights(z, tau)?;
            norm_dev = norm_dev.max((p.iter().sum::<f64>() - 1.0).abs());

            let shifted: Vec<f64> = z.iter().map(|&v| v + 137.5).collect();
            let q = softmax_weights(&shifted, tau)?;
            for (a, b) in p.iter().zip(&q) {
                gauge_dev = gauge_dev.max((a - b).abs());
            }

            let huge: Vec<f64> = z.iter().map(|&v| v * 500.0).collect();
            let ph = softmax_weights(&huge, tau)?;
            if ph.iter().any(|v| !v.is_finite()) {
                overflow_dev = f64::INFINITY;
            } else {
                overflow_dev = overflow_dev.max((ph.iter().sum::<f64>() - 1.0).abs());
            }

            let (mass, bound) = offwinner_mass_and_bound(z, tau)?;
            tail_excess = tail_excess.max(mass - bound);

            let top = top_two_margin(z)?;
            let pair = pairwise_min_margin(z)?;
            order_excess = order_excess.max(pair - top);

            let w = 0.5;
            let mut pair_hit = false;
            for a in 0..k {
                for b in (a + 1)..k {
                    if (z[a] - z[b]).abs() <= w {
                        pair_hit = true;
                    }
                }
            }
            if (pair <= w) != pair_hit {
                union_mismatches += 1;
            }
        }
    }

    push(checks, "softmax_normalization", norm_dev, 1e-12);
    push(checks, "softmax_gauge_invariance", gauge_dev, 1e-12);
    push(checks, "softmax_overflow_guard", overflow_dev, 1e-12);
    push(checks, "softmax_tail_inequality", tail_excess, 1e-12);
    push(checks, "margin_ordering", order_excess, 0.0);
    push(checks, "pair_union_consistency", union_mismatches as f64, 0.0);
    Ok(())
}

fn taxonomy_check(checks: &mut Vec<Check>, cfg: &RunConfig, seed: u64) -> Result<(), Failure> {
    let d = cfg.dim;
    let k = 4usize;
    let tau = 0.1;
    let rows = scaled_rows(d, k, 1.0, derive_seed(seed, 110))?;
    let mut w = Mat::zeros(k, d);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            w[(i, j)] = v;
        }
    }
    let biases: Vec<f64> = scaled_rows(k, 1, 0.3, derive_seed(seed, 111))?[0].clone();
    let router = LinearRouter::new(w, biases)?;
    let experts = {
        let erows = scaled_rows(d, k, 0.5, derive_seed(seed, 112))?;
        let mut e = Mat::zeros(k, d);
        for (i, row) in erows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                e[(i, j)] = v;
            }
        }
        LinearExpertSet::new(e, vec![0.0; k])?
    };
    let model = MoeModel::new(router, experts, tau)?;
    let law = GaussianLaw::standard(d)?;
    let batch = gaussian_sample(&law, cfg.samples, derive_seed(seed, 113))?;

    let eps = cfg.epsilon;
    let k_eps = kappa_eps(eps)?;
    let k_eps_k = kappa_eps_k(eps, k)?;
    let top = top_margins(&model, &batch)?;
    let pair = pairwise_min_margins(&model, &batch)?;
    let maxp = max_gate_weights(&model, &batch)?;

    let mut violations = 0usize;
    for i in 0..batch.len() {
        let a = top[i] <= k_eps * tau;
        let b = maxp[i] <= 1.0 - eps;
        let c = top[i] <= k_eps_k * tau;
        let dd = pair[i] <= k_eps_k * tau;
        if (a && !b) || (b && !c) || (c && !dd) {
            violations += 1;
        }
    }
    push(checks, "ambiguity_taxonomy_nesting", violations as f64, 0.0);
    Ok(())
}

fn risk_checks(checks: &mut Vec<Check>, cfg: &RunConfig, seed: u64) -> Result<(), Failure> {
    let (router, experts) = exp1::teacher_pair(cfg.dim, 2.0)?;
    let teacher = Teacher::new(router, experts)?;
    let law = GaussianLaw::standard(cfg.dim)?;
    let batch = gaussian_sample(&law, cfg.samples, derive_seed(seed, 120))?;

    let student = teacher.model().with_temperature(0.1)?;
    let split = risk_decomposition(&student, &teacher, &batch, 0.25)?;
    push(
        checks,
        "risk_decomposition_additivity",
        (split.total - (split.interior + split.boundary)).abs(),
        1e-12,
    );
    push(
        checks,
        "risk_decomposition_boundary_bound",
        split.boundary - split.boundary_bound,
        1e-12,
    );

    push(
        checks,
        "pointwise_gap_bound",
        pointwise_gap_bound_check(&student, &batch)?,
        1e-12,
    );

    let mut chain_excess = f64::NEG_INFINITY;
    for tau in [0.02, 0.05, 0.1, 0.2] {
        let s = teacher.model().with_temperature(tau)?;
        let report = gap_bound_chain(&s, &teacher, &batch)?;
        chain_excess = chain_excess.max(report.gap - report.bound);
    }
    push(checks, "risk_gap_chain_bound", chain_excess, 0.0);
    Ok(())
}

fn boundary_mass_checks(
    checks: &mut Vec<Check>,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(), Failure> {
    let law = GaussianLaw::standard(cfg.dim)?;
    let mut nu = vec![0.0; cfg.dim];
    nu[0] = 1.0;

    let mut worst = 0.0f64;
    let (router, experts) = exp1::teacher_pair(cfg.dim, 2.0)?;
    let model = MoeModel::new(router, experts, 0.1)?;
    let score = LinearScore::new(nu.clone(), 0.0, &law)?;
    for (i, tau) in [0.02f64, 0.05, 0.1, 0.2].iter().enumerate() {
        let width = 2.0 * tau;
        let est = estimate_bm_top(&model, &law, width, cfg.samples, derive_seed(seed, 130 + i as u64))?;
        let analytic = score.interval_prob(-width, width)?;
        let band = (3.0 * est.estimate.std_error).max(0.002);
        worst = worst.max((est.estimate.value - analytic).abs() / band);
    }
    for (i, offset) in [0.0f64, 0.5, 1.0, 1.5, 2.0, 2.25].iter().enumerate() {
        let (router, experts) = exp2::offset_pair(cfg.dim, *offset, 2.0)?;
        let model = MoeModel::new(router, experts, 0.1)?;
        let score = LinearScore::new(nu.clone(), -offset, &law)?;
        let est = estimate_bm_top(&model, &law, 0.2, cfg.samples, derive_seed(seed, 140 + i as u64))?;
        let analytic = score.interval_prob(-0.2, 0.2)?;
        let band = (3.0 * est.estimate.std_error).max(0.002);
        worst = worst.max((est.estimate.value - analytic).abs() / band);
    }
    push(checks, "boundary_mass_analytic_agreement", worst, 1.0);

    let score = LinearScore::new(nu, 0.0, &law)?;
    let eps = 0.2;
    let coeff = coarea_coeff_gaussian(&score, eps)?;
    let kappa = kappa_eps(eps)?;
    let tau = 1e-3;
    let slab = score.interval_prob(-kappa * tau, kappa * tau)?;
    push(
        checks,
        "coarea_linearity",
        (slab / (coeff * tau) - 1.0).abs(),
        0.01,
    );
    Ok(())
}

/// A full-rank covariance assembled from Gaussian rows, kept well away
/// from singularity by a ridge.
fn random_spd(d: usize, seed: u64) -> Result<Mat, Failure> {
    let rows = scaled_rows(d, d, 0.6, seed)?;
    let mut cov = Mat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for row in &rows {
                s += row[i] * row[j];
            }
            cov[(i, j)] = s / d as f64;
        }
        cov[(i, i)] += 0.5;
    }
    Ok(cov)
}

fn random_symmetry_spec(d: usize, seed: u64) -> Result<SymmetrySpec, Failure> {
    let dirs = scaled_rows(d, 2, 1.0, derive_seed(seed, 1))?;
    let cov = random_spd(d, derive_seed(seed, 2))?;
    let law = GaussianLaw::new(vec![0.0; d], cov)?;
    Ok(SymmetrySpec::new(dirs[0].clone(), dirs[1].clone(), law, 0.0)?)
}

fn symmetry_checks(checks: &mut Vec<Check>, cfg: &RunConfig, seed: u64) -> Result<(), Failure> {
    let d = 4usize;

    let mut worst = 0.0f64;
    let mut case = |g: &ResponseFn, spec: &SymmetrySpec, tag: u64| -> Result<(), Failure> {
        let mc = rayleigh_mc(g, spec, cfg.samples, derive_seed(seed, 150 + tag))?;
        let analytic = rayleigh_analytic(g, spec)?;
        worst = worst.max((mc.value - analytic).abs() / (3.0 * mc.std_error));
        Ok(())
    };
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    let axis = SymmetrySpec::new(v.clone(), v, GaussianLaw::standard(d)?, 0.0)?;
    case(&ResponseFn::Sign, &axis, 0)?;
    for i in 0..2u64 {
        let spec = random_symmetry_spec(d, derive_seed(seed, 160 + i))?;
        case(&ResponseFn::Sign, &spec, 1 + 2 * i)?;
        case(&ResponseFn::Tanh(2.0), &spec, 2 + 2 * i)?;
    }
    push(checks, "rayleigh_moment_identity", worst, 1.0);

    let mut worst_traj = 0.0f64;
    let (eta, tau, steps) = (0.05, 0.2, 30usize);
    for i in 0..5u64 {
        let rows = scaled_rows(d, d + 1, 0.8, derive_seed(seed, 170 + i))?;
        let mut m = Mat::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                m[(a, b)] = 0.5 * (rows[a][b] + rows[b][a]);
            }
        }
        let op = EffectiveOperator::from_matrix(m)?;
        let u0 = &rows[d];
        let traj = linearized_iterate(op.matrix(), u0, eta, tau, steps)?;
        let coeffs: Vec<f64> = (0..d).map(|k| dot(&op.eigenvector(k), u0)).collect();
        for (t, u_t) in traj.iter().enumerate() {
            let mut closed = vec![0.0; d];
            for (k, ck) in coeffs.iter().enumerate() {
                let factor = (1.0 + eta * op.eigenvalues()[k] / tau).powi(t as i32);
                let w = op.eigenvector(k);
                for (c, &wk) in closed.iter_mut().zip(&w) {
                    *c += ck * factor * wk;
                }
            }
            let diff: Vec<f64> = closed.iter().zip(u_t).map(|(a, b)| a - b).collect();
            worst_traj = worst_traj.max(norm2(&diff) / norm2(u_t).max(1.0));
        }
    }
    push(checks, "linearized_iteration_exactness", worst_traj, 1e-12);

    let rate = alignment_rate(2.0, 0.8, 0.05, 1e-9)?;
    push(
        checks,
        "alignment_rate_hard_limit",
        (rate - 0.4).abs(),
        1e-6,
    );
    Ok(())
}

fn gradient_checks(checks: &mut Vec<Check>, seed: u64) -> Result<(), Failure> {
    let d = 4usize;
    let tau = 0.3;
    let n = 500usize;
    let law = GaussianLaw::standard(d)?;

    let risk = |u: &[f64], experts: &LinearExpertSet, targets: &[f64], batch: &SampleBatch| {
        let mut acc = 0.0;
        for (i, x) in batch.iter().enumerate() {
            let f = experts.predictions(x);
            let p1 = sigmoid(2.0 * dot(u, x) / tau);
            let h = p1 * f[0] + (1.0 - p1) * f[1];
            let r = targets[i] - h;
            acc += r * r;
        }
        acc / batch.len() as f64
    };

    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let s = derive_seed(seed, 180 + i);
        let batch = gaussian_sample(&law, n, derive_seed(s, 0))?;
        let rows = scaled_rows(d, 3, 0.7, derive_seed(s, 1))?;
        let mut e = Mat::zeros(2, d);
        for (a, row) in rows.iter().take(2).enumerate() {
            for (b, &vv) in row.iter().enumerate() {
                e[(a, b)] = vv;
            }
        }
        let experts = LinearExpertSet::new(e, vec![0.1, -0.2])?;
        let u = rows[2].clone();
        let targets: Vec<f64> = batch.iter().map(|x| 0.4 * x[0] + 0.2).collect();

        let grad = reduced_gradient(&u, &experts, &targets, &batch, tau)?;
        let h = 1e-6;
        let mut fd = vec![0.0; d];
        for k in 0..d {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[k] += h;
            dn[k] -= h;
            fd[k] = (risk(&up, &experts, &targets, &batch)
                - risk(&dn, &experts, &targets, &batch))
                / (2.0 * h);
        }
        let diff: Vec<f64> = grad.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm2(&diff) / norm2(&fd).max(1e-12));
    }
    push(checks, "reduced_gradient_fd_agreement", worst, 1e-5);
    Ok(())
}

fn shape_check(checks: &mut Vec<Check>, cfg: &RunConfig, seed: u64) -> Result<(), Failure> {
    let (router, experts) = exp1::teacher_pair(cfg.dim, 2.0)?;
    let model = MoeModel::new(router, experts, 0.0)?;
    let law = GaussianLaw::standard(cfg.dim)?;
    let report = hard_risk_bias_derivative_check(
        &model,
        |x| x[1],
        &law,
        0.01,
        cfg.samples,
        derive_seed(seed, 190),
    )?;
    let observed = if report.db_warning {
        f64::INFINITY
    } else {
        report.abs_diff / (3.0 * report.combined_std_error).max(1e-3)
    };
    push(checks, "shape_derivative_surface_agreement", observed, 1.0);
    Ok(())
}

fn determinism_check(checks: &mut Vec<Check>, cfg: &RunConfig, seed: u64) -> Result<(), Failure> {
    let law = GaussianLaw::standard(cfg.dim)?;
    let n = cfg.samples.min(10_000);
    let a = gaussian_sample(&law, n, derive_seed(seed, 199))?;
    let b = gaussian_sample(&law, n, derive_seed(seed, 199))?;
    let mut dev = 0.0f64;
    for (ra, rb) in a.iter().zip(b.iter()) {
        for (va, vb) in ra.iter().zip(rb) {
            dev = dev.max((va - vb).abs());
        }
    }
    push(checks, "sampling_determinism", dev, 0.0);
    Ok(())
}

/// Runs the checklist.
pub fn run(cfg: &RunConfig) -> Result<VerifyReport, Failure> {
    let start = Instant::now();
    let seed = cfg.seed;
    let mut checks = Vec::new();
    softmax_checks(&mut checks, cfg.samples, seed)?;
    taxonomy_check(&mut checks, cfg, seed)?;
    risk_checks(&mut checks, cfg, seed)?;
    boundary_mass_checks(&mut checks, cfg, seed)?;
    symmetry_checks(&mut checks, cfg, seed)?;
    gradient_checks(&mut checks, seed)?;
    shape_check(&mut checks, cfg, seed)?;
    determinism_check(&mut checks, cfg, seed)?;

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        seed,
        n: cfg.samples,
        wall_secs: start.elapsed().as_secs_f64(),
        all_passed,
        checks,
    })
}

/// Renders the report as the text printed to stdout and written to
/// `verify_report.txt`.
pub fn render(report: &VerifyReport) -> String {
    let width = report
        .checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0);
    let mut out = format!(
        "verification checklist (seed {}, n {})\n",
        report.seed, report.n
    );
    for c in &report.checks {
        out.push_str(&format!(
            "{}  {:<width$}  observed {}  tolerance {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            sig6(c.observed),
            sig6(c.tolerance),
        ));
    }
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        out.push_str(&format!("all {} checks passed\n", report.checks.len()));
    } else {
        out.push_str(&format!(
            "{failed} of {} checks FAILED\n",
            report.checks.len()
        ));
    }
    out
}

/// Writes `verify_report.txt` and `verify_summary.json` into `dir`.
pub fn write_artifacts(report: &VerifyReport, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let txt = dir.join("verify_report.txt");
    write_atomic(&txt, &render(report))?;
    let json = dir.join("verify_summary.json");
    write_atomic(
        &json,
        &format!("{}\n", serde_json::to_string_pretty(report).map_err(|e| {
            Failure::Numerical(format!("report serialization failed: {e}"))
        })?),
    )?;
    Ok(vec![txt, json])
}
