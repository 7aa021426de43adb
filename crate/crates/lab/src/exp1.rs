//! Temperature sweep on the realizable two-expert model.
//!
//! A hard teacher with unit-norm router direction and zero bias labels a
//! shared Gaussian batch; students differ from it only in temperature.
//! Each row pairs the measured slab mass `P(margin <= 2 tau)` with its
//! analytic twin and the soft-to-hard risk gap, so the `O(tau)` scaling
//! of both columns can be read off one table.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use softgate_core::boundary::{top_margins, LinearScore};
use softgate_core::linalg::Mat;
use softgate_core::moe::{LinearExpertSet, LinearRouter};
use softgate_core::risk::{estimate_risks, Teacher};
use softgate_core::sampling::{derive_seed, gaussian_sample, mc_proportion, GaussianLaw};
use softgate_core::stats::{ols_line, pearson};

use crate::config::RunConfig;
use crate::report::{csv, sig6, table, two_column, write_atomic};
use crate::{check_prob, Failure};

const BATCH_TAG: u64 = 1;

/// One row of the temperature sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Exp1Record {
    /// Gate temperature.
    pub tau: f64,
    /// Measured slab mass `P(margin <= 2 tau)`.
    pub bm_mc: f64,
    /// Standard error of `bm_mc`.
    pub bm_se: f64,
    /// Analytic slab mass `2 Phi(2 tau) - 1`.
    pub bm_analytic: f64,
    /// Paired risk gap `|L_tau - L_0|`.
    pub gap: f64,
    /// `gap / tau`.
    pub gap_over_tau: f64,
}

/// Run summary serialized to JSON with full precision.
#[derive(Debug, Clone, Serialize)]
pub struct Exp1Summary {
    /// Log-log slope of the measured mass against temperature, fitted
    /// over `tau <= 0.1`.
    pub slope_mass: f64,
    /// Log-log slope of the risk gap over the same temperatures.
    pub slope_gap: f64,
    /// Pearson correlation between mass and gap over the full grid.
    pub corr_mass_gap: f64,
    /// RNG seed the batch was derived from.
    pub seed: u64,
    /// Batch size.
    pub n: usize,
    /// Ambient dimension.
    pub dim: usize,
    /// Norm of the expert contrast vector.
    pub contrast: f64,
    /// Wall-clock seconds for the sweep.
    pub wall_secs: f64,
    /// The rows, at full precision.
    pub records: Vec<Exp1Record>,
}

/// Records plus summary; artifacts are written separately so callers can
/// inspect numbers without touching the filesystem.
#[derive(Debug, Clone)]
pub struct Exp1Output {
    /// One record per grid temperature.
    pub records: Vec<Exp1Record>,
    /// The JSON summary.
    pub summary: Exp1Summary,
}

/// The shared teacher geometry: router direction `e_1` with zero bias
/// against a flat second logit, experts `+-(contrast/2) e_2`.
pub fn teacher_pair(
    dim: usize,
    contrast: f64,
) -> Result<(LinearRouter, LinearExpertSet), Failure> {
    let mut w = Mat::zeros(2, dim);
    w[(0, 0)] = 1.0;
    let router = LinearRouter::new(w, vec![0.0, 0.0])?;
    let mut e = Mat::zeros(2, dim);
    e[(0, 1)] = contrast / 2.0;
    e[(1, 1)] = -contrast / 2.0;
    let experts = LinearExpertSet::new(e, vec![0.0, 0.0])?;
    Ok((router, experts))
}

/// Runs the sweep and returns the rows and summary.
pub fn run(cfg: &RunConfig) -> Result<Exp1Output, Failure> {
    let start = Instant::now();
    let (router, experts) = teacher_pair(cfg.dim, cfg.contrast)?;
    let teacher = Teacher::new(router.clone(), experts)?;
    let law = GaussianLaw::standard(cfg.dim)?;
    let batch = gaussian_sample(&law, cfg.samples, derive_seed(cfg.seed, BATCH_TAG))?;
    let margins = top_margins(teacher.model(), &batch)?;
    let mut nu = vec![0.0; cfg.dim];
    nu[0] = 1.0;
    let score = LinearScore::new(nu, 0.0, &law)?;

    let mut records = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let width = 2.0 * tau;
        let hits = margins.iter().filter(|&&d| d <= width).count();
        let bm = mc_proportion(hits, cfg.samples)?;
        let bm_analytic = check_prob(
            "exp1 analytic boundary mass",
            score.interval_prob(-width, width)?,
        )?;
        let student = teacher.model().with_temperature(tau)?;
        let risks = estimate_risks(&student, &teacher, &batch)?;
        records.push(Exp1Record {
            tau,
            bm_mc: check_prob("exp1 boundary mass", bm.value)?,
            bm_se: bm.std_error,
            bm_analytic,
            gap: risks.gap,
            gap_over_tau: risks.gap / tau,
        });
    }

    let small: Vec<&Exp1Record> = records.iter().filter(|r| r.tau <= 0.1 + 1e-12).collect();
    if small.len() < 2 {
        return Err(Failure::Config(
            "the tau grid needs at least two points at or below 0.1 for the slope fits".into(),
        ));
    }
    let log_tau: Vec<f64> = small.iter().map(|r| r.tau.ln()).collect();
    let log_mass: Vec<f64> = small.iter().map(|r| r.bm_mc.ln()).collect();
    let log_gap: Vec<f64> = small.iter().map(|r| r.gap.ln()).collect();
    let (slope_mass, _) = ols_line(&log_tau, &log_mass)?;
    let (slope_gap, _) = ols_line(&log_tau, &log_gap)?;
    let masses: Vec<f64> = records.iter().map(|r| r.bm_mc).collect();
    let gaps: Vec<f64> = records.iter().map(|r| r.gap).collect();
    let corr_mass_gap = pearson(&masses, &gaps)?;

    let summary = Exp1Summary {
        slope_mass,
        slope_gap,
        corr_mass_gap,
        seed: cfg.seed,
        n: cfg.samples,
        dim: cfg.dim,
        contrast: cfg.contrast,
        wall_secs: start.elapsed().as_secs_f64(),
        records: records.clone(),
    };
    Ok(Exp1Output { records, summary })
}

/// Writes `exp1.csv`, `exp1_summary.json`, `exp1_table.txt`, and the
/// plot-ready `.dat` files into `dir`. Returns the paths written.
pub fn write_artifacts(out: &Exp1Output, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let header = ["tau", "bm_mc", "bm_analytic", "gap", "gap_over_tau"];
    let rows: Vec<Vec<String>> = out
        .records
        .iter()
        .map(|r| {
            vec![
                sig6(r.tau),
                sig6(r.bm_mc),
                sig6(r.bm_analytic),
                sig6(r.gap),
                sig6(r.gap_over_tau),
            ]
        })
        .collect();

    let taus: Vec<f64> = out.records.iter().map(|r| r.tau).collect();
    let masses: Vec<f64> = out.records.iter().map(|r| r.bm_mc).collect();
    let gaps: Vec<f64> = out.records.iter().map(|r| r.gap).collect();

    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), Failure> {
        let path = dir.join(name);
        write_atomic(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit("exp1.csv", csv(&header, &rows))?;
    emit(
        "exp1_summary.json",
        format!("{}\n", serde_json::to_string_pretty(&out.summary).map_err(
            |e| Failure::Numerical(format!("summary serialization failed: {e}"))
        )?),
    )?;
    emit(
        "exp1_table.txt",
        table(
            "exp1: slab mass and soft-to-hard risk gap across temperature",
            &header,
            &rows,
        ),
    )?;
    emit("exp1_mass.dat", two_column(&taus, &masses))?;
    emit("exp1_gap.dat", two_column(&taus, &gaps))?;
    Ok(written)
}
