//! Offset sweep at fixed temperature.
//!
//! The interface is translated away from the bulk of the Gaussian law by
//! a router bias while the temperature stays at 0.1. Boundary mass, risk
//! gap, and the flip rate under a small bias perturbation all collapse
//! together as the offset grows, which is the geometric half of the
//! boundary-layer story: the gap is controlled by how much probability
//! sits near the interface, not by the temperature alone.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use softgate_core::boundary::{top_margins, LinearScore};
use softgate_core::linalg::Mat;
use softgate_core::moe::{hard_winner, LinearExpertSet, LinearRouter};
use softgate_core::risk::{estimate_risks, Teacher};
use softgate_core::sampling::{derive_seed, gaussian_sample, mc_proportion, GaussianLaw};
use softgate_core::stats::pearson;

use crate::config::RunConfig;
use crate::report::{csv, sig6, table, two_column, write_atomic};
use crate::{check_prob, Failure};

const BATCH_TAG: u64 = 2;

/// Fixed gate temperature of the sweep.
pub const TAU: f64 = 0.1;

/// One row of the offset sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Exp2Record {
    /// Interface offset `b`.
    pub offset: f64,
    /// Measured slab mass `P(margin <= 2 tau)` at this offset.
    pub bm: f64,
    /// Standard error of `bm`.
    pub bm_se: f64,
    /// Analytic slab mass `Phi(b + 0.2) - Phi(b - 0.2)`.
    pub bm_analytic: f64,
    /// Paired risk gap at `tau = 0.1`.
    pub gap: f64,
    /// Fraction of points whose hard winner flips when the router bias
    /// moves by the configured perturbation.
    pub flip: f64,
    /// Standard error of `flip`.
    pub flip_se: f64,
    /// Analytic flip rate `Phi(b + delta) - Phi(b)`.
    pub flip_analytic: f64,
}

/// Run summary serialized to JSON with full precision.
#[derive(Debug, Clone, Serialize)]
pub struct Exp2Summary {
    /// Gate temperature.
    pub tau: f64,
    /// Bias perturbation used for the flip rate.
    pub perturbation: f64,
    /// Pearson correlation of the gap column with the mass column.
    pub corr_gap_mass: f64,
    /// Pearson correlation of the flip column with the mass column.
    pub corr_flip_mass: f64,
    /// Whether the gap column strictly decreases along the grid.
    pub gap_monotone_decreasing: bool,
    /// Whether the flip column strictly decreases along the grid.
    pub flip_monotone_decreasing: bool,
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
    pub records: Vec<Exp2Record>,
}

/// Records plus summary.
#[derive(Debug, Clone)]
pub struct Exp2Output {
    /// One record per grid offset.
    pub records: Vec<Exp2Record>,
    /// The JSON summary.
    pub summary: Exp2Summary,
}

/// Router at offset `b` with the tangent expert pair. The contrast
/// vector lies along `e_2`, orthogonal to the router normal `e_1`, so
/// translating the interface changes the local mass but not the size of
/// the prediction jump across it.
pub fn offset_pair(
    dim: usize,
    offset: f64,
    contrast: f64,
) -> Result<(LinearRouter, LinearExpertSet), Failure> {
    let mut w = Mat::zeros(2, dim);
    w[(0, 0)] = 1.0;
    let router = LinearRouter::new(w, vec![-offset, 0.0])?;
    let mut e = Mat::zeros(2, dim);
    e[(0, 1)] = contrast / 2.0;
    e[(1, 1)] = -contrast / 2.0;
    let experts = LinearExpertSet::new(e, vec![0.0, 0.0])?;
    Ok((router, experts))
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Runs the sweep and returns the rows and summary.
pub fn run(cfg: &RunConfig) -> Result<Exp2Output, Failure> {
    let start = Instant::now();
    let law = GaussianLaw::standard(cfg.dim)?;
    let batch = gaussian_sample(&law, cfg.samples, derive_seed(cfg.seed, BATCH_TAG))?;
    let delta = cfg.perturbation;
    let width = 2.0 * TAU;

    let mut records = Vec::with_capacity(cfg.offsets.len());
    for &offset in &cfg.offsets {
        let (router, experts) = offset_pair(cfg.dim, offset, cfg.contrast)?;
        let teacher = Teacher::new(router.clone(), experts)?;
        let margins = top_margins(teacher.model(), &batch)?;
        let hits = margins.iter().filter(|&&d| d <= width).count();
        let bm = mc_proportion(hits, cfg.samples)?;

        let mut nu = vec![0.0; cfg.dim];
        nu[0] = 1.0;
        let score = LinearScore::new(nu, -offset, &law)?;
        let bm_analytic = check_prob(
            "exp2 analytic boundary mass",
            score.interval_prob(-width, width)?,
        )?;

        let student = teacher.model().with_temperature(TAU)?;
        let risks = estimate_risks(&student, &teacher, &batch)?;

        let shifted = router.with_bias_shift(0, -delta);
        let mut flips = 0usize;
        for x in batch.iter() {
            let base = hard_winner(&router.logits(x))?;
            let moved = hard_winner(&shifted.logits(x))?;
            if base != moved {
                flips += 1;
            }
        }
        let flip = mc_proportion(flips, cfg.samples)?;
        let flip_analytic =
            check_prob("exp2 analytic flip rate", score.interval_prob(0.0, delta)?)?;

        records.push(Exp2Record {
            offset,
            bm: check_prob("exp2 boundary mass", bm.value)?,
            bm_se: bm.std_error,
            bm_analytic,
            gap: risks.gap,
            flip: check_prob("exp2 flip rate", flip.value)?,
            flip_se: flip.std_error,
            flip_analytic,
        });
    }

    let masses: Vec<f64> = records.iter().map(|r| r.bm).collect();
    let gaps: Vec<f64> = records.iter().map(|r| r.gap).collect();
    let flips: Vec<f64> = records.iter().map(|r| r.flip).collect();
    let summary = Exp2Summary {
        tau: TAU,
        perturbation: delta,
        corr_gap_mass: pearson(&gaps, &masses)?,
        corr_flip_mass: pearson(&flips, &masses)?,
        gap_monotone_decreasing: strictly_decreasing(&gaps),
        flip_monotone_decreasing: strictly_decreasing(&flips),
        seed: cfg.seed,
        n: cfg.samples,
        dim: cfg.dim,
        contrast: cfg.contrast,
        wall_secs: start.elapsed().as_secs_f64(),
        records: records.clone(),
    };
    Ok(Exp2Output { records, summary })
}

/// Writes `exp2.csv`, `exp2_summary.json`, `exp2_table.txt`, and the
/// plot-ready `.dat` files into `dir`. Returns the paths written.
pub fn write_artifacts(out: &Exp2Output, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let header = ["offset", "bm", "gap", "flip"];
    let rows: Vec<Vec<String>> = out
        .records
        .iter()
        .map(|r| vec![sig6(r.offset), sig6(r.bm), sig6(r.gap), sig6(r.flip)])
        .collect();

    let masses: Vec<f64> = out.records.iter().map(|r| r.bm).collect();
    let gaps: Vec<f64> = out.records.iter().map(|r| r.gap).collect();
    let flips: Vec<f64> = out.records.iter().map(|r| r.flip).collect();

    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), Failure> {
        let path = dir.join(name);
        write_atomic(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit("exp2.csv", csv(&header, &rows))?;
    emit(
        "exp2_summary.json",
        format!("{}\n", serde_json::to_string_pretty(&out.summary).map_err(
            |e| Failure::Numerical(format!("summary serialization failed: {e}"))
        )?),
    )?;
    emit(
        "exp2_table.txt",
        table(
            "exp2: interface offset against mass, gap, and flip rate at tau = 0.1",
            &header,
            &rows,
        ),
    )?;
    emit("exp2_gap_vs_bm.dat", two_column(&masses, &gaps))?;
    emit("exp2_flip_vs_bm.dat", two_column(&masses, &flips))?;
    Ok(written)
}
