//! Reduced symmetry-breaking training runs.
//!
//! A two-expert student with experts pinned at the teacher pair trains
//! only its router direction `u` by gradient descent, once per grid
//! temperature, from one shared initial direction on one shared batch.
//! Endpoints land in `exp3.csv`; the step-by-step alignment deficit and
//! loss land in one trace file per temperature.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use softgate_core::linalg::norm2;
use softgate_core::sampling::{derive_seed, GaussianLaw};
use softgate_core::symmetry::{gate_profile, reduced_router_train, SymmetrySpec};

use crate::config::RunConfig;
use crate::report::{csv, sig6, table, two_column, write_atomic};
use crate::{check_prob, Failure};

const BATCH_TAG: u64 = 3;

/// Initial `|cos(u0, v)|` of every run.
pub const U0_ALIGNMENT: f64 = 0.05;

/// Initial router norm of every run.
pub const U0_NORM: f64 = 0.1;

/// Endpoint of one training run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Exp3Record {
    /// Gate temperature trained at.
    pub tau: f64,
    /// Final empirical soft risk.
    pub risk: f64,
    /// Final `|cos(u, v)|`.
    pub align: f64,
    /// Final router norm.
    pub unorm: f64,
    /// Slab mass `P(|u . x| <= tau)` of the trained router.
    pub bm: f64,
    /// Mean gate entropy (nats) of the trained router.
    pub entropy: f64,
    /// Whether the run left the trust region and stopped early.
    pub diverged: bool,
}

/// One recorded training step, as written to the trace files.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TracePoint {
    /// Step index; 0 is the initialisation.
    pub step: usize,
    /// `1 - |cos(u, v)|`.
    pub align_deficit: f64,
    /// Empirical soft risk at this step.
    pub loss: f64,
}

/// Run summary serialized to JSON with full precision.
#[derive(Debug, Clone, Serialize)]
pub struct Exp3Summary {
    /// Step size.
    pub eta: f64,
    /// Step count per run.
    pub steps: usize,
    /// Norm of the teacher direction.
    pub contrast: f64,
    /// Initial alignment shared by every run.
    pub u0_alignment: f64,
    /// Initial router norm shared by every run.
    pub u0_norm: f64,
    /// RNG seed the shared batch was derived from.
    pub seed: u64,
    /// Batch size.
    pub n: usize,
    /// Ambient dimension.
    pub dim: usize,
    /// Whether any run diverged.
    pub any_diverged: bool,
    /// Wall-clock seconds for all runs.
    pub wall_secs: f64,
    /// The endpoint rows, at full precision.
    pub records: Vec<Exp3Record>,
}

/// Endpoints, traces, and summary.
#[derive(Debug, Clone)]
pub struct Exp3Output {
    /// One endpoint per grid temperature.
    pub records: Vec<Exp3Record>,
    /// `(tau, step rows)` per grid temperature.
    pub traces: Vec<(f64, Vec<TracePoint>)>,
    /// The JSON summary.
    pub summary: Exp3Summary,
}

/// The teacher geometry shared by every run: separator normal `e_1`,
/// teacher direction `contrast * e_1`, zero baseline, standard law.
pub fn teacher_spec(dim: usize, contrast: f64) -> Result<SymmetrySpec, Failure> {
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    let mut d_star = vec![0.0; dim];
    d_star[0] = contrast;
    Ok(SymmetrySpec::new(
        v,
        d_star,
        GaussianLaw::standard(dim)?,
        0.0,
    )?)
}

/// Runs one training per grid temperature and returns endpoints, traces,
/// and the summary.
pub fn run(cfg: &RunConfig) -> Result<Exp3Output, Failure> {
    let start = Instant::now();
    let spec = teacher_spec(cfg.dim, cfg.contrast)?;
    let u0 = spec.router_with_alignment(U0_ALIGNMENT, U0_NORM)?;
    let seed = derive_seed(cfg.seed, BATCH_TAG);

    let mut records = Vec::with_capacity(cfg.taus.len());
    let mut traces = Vec::with_capacity(cfg.taus.len());
    for &tau in &cfg.taus {
        let trace = reduced_router_train(&spec, &u0, cfg.eta, tau, cfg.steps, cfg.samples, seed)?;
        let last = trace.last();
        let (entropy, bm) = gate_profile(&last.u, spec.law(), tau, cfg.samples, seed)?;
        records.push(Exp3Record {
            tau,
            risk: last.risk,
            align: last.alignment,
            unorm: norm2(&last.u),
            bm: check_prob("exp3 boundary mass", bm)?,
            entropy,
            diverged: trace.diverged,
        });
        let points: Vec<TracePoint> = trace
            .records
            .iter()
            .map(|r| TracePoint {
                step: r.step,
                align_deficit: 1.0 - r.alignment,
                loss: r.risk,
            })
            .collect();
        traces.push((tau, points));
    }

    let summary = Exp3Summary {
        eta: cfg.eta,
        steps: cfg.steps,
        contrast: cfg.contrast,
        u0_alignment: U0_ALIGNMENT,
        u0_norm: U0_NORM,
        seed: cfg.seed,
        n: cfg.samples,
        dim: cfg.dim,
        any_diverged: records.iter().any(|r| r.diverged),
        wall_secs: start.elapsed().as_secs_f64(),
        records: records.clone(),
    };
    Ok(Exp3Output {
        records,
        traces,
        summary,
    })
}

/// Writes `exp3.csv`, `exp3_summary.json`, `exp3_table.txt`, one trace
/// CSV and one plot-ready `.dat` per temperature. Returns the paths
/// written.
pub fn write_artifacts(out: &Exp3Output, dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let header = ["tau", "risk", "align", "unorm", "bm", "entropy"];
    let rows: Vec<Vec<String>> = out
        .records
        .iter()
        .map(|r| {
            vec![
                sig6(r.tau),
                sig6(r.risk),
                sig6(r.align),
                sig6(r.unorm),
                sig6(r.bm),
                sig6(r.entropy),
            ]
        })
        .collect();

    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<(), Failure> {
        let path = dir.join(name);
        write_atomic(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit("exp3.csv", csv(&header, &rows))?;
    emit(
        "exp3_summary.json",
        format!("{}\n", serde_json::to_string_pretty(&out.summary).map_err(
            |e| Failure::Numerical(format!("summary serialization failed: {e}"))
        )?),
    )?;
    emit(
        "exp3_table.txt",
        table(
            "exp3: trained-router endpoints across temperature",
            &header,
            &rows,
        ),
    )?;
    for (tau, points) in &out.traces {
        let trace_rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| {
                vec![
                    p.step.to_string(),
                    sig6(p.align_deficit),
                    sig6(p.loss),
                ]
            })
            .collect();
        emit(
            &format!("exp3_trace_tau{}.csv", sig6(*tau)),
            csv(&["step", "align_deficit", "loss"], &trace_rows),
        )?;
        let steps: Vec<f64> = points.iter().map(|p| p.step as f64).collect();
        let deficits: Vec<f64> = points.iter().map(|p| p.align_deficit).collect();
        emit(
            &format!("exp3_align_tau{}.dat", sig6(*tau)),
            two_column(&steps, &deficits),
        )?;
    }
    Ok(written)
}
