//! Run configuration: built-in defaults, an optional flat TOML file, and
//! command-line overrides, in that order of precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::Failure;

/// Which driver a config is being resolved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Temperature sweep on the realizable two-expert teacher.
    Exp1,
    /// Interface-offset sweep at fixed temperature.
    Exp2,
    /// Reduced symmetry-breaking training runs.
    Exp3,
    /// Invariant checklist.
    Verify,
}

impl Experiment {
    /// Artifact file stem (`exp1.csv`, `exp1_summary.json`, ...).
    pub fn stem(&self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Verify => "verify",
        }
    }
}

/// Optional values from the config file. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Master seed for every sampler in the run.
    pub seed: Option<u64>,
    /// Monte Carlo sample count.
    pub samples: Option<usize>,
    /// Input dimension.
    pub dim: Option<usize>,
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Temperature grid (exp1, exp3).
    pub taus: Option<Vec<f64>>,
    /// Interface offsets (exp2).
    pub offsets: Option<Vec<f64>>,
    /// Gate-ambiguity tolerance used by the verification suite.
    pub epsilon: Option<f64>,
    /// Norm of the expert contrast (exp1, exp2) or of the teacher
    /// direction (exp3).
    pub contrast: Option<f64>,
    /// Router-score perturbation for the flip-rate column (exp2).
    pub perturbation: Option<f64>,
    /// Gradient-descent step size (exp3).
    pub eta: Option<f64>,
    /// Gradient-descent step count (exp3).
    pub steps: Option<usize>,
}

impl FileConfig {
    /// Parses a TOML config file.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }
}

/// Command-line overrides; the strongest layer.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Config file to read first, if any.
    pub config: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
    /// Master seed.
    pub seed: Option<u64>,
    /// Sample count.
    pub samples: Option<usize>,
}

/// A fully resolved, validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Which driver this config was resolved for.
    pub experiment: Experiment,
    /// Master seed; per-purpose streams are derived from it.
    pub seed: u64,
    /// Monte Carlo sample count.
    pub samples: usize,
    /// Input dimension.
    pub dim: usize,
    /// Output directory for all artifacts.
    pub out: PathBuf,
    /// Temperature grid (exp1, exp3).
    pub taus: Vec<f64>,
    /// Interface offsets (exp2).
    pub offsets: Vec<f64>,
    /// Gate-ambiguity tolerance (verify).
    pub epsilon: f64,
    /// Expert-contrast norm (exp1, exp2) or teacher-direction norm (exp3).
    pub contrast: f64,
    /// Router-score perturbation for the flip rate (exp2).
    pub perturbation: f64,
    /// Step size (exp3).
    pub eta: f64,
    /// Step count (exp3).
    pub steps: usize,
}

fn default_samples(exp: Experiment) -> usize {
    match exp {
        Experiment::Exp1 | Experiment::Exp2 => 1_000_000,
        Experiment::Exp3 => 150_000,
        Experiment::Verify => 100_000,
    }
}

fn default_taus(exp: Experiment) -> Vec<f64> {
    match exp {
        Experiment::Exp3 => vec![0.05, 0.1, 0.2, 0.4],
        _ => vec![0.02, 0.05, 0.10, 0.20, 0.45, 0.60],
    }
}

fn default_contrast(exp: Experiment) -> f64 {
    match exp {
        Experiment::Exp3 => 0.5,
        _ => 2.0,
    }
}

/// Resolves defaults, file values, and flag overrides into a validated
/// [`RunConfig`].
pub fn resolve(experiment: Experiment, overrides: &Overrides) -> Result<RunConfig, Failure> {
    let file = match &overrides.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let cfg = RunConfig {
        experiment,
        seed: overrides.seed.or(file.seed).unwrap_or(42),
        samples: overrides
            .samples
            .or(file.samples)
            .unwrap_or_else(|| default_samples(experiment)),
        dim: file.dim.unwrap_or(8),
        out: overrides
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("runs")),
        taus: file.taus.unwrap_or_else(|| default_taus(experiment)),
        offsets: file
            .offsets
            .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.25]),
        epsilon: file.epsilon.unwrap_or(0.2),
        contrast: file.contrast.unwrap_or_else(|| default_contrast(experiment)),
        perturbation: file.perturbation.unwrap_or(0.063),
        eta: file.eta.unwrap_or(0.05),
        steps: file.steps.unwrap_or(1000),
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn sorted_strictly(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

fn validate(cfg: &RunConfig) -> Result<(), Failure> {
    let fail = |msg: String| Err(Failure::Config(msg));
    if cfg.samples < 100 {
        return fail(format!("samples = {} is too small to estimate anything", cfg.samples));
    }
    if cfg.dim < 2 {
        return fail(format!(
            "dim = {} leaves no direction tangent to the interface",
            cfg.dim
        ));
    }
    if cfg.taus.is_empty() || !sorted_strictly(&cfg.taus) {
        return fail("taus must be nonempty and strictly increasing".into());
    }
    if cfg.taus.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return fail("every tau must be finite and positive".into());
    }
    if cfg.offsets.is_empty() || !sorted_strictly(&cfg.offsets) {
        return fail("offsets must be nonempty and strictly increasing".into());
    }
    if cfg.offsets.iter().any(|&b| !b.is_finite()) {
        return fail("every offset must be finite".into());
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.5) {
        return fail(format!("epsilon = {} must lie strictly between 0 and 1/2", cfg.epsilon));
    }
    if !(cfg.contrast.is_finite() && cfg.contrast > 0.0) {
        return fail(format!("contrast = {} must be positive", cfg.contrast));
    }
    if !(cfg.perturbation.is_finite() && cfg.perturbation > 0.0) {
        return fail(format!("perturbation = {} must be positive", cfg.perturbation));
    }
    if !(cfg.eta.is_finite() && cfg.eta > 0.0) {
        return fail(format!("eta = {} must be positive", cfg.eta));
    }
    if cfg.steps == 0 {
        return fail("steps must be at least 1".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn overrides() -> Overrides {
        Overrides::default()
    }

    #[test]
    fn defaults_resolve_per_experiment() {
        let e1 = resolve(Experiment::Exp1, &overrides()).unwrap();
        assert_eq!(e1.samples, 1_000_000);
        assert_eq!(e1.taus, vec![0.02, 0.05, 0.10, 0.20, 0.45, 0.60]);
        let e3 = resolve(Experiment::Exp3, &overrides()).unwrap();
        assert_eq!(e3.samples, 150_000);
        assert_eq!(e3.taus, vec![0.05, 0.1, 0.2, 0.4]);
        assert_eq!(e3.steps, 1000);
        assert_eq!(e3.contrast, 0.5);
        assert_eq!(resolve(Experiment::Exp1, &overrides()).unwrap().contrast, 2.0);
    }

    #[test]
    fn flags_override_file_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "seed = 7\nsamples = 5000\ndim = 4").unwrap();
        let ov = Overrides {
            config: Some(path),
            seed: Some(99),
            ..Overrides::default()
        };
        let cfg = resolve(Experiment::Exp1, &ov).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.samples, 5000);
        assert_eq!(cfg.dim, 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "sample = 10\n").unwrap();
        let ov = Overrides {
            config: Some(path),
            ..Overrides::default()
        };
        match resolve(Experiment::Exp1, &ov) {
            Err(Failure::Config(msg)) => assert!(msg.contains("sample")),
            other => panic!("expected a config failure, got {other:?}"),
        }
    }

    #[test]
    fn bad_grids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for bad in ["taus = []", "taus = [0.2, 0.1]", "taus = [0.0, 0.1]", "offsets = [1.0, 1.0]"] {
            let path = dir.path().join("cfg.toml");
            std::fs::write(&path, bad).unwrap();
            let ov = Overrides {
                config: Some(path),
                ..Overrides::default()
            };
            assert!(
                matches!(resolve(Experiment::Exp1, &ov), Err(Failure::Config(_))),
                "{bad} should not validate"
            );
        }
    }

    #[test]
    fn exit_codes_follow_the_documented_mapping() {
        assert_eq!(Failure::Config(String::new()).exit_code(), 1);
        assert_eq!(Failure::Invariant(String::new()).exit_code(), 2);
        assert_eq!(Failure::Numerical(String::new()).exit_code(), 3);
    }
}
