//! Batch experiment front end: typed configuration, initial-history
//! generators, run orchestration and artifact files.
//!
//! A run is deterministic for a fixed config and seed: the trajectory CSV
//! is bit-identical across repeats. Exit semantics follow the CLI contract:
//! 0 for a run whose internal checks pass, 2 for a completed run with a
//! failed check or a solver-level diagnostic, and configuration errors are
//! surfaced as `Err` (mapped to exit 1 by the caller).

use crate::certify;
use crate::config::{ConfigError, ConfigMap};
use crate::delay::{DelayFunctional, ThresholdDelay};
use crate::history::HistorySegment;
use crate::manifold::{manifold_residual, project_to_manifold, ManifoldError};
use crate::model::{ModelError, ModelSpec};
use crate::nonlinearity::{ConvolutionB, KernelKind, ScalarB};
use crate::solver::{
    solve, uniqueness_probe, ProbeConfig, SolveOptions, SolveStatus,
};
use crate::spectral::{SpectralField, SpectrumConfig};
use crate::variational::{semiflow_derivative_check, VariationalError, VariationalSign};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const ENV_PREFIX: &str = "SDDPDE_";

/// Every key the experiment format understands; used both for unknown-key
/// rejection and for environment-variable override matching.
pub const KNOWN_KEYS: &[&str] = &[
    "model.spectrum.n_modes",
    "model.spectrum.delta",
    "model.h",
    "model.nonlinearity.kernel",
    "model.nonlinearity.kernel_amplitude",
    "model.nonlinearity.kernel_width",
    "model.nonlinearity.b",
    "model.nonlinearity.b_gain",
    "model.nonlinearity.b_limit",
    "model.nonlinearity.grid_points",
    "model.delay.kind",
    "model.delay.c1",
    "model.delay.c2",
    "model.delay.c3",
    "model.delay.r_const",
    "model.delay.quad_points",
    "initial.kind",
    "initial.amplitude",
    "initial.mode",
    "initial.grid_m",
    "initial.cusp_position",
    "initial.cusp_sharpness",
    "run.kind",
    "run.t_final",
    "run.seed",
    "run.threads",
    "run.m_t",
    "run.picard_tol",
    "run.max_picard",
    "run.oracle_check",
    "run.oracle_tol",
    "run.oracle_dt",
    "run.fine_m_t",
    "run.out_dir",
    "variational.a_sign",
    "variational.t_eval",
    "variational.h_steps",
];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("config: {0}")]
    Invalid(String),
    #[error("io error writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Solve,
    Manifold,
    Variational,
    Certify,
}

/// Named initial-history generators.
#[derive(Debug, Clone)]
pub enum InitialSpec {
    Zero,
    /// amplitude·e^{-λ_mode·θ}·sin(mode·x): exact homogeneous decay, on the
    /// manifold when B ≡ 0.
    SingleModeDecay { mode: usize, amplitude: f64 },
    /// Gaussian bump in time centred at -h/2 across the two lowest modes.
    Bump { amplitude: f64 },
    /// Near-√ cusp at an interior time: ((θ-θ_c)² + ε²)^{1/4} profile.
    Cusp {
        amplitude: f64,
        /// Cusp location as a fraction of the horizon, θ_c = -h·position.
        position: f64,
        /// Smoothing scale ε.
        sharpness: f64,
    },
}

impl InitialSpec {
    pub fn build(&self, model: &ModelSpec, grid_m: usize) -> HistorySegment {
        let h = model.horizon();
        let n = model.n_modes();
        match *self {
            InitialSpec::Zero => HistorySegment::constant(h, grid_m, &SpectralField::zero(n)),
            InitialSpec::SingleModeDecay { mode, amplitude } => {
                let lambda = (mode * mode) as f64;
                HistorySegment::from_fn(
                    h,
                    grid_m,
                    move |t| SpectralField::single_mode(n, mode, amplitude * (-lambda * t).exp()),
                    move |t| {
                        SpectralField::single_mode(
                            n,
                            mode,
                            -amplitude * lambda * (-lambda * t).exp(),
                        )
                    },
                )
            }
            InitialSpec::Bump { amplitude } => {
                let width = 0.25 * h;
                let center = -0.5 * h;
                let profile = move |t: f64| (-((t - center) / width).powi(2)).exp();
                let dprofile =
                    move |t: f64| -2.0 * (t - center) / (width * width) * profile(t);
                HistorySegment::from_fn(
                    h,
                    grid_m,
                    move |t| {
                        let mut f = SpectralField::zero(n);
                        f.coeffs[0] = amplitude * profile(t);
                        if n > 1 {
                            f.coeffs[1] = 0.3 * amplitude * profile(t);
                        }
                        f
                    },
                    move |t| {
                        let mut f = SpectralField::zero(n);
                        f.coeffs[0] = amplitude * dprofile(t);
                        if n > 1 {
                            f.coeffs[1] = 0.3 * amplitude * dprofile(t);
                        }
                        f
                    },
                )
            }
            InitialSpec::Cusp {
                amplitude,
                position,
                sharpness,
            } => {
                let tc = -h * position;
                let prof = move |t: f64| {
                    let d = t - tc;
                    (d * d + sharpness * sharpness).powf(0.25)
                };
                let dprof = move |t: f64| {
                    let d = t - tc;
                    0.5 * d * (d * d + sharpness * sharpness).powf(-0.75)
                };
                HistorySegment::from_fn(
                    h,
                    grid_m,
                    move |t| SpectralField::single_mode(n, 1, amplitude * prof(t)),
                    move |t| SpectralField::single_mode(n, 1, amplitude * dprof(t)),
                )
            }
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub initial: InitialSpec,
    pub grid_m: usize,
    pub run_kind: RunKind,
    pub t_final: f64,
    pub seed: u64,
    pub threads: usize,
    pub solve_opts: SolveOptions,
    pub oracle_check: bool,
    pub oracle_tol: f64,
    pub oracle_dt: f64,
    pub fine_m_t: usize,
    pub out_dir: String,
    pub variational_sign: VariationalSign,
    pub variational_t_eval: f64,
    pub variational_h_steps: Vec<f64>,
}

impl ExperimentConfig {
    pub fn parse_str(text: &str) -> Result<Self, ExperimentError> {
        let map = ConfigMap::parse_str(text)?;
        Self::from_map(map)
    }

    /// Parses config text and applies `SDDPDE_*` environment overrides.
    pub fn parse_with_env(
        text: &str,
        vars: impl Iterator<Item = (String, String)>,
    ) -> Result<Self, ExperimentError> {
        let mut map = ConfigMap::parse_str(text)?;
        map.apply_env_overrides(ENV_PREFIX, KNOWN_KEYS, vars)?;
        Self::from_map(map)
    }

    pub fn from_map(mut map: ConfigMap) -> Result<Self, ExperimentError> {
        let n_modes = map.take_usize("model.spectrum.n_modes", 16)?;
        let delta = map.take_f64("model.spectrum.delta", 0.5)?;
        let spectrum = SpectrumConfig::new(n_modes, delta)
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        let h = map.take_f64("model.h", 2.0)?;
        if !(h > 0.0) {
            return Err(ExperimentError::Invalid(format!(
                "model.h must be positive, got {h}"
            )));
        }

        let kernel_name = map.take_str("model.nonlinearity.kernel", "gaussian");
        let amplitude = map.take_f64("model.nonlinearity.kernel_amplitude", 0.2)?;
        let width = map.take_f64("model.nonlinearity.kernel_width", 0.5)?;
        let kernel = match kernel_name.as_str() {
            "gaussian" => KernelKind::Gaussian { amplitude, width },
            "cosine" => KernelKind::Cosine { amplitude },
            "zero" => KernelKind::Zero,
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "model.nonlinearity.kernel must be gaussian|cosine|zero, got {other:?}"
                )))
            }
        };
        let b_name = map.take_str("model.nonlinearity.b", "identity");
        let b_gain = map.take_f64("model.nonlinearity.b_gain", 1.0)?;
        let b_limit = map.take_f64("model.nonlinearity.b_limit", 1.0)?;
        let scalar_b = match b_name.as_str() {
            "identity" => ScalarB::Identity { gain: b_gain },
            "tanh" => ScalarB::Tanh { gain: b_gain },
            "clipped" => ScalarB::Clipped {
                gain: b_gain,
                limit: b_limit,
            },
            "zero" => ScalarB::Zero,
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "model.nonlinearity.b must be identity|tanh|clipped|zero, got {other:?}"
                )))
            }
        };
        let grid_points = map.take_usize("model.nonlinearity.grid_points", 128)?;
        let conv = ConvolutionB::new(kernel, scalar_b, grid_points)
            .map_err(|e| ExperimentError::Invalid(e.to_string()))?;

        let delay_kind = map.take_str("model.delay.kind", "threshold");
        let delay = match delay_kind.as_str() {
            "threshold" => {
                let c1 = map.take_f64("model.delay.c1", 0.2)?;
                let c2 = map.take_f64("model.delay.c2", 2.0)?;
                let c3 = map.take_f64("model.delay.c3", 0.5)?;
                let quad_points = map.take_usize("model.delay.quad_points", 129)?;
                DelayFunctional::Threshold(
                    ThresholdDelay::new(c1, c2, c3, h, quad_points)
                        .map_err(|e| ExperimentError::Invalid(e.to_string()))?,
                )
            }
            "constant" => {
                let r = map.take_f64("model.delay.r_const", h / 2.0)?;
                DelayFunctional::constant(r, h)
                    .map_err(|e| ExperimentError::Invalid(e.to_string()))?
            }
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "model.delay.kind must be threshold|constant, got {other:?}"
                )))
            }
        };
        let model = ModelSpec::new(spectrum, conv, delay)?;

        let initial_kind = map.take_str("initial.kind", "bump");
        let amplitude = map.take_f64("initial.amplitude", 0.3)?;
        let mode = map.take_usize("initial.mode", 1)?;
        let cusp_position = map.take_f64("initial.cusp_position", 0.5)?;
        let cusp_sharpness = map.take_f64("initial.cusp_sharpness", 0.01)?;
        let initial = match initial_kind.as_str() {
            "zero" => InitialSpec::Zero,
            "single-mode-decay" => {
                if mode < 1 || mode > model.n_modes() {
                    return Err(ExperimentError::Invalid(format!(
                        "initial.mode must lie in 1..={}, got {mode}",
                        model.n_modes()
                    )));
                }
                InitialSpec::SingleModeDecay { mode, amplitude }
            }
            "bump" => InitialSpec::Bump { amplitude },
            "cusp" => {
                if !(0.0 < cusp_position && cusp_position < 1.0) {
                    return Err(ExperimentError::Invalid(
                        "initial.cusp_position must lie in (0, 1)".into(),
                    ));
                }
                InitialSpec::Cusp {
                    amplitude,
                    position: cusp_position,
                    sharpness: cusp_sharpness,
                }
            }
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "initial.kind must be zero|single-mode-decay|bump|cusp, got {other:?}"
                )))
            }
        };
        let grid_m = map.take_usize("initial.grid_m", 64)?;
        if grid_m < 2 {
            return Err(ExperimentError::Invalid(
                "initial.grid_m must be at least 2".into(),
            ));
        }

        let run_kind = match map.take_str("run.kind", "solve").as_str() {
            "solve" => RunKind::Solve,
            "manifold" => RunKind::Manifold,
            "variational" => RunKind::Variational,
            "certify" => RunKind::Certify,
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "run.kind must be solve|manifold|variational|certify, got {other:?}"
                )))
            }
        };
        let t_final = map.take_f64("run.t_final", 2.0)?;
        if !(t_final > 0.0) {
            return Err(ExperimentError::Invalid(
                "run.t_final must be positive".into(),
            ));
        }
        let seed = map.take_u64("run.seed", 42)?;
        let threads = map.take_usize("run.threads", 0)?;
        let m_t = map.take_usize("run.m_t", 33)?;
        if m_t < 2 {
            return Err(ExperimentError::Invalid("run.m_t must be at least 2".into()));
        }
        let picard_tol = map.take_f64("run.picard_tol", 1e-10)?;
        let max_picard = map.take_usize("run.max_picard", 200)?;
        let oracle_check = map.take_bool("run.oracle_check", false)?;
        let oracle_tol = map.take_f64("run.oracle_tol", 1e-4)?;
        let oracle_dt = map.take_f64("run.oracle_dt", 2e-4)?;
        let fine_m_t = map.take_usize("run.fine_m_t", 65)?;
        let out_dir = map.take_str("run.out_dir", "out");

        let variational_sign = match map.take_str("variational.a_sign", "negative").as_str() {
            "negative" => VariationalSign::NegativeA,
            "positive" => VariationalSign::PositiveA,
            other => {
                return Err(ExperimentError::Invalid(format!(
                    "variational.a_sign must be negative|positive, got {other:?}"
                )))
            }
        };
        let variational_t_eval = map.take_f64("variational.t_eval", 0.3)?;
        let variational_h_steps =
            map.take_f64_list("variational.h_steps", &[1e-2, 1e-3, 1e-4])?;

        map.finish()?;
        Ok(Self {
            model,
            initial,
            grid_m,
            run_kind,
            t_final,
            seed,
            threads,
            solve_opts: SolveOptions {
                m_t,
                picard_tol,
                max_picard,
            },
            oracle_check,
            oracle_tol,
            oracle_dt,
            fine_m_t,
            out_dir,
            variational_sign,
            variational_t_eval,
            variational_h_steps,
        })
    }
}

/// Result of a run: the exit code contract plus the report document.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: serde_json::Value,
    pub files: Vec<PathBuf>,
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| ExperimentError::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(path)
}

/// Executes the configured experiment, writing artifacts into the output
/// directory (trajectory CSV, window log JSON-lines, report JSON).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_override: Option<&Path>,
) -> Result<RunOutcome, ExperimentError> {
    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    std::fs::create_dir_all(&out_dir).map_err(|e| ExperimentError::Io {
        path: out_dir.clone(),
        source: e,
    })?;

    let phi = cfg.initial.build(&cfg.model, cfg.grid_m);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut files = Vec::new();

    let fail = |report: serde_json::Value, files: Vec<PathBuf>| -> Result<RunOutcome, ExperimentError> {
        Ok(RunOutcome {
            exit_code: 2,
            report,
            files,
        })
    };

    match cfg.run_kind {
        RunKind::Solve => {
            let traj = match solve(&phi, &cfg.model, cfg.t_final, &cfg.solve_opts) {
                Ok(t) => t,
                Err(e) => {
                    let report = json!({
                        "run": "solve",
                        "status": "error",
                        "module": diagnose_module(&e.to_string()),
                        "diagnostic": e.to_string(),
                    });
                    files.push(write_file(&out_dir, "report.json", &pretty(&report))?);
                    return fail(report, files);
                }
            };
            files.push(write_file(&out_dir, "trajectory.csv", &traj.to_csv())?);
            files.push(write_file(
                &out_dir,
                "window_log.jsonl",
                &traj.window_log_jsonl(),
            )?);

            let mut checks_pass = true;
            let mut report = json!({
                "run": "solve",
                "t_final": cfg.t_final,
                "seed": cfg.seed,
                "nodes": traj.times.len(),
                "windows": traj.window_log.len(),
                "max_residual": traj.residual_trace.iter().cloned().fold(0.0, f64::max),
                "initial_jump": traj.initial_jump,
            });
            if let Some(slope) = first_window_holder_exponent(&traj, &cfg.model) {
                report["forcing_holder_exponent"] = if slope.is_finite() {
                    json!(slope)
                } else {
                    json!("infinite")
                };
            }
            match &traj.status {
                SolveStatus::Completed => {
                    report["status"] = json!("completed");
                }
                SolveStatus::Aborted { t_reached, reason } => {
                    report["status"] = json!("aborted");
                    report["t_reached"] = json!(t_reached);
                    report["diagnostic"] = json!(reason);
                    report["module"] = json!(diagnose_module(reason));
                    checks_pass = false;
                }
            }
            if cfg.oracle_check && checks_pass {
                let probe = uniqueness_probe(
                    &phi,
                    &cfg.model,
                    cfg.t_final,
                    &ProbeConfig {
                        tolerance: cfg.oracle_tol,
                        dt_base: cfg.oracle_dt,
                        fine_m_t: cfg.fine_m_t,
                        sample_points: 201,
                    },
                );
                match probe {
                    Ok(p) => {
                        report["oracle_divergence"] = json!(p.max_divergence);
                        report["oracle_tolerance"] = json!(p.tolerance);
                        report["oracle_pass"] = json!(p.pass);
                        checks_pass &= p.pass;
                    }
                    Err(e) => {
                        report["diagnostic"] = json!(e.to_string());
                        report["module"] = json!(diagnose_module(&e.to_string()));
                        checks_pass = false;
                    }
                }
            }
            report["pass"] = json!(checks_pass);
            files.push(write_file(&out_dir, "report.json", &pretty(&report))?);
            Ok(RunOutcome {
                exit_code: if checks_pass { 0 } else { 2 },
                report,
                files,
            })
        }
        RunKind::Manifold => {
            let before = match manifold_residual(&phi, &cfg.model) {
                Ok(r) => r,
                Err(e) => return manifold_failure(e, &out_dir, files),
            };
            let (projected, after) = match project_to_manifold(&phi, &cfg.model, &mut rng) {
                Ok(p) => p,
                Err(e) => return manifold_failure(e, &out_dir, files),
            };
            files.push(write_file(&out_dir, "projected_segment.csv", &projected.to_csv())?);
            let report = json!({
                "run": "manifold",
                "seed": cfg.seed,
                "input": serde_json::to_value(&before).unwrap(),
                "projected": serde_json::to_value(&after).unwrap(),
                "pass": after.member,
            });
            files.push(write_file(&out_dir, "report.json", &pretty(&report))?);
            Ok(RunOutcome {
                exit_code: if after.member { 0 } else { 2 },
                report,
                files,
            })
        }
        RunKind::Variational => {
            let check = semiflow_derivative_check(
                &phi,
                &phi_direction(&cfg.model, cfg.grid_m, &mut rng),
                &cfg.model,
                cfg.variational_t_eval,
                &cfg.variational_h_steps,
                cfg.variational_sign,
                &cfg.solve_opts,
                &mut rng,
            );
            match check {
                Ok(rep) => {
                    let report = json!({
                        "run": "variational",
                        "seed": cfg.seed,
                        "check": serde_json::to_value(&rep).unwrap(),
                        "pass": rep.pass,
                    });
                    files.push(write_file(&out_dir, "report.json", &pretty(&report))?);
                    Ok(RunOutcome {
                        exit_code: if rep.pass { 0 } else { 2 },
                        report,
                        files,
                    })
                }
                Err(e) => {
                    let msg = variational_diag(&e);
                    let report = json!({
                        "run": "variational",
                        "status": "error",
                        "module": msg.0,
                        "diagnostic": msg.1,
                    });
                    files.push(write_file(&out_dir, "report.json", &pretty(&report))?);
                    fail(report, files)
                }
            }
        }
        RunKind::Certify => {
            let reports = certify::run_all(cfg.threads, cfg.seed);
            let all_pass = reports.iter().all(|r| r.pass);
            let report = json!({
                "run": "certify",
                "seed": cfg.seed,
                "criteria": serde_json::to_value(&reports).unwrap(),
                "pass": all_pass,
            });
            files.push(write_file(&out_dir, "report.json", &pretty(&report))?);
            Ok(RunOutcome {
                exit_code: if all_pass { 0 } else { 2 },
                report,
                files,
            })
        }
    }
}

fn manifold_failure(
    e: ManifoldError,
    out_dir: &Path,
    mut files: Vec<PathBuf>,
) -> Result<RunOutcome, ExperimentError> {
    let report = json!({
        "run": "manifold",
        "status": "error",
        "module": diagnose_module(&e.to_string()),
        "diagnostic": e.to_string(),
    });
    files.push(write_file(out_dir, "report.json", &pretty(&report))?);
    Ok(RunOutcome {
        exit_code: 2,
        report,
        files,
    })
}

fn variational_diag(e: &VariationalError) -> (&'static str, String) {
    (diagnose_module(&e.to_string()), e.to_string())
}

/// Best-effort attribution of a diagnostic message to the module that
/// raised it, for the failure report.
fn diagnose_module(msg: &str) -> &'static str {
    if msg.contains("threshold") || msg.contains("1/C₃") || msg.contains("root finder") {
        "delay"
    } else if msg.contains("window") || msg.contains("Picard") || msg.contains("contraction") {
        "solver"
    } else if msg.contains("chart") {
        "manifold"
    } else {
        "experiment"
    }
}

fn phi_direction(model: &ModelSpec, _grid_m: usize, rng: &mut ChaCha8Rng) -> HistorySegment {
    crate::manifold::random_direction(model.horizon(), model.n_modes(), rng)
}

/// Sampled Hölder exponent of t ↦ F(u_t) over the first Picard window,
/// reported for regularity studies (cusp data in particular).
fn first_window_holder_exponent(
    traj: &crate::solver::Trajectory,
    model: &ModelSpec,
) -> Option<f64> {
    let w = traj.window_log.first()?;
    let t_window = w.t_window.min(traj.t_end());
    let samples: Option<Vec<(f64, SpectralField)>> = (0..48)
        .map(|i| {
            let t = t_window * i as f64 / 47.0;
            let seg = traj.segment_at(t).ok()?;
            let g = crate::nonlinearity::apply_f(&seg, model).ok()?;
            Some((t, g))
        })
        .collect();
    crate::history::holder_exponent_estimate(&samples?, Some(t_window / 4.0)).ok()
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves() {
        let cfg = ExperimentConfig::parse_str("run.kind = solve\n").unwrap();
        assert_eq!(cfg.run_kind, RunKind::Solve);
        assert_eq!(cfg.model.n_modes(), 16);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn bad_names_are_config_errors() {
        assert!(ExperimentConfig::parse_str("run.kind = dance\n").is_err());
        assert!(ExperimentConfig::parse_str("model.nonlinearity.kernel = sinc\n").is_err());
        assert!(ExperimentConfig::parse_str("initial.kind = wave\n").is_err());
        assert!(ExperimentConfig::parse_str("nonsense.key = 1\n").is_err());
    }

    #[test]
    fn unreachable_threshold_rejected_at_config_time() {
        let text = "model.delay.kind = threshold\nmodel.delay.c3 = 0.1\nmodel.h = 1.0\n";
        let err = ExperimentConfig::parse_str(text).unwrap_err();
        assert!(err.to_string().contains("1/C₃"), "{err}");
    }

    #[test]
    fn zero_model_runs_clean() {
        let text = "\
model.nonlinearity.kernel = zero
model.spectrum.n_modes = 2
initial.kind = zero
run.kind = solve
run.t_final = 0.5
";
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        let dir = std::env::temp_dir().join(format!("sddpde-test-{}", std::process::id()));
        let outcome = run_experiment(&cfg, Some(&dir)).unwrap();
        assert_eq!(outcome.exit_code, 0, "report: {}", outcome.report);
        let csv = std::fs::read_to_string(dir.join("trajectory.csv")).unwrap();
        assert!(csv.lines().count() > 2);
        for line in csv.lines().skip(1) {
            let c1: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
            assert_eq!(c1, 0.0);
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
