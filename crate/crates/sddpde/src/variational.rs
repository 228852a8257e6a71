//! Linearized flow along a computed trajectory: the numerical witness that
//! the solution semiflow is C¹ on the compatibility manifold.
//!
//! Along a base path x(t) the derivative of the semiflow in direction χ is
//! the solution of the linear delay equation
//!
//! ```text
//! v̇(t) + Av(t) = DF(x_t)·v_t,   v_0 = χ,
//! ```
//!
//! integrated with the same exponential-quadrature Picard windows as the
//! base solve (the problem is linear, so the base windows keep the
//! iteration contracting). The flipped convention v̇ = +Av + DF(x_t)v_t is
//! exposed as well: for a dissipative operator it is not the derivative of
//! the flow, and the finite-difference check is expected to reject it.

use crate::history::{HistoryError, HistorySegment, SegmentEval};
use crate::manifold::{project_to_manifold, project_to_tangent, ManifoldError};
use crate::model::ModelSpec;
use crate::nonlinearity::{apply_df_hinted, build_ledger};
use crate::solver::{
    plan_window, run_picard_window, solve_with_plan, SolveOptions, SolveStatus, SolverError,
    Trajectory,
};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VariationalError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("invalid variational input: {0}")]
    BadInput(String),
}

/// Sign of the linear term in the variational equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VariationalSign {
    /// v̇ + Av = DF(x_t)v_t — the linearization of the state equation.
    NegativeA,
    /// v̇ = Av + DF(x_t)v_t — flipped convention, kept for comparison.
    PositiveA,
}

/// Solves the variational equation along `base` with initial direction χ.
/// The returned trajectory's history is χ and its nodes align with the
/// base windows.
pub fn solve_variational(
    base: &Trajectory,
    chi: &HistorySegment,
    model: &ModelSpec,
    sign: VariationalSign,
    opts: &SolveOptions,
) -> Result<Trajectory, VariationalError> {
    if base.window_log.is_empty() {
        return Err(VariationalError::BadInput(
            "base trajectory must come from the Picard solver".into(),
        ));
    }
    if let SolveStatus::Aborted { t_reached, .. } = &base.status {
        return Err(VariationalError::BadInput(format!(
            "base trajectory aborted at t = {t_reached}"
        )));
    }
    if chi.n_modes() != model.n_modes()
        || (chi.horizon() - model.horizon()).abs() > 1e-12 * model.horizon()
    {
        return Err(VariationalError::BadInput(
            "direction must match the model's mode count and horizon".into(),
        ));
    }

    let rates: Vec<f64> = match sign {
        VariationalSign::NegativeA => model.spectrum.eigenvalues.iter().map(|l| -l).collect(),
        VariationalSign::PositiveA => model.spectrum.eigenvalues.clone(),
    };
    // The base path is fixed, so its delay roots can seed each other as the
    // sweep revisits the same node times.
    let root_hint = std::cell::Cell::new(None::<f64>);
    let rhs = move |view: &dyn SegmentEval, t_abs: f64| {
        let base_view = base.view_at(t_abs);
        let (f, r) = apply_df_hinted(&base_view, view, model, root_hint.get())?;
        root_hint.set(Some(r));
        Ok(f)
    };

    let mut traj = Trajectory {
        hist: chi.clone(),
        times: Vec::new(),
        values: Vec::new(),
        derivs: Vec::new(),
        delay_trace: Vec::new(),
        residual_trace: Vec::new(),
        window_log: Vec::new(),
        status: SolveStatus::Completed,
        initial_jump: 0.0,
    };
    let mut seg = chi.clone();
    for w in &base.window_log {
        let win = run_picard_window(
            &seg,
            &rates,
            &rhs,
            w.t_start,
            w.t_window,
            w.predicted_contraction,
            w.epsilon,
            opts.m_t,
            opts.picard_tol,
            opts.max_picard,
        )?;
        let skip = usize::from(w.t_start > 0.0);
        for i in skip..win.rel_times.len() {
            traj.times.push(w.t_start + win.rel_times[i]);
            traj.values.push(win.values[i].clone());
            traj.derivs.push(win.derivs[i].clone());
            traj.residual_trace.push(win.residuals[i]);
            traj.delay_trace.push(f64::NAN); // delay belongs to the base path
        }
        traj.window_log.push(win.diag);
        let t_cur = traj.t_end();
        if (t_cur - base.t_end()).abs() > 1e-12 {
            seg = traj.segment_at(t_cur)?;
        }
    }
    traj.initial_jump = (&traj.derivs[0] - &chi.head_deriv()).norm_l2();
    Ok(traj)
}

/// One finite-difference comparison row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FdSample {
    pub h_step: f64,
    pub relative_error: f64,
}

/// Report of the semiflow derivative check.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeCheckReport {
    pub sign: VariationalSign,
    pub t_eval: f64,
    pub fd_comparison: Vec<FdSample>,
    /// Least-squares slope of log(error) against log(h).
    pub fitted_order: f64,
    pub errors_decrease: bool,
    pub smallest_error: f64,
    pub pass: bool,
}

/// Multiplicative slack and absolute floor for the "errors decrease"
/// verdict; the floor covers Picard stopping noise amplified by 1/(2h).
const DECREASE_SLACK: f64 = 1.05;
const NOISE_FLOOR: f64 = 1e-6;

/// Verifies that the variational solution is the derivative of the flow:
/// central finite-difference quotients of the semiflow through re-projected
/// initial data must converge to v_t as the step h shrinks.
///
/// φ is projected onto the manifold and χ onto its tangent space first; all
/// solves share one frozen window plan so the quotient differentiates a
/// fixed discretization.
#[allow(clippy::too_many_arguments)]
pub fn semiflow_derivative_check(
    phi: &HistorySegment,
    chi: &HistorySegment,
    model: &ModelSpec,
    t_eval: f64,
    h_steps: &[f64],
    sign: VariationalSign,
    opts: &SolveOptions,
    rng: &mut impl Rng,
) -> Result<DerivativeCheckReport, VariationalError> {
    if h_steps.is_empty() {
        return Err(VariationalError::BadInput("need at least one step".into()));
    }
    let mut steps = h_steps.to_vec();
    steps.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let (phi_m, _) = project_to_manifold(phi, model, rng)?;
    // The quotient forms φ ± h·χ, which needs a shared grid.
    let chi = if chi.grid() == phi_m.grid() {
        chi.clone()
    } else {
        chi.resample_to(phi_m.grid())?
    };
    let chi_t = project_to_tangent(&phi_m, &chi, model, rng)?;

    let (_, c1) = phi_m.norms_c1();
    let epsilon = 2.0 * (c1 + 1.0);
    let plan = plan_window(model, &build_ledger(model, epsilon), epsilon)?;

    let base = solve_with_plan(&phi_m, model, t_eval, opts, &plan)?;
    let v = solve_variational(&base, &chi_t, model, sign, opts)?;
    let v_t = v.segment_at(t_eval)?;
    let (_, v_norm) = v_t.norms_c1();
    if v_norm == 0.0 {
        return Err(VariationalError::BadInput(
            "variational solution vanished; relative errors undefined".into(),
        ));
    }

    let mut fd_comparison = Vec::with_capacity(steps.len());
    for &h in &steps {
        let plus = project_to_manifold(&phi_m.axpy(h, &chi_t)?, model, rng)?.0;
        let minus = project_to_manifold(&phi_m.axpy(-h, &chi_t)?, model, rng)?.0;
        let tp = solve_with_plan(&plus, model, t_eval, opts, &plan)?;
        let tm = solve_with_plan(&minus, model, t_eval, opts, &plan)?;
        let quotient = tp
            .segment_at(t_eval)?
            .axpy(-1.0, &tm.segment_at(t_eval)?)?
            .scale(0.5 / h);
        let diff = quotient.axpy(-1.0, &v_t)?;
        let (_, err) = diff.norms_c1();
        fd_comparison.push(FdSample {
            h_step: h,
            relative_error: err / v_norm,
        });
    }

    let errors_decrease = fd_comparison
        .windows(2)
        .all(|w| w[1].relative_error <= w[0].relative_error * DECREASE_SLACK + NOISE_FLOOR);
    let smallest_error = fd_comparison.last().unwrap().relative_error;

    let fitted_order = if fd_comparison.len() >= 2 {
        let xs: Vec<f64> = fd_comparison.iter().map(|s| s.h_step.ln()).collect();
        let ys: Vec<f64> = fd_comparison
            .iter()
            .map(|s| s.relative_error.max(1e-300).ln())
            .collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            0.0
        }
    } else {
        0.0
    };

    let pass = errors_decrease && smallest_error <= 1e-3;
    Ok(DerivativeCheckReport {
        sign,
        t_eval,
        fd_comparison,
        fitted_order,
        errors_decrease,
        smallest_error,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::DelayFunctional;
    use crate::manifold::tangency_residual;
    use crate::nonlinearity::{ConvolutionB, KernelKind, ScalarB};
    use crate::solver::solve;
    use crate::spectral::{SpectralField, SpectrumConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear_model(n: usize, kappa: f64, r0: f64, h: f64) -> ModelSpec {
        ModelSpec::new(
            SpectrumConfig::new(n, 0.5).unwrap(),
            ConvolutionB::new(
                KernelKind::Cosine {
                    amplitude: kappa / crate::spectral::MODE_NORM_SQ,
                },
                ScalarB::Identity { gain: 1.0 },
                64,
            )
            .unwrap(),
            DelayFunctional::constant(r0, h).unwrap(),
        )
        .unwrap()
    }

    fn smooth_segment(n: usize, h: f64, scale: f64, seed: u64) -> HistorySegment {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        crate::manifold::random_direction(h, n, &mut rng).scale(scale)
    }

    #[test]
    fn zero_direction_gives_zero_solution() {
        let model = linear_model(2, 0.4, 0.5, 1.0);
        let phi = smooth_segment(2, 1.0, 0.3, 1);
        let base = solve(&phi, &model, 1.0, &SolveOptions::default()).unwrap();
        let chi = HistorySegment::constant(1.0, 16, &SpectralField::zero(2));
        let v = solve_variational(&base, &chi, &model, VariationalSign::NegativeA, &SolveOptions::default())
            .unwrap();
        assert!(v.values.iter().all(|f| f.norm_l2() == 0.0));
    }

    #[test]
    fn linear_autonomous_variational_equals_base_equation() {
        // For b = identity with constant delay, DF(x_t)v_t = B(v(t-r₀)):
        // the variational equation is the state equation itself.
        let model = linear_model(2, 0.4, 0.5, 1.0);
        let phi = smooth_segment(2, 1.0, 0.3, 2);
        let base = solve(&phi, &model, 1.5, &SolveOptions::default()).unwrap();
        let chi = smooth_segment(2, 1.0, 0.2, 3);
        let v = solve_variational(&base, &chi, &model, VariationalSign::NegativeA, &SolveOptions::default())
            .unwrap();
        let direct = solve(&chi, &model, 1.5, &SolveOptions::default()).unwrap();
        for s in 0..=30 {
            let t = 1.5 * s as f64 / 30.0;
            let a = v.eval(t).unwrap();
            let b = direct.eval(t).unwrap();
            assert!((&a - &b).norm_l2() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn variational_is_linear_in_the_direction() {
        let model = ModelSpec::new(
            SpectrumConfig::new(3, 0.5).unwrap(),
            ConvolutionB::new(
                KernelKind::Gaussian { amplitude: 0.3, width: 0.6 },
                ScalarB::Tanh { gain: 1.0 },
                64,
            )
            .unwrap(),
            DelayFunctional::constant(0.6, 1.2).unwrap(),
        )
        .unwrap();
        let phi = smooth_segment(3, 1.2, 0.4, 4);
        let base = solve(&phi, &model, 1.0, &SolveOptions::default()).unwrap();
        let chi1 = smooth_segment(3, 1.2, 0.5, 5);
        let chi2 = smooth_segment(3, 1.2, 0.5, 6);
        let opts = SolveOptions::default();
        let v1 = solve_variational(&base, &chi1, &model, VariationalSign::NegativeA, &opts).unwrap();
        let v2 = solve_variational(&base, &chi2, &model, VariationalSign::NegativeA, &opts).unwrap();
        let combo = chi1.scale(1.3).axpy(-0.7, &chi2).unwrap();
        let vc = solve_variational(&base, &combo, &model, VariationalSign::NegativeA, &opts).unwrap();
        for i in 0..vc.times.len() {
            let expect = v1.values[i].scale(1.3).axpy(-0.7, &v2.values[i]);
            assert!(
                (&vc.values[i] - &expect).norm_l2() < 1e-9,
                "node {i}: superposition violated"
            );
        }
    }

    #[test]
    fn initial_derivative_jump_equals_tangency_residual() {
        let model = ModelSpec::new(
            SpectrumConfig::new(2, 0.5).unwrap(),
            ConvolutionB::new(
                KernelKind::Gaussian { amplitude: 0.3, width: 0.6 },
                ScalarB::Tanh { gain: 1.0 },
                64,
            )
            .unwrap(),
            DelayFunctional::constant(0.6, 1.2).unwrap(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw = smooth_segment(2, 1.2, 0.4, 8);
        let (phi, _) = project_to_manifold(&raw, &model, &mut rng).unwrap();
        let base = solve(&phi, &model, 0.8, &SolveOptions::default()).unwrap();

        let chi_raw = smooth_segment(2, 1.2, 0.5, 9);
        let rho = tangency_residual(&phi, &chi_raw, &model).unwrap().norm_l2();
        let v = solve_variational(&base, &chi_raw, &model, VariationalSign::NegativeA, &SolveOptions::default())
            .unwrap();
        assert!(
            (v.initial_jump - rho).abs() <= 1e-9 * (1.0 + rho),
            "jump {} vs residual {rho}",
            v.initial_jump
        );

        let chi_t = project_to_tangent(&phi, &chi_raw, &model, &mut rng).unwrap();
        let v = solve_variational(&base, &chi_t, &model, VariationalSign::NegativeA, &SolveOptions::default())
            .unwrap();
        assert!(v.initial_jump <= 1e-8, "tangent jump {}", v.initial_jump);
    }

    #[test]
    fn derivative_check_is_exact_for_the_free_equation() {
        // B ≡ 0: the semiflow is linear, so every quotient equals v.
        let model = ModelSpec::new(
            SpectrumConfig::new(2, 0.5).unwrap(),
            ConvolutionB::new(KernelKind::Zero, ScalarB::Identity { gain: 1.0 }, 64).unwrap(),
            DelayFunctional::constant(0.5, 1.0).unwrap(),
        )
        .unwrap();
        let phi = smooth_segment(2, 1.0, 0.4, 20);
        let chi = smooth_segment(2, 1.0, 1.0, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let report = semiflow_derivative_check(
            &phi,
            &chi,
            &model,
            0.5,
            &[1e-2, 1e-3, 1e-4],
            VariationalSign::NegativeA,
            &SolveOptions::default(),
            &mut rng,
        )
        .unwrap();
        assert!(report.pass);
        for s in &report.fd_comparison {
            assert!(s.relative_error < 1e-9, "h={}: {}", s.h_step, s.relative_error);
        }
    }

    #[test]
    fn derivative_check_passes_with_negative_a_and_fails_with_positive_a() {
        let model = ModelSpec::new(
            SpectrumConfig::new(2, 0.5).unwrap(),
            ConvolutionB::new(
                KernelKind::Gaussian { amplitude: 0.35, width: 0.6 },
                ScalarB::Tanh { gain: 1.0 },
                64,
            )
            .unwrap(),
            DelayFunctional::constant(0.6, 1.2).unwrap(),
        )
        .unwrap();
        let phi = smooth_segment(2, 1.2, 0.4, 10);
        let chi = smooth_segment(2, 1.2, 1.0, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let opts = SolveOptions::default();
        let report = semiflow_derivative_check(
            &phi,
            &chi,
            &model,
            0.4,
            &[1e-2, 1e-3, 1e-4],
            VariationalSign::NegativeA,
            &opts,
            &mut rng,
        )
        .unwrap();
        assert!(report.pass, "report: {report:?}");

        let flipped = semiflow_derivative_check(
            &phi,
            &chi,
            &model,
            0.4,
            &[1e-2, 1e-3, 1e-4],
            VariationalSign::PositiveA,
            &opts,
            &mut rng,
        )
        .unwrap();
        assert!(!flipped.pass, "flipped sign must fail: {flipped:?}");
    }
}
