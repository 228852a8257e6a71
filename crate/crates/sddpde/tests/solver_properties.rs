//! Cross-module solver properties: the variation-of-constants identity
//! checked by independent quadrature, the semiflow composition law, and the
//! cocycle property of the linearized flow.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sddpde::delay::{DelayFunctional, ThresholdDelay};
use sddpde::manifold::project_to_manifold;
use sddpde::nonlinearity::{apply_f, ConvolutionB, KernelKind, ScalarB};
use sddpde::solver::{solve, SolveOptions};
use sddpde::spectral::{SpectralField, SpectrumConfig};
use sddpde::variational::{solve_variational, VariationalSign};
use sddpde::{HistorySegment, ModelSpec, SegmentEval};

fn threshold_model(n_modes: usize) -> ModelSpec {
    ModelSpec::new(
        SpectrumConfig::new(n_modes, 0.5).unwrap(),
        ConvolutionB::new(
            KernelKind::Gaussian {
                amplitude: 0.2,
                width: 0.5,
            },
            ScalarB::Tanh { gain: 1.0 },
            128,
        )
        .unwrap(),
        DelayFunctional::Threshold(ThresholdDelay::new(0.2, 2.0, 0.5, 2.0, 129).unwrap()),
    )
    .unwrap()
}

fn bump(model: &ModelSpec, amplitude: f64) -> HistorySegment {
    let h = model.horizon();
    let n = model.n_modes();
    let width = 0.25 * h;
    let center = -0.5 * h;
    HistorySegment::from_fn(
        h,
        64,
        move |t| {
            let g = (-((t - center) / width).powi(2)).exp();
            let mut f = SpectralField::zero(n);
            f.coeffs[0] = amplitude * g;
            f.coeffs[1] = 0.3 * amplitude * g;
            f
        },
        move |t| {
            let g = (-((t - center) / width).powi(2)).exp();
            let dg = -2.0 * (t - center) / (width * width) * g;
            let mut f = SpectralField::zero(n);
            f.coeffs[0] = amplitude * dg;
            f.coeffs[1] = 0.3 * amplitude * dg;
            f
        },
    )
}

/// u(t) = e^{-At}φ(0) + ∫₀ᵗ e^{-A(t-s)}F(u_s) ds, with the integral
/// re-evaluated by composite Simpson on a grid unrelated to the solver's.
#[test]
fn mild_solution_identity_holds_under_independent_quadrature() {
    let model = threshold_model(16);
    let phi = bump(&model, 0.3);
    let traj = solve(&phi, &model, 1.0, &SolveOptions::default()).unwrap();

    for &t in &[0.25, 0.5, 1.0] {
        let intervals = 2000usize;
        let ds = t / intervals as f64;
        let n = model.n_modes();
        let mut integral = SpectralField::zero(n);
        for j in 0..=intervals {
            let s = j as f64 * ds;
            let seg = traj.segment_at(s).unwrap();
            let f = apply_f(&seg, &model).unwrap();
            let w = if j == 0 || j == intervals {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            for k in 0..n {
                let lam = model.spectrum.eigenvalues[k];
                integral.coeffs[k] += w * (-lam * (t - s)).exp() * f.coeffs[k];
            }
        }
        for c in integral.coeffs.iter_mut() {
            *c *= ds / 3.0;
        }
        let propagated = model.spectrum.semigroup(t, &phi.head()).unwrap();
        let expected = &propagated + &integral;
        let got = traj.eval(t).unwrap();
        let err = (&got - &expected).norm_l2();
        assert!(err < 1e-6, "identity residual {err} at t = {t}");
    }
}

/// Solving for t₁+t₂ equals solving for t₁, restarting from u_{t₁}, and
/// solving for t₂.
#[test]
fn semiflow_composition_law() {
    let model = threshold_model(8);
    let phi = bump(&model, 0.3);
    let opts = SolveOptions::default();
    let (t1, t2) = (0.4, 0.4);

    let full = solve(&phi, &model, t1 + t2, &opts).unwrap();
    let first = solve(&phi, &model, t1, &opts).unwrap();
    let restart = solve(&first.segment_at(t1).unwrap(), &model, t2, &opts).unwrap();

    let end_full = full.segment_at(t1 + t2).unwrap();
    let end_restart = restart.segment_at(t2).unwrap();
    let mut sup = 0.0f64;
    for i in 0..=40 {
        let theta = -model.horizon() + model.horizon() * i as f64 / 40.0;
        let a = end_full.eval(theta).unwrap();
        let b = end_restart.eval(theta).unwrap();
        sup = sup.max((&a - &b).norm_l2());
    }
    assert!(sup < 1e-6, "composition mismatch {sup}");
}

/// Restarting the variational solve at t₁ with v_{t₁} along the shifted
/// base reproduces the one-shot solve at t₁+t₂.
#[test]
fn variational_cocycle_property() {
    let model = threshold_model(8);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let raw = bump(&model, 0.3);
    let (phi, _) = project_to_manifold(&raw, &model, &mut rng).unwrap();
    let chi = bump(&model, 1.0);
    let opts = SolveOptions::default();
    let (t1, t2) = (0.3, 0.3);

    let base_full = solve(&phi, &model, t1 + t2, &opts).unwrap();
    let v_full =
        solve_variational(&base_full, &chi, &model, VariationalSign::NegativeA, &opts).unwrap();

    let base_first = solve(&phi, &model, t1, &opts).unwrap();
    let v_first =
        solve_variational(&base_first, &chi, &model, VariationalSign::NegativeA, &opts).unwrap();
    let base_shift = solve(&base_first.segment_at(t1).unwrap(), &model, t2, &opts).unwrap();
    let v_restart = solve_variational(
        &base_shift,
        &v_first.segment_at(t1).unwrap(),
        &model,
        VariationalSign::NegativeA,
        &opts,
    )
    .unwrap();

    let one_shot = v_full.segment_at(t1 + t2).unwrap();
    let composed = v_restart.segment_at(t2).unwrap();
    let mut sup = 0.0f64;
    for i in 0..=40 {
        let theta = -model.horizon() + model.horizon() * i as f64 / 40.0;
        let a = one_shot.eval(theta).unwrap();
        let b = composed.eval(theta).unwrap();
        sup = sup.max((&a - &b).norm_l2());
    }
    assert!(sup < 1e-5, "cocycle mismatch {sup}");
}
