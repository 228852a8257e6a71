//! The compatibility manifold: C¹ histories with φ̇(0) + Aφ(0) = F(φ).
//!
//! Histories satisfying the compatibility identity are exactly the ones
//! whose solutions are classically differentiable at t = 0⁺; off the
//! manifold the solution derivative jumps by the residual norm.
//!
//! Projection onto the manifold moves φ along the one-dimensional chart
//! direction a(s) = s·e^{bs} (a(0) = 0, a'(0) = 1, |a| ≤ 1/(eb)): the head
//! value is untouched, the head derivative absorbs the correction, and the
//! fixed-point iteration
//!
//! ```text
//! y ← F(φ + a(·)y) - Aφ(0) - φ̇(0)
//! ```
//!
//! contracts once b dominates the sampled norm of DF.

use crate::delay::DelayError;
use crate::history::{HistoryError, HistorySegment, SegmentEval};
use crate::model::ModelSpec;
use crate::nonlinearity::{apply_df, apply_f};
use crate::spectral::SpectralField;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

pub const MEMBERSHIP_TOL: f64 = 1e-8;
pub const PROJECTION_TOL: f64 = 1e-10;
const CHART_SAMPLES: usize = 64;
const MAX_CORRECTOR_ITERS: usize = 200;

#[derive(Debug, Error)]
pub enum ManifoldError {
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(
        "chart corrector is not contracting (ratios {ratios:?}); increase the chart parameter b \
         (currently {b})"
    )]
    NotContracting { b: f64, ratios: Vec<f64> },
}

/// Compatibility residual of a history, with the membership verdict.
#[derive(Debug, Clone, Serialize)]
pub struct ManifoldReport {
    pub residual_field: SpectralField,
    pub residual_norm: f64,
    pub member: bool,
    pub b_used: f64,
    pub corrector_iters: usize,
}

/// Evaluates φ̇(0) + Aφ(0) - F(φ) and tests membership at the fixed
/// tolerance.
pub fn manifold_residual(
    phi: &HistorySegment,
    model: &ModelSpec,
) -> Result<ManifoldReport, ManifoldError> {
    let field = compatibility_residual(phi, model)?;
    let norm = field.norm_l2();
    Ok(ManifoldReport {
        residual_field: field,
        residual_norm: norm,
        member: norm <= MEMBERSHIP_TOL,
        b_used: 0.0,
        corrector_iters: 0,
    })
}

fn compatibility_residual(
    phi: &HistorySegment,
    model: &ModelSpec,
) -> Result<SpectralField, ManifoldError> {
    let a_head = model
        .spectrum
        .apply_a(&phi.head())
        .expect("validated mode counts");
    let f = apply_f(phi, model)?;
    Ok(&(&phi.head_deriv() + &a_head) - &f)
}

/// Residual of the linearized constraint χ̇(0) + Aχ(0) - DF(φ)χ; zero for
/// tangent directions.
pub fn tangency_residual(
    phi: &HistorySegment,
    chi: &HistorySegment,
    model: &ModelSpec,
) -> Result<SpectralField, ManifoldError> {
    let a_head = model
        .spectrum
        .apply_a(&chi.head())
        .expect("validated mode counts");
    let df = apply_df(phi, chi, model)?;
    Ok(&(&chi.head_deriv() + &a_head) - &df)
}

/// Chart parameter estimate: samples ‖DF(φ)χ‖ over random unit-C¹
/// directions and returns 2e·(max) + 1, which leaves the corrector a
/// contraction factor of at most 1/2 plus margin.
pub fn estimate_b(
    phi: &HistorySegment,
    model: &ModelSpec,
    rng: &mut impl Rng,
) -> Result<f64, ManifoldError> {
    let h = phi.horizon();
    let n = phi.n_modes();
    let mut max_norm = 0.0f64;
    for _ in 0..CHART_SAMPLES {
        let chi = random_direction(h, n, rng);
        let (_, c1) = chi.norms_c1();
        if c1 == 0.0 {
            continue;
        }
        let df = apply_df(phi, &chi.scale(1.0 / c1), model)?;
        max_norm = max_norm.max(df.norm_l2());
    }
    Ok(2.0 * std::f64::consts::E * max_norm + 1.0)
}

pub fn random_direction(h: f64, n_modes: usize, rng: &mut impl Rng) -> HistorySegment {
    random_direction_with_decay(h, n_modes, 1, rng)
}

/// Random C¹ history with coefficient decay 1/k^decay; higher decay keeps
/// ‖Aφ(0)‖ moderate after projection.
pub fn random_direction_with_decay(
    h: f64,
    n_modes: usize,
    decay: u32,
    rng: &mut impl Rng,
) -> HistorySegment {
    let params: Vec<(f64, f64, f64)> = (0..n_modes)
        .map(|k| {
            let weight = ((k + 1) as f64).powi(decay as i32);
            (
                rng.gen_range(-1.0..1.0) / weight,
                rng.gen_range(-1.0..1.0) / weight,
                rng.gen_range(0.0..2.0),
            )
        })
        .collect();
    let value = {
        let params = params.clone();
        move |t: f64| {
            SpectralField::new(
                params
                    .iter()
                    .map(|(a, b, w)| a * (w * t).cos() + b * (w * t).sin())
                    .collect(),
            )
        }
    };
    let deriv = move |t: f64| {
        SpectralField::new(
            params
                .iter()
                .map(|(a, b, w)| w * (-a * (w * t).sin() + b * (w * t).cos()))
                .collect(),
        )
    };
    HistorySegment::from_fn(h, 32, value, deriv)
}

/// φ shifted along the chart direction: values gain a(θ)·y, derivatives
/// gain a'(θ)·y, with a(s) = s·e^{bs}.
fn shift_along_chart(phi: &HistorySegment, b: f64, y: &SpectralField) -> HistorySegment {
    let grid = phi.grid().to_vec();
    let values = grid
        .iter()
        .zip(phi.node_values())
        .map(|(&s, v)| v.axpy(s * (b * s).exp(), y))
        .collect();
    let derivs = grid
        .iter()
        .zip(phi.node_derivs())
        .map(|(&s, d)| d.axpy((b * s).exp() * (1.0 + b * s), y))
        .collect();
    HistorySegment::new(grid, values, derivs).expect("chart shift preserves the grid")
}

fn correct_along_chart(
    phi: &HistorySegment,
    b: f64,
    residual: impl Fn(&HistorySegment) -> Result<SpectralField, ManifoldError>,
) -> Result<(HistorySegment, usize), ManifoldError> {
    let n = phi.n_modes();
    let mut y = SpectralField::zero(n);
    let mut last_norms: Vec<f64> = Vec::new();
    for iter in 1..=MAX_CORRECTOR_ITERS {
        let shifted = shift_along_chart(phi, b, &y);
        let g = residual(&shifted)?;
        let step = g.norm_l2();
        if step <= PROJECTION_TOL {
            return Ok((shifted, iter - 1));
        }
        y = &y - &g;
        last_norms.push(step);
        if last_norms.len() >= 4 {
            let k = last_norms.len();
            let growing = (k - 3..k).all(|i| last_norms[i] >= last_norms[i - 1] * (1.0 - 1e-12));
            if growing {
                return Err(ManifoldError::NotContracting {
                    b,
                    ratios: last_norms[k.saturating_sub(4)..]
                        .windows(2)
                        .map(|w| w[1] / w[0])
                        .collect(),
                });
            }
        }
    }
    Err(ManifoldError::NotContracting {
        b,
        ratios: last_norms
            .iter()
            .rev()
            .take(3)
            .rev()
            .copied()
            .collect(),
    })
}

/// Projects a history onto the compatibility manifold along the chart
/// direction, leaving φ(0) fixed and shifting φ̇(0) by the computed
/// correction. Returns the corrected segment with its residual report.
pub fn project_to_manifold(
    phi: &HistorySegment,
    model: &ModelSpec,
    rng: &mut impl Rng,
) -> Result<(HistorySegment, ManifoldReport), ManifoldError> {
    let initial = manifold_residual(phi, model)?;
    if initial.member {
        return Ok((phi.clone(), initial));
    }
    let b = estimate_b(phi, model, rng)?;
    let (corrected, iters) =
        correct_along_chart(phi, b, |seg| compatibility_residual(seg, model))?;
    let mut report = manifold_residual(&corrected, model)?;
    report.b_used = b;
    report.corrector_iters = iters;
    Ok((corrected, report))
}

/// Projects a direction onto the tangent space of the manifold at φ
/// (which must itself satisfy the compatibility identity), using the same
/// chart machinery on the linearized constraint.
pub fn project_to_tangent(
    phi: &HistorySegment,
    chi: &HistorySegment,
    model: &ModelSpec,
    rng: &mut impl Rng,
) -> Result<HistorySegment, ManifoldError> {
    let rho = tangency_residual(phi, chi, model)?;
    if rho.norm_l2() <= PROJECTION_TOL {
        return Ok(chi.clone());
    }
    let b = estimate_b(phi, model, rng)?;
    let (corrected, _) = correct_along_chart(chi, b, |seg| tangency_residual(phi, seg, model))?;
    Ok(corrected)
}
