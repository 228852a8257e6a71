//! State-dependent delay functionals r: C([-h,0]; L²) → [0, h].
//!
//! The threshold delay defines r(φ) implicitly by accumulating
//!
//! ```text
//! R(r; φ) = ∫_{-r}^0 [ C₁ / (C₂ + ‖φ(s)‖²) + C₃ ] ds = 1,
//! ```
//!
//! so the lag is the time needed for the integral of the state to reach a
//! fixed level. R is strictly increasing in r with slope at least C₃, which
//! makes the root-find unconditionally safe. A constant-delay functional is
//! provided under the same interface (with zero derivative) for baselines
//! and oracles.

use crate::history::SegmentEval;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const DEFAULT_QUAD_POINTS: usize = 129;

#[derive(Debug, Error)]
pub enum DelayError {
    #[error("invalid threshold config: {0}")]
    InvalidConfig(String),
    #[error(
        "threshold unreachable: R(h; φ) = {r_at_h:.6} < 1; the configuration must satisfy \
         r ≤ 1/C₃ = {r_max:.6} ≤ h = {h:.6}"
    )]
    Unreachable { r_at_h: f64, r_max: f64, h: f64 },
    #[error("root finder failed to reach tolerance {tol} (residual {residual})")]
    NoConvergence { tol: f64, residual: f64 },
}

/// Threshold-condition coefficients. `quad_points` controls the composite
/// Simpson rule used for the s-integrals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdDelay {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub h: f64,
    pub quad_points: usize,
}

impl ThresholdDelay {
    pub fn new(c1: f64, c2: f64, c3: f64, h: f64, quad_points: usize) -> Result<Self, DelayError> {
        if !(c1 >= 0.0 && c1.is_finite()) {
            return Err(DelayError::InvalidConfig(format!("C₁ must be ≥ 0, got {c1}")));
        }
        if !(c2 > 0.0 && c3 > 0.0) || !c2.is_finite() || !c3.is_finite() {
            return Err(DelayError::InvalidConfig(format!(
                "C₂, C₃ must be positive, got {c2}, {c3}"
            )));
        }
        if !(h > 0.0) {
            return Err(DelayError::InvalidConfig(format!("horizon must be positive, got {h}")));
        }
        if quad_points < 3 {
            return Err(DelayError::InvalidConfig("need at least 3 quadrature points".into()));
        }
        Ok(Self { c1, c2, c3, h, quad_points })
    }

    /// Configuration-time solvability check: r(φ) ≤ 1/C₃ must fit in [0, h].
    pub fn ensure_solvable(&self) -> Result<(), DelayError> {
        if self.c3.recip() > self.h * (1.0 + 1e-12) {
            return Err(DelayError::Unreachable {
                r_at_h: self.c3 * self.h,
                r_max: self.c3.recip(),
                h: self.h,
            });
        }
        Ok(())
    }

    /// Lower and upper bounds for every delay root:
    /// (C₁/C₂ + C₃)⁻¹ ≤ r(φ) ≤ C₃⁻¹.
    pub fn root_bounds(&self) -> (f64, f64) {
        ((self.c1 / self.c2 + self.c3).recip(), self.c3.recip())
    }

    fn integrand<S: SegmentEval + ?Sized>(&self, seg: &S, s: f64) -> f64 {
        let v = seg.value(s);
        let norm_sq = v.inner(&v);
        self.c1 / (self.c2 + norm_sq) + self.c3
    }
}

/// Result of a delay solve: the root, the slope D_r R at the root (the
/// denominator of the delay derivative) and the threshold residual.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DelayValue {
    pub r: f64,
    pub d_r_slope: f64,
    pub residual: f64,
}

/// Composite Simpson over [a, b] with at least `points` nodes (odd count).
fn simpson(points: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = if points % 2 == 1 { points } else { points + 1 };
    let m = n - 1; // even number of intervals
    let dx = (b - a) / m as f64;
    let mut sum = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * dx);
    }
    sum * dx / 3.0
}

/// Accumulated threshold integral R(r; φ) for r ∈ [0, h].
pub fn threshold_integral<S: SegmentEval + ?Sized>(r: f64, seg: &S, cfg: &ThresholdDelay) -> f64 {
    debug_assert!((0.0..=cfg.h * (1.0 + 1e-12)).contains(&r));
    simpson(cfg.quad_points, -r, 0.0, |s| cfg.integrand(seg, s))
}

/// Delay functional: the implicit threshold delay or a constant baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DelayFunctional {
    Threshold(ThresholdDelay),
    Constant { r: f64, h: f64 },
}

impl DelayFunctional {
    pub fn constant(r: f64, h: f64) -> Result<Self, DelayError> {
        if !(r >= 0.0 && r <= h && h > 0.0) {
            return Err(DelayError::InvalidConfig(format!(
                "constant delay must satisfy 0 ≤ r ≤ h, got r={r}, h={h}"
            )));
        }
        Ok(DelayFunctional::Constant { r, h })
    }

    pub fn horizon(&self) -> f64 {
        match self {
            DelayFunctional::Threshold(cfg) => cfg.h,
            DelayFunctional::Constant { h, .. } => *h,
        }
    }

    pub fn ensure_solvable(&self) -> Result<(), DelayError> {
        match self {
            DelayFunctional::Threshold(cfg) => cfg.ensure_solvable(),
            DelayFunctional::Constant { .. } => Ok(()),
        }
    }

    pub fn solve<S: SegmentEval + ?Sized>(&self, seg: &S) -> Result<DelayValue, DelayError> {
        self.solve_hinted(seg, DEFAULT_ROOT_TOL, None)
    }

    pub fn solve_with_tol<S: SegmentEval + ?Sized>(
        &self,
        seg: &S,
        tol: f64,
    ) -> Result<DelayValue, DelayError> {
        self.solve_hinted(seg, tol, None)
    }

    /// Finds r with |R(r; φ) - 1| ≤ tol: a short bisection phase narrows
    /// the analytic bracket, then safeguarded Newton polishes. Monotonicity
    /// (dR/dr ≥ C₃ > 0) keeps both phases safe. A `hint` (e.g. the root at
    /// a nearby history) seeds Newton directly, which typically converges
    /// in two or three quadratures.
    pub fn solve_hinted<S: SegmentEval + ?Sized>(
        &self,
        seg: &S,
        tol: f64,
        hint: Option<f64>,
    ) -> Result<DelayValue, DelayError> {
        let cfg = match self {
            DelayFunctional::Constant { r, .. } => {
                return Ok(DelayValue {
                    r: *r,
                    d_r_slope: f64::INFINITY,
                    residual: 0.0,
                });
            }
            DelayFunctional::Threshold(cfg) => cfg,
        };

        // Widen the analytic bracket a hair: the root can sit exactly on a
        // bound (constant integrand), which would stall the safeguard.
        let (b_lo, b_hi) = cfg.root_bounds();
        let mut lo = (b_lo * (1.0 - 1e-9)).clamp(0.0, cfg.h);
        let mut hi = (b_hi * (1.0 + 1e-9)).min(cfg.h);

        let mut r;
        let mut residual;
        match hint {
            Some(hint) if hint > lo && hint < hi => {
                r = hint;
                residual = threshold_integral(r, seg, cfg) - 1.0;
                if residual > 0.0 {
                    hi = r;
                } else {
                    lo = r;
                }
            }
            _ => {
                if threshold_integral(hi, seg, cfg) < 1.0 {
                    // Threshold not reached within the analytic bound; check
                    // reachability on the full horizon.
                    let r_at_h = threshold_integral(cfg.h, seg, cfg);
                    if r_at_h < 1.0 {
                        return Err(DelayError::Unreachable {
                            r_at_h,
                            r_max: cfg.c3.recip(),
                            h: cfg.h,
                        });
                    }
                    hi = cfg.h;
                }
                if threshold_integral(lo, seg, cfg) > 1.0 {
                    lo = 0.0;
                }
                for _ in 0..3 {
                    let mid = 0.5 * (lo + hi);
                    if threshold_integral(mid, seg, cfg) > 1.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                r = 0.5 * (lo + hi);
                residual = threshold_integral(r, seg, cfg) - 1.0;
                if residual > 0.0 {
                    hi = r;
                } else {
                    lo = r;
                }
            }
        }

        let mut slope = cfg.integrand(seg, -r);
        for _ in 0..40 {
            if residual.abs() <= tol {
                break;
            }
            let mut next = r - residual / slope;
            if !next.is_finite() || next < lo || next > hi {
                next = 0.5 * (lo + hi);
            }
            let next_res = threshold_integral(next, seg, cfg) - 1.0;
            if next_res > 0.0 {
                hi = next;
            } else {
                lo = next;
            }
            r = next;
            residual = next_res;
            slope = cfg.integrand(seg, -r);
        }
        if residual.abs() > tol {
            return Err(DelayError::NoConvergence {
                tol,
                residual: residual.abs(),
            });
        }
        Ok(DelayValue {
            r,
            d_r_slope: slope,
            residual: residual.abs(),
        })
    }

    /// Directional derivative Dr(φ)ψ of the delay functional.
    ///
    /// For the threshold condition this is the implicit-function formula
    ///
    /// ```text
    /// Dr(φ)ψ = (C₁/(C₂+‖φ(-r)‖²) + C₃)⁻¹
    ///          · ∫_{-r}^0 2 C₁ (C₂+‖φ(s)‖²)⁻² ⟨φ(s), ψ(s)⟩ ds,
    /// ```
    ///
    /// and identically zero for the constant delay.
    pub fn derivative<S: SegmentEval + ?Sized, D: SegmentEval + ?Sized>(
        &self,
        seg: &S,
        dir: &D,
    ) -> Result<f64, DelayError> {
        let root = self.solve(seg)?;
        self.derivative_at_root(seg, dir, &root)
    }

    /// Directional derivative with the root already solved, so callers that
    /// need both do not pay for a second root-find.
    pub fn derivative_at_root<S: SegmentEval + ?Sized, D: SegmentEval + ?Sized>(
        &self,
        seg: &S,
        dir: &D,
        root: &DelayValue,
    ) -> Result<f64, DelayError> {
        let cfg = match self {
            DelayFunctional::Constant { .. } => return Ok(0.0),
            DelayFunctional::Threshold(cfg) => cfg,
        };
        let integral = simpson(cfg.quad_points, -root.r, 0.0, |s| {
            let phi = seg.value(s);
            let psi = dir.value(s);
            let denom = cfg.c2 + phi.inner(&phi);
            2.0 * cfg.c1 * phi.inner(&psi) / (denom * denom)
        });
        Ok(integral / root.d_r_slope)
    }

    /// Analytic Lipschitz bound for r on the ball ‖φ‖_C ≤ radius:
    /// L_r ≤ C₃⁻¹ · 2 C₁ · radius · h / C₂².
    pub fn lipschitz_bound(&self, radius: f64) -> f64 {
        match self {
            DelayFunctional::Constant { .. } => 0.0,
            DelayFunctional::Threshold(cfg) => {
                cfg.c3.recip() * 2.0 * cfg.c1 * radius * cfg.h / (cfg.c2 * cfg.c2)
            }
        }
    }
}
