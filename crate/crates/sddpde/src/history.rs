//! C¹ history segments φ on [-h, 0] with values in the spectral state space.
//!
//! A segment stores values and time-derivatives on a grid and interpolates
//! between nodes with cubic Hermite polynomials, so it stays C¹ by
//! construction. Norms follow the phase-space convention
//! ‖φ‖_X = max‖φ(θ)‖ + max‖φ̇(θ)‖ + ‖Aφ(0)‖; the maxima are taken over
//! nodes plus interval midpoints, which is a lower bound on the true sup.

use crate::spectral::{SpectralField, SpectrumConfig};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("theta {theta} outside segment domain [-{h}, 0]")]
    ThetaOutOfRange { theta: f64, h: f64 },
    #[error("time {t} outside trajectory span [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("invalid segment grid: {0}")]
    BadGrid(String),
    #[error("segments have different grids")]
    GridMismatch,
    #[error("need at least {need} samples with distinct times, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("CSV parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },
}

/// Evaluation interface shared by stored segments and lazily shifted
/// trajectory views. `theta` is always relative time in [-h, 0].
pub trait SegmentEval {
    fn horizon(&self) -> f64;
    fn n_modes(&self) -> usize;
    fn value(&self, theta: f64) -> SpectralField;
    fn deriv(&self, theta: f64) -> SpectralField;

    /// Value at the right endpoint θ = 0.
    fn head(&self) -> SpectralField {
        self.value(0.0)
    }

    /// Derivative at the right endpoint θ = 0.
    fn head_deriv(&self) -> SpectralField {
        self.deriv(0.0)
    }
}

/// Cubic Hermite interpolant on [t0, t1] from endpoint values/derivatives.
pub(crate) fn hermite_value(
    t: f64,
    t0: f64,
    t1: f64,
    v0: &SpectralField,
    v1: &SpectralField,
    d0: &SpectralField,
    d1: &SpectralField,
) -> SpectralField {
    let dt = t1 - t0;
    let s = (t - t0) / dt;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    let mut coeffs = Vec::with_capacity(v0.len());
    for i in 0..v0.len() {
        coeffs.push(
            h00 * v0.coeffs[i] + h10 * dt * d0.coeffs[i] + h01 * v1.coeffs[i]
                + h11 * dt * d1.coeffs[i],
        );
    }
    SpectralField::new(coeffs)
}

pub(crate) fn hermite_deriv(
    t: f64,
    t0: f64,
    t1: f64,
    v0: &SpectralField,
    v1: &SpectralField,
    d0: &SpectralField,
    d1: &SpectralField,
) -> SpectralField {
    let dt = t1 - t0;
    let s = (t - t0) / dt;
    let s2 = s * s;
    let g00 = (6.0 * s2 - 6.0 * s) / dt;
    let g10 = 3.0 * s2 - 4.0 * s + 1.0;
    let g01 = (-6.0 * s2 + 6.0 * s) / dt;
    let g11 = 3.0 * s2 - 2.0 * s;
    let mut coeffs = Vec::with_capacity(v0.len());
    for i in 0..v0.len() {
        coeffs.push(
            g00 * v0.coeffs[i] + g10 * d0.coeffs[i] + g01 * v1.coeffs[i] + g11 * d1.coeffs[i],
        );
    }
    SpectralField::new(coeffs)
}

/// Locate the interval index i with grid[i] <= t <= grid[i+1].
pub(crate) fn locate(grid: &[f64], t: f64) -> usize {
    let i = grid.partition_point(|&g| g <= t);
    i.clamp(1, grid.len() - 1) - 1
}

/// C¹ history on [-h, 0]: node values φ(θ_i) and derivatives φ̇(θ_i).
#[derive(Debug, Clone, Serialize)]
pub struct HistorySegment {
    horizon: f64,
    grid: Vec<f64>,
    values: Vec<SpectralField>,
    derivs: Vec<SpectralField>,
}

/// Segment norms: ‖·‖_C, ‖·‖_{C¹} and the phase-space norm with ‖Aφ(0)‖.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SegmentNorms {
    pub c_norm: f64,
    pub c1_norm: f64,
    pub x_norm: f64,
}

impl HistorySegment {
    pub fn new(
        grid: Vec<f64>,
        values: Vec<SpectralField>,
        derivs: Vec<SpectralField>,
    ) -> Result<Self, HistoryError> {
        if grid.len() < 2 {
            return Err(HistoryError::BadGrid("need at least two nodes".into()));
        }
        if grid.len() != values.len() || grid.len() != derivs.len() {
            return Err(HistoryError::BadGrid(format!(
                "grid/value/derivative lengths differ: {}/{}/{}",
                grid.len(),
                values.len(),
                derivs.len()
            )));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(HistoryError::BadGrid("grid not strictly increasing".into()));
        }
        let h = -grid[0];
        if !(h > 0.0) || !h.is_finite() {
            return Err(HistoryError::BadGrid(format!(
                "left endpoint must be -h < 0, got {}",
                grid[0]
            )));
        }
        if *grid.last().unwrap() != 0.0 {
            return Err(HistoryError::BadGrid(format!(
                "right endpoint must be 0, got {}",
                grid.last().unwrap()
            )));
        }
        let n = values[0].len();
        if n == 0
            || values.iter().any(|v| v.len() != n || !v.is_finite())
            || derivs.iter().any(|d| d.len() != n || !d.is_finite())
        {
            return Err(HistoryError::BadGrid(
                "fields must be nonempty, finite and of equal mode count".into(),
            ));
        }
        Ok(Self {
            horizon: h,
            grid,
            values,
            derivs,
        })
    }

    /// Uniform grid with m intervals, sampling value and derivative closures.
    pub fn from_fn(
        h: f64,
        m: usize,
        value: impl Fn(f64) -> SpectralField,
        deriv: impl Fn(f64) -> SpectralField,
    ) -> Self {
        assert!(h > 0.0 && m >= 1);
        let grid: Vec<f64> = (0..=m)
            .map(|i| {
                if i == m {
                    0.0
                } else {
                    -h + h * i as f64 / m as f64
                }
            })
            .collect();
        let values = grid.iter().map(|&t| value(t)).collect();
        let derivs = grid.iter().map(|&t| deriv(t)).collect();
        Self::new(grid, values, derivs).expect("closure-built segment is well formed")
    }

    /// Identically constant history.
    pub fn constant(h: f64, m: usize, value: &SpectralField) -> Self {
        let n = value.len();
        Self::from_fn(h, m, |_| value.clone(), |_| SpectralField::zero(n))
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn node_values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn node_derivs(&self) -> &[SpectralField] {
        &self.derivs
    }

    pub fn eval(&self, theta: f64) -> Result<SpectralField, HistoryError> {
        if theta < -self.horizon - 1e-12 || theta > 1e-12 {
            return Err(HistoryError::ThetaOutOfRange {
                theta,
                h: self.horizon,
            });
        }
        Ok(self.value(theta.clamp(-self.horizon, 0.0)))
    }

    pub fn eval_deriv(&self, theta: f64) -> Result<SpectralField, HistoryError> {
        if theta < -self.horizon - 1e-12 || theta > 1e-12 {
            return Err(HistoryError::ThetaOutOfRange {
                theta,
                h: self.horizon,
            });
        }
        Ok(self.deriv(theta.clamp(-self.horizon, 0.0)))
    }

    /// Norm triple; ‖Aφ(0)‖ is exact through the diagonal operator.
    pub fn norms(&self, spectrum: &SpectrumConfig) -> SegmentNorms {
        let (c_norm, c1_norm) = self.norms_c1();
        let a_head = spectrum
            .apply_a(&self.values[self.values.len() - 1])
            .expect("segment and spectrum mode counts must agree");
        SegmentNorms {
            c_norm,
            c1_norm,
            x_norm: c1_norm + a_head.norm_l2(),
        }
    }

    /// (‖φ‖_C, ‖φ‖_{C¹}) sampled on nodes and midpoints.
    pub fn norms_c1(&self) -> (f64, f64) {
        let mut vmax = 0.0f64;
        let mut dmax = 0.0f64;
        for i in 0..self.grid.len() {
            vmax = vmax.max(self.values[i].norm_l2());
            dmax = dmax.max(self.derivs[i].norm_l2());
            if i + 1 < self.grid.len() {
                let mid = 0.5 * (self.grid[i] + self.grid[i + 1]);
                vmax = vmax.max(self.value(mid).norm_l2());
                dmax = dmax.max(self.deriv(mid).norm_l2());
            }
        }
        (vmax, vmax + dmax)
    }

    /// Linear combination self + s·other on a shared grid.
    pub fn axpy(&self, s: f64, other: &HistorySegment) -> Result<HistorySegment, HistoryError> {
        if self.grid.len() != other.grid.len()
            || self
                .grid
                .iter()
                .zip(&other.grid)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(HistoryError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.axpy(s, b))
            .collect();
        let derivs = self
            .derivs
            .iter()
            .zip(&other.derivs)
            .map(|(a, b)| a.axpy(s, b))
            .collect();
        HistorySegment::new(self.grid.clone(), values, derivs)
    }

    pub fn scale(&self, s: f64) -> HistorySegment {
        HistorySegment::new(
            self.grid.clone(),
            self.values.iter().map(|v| v.scale(s)).collect(),
            self.derivs.iter().map(|d| d.scale(s)).collect(),
        )
        .expect("scaling preserves validity")
    }

    /// Linear extension to [-h, T]: the segment itself on [-h, 0), then
    /// φ(0) + t·φ̇(0) with constant derivative φ̇(0).
    pub fn extend(&self, t_max: f64) -> ExtendedHistory<'_> {
        assert!(t_max > 0.0, "extension length must be positive");
        ExtendedHistory { seg: self, t_max }
    }

    /// The segment re-tabulated on another grid over the same horizon, via
    /// Hermite evaluation; exact at shared nodes.
    pub fn resample_to(&self, grid: &[f64]) -> Result<HistorySegment, HistoryError> {
        let values = grid.iter().map(|&t| self.eval(t)).collect::<Result<_, _>>()?;
        let derivs = grid
            .iter()
            .map(|&t| self.eval_deriv(t))
            .collect::<Result<_, _>>()?;
        HistorySegment::new(grid.to_vec(), values, derivs)
    }

    /// CSV rows (θ, c₁..c_N, ċ₁..ċ_N) with a header line.
    pub fn to_csv(&self) -> String {
        let n = self.values[0].len();
        let mut out = String::from("theta");
        for k in 1..=n {
            out.push_str(&format!(",c{k}"));
        }
        for k in 1..=n {
            out.push_str(&format!(",dc{k}"));
        }
        out.push('\n');
        for i in 0..self.grid.len() {
            out.push_str(&format!("{}", self.grid[i]));
            for c in &self.values[i].coeffs {
                out.push_str(&format!(",{c}"));
            }
            for d in &self.derivs[i].coeffs {
                out.push_str(&format!(",{d}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parses the `to_csv` format. Lines are validated (finite numbers,
    /// strictly increasing grid, exact endpoints) so untrusted input is
    /// rejected rather than producing a malformed segment.
    pub fn from_csv_str(text: &str) -> Result<Self, HistoryError> {
        const MAX_CELLS: usize = 1 << 22;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(HistoryError::Csv {
            line: 1,
            msg: "empty input".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols.len().is_multiple_of(2) || cols[0].trim() != "theta" {
            return Err(HistoryError::Csv {
                line: 1,
                msg: "header must be theta,c1..cN,dc1..dcN".into(),
            });
        }
        let n = (cols.len() - 1) / 2;
        let mut grid = Vec::new();
        let mut values = Vec::new();
        let mut derivs = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(HistoryError::Csv {
                    line: lineno,
                    msg: format!("expected {} columns, got {}", cols.len(), fields.len()),
                });
            }
            if (grid.len() + 1) * cols.len() > MAX_CELLS {
                return Err(HistoryError::Csv {
                    line: lineno,
                    msg: "input too large".into(),
                });
            }
            let parse = |s: &str, lineno: usize| -> Result<f64, HistoryError> {
                let v: f64 = s.trim().parse().map_err(|_| HistoryError::Csv {
                    line: lineno,
                    msg: format!("bad number {s:?}"),
                })?;
                if !v.is_finite() {
                    return Err(HistoryError::Csv {
                        line: lineno,
                        msg: format!("non-finite number {s:?}"),
                    });
                }
                Ok(v)
            };
            grid.push(parse(fields[0], lineno)?);
            let mut vc = Vec::with_capacity(n);
            let mut dc = Vec::with_capacity(n);
            for f in &fields[1..=n] {
                vc.push(parse(f, lineno)?);
            }
            for f in &fields[n + 1..] {
                dc.push(parse(f, lineno)?);
            }
            values.push(SpectralField::new(vc));
            derivs.push(SpectralField::new(dc));
        }
        // Snap a near-zero right endpoint so serialized grids round-trip.
        if let Some(last) = grid.last_mut() {
            if last.abs() <= 1e-9 {
                *last = 0.0;
            }
        }
        Self::new(grid, values, derivs)
    }
}

impl SegmentEval for HistorySegment {
    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn n_modes(&self) -> usize {
        self.values[0].len()
    }

    fn value(&self, theta: f64) -> SpectralField {
        let i = locate(&self.grid, theta);
        if theta == self.grid[i] {
            return self.values[i].clone();
        }
        if theta == self.grid[i + 1] {
            return self.values[i + 1].clone();
        }
        hermite_value(
            theta,
            self.grid[i],
            self.grid[i + 1],
            &self.values[i],
            &self.values[i + 1],
            &self.derivs[i],
            &self.derivs[i + 1],
        )
    }

    fn deriv(&self, theta: f64) -> SpectralField {
        let i = locate(&self.grid, theta);
        if theta == self.grid[i] {
            return self.derivs[i].clone();
        }
        if theta == self.grid[i + 1] {
            return self.derivs[i + 1].clone();
        }
        hermite_deriv(
            theta,
            self.grid[i],
            self.grid[i + 1],
            &self.values[i],
            &self.values[i + 1],
            &self.derivs[i],
            &self.derivs[i + 1],
        )
    }
}

/// View of a segment linearly extended onto [0, T].
pub struct ExtendedHistory<'a> {
    seg: &'a HistorySegment,
    t_max: f64,
}

impl ExtendedHistory<'_> {
    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn value(&self, t: f64) -> Result<SpectralField, HistoryError> {
        if t < -self.seg.horizon - 1e-12 || t > self.t_max + 1e-12 {
            return Err(HistoryError::TimeOutOfRange {
                t,
                lo: -self.seg.horizon,
                hi: self.t_max,
            });
        }
        if t <= 0.0 {
            self.seg.eval(t)
        } else {
            Ok(self.seg.head().axpy(t, &self.seg.head_deriv()))
        }
    }

    pub fn deriv(&self, t: f64) -> Result<SpectralField, HistoryError> {
        if t < -self.seg.horizon - 1e-12 || t > self.t_max + 1e-12 {
            return Err(HistoryError::TimeOutOfRange {
                t,
                lo: -self.seg.horizon,
                hi: self.t_max,
            });
        }
        if t <= 0.0 {
            self.seg.eval_deriv(t)
        } else {
            Ok(self.seg.head_deriv())
        }
    }

    /// The shifted segment (E_Tφ)_t on [-h, 0] for t ∈ [0, T].
    pub fn segment_at(&self, t: f64) -> Result<HistorySegment, HistoryError> {
        if !(0.0..=self.t_max + 1e-12).contains(&t) {
            return Err(HistoryError::TimeOutOfRange {
                t,
                lo: 0.0,
                hi: self.t_max,
            });
        }
        let h = self.seg.horizon;
        let eps = 1e-12 * h.max(1.0);
        let mut grid = vec![-h];
        let mut values = vec![self.value(t - h)?];
        let mut derivs = vec![self.deriv(t - h)?];
        let push = |theta: f64,
                        v: SpectralField,
                        d: SpectralField,
                        grid: &mut Vec<f64>,
                        values: &mut Vec<SpectralField>,
                        derivs: &mut Vec<SpectralField>| {
            if theta > *grid.last().unwrap() + eps && theta < -eps {
                grid.push(theta);
                values.push(v);
                derivs.push(d);
            }
        };
        for (i, &g) in self.seg.grid.iter().enumerate() {
            push(
                g - t,
                self.seg.values[i].clone(),
                self.seg.derivs[i].clone(),
                &mut grid,
                &mut values,
                &mut derivs,
            );
        }
        if t > eps {
            // Junction of history and affine extension; both sides are
            // reproduced exactly by Hermite interpolation from here.
            push(
                -t,
                self.seg.values.last().unwrap().clone(),
                self.seg.derivs.last().unwrap().clone(),
                &mut grid,
                &mut values,
                &mut derivs,
            );
        }
        grid.push(0.0);
        values.push(self.value(t)?);
        derivs.push(self.deriv(t)?);
        HistorySegment::new(grid, values, derivs)
    }
}

/// Least-squares estimate of the Hölder exponent of a sampled path:
/// the slope of log‖g(t)-g(s)‖ against log|t-s| over close pairs.
///
/// Returns +∞ when every pair of samples coincides (smoother than any
/// tested exponent).
pub fn holder_exponent_estimate(
    samples: &[(f64, SpectralField)],
    cutoff: Option<f64>,
) -> Result<f64, HistoryError> {
    const MIN_SAMPLES: usize = 16;
    if samples.len() < MIN_SAMPLES {
        return Err(HistoryError::TooFewSamples {
            need: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let mut times: Vec<f64> = samples.iter().map(|(t, _)| *t).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if times.windows(2).any(|w| w[0] == w[1]) {
        return Err(HistoryError::BadGrid("sample times must be distinct".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let cutoff = cutoff.unwrap_or(span / 4.0);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let dt = (samples[i].0 - samples[j].0).abs();
            if dt > cutoff || dt == 0.0 {
                continue;
            }
            let dg = (&samples[i].1 - &samples[j].1).norm_l2();
            if dg > 0.0 {
                xs.push(dt.ln());
                ys.push(dg.ln());
            }
        }
    }
    if xs.len() < 2 {
        return Ok(f64::INFINITY);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(sxy / sxx)
}
