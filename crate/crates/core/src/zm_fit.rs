//! Two-parameter fit of the modified Zipf–Mandelbrot model to a measured
//! log-binned distribution.
//!
//! For each candidate exponent on a fixed grid the offset `δ` is solved so
//! the model reproduces the measured `D(1)` exactly:
//!
//! ```text
//! f(δ)  = D(1) (1+δ)^α Σ ρ(d; α, δ) − 1
//! f'(δ) = α D(1) (1+δ)^α [ Σ ρ(d; α, δ) / (1+δ) − Σ ρ(d; α+1, δ) ]
//! ```
//!
//! Newton's method starts at `δ = 1` and stops once successive iterates
//! differ by less than the tolerance; bisection on `(ε, 10 − ε)` is the
//! fallback. The exponent minimizing `Σ |log D(d_i) − log D(d_i; α, δ)|^½`
//! over bins with `D(d_i) > σ(d_i)` wins.
//!
//! The sum mode only affects the two normalizer sums inside the Newton
//! residual. Model bins for the objective are always summed exactly.

use rayon::prelude::*;
use thiserror::Error;

use crate::distributions::BinnedDistribution;
use crate::scalar::Scalar;
use crate::zm_model::{paired_sums, zm_binned, SumMode, ZmParams, DELTA_UPPER};

/// Iterates are kept inside `(DELTA_EPS, 10 − DELTA_EPS)`.
pub const DELTA_EPS: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 50;
const FLAT_DERIVATIVE: f64 = 1e-14;
const POLISH_STEPS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("measured D(1) = {0} outside (0, 1]")]
    InvalidAnchor(f64),
    #[error("no convergence after {iterations} iterations (delta = {delta})")]
    NoConvergence { delta: f64, iterations: usize },
    #[error("derivative vanished at delta = {delta}")]
    FlatDerivative { delta: f64, iterations: usize },
    #[error("iterate pinned at bound {delta} after {iterations} iterations")]
    Escaped { delta: f64, iterations: usize },
    #[error("no sign change of f on the delta bracket")]
    NoSignChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub mode: SumMode,
    /// Keep stepping past the tolerance until the update stalls at rounding
    /// level. Does not change `iterations`.
    pub polish: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            mode: SumMode::Exact,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSolution<F> {
    pub delta: F,
    /// Updates taken until successive iterates differed by less than `tol`.
    pub iterations: usize,
}

/// `(f(δ), f'(δ))` for the `D(1)` anchor equation.
pub fn anchor_residual<F: Scalar>(
    alpha: F,
    measured_d1: F,
    delta: F,
    d_max: u64,
    mode: SumMode,
) -> (F, F) {
    let mode = mode.resolve(alpha, d_max);
    let (s0, s1) = paired_sums(alpha, delta, d_max, mode).expect("resolved sum mode is valid");
    let one_plus = F::one() + delta;
    let scale = measured_d1 * one_plus.powf(alpha);
    let f = scale * s0 - F::one();
    let df = alpha * scale * (s0 / one_plus - s1);
    (f, df)
}

fn bounds<F: Scalar>() -> (F, F) {
    let eps = F::of(DELTA_EPS);
    (eps, F::of(DELTA_UPPER) - eps)
}

fn check_anchor<F: Scalar>(d1: F) -> Result<(), SolveError> {
    if d1 > F::zero() && d1 <= F::one() {
        Ok(())
    } else {
        Err(SolveError::InvalidAnchor(d1.as_f64()))
    }
}

/// Solves the anchor equation for `δ` by Newton's method from `δ = 1`.
pub fn newton_delta<F: Scalar>(
    alpha: F,
    measured_d1: F,
    d_max: u64,
    cfg: &NewtonConfig,
) -> Result<NewtonSolution<F>, SolveError> {
    check_anchor(measured_d1)?;
    let (lo, hi) = bounds::<F>();
    let tol = F::of(cfg.tol);
    let mut delta = F::one();
    let mut pinned = false;
    for it in 1..=cfg.max_iter {
        let (f, df) = anchor_residual(alpha, measured_d1, delta, d_max, cfg.mode);
        if !(df.abs() >= F::of(FLAT_DERIVATIVE)) {
            return Err(SolveError::FlatDerivative {
                delta: delta.as_f64(),
                iterations: it - 1,
            });
        }
        let raw = delta - f / df;
        let next = raw.max(lo).min(hi);
        let clamped = next != raw;
        if clamped && pinned && next == delta {
            return Err(SolveError::Escaped {
                delta: delta.as_f64(),
                iterations: it,
            });
        }
        pinned = clamped;
        let step = (next - delta).abs();
        delta = next;
        if step < tol && !clamped {
            if cfg.polish {
                delta = polish(alpha, measured_d1, delta, d_max, cfg.mode, step);
            }
            return Ok(NewtonSolution {
                delta,
                iterations: it,
            });
        }
    }
    Err(SolveError::NoConvergence {
        delta: delta.as_f64(),
        iterations: cfg.max_iter,
    })
}

fn polish<F: Scalar>(
    alpha: F,
    d1: F,
    mut delta: F,
    d_max: u64,
    mode: SumMode,
    mut last_step: F,
) -> F {
    let (lo, hi) = bounds::<F>();
    for _ in 0..POLISH_STEPS {
        let (f, df) = anchor_residual(alpha, d1, delta, d_max, mode);
        if f == F::zero() || df.abs() < F::of(FLAT_DERIVATIVE) {
            break;
        }
        let next = (delta - f / df).max(lo).min(hi);
        let step = (next - delta).abs();
        if step >= last_step {
            break;
        }
        delta = next;
        last_step = step;
        if step == F::zero() {
            break;
        }
    }
    delta
}

/// Bisection on `(ε, 10 − ε)` until the bracket is narrower than `tol`.
pub fn bisect_delta<F: Scalar>(
    alpha: F,
    measured_d1: F,
    d_max: u64,
    tol: f64,
    mode: SumMode,
) -> Result<F, SolveError> {
    check_anchor(measured_d1)?;
    let (mut lo, mut hi) = bounds::<F>();
    let f = |d: F| anchor_residual(alpha, measured_d1, d, d_max, mode).0;
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == F::zero() {
        return Ok(lo);
    }
    if f_hi == F::zero() {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(SolveError::NoSignChange);
    }
    let tol = F::of(tol);
    let two = F::of(2.0);
    while hi - lo >= tol {
        let mid = (lo + hi) / two;
        let f_mid = f(mid);
        if f_mid == F::zero() {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / two)
}

/// Candidate exponent grid, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        AlphaGrid {
            min: 0.10,
            max: 4.00,
            step: 0.01,
        }
    }
}

impl AlphaGrid {
    pub fn values<F: Scalar>(&self) -> Result<Vec<F>, FitError> {
        if !(self.step > 0.0) || !(self.min > 0.0) || self.max < self.min {
            return Err(FitError::InvalidGrid(*self));
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        // Index the grid in units of 1/step when that is integral so points
        // land on the nearest representable decimal (1.80 == 1.8).
        let inv = (1.0 / self.step).round();
        let integral = (inv * self.step - 1.0).abs() < 1e-9;
        let base = (self.min * inv).round();
        Ok((0..=n)
            .map(|k| {
                if integral {
                    F::of((base + k as f64) / inv)
                } else {
                    F::of(self.min + k as f64 * self.step)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitConfig {
    pub grid: AlphaGrid,
    pub newton: NewtonConfig,
}

impl FitConfig {
    pub fn with_mode(mut self, mode: SumMode) -> Self {
        self.newton.mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Newton,
    Bisection,
    Skipped,
}

/// Outcome for one grid exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTrace<F> {
    pub alpha: F,
    pub delta: Option<F>,
    pub method: SolveMethod,
    pub newton_iterations: Option<usize>,
    /// `None` when the exponent was skipped or the model vanished on a used bin.
    pub objective: Option<F>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZmFit<F> {
    pub params: ZmParams<F>,
    pub leaf_parameter: F,
    pub metric: F,
    pub anchored_d1: F,
    pub points_used: usize,
    /// Which bins of the input entered the objective.
    pub used_bins: Vec<bool>,
    /// Model `D(d_i; α, δ)` at every input edge for the chosen parameters.
    pub model: Vec<F>,
    /// Whether the chosen exponent's `δ` came from a converged Newton solve.
    pub converged: bool,
    pub traces: Vec<AlphaTrace<F>>,
}

impl<F: Scalar> ZmFit<F> {
    pub fn newton_iterations(&self) -> impl Iterator<Item = (F, Option<usize>)> + '_ {
        self.traces.iter().map(|t| (t.alpha, t.newton_iterations))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("measured D(1) is zero; the anchor bin is undefined")]
    MissingAnchor,
    #[error("only {found} bins pass the sigma filter; need at least 3")]
    TooFewPoints { found: usize },
    #[error("no grid exponent produced a usable fit ({skipped} skipped)")]
    NoFeasibleAlpha { skipped: usize },
    #[error("invalid alpha grid {0:?}")]
    InvalidGrid(AlphaGrid),
    #[error("d_max must be at least 1")]
    ZeroDmax,
}

/// Bins used by the objective: positive mean above σ (σ taken as 0 when
/// fewer than two windows were pooled).
pub fn sigma_filter<F: Scalar>(dist: &BinnedDistribution<F>) -> Vec<bool> {
    let use_sigma = dist.sigma_defined();
    dist.mean
        .iter()
        .zip(&dist.sigma)
        .map(|(&m, &s)| m > F::zero() && (!use_sigma || m > s))
        .collect()
}

/// `Σ |log D − log D_model|^½` over the used bins; `None` if the model is
/// zero where data is not.
pub fn objective<F: Scalar>(measured: &[F], model: &[F], used: &[bool]) -> Option<F> {
    let mut acc = F::zero();
    for ((&d, &m), &u) in measured.iter().zip(model).zip(used) {
        if !u {
            continue;
        }
        if !(m > F::zero()) {
            return None;
        }
        acc = acc + (d.ln() - m.ln()).abs().sqrt();
    }
    Some(acc)
}

fn solve_one<F: Scalar>(
    alpha: F,
    d1: F,
    d_max: u64,
    cfg: &NewtonConfig,
) -> (Option<F>, SolveMethod, Option<usize>, Option<String>) {
    match newton_delta(alpha, d1, d_max, cfg) {
        Ok(sol) => (
            Some(sol.delta),
            SolveMethod::Newton,
            Some(sol.iterations),
            None,
        ),
        Err(newton_err) => match bisect_delta(alpha, d1, d_max, cfg.tol, cfg.mode) {
            Ok(delta) => (
                Some(delta),
                SolveMethod::Bisection,
                None,
                Some(newton_err.to_string()),
            ),
            Err(e) => (
                None,
                SolveMethod::Skipped,
                None,
                Some(format!("{newton_err}; bisection: {e}")),
            ),
        },
    }
}

/// Grid fit of `(α, δ)`. Ties in the objective go to the smaller exponent.
pub fn fit<F: Scalar>(
    dist: &BinnedDistribution<F>,
    d_max: u64,
    cfg: &FitConfig,
) -> Result<ZmFit<F>, FitError> {
    if d_max == 0 {
        return Err(FitError::ZeroDmax);
    }
    let d1 = dist.anchor();
    if !(d1 > F::zero()) {
        return Err(FitError::MissingAnchor);
    }
    let used = sigma_filter(dist);
    let points_used = used.iter().filter(|&&u| u).count();
    if points_used < 3 {
        return Err(FitError::TooFewPoints { found: points_used });
    }
    let alphas = cfg.grid.values::<F>()?;

    let traces: Vec<AlphaTrace<F>> = alphas
        .par_iter()
        .map(|&alpha| {
            let (delta, method, newton_iterations, mut note) =
                solve_one(alpha, d1, d_max, &cfg.newton);
            let objective = delta.and_then(|delta| {
                let params = ZmParams {
                    alpha,
                    delta,
                    d_max,
                };
                match zm_binned(&dist.edges, &params, SumMode::Exact) {
                    Ok(model) => objective(&dist.mean, &model, &used),
                    Err(e) => {
                        note = Some(e.to_string());
                        None
                    }
                }
            });
            AlphaTrace {
                alpha,
                delta,
                method,
                newton_iterations,
                objective,
                note,
            }
        })
        .collect();

    let mut best: Option<&AlphaTrace<F>> = None;
    for t in &traces {
        if let Some(obj) = t.objective {
            if best.is_none_or(|b| obj < b.objective.expect("best has objective")) {
                best = Some(t);
            }
        }
    }
    let best = best.ok_or(FitError::NoFeasibleAlpha {
        skipped: traces.iter().filter(|t| t.objective.is_none()).count(),
    })?;
    let params = ZmParams {
        alpha: best.alpha,
        delta: best.delta.expect("scored trace has delta"),
        d_max,
    };
    let model = zm_binned(&dist.edges, &params, SumMode::Exact).expect("scored trace evaluates");
    Ok(ZmFit {
        leaf_parameter: params.leaf_parameter(),
        metric: best.objective.expect("scored"),
        anchored_d1: d1,
        points_used,
        used_bins: used,
        model,
        converged: best.method == SolveMethod::Newton,
        params,
        traces,
    })
}
