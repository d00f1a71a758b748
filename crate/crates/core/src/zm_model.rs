//! The modified Zipf–Mandelbrot family over a measured quantity `d`:
//!
//! ```text
//! ρ(d; α, δ) = 1 / (d + δ)^α,      p(d) = ρ(d) / Σ_{d=1}^{d_max} ρ(d)
//! ```
//!
//! Sums can be evaluated exactly or with a midpoint integral tail beyond
//! `d_sum`, whose relative error is roughly `1 / d_sum`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

pub const DELTA_UPPER: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("integral tail is singular at alpha = 1; use exact summation")]
    SingularTail,
    #[error("d_sum = {d_sum} must lie in 1..={d_max}")]
    BadDsum { d_sum: u64, d_max: u64 },
}

/// Exponent, offset, and support size of a model instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZmParams<F> {
    pub alpha: F,
    pub delta: F,
    pub d_max: u64,
}

impl<F: Scalar> ZmParams<F> {
    /// Validates `α > 0`, `0 ≤ δ < 10`, `d_max ≥ 1`. `δ = 0` is accepted for
    /// evaluation; the fitter keeps `δ` strictly positive.
    pub fn new(alpha: F, delta: F, d_max: u64) -> Result<Self, ModelError> {
        if !(alpha > F::zero()) || !alpha.is_finite() {
            return Err(ModelError::InvalidParams(format!(
                "alpha = {alpha} must be positive"
            )));
        }
        if !(delta >= F::zero() && delta < F::of(DELTA_UPPER)) {
            return Err(ModelError::InvalidParams(format!(
                "delta = {delta} outside [0, 10)"
            )));
        }
        if d_max == 0 {
            return Err(ModelError::InvalidParams("d_max must be at least 1".into()));
        }
        Ok(ZmParams {
            alpha,
            delta,
            d_max,
        })
    }

    pub fn rho(&self, d: u64) -> F {
        rho(F::of_u64(d), self.alpha, self.delta)
    }

    pub fn drho_ddelta(&self, d: u64) -> F {
        drho_ddelta(F::of_u64(d), self.alpha, self.delta)
    }

    pub fn leaf_parameter(&self) -> F {
        leaf_parameter(self.alpha, self.delta)
    }
}

/// `1 / (d + δ)^α`. Takes a real `d` so integral tails can use midpoints.
pub fn rho<F: Scalar>(d: F, alpha: F, delta: F) -> F {
    (d + delta).powf(-alpha)
}

/// `∂ρ/∂δ = −α ρ(d; α+1, δ)`.
pub fn drho_ddelta<F: Scalar>(d: F, alpha: F, delta: F) -> F {
    -alpha * rho(d, alpha + F::one(), delta)
}

/// Saturation/cutoff form `ρ(d) · exp(−λ d)`. Evaluation only; the fitter
/// works with `λ = 0`.
pub fn rho_with_cutoff<F: Scalar>(d: F, alpha: F, delta: F, lambda: F) -> F {
    rho(d, alpha, delta) * (-lambda * d).exp()
}

/// `1 / (1 + δ)^α`, the model's relative weight at `d = 1`.
pub fn leaf_parameter<F: Scalar>(alpha: F, delta: F) -> F {
    rho(F::one(), alpha, delta)
}

/// How sums over `1..=d_max` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SumMode {
    #[default]
    Exact,
    /// Exact terms up to `d_sum`, then a midpoint integral to `d_max + 0.5`.
    Approx { d_sum: u64 },
}

impl SumMode {
    /// Falls back to exact summation where the integral tail is singular
    /// (`α = 1`) or not needed (`d_sum ≥ d_max`).
    pub fn resolve<F: Scalar>(self, alpha: F, d_max: u64) -> SumMode {
        match self {
            SumMode::Approx { d_sum }
                if d_sum < d_max && (alpha - F::one()).abs() > F::epsilon() =>
            {
                self
            }
            _ => SumMode::Exact,
        }
    }
}

fn exact_range<F: Scalar>(alpha: F, delta: F, lo: u64, hi: u64) -> F {
    // Smallest terms first.
    let mut acc = F::zero();
    for d in (lo..=hi).rev() {
        acc = acc + rho(F::of_u64(d), alpha, delta);
    }
    acc
}

/// `∫_{a}^{b} (x + δ)^{−α} dx = [ρ(a; α−1) − ρ(b; α−1)] / (α − 1)`.
fn integral<F: Scalar>(alpha: F, delta: F, a: F, b: F) -> F {
    let am1 = alpha - F::one();
    (rho(a, am1, delta) - rho(b, am1, delta)) / am1
}

/// `Σ_{d=lo}^{hi} ρ(d; α, δ)` under `mode`. Empty ranges give 0.
pub fn range_sum<F: Scalar>(
    alpha: F,
    delta: F,
    lo: u64,
    hi: u64,
    mode: SumMode,
) -> Result<F, ModelError> {
    if lo > hi {
        return Ok(F::zero());
    }
    match mode {
        SumMode::Exact => Ok(exact_range(alpha, delta, lo, hi)),
        SumMode::Approx { d_sum } => {
            if (alpha - F::one()).abs() <= F::epsilon() {
                return Err(ModelError::SingularTail);
            }
            let exact_hi = hi.min(d_sum);
            let head = if lo <= exact_hi {
                exact_range(alpha, delta, lo, exact_hi)
            } else {
                F::zero()
            };
            let tail_lo = lo.max(d_sum + 1);
            let half = F::of(0.5);
            let tail = if tail_lo <= hi {
                integral(
                    alpha,
                    delta,
                    F::of_u64(tail_lo) - half,
                    F::of_u64(hi) + half,
                )
            } else {
                F::zero()
            };
            Ok(head + tail)
        }
    }
}

/// Normalizer `Σ_{d=1}^{d_max} ρ(d; α, δ)`.
pub fn zm_sum<F: Scalar>(params: &ZmParams<F>, mode: SumMode) -> Result<F, ModelError> {
    if let SumMode::Approx { d_sum } = mode {
        if d_sum == 0 || d_sum > params.d_max {
            return Err(ModelError::BadDsum {
                d_sum,
                d_max: params.d_max,
            });
        }
    }
    range_sum(params.alpha, params.delta, 1, params.d_max, mode)
}

/// Normalizer for exponents `α` and `α + 1` in one pass.
pub fn paired_sums<F: Scalar>(
    alpha: F,
    delta: F,
    d_max: u64,
    mode: SumMode,
) -> Result<(F, F), ModelError> {
    match mode {
        SumMode::Exact => {
            let mut s0 = F::zero();
            let mut s1 = F::zero();
            for d in (1..=d_max).rev() {
                let x = F::of_u64(d) + delta;
                let r = x.powf(-alpha);
                s0 = s0 + r;
                s1 = s1 + r / x;
            }
            Ok((s0, s1))
        }
        SumMode::Approx { .. } => Ok((
            range_sum(alpha, delta, 1, d_max, mode)?,
            range_sum(alpha + F::one(), delta, 1, d_max, mode)?,
        )),
    }
}

/// `p(d; α, δ)`; zero outside `1..=d_max`.
pub fn zm_pdf<F: Scalar>(d: u64, params: &ZmParams<F>) -> F {
    if d == 0 || d > params.d_max {
        return F::zero();
    }
    params.rho(d) / exact_range(params.alpha, params.delta, 1, params.d_max)
}

/// `P(d; α, δ)`.
pub fn zm_cdf<F: Scalar>(d: u64, params: &ZmParams<F>) -> F {
    if d == 0 {
        return F::zero();
    }
    let total = exact_range(params.alpha, params.delta, 1, params.d_max);
    exact_range(params.alpha, params.delta, 1, d.min(params.d_max)) / total
}

/// Unnormalized bin sums `Σ_{d_{i−1} < d ≤ d_i} ρ(d)` for doubling edges,
/// truncated at `d_max`.
pub fn binned_rho_sums<F: Scalar>(
    edges: &[u64],
    params: &ZmParams<F>,
    mode: SumMode,
) -> Result<Vec<F>, ModelError> {
    let mode = mode.resolve(params.alpha, params.d_max);
    let mut prev = 0u64;
    edges
        .iter()
        .map(|&e| {
            let lo = prev + 1;
            let hi = e.min(params.d_max);
            prev = e;
            range_sum(params.alpha, params.delta, lo, hi, mode)
        })
        .collect()
}

/// Model `D(d_i; α, δ)` at the given edges. The normalizer is the sum of the
/// bin sums, so values telescope to 1 whenever the edges cover `d_max`.
pub fn zm_binned<F: Scalar>(
    edges: &[u64],
    params: &ZmParams<F>,
    mode: SumMode,
) -> Result<Vec<F>, ModelError> {
    let sums = binned_rho_sums(edges, params, mode)?;
    let total = if edges.last().is_some_and(|&e| e >= params.d_max) {
        sums.iter().copied().sum::<F>()
    } else {
        range_sum(
            params.alpha,
            params.delta,
            1,
            params.d_max,
            mode.resolve(params.alpha, params.d_max),
        )?
    };
    Ok(sums.into_iter().map(|s| s / total).collect())
}

/// Inverse-CDF sampler over `1..=d_max`.
#[derive(Debug, Clone)]
pub struct ZmSampler {
    cdf: Vec<f64>,
}

impl ZmSampler {
    pub fn new<F: Scalar>(params: &ZmParams<F>) -> Self {
        let alpha = params.alpha.as_f64();
        let delta = params.delta.as_f64();
        let mut cdf = Vec::with_capacity(params.d_max as usize);
        let mut acc = 0.0f64;
        for d in 1..=params.d_max {
            acc += rho(d as f64, alpha, delta);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        *cdf.last_mut().expect("d_max >= 1") = 1.0;
        ZmSampler { cdf }
    }

    pub fn d_max(&self) -> u64 {
        self.cdf.len() as u64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u);
        (i.min(self.cdf.len() - 1) + 1) as u64
    }
}

/// `n` i.i.d. draws, deterministic for a given seed.
pub fn zm_sample<F: Scalar>(params: &ZmParams<F>, n: usize, seed: u64) -> Vec<u64> {
    let sampler = ZmSampler::new(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sampler.sample(&mut rng)).collect()
}
