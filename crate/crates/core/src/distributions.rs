//! Histograms, probabilities, and log-binned differential cumulative
//! distributions of network quantities, with cross-window pooling.
//!
//! Bin edges are `d_i = 2^i` starting at 1; bin `i` covers
//! `(2^(i-1), 2^i]` and the first bin holds only `d = 1`. The last edge is
//! the smallest power of two not below `d_max`. Empty bins are kept as
//! zeros so distributions from different windows stay positionally aligned.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistributionError {
    #[error("quantity series is empty")]
    EmptySeries,
    #[error("quantity values must be positive integers")]
    NonPositiveValue,
    #[error("no windows to pool")]
    NoWindows,
}

/// Count of entities per observed value `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeHistogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl DegreeHistogram {
    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn d_max(&self) -> u64 {
        *self
            .counts
            .keys()
            .next_back()
            .expect("histogram is non-empty")
    }

    pub fn get(&self, d: u64) -> u64 {
        self.counts.get(&d).copied().unwrap_or(0)
    }
}

pub fn histogram(
    values: impl IntoIterator<Item = u64>,
) -> Result<DegreeHistogram, DistributionError> {
    let mut counts = BTreeMap::new();
    let mut total = 0u64;
    for v in values {
        if v == 0 {
            return Err(DistributionError::NonPositiveValue);
        }
        *counts.entry(v).or_insert(0u64) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(DistributionError::EmptySeries);
    }
    Ok(DegreeHistogram { counts, total })
}

/// `p_t(d) = n_t(d) / Σ n_t`.
pub fn probability<F: Scalar>(h: &DegreeHistogram) -> BTreeMap<u64, F> {
    let total = F::of_u64(h.total);
    h.counts
        .iter()
        .map(|(&d, &n)| (d, F::of_u64(n) / total))
        .collect()
}

/// Step-function cumulative distribution stored at its support points.
#[derive(Debug, Clone, PartialEq)]
pub struct Cumulative<F> {
    points: Vec<(u64, F)>,
}

impl<F: Scalar> Cumulative<F> {
    /// `P_t(d)`; zero below the smallest support point.
    pub fn at(&self, d: u64) -> F {
        match self.points.partition_point(|&(x, _)| x <= d) {
            0 => F::zero(),
            i => self.points[i - 1].1,
        }
    }

    pub fn points(&self) -> &[(u64, F)] {
        &self.points
    }

    pub fn d_max(&self) -> u64 {
        self.points.last().map_or(0, |&(d, _)| d)
    }
}

/// `P_t(d) = Σ_{i ≤ d} p_t(i)`.
pub fn cumulative<F: Scalar>(p: &BTreeMap<u64, F>) -> Cumulative<F> {
    let mut acc = F::zero();
    let points = p
        .iter()
        .map(|(&d, &pd)| {
            acc = acc + pd;
            (d, acc)
        })
        .collect();
    Cumulative { points }
}

/// Doubling edges `1, 2, 4, …, 2^I` with `2^I ≥ d_max`.
pub fn bin_edges(d_max: u64) -> Vec<u64> {
    let mut edges = vec![1u64];
    while *edges.last().unwrap() < d_max {
        let next = edges.last().unwrap() * 2;
        edges.push(next);
    }
    edges
}

/// Index of the bin that holds value `d ≥ 1`.
pub fn bin_index(d: u64) -> usize {
    debug_assert!(d >= 1);
    (u64::BITS - (d - 1).leading_zeros()) as usize
}

/// Log-binned differential cumulative distribution, for one window or
/// pooled over many.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedDistribution<F> {
    pub edges: Vec<u64>,
    /// `D_t(d_i)` for a single window, or the mean over pooled windows.
    pub mean: Vec<F>,
    /// Population standard deviation across windows; zeros for one window.
    pub sigma: Vec<F>,
    pub window_count: usize,
    /// Largest observed value across the pooled windows.
    pub d_max: u64,
}

impl<F: Scalar> BinnedDistribution<F> {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// σ is only meaningful when at least two windows were pooled.
    pub fn sigma_defined(&self) -> bool {
        self.window_count >= 2
    }

    pub fn total(&self) -> F {
        self.mean.iter().copied().sum()
    }

    /// Measured `D(1)`.
    pub fn anchor(&self) -> F {
        self.mean.first().copied().unwrap_or_else(F::zero)
    }

    /// Copy extended with zero bins up to `len` edges.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        while out.edges.len() < len {
            let next = out.edges.last().map_or(1, |e| e * 2);
            out.edges.push(next);
            out.mean.push(F::zero());
            out.sigma.push(F::zero());
        }
        out
    }
}

/// `D_t(d_i) = P_t(d_i) − P_t(d_{i−1})`, with `P_t(d_{−1}) = 0`.
pub fn log_bin<F: Scalar>(cum: &Cumulative<F>, d_max: u64) -> BinnedDistribution<F> {
    let edges = bin_edges(d_max.max(cum.d_max()).max(1));
    let mut prev = F::zero();
    let mean = edges
        .iter()
        .map(|&e| {
            let here = cum.at(e);
            let d = here - prev;
            prev = here;
            d
        })
        .collect::<Vec<F>>();
    BinnedDistribution {
        sigma: vec![F::zero(); edges.len()],
        edges,
        mean,
        window_count: 1,
        d_max: d_max.max(cum.d_max()),
    }
}

/// Histogram, probability, cumulative, and log-bin in one step.
pub fn binned_from_values<F: Scalar>(
    values: impl IntoIterator<Item = u64>,
) -> Result<BinnedDistribution<F>, DistributionError> {
    let h = histogram(values)?;
    let cum = cumulative(&probability::<F>(&h));
    Ok(log_bin(&cum, h.d_max()))
}

/// Per-bin mean and population standard deviation across windows. Shorter
/// windows are padded with zero bins.
pub fn pool_windows<F: Scalar>(
    windows: &[BinnedDistribution<F>],
) -> Result<BinnedDistribution<F>, DistributionError> {
    if windows.is_empty() {
        return Err(DistributionError::NoWindows);
    }
    let len = windows.iter().map(|w| w.len()).max().unwrap_or(0);
    let padded: Vec<_> = windows.iter().map(|w| w.padded(len)).collect();
    // Welford updates: identical inputs give an exact mean and zero σ.
    let mut mean = vec![F::zero(); len];
    let mut m2 = vec![F::zero(); len];
    for (k, w) in padded.iter().enumerate() {
        let count = F::of_u64(k as u64 + 1);
        for ((m, s), &v) in mean.iter_mut().zip(m2.iter_mut()).zip(&w.mean) {
            let dev = v - *m;
            *m = *m + dev / count;
            *s = *s + dev * (v - *m);
        }
    }
    let n = F::of_u64(windows.len() as u64);
    let sigma = m2
        .into_iter()
        .map(|s| (s / n).max(F::zero()).sqrt())
        .collect();
    Ok(BinnedDistribution {
        edges: padded[0].edges.clone(),
        mean,
        sigma,
        window_count: windows.len(),
        d_max: windows.iter().map(|w| w.d_max).max().unwrap_or(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn histogram_counts() {
        let h = histogram([1, 1, 2]).unwrap();
        assert_eq!(h.counts(), &BTreeMap::from([(1, 2), (2, 1)]));
        assert_eq!(h.total(), 3);
        let h = histogram([7; 5]).unwrap();
        assert_eq!(h.counts(), &BTreeMap::from([(7, 5)]));
        assert_eq!(h.d_max(), 7);
    }

    #[test]
    fn histogram_errors() {
        assert_eq!(histogram([]), Err(DistributionError::EmptySeries));
        assert_eq!(histogram([1, 0]), Err(DistributionError::NonPositiveValue));
    }

    #[test]
    fn probabilities() {
        let p = probability::<f64>(&histogram([1, 1, 2]).unwrap());
        assert!(close(p[&1], 2.0 / 3.0) && close(p[&2], 1.0 / 3.0));
        let p = probability::<f64>(&histogram([5; 10]).unwrap());
        assert_eq!(p[&5], 1.0);
    }

    #[test]
    fn cumulative_steps() {
        let c = cumulative(&probability::<f64>(&histogram([1, 1, 2]).unwrap()));
        assert!(close(c.at(1), 2.0 / 3.0));
        assert!(close(c.at(2), 1.0));
        let c = cumulative(&probability::<f64>(&histogram([5]).unwrap()));
        assert_eq!(c.at(4), 0.0);
        assert_eq!(c.at(5), 1.0);
        assert_eq!(c.at(100), 1.0);
    }

    #[test]
    fn uniform_one_to_four() {
        let b = binned_from_values::<f64>([1, 2, 3, 4]).unwrap();
        assert_eq!(b.edges, [1, 2, 4]);
        assert!(close(b.mean[0], 0.25) && close(b.mean[1], 0.25) && close(b.mean[2], 0.5));
    }

    #[test]
    fn all_at_one() {
        let b = binned_from_values::<f64>([1; 9]).unwrap();
        assert_eq!(b.edges, [1]);
        assert_eq!(b.mean, [1.0]);
    }

    #[test]
    fn last_edge_rounds_up_to_power_of_two() {
        assert_eq!(bin_edges(1), [1]);
        assert_eq!(bin_edges(5), [1, 2, 4, 8]);
        assert_eq!(bin_edges(8), [1, 2, 4, 8]);
        let b = binned_from_values::<f64>([1, 3, 5]).unwrap();
        assert_eq!(b.edges, [1, 2, 4, 8]);
        assert!(close(b.mean[1], 0.0));
    }

    #[test]
    fn bin_index_matches_edges() {
        let edges = bin_edges(1 << 20);
        for d in 1..5000u64 {
            let i = bin_index(d);
            assert!(d <= edges[i]);
            assert!(i == 0 || d > edges[i - 1]);
        }
    }

    #[test]
    fn pooling_two_windows() {
        let w = |d1: f64| BinnedDistribution {
            edges: vec![1, 2],
            mean: vec![d1, 1.0 - d1],
            sigma: vec![0.0; 2],
            window_count: 1,
            d_max: 2,
        };
        let pooled = pool_windows(&[w(0.4), w(0.6)]).unwrap();
        assert!(close(pooled.mean[0], 0.5));
        assert!(close(pooled.sigma[0], 0.1));
        assert!(pooled.sigma_defined());
        let same = pool_windows(&[w(0.3), w(0.3), w(0.3)]).unwrap();
        assert!(same.sigma.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pooling_pads_short_windows() {
        let a = binned_from_values::<f64>([1, 1]).unwrap();
        let b = binned_from_values::<f64>([1, 4]).unwrap();
        let pooled = pool_windows(&[a, b]).unwrap();
        assert_eq!(pooled.edges, [1, 2, 4]);
        assert!(close(pooled.mean[0], 0.75));
        assert!(close(pooled.mean[2], 0.25));
        assert!(close(pooled.total(), 1.0));
        assert_eq!(pooled.d_max, 4);
    }

    #[test]
    fn pooling_nothing_is_an_error() {
        assert_eq!(pool_windows::<f64>(&[]), Err(DistributionError::NoWindows));
    }

    #[test]
    fn works_in_single_precision() {
        let b = binned_from_values::<f32>([1, 2, 3, 4, 9]).unwrap();
        assert!((b.total() - 1.0).abs() < 1e-6);
    }
}
