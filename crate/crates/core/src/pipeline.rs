//! Per-window analysis: matrix, topology, and binned quantity distributions.

use thiserror::Error;

use crate::distributions::{binned_from_values, BinnedDistribution, DistributionError};
use crate::ingest::Window;
use crate::matrix::{Aggregates, Quantity, TrafficMatrix};
use crate::scalar::Scalar;
use crate::topology::{decompose, TopologyDecomposition, TopologyError};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

pub type QuantityDistributions<F> = Vec<(Quantity, BinnedDistribution<F>)>;

#[derive(Debug, Clone)]
pub struct WindowSummary<F> {
    pub index: usize,
    pub start_time: f64,
    pub end_time: f64,
    pub aggregates: Aggregates,
    pub topology: TopologyDecomposition,
    pub distributions: QuantityDistributions<F>,
}

impl<F> WindowSummary<F> {
    pub fn distribution(&self, q: Quantity) -> Option<&BinnedDistribution<F>> {
        self.distributions
            .iter()
            .find(|(x, _)| *x == q)
            .map(|(_, d)| d)
    }
}

pub fn summarize_matrix<F: Scalar>(
    m: &TrafficMatrix,
    quantities: &[Quantity],
    k_supernodes: usize,
) -> Result<(TopologyDecomposition, QuantityDistributions<F>), PipelineError> {
    let topology = decompose(m, k_supernodes)?;
    let distributions = quantities
        .iter()
        .map(|&q| Ok((q, binned_from_values(m.quantity(q).raw_values())?)))
        .collect::<Result<Vec<_>, DistributionError>>()?;
    Ok((topology, distributions))
}

pub fn analyze_window<F: Scalar>(
    window: &Window,
    quantities: &[Quantity],
    k_supernodes: usize,
) -> Result<WindowSummary<F>, PipelineError> {
    let m = TrafficMatrix::from_records(window.index, &window.records);
    let (topology, distributions) = summarize_matrix(&m, quantities, k_supernodes)?;
    Ok(WindowSummary {
        index: window.index,
        start_time: window.start_time(),
        end_time: window.end_time(),
        aggregates: m.aggregates(),
        topology,
        distributions,
    })
}
