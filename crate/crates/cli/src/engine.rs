//! Runs the analysis cross-product and collects rows and manifest records.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use netzm::distributions::{binned_from_values, pool_windows, BinnedDistribution};
use netzm::ingest::{stream_windows, OnParseError, RecordReader, StreamStats, ValidityPolicy};
use netzm::matrix::{Quantity, TrafficMatrix};
use netzm::topology::{decompose, TopologyDecomposition};
use netzm::zm_fit::{fit, AlphaGrid, FitConfig};
use netzm::zm_model::SumMode;
use serde::{Deserialize, Serialize};

use crate::report::{
    config_hash, hash_reader, write_tables, CellRecord, CellStatus, DistributionRow, FitRow,
    Format, InputRecord, Manifest, OutputDir, SeriesRow, StreamRecord, Tables, TopologyRow,
    MANIFEST, SERIES_HEADER,
};
use crate::Outcome;

pub const TIMESERIES_CSV: &str = "timeseries.csv";
pub const TIMESERIES_JSON: &str = "timeseries.json";
pub const TIMESERIES_MANIFEST: &str = "timeseries-manifest.json";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub window_sizes: Vec<usize>,
    pub quantities: Vec<Quantity>,
    pub supernode_k: usize,
    pub grid: AlphaGrid,
    pub dsum: Option<u64>,
    pub format: Format,
    pub out: PathBuf,
    pub policy: ValidityPolicy,
    pub on_parse_error: OnParseError,
}

/// Serializable view of a [`RunConfig`]. The output directory is left out
/// so that identical runs into different directories hash the same.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub inputs: Vec<String>,
    pub window_sizes: Vec<usize>,
    pub quantities: Vec<String>,
    pub supernode_k: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub dsum: Option<u64>,
    pub format: Format,
    pub protocols: Vec<String>,
    pub on_parse_error: String,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            bail!("at least one --input is required");
        }
        if self.window_sizes.is_empty() {
            bail!("at least one --nv is required");
        }
        if self.window_sizes.contains(&0) {
            bail!("--nv must be at least 1");
        }
        if self.quantities.is_empty() {
            bail!("at least one quantity is required");
        }
        if self.dsum == Some(0) {
            bail!("--dsum must be at least 1");
        }
        self.grid.values::<f64>()?;
        Ok(())
    }

    pub fn record(&self) -> ConfigRecord {
        ConfigRecord {
            inputs: self.inputs.iter().map(|p| display(p)).collect(),
            window_sizes: self.window_sizes.clone(),
            quantities: self
                .quantities
                .iter()
                .map(|q| q.as_str().to_owned())
                .collect(),
            supernode_k: self.supernode_k,
            alpha_min: self.grid.min,
            alpha_max: self.grid.max,
            alpha_step: self.grid.step,
            dsum: self.dsum,
            format: self.format,
            protocols: self
                .policy
                .accepted_protocols()
                .iter()
                .map(|p| p.as_str().to_owned())
                .collect(),
            on_parse_error: match self.on_parse_error {
                OnParseError::Skip => "skip".into(),
                OnParseError::Abort => "abort".into(),
            },
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        let cfg = FitConfig {
            grid: self.grid,
            ..FitConfig::default()
        };
        match self.dsum {
            Some(d_sum) => cfg.with_mode(SumMode::Approx { d_sum }),
            None => cfg,
        }
    }
}

pub fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// One window reduced to what the reports need.
pub struct WindowResult {
    pub index: usize,
    pub start_time: f64,
    pub topology: Option<TopologyDecomposition>,
    pub distributions: Vec<BinnedDistribution<f64>>,
}

pub struct Scan {
    pub stats: StreamStats,
    pub skipped_rows: u64,
    pub windows: Vec<WindowResult>,
}

/// Streams one input at one window size.
pub fn scan(path: &Path, n_v: usize, cfg: &RunConfig, with_topology: bool) -> Result<Scan, String> {
    let file = File::open(path).map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    let mut reader = RecordReader::new(BufReader::new(file), cfg.on_parse_error);
    let mut windows = Vec::new();
    let stats = {
        let mut stream =
            stream_windows(&mut reader, cfg.policy.clone(), n_v).map_err(|e| e.to_string())?;
        for w in stream.by_ref() {
            let w = w.map_err(|e| format!("{}: {e}", path.display()))?;
            let m = TrafficMatrix::from_records(w.index, &w.records);
            let topology = if with_topology {
                Some(
                    decompose(&m, cfg.supernode_k)
                        .map_err(|e| format!("window {}: {e}", w.index))?,
                )
            } else {
                None
            };
            let distributions = cfg
                .quantities
                .iter()
                .map(|&q| binned_from_values(m.quantity(q).raw_values()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("window {}: {e}", w.index))?;
            windows.push(WindowResult {
                index: w.index,
                start_time: w.start_time(),
                topology,
                distributions,
            });
        }
        stream.stats()
    };
    Ok(Scan {
        stats,
        skipped_rows: reader.skipped_rows(),
        windows,
    })
}

fn stream_record(
    input: &str,
    nv: usize,
    scan: Option<&Scan>,
    error: Option<String>,
) -> StreamRecord {
    let (stats, skipped) = scan.map_or((StreamStats::default(), 0), |s| (s.stats, s.skipped_rows));
    StreamRecord {
        input: input.to_owned(),
        nv: nv as u64,
        total_records: stats.total_records,
        invalid_records: stats.invalid_records,
        skipped_rows: skipped,
        out_of_order: stats.out_of_order,
        windows: stats.windows_emitted,
        remainder: stats.remainder,
        error,
    }
}

fn cell(input: &str, nv: usize, q: Quantity, error: Option<String>) -> CellRecord {
    CellRecord {
        input: input.to_owned(),
        nv: nv as u64,
        quantity: q.as_str().to_owned(),
        status: if error.is_some() {
            CellStatus::Error
        } else {
            CellStatus::Ok
        },
        error,
    }
}

fn input_record(path: &Path) -> InputRecord {
    let hashed = File::open(path).and_then(hash_reader);
    match hashed {
        Ok(h) => InputRecord {
            path: display(path),
            sha256: Some(h),
            error: None,
        },
        Err(e) => InputRecord {
            path: display(path),
            sha256: None,
            error: Some(e.to_string()),
        },
    }
}

/// Shared bookkeeping for the per-cell commands.
struct Run<'a> {
    cfg: &'a RunConfig,
    inputs: Vec<InputRecord>,
    streams: Vec<StreamRecord>,
    cells: Vec<CellRecord>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Run {
            cfg,
            inputs: Vec::new(),
            streams: Vec::new(),
            cells: Vec::new(),
        }
    }

    fn fail_all(&mut self, input: &str, nv: usize, msg: &str) {
        for &q in &self.cfg.quantities {
            self.cells.push(cell(input, nv, q, Some(msg.to_owned())));
        }
    }

    fn outcome(&self) -> Outcome {
        if self.cells.iter().all(|c| c.status == CellStatus::Ok) {
            Outcome::Complete
        } else {
            Outcome::Partial
        }
    }

    /// Calls `f` for every (input, n_v) whose scan produced windows.
    fn for_each_scan(
        &mut self,
        with_topology: bool,
        min_windows: usize,
        mut f: impl FnMut(&mut Self, &str, usize, Scan),
    ) {
        let cfg = self.cfg;
        for path in &cfg.inputs {
            let input = display(path);
            let rec = input_record(path);
            let unreadable = rec.error.clone();
            self.inputs.push(rec);
            for &nv in &cfg.window_sizes {
                if let Some(e) = &unreadable {
                    let msg = format!("unreadable input: {e}");
                    self.streams
                        .push(stream_record(&input, nv, None, Some(msg.clone())));
                    self.fail_all(&input, nv, &msg);
                    continue;
                }
                match scan(path, nv, cfg, with_topology) {
                    Err(msg) => {
                        self.streams
                            .push(stream_record(&input, nv, None, Some(msg.clone())));
                        self.fail_all(&input, nv, &msg);
                    }
                    Ok(s) => {
                        self.streams.push(stream_record(&input, nv, Some(&s), None));
                        if s.windows.len() < min_windows {
                            let msg = format!(
                                "needs at least {min_windows} window(s) of {nv} valid packets, found {} ({} valid records left over)",
                                s.windows.len(),
                                s.stats.remainder
                            );
                            self.fail_all(&input, nv, &msg);
                        } else {
                            f(self, &input, nv, s);
                        }
                    }
                }
            }
        }
    }

    fn manifest(self, command: &str) -> Manifest<ConfigRecord> {
        let config = self.cfg.record();
        Manifest {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: config_hash(&config),
            config,
            inputs: self.inputs,
            streams: self.streams,
            cells: self.cells,
            artifacts: Vec::new(),
        }
    }
}

/// Computes the analysis tables without writing anything.
pub fn analyze_tables(cfg: &RunConfig) -> (Tables, Manifest<ConfigRecord>, Outcome) {
    let mut tables = Tables::default();
    let fit_cfg = cfg.fit_config();
    let mut run = Run::new(cfg);
    run.for_each_scan(true, 1, |run, input, nv, s| {
        for w in &s.windows {
            let topo = w.topology.as_ref().expect("topology requested");
            for (c, share) in topo.iter() {
                tables.topology.push(TopologyRow {
                    input: input.to_owned(),
                    nv: nv as u64,
                    window_index: w.index,
                    category: c.as_str().to_owned(),
                    sources: share.tally.sources,
                    destinations: share.tally.destinations,
                    unique_links: share.tally.unique_links,
                    packets: share.tally.packets,
                    frac_sources: share.frac_sources,
                    frac_destinations: share.frac_destinations,
                    frac_links: share.frac_links,
                    frac_packets: share.frac_packets,
                });
            }
        }
        for (qi, &q) in cfg.quantities.iter().enumerate() {
            let per_window: Vec<BinnedDistribution<f64>> = s
                .windows
                .iter()
                .map(|w| w.distributions[qi].clone())
                .collect();
            let pooled = match pool_windows(&per_window) {
                Ok(p) => p,
                Err(e) => {
                    run.cells.push(cell(input, nv, q, Some(e.to_string())));
                    continue;
                }
            };
            for (i, &edge) in pooled.edges.iter().enumerate() {
                tables.distributions.push(DistributionRow {
                    input: input.to_owned(),
                    nv: nv as u64,
                    quantity: q.as_str().to_owned(),
                    bin_edge: edge,
                    mean_d: pooled.mean[i],
                    sigma: pooled.sigma[i],
                    window_count: pooled.window_count,
                });
            }
            match fit(&pooled, pooled.d_max, &fit_cfg) {
                Ok(f) => {
                    tables.fits.push(FitRow {
                        input: input.to_owned(),
                        quantity: q.as_str().to_owned(),
                        nv: nv as u64,
                        alpha: f.params.alpha,
                        delta: f.params.delta,
                        leaf_parameter: f.leaf_parameter,
                        metric: f.metric,
                        points_used: f.points_used,
                        converged: f.converged,
                        d_max: f.params.d_max,
                    });
                    run.cells.push(cell(input, nv, q, None));
                }
                Err(e) => run
                    .cells
                    .push(cell(input, nv, q, Some(format!("fit failed: {e}")))),
            }
        }
    });
    let outcome = run.outcome();
    (tables, run.manifest("analyze"), outcome)
}

pub fn analyze(cfg: &RunConfig) -> Result<Outcome> {
    let (tables, manifest, outcome) = analyze_tables(cfg);
    let mut out = OutputDir::create(&cfg.out)?;
    write_tables(&mut out, &tables, cfg.format)?;
    out.finish(MANIFEST, manifest)?;
    Ok(outcome)
}

/// Per-window binned fractions; every window of a series shares the
/// same bin edges, padded with zeros.
pub fn timeseries_rows(cfg: &RunConfig) -> (Vec<SeriesRow>, Manifest<ConfigRecord>, Outcome) {
    let mut rows = Vec::new();
    let mut run = Run::new(cfg);
    run.for_each_scan(false, 2, |run, input, nv, s| {
        for (qi, &q) in cfg.quantities.iter().enumerate() {
            let edges = s
                .windows
                .iter()
                .map(|w| &w.distributions[qi].edges)
                .max_by_key(|e| e.len())
                .expect("at least two windows")
                .clone();
            for w in &s.windows {
                let d = &w.distributions[qi];
                for (i, &edge) in edges.iter().enumerate() {
                    rows.push(SeriesRow {
                        input: input.to_owned(),
                        nv: nv as u64,
                        quantity: q.as_str().to_owned(),
                        window_index: w.index,
                        start_time: w.start_time,
                        bin_edge: edge,
                        d: d.mean.get(i).copied().unwrap_or(0.0),
                    });
                }
            }
            run.cells.push(cell(input, nv, q, None));
        }
    });
    let outcome = run.outcome();
    (rows, run.manifest("timeseries"), outcome)
}

pub fn timeseries(cfg: &RunConfig) -> Result<Outcome> {
    let (rows, manifest, outcome) = timeseries_rows(cfg);
    let mut out = OutputDir::create(&cfg.out)?;
    match cfg.format {
        Format::Csv => out.write_csv(TIMESERIES_CSV, &rows, SERIES_HEADER)?,
        Format::Json => out.write_json(TIMESERIES_JSON, &crate::report::nest_series(&rows))?,
    }
    out.finish(TIMESERIES_MANIFEST, manifest)?;
    Ok(outcome)
}
