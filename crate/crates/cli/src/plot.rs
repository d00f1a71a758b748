//! Plot-ready files derived from an `analyze` output directory.

use std::path::Path;

use anyhow::{anyhow, Result};
use netzm::zm_model::{zm_binned, SumMode, ZmParams};
use serde::{Deserialize, Serialize};

use crate::engine::ConfigRecord;
use crate::report::{
    config_hash, load_tables, read_json, CellRecord, CellStatus, Manifest, OutputDir, Tables,
    MANIFEST,
};
use crate::Outcome;

pub const LEAF_TOPOLOGY_CSV: &str = "leaf_topology.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub bin_edge: u64,
    #[serde(rename = "mean_D")]
    pub mean_d: f64,
    pub sigma: f64,
    #[serde(rename = "model_D")]
    pub model_d: f64,
}

/// One leaf-parameter/topology-fraction pair, averaged over windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub input: String,
    pub nv: u64,
    pub quantity: String,
    pub category: String,
    pub leaf_parameter: f64,
    pub frac_sources: f64,
    pub frac_destinations: f64,
    pub frac_links: f64,
    pub frac_packets: f64,
}

pub const SERIES_POINT_HEADER: &[&str] = &["bin_edge", "mean_D", "sigma", "model_D"];
pub const SCATTER_HEADER: &[&str] = &[
    "input",
    "nv",
    "quantity",
    "category",
    "leaf_parameter",
    "frac_sources",
    "frac_destinations",
    "frac_links",
    "frac_packets",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotConfig {
    pub source_config_hash: String,
}

/// Data and model series for one analysis cell.
pub fn series_for(
    t: &Tables,
    input: &str,
    nv: u64,
    quantity: &str,
) -> Result<Vec<SeriesPoint>, String> {
    let name = format!("input {input:?}, nv {nv}, quantity {quantity}");
    let f = t
        .fits
        .iter()
        .find(|r| r.input == input && r.nv == nv && r.quantity == quantity)
        .ok_or_else(|| format!("missing fit for {name}"))?;
    let bins: Vec<_> = t
        .distributions
        .iter()
        .filter(|r| r.input == input && r.nv == nv && r.quantity == quantity)
        .collect();
    if bins.is_empty() {
        return Err(format!("missing distribution for {name}"));
    }
    let edges: Vec<u64> = bins.iter().map(|r| r.bin_edge).collect();
    let params = ZmParams::new(f.alpha, f.delta, f.d_max).map_err(|e| format!("{name}: {e}"))?;
    let model = zm_binned(&edges, &params, SumMode::Exact).map_err(|e| format!("{name}: {e}"))?;
    Ok(bins
        .iter()
        .zip(model)
        .map(|(b, m)| SeriesPoint {
            bin_edge: b.bin_edge,
            mean_d: b.mean_d,
            sigma: b.sigma,
            model_d: m,
        })
        .collect())
}

/// Window-averaged category fractions paired with the cell's leaf parameter.
pub fn scatter_for(
    t: &Tables,
    input: &str,
    nv: u64,
    quantity: &str,
    leaf_parameter: f64,
) -> Result<Vec<ScatterRow>, String> {
    let topo: Vec<_> = t
        .topology
        .iter()
        .filter(|r| r.input == input && r.nv == nv)
        .collect();
    if topo.is_empty() {
        return Err(format!("missing topology for input {input:?}, nv {nv}"));
    }
    let mut cats: Vec<&str> = Vec::new();
    for r in &topo {
        if !cats.contains(&r.category.as_str()) {
            cats.push(&r.category);
        }
    }
    Ok(cats
        .into_iter()
        .map(|c| {
            let rows: Vec<_> = topo.iter().filter(|r| r.category == c).collect();
            let n = rows.len() as f64;
            let avg = |g: fn(&crate::report::TopologyRow) -> f64| {
                rows.iter().map(|r| g(r)).sum::<f64>() / n
            };
            ScatterRow {
                input: input.to_owned(),
                nv,
                quantity: quantity.to_owned(),
                category: c.to_owned(),
                leaf_parameter,
                frac_sources: avg(|r| r.frac_sources),
                frac_destinations: avg(|r| r.frac_destinations),
                frac_links: avg(|r| r.frac_links),
                frac_packets: avg(|r| r.frac_packets),
            }
        })
        .collect())
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn series_file_name(input_index: usize, input: &str, nv: u64, quantity: &str) -> String {
    let stem = Path::new(input)
        .file_name()
        .map_or_else(|| input.to_owned(), |s| s.to_string_lossy().into_owned());
    format!("series/{input_index}-{}.nv{nv}.{quantity}.csv", slug(&stem))
}

pub fn plotdata(from: &Path, out_dir: &Path) -> Result<Outcome> {
    let manifest: Manifest<ConfigRecord> = read_json(&from.join(MANIFEST))?;
    if manifest.cells.is_empty() {
        return Err(anyhow!(
            "{} lists no analysis cells",
            from.join(MANIFEST).display()
        ));
    }
    let tables = load_tables(from, manifest.config.format)?;
    let mut out = OutputDir::create(out_dir)?;
    let mut scatter = Vec::new();
    let mut cells = Vec::new();
    for c in &manifest.cells {
        if c.status != CellStatus::Ok {
            cells.push(CellRecord {
                status: CellStatus::Skipped,
                ..c.clone()
            });
            continue;
        }
        let idx = manifest
            .config
            .inputs
            .iter()
            .position(|i| *i == c.input)
            .unwrap_or(0);
        let done = series_for(&tables, &c.input, c.nv, &c.quantity).and_then(|s| {
            let leaf = tables
                .fits
                .iter()
                .find(|r| r.input == c.input && r.nv == c.nv && r.quantity == c.quantity)
                .map(|r| r.leaf_parameter)
                .expect("series_for found the fit");
            Ok((s, scatter_for(&tables, &c.input, c.nv, &c.quantity, leaf)?))
        });
        match done {
            Ok((series, rows)) => {
                out.write_csv(
                    &series_file_name(idx, &c.input, c.nv, &c.quantity),
                    &series,
                    SERIES_POINT_HEADER,
                )?;
                scatter.extend(rows);
                cells.push(c.clone());
            }
            Err(msg) => cells.push(CellRecord {
                status: CellStatus::Error,
                error: Some(msg),
                ..c.clone()
            }),
        }
    }
    out.write_csv(LEAF_TOPOLOGY_CSV, &scatter, SCATTER_HEADER)?;
    let outcome = if cells.iter().all(|c| c.status != CellStatus::Error) {
        Outcome::Complete
    } else {
        Outcome::Partial
    };
    let config = PlotConfig {
        source_config_hash: manifest.config_hash.clone(),
    };
    out.finish(
        MANIFEST,
        Manifest {
            command: "plotdata".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(&config),
            config,
            inputs: Vec::new(),
            streams: Vec::new(),
            cells,
            artifacts: Vec::new(),
        },
    )?;
    Ok(outcome)
}
