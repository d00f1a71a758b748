//! Report rows, nested JSON views, manifests, and file output.
//!
//! CSV reports are flat tables. JSON reports nest the same rows by
//! input, then window size, then quantity; [`nest`] and [`flatten`]
//! convert between the two without touching values.

use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub input: String,
    pub quantity: String,
    pub nv: u64,
    pub alpha: f64,
    pub delta: f64,
    pub leaf_parameter: f64,
    pub metric: f64,
    pub points_used: usize,
    pub converged: bool,
    pub d_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub input: String,
    pub nv: u64,
    pub quantity: String,
    pub bin_edge: u64,
    #[serde(rename = "mean_D")]
    pub mean_d: f64,
    pub sigma: f64,
    pub window_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyRow {
    pub input: String,
    pub nv: u64,
    pub window_index: usize,
    pub category: String,
    pub sources: u64,
    pub destinations: u64,
    pub unique_links: u64,
    pub packets: u64,
    pub frac_sources: f64,
    pub frac_destinations: f64,
    pub frac_links: f64,
    pub frac_packets: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub input: String,
    pub nv: u64,
    pub quantity: String,
    pub window_index: usize,
    pub start_time: f64,
    pub bin_edge: u64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// Flat analysis output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tables {
    pub fits: Vec<FitRow>,
    pub distributions: Vec<DistributionRow>,
    pub topology: Vec<TopologyRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub inputs: Vec<JsonInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonInput {
    pub input: String,
    pub window_sizes: Vec<JsonWindowSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonWindowSize {
    pub nv: u64,
    pub topology: Vec<JsonTopologyWindow>,
    pub quantities: Vec<JsonQuantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonTopologyWindow {
    pub window_index: usize,
    pub categories: Vec<JsonCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonCategory {
    pub category: String,
    pub sources: u64,
    pub destinations: u64,
    pub unique_links: u64,
    pub packets: u64,
    pub frac_sources: f64,
    pub frac_destinations: f64,
    pub frac_links: f64,
    pub frac_packets: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonQuantity {
    pub quantity: String,
    pub distribution: Vec<JsonBin>,
    pub fit: Option<JsonFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonBin {
    pub bin_edge: u64,
    #[serde(rename = "mean_D")]
    pub mean_d: f64,
    pub sigma: f64,
    pub window_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonFit {
    pub alpha: f64,
    pub delta: f64,
    pub leaf_parameter: f64,
    pub metric: f64,
    pub points_used: usize,
    pub converged: bool,
    pub d_max: u64,
}

/// Distinct keys in order of first appearance.
fn ordered<K: PartialEq + Clone>(keys: impl IntoIterator<Item = K>) -> Vec<K> {
    let mut out: Vec<K> = Vec::new();
    for k in keys {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

pub fn nest(t: &Tables) -> JsonReport {
    let inputs = ordered(
        t.topology
            .iter()
            .map(|r| &r.input)
            .chain(t.distributions.iter().map(|r| &r.input))
            .chain(t.fits.iter().map(|r| &r.input)),
    );
    let inputs = inputs
        .into_iter()
        .map(|input| {
            let nvs = ordered(
                t.topology
                    .iter()
                    .filter(|r| &r.input == input)
                    .map(|r| r.nv)
                    .chain(
                        t.distributions
                            .iter()
                            .filter(|r| &r.input == input)
                            .map(|r| r.nv),
                    )
                    .chain(t.fits.iter().filter(|r| &r.input == input).map(|r| r.nv)),
            );
            let window_sizes = nvs
                .into_iter()
                .map(|nv| {
                    let topo: Vec<&TopologyRow> = t
                        .topology
                        .iter()
                        .filter(|r| &r.input == input && r.nv == nv)
                        .collect();
                    let topology = ordered(topo.iter().map(|r| r.window_index))
                        .into_iter()
                        .map(|w| JsonTopologyWindow {
                            window_index: w,
                            categories: topo
                                .iter()
                                .filter(|r| r.window_index == w)
                                .map(|r| JsonCategory {
                                    category: r.category.clone(),
                                    sources: r.sources,
                                    destinations: r.destinations,
                                    unique_links: r.unique_links,
                                    packets: r.packets,
                                    frac_sources: r.frac_sources,
                                    frac_destinations: r.frac_destinations,
                                    frac_links: r.frac_links,
                                    frac_packets: r.frac_packets,
                                })
                                .collect(),
                        })
                        .collect();
                    let dists: Vec<&DistributionRow> = t
                        .distributions
                        .iter()
                        .filter(|r| &r.input == input && r.nv == nv)
                        .collect();
                    let fits: Vec<&FitRow> = t
                        .fits
                        .iter()
                        .filter(|r| &r.input == input && r.nv == nv)
                        .collect();
                    let quantities = ordered(
                        dists
                            .iter()
                            .map(|r| &r.quantity)
                            .chain(fits.iter().map(|r| &r.quantity)),
                    )
                    .into_iter()
                    .map(|q| JsonQuantity {
                        quantity: q.clone(),
                        distribution: dists
                            .iter()
                            .filter(|r| &r.quantity == q)
                            .map(|r| JsonBin {
                                bin_edge: r.bin_edge,
                                mean_d: r.mean_d,
                                sigma: r.sigma,
                                window_count: r.window_count,
                            })
                            .collect(),
                        fit: fits.iter().find(|r| &r.quantity == q).map(|r| JsonFit {
                            alpha: r.alpha,
                            delta: r.delta,
                            leaf_parameter: r.leaf_parameter,
                            metric: r.metric,
                            points_used: r.points_used,
                            converged: r.converged,
                            d_max: r.d_max,
                        }),
                    })
                    .collect();
                    JsonWindowSize {
                        nv,
                        topology,
                        quantities,
                    }
                })
                .collect();
            JsonInput {
                input: input.clone(),
                window_sizes,
            }
        })
        .collect();
    JsonReport { inputs }
}

pub fn flatten(r: &JsonReport) -> Tables {
    let mut t = Tables::default();
    for inp in &r.inputs {
        for ws in &inp.window_sizes {
            for w in &ws.topology {
                for c in &w.categories {
                    t.topology.push(TopologyRow {
                        input: inp.input.clone(),
                        nv: ws.nv,
                        window_index: w.window_index,
                        category: c.category.clone(),
                        sources: c.sources,
                        destinations: c.destinations,
                        unique_links: c.unique_links,
                        packets: c.packets,
                        frac_sources: c.frac_sources,
                        frac_destinations: c.frac_destinations,
                        frac_links: c.frac_links,
                        frac_packets: c.frac_packets,
                    });
                }
            }
            for q in &ws.quantities {
                for b in &q.distribution {
                    t.distributions.push(DistributionRow {
                        input: inp.input.clone(),
                        nv: ws.nv,
                        quantity: q.quantity.clone(),
                        bin_edge: b.bin_edge,
                        mean_d: b.mean_d,
                        sigma: b.sigma,
                        window_count: b.window_count,
                    });
                }
                if let Some(f) = &q.fit {
                    t.fits.push(FitRow {
                        input: inp.input.clone(),
                        quantity: q.quantity.clone(),
                        nv: ws.nv,
                        alpha: f.alpha,
                        delta: f.delta,
                        leaf_parameter: f.leaf_parameter,
                        metric: f.metric,
                        points_used: f.points_used,
                        converged: f.converged,
                        d_max: f.d_max,
                    });
                }
            }
        }
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub inputs: Vec<SeriesInput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesInput {
    pub input: String,
    pub window_sizes: Vec<SeriesWindowSize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesWindowSize {
    pub nv: u64,
    pub quantities: Vec<SeriesQuantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesQuantity {
    pub quantity: String,
    pub bin_edges: Vec<u64>,
    pub windows: Vec<SeriesWindow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesWindow {
    pub window_index: usize,
    pub start_time: f64,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
}

pub fn nest_series(rows: &[SeriesRow]) -> SeriesReport {
    let inputs = ordered(rows.iter().map(|r| &r.input))
        .into_iter()
        .map(|input| {
            let mine: Vec<&SeriesRow> = rows.iter().filter(|r| &r.input == input).collect();
            let window_sizes = ordered(mine.iter().map(|r| r.nv))
                .into_iter()
                .map(|nv| {
                    let at_nv: Vec<&&SeriesRow> = mine.iter().filter(|r| r.nv == nv).collect();
                    let quantities = ordered(at_nv.iter().map(|r| &r.quantity))
                        .into_iter()
                        .map(|q| {
                            let cell: Vec<&&&SeriesRow> =
                                at_nv.iter().filter(|r| &r.quantity == q).collect();
                            let windows = ordered(cell.iter().map(|r| r.window_index))
                                .into_iter()
                                .map(|w| {
                                    let bins: Vec<&&&&SeriesRow> =
                                        cell.iter().filter(|r| r.window_index == w).collect();
                                    SeriesWindow {
                                        window_index: w,
                                        start_time: bins[0].start_time,
                                        d: bins.iter().map(|r| r.d).collect(),
                                    }
                                })
                                .collect();
                            SeriesQuantity {
                                quantity: q.clone(),
                                bin_edges: ordered(cell.iter().map(|r| r.bin_edge)),
                                windows,
                            }
                        })
                        .collect();
                    SeriesWindowSize { nv, quantities }
                })
                .collect();
            SeriesInput {
                input: input.clone(),
                window_sizes,
            }
        })
        .collect();
    SeriesReport { inputs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Error,
    /// Not attempted because an upstream cell failed.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub input: String,
    pub nv: u64,
    pub quantity: String,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// Ingest accounting for one pass over an input at one window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub input: String,
    pub nv: u64,
    pub total_records: u64,
    pub invalid_records: u64,
    pub skipped_rows: u64,
    pub out_of_order: u64,
    pub windows: u64,
    pub remainder: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub command: String,
    pub version: String,
    pub config: C,
    pub config_hash: String,
    #[serde(default)]
    pub inputs: Vec<InputRecord>,
    #[serde(default)]
    pub streams: Vec<StreamRecord>,
    #[serde(default)]
    pub cells: Vec<CellRecord>,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_reader<R: Read>(mut r: R) -> io::Result<String> {
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

pub fn config_hash<C: Serialize>(config: &C) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("config serializes"))
}

/// Writes files under one directory and remembers what was written.
pub struct OutputDir<'a> {
    root: &'a Path,
    written: Vec<Artifact>,
}

impl<'a> OutputDir<'a> {
    pub fn create(root: &'a Path) -> Result<Self> {
        fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutputDir {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = BufWriter::new(
            File::create(&path).with_context(|| format!("cannot write {}", path.display()))?,
        );
        f.write_all(bytes)?;
        f.flush()?;
        self.written.push(Artifact {
            path: name.to_owned(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_csv<T: Serialize>(
        &mut self,
        name: &str,
        rows: &[T],
        header: &[&str],
    ) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn artifacts(&self) -> &[Artifact] {
        &self.written
    }

    /// Writes the manifest itself; it is not listed among its artifacts.
    pub fn finish<C: Serialize>(self, name: &str, mut manifest: Manifest<C>) -> Result<()> {
        manifest.artifacts = self.written;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.root.join(name), bytes)
            .with_context(|| format!("cannot write manifest {name}"))
    }
}

pub const FIT_HEADER: &[&str] = &[
    "input",
    "quantity",
    "nv",
    "alpha",
    "delta",
    "leaf_parameter",
    "metric",
    "points_used",
    "converged",
    "d_max",
];
pub const DISTRIBUTION_HEADER: &[&str] = &[
    "input",
    "nv",
    "quantity",
    "bin_edge",
    "mean_D",
    "sigma",
    "window_count",
];
pub const TOPOLOGY_HEADER: &[&str] = &[
    "input",
    "nv",
    "window_index",
    "category",
    "sources",
    "destinations",
    "unique_links",
    "packets",
    "frac_sources",
    "frac_destinations",
    "frac_links",
    "frac_packets",
];
pub const SERIES_HEADER: &[&str] = &[
    "input",
    "nv",
    "quantity",
    "window_index",
    "start_time",
    "bin_edge",
    "D",
];

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("malformed rows in {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("malformed JSON in {}", path.display()))
}

pub const MANIFEST: &str = "manifest.json";
pub const FITS_CSV: &str = "fits.csv";
pub const DISTRIBUTIONS_CSV: &str = "distributions.csv";
pub const TOPOLOGY_CSV: &str = "topology.csv";
pub const REPORT_JSON: &str = "report.json";

/// Loads analysis tables from a directory in the given format.
pub fn load_tables(dir: &Path, format: Format) -> Result<Tables> {
    match format {
        Format::Csv => Ok(Tables {
            fits: read_csv(&dir.join(FITS_CSV))?,
            distributions: read_csv(&dir.join(DISTRIBUTIONS_CSV))?,
            topology: read_csv(&dir.join(TOPOLOGY_CSV))?,
        }),
        Format::Json => Ok(flatten(&read_json(&dir.join(REPORT_JSON))?)),
    }
}

/// Writes analysis tables in the given format.
pub fn write_tables(out: &mut OutputDir<'_>, t: &Tables, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            out.write_csv(FITS_CSV, &t.fits, FIT_HEADER)?;
            out.write_csv(DISTRIBUTIONS_CSV, &t.distributions, DISTRIBUTION_HEADER)?;
            out.write_csv(TOPOLOGY_CSV, &t.topology, TOPOLOGY_HEADER)
        }
        Format::Json => out.write_json(REPORT_JSON, &nest(t)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tables {
        let fit = |input: &str, q: &str, nv| FitRow {
            input: input.into(),
            quantity: q.into(),
            nv,
            alpha: 1.8,
            delta: 2.0,
            leaf_parameter: 0.138,
            metric: 0.5,
            points_used: 9,
            converged: true,
            d_max: 300,
        };
        let bin = |input: &str, q: &str, nv, e| DistributionRow {
            input: input.into(),
            nv,
            quantity: q.into(),
            bin_edge: e,
            mean_d: 0.25,
            sigma: 0.01,
            window_count: 3,
        };
        let topo = |input: &str, nv, w, c: &str| TopologyRow {
            input: input.into(),
            nv,
            window_index: w,
            category: c.into(),
            sources: 1,
            destinations: 2,
            unique_links: 3,
            packets: 4,
            frac_sources: 0.1,
            frac_destinations: 0.2,
            frac_links: 0.3,
            frac_packets: 0.4,
        };
        Tables {
            fits: vec![fit("a", "source_fanout", 10), fit("b", "source_fanout", 20)],
            distributions: vec![
                bin("a", "source_fanout", 10, 1),
                bin("a", "source_fanout", 10, 2),
                bin("a", "link_packets", 10, 1),
                bin("b", "source_fanout", 20, 1),
            ],
            topology: vec![
                topo("a", 10, 0, "core"),
                topo("a", 10, 0, "remainder"),
                topo("a", 10, 1, "core"),
            ],
        }
    }

    #[test]
    fn nest_and_flatten_round_trip() {
        let t = sample();
        let nested = nest(&t);
        assert_eq!(nested.inputs.len(), 2);
        assert_eq!(nested.inputs[0].window_sizes[0].topology.len(), 2);
        assert!(nested.inputs[0].window_sizes[0].quantities[1].fit.is_none());
        let back = flatten(&nested);
        assert_eq!(back.fits, t.fits);
        assert_eq!(back.topology, t.topology);
        let mut a = back.distributions.clone();
        let mut b = t.distributions.clone();
        let key = |r: &DistributionRow| (r.input.clone(), r.nv, r.quantity.clone(), r.bin_edge);
        a.sort_by_key(key);
        b.sort_by_key(key);
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip() {
        let dir = std::env::temp_dir().join(format!("netzm-report-{}", std::process::id()));
        let t = sample();
        let mut out = OutputDir::create(&dir).unwrap();
        write_tables(&mut out, &t, Format::Csv).unwrap();
        assert_eq!(out.artifacts().len(), 3);
        assert_eq!(load_tables(&dir, Format::Csv).unwrap(), t);
        let head = fs::read_to_string(dir.join(FITS_CSV)).unwrap();
        assert!(head.starts_with(
            "input,quantity,nv,alpha,delta,leaf_parameter,metric,points_used,converged,d_max\n"
        ));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn series_nesting_groups_windows() {
        let row = |w, e, d| SeriesRow {
            input: "x".into(),
            nv: 5,
            quantity: "source_fanout".into(),
            window_index: w,
            start_time: w as f64,
            bin_edge: e,
            d,
        };
        let r = nest_series(&[
            row(0, 1, 0.7),
            row(0, 2, 0.3),
            row(1, 1, 0.6),
            row(1, 2, 0.4),
        ]);
        let q = &r.inputs[0].window_sizes[0].quantities[0];
        assert_eq!(q.bin_edges, [1, 2]);
        assert_eq!(q.windows[1].d, [0.6, 0.4]);
    }
}
