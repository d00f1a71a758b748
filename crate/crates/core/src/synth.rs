//! Synthetic packet streams with planted structure.
//!
//! [`generate`] plants a labeled mix of star leaves, isolated pairs, a core
//! with its leaves, and background traffic toward a few secondary hubs.
//! [`generate_zm_stream`] plants a source fan-out distribution drawn from a
//! modified Zipf–Mandelbrot model. Both are deterministic for a fixed seed.

use std::collections::HashSet;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{PacketRecord, Protocol};
use crate::topology::{Category, DEFAULT_SUPERNODE_K};
use crate::zm_model::{ZmParams, ZmSampler};

const TICK: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("invalid mix: {0}")]
    Invalid(String),
    #[error("infeasible mix: {0}")]
    Infeasible(String),
}

/// Planted topology mix for one or more consecutive windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyMixSpec {
    /// Packets per window.
    pub n_v: usize,
    /// Distinct links per window; defaults to `n_v / 4`.
    pub links: Option<usize>,
    pub star_links_frac: f64,
    pub isolated_links_frac: f64,
    pub core_links_frac: f64,
    pub core_leaf_links_frac: f64,
    pub core_size: usize,
    /// Secondary hubs that absorb the background links.
    pub decoy_hubs: usize,
    /// Weights core sources by draws from this model when set.
    pub degree_params: Option<ZmParams<f64>>,
    pub windows: usize,
    pub seed: u64,
}

impl Default for TopologyMixSpec {
    fn default() -> Self {
        TopologyMixSpec {
            n_v: 100_000,
            links: None,
            star_links_frac: 0.4,
            isolated_links_frac: 0.3,
            core_links_frac: 0.2,
            core_leaf_links_frac: 0.1,
            core_size: 1_000,
            decoy_hubs: DEFAULT_SUPERNODE_K - 1,
            degree_params: None,
            windows: 1,
            seed: 0,
        }
    }
}

/// Per-category link counts planted in each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PlantedCounts {
    pub links: usize,
    pub star: usize,
    pub isolated: usize,
    pub core: usize,
    pub core_leaves: usize,
    pub background: usize,
}

impl TopologyMixSpec {
    pub fn link_count(&self) -> usize {
        self.links.unwrap_or(self.n_v / 4).max(1)
    }

    /// Validates the spec and returns the link counts each window plants.
    pub fn planted_counts(&self) -> Result<PlantedCounts, SpecError> {
        let fracs = [
            self.star_links_frac,
            self.isolated_links_frac,
            self.core_links_frac,
            self.core_leaf_links_frac,
        ];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(SpecError::Invalid(format!(
                "fractions {fracs:?} must lie in [0, 1]"
            )));
        }
        if fracs.iter().sum::<f64>() > 1.0 + 1e-12 {
            return Err(SpecError::Invalid(format!(
                "fractions {fracs:?} sum above 1"
            )));
        }
        if self.n_v == 0 || self.windows == 0 {
            return Err(SpecError::Invalid(
                "n_v and windows must be positive".into(),
            ));
        }
        let links = self.link_count();
        if links > self.n_v {
            return Err(SpecError::Invalid(format!(
                "{links} links cannot fit in {} packets",
                self.n_v
            )));
        }
        let count = |f: f64| (f * links as f64).round() as usize;
        let (star, isolated, core, core_leaves) = (
            count(self.star_links_frac),
            count(self.isolated_links_frac),
            count(self.core_links_frac),
            count(self.core_leaf_links_frac),
        );
        let planted = star + isolated + core + core_leaves;
        if planted > links {
            return Err(SpecError::Infeasible(format!(
                "rounded counts {planted} exceed {links} links"
            )));
        }
        let n = self.core_size;
        if core > 0 {
            if n < 2 {
                return Err(SpecError::Invalid(
                    "core_size must be at least 2 with a core".into(),
                ));
            }
            if core > n * (n - 1) {
                return Err(SpecError::Infeasible(format!(
                    "{core} core links do not fit among {n} core nodes"
                )));
            }
            if core < 2 * n {
                return Err(SpecError::Infeasible(format!(
                    "{core} core links cannot give {n} core nodes two links per side"
                )));
            }
        }
        if core_leaves > 0 && core == 0 {
            return Err(SpecError::Infeasible("core leaves need a core".into()));
        }
        let background = links - planted;
        if background > 0 && self.decoy_hubs == 0 {
            return Err(SpecError::Infeasible(
                "background links need at least one decoy hub".into(),
            ));
        }
        if background > 0 {
            let load = background.div_ceil(decoy_count(self.decoy_hubs, background));
            if load >= star {
                return Err(SpecError::Infeasible(format!(
                    "{load} background links per decoy hub would outrank the {star}-link hub"
                )));
            }
        }
        Ok(PlantedCounts {
            links,
            star,
            isolated,
            core,
            core_leaves,
            background,
        })
    }
}

fn decoy_count(decoy_hubs: usize, background: usize) -> usize {
    decoy_hubs.min((background / 2).max(1))
}

/// A planted link and the category it was generated as.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledLink {
    pub window: usize,
    pub src: String,
    pub dst: String,
    pub category: Category,
}

#[derive(Debug, Clone)]
pub struct SyntheticStream {
    pub records: Vec<PacketRecord>,
    pub labels: Vec<LabeledLink>,
    pub counts: PlantedCounts,
    pub hub: String,
    pub decoys: Vec<String>,
}

/// Fresh node addresses from a monotone counter, rendered as dotted quads.
#[derive(Debug, Clone, Default)]
pub struct AddressPool {
    next: u32,
}

impl AddressPool {
    pub fn fresh(&mut self) -> String {
        let n = self.next;
        self.next += 1;
        format!(
            "{}.{}.{}.{}",
            10 + (n >> 24),
            (n >> 16) & 0xff,
            (n >> 8) & 0xff,
            n & 0xff
        )
    }
}

/// Generates `spec.windows` windows of exactly `spec.n_v` valid records.
pub fn generate(spec: &TopologyMixSpec) -> Result<SyntheticStream, SpecError> {
    let counts = spec.planted_counts()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut pool = AddressPool::default();
    let hub = pool.fresh();
    let n_decoys = if counts.background > 0 {
        decoy_count(spec.decoy_hubs, counts.background)
    } else {
        0
    };
    let decoys: Vec<String> = (0..n_decoys).map(|_| pool.fresh()).collect();
    let sampler = spec.degree_params.as_ref().map(ZmSampler::new);

    let mut records = Vec::with_capacity(spec.n_v * spec.windows);
    let mut labels = Vec::with_capacity(counts.links * spec.windows);
    for w in 0..spec.windows {
        let mut links: Vec<(String, String, Category)> = Vec::with_capacity(counts.links);
        for _ in 0..counts.star {
            links.push((pool.fresh(), hub.clone(), Category::SupernodeLeaves));
        }
        for _ in 0..counts.isolated {
            links.push((pool.fresh(), pool.fresh(), Category::IsolatedLinks));
        }
        if counts.core > 0 {
            let core: Vec<String> = (0..spec.core_size).map(|_| pool.fresh()).collect();
            for (s, d) in core_links(spec.core_size, counts.core, sampler.as_ref(), &mut rng) {
                links.push((core[s].clone(), core[d].clone(), Category::Core));
            }
            for k in 0..counts.core_leaves {
                let c = core[rng.gen_range(0..core.len())].clone();
                if k % 2 == 0 {
                    links.push((pool.fresh(), c, Category::CoreLeaves));
                } else {
                    links.push((c, pool.fresh(), Category::CoreLeaves));
                }
            }
        }
        for k in 0..counts.background {
            links.push((
                pool.fresh(),
                decoys[k % decoys.len()].clone(),
                Category::Remainder,
            ));
        }

        // One packet per link, the rest spread uniformly.
        let mut per_link = vec![1usize; links.len()];
        for _ in links.len()..spec.n_v {
            per_link[rng.gen_range(0..links.len())] += 1;
        }
        let mut order: Vec<usize> = per_link
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c))
            .collect();
        order.shuffle(&mut rng);
        let base = w * spec.n_v;
        records.extend(order.into_iter().enumerate().map(|(k, i)| {
            let (s, d, _) = &links[i];
            PacketRecord::new(
                (base + k) as f64 * TICK,
                s.clone(),
                d.clone(),
                Protocol::Tcp4,
            )
        }));
        labels.extend(links.into_iter().map(|(src, dst, category)| LabeledLink {
            window: w,
            src,
            dst,
            category,
        }));
    }
    Ok(SyntheticStream {
        records,
        labels,
        counts,
        hub,
        decoys,
    })
}

/// Distinct directed pairs among `n` nodes, `m` of them, every node with at
/// least two links on each side. Returned as node indices.
fn core_links<R: Rng>(
    n: usize,
    m: usize,
    weights: Option<&ZmSampler>,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(m);
    let mut out = Vec::with_capacity(m);
    fn push(p: (usize, usize), seen: &mut HashSet<(usize, usize)>, out: &mut Vec<(usize, usize)>) {
        if p.0 != p.1 && seen.insert(p) {
            out.push(p);
        }
    }
    for i in 0..n {
        push((i, (i + 1) % n), &mut seen, &mut out);
        push((i, (i + 2) % n), &mut seen, &mut out);
    }
    let extra = m - out.len();
    if extra == 0 {
        return out;
    }
    if m * 2 > n * (n - 1) {
        // Dense: enumerate the unused pairs and take a random subset.
        let mut free: Vec<(usize, usize)> = (0..n)
            .flat_map(|s| (0..n).map(move |d| (s, d)))
            .filter(|&(s, d)| s != d && !seen.contains(&(s, d)))
            .collect();
        free.shuffle(rng);
        out.extend(free.into_iter().take(extra));
        return out;
    }
    let cumulative: Option<Vec<f64>> = weights.map(|smp| {
        let mut acc = 0.0;
        (0..n)
            .map(|_| {
                acc += smp.sample(rng) as f64;
                acc
            })
            .collect()
    });
    while out.len() < m {
        let s = match &cumulative {
            Some(c) => {
                let u = rng.gen::<f64>() * c[n - 1];
                c.partition_point(|&x| x <= u).min(n - 1)
            }
            None => rng.gen_range(0..n),
        };
        let d = rng.gen_range(0..n);
        push((s, d), &mut seen, &mut out);
    }
    out
}

/// Lazily generated stream whose source fan-outs are i.i.d. draws from a
/// modified Zipf–Mandelbrot model. Every link carries one packet and every
/// destination is fresh, so destination fan-in is identically 1.
pub struct ZmStream {
    sampler: ZmSampler,
    rng: ChaCha8Rng,
    pool: AddressPool,
    sources_left: usize,
    current: Option<(String, u64)>,
    emitted: u64,
}

pub fn generate_zm_stream(params: &ZmParams<f64>, n_sources: usize, seed: u64) -> ZmStream {
    ZmStream {
        sampler: ZmSampler::new(params),
        rng: ChaCha8Rng::seed_from_u64(seed),
        pool: AddressPool::default(),
        sources_left: n_sources,
        current: None,
        emitted: 0,
    }
}

impl Iterator for ZmStream {
    type Item = PacketRecord;

    fn next(&mut self) -> Option<PacketRecord> {
        loop {
            if let Some((src, left)) = &mut self.current {
                if *left > 0 {
                    *left -= 1;
                    let src = src.clone();
                    let rec = PacketRecord::new(
                        self.emitted as f64 * TICK,
                        src,
                        self.pool.fresh(),
                        Protocol::Tcp4,
                    );
                    self.emitted += 1;
                    return Some(rec);
                }
            }
            if self.sources_left == 0 {
                return None;
            }
            self.sources_left -= 1;
            let fanout = self.sampler.sample(&mut self.rng);
            self.current = Some((self.pool.fresh(), fanout));
        }
    }
}

pub fn write_records<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a PacketRecord>,
) -> io::Result<()> {
    writeln!(out, "# timestamp,src,dst,proto")?;
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}

/// Sidecar label file: `src,dst,category`.
pub fn write_labels<W: Write>(mut out: W, labels: &[LabeledLink]) -> io::Result<()> {
    writeln!(out, "# src,dst,category")?;
    for l in labels {
        writeln!(out, "{},{},{}", l.src, l.dst, l.category)?;
    }
    Ok(())
}
