//! Decomposition of a window's traffic matrix into isolated links,
//! supernode leaves, core, core leaves, and a remainder.
//!
//! Every stored link is assigned to exactly one category using a fixed
//! priority (supernode leaves, isolated links, core, core leaves,
//! remainder), so link and packet tallies partition the window exactly.
//! Source and destination roles are evaluated independently: a node may be
//! a core source and an isolated-link destination at the same time.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::matrix::{Aggregates, DegreeVectors, Entry, NodeId, TrafficMatrix};

pub const DEFAULT_SUPERNODE_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    SupernodeLeaves,
    IsolatedLinks,
    Core,
    CoreLeaves,
    Remainder,
}

impl Category {
    /// Categories in assignment priority order.
    pub const ALL: [Category; 5] = [
        Category::SupernodeLeaves,
        Category::IsolatedLinks,
        Category::Core,
        Category::CoreLeaves,
        Category::Remainder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SupernodeLeaves => "supernode_leaves",
            Category::IsolatedLinks => "isolated_links",
            Category::Core => "core",
            Category::CoreLeaves => "core_leaves",
            Category::Remainder => "remainder",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown topology category {s:?}"))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("traffic matrix is empty")]
    EmptyMatrix,
    #[error("supernode count must be at least 1")]
    ZeroSupernodes,
}

/// Membership flags over a matrix's node table, one for each side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleSets {
    pub sources: Vec<bool>,
    pub destinations: Vec<bool>,
}

impl RoleSets {
    pub fn is_source(&self, id: NodeId) -> bool {
        self.sources[id as usize]
    }

    pub fn is_destination(&self, id: NodeId) -> bool {
        self.destinations[id as usize]
    }

    /// Addresses flagged on the source side, sorted.
    pub fn source_addresses<'m>(&self, m: &'m TrafficMatrix) -> Vec<&'m str> {
        flagged(&self.sources, m)
    }

    pub fn destination_addresses<'m>(&self, m: &'m TrafficMatrix) -> Vec<&'m str> {
        flagged(&self.destinations, m)
    }
}

fn flagged<'m>(flags: &[bool], m: &'m TrafficMatrix) -> Vec<&'m str> {
    flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| m.address(i as NodeId))
        .collect()
}

/// `i_1` = sources with fan-out 1, `j_1` = destinations with fan-in 1.
pub fn isolated_link_selectors(dv: &DegreeVectors) -> RoleSets {
    RoleSets {
        sources: dv.d_out.iter().map(|&d| d == 1).collect(),
        destinations: dv.d_in.iter().map(|&d| d == 1).collect(),
    }
}

/// Top `k` nodes by fan-out plus fan-in, descending; equal degrees are
/// ordered by address.
pub fn find_supernodes(
    m: &TrafficMatrix,
    dv: &DegreeVectors,
    k: usize,
) -> Result<Vec<NodeId>, TopologyError> {
    if k == 0 {
        return Err(TopologyError::ZeroSupernodes);
    }
    if m.is_empty() {
        return Err(TopologyError::EmptyMatrix);
    }
    let mut ids: Vec<NodeId> = (0..m.nodes().len() as NodeId).collect();
    // Ids are already in address order, so the id is the tie-break.
    let take = k.min(ids.len());
    let by_degree = |a: &NodeId, b: &NodeId| dv.combined(*b).cmp(&dv.combined(*a)).then(a.cmp(b));
    if take < ids.len() {
        ids.select_nth_unstable_by(take - 1, by_degree);
        ids.truncate(take);
    }
    ids.sort_unstable_by(by_degree);
    Ok(ids)
}

/// `i_core` / `j_core`: nodes with more than one link on that side,
/// excluding the supernodes by identity.
pub fn core_selectors(dv: &DegreeVectors, supernodes: &[NodeId]) -> RoleSets {
    let mut excluded = vec![false; dv.d_out.len()];
    for &s in supernodes {
        excluded[s as usize] = true;
    }
    RoleSets {
        sources: dv
            .d_out
            .iter()
            .zip(&excluded)
            .map(|(&d, &x)| d > 1 && !x)
            .collect(),
        destinations: dv
            .d_in
            .iter()
            .zip(&excluded)
            .map(|(&d, &x)| d > 1 && !x)
            .collect(),
    }
}

/// Indices into [`TrafficMatrix::entries`] of leaf links on either side of
/// some attachment point.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeafLinks {
    /// Degree-1 sources sending into the attachment point(s).
    pub source_leaves: Vec<usize>,
    /// Attachment point(s) sending to degree-1 destinations.
    pub destination_leaves: Vec<usize>,
}

impl LeafLinks {
    pub fn all(&self) -> impl Iterator<Item = usize> + '_ {
        self.source_leaves
            .iter()
            .chain(&self.destination_leaves)
            .copied()
    }

    pub fn tally(&self, m: &TrafficMatrix) -> CategoryTally {
        tally_entries(m, self.all())
    }
}

fn is_supernode_leaf(e: &Entry, dv: &DegreeVectors, iso: &RoleSets, hub: NodeId) -> bool {
    // When the hub itself has a single link on the attaching side the link
    // is an isolated pair, not a leaf.
    (e.dst == hub && iso.is_source(e.src) && dv.d_in[hub as usize] > 1)
        || (e.src == hub && iso.is_destination(e.dst) && dv.d_out[hub as usize] > 1)
}

/// `A(i_1, k_max)` and `A(k_max, j_1)` for the given supernode.
pub fn supernode_leaves(
    m: &TrafficMatrix,
    dv: &DegreeVectors,
    iso: &RoleSets,
    supernode: NodeId,
) -> LeafLinks {
    let mut out = LeafLinks::default();
    for (idx, e) in m.entries().iter().enumerate() {
        if !is_supernode_leaf(e, dv, iso, supernode) {
            continue;
        }
        if e.dst == supernode && iso.is_source(e.src) {
            out.source_leaves.push(idx);
        } else {
            out.destination_leaves.push(idx);
        }
    }
    out
}

/// `A(i_1, k_core)` and `A(k_core, j_1)`.
pub fn core_leaves(m: &TrafficMatrix, iso: &RoleSets, core: &RoleSets) -> LeafLinks {
    let mut out = LeafLinks::default();
    for (idx, e) in m.entries().iter().enumerate() {
        if iso.is_source(e.src) && core.is_destination(e.dst) {
            out.source_leaves.push(idx);
        } else if core.is_source(e.src) && iso.is_destination(e.dst) {
            out.destination_leaves.push(idx);
        }
    }
    out
}

/// Counts for one category; node counts are role memberships on each side.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryTally {
    pub sources: u64,
    pub destinations: u64,
    pub unique_links: u64,
    pub packets: u64,
}

/// A tally together with its share of the window totals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CategoryShare {
    pub tally: CategoryTally,
    pub frac_sources: f64,
    pub frac_destinations: f64,
    pub frac_links: f64,
    pub frac_packets: f64,
}

fn tally_entries(m: &TrafficMatrix, indices: impl Iterator<Item = usize>) -> CategoryTally {
    let entries = m.entries();
    let mut srcs = Vec::new();
    let mut dsts = Vec::new();
    let mut t = CategoryTally::default();
    for idx in indices {
        let e = entries[idx];
        srcs.push(e.src);
        dsts.push(e.dst);
        t.unique_links += 1;
        t.packets += e.count;
    }
    srcs.sort_unstable();
    srcs.dedup();
    dsts.sort_unstable();
    dsts.dedup();
    t.sources = srcs.len() as u64;
    t.destinations = dsts.len() as u64;
    t
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyDecomposition {
    pub window_index: usize,
    pub totals: Aggregates,
    /// Indexed in [`Category::ALL`] order.
    pub categories: [CategoryShare; 5],
    /// The top-k supernode addresses, strongest first.
    pub supernodes: Vec<String>,
}

impl TopologyDecomposition {
    pub fn get(&self, c: Category) -> &CategoryShare {
        &self.categories[c.slot()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, &CategoryShare)> {
        Category::ALL.into_iter().zip(self.categories.iter())
    }
}

/// Assigns every stored entry of `m` to one category; the result is
/// parallel to [`TrafficMatrix::entries`].
pub fn classify_links(
    m: &TrafficMatrix,
    k_supernodes: usize,
) -> Result<(Vec<Category>, Vec<NodeId>), TopologyError> {
    let dv = m.degree_vectors();
    let supernodes = find_supernodes(m, &dv, k_supernodes)?;
    let hub = supernodes[0];
    let iso = isolated_link_selectors(&dv);
    let core = core_selectors(&dv, &supernodes);

    let labels = m
        .entries()
        .iter()
        .map(|e| {
            if is_supernode_leaf(e, &dv, &iso, hub) {
                Category::SupernodeLeaves
            } else if iso.is_source(e.src) && iso.is_destination(e.dst) {
                Category::IsolatedLinks
            } else if core.is_source(e.src) && core.is_destination(e.dst) {
                Category::Core
            } else if (iso.is_source(e.src) && core.is_destination(e.dst))
                || (core.is_source(e.src) && iso.is_destination(e.dst))
            {
                Category::CoreLeaves
            } else {
                Category::Remainder
            }
        })
        .collect();
    Ok((labels, supernodes))
}

pub fn decompose(
    m: &TrafficMatrix,
    k_supernodes: usize,
) -> Result<TopologyDecomposition, TopologyError> {
    let (labels, supernodes) = classify_links(m, k_supernodes)?;
    let totals = m.aggregates();
    let mut buckets: [Vec<usize>; 5] = Default::default();
    for (idx, c) in labels.iter().enumerate() {
        buckets[c.slot()].push(idx);
    }
    let categories = buckets.map(|idx| {
        let tally = tally_entries(m, idx.into_iter());
        CategoryShare {
            tally,
            frac_sources: ratio(tally.sources, totals.unique_sources),
            frac_destinations: ratio(tally.destinations, totals.unique_destinations),
            frac_links: ratio(tally.unique_links, totals.unique_links),
            frac_packets: ratio(tally.packets, totals.valid_packets),
        }
    });
    Ok(TopologyDecomposition {
        window_index: m.window_index(),
        totals,
        categories,
        supernodes: supernodes
            .iter()
            .map(|&s| m.address(s).to_owned())
            .collect(),
    })
}
