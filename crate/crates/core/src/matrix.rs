//! Sparse origin-destination traffic matrices and the network quantities
//! derived from them.
//!
//! Addresses are interned into a lexicographically sorted node table, so a
//! node id orders the same way its address string does. Entries are kept
//! sorted by `(src, dst)`; only nonzero counts are stored, which makes the
//! stored-entry count the zero-norm of the matrix.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::ingest::PacketRecord;

/// Index of an address in a matrix's node table.
pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub src: NodeId,
    pub dst: NodeId,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficMatrix {
    window_index: usize,
    nodes: Vec<String>,
    entries: Vec<Entry>,
    n_v: u64,
}

/// Window totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Aggregates {
    pub valid_packets: u64,
    pub unique_links: u64,
    pub unique_sources: u64,
    pub unique_destinations: u64,
}

/// The five per-entity network quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    SourcePackets,
    SourceFanout,
    LinkPackets,
    DestinationFanin,
    DestinationPackets,
}

impl Quantity {
    pub const ALL: [Quantity; 5] = [
        Quantity::SourcePackets,
        Quantity::SourceFanout,
        Quantity::LinkPackets,
        Quantity::DestinationFanin,
        Quantity::DestinationPackets,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::SourcePackets => "source_packets",
            Quantity::SourceFanout => "source_fanout",
            Quantity::LinkPackets => "link_packets",
            Quantity::DestinationFanin => "destination_fanin",
            Quantity::DestinationPackets => "destination_packets",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| format!("unknown quantity {s:?}"))
    }
}

/// Entity a quantity value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Entity<'a> {
    Node(&'a str),
    Link(&'a str, &'a str),
}

/// Per-entity values of one network quantity for one window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantitySeries<'a> {
    pub quantity: Quantity,
    pub values: Vec<(Entity<'a>, u64)>,
}

impl QuantitySeries<'_> {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn raw_values(&self) -> impl Iterator<Item = u64> + '_ {
        self.values.iter().map(|&(_, v)| v)
    }
}

/// Fan-out and fan-in of every node, indexed by [`NodeId`].
///
/// A node that never appears on a side has degree 0 there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVectors {
    pub d_out: Vec<u64>,
    pub d_in: Vec<u64>,
}

impl DegreeVectors {
    pub fn combined(&self, id: NodeId) -> u64 {
        self.d_out[id as usize] + self.d_in[id as usize]
    }
}

impl TrafficMatrix {
    /// Aggregates one window of records. `n_v` is the record count.
    pub fn from_records(window_index: usize, records: &[PacketRecord]) -> Self {
        Self::from_pairs(
            window_index,
            records.iter().map(|r| (r.src.as_str(), r.dst.as_str(), 1)),
        )
    }

    /// Builds a matrix from `(src, dst, count)` triples; repeated pairs add.
    /// Zero counts are dropped.
    pub fn from_pairs<'a, I>(window_index: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, u64)>,
    {
        let mut intern: HashMap<&'a str, NodeId> = HashMap::new();
        let mut names: Vec<&'a str> = Vec::new();
        let mut counts: HashMap<(NodeId, NodeId), u64> = HashMap::new();
        let mut id_of = |s: &'a str| -> NodeId {
            *intern.entry(s).or_insert_with(|| {
                names.push(s);
                (names.len() - 1) as NodeId
            })
        };
        for (src, dst, c) in pairs {
            if c == 0 {
                continue;
            }
            let key = (id_of(src), id_of(dst));
            *counts.entry(key).or_insert(0) += c;
        }

        // Relabel so that id order is lexicographic address order.
        let mut order: Vec<NodeId> = (0..names.len() as NodeId).collect();
        order.sort_unstable_by(|&a, &b| names[a as usize].cmp(names[b as usize]));
        let mut relabel = vec![0 as NodeId; names.len()];
        for (new, &old) in order.iter().enumerate() {
            relabel[old as usize] = new as NodeId;
        }
        let nodes: Vec<String> = order
            .iter()
            .map(|&old| names[old as usize].to_owned())
            .collect();
        let mut entries: Vec<Entry> = counts
            .into_iter()
            .map(|((s, d), count)| Entry {
                src: relabel[s as usize],
                dst: relabel[d as usize],
                count,
            })
            .collect();
        entries.sort_unstable_by_key(|e| (e.src, e.dst));
        let n_v = entries.iter().map(|e| e.count).sum();
        TrafficMatrix {
            window_index,
            nodes,
            entries,
            n_v,
        }
    }

    pub fn window_index(&self) -> usize {
        self.window_index
    }

    /// Total packets in the window.
    pub fn n_v(&self) -> u64 {
        self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// All addresses seen on either side, sorted.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn address(&self, id: NodeId) -> &str {
        &self.nodes[id as usize]
    }

    pub fn node_id(&self, address: &str) -> Option<NodeId> {
        self.nodes
            .binary_search_by(|n| n.as_str().cmp(address))
            .ok()
            .map(|i| i as NodeId)
    }

    pub fn get(&self, src: &str, dst: &str) -> u64 {
        match (self.node_id(src), self.node_id(dst)) {
            (Some(s), Some(d)) => self
                .entries
                .binary_search_by_key(&(s, d), |e| (e.src, e.dst))
                .map_or(0, |i| self.entries[i].count),
            _ => 0,
        }
    }

    pub fn aggregates(&self) -> Aggregates {
        let mut is_src = vec![false; self.nodes.len()];
        let mut is_dst = vec![false; self.nodes.len()];
        for e in &self.entries {
            is_src[e.src as usize] = true;
            is_dst[e.dst as usize] = true;
        }
        Aggregates {
            valid_packets: self.n_v,
            unique_links: self.entries.len() as u64,
            unique_sources: is_src.iter().filter(|&&b| b).count() as u64,
            unique_destinations: is_dst.iter().filter(|&&b| b).count() as u64,
        }
    }

    pub fn degree_vectors(&self) -> DegreeVectors {
        let mut d_out = vec![0u64; self.nodes.len()];
        let mut d_in = vec![0u64; self.nodes.len()];
        for e in &self.entries {
            d_out[e.src as usize] += 1;
            d_in[e.dst as usize] += 1;
        }
        DegreeVectors { d_out, d_in }
    }

    /// Per-entity values of `q`. Node quantities list only nodes active on
    /// the relevant side, in address order; link packets list every stored
    /// entry in `(src, dst)` order.
    pub fn quantity(&self, q: Quantity) -> QuantitySeries<'_> {
        let per_node = |side_src: bool, weighted: bool| {
            let mut acc = vec![0u64; self.nodes.len()];
            for e in &self.entries {
                let id = if side_src { e.src } else { e.dst };
                acc[id as usize] += if weighted { e.count } else { 1 };
            }
            acc.into_iter()
                .enumerate()
                .filter(|&(_, v)| v > 0)
                .map(|(id, v)| (Entity::Node(&self.nodes[id]), v))
                .collect()
        };
        let values = match q {
            Quantity::SourcePackets => per_node(true, true),
            Quantity::SourceFanout => per_node(true, false),
            Quantity::DestinationFanin => per_node(false, false),
            Quantity::DestinationPackets => per_node(false, true),
            Quantity::LinkPackets => self
                .entries
                .iter()
                .map(|e| {
                    (
                        Entity::Link(self.address(e.src), self.address(e.dst)),
                        e.count,
                    )
                })
                .collect(),
        };
        QuantitySeries {
            quantity: q,
            values,
        }
    }

    /// Writes `src,dst,count` lines sorted by `(src, dst)`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{}",
                self.address(e.src),
                self.address(e.dst),
                e.count
            )?;
        }
        Ok(())
    }
}

/// Shorthand for [`TrafficMatrix::from_records`].
pub fn build_matrix(window_index: usize, records: &[PacketRecord]) -> TrafficMatrix {
    TrafficMatrix::from_records(window_index, records)
}
