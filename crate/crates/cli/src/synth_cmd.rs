//! `synth` subcommands: write planted streams as record files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};
use netzm::synth::{generate, generate_zm_stream, write_labels, write_records, TopologyMixSpec};
use netzm::zm_model::ZmParams;

use crate::{MixArgs, Outcome, ZmArgs};

pub const RECORDS: &str = "records.csv";
pub const LABELS: &str = "labels.csv";

fn create(dir: &std::path::Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| {
        format!("cannot write {}", path.display())
    })?))
}

pub fn mix(a: &MixArgs) -> Result<Outcome> {
    let spec = TopologyMixSpec {
        n_v: a.nv,
        links: a.links,
        star_links_frac: a.star,
        isolated_links_frac: a.isolated,
        core_links_frac: a.core,
        core_leaf_links_frac: a.core_leaf,
        core_size: a.core_size,
        decoy_hubs: a.decoy_hubs,
        degree_params: None,
        windows: a.windows,
        seed: a.seed,
    };
    let s = generate(&spec)?;
    let mut w = create(&a.out, RECORDS)?;
    write_records(&mut w, &s.records)?;
    w.flush()?;
    let mut w = create(&a.out, LABELS)?;
    write_labels(&mut w, &s.labels)?;
    w.flush()?;
    Ok(Outcome::Complete)
}

pub fn zm(a: &ZmArgs) -> Result<Outcome> {
    let params = ZmParams::new(a.alpha, a.delta, a.d_max)?;
    let mut w = create(&a.out, RECORDS)?;
    // Written record by record; the stream can be far larger than memory.
    writeln!(w, "# timestamp,src,dst,proto")?;
    for r in generate_zm_stream(&params, a.sources, a.seed) {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()?;
    Ok(Outcome::Complete)
}
