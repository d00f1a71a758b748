use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::Command;

use netzm::distributions::{bin_edges, BinnedDistribution};
use netzm::ingest::PacketRecord;
use netzm::synth::{generate, write_records, TopologyMixSpec};
use netzm::zm_fit::{fit, FitConfig};
use netzm::zm_model::{zm_binned, SumMode, ZmParams};
use netzm_cli::engine::ConfigRecord;
use netzm_cli::plot::{series_for, PlotConfig, ScatterRow, SeriesPoint};
use netzm_cli::report::{
    load_tables, read_csv, read_json, CellStatus, DistributionRow, FitRow, Format, Manifest,
    SeriesRow, Tables,
};

fn netzm(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_netzm"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn mix(star: f64, windows: usize, seed: u64) -> TopologyMixSpec {
    TopologyMixSpec {
        n_v: 8_000,
        star_links_frac: star,
        isolated_links_frac: 0.25,
        core_links_frac: 0.6 - star,
        core_leaf_links_frac: 0.1,
        core_size: 150,
        windows,
        seed,
        ..TopologyMixSpec::default()
    }
}

fn write_input(dir: &Path, name: &str, records: &[PacketRecord]) -> PathBuf {
    let p = dir.join(name);
    write_records(File::create(&p).unwrap(), records).unwrap();
    p
}

fn manifest(dir: &Path) -> Manifest<ConfigRecord> {
    read_json(&dir.join("manifest.json")).unwrap()
}

#[test]
fn cross_product_lists_every_cell_once() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_input(
        tmp.path(),
        "in.csv",
        &generate(&mix(0.3, 4, 1)).unwrap().records,
    );
    let out = tmp.path().join("out");
    let code = netzm(&[
        "analyze",
        "--input",
        s(&input),
        "--nv",
        "4000",
        "--nv",
        "8000",
        "--out",
        s(&out),
    ]);
    let m = manifest(&out);
    assert_eq!(m.cells.len(), 10);
    let mut keys: Vec<_> = m.cells.iter().map(|c| (c.nv, c.quantity.clone())).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 10);
    let t = load_tables(&out, Format::Csv).unwrap();
    let ok = m
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Ok)
        .count();
    assert_eq!(t.fits.len(), ok);
    assert_eq!(code, if ok == 10 { 0 } else { 1 });
    assert_eq!(m.streams.len(), 2);
    assert_eq!(m.streams[0].windows, 8);
    assert_eq!(m.artifacts.len(), 3);
    assert!(m.inputs[0].sha256.as_ref().unwrap().len() == 64);
}

#[test]
fn star_input_is_leaf_dominated() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    assert_eq!(
        netzm(&[
            "synth",
            "mix",
            "--out",
            s(&gen),
            "--nv",
            "8000",
            "--star",
            "0.9",
            "--isolated",
            "0.05",
            "--core",
            "0",
            "--core-leaf",
            "0"
        ]),
        0
    );
    let out = tmp.path().join("out");
    netzm(&[
        "analyze",
        "--input",
        s(&gen.join("records.csv")),
        "--nv",
        "8000",
        "--out",
        s(&out),
    ]);
    let t = load_tables(&out, Format::Csv).unwrap();
    let top = t
        .topology
        .iter()
        .max_by(|a, b| a.frac_links.total_cmp(&b.frac_links))
        .unwrap();
    assert_eq!(top.category, "supernode_leaves");
    assert!(top.frac_links > 0.85);
}

#[test]
fn json_and_csv_carry_identical_values() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_input(
        tmp.path(),
        "in.csv",
        &generate(&mix(0.3, 3, 2)).unwrap().records,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    netzm(&[
        "analyze",
        "--input",
        s(&input),
        "--nv",
        "8000",
        "--out",
        s(&a),
    ]);
    netzm(&[
        "analyze",
        "--input",
        s(&input),
        "--nv",
        "8000",
        "--format",
        "json",
        "--out",
        s(&b),
    ]);
    let (ta, tb) = (
        load_tables(&a, Format::Csv).unwrap(),
        load_tables(&b, Format::Json).unwrap(),
    );
    assert_eq!(ta, tb);
    assert_ne!(manifest(&a).config_hash, manifest(&b).config_hash);
}

#[test]
fn plot_series_and_scatter() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["analyze".to_owned()];
    for (i, star) in [0.2, 0.3, 0.4].into_iter().enumerate() {
        let p = write_input(
            tmp.path(),
            &format!("mix{i}.csv"),
            &generate(&mix(star, 3, 10 + i as u64)).unwrap().records,
        );
        args.extend(["--input".to_owned(), s(&p).to_owned()]);
    }
    let out = tmp.path().join("out");
    args.extend(["--nv", "8000", "--out", s(&out)].map(String::from));
    netzm(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let code = netzm(&["plotdata", "--from", s(&out)]);
    assert_eq!(code, 0);
    let m = manifest(&out);
    let ok = m
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Ok)
        .count();
    assert!(ok > 0);

    let plot = out.join("plot");
    let series: Vec<_> = fs::read_dir(plot.join("series"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(series.len(), ok);
    for p in series {
        let pts: Vec<SeriesPoint> = read_csv(&p).unwrap();
        let total: f64 = pts.iter().map(|p| p.model_d).sum();
        assert!((total - 1.0).abs() <= 1e-12, "{}: {total}", p.display());
    }
    let scatter: Vec<ScatterRow> = read_csv(&plot.join("leaf_topology.csv")).unwrap();
    assert_eq!(scatter.len(), ok * 5);
    let mut keys: Vec<_> = scatter
        .iter()
        .map(|r| (&r.input, r.nv, &r.quantity, &r.category))
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), scatter.len());
}

#[test]
fn zero_noise_series_match_model() {
    let d_max = 10_000;
    let edges = bin_edges(d_max);
    let p = ZmParams::new(1.8, 2.0, d_max).unwrap();
    let mean = zm_binned(&edges, &p, SumMode::Exact).unwrap();
    let dist = BinnedDistribution {
        sigma: vec![0.0; edges.len()],
        edges: edges.clone(),
        mean: mean.clone(),
        window_count: 1,
        d_max,
    };
    let f = fit(&dist, d_max, &FitConfig::default()).unwrap();
    let t = Tables {
        fits: vec![FitRow {
            input: "zm".into(),
            quantity: "source_fanout".into(),
            nv: 1,
            alpha: f.params.alpha,
            delta: f.params.delta,
            leaf_parameter: f.leaf_parameter,
            metric: f.metric,
            points_used: f.points_used,
            converged: f.converged,
            d_max,
        }],
        distributions: edges
            .iter()
            .zip(&mean)
            .map(|(&e, &m)| DistributionRow {
                input: "zm".into(),
                nv: 1,
                quantity: "source_fanout".into(),
                bin_edge: e,
                mean_d: m,
                sigma: 0.0,
                window_count: 1,
            })
            .collect(),
        topology: Vec::new(),
    };
    let series = series_for(&t, "zm", 1, "source_fanout").unwrap();
    assert_eq!(series.len(), edges.len());
    for pt in &series {
        assert!((pt.mean_d - pt.model_d).abs() < 1e-9, "bin {}", pt.bin_edge);
    }
    let missing = series_for(&t, "zm", 2, "source_fanout").unwrap_err();
    assert!(missing.contains("nv 2") && missing.contains("source_fanout"));
}

#[test]
fn plotdata_names_missing_cells() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_input(
        tmp.path(),
        "in.csv",
        &generate(&mix(0.3, 3, 3)).unwrap().records,
    );
    let out = tmp.path().join("out");
    netzm(&[
        "analyze",
        "--input",
        s(&input),
        "--nv",
        "8000",
        "--quantity",
        "source_packets",
        "--quantity",
        "destination_packets",
        "--out",
        s(&out),
    ]);
    let mut fits: Vec<FitRow> = read_csv(&out.join("fits.csv")).unwrap();
    assert_eq!(fits.len(), 2);
    fits.retain(|r| r.quantity != "destination_packets");
    let mut w = csv::Writer::from_path(out.join("fits.csv")).unwrap();
    for r in &fits {
        w.serialize(r).unwrap();
    }
    w.flush().unwrap();
    drop(w);
    assert_eq!(netzm(&["plotdata", "--from", s(&out)]), 1);
    let pm: Manifest<PlotConfig> = read_json(&out.join("plot/manifest.json")).unwrap();
    let bad: Vec<_> = pm
        .cells
        .iter()
        .filter(|c| c.status == CellStatus::Error)
        .collect();
    assert_eq!(bad.len(), 1);
    assert!(
        bad[0].error.as_ref().unwrap().contains("missing fit")
            && bad[0].quantity == "destination_packets"
    );
    assert_eq!(
        netzm(&["plotdata", "--from", s(&tmp.path().join("nowhere"))]),
        2
    );
}

fn shifted(records: &[PacketRecord], offset: f64) -> impl Iterator<Item = PacketRecord> + '_ {
    records.iter().map(move |r| PacketRecord {
        timestamp: r.timestamp + offset,
        ..r.clone()
    })
}

fn series(dir: &Path) -> Vec<SeriesRow> {
    read_csv(&dir.join("timeseries.csv")).unwrap()
}

fn column(rows: &[SeriesRow], quantity: &str, edge: u64) -> Vec<f64> {
    rows.iter()
        .filter(|r| r.quantity == quantity && r.bin_edge == edge)
        .map(|r| r.d)
        .collect()
}

#[test]
fn timeseries_flat_for_identical_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let one = generate(&mix(0.3, 1, 4)).unwrap().records;
    let recs: Vec<PacketRecord> = (0..10)
        .flat_map(|w| shifted(&one, w as f64 * 10.0))
        .collect();
    let input = write_input(tmp.path(), "flat.csv", &recs);
    let out = tmp.path().join("out");
    assert_eq!(
        netzm(&[
            "timeseries",
            "--input",
            s(&input),
            "--nv",
            "8000",
            "--out",
            s(&out)
        ]),
        0
    );
    let rows = series(&out);
    for q in ["source_fanout", "destination_packets", "link_packets"] {
        let c = column(&rows, q, 1);
        assert_eq!(c.len(), 10);
        assert!(c.iter().all(|&x| x == c[0]), "{q}");
    }
    let starts: Vec<f64> = rows
        .iter()
        .filter(|r| r.quantity == "source_fanout" && r.bin_edge == 1)
        .map(|r| r.start_time)
        .collect();
    assert!(starts.windows(2).all(|w| w[1] > w[0]));
    for w in 0..10 {
        for q in [
            "source_packets",
            "source_fanout",
            "link_packets",
            "destination_fanin",
            "destination_packets",
        ] {
            let total: f64 = rows
                .iter()
                .filter(|r| r.window_index == w && r.quantity == q)
                .map(|r| r.d)
                .sum();
            assert!((total - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn timeseries_alternates_with_planted_mix() {
    let tmp = tempfile::tempdir().unwrap();
    let a = generate(&mix(0.1, 3, 5)).unwrap().records;
    let b = generate(&mix(0.4, 3, 6)).unwrap().records;
    let mut recs = Vec::new();
    for w in 0..3 {
        let off = 10.0 * w as f64;
        recs.extend(shifted(&a[w * 8000..(w + 1) * 8000], off));
        recs.extend(shifted(&b[w * 8000..(w + 1) * 8000], off + 5.0));
    }
    let input = write_input(tmp.path(), "alt.csv", &recs);
    let out = tmp.path().join("out");
    assert_eq!(
        netzm(&[
            "timeseries",
            "--input",
            s(&input),
            "--nv",
            "8000",
            "--quantity",
            "source_fanout",
            "--out",
            s(&out)
        ]),
        0
    );
    let c = column(&series(&out), "source_fanout", 1);
    assert_eq!(c.len(), 6);
    let (lo, hi): (Vec<f64>, Vec<f64>) = (
        c.iter().step_by(2).copied().collect(),
        c.iter().skip(1).step_by(2).copied().collect(),
    );
    let max_lo = lo.iter().copied().fold(f64::MIN, f64::max);
    let min_hi = hi.iter().copied().fold(f64::MAX, f64::min);
    assert!(max_lo + 0.05 < min_hi, "{c:?}");
}

#[test]
fn timeseries_needs_two_windows() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_input(
        tmp.path(),
        "one.csv",
        &generate(&mix(0.3, 1, 7)).unwrap().records,
    );
    let out = tmp.path().join("out");
    assert_eq!(
        netzm(&[
            "timeseries",
            "--input",
            s(&input),
            "--nv",
            "8000",
            "--out",
            s(&out)
        ]),
        1
    );
    let m: Manifest<ConfigRecord> = read_json(&out.join("timeseries-manifest.json")).unwrap();
    assert!(
        m.cells
            .iter()
            .all(|c| c.status == CellStatus::Error
                && c.error.as_ref().unwrap().contains("at least 2"))
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_input(
        tmp.path(),
        "good.csv",
        &generate(&mix(0.3, 2, 8)).unwrap().records,
    );
    let missing = tmp.path().join("missing.csv");
    let out = tmp.path().join("out");
    let code = netzm(&[
        "analyze",
        "--input",
        s(&good),
        "--input",
        s(&missing),
        "--nv",
        "8000",
        "--quantity",
        "source_packets",
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 1);
    let m = manifest(&out);
    assert_eq!(m.cells.len(), 2);
    assert_eq!(m.cells[0].status, CellStatus::Ok);
    assert!(m.inputs[1].error.is_some());

    assert_eq!(
        netzm(&["analyze", "--input", s(&good), "--out", s(&out)]),
        2
    );
    assert_eq!(
        netzm(&[
            "analyze",
            "--input",
            s(&good),
            "--nv",
            "0",
            "--out",
            s(&out)
        ]),
        2
    );
    assert_eq!(
        netzm(&[
            "analyze",
            "--input",
            s(&good),
            "--nv",
            "10",
            "--protocols",
            "tcp6",
            "--out",
            s(&out)
        ]),
        2
    );
    assert_eq!(
        netzm(&[
            "analyze",
            "--input",
            s(&good),
            "--nv",
            "10",
            "--quantity",
            "bogus",
            "--out",
            s(&out)
        ]),
        2
    );
    assert_eq!(
        netzm(&[
            "analyze",
            "--input",
            s(&good),
            "--nv",
            "10",
            "--alpha-step",
            "0",
            "--out",
            s(&out)
        ]),
        2
    );
}

#[test]
fn parse_error_policy_reaches_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let good = generate(&mix(0.3, 2, 9)).unwrap().records;
    let p = tmp.path().join("dirty.csv");
    let mut text = String::from("# timestamp,src,dst,proto\n");
    for (i, r) in good.iter().enumerate() {
        if i == 100 {
            text.push_str("not,a,record\n");
        }
        text.push_str(&r.to_line());
        text.push('\n');
    }
    fs::write(&p, text).unwrap();
    let (skip, abort) = (tmp.path().join("skip"), tmp.path().join("abort"));
    netzm(&[
        "analyze",
        "--input",
        s(&p),
        "--nv",
        "8000",
        "--quantity",
        "source_packets",
        "--out",
        s(&skip),
    ]);
    let m = manifest(&skip);
    assert_eq!(m.streams[0].skipped_rows, 1);
    assert_eq!(m.streams[0].windows, 2);
    let code = netzm(&[
        "analyze",
        "--input",
        s(&p),
        "--nv",
        "8000",
        "--quantity",
        "source_packets",
        "--on-parse-error",
        "abort",
        "--out",
        s(&abort),
    ]);
    assert_eq!(code, 1);
    let m = manifest(&abort);
    assert!(m.streams[0].error.as_ref().unwrap().contains("line"));
    assert_eq!(m.cells[0].status, CellStatus::Error);
}

#[test]
fn synth_zm_writes_records() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("zm");
    assert_eq!(
        netzm(&[
            "synth",
            "zm",
            "--out",
            s(&gen),
            "--sources",
            "500",
            "--d-max",
            "50",
            "--seed",
            "3"
        ]),
        0
    );
    let text = fs::read_to_string(gen.join("records.csv")).unwrap();
    assert!(text.lines().count() > 500);
    assert_eq!(
        netzm(&[
            "synth",
            "mix",
            "--out",
            s(&gen),
            "--star",
            "0.9",
            "--isolated",
            "0.9"
        ]),
        2
    );
}
