use std::io::Cursor;

use netzm::ingest::{
    is_valid, stream_windows, IngestError, OnParseError, PacketRecord, Protocol, RecordReader,
    ValidityPolicy,
};
use proptest::prelude::*;

fn record(k: usize, proto: Protocol) -> PacketRecord {
    PacketRecord::new(
        k as f64 * 0.5,
        format!("s{}", k % 7),
        format!("d{}", k % 11),
        proto,
    )
}

fn protocol() -> impl Strategy<Value = Protocol> {
    prop_oneof![
        6 => Just(Protocol::Tcp4),
        2 => Just(Protocol::Udp4),
        1 => Just(Protocol::Other),
    ]
}

#[test]
fn reference_example_counts() {
    let recs: Vec<_> = (0..250_000)
        .map(|k| Ok(record(k, Protocol::Tcp4)))
        .collect();
    let mut ws = stream_windows(recs, ValidityPolicy::default(), 100_000).unwrap();
    let windows: Vec<_> = ws.by_ref().collect::<Result<_, _>>().unwrap();
    assert_eq!(windows.len(), 2);
    assert_eq!(ws.stats().remainder, 50_000);

    let recs: Vec<_> = (0..105_000)
        .map(|k| {
            Ok(record(
                k,
                if k % 21 == 20 {
                    Protocol::Udp4
                } else {
                    Protocol::Tcp4
                },
            ))
        })
        .collect();
    let mut ws = stream_windows(recs, ValidityPolicy::default(), 100_000).unwrap();
    assert_eq!(ws.by_ref().count(), 1);
    assert_eq!(ws.stats().invalid_records, 5_000);
    assert_eq!(ws.stats().remainder, 0);
}

#[test]
fn text_file_round_trip() {
    let recs: Vec<_> = (0..40).map(|k| record(k, Protocol::Tcp4)).collect();
    let mut text = String::from("# timestamp,src,dst,proto\n\n");
    for r in &recs {
        text.push_str(&r.to_line());
        text.push('\n');
    }
    let reader = RecordReader::new(Cursor::new(text), OnParseError::Abort);
    let back: Vec<_> = reader.collect::<Result<_, _>>().unwrap();
    assert_eq!(back, recs);
}

#[test]
fn malformed_rows_skip_or_abort() {
    let text = "1.0,a,b,tcp4\n2.0,,b,tcp4\n3.0,a,c,tcp4\n";
    let mut skip = RecordReader::new(Cursor::new(text), OnParseError::Skip);
    let ok: Vec<_> = skip.by_ref().collect::<Result<_, _>>().unwrap();
    assert_eq!(ok.len(), 2);
    assert_eq!(skip.skipped_rows(), 1);

    let abort = RecordReader::new(Cursor::new(text), OnParseError::Abort);
    let err = abort.collect::<Result<Vec<_>, _>>().unwrap_err();
    assert!(matches!(err, IngestError::Parse { line: 2, .. }), "{err:?}");
}

proptest! {
    #[test]
    fn counts_add_up(protos in prop::collection::vec(protocol(), 0..600), n_v in 1usize..50) {
        let recs: Vec<_> = protos.iter().enumerate().map(|(k, &p)| Ok(record(k, p))).collect();
        let mut ws = stream_windows(recs, ValidityPolicy::default(), n_v).unwrap();
        let windows: Vec<_> = ws.by_ref().collect::<Result<_, _>>().unwrap();
        let st = ws.stats();
        prop_assert!(windows.iter().all(|w| w.records.len() == n_v));
        prop_assert_eq!(st.windows_emitted as usize, windows.len());
        prop_assert_eq!(
            windows.len() as u64 * n_v as u64 + st.remainder + st.invalid_records,
            protos.len() as u64
        );
        prop_assert_eq!(st.total_records, protos.len() as u64);
    }

    #[test]
    fn windowing_preserves_valid_subsequence(
        protos in prop::collection::vec(protocol(), 0..600),
        n_v in 1usize..50,
        accept_udp in any::<bool>(),
    ) {
        let accepted = if accept_udp { vec![Protocol::Tcp4, Protocol::Udp4] } else { vec![Protocol::Tcp4] };
        let policy = ValidityPolicy::new(accepted, true).unwrap();
        let recs: Vec<_> = protos.iter().enumerate().map(|(k, &p)| record(k, p)).collect();
        let expected: Vec<_> = recs.iter().filter(|r| is_valid(r, &policy)).cloned().collect();
        let mut ws = stream_windows(recs.into_iter().map(Ok), policy, n_v).unwrap();
        let mut got = Vec::new();
        for (i, w) in ws.by_ref().enumerate() {
            let w = w.unwrap();
            prop_assert_eq!(w.index, i);
            got.extend(w.records);
        }
        got.extend_from_slice(ws.pending());
        prop_assert_eq!(got, expected);
    }
}
