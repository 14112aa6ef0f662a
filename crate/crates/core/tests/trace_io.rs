use netdiag::trace::{read_trace, write_trace, CapturePoint, Direction, PacketEvent, TraceRecord, Transfer};
use proptest::prelude::*;

fn arb_event() -> impl Strategy<Value = PacketEvent> {
    (
        0.0f64..1e4,
        any::<bool>(),
        any::<u32>(),
        any::<u32>(),
        0u32..9000,
        any::<[bool; 4]>(),
        any::<u32>(),
        0u8..5,
    )
        .prop_map(|(ts, c2s, seq, ack, len, f, win, sack_cnt)| PacketEvent {
            ts,
            dir: if c2s { Direction::ClientToServer } else { Direction::ServerToClient },
            seq,
            ack,
            payload_len: len,
            syn: f[0],
            fin: f[1],
            rst: f[2],
            ack_flag: f[3],
            win,
            sack_cnt,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_exact(events in prop::collection::vec(arb_event(), 1..60), bytes in any::<u64>(), up in any::<bool>()) {
        let (cp, tr) = if up { (CapturePoint::Server, Transfer::Upload) } else { (CapturePoint::Client, Transfer::Download) };
        let trace = TraceRecord::new(cp, tr, bytes, events).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trace(&trace, &path).unwrap();
        let back = read_trace(&path).unwrap();
        prop_assert_eq!(&back, &trace);
        let again = dir.path().join("u.csv");
        write_trace(&back, &again).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn events_come_back_time_ordered(events in prop::collection::vec(arb_event(), 1..60)) {
        let trace = TraceRecord::new(CapturePoint::Client, Transfer::Download, 1, events).unwrap();
        prop_assert!(trace.events().windows(2).all(|w| w[0].ts <= w[1].ts));
    }
}
