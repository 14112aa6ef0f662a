use proptest::prelude::*;

use super::*;
use crate::preprocess::{FaultRegistry, Label, LinkClass};
use crate::select::{rank_columns, rank_features};
use crate::signature::{extract_signature, FeatureCatalog};
use crate::trace::{write_trace_to, Direction};

fn feature(pair: &TracePair, name: &str) -> f64 {
    let cat = FeatureCatalog::v1();
    let j = cat.names().iter().position(|n| n == name).expect("known feature");
    extract_signature(pair, &cat).unwrap().values[j]
}

fn both(pair: &TracePair, stat: &str) -> f64 {
    feature(pair, &format!("down_{stat}")) + feature(pair, &format!("up_{stat}"))
}

fn trace_bytes(pair: &TracePair) -> (Vec<u8>, Vec<u8>) {
    let mut d = Vec::new();
    let mut u = Vec::new();
    write_trace_to(&pair.download, &mut d).unwrap();
    write_trace_to(&pair.upload, &mut u).unwrap();
    (d, u)
}

const SMALL: u64 = 300_000;

#[test]
fn clean_link_has_no_retransmissions() {
    let pair = simulate_flow(&LinkParams::healthy(), &ClientParams::healthy(), DEFAULT_TRANSFER_BYTES, 1);
    assert_eq!(both(&pair, "retransmitted_packets"), 0.0);
    assert_eq!(both(&pair, "dup_ack_count"), 0.0);
    assert_eq!(both(&pair, "max_sack_cnt"), 0.0);
}

#[test]
fn lossy_link_multiplies_retransmissions() {
    let healthy = simulate_flow(&LinkParams::healthy(), &ClientParams::healthy(), DEFAULT_TRANSFER_BYTES, 2);
    let (lossy, reports) =
        simulate_flow_with_report(&LinkParams::healthy().with_loss(0.05), &ClientParams::healthy(), DEFAULT_TRANSFER_BYTES, 2);
    let base = both(&healthy, "retransmitted_packets");
    let hit = both(&lossy, "retransmitted_packets");
    assert!(hit > 10.0 * base.max(1.0), "{hit} vs {base}");
    // every drop needs a repair, and the receiver cannot see more
    // retransmissions than the sender made
    let dropped: usize = reports.iter().map(|r| r.random_drops).sum();
    let sent: usize = reports.iter().map(|r| r.retransmissions).sum();
    assert!(sent >= dropped);
    assert!(hit <= sent as f64);
}

#[test]
fn small_read_buffer_caps_window_and_throughput() {
    let link = LinkParams::healthy();
    let big = ClientParams::healthy();
    let small = ClientParams {
        read_buffer: 16 * 1024,
        ..big
    };
    let a = simulate_flow(&link, &small, DEFAULT_TRANSFER_BYTES, 3);
    let b = simulate_flow(&link, &big, DEFAULT_TRANSFER_BYTES, 3);
    let ratio = feature(&a, "down_win_max") / feature(&b, "down_win_max");
    assert!((ratio - 16.0 / 1024.0).abs() < 1e-9, "{ratio}");
    let slow = feature(&a, "down_throughput");
    let fast = feature(&b, "down_throughput");
    assert!(slow < fast);
    // a window-limited transfer moves about one buffer per round trip
    let rtt = 2.0 * link.one_way_delay;
    let oracle = 16.0 * 1024.0 / rtt;
    assert!((slow / oracle - 1.0).abs() < 0.15, "{slow} vs {oracle}");
}

#[test]
fn write_buffer_limits_only_the_upload() {
    let link = LinkParams::healthy();
    let client = ClientParams {
        write_buffer: 16 * 1024,
        ..ClientParams::healthy()
    };
    let limited = simulate_flow(&link, &client, DEFAULT_TRANSFER_BYTES, 4);
    let normal = simulate_flow(&link, &ClientParams::healthy(), DEFAULT_TRANSFER_BYTES, 4);
    assert!(feature(&limited, "up_throughput") < 0.5 * feature(&normal, "up_throughput"));
    let d = feature(&limited, "down_throughput") / feature(&normal, "down_throughput");
    assert!((d - 1.0).abs() < 0.05, "{d}");
}

#[test]
fn simulator_is_deterministic() {
    let link = LinkParams::healthy().with_loss(0.03).with_queue(50);
    let client = ClientParams {
        cwnd_growth_profile: GrowthProfile::Biclike,
        seed: 99,
        ..ClientParams::healthy()
    };
    let a = simulate_flow(&link, &client, SMALL, 5);
    let b = simulate_flow(&link, &client, SMALL, 5);
    assert_eq!(trace_bytes(&a), trace_bytes(&b));
    let c = simulate_flow(&link, &client, SMALL, 6);
    assert_ne!(trace_bytes(&a), trace_bytes(&c));
}

#[test]
fn disabled_sack_never_emits_blocks() {
    let link = matrix_healthy_link().with_loss(0.04);
    let client = ClientParams {
        sack_enabled: false,
        ..ClientParams::healthy()
    };
    let (pair, reports) = simulate_flow_with_report(&link, &client, SMALL, 7);
    for trace in [&pair.download, &pair.upload] {
        assert!(trace.events().iter().all(|e| e.sack_cnt == 0));
    }
    assert!(reports.iter().all(|r| r.dsack_blocks == 0));
}

#[test]
fn dsack_needs_both_options() {
    let link = matrix_healthy_link();
    let mut default_reports = 0;
    for seed in 0..4 {
        let off = ClientParams {
            dsack_enabled: false,
            ..ClientParams::healthy()
        };
        let (_, r) = simulate_flow_with_report(&link, &off, DEFAULT_TRANSFER_BYTES, seed);
        // The client only controls what it reports as a receiver.
        assert_eq!((r[0].dsack_blocks, r[0].undos), (0, 0));
        let (_, r) = simulate_flow_with_report(&link, &ClientParams::healthy(), DEFAULT_TRANSFER_BYTES, seed);
        default_reports += r.iter().map(|r| r.dsack_blocks).sum::<usize>();
    }
    assert!(default_reports > 0);
}

#[test]
fn retransmissions_grow_with_loss() {
    for seed in 0..5 {
        let mut last = 0.0;
        for loss in [0.0, 0.01, 0.03, 0.05, 0.1] {
            let pair = simulate_flow(&LinkParams::healthy().with_loss(loss), &ClientParams::healthy(), SMALL, seed);
            let r = both(&pair, "retransmitted_packets");
            assert!(r >= last, "seed {seed}: loss {loss} gave {r} < {last}");
            last = r;
        }
    }
}

#[test]
fn simulated_traces_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pair = simulate_flow(&LinkParams::healthy().with_loss(0.02), &ClientParams::healthy(), SMALL, 8);
    let path = dir.path().join("x.down.csv");
    crate::trace::write_trace(&pair.download, &path).unwrap();
    let back = crate::trace::read_trace(&path).unwrap();
    assert_eq!(back, pair.download);
}

/// Receiver-side invariants: every data byte arrives, and no acknowledgment
/// runs ahead of the data seen so far (the FIN takes one sequence number).
fn check_conservation(pair: &TracePair, reports: &[FlowReport; 2], bytes: u64) {
    for (trace, report) in [(&pair.download, &reports[0]), (&pair.upload, &reports[1])] {
        assert_eq!(report.delivered_bytes, bytes);
        let data = trace.data_direction();
        let syn = trace.events().iter().find(|e| e.syn && e.dir == data).unwrap();
        let base = syn.seq.wrapping_add(1);
        let mut high = 0u64;
        let mut fin = false;
        for e in trace.events() {
            if e.dir == data {
                let off = e.seq.wrapping_sub(base) as u64;
                if e.payload_len > 0 {
                    high = high.max(off + e.payload_len as u64);
                }
                fin |= e.fin;
            } else if e.ack_flag {
                let acked = e.ack.wrapping_sub(base) as u64;
                assert!(acked <= high + fin as u64, "ack {acked} beyond {high}");
            }
        }
        assert_eq!(high, bytes);
    }
}

#[test]
fn matrix_fault_classes_conserve_bytes() {
    for ls in fault_matrix(1, 3) {
        let (pair, reports) = ls.scenario.run_with_report().unwrap();
        check_conservation(&pair, &reports, ls.scenario.bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_scenarios_conserve_and_repeat(
        bytes in 1u64..120_000,
        loss in 0.0f64..0.15,
        reorder in 0.0f64..0.05,
        delay in 0.001f64..0.08,
        queue in prop_oneof![Just(0usize), 5usize..60],
        sack in any::<bool>(),
        dsack in any::<bool>(),
        read in 2048u32..200_000,
        write in 2048u32..200_000,
        growth in 0usize..3,
        seed in any::<u64>(),
    ) {
        let link = LinkParams { bandwidth: 20e6, one_way_delay: delay, loss_rate: loss, reorder_rate: reorder, queue_packets: queue };
        let client = ClientParams {
            sack_enabled: sack,
            dsack_enabled: dsack,
            read_buffer: read,
            write_buffer: write,
            cwnd_growth_profile: GrowthProfile::ALL[growth],
            seed,
        };
        let (pair, reports) = simulate_flow_with_report(&link, &client, bytes, seed);
        check_conservation(&pair, &reports, bytes);
        let again = simulate_flow(&link, &client, bytes, seed);
        prop_assert_eq!(trace_bytes(&pair), trace_bytes(&again));
        if !sack {
            prop_assert!(pair.download.events().iter().chain(pair.upload.events()).all(|e| e.sack_cnt == 0));
        }
    }
}

#[test]
fn scenario_json_round_trip_and_rejects_typos() {
    let s = Scenario::healthy(11);
    let text = serde_json::to_string(&s).unwrap();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
    let bad = text.replace("loss_rate", "loss_rat");
    assert!(serde_json::from_str::<Scenario>(&bad).is_err());
    let zero = Scenario { bytes: 0, ..s };
    assert!(zero.run().is_err());
}

#[test]
fn presets_cover_the_matrix() {
    let h = preset("healthy", 5, 1).unwrap();
    assert_eq!(h.len(), 1);
    assert!(preset("nope", 1, 1).is_err());
    assert!(preset("fault-matrix", 0, 1).is_err());
    let m = preset("fault-matrix", 11, 1).unwrap();
    assert_eq!(m.len(), 77);
    let reg = FaultRegistry::standard();
    for class in 0..=4 {
        let n = m.iter().filter(|s| s.cfd_label(&reg) == Some(Label::Client(class))).count();
        assert_eq!(n, 11, "class {class}");
    }
    let faulty = m.iter().filter(|s| s.lpd_label() == Label::Link(LinkClass::Faulty)).count();
    assert_eq!(faulty, 11);
    for s in m.iter().filter(|s| s.truth.link == LinkClass::Faulty) {
        assert!((0.01..=0.10).contains(&s.scenario.link.loss_rate));
        assert!((0.015..=0.100).contains(&s.scenario.link.one_way_delay));
    }
    let multi: Vec<_> = m.iter().filter(|s| s.truth.client_faults.len() == 2).collect();
    assert_eq!(multi.len(), 11);
    assert!(multi.iter().all(|s| s.cfd_label(&reg).is_none()));
    assert_eq!(fault_matrix(3, 9), fault_matrix(3, 9));
    for s in &m {
        assert_eq!(s.scenario.truth(), s.truth, "{}", s.id);
    }
}

#[test]
fn capture_points_follow_transfer_roles() {
    let pair = simulate_flow(&LinkParams::healthy(), &ClientParams::healthy(), SMALL, 12);
    assert_eq!(pair.download.data_direction(), Direction::ServerToClient);
    assert_eq!(pair.upload.data_direction(), Direction::ClientToServer);
    assert_eq!(pair.download.events()[0].ts, 0.0);
    assert_eq!(pair.download.control_payload_violations(), 0);
    assert_eq!(pair.upload.control_payload_violations(), 0);
}

// ---- synthetic signatures ----

fn spec(m: usize, informative: Vec<(usize, f64)>, jitter: f64, noise: Noise, label: Label) -> ClassArtifactSpec {
    ClassArtifactSpec {
        m,
        informative,
        jitter,
        noise,
        label: Some(label),
    }
}

#[test]
fn noiseless_class_draws_are_identical() {
    let s = spec(10, vec![(1, 0.5), (4, 3.0)], 0.0, Noise::Constant(0.0), Label::FAULTY);
    let a = generate_synthetic_signature(&s, 1).unwrap();
    let b = generate_synthetic_signature(&s, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.values[4], 3.0);
    assert_eq!(a.values[0], 0.0);
    assert_eq!(a.catalog_version, SYNTHETIC_CATALOG);
}

#[test]
fn synthetic_values_are_clipped_and_seeded() {
    let s = spec(50, vec![(0, -5.0), (1, 2e6)], 1.0, Noise::Gaussian { mean: 0.0, sd: 10.0 }, Label::FAULTY);
    let a = generate_synthetic_signature(&s, 3).unwrap();
    assert!(a.values.iter().all(|v| (0.0..=1e6).contains(v)));
    assert_eq!(a.values[0], 0.0);
    assert_eq!(a.values[1], 1e6);
    assert_eq!(a, generate_synthetic_signature(&s, 3).unwrap());
    assert_ne!(a, generate_synthetic_signature(&s, 4).unwrap());
}

#[test]
fn invalid_specs_are_rejected() {
    let noise = Noise::Uniform { lo: 0.0, hi: 1.0 };
    assert!(generate_synthetic_signature(&spec(5, vec![(5, 1.0)], 0.1, noise, Label::FAULTY), 0).is_err());
    assert!(generate_synthetic_signature(&spec(5, vec![(1, 1.0), (1, 2.0)], 0.1, noise, Label::FAULTY), 0).is_err());
    assert!(generate_synthetic_signature(&spec(5, vec![], -0.1, noise, Label::FAULTY), 0).is_err());
    let inverted = Noise::Uniform { lo: 1.0, hi: 0.0 };
    assert!(generate_synthetic_signature(&spec(5, vec![], 0.1, inverted, Label::FAULTY), 0).is_err());
}

#[test]
fn disjoint_artifacts_outrank_noise() {
    let m = 40;
    let noise = Noise::Uniform { lo: 0.0, hi: 1.0 };
    let a = spec(m, (0..5).map(|j| (j, 0.2)).collect(), 0.05, noise, Label::FAULTY);
    let b = spec(m, (5..10).map(|j| (j, 0.8)).collect(), 0.05, noise, Label::HEALTHY_LINK);
    let db = synthetic_database(&[(a, 100), (b, 100)], 5, FaultRegistry::default()).unwrap();
    let x = db.matrix();
    let y: Vec<i8> = db.rows.iter().map(|r| if r.label == Some(Label::FAULTY) { 1 } else { -1 }).collect();
    let ranking = rank_columns(&x, &y, false).unwrap();
    let top: std::collections::BTreeSet<usize> = ranking.top(10).into_iter().collect();
    assert_eq!(top, (0..10).collect());
}

#[test]
fn ranking_recovers_most_artifacts_in_wide_signatures() {
    let m = 280;
    let noise = Noise::Uniform { lo: 0.0, hi: 1.0 };
    let informative: Vec<usize> = (0..20).map(|k| 7 + 13 * k).collect();
    for seed in 0..20u64 {
        let a = spec(m, informative.iter().map(|&j| (j, 0.5)).collect(), 0.05, noise, Label::FAULTY);
        let b = a.shifted(0.05);
        let b = ClassArtifactSpec {
            label: Some(Label::HEALTHY_LINK),
            ..b
        };
        let db = synthetic_database(&[(a, 100), (b, 100)], seed, FaultRegistry::default()).unwrap();
        let scaled = db.scaled(&db.fit_scaler().unwrap()).unwrap();
        let ranking = rank_features(&scaled, Label::FAULTY, Label::HEALTHY_LINK, false).unwrap();
        let top = ranking.top(25);
        let hits = informative.iter().filter(|j| top.contains(j)).count();
        assert!(hits >= 18, "seed {seed}: {hits} of 20");
    }
}

#[test]
fn synthetic_database_checks_its_inputs() {
    let noise = Noise::Constant(1.0);
    let a = spec(4, vec![], 0.0, noise, Label::FAULTY);
    let b = spec(5, vec![], 0.0, noise, Label::HEALTHY_LINK);
    assert!(synthetic_database(&[(a.clone(), 2), (b, 2)], 0, FaultRegistry::default()).is_err());
    let unlabeled = ClassArtifactSpec { label: None, ..a };
    assert!(synthetic_database(&[(unlabeled, 2)], 0, FaultRegistry::default()).is_err());
}
