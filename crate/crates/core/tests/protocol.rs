mod common;

use std::io::{self, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use common::{gnp, ids, random_partition};
use priv_ebc::oracle::dense_ebc;
use priv_ebc::protocol::wire::{encode_msg, Message};
use priv_ebc::protocol::{
    run_party_x, run_two_process, Mechanism, PartyRole, ProtocolError, SessionHooks,
    TwoProcessOutcome,
};
use priv_ebc::{
    ego_context, exact_ebc, nonprivate_ebc_protocol, private_ebc, BackwardMsg, ClampMode,
    CountEntry, ForwardMsg, Graph, MechMask, NodeId, NodeSet, PartitionedGraph, Party, Protocol,
    ProtocolConfig, SessionRng,
};
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn nonprivate_protocol_is_exact_on_random_graphs() {
    for seed in 0..100u64 {
        let p = [0.05, 0.1, 0.2, 0.4][seed as usize % 4];
        let g = gnp(50, p, seed);
        let exact = exact_ebc(&g, NodeId(0));
        assert!((exact - dense_ebc(&g, NodeId(0))).abs() < 1e-9);
        let pg = random_partition(g, 0, seed);
        let got = nonprivate_ebc_protocol(&pg, NodeId(0)).unwrap();
        assert!((got - exact).abs() < 1e-9, "seed {seed}: {got} vs {exact}");
    }
}

#[test]
fn nonprivate_protocol_is_exact_on_all_small_graphs() {
    // Every graph on 5 nodes, every partition with the ego in X.
    let pairs: Vec<(usize, usize)> = (0..5)
        .flat_map(|u| (u + 1..5).map(move |v| (u, v)))
        .collect();
    for mask in 0..1u32 << pairs.len() {
        let g = Arc::new(Graph::from_edges(
            5,
            pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &e)| e),
        ));
        let exact = dense_ebc(&g, NodeId(0));
        for xs in 0..1u32 << 4 {
            let parties = (0..5)
                .map(|v| {
                    if v == 0 || xs >> (v - 1) & 1 == 1 {
                        Party::X
                    } else {
                        Party::Y
                    }
                })
                .collect();
            let pg = PartitionedGraph::new(g.clone(), parties);
            let got = nonprivate_ebc_protocol(&pg, NodeId(0)).unwrap();
            assert!((got - exact).abs() < 1e-9, "mask {mask} xs {xs}");
        }
    }
}

#[test]
fn star_and_clique() {
    for k in 2..12usize {
        let star = Arc::new(Graph::from_edges(k + 1, (1..=k).map(|v| (0, v))));
        let clique = Arc::new(Graph::from_edges(
            k + 1,
            (0..=k).flat_map(|u| (u + 1..=k).map(move |v| (u, v))),
        ));
        for seed in 0..5 {
            let parties: Vec<Party> = (0..=k)
                .map(|v| {
                    if v == 0 || (v as u64 + seed).is_multiple_of(3) {
                        Party::X
                    } else {
                        Party::Y
                    }
                })
                .collect();
            let s = PartitionedGraph::new(star.clone(), parties.clone());
            let c = PartitionedGraph::new(clique.clone(), parties);
            let want = (k * (k - 1) / 2) as f64;
            assert!((nonprivate_ebc_protocol(&s, NodeId(0)).unwrap() - want).abs() < 1e-9);
            assert_eq!(nonprivate_ebc_protocol(&c, NodeId(0)).unwrap(), 0.0);
        }
    }
}

#[test]
fn all_x_graph_needs_no_messages() {
    let g = gnp(30, 0.3, 4);
    let exact = exact_ebc(&g, NodeId(0));
    let pg = PartitionedGraph::new(g, vec![Party::X; 30]);
    let protocol = Protocol::new(&pg, ProtocolConfig::new(0.1).unwrap());
    let est = protocol
        .run(NodeId(0), &mut SessionRng::seed_from_u64(1))
        .unwrap();
    assert!(!est.exchanged);
    assert!(est.transcript.is_empty());
    assert!(est.ledger.events().is_empty());
    assert!((est.value - exact).abs() < 1e-9);
}

#[test]
fn huge_budget_recovers_exact_value() {
    let config = ProtocolConfig::new(1e9).unwrap();
    let mut rng = SessionRng::seed_from_u64(2);
    for seed in 0..30 {
        let g = gnp(40, 0.15, seed);
        let exact = exact_ebc(&g, NodeId(0));
        let pg = random_partition(g, 0, seed);
        let got = private_ebc(&pg, NodeId(0), config, &mut rng).unwrap();
        assert!((got - exact).abs() < 1e-3, "seed {seed}: {got} vs {exact}");
    }
}

#[test]
fn sessions_are_deterministic() {
    let pg = random_partition(gnp(40, 0.2, 9), 0, 9);
    let protocol = Protocol::new(&pg, ProtocolConfig::new(1.0).unwrap());
    let run = |seed| {
        protocol
            .run(NodeId(0), &mut SessionRng::seed_from_u64(seed))
            .unwrap()
    };
    let (a, b, c) = (run(5), run(5), run(6));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.transcript, b.transcript);
    assert_ne!(a.transcript, c.transcript);
}

#[test]
fn cached_and_streaming_samplers_agree() {
    let pg = random_partition(gnp(60, 0.15, 31), 0, 31);
    let config = ProtocolConfig::new(0.7).unwrap();
    let cached = Protocol::new(&pg, config);
    let streaming = Protocol::new(&pg, config).without_sampler_cache();
    for seed in 0..20 {
        let a = cached
            .run(NodeId(0), &mut SessionRng::seed_from_u64(seed))
            .unwrap();
        let b = streaming
            .run(NodeId(0), &mut SessionRng::seed_from_u64(seed))
            .unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.transcript, b.transcript);
    }
}

/// Graph with ego 0; X = {0, 1, 2, 3}, Y = {4, 5, 6}. R* = {1, 2}; 3 is X but not a
/// neighbour of the ego.
fn discard_graph() -> PartitionedGraph {
    let g = Graph::from_edges(
        7,
        [
            (0, 1),
            (0, 2),
            (0, 4),
            (0, 5),
            (0, 6),
            (1, 4),
            (3, 4),
            (3, 5),
            (4, 5),
            (5, 6),
            (2, 6),
            (1, 2),
        ],
    );
    let mut parties = vec![Party::X; 4];
    parties.extend([Party::Y; 3]);
    PartitionedGraph::new(g, parties)
}

#[test]
fn counts_for_non_neighbours_are_discarded() {
    let pg = discard_graph();
    let exact = exact_ebc(pg.graph(), NodeId(0));
    let config = ProtocolConfig::new(1.0)
        .unwrap()
        .with_mechanisms(MechMask::NONE);
    let protocol = Protocol::new(&pg, config);
    let mut rng = SessionRng::seed_from_u64(3);

    let hooks = SessionHooks {
        forced_release: Some(ids(&[1, 2, 3])),
        tamper_reply: None,
    };
    let plain = protocol.run_with_hooks(NodeId(0), hooks, &mut rng).unwrap();
    assert!((plain.value - exact).abs() < 1e-12);
    assert!(plain.non_private);

    let hooks = SessionHooks {
        forced_release: Some(ids(&[1, 2, 3])),
        tamper_reply: Some(Box::new(|m: &mut BackwardMsg| {
            for e in m.counts.iter_mut().filter(|e| e.i == NodeId(3)) {
                e.value = -1e6;
            }
        })),
    };
    let tampered = protocol.run_with_hooks(NodeId(0), hooks, &mut rng).unwrap();
    assert_eq!(tampered.value.to_bits(), plain.value.to_bits());
}

/// `S_X + S_XY + S_Y` with `R = ∅` and exact messages. Intermediates per pair:
/// X–X pairs see all of `N_a ∪ {a}`, spanning pairs only `R* ∪ {a}`, Y–Y pairs
/// `N_y ∪ {a}`.
fn unreleased_estimate(pg: &PartitionedGraph, a: NodeId) -> f64 {
    let g = pg.graph();
    let na: Vec<NodeId> = g.neighbours(a).to_vec();
    let within = |p: Option<Party>| -> Vec<NodeId> {
        na.iter()
            .copied()
            .filter(|&v| p.is_none_or(|p| pg.party_of(v) == p))
            .chain([a])
            .collect()
    };
    let mut total = 0.0;
    for (s, &i) in na.iter().enumerate() {
        for &j in &na[s + 1..] {
            if g.has_edge(i, j) {
                continue;
            }
            let mids = match (pg.party_of(i), pg.party_of(j)) {
                (Party::X, Party::X) => within(None),
                (Party::Y, Party::Y) => within(Some(Party::Y)),
                _ => within(Some(Party::X)),
            };
            let k = mids
                .iter()
                .filter(|&&w| g.has_edge(i, w) && g.has_edge(w, j))
                .count();
            total += 1.0 / k as f64;
        }
    }
    total
}

#[test]
fn unreleased_neighbours_use_zero_counts() {
    let config = ProtocolConfig::new(1.0)
        .unwrap()
        .with_mechanisms(MechMask::NONE);
    for seed in 0..40 {
        let pg = random_partition(gnp(14, 0.4, seed), 0, seed);
        let protocol = Protocol::new(&pg, config);
        let hooks = SessionHooks {
            forced_release: Some(NodeSet::new()),
            tamper_reply: None,
        };
        let ego = ego_context(protocol.x_view(), NodeId(0)).unwrap();
        let est = protocol
            .run_with_hooks(NodeId(0), hooks, &mut SessionRng::seed_from_u64(seed))
            .unwrap();
        let want = if ego.y_neighbours.len() >= 2 {
            unreleased_estimate(&pg, NodeId(0))
        } else {
            exact_ebc(pg.graph(), NodeId(0))
        };
        assert!(
            (est.value - want).abs() < 1e-12,
            "seed {seed}: {} vs {want}",
            est.value
        );
    }
}

#[test]
fn degenerate_ego_skips_the_exchange() {
    // One Y neighbour (3): no messages and an exact answer at any budget.
    let g = Graph::from_edges(5, [(0, 1), (0, 2), (0, 3), (1, 3), (3, 4), (2, 4)]);
    let pg = PartitionedGraph::new(g, vec![Party::X, Party::X, Party::X, Party::Y, Party::Y]);
    let exact = exact_ebc(pg.graph(), NodeId(0));
    for eps in [0.01, 1.0] {
        let protocol = Protocol::new(&pg, ProtocolConfig::new(eps).unwrap());
        let est = protocol
            .run(NodeId(0), &mut SessionRng::seed_from_u64(0))
            .unwrap();
        assert!(!est.exchanged);
        assert_eq!(est.released, None);
        assert!(est.transcript.is_empty());
        assert!(est.ledger.events().is_empty());
        assert_eq!(est.parts.s_y, 0.0);
        assert!((est.value - exact).abs() < 1e-12);
    }
}

#[test]
fn budget_is_split_as_declared() {
    let pg = discard_graph();
    let protocol = Protocol::new(&pg, ProtocolConfig::new(0.8).unwrap());
    let est = protocol
        .run(NodeId(0), &mut SessionRng::seed_from_u64(0))
        .unwrap();
    let events: Vec<(Party, Mechanism, f64)> = est
        .ledger
        .events()
        .iter()
        .map(|e| (e.party, e.mechanism, e.epsilon))
        .collect();
    assert_eq!(
        events,
        [
            (Party::Y, Mechanism::Counts, 0.4),
            (Party::Y, Mechanism::PartialSum, 0.4),
            (Party::X, Mechanism::Forward, 0.8),
        ]
    );
    assert_eq!(est.ledger.spent(Party::X), 0.8);
    assert_eq!(est.ledger.spent(Party::Y), 0.8);
    assert!(!est.non_private);

    let masked = Protocol::new(
        &pg,
        ProtocolConfig::new(0.8)
            .unwrap()
            .with_mechanisms("mech1+mech3".parse().unwrap()),
    );
    let est = masked
        .run(NodeId(0), &mut SessionRng::seed_from_u64(0))
        .unwrap();
    assert!(est.non_private);
    assert_eq!(est.ledger.spent(Party::Y), 0.4);
}

#[test]
fn raw_mode_counts_skipped_terms() {
    let pg = random_partition(gnp(40, 0.3, 12), 0, 12);
    let config = ProtocolConfig::new(0.1).unwrap().with_clamp(ClampMode::Raw);
    let protocol = Protocol::new(&pg, config);
    let mut skipped = 0;
    for seed in 0..20 {
        let est = protocol
            .run(NodeId(0), &mut SessionRng::seed_from_u64(seed))
            .unwrap();
        assert!(est.value.is_finite());
        skipped += est.skipped_terms;
    }
    assert!(skipped > 0);
    let clamped = Protocol::new(&pg, config.with_clamp(ClampMode::ClampNonneg));
    let est = clamped
        .run(NodeId(0), &mut SessionRng::seed_from_u64(0))
        .unwrap();
    assert_eq!(est.skipped_terms, 0);
}

fn free_port() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    format!("127.0.0.1:{}", l.local_addr().unwrap().port())
}

#[test]
fn tcp_run_matches_in_process_run() {
    let pg = random_partition(gnp(40, 0.2, 21), 0, 21);
    let config = ProtocolConfig::new(1.0).unwrap();
    let local = Protocol::new(&pg, config)
        .run(NodeId(0), &mut SessionRng::seed_from_u64(77))
        .unwrap();
    assert!(local.exchanged);
    assert_eq!(local.transcript.len(), 2);

    let addr = free_port();
    let (x_view, y_view) = (pg.x_view(), pg.y_view());
    let y_addr = addr.clone();
    let y = thread::spawn(move || {
        run_two_process(
            PartyRole::Y(&y_view),
            &y_addr,
            NodeId(0),
            config,
            &mut SessionRng::seed_from_u64(77),
        )
        .unwrap()
    });
    let x = run_two_process(
        PartyRole::X(&x_view),
        &addr,
        NodeId(0),
        config,
        &mut SessionRng::seed_from_u64(77),
    )
    .unwrap();
    let (TwoProcessOutcome::X(remote), TwoProcessOutcome::Y(y_ledger)) = (x, y.join().unwrap())
    else {
        panic!("roles swapped");
    };
    assert_eq!(remote.value.to_bits(), local.value.to_bits());
    assert_eq!(remote.transcript, local.transcript);
    assert_eq!(y_ledger.spent(Party::Y), 1.0);
}

/// Scripted peer: serves canned bytes, swallows writes.
struct Scripted(io::Cursor<Vec<u8>>);

impl Read for Scripted {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.0.read(buf)
    }
}

impl Write for Scripted {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[test]
fn peer_errors_are_reported() {
    let pg = discard_graph();
    let config = ProtocolConfig::new(1.0).unwrap();
    let view = pg.x_view();
    let mut reply = encode_msg(&Message::Backward(BackwardMsg::default()));
    reply[4] = 9;
    let err = run_party_x(
        &mut Scripted(io::Cursor::new(reply)),
        &view,
        NodeId(0),
        config,
        &mut SessionRng::seed_from_u64(0),
    )
    .unwrap_err();
    assert!(matches!(err, ProtocolError::Handshake(9)), "{err}");

    let echo = encode_msg(&Message::Forward(ForwardMsg {
        nodes: NodeSet::new(),
    }));
    let err = run_party_x(
        &mut Scripted(io::Cursor::new(echo)),
        &view,
        NodeId(0),
        config,
        &mut SessionRng::seed_from_u64(0),
    )
    .unwrap_err();
    assert!(matches!(err, ProtocolError::Unexpected(_)), "{err}");

    let err = run_party_x(
        &mut Scripted(io::Cursor::new(Vec::new())),
        &view,
        NodeId(0),
        config,
        &mut SessionRng::seed_from_u64(0),
    )
    .unwrap_err();
    assert!(matches!(err, ProtocolError::Io(_)), "{err}");
}

#[test]
fn views_hide_the_other_partys_internal_edges() {
    let pg = discard_graph();
    let (x, y) = (pg.x_view(), pg.y_view());
    assert_eq!(y.knows_edge(NodeId(0), NodeId(1)), None);
    assert_eq!(x.knows_edge(NodeId(4), NodeId(5)), None);
    assert_eq!(x.knows_edge(NodeId(0), NodeId(4)), Some(true));
    assert_eq!(y.knows_edge(NodeId(3), NodeId(6)), Some(false));
    use priv_ebc::Adjacency;
    assert!(!y.neighbours(NodeId(1)).contains(&NodeId(0)));
    assert!(!x.neighbours(NodeId(4)).contains(&NodeId(5)));
}

fn arb_message() -> impl Strategy<Value = Message> {
    let fwd = prop::collection::btree_set(any::<u32>(), 0..40).prop_map(|s| {
        Message::Forward(ForwardMsg {
            nodes: s.into_iter().map(NodeId).collect(),
        })
    });
    let bwd = (
        prop::collection::btree_map((any::<u32>(), any::<u32>()), any::<f64>(), 0..40),
        any::<f64>(),
    )
        .prop_map(|(m, s)| {
            Message::Backward(BackwardMsg {
                counts: m
                    .into_iter()
                    .map(|((i, j), value)| CountEntry {
                        i: NodeId(i),
                        j: NodeId(j),
                        value,
                    })
                    .collect(),
                partial_sum: s,
            })
        });
    prop_oneof![fwd, bwd]
}

proptest! {
    #[test]
    fn wire_round_trip(msg in arb_message()) {
        use priv_ebc::protocol::wire::decode_msg;
        let bytes = encode_msg(&msg);
        let back = decode_msg(&bytes).unwrap();
        // Compare encodings so NaN payloads round-trip bit for bit.
        prop_assert_eq!(encode_msg(&back), bytes);
    }

    #[test]
    fn truncated_frames_never_decode(msg in arb_message(), cut in 1usize..64) {
        use priv_ebc::protocol::wire::decode_msg;
        let bytes = encode_msg(&msg);
        let keep = bytes.len().saturating_sub(cut);
        prop_assert!(decode_msg(&bytes[..keep]).is_err());
    }

    #[test]
    fn nonprivate_matches_exact(seed in any::<u64>(), n in 1usize..30, p in 0.0..1.0f64) {
        let g = gnp(n, p, seed);
        let exact = exact_ebc(&g, NodeId(0));
        let pg = random_partition(g, 0, seed);
        prop_assert!((nonprivate_ebc_protocol(&pg, NodeId(0)).unwrap() - exact).abs() < 1e-9);
    }
}
