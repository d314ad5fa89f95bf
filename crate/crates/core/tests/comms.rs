mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::Rng;
use sana::cells::CellKind;
use sana::comms::{gen_receptor, lymph_route, seal, try_open, LymphNode, RouteAction, StationDirectory, Topic};
use sana::routing::RoutingTable;
use sana::topology::TopologySpec;
use sana::world::World;
use sana::{CellId, EventKind, NodeId, ScenarioConfig, StationId, SubstanceId};

#[test]
fn open_succeeds_exactly_on_subsets() {
    let s = common::receptor_subset_oracle(10_000, 21);
    assert_eq!(s.subset_mismatches, 0);
    assert_eq!(s.plaintext_leaks, 0);
    assert!(s.opened > 1000 && s.refused > 1000, "{s:?}");
}

#[test]
fn ten_thousand_receptors_never_cross_match() {
    assert_eq!(common::receptor_cross_matches(10_000, 22), 0);
}

#[test]
fn thousand_payloads_round_trip() {
    let mut rng = common::rng(23);
    for i in 0..1000u64 {
        let keys: Vec<_> = (0..rng.random_range(1..4)).map(|_| gen_receptor(&mut rng)).collect();
        let payload: Vec<u8> = (0..rng.random_range(0..300)).map(|_| rng.random()).collect();
        let sub = seal(
            SubstanceId(i),
            Topic::Feed,
            &payload,
            keys.iter().map(|k| k.public).collect(),
            1,
            NodeId(0),
        )
        .unwrap();
        let privates: Vec<_> = keys.iter().map(|k| k.private).collect();
        assert_eq!(try_open(&sub, &privates).as_deref(), Some(payload.as_slice()));
    }
}

/// Four stations on a 12-node ring: a substance only one of them can open
/// reaches it from any other within diameter × station count hops.
#[test]
fn lymph_ring_delivers_to_the_opener() {
    let net = TopologySpec::Ring { nodes: 12, bandwidth: 4 }
        .build(&mut common::rng(0))
        .unwrap();
    let routing = RoutingTable::compute(&net);
    let mut rng = common::rng(24);
    let locations = [0u32, 3, 6, 9];
    let keys: Vec<_> = locations.iter().map(|_| gen_receptor(&mut rng)).collect();
    let stations: Vec<LymphNode> = locations
        .iter()
        .zip(&keys)
        .enumerate()
        .map(|(i, (&at, k))| LymphNode::new(StationId(i as u32), NodeId(at), vec![k.private]))
        .collect();
    let dir = StationDirectory::new(stations.iter().map(|s| (s.id, s.location)).collect());
    let bound = net.diameter() * stations.len() as u32;
    for start in 0..4 {
        for target in 0..4 {
            let mut sub = seal(
                SubstanceId(0),
                Topic::Report,
                b"report",
                [keys[target].public].into(),
                4 * net.diameter(),
                NodeId(locations[start]),
            )
            .unwrap();
            let (mut at, mut hops) = (start, 0);
            loop {
                match lymph_route(&stations[at], sub, &dir, &routing) {
                    RouteAction::Open(bytes) => {
                        assert_eq!(bytes, b"report");
                        assert_eq!(at, target);
                        break;
                    }
                    RouteAction::Forward { to, node, substance } => {
                        hops += routing.distance(stations[at].location, node).unwrap();
                        at = to.index();
                        sub = substance;
                    }
                    RouteAction::Drop => panic!("{start} -> {target} dropped"),
                }
            }
            assert!(hops <= bound, "{start} -> {target}: {hops} hops");
        }
    }
}

fn unknown_worm_with_ids() -> ScenarioConfig {
    let mut config = ScenarioConfig::baseline();
    config.attacks[0].known = false;
    config.defense.ids_top_betweenness = 2;
    config.horizon = 1200;
    config
}

fn detector_knows(world: &World, cell: CellId, signature: &[u8]) -> Option<bool> {
    world.cells().get(cell).and_then(|c| c.db()).map(|db| db.contains(signature))
}

/// Detectors within the radius of a reported node learn the signature
/// by the end of the following step.
#[test]
fn immunization_reaches_detectors_within_radius() {
    let config = unknown_worm_with_ids();
    let signature = config.attacks[0].signature.clone();
    let mut checked = 0;
    for seed in 0..4 {
        let (mut sim, mut world) = World::new(&config, seed).unwrap();
        let mut pending: Vec<CellId> = Vec::new();
        for _ in 0..config.horizon {
            let from = sim.log().len();
            sim.step(&mut world);
            for &cell in &pending {
                if let Some(knows) = detector_knows(&world, cell, &signature) {
                    assert!(knows, "seed {seed}: detector {cell} missed the immunization");
                    checked += 1;
                }
            }
            pending.clear();
            let mut target = None;
            for ev in &sim.log().events()[from..] {
                match ev.kind {
                    EventKind::Spawn {
                        cell,
                        kind: CellKind::Disinfector,
                        ..
                    } => {
                        target = match world.cells().get(cell).map(|c| &c.state) {
                            Some(sana::cells::CellState::Disinfector { target }) => Some(*target),
                            _ => None,
                        };
                    }
                    EventKind::SubstanceSend {
                        topic: Topic::Immunize, ..
                    } => {
                        let around = target.expect("immunization follows a dispatch");
                        let dist = sim.network().bfs_distances(around);
                        pending.extend(
                            world
                                .cells()
                                .iter()
                                .filter(|c| c.kind() == CellKind::Detector)
                                .filter(|c| dist[c.location.index()].is_some_and(|d| d <= config.stations.radius))
                                .map(|c| c.id),
                        );
                    }
                    _ => {}
                }
            }
        }
    }
    assert!(checked > 0, "no immunization observed");
}

/// Detectors a CNTS releases carry every signature it had learned by the
/// previous step, and no capped kind ever exceeds its cap.
#[test]
fn cnts_releases_trained_detectors_within_caps() {
    let config = unknown_worm_with_ids();
    let signature = config.attacks[0].signature.clone();
    let caps: BTreeMap<CellKind, usize> = [CellKind::Detector, CellKind::Ant, CellKind::Monitor]
        .into_iter()
        .map(|k| (k, config.cells.cap(k).unwrap() as usize))
        .collect();
    let mut trained_releases = 0;
    for seed in 0..4 {
        let (mut sim, mut world) = World::new(&config, seed).unwrap();
        let mut learned: BTreeMap<StationId, Vec<Vec<u8>>> = BTreeMap::new();
        for _ in 0..config.horizon {
            let from = sim.log().len();
            sim.step(&mut world);
            for ev in &sim.log().events()[from..] {
                if let EventKind::Spawn {
                    cell,
                    kind: CellKind::Detector,
                    station: Some(station),
                    ..
                } = ev.kind
                {
                    let Some(db) = world.cells().get(cell).and_then(|c| c.db()) else {
                        continue;
                    };
                    let known = learned.get(&station).cloned().unwrap_or_default();
                    assert!(known.iter().all(|s| db.contains(s)), "seed {seed}: cell {cell}");
                    trained_releases += known.contains(&signature) as usize;
                }
            }
            for (kind, &cap) in &caps {
                assert!(world.cells().count(*kind) <= cap, "seed {seed}: {kind} over cap");
            }
            for c in world.cnts() {
                learned.insert(c.id, c.trained.clone());
            }
        }
    }
    assert!(trained_releases > 0, "no release after learning");
}

#[test]
fn release_over_cap_retires_the_oldest() {
    let mut config = ScenarioConfig::baseline();
    config.cells.p_move = 0.0;
    config.stations.cnts_mix = [(CellKind::Detector, 5)].into();
    config.horizon = 100;
    let (mut sim, mut world) = World::new(&config, 3).unwrap();
    for _ in 0..config.stations.cnts_period - 1 {
        sim.step(&mut world);
    }
    let mut before = world.cells().ids_of(CellKind::Detector);
    assert_eq!(before.len(), 30);
    let from = sim.log().len();
    sim.step(&mut world);
    let replaced: BTreeSet<CellId> = sim.log().events()[from..]
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::Retire {
                cell,
                reason: sana::event::RetireReason::Replaced,
            } => Some(cell),
            _ => None,
        })
        .collect();
    // Two CNTS release five each.
    before.sort();
    let expected: BTreeSet<CellId> = before.into_iter().take(10).collect();
    assert_eq!(replaced, expected);
    assert_eq!(world.cells().count(CellKind::Detector), 30);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn substances_open_iff_required_is_covered(
        seed in any::<u64>(),
        required in proptest::collection::btree_set(0usize..6, 1..6),
        held in proptest::collection::btree_set(0usize..6, 0..7),
        payload in proptest::collection::vec(any::<u8>(), 0..64),
    ) {
        let mut rng = common::rng(seed);
        let pool: Vec<_> = (0..6).map(|_| gen_receptor(&mut rng)).collect();
        let sub = seal(
            SubstanceId(seed),
            Topic::Status,
            &payload,
            required.iter().map(|&i| pool[i].public).collect(),
            1,
            NodeId(0),
        ).unwrap();
        let keys: Vec<_> = held.iter().map(|&i| pool[i].private).collect();
        let opened = try_open(&sub, &keys);
        prop_assert_eq!(opened.is_some(), required.is_subset(&held));
        if let Some(bytes) = opened {
            prop_assert_eq!(bytes, payload);
        }
    }
}
