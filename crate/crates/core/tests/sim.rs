use std::sync::Arc;

use atsc::sim::{
    gen_grid, gen_grid_with, global_state, load_network, FlowDocument, FlowRule, GridSpec, Observation,
    RoadNetwork, SimConfig, SimError, Simulator, OBS_LEN,
};
use proptest::prelude::*;

/// Single intersection. Outgoing roads 0..4 (N, E, S, W), entries 4..8 (N, E, S, W).
fn single(length: f64) -> Arc<RoadNetwork> {
    let (doc, _) = gen_grid_with(&GridSpec {
        rows: 1,
        cols: 1,
        intensity: 0.0,
        road_length: length,
        ..GridSpec::default()
    });
    Arc::new(RoadNetwork::from_document(doc).unwrap())
}

const ENTRY_N: usize = 4;
const ENTRY_W: usize = 7;
const EXIT_E: usize = 1;
const EXIT_S: usize = 2;

fn one_vehicle(route: Vec<usize>) -> Arc<FlowDocument> {
    Arc::new(FlowDocument::new(vec![FlowRule {
        route,
        start_time: 0,
        interval: 1,
        count: 1,
    }]))
}

#[test]
fn load_network_grid_sizes() {
    for (r, c, n) in [(2, 2, 4), (4, 4, 16), (3, 4, 12)] {
        let (doc, _) = gen_grid(r, c, 0.0, 0);
        let text = serde_json::to_string(&doc).unwrap();
        let net = load_network(&text).unwrap();
        assert_eq!(net.num_agents(), n);
        for x in &net.intersections {
            assert_eq!(x.movements().count(), 12);
            assert_eq!(x.phases.len(), 8);
        }
    }
}

#[test]
fn load_network_rejects_conflicting_phase() {
    let (mut doc, _) = gen_grid(2, 2, 0.0, 0);
    doc.phases[0] = ["N_S", "E_S", "N_R", "E_R", "S_R", "W_R"].map(String::from).to_vec();
    let err = load_network(&serde_json::to_string(&doc).unwrap()).unwrap_err();
    match err {
        SimError::Topology(msg) => assert!(msg.contains("N_S") && msg.contains("E_S"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn load_network_rejects_dangling_road() {
    let (mut doc, _) = gen_grid(2, 2, 0.0, 0);
    doc.intersections[0].incoming.n = 999;
    let err = load_network(&serde_json::to_string(&doc).unwrap()).unwrap_err();
    assert!(matches!(err, SimError::Topology(ref m) if m.contains("999")), "{err}");
    assert!(matches!(load_network("{not json"), Err(SimError::Parse(_))));
}

#[test]
fn reset_rejects_unknown_road_in_flow() {
    let flow = one_vehicle(vec![ENTRY_N, 42]);
    let err = Simulator::new(single(300.0), flow, SimConfig::default(), 0).unwrap_err();
    assert!(matches!(err, SimError::Flow(ref m) if m.contains("42")), "{err}");
}

#[test]
fn empty_flow_gives_zero_observations_and_reward() {
    let (doc, flow) = gen_grid(2, 2, 0.0, 0);
    let net = Arc::new(RoadNetwork::from_document(doc).unwrap());
    let mut sim = Simulator::new(net, Arc::new(flow), SimConfig::default(), 3).unwrap();
    let obs = sim.observations();
    for o in &obs {
        for i in Observation::count_indices() {
            assert_eq!(o.0[i], 0.0);
        }
        assert_eq!(o.phase(), 0);
    }
    let out = sim.step(&[3, 1, 0, 7]).unwrap();
    assert_eq!((out.moving, out.waiting, out.reward), (0, 0, 0.0));
}

#[test]
fn spawn_at_time_zero_occupies_one_lane() {
    let mut sim = Simulator::new(single(300.0), one_vehicle(vec![ENTRY_N, EXIT_S]), SimConfig::default(), 0).unwrap();
    let obs = sim.reset(0);
    let ones: usize = obs.iter().map(|o| o.lane_counts().iter().filter(|&&c| c == 1.0).count()).sum();
    let total: f64 = obs.iter().map(|o| o.lane_counts().iter().sum::<f64>()).sum();
    assert_eq!(ones, 1);
    assert_eq!(total, 1.0);
    assert_eq!(sim.state().clock, 0);
}

#[test]
fn same_seed_same_observations() {
    let (doc, flow) = gen_grid(2, 2, 0.2, 1);
    let net = Arc::new(RoadNetwork::from_document(doc).unwrap());
    let cfg = SimConfig {
        spawn_jitter: 4,
        ..SimConfig::default()
    };
    let run = |seed| {
        let mut sim = Simulator::new(net.clone(), Arc::new(flow.clone()), cfg.clone(), seed).unwrap();
        let mut trace = vec![sim.observations()];
        for k in 0..30 {
            trace.push(sim.step(&[k % 8, (k / 2) % 8, 1, 2]).unwrap().observations);
        }
        trace
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn queued_vehicle_crosses_once_green() {
    // 10 m roads: the vehicle from the west reaches its red stop line within a second.
    let mut sim = Simulator::new(single(10.0), one_vehicle(vec![ENTRY_W, EXIT_E]), SimConfig::default(), 0).unwrap();
    let out = sim.step(&[0]).unwrap();
    assert_eq!((out.moving, out.waiting), (0, 1));
    let out = sim.step(&[1]).unwrap();
    assert_eq!(out.waiting, 0);
    assert_eq!(sim.episode_metrics().throughput, 1);
}

#[test]
fn unchanged_action_has_no_all_red() {
    let (doc, flow) = gen_grid(2, 2, 0.3, 2);
    let net = Arc::new(RoadNetwork::from_document(doc).unwrap());
    let mut sim = Simulator::new(net, Arc::new(flow), SimConfig::default(), 0).unwrap();
    let out = sim
        .step_observed(&[0, 0, 0, 0], |s, green| {
            for (i, sig) in s.state().signals.iter().enumerate() {
                assert_eq!(sig.yellow_remaining, 0);
                assert_eq!(sig.pending_phase, None);
                assert_eq!(green[i], s.network().intersections[i].phase_green(0));
            }
        })
        .unwrap();
    assert!(out.info.phase_changes.iter().all(Option::is_none));
}

#[test]
fn phase_change_applies_all_red_to_switching_movements() {
    let mut sim = Simulator::new(single(300.0), Arc::new(FlowDocument::new(vec![])), SimConfig::default(), 0).unwrap();
    let old = sim.network().intersections[0].phase_green(0);
    let new = sim.network().intersections[0].phase_green(4);
    let mut seen = Vec::new();
    let out = sim.step_observed(&[4], |_, g| seen.push(g[0])).unwrap();
    assert_eq!(out.info.phase_changes[0], Some((0, 4)));
    assert_eq!(seen.len(), 10);
    for g in &seen[..5] {
        assert_eq!(*g, old.intersection(new));
    }
    for g in &seen[5..] {
        assert_eq!(*g, new);
    }
    assert_eq!(sim.state().signals[0].current_phase, 4);
    assert_eq!(sim.state().clock, 10);
}

#[test]
fn invalid_phase_id_is_rejected() {
    let mut sim = Simulator::new(single(300.0), Arc::new(FlowDocument::new(vec![])), SimConfig::default(), 0).unwrap();
    assert!(matches!(sim.step(&[8]), Err(SimError::Action(_))));
    assert!(matches!(sim.step(&[0, 1]), Err(SimError::Action(_))));
}

#[test]
fn free_flow_trip_has_zero_delay() {
    let mut sim = Simulator::new(single(300.0), one_vehicle(vec![ENTRY_N, EXIT_S]), SimConfig::default(), 0).unwrap();
    for _ in 0..10 {
        sim.step(&[0]).unwrap();
    }
    let m = sim.episode_metrics();
    assert_eq!(m.throughput, 1);
    assert!(m.delay_defined);
    assert!(m.average_delay.abs() < 1e-9, "{}", m.average_delay);
}

#[test]
fn red_hold_of_thirty_seconds_shows_as_delay() {
    let cfg = SimConfig {
        all_red: 0,
        ..SimConfig::default()
    };
    // arrives at the N stop line at t = 30 while EW straight is green; N_S turns green at t = 60
    let mut sim = Simulator::new(single(300.0), one_vehicle(vec![ENTRY_N, EXIT_S]), cfg, 0).unwrap();
    for _ in 0..6 {
        sim.step(&[1]).unwrap();
    }
    for _ in 0..6 {
        sim.step(&[0]).unwrap();
    }
    let m = sim.episode_metrics();
    assert_eq!(m.throughput, 1);
    assert!((m.average_delay - 30.0).abs() <= 1.0, "{}", m.average_delay);
}

#[test]
fn empty_completed_set_flags_delay() {
    let sim = Simulator::new(single(300.0), Arc::new(FlowDocument::new(vec![])), SimConfig::default(), 0).unwrap();
    let m = sim.episode_metrics();
    assert_eq!((m.throughput, m.average_delay, m.delay_defined), (0, 0.0, false));
}

#[test]
fn throughput_bounded_by_spawned() {
    let (doc, flow) = gen_grid(2, 2, 0.25, 4);
    let total = flow.total_vehicles() as usize;
    let net = Arc::new(RoadNetwork::from_document(doc).unwrap());
    let mut sim = Simulator::new(net, Arc::new(flow), SimConfig::default(), 0).unwrap();
    while !sim.is_done() {
        sim.step(&[0, 1, 0, 1]).unwrap();
    }
    assert!(sim.episode_metrics().throughput <= total);
    assert_eq!(sim.state().clock, 3600);
}

#[test]
fn config_validation() {
    let bad = SimConfig {
        green_interval: 5,
        all_red: 5,
        ..SimConfig::default()
    };
    assert!(matches!(bad.validate(), Err(SimError::Config(_))));
    let bad = SimConfig {
        saturation_flow: 0.0,
        ..SimConfig::default()
    };
    assert!(bad.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conservation_phase_legality_and_bounds(
        seed in 0u64..1000,
        actions in proptest::collection::vec(0usize..8, 4 * 40),
        intensity in 0.05f64..0.4,
    ) {
        let (doc, flow) = gen_grid(2, 2, intensity, seed);
        let net = Arc::new(RoadNetwork::from_document(doc).unwrap());
        let mut sim = Simulator::new(net, Arc::new(flow), SimConfig::default(), seed).unwrap();
        for (k, joint) in actions.chunks(4).enumerate() {
            let before: Vec<usize> = sim.state().signals.iter().map(|s| s.current_phase).collect();
            let clock = sim.state().clock;
            let out = sim.step_observed(joint, |s, green| {
                let st = s.state();
                assert_eq!(st.spawned, st.active + st.completed.len());
                for (i, g) in green.iter().enumerate() {
                    let x = &s.network().intersections[i];
                    let legal_full = (0..8).any(|p| x.phase_green(p) == *g);
                    let window = g.is_subset(x.phase_green(before[i]).intersection(x.phase_green(joint[i])));
                    assert!(legal_full || window, "illegal green set {g:?}");
                    assert!(st.signals[i].yellow_remaining <= 5);
                }
            }).unwrap();
            prop_assert_eq!(sim.state().clock, clock + 10);
            prop_assert_eq!(sim.state().steps, k + 1);
            let spawned = sim.state().spawned as f64;
            for o in &out.observations {
                prop_assert_eq!(o.phase_one_hot().iter().sum::<f64>(), 1.0);
                for i in Observation::count_indices() {
                    prop_assert!(o.0[i] >= 0.0 && o.0[i] <= spawned);
                }
                prop_assert!(o.lane_speeds().iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
            prop_assert_eq!(global_state(&out.observations).len(), 4 * OBS_LEN);
        }
    }
}
