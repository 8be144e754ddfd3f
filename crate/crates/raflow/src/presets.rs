//! Reference topologies used across tests, benches and the bundled
//! scenario files.
//!
//! * [`toy`] — four nodes, two flows: a two-hop path `1-2-0` next to a
//!   single-hop path `3-0`, with `d(1,2) = d(2,0) = d(3,1) = 400 m`,
//!   `d(3,0) = sqrt(5)*400 m`, `d(3,2) = sqrt(2)*400 m`, path loss 3 and
//!   relay transmit probability 0.5.
//! * [`grid_two_flow`] / [`grid_three_flow`] — a 4x4 grid with 100 m
//!   spacing, destination at node 15, flows routed over `3-7-11-15`,
//!   `0-5-10-15` and (three-flow case) `12-13-14-15`, path loss 4.
//!
//! All radios use 0.1 W transmit power, 7e-11 W noise and a default SINR
//! threshold of 0.5; sweep code rescales the threshold as needed.

use crate::channel::{ChannelParams, RadioSpec};
use crate::topology::{Flow, InterferencePolicy, NodeSpec, Role, Scenario};

const TX_POWER_W: f64 = 0.1;
const NOISE_W: f64 = 7e-11;
const DEFAULT_SINR_THRESHOLD: f64 = 0.5;
const RELAY_Q: f64 = 0.5;

fn node(id: u32, x_m: f64, y_m: f64, role: Role, q: Option<f64>) -> NodeSpec {
    let radio = RadioSpec::new(TX_POWER_W, NOISE_W, DEFAULT_SINR_THRESHOLD).unwrap();
    NodeSpec { id, x_m, y_m, radio, role, q }
}

/// The illustrative two-flow topology with one relay.
pub fn toy() -> Scenario {
    let d = 400.0;
    let nodes = vec![
        node(0, 0.0, 0.0, Role::Destination, None),
        node(1, 2.0 * d, 0.0, Role::Source, Some(1.0)),
        node(2, d, 0.0, Role::Relay, Some(RELAY_Q)),
        node(3, 2.0 * d, d, Role::Source, Some(1.0)),
    ];
    let flows = vec![
        Flow { id: 1, source: 1, path: vec![1, 2, 0] },
        Flow { id: 2, source: 3, path: vec![3, 0] },
    ];
    let channel = ChannelParams::new(3.0, 1.0).unwrap();
    Scenario::from_parts(channel, InterferencePolicy::AllNodes, nodes, flows)
        .expect("toy preset is valid")
}

fn grid(flow_count: usize) -> Scenario {
    let spacing = 100.0;
    let sources: &[u32] = if flow_count == 3 { &[3, 0, 12] } else { &[3, 0] };
    let nodes = (0..16u32)
        .map(|id| {
            let x = f64::from(id % 4) * spacing;
            let y = f64::from(id / 4) * spacing;
            if id == 15 {
                node(id, x, y, Role::Destination, None)
            } else if sources.contains(&id) {
                node(id, x, y, Role::Source, Some(RELAY_Q))
            } else {
                node(id, x, y, Role::Relay, Some(RELAY_Q))
            }
        })
        .collect();
    let mut flows = vec![
        Flow { id: 1, source: 3, path: vec![3, 7, 11, 15] },
        Flow { id: 2, source: 0, path: vec![0, 5, 10, 15] },
    ];
    if flow_count == 3 {
        flows.push(Flow { id: 3, source: 12, path: vec![12, 13, 14, 15] });
    }
    let channel = ChannelParams::new(4.0, 1.0).unwrap();
    Scenario::from_parts(channel, InterferencePolicy::PathNodes, nodes, flows)
        .expect("grid preset is valid")
}

/// 16-node grid with flows on `3-7-11-15` and `0-5-10-15`.
pub fn grid_two_flow() -> Scenario {
    grid(2)
}

/// 16-node grid with a third flow on `12-13-14-15`.
pub fn grid_three_flow() -> Scenario {
    grid(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_sixteen_nodes_and_expected_flows() {
        let two = grid_two_flow();
        assert_eq!(two.nodes().len(), 16);
        assert_eq!(two.flows().len(), 2);
        let three = grid_three_flow();
        assert_eq!(three.flows().len(), 3);
        assert_eq!(three.destination(), 15);
    }

    #[test]
    fn grid_two_flow_interferers_under_path_policy() {
        let s = grid_two_flow();
        assert_eq!(s.interferer_set((3, 7)).unwrap(), vec![0, 5, 10, 11]);
    }

    #[test]
    fn toy_multi_hop_path_has_higher_end_to_end_success() {
        for step in 1..=8 {
            let gamma = 0.25 * f64::from(step);
            let s = toy().with_uniform_sinr_threshold(gamma).unwrap();
            let p1 = s.end_to_end_success(s.flow(1).unwrap());
            let p2 = s.end_to_end_success(s.flow(2).unwrap());
            assert!(p1 > p2, "gamma {gamma}: P_r1 {p1} <= P_r2 {p2}");
        }
    }

    #[test]
    fn grid_best_path_is_vertical_column() {
        for scenario in [grid_two_flow(), grid_three_flow()] {
            let best = scenario.best_path().unwrap();
            assert_eq!(best.path, vec![3, 7, 11, 15]);
            let p_best = scenario.end_to_end_success(best);
            for flow in scenario.flows() {
                assert!(p_best >= scenario.end_to_end_success(flow));
            }
        }
    }

    #[test]
    fn toy_geometry_matches_stated_distances() {
        let s = toy();
        let d = |a: u32, b: u32| {
            let na = s.node(a).unwrap();
            let nb = s.node(b).unwrap();
            (na.x_m - nb.x_m).hypot(na.y_m - nb.y_m)
        };
        assert_eq!(d(1, 2), 400.0);
        assert_eq!(d(2, 0), 400.0);
        assert_eq!(d(3, 1), 400.0);
        assert!((d(3, 0) - 400.0 * 5f64.sqrt()).abs() < 1e-9);
        assert!((d(3, 2) - 400.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn presets_round_trip_through_the_file_format() {
        for s in [toy(), grid_two_flow(), grid_three_flow()] {
            let doc = s.to_toml_string();
            assert_eq!(Scenario::from_toml_str(&doc).unwrap(), s);
        }
    }
}
