//! Synthetic R x C grid networks with seeded Poisson demand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::flow::{FlowDocument, FlowRule};
use super::network::{
    standard_phases, Endpoint, IntersectionDoc, NetworkDocument, RoadDoc, RoadNetwork, Side, SideMap, Turn,
    LANES_PER_ROAD, NETWORK_FORMAT_VERSION, SIDES,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    /// Mean arrivals per second on every boundary entry road.
    pub intensity: f64,
    pub seed: u64,
    /// Seconds of demand to generate.
    pub horizon: u64,
    pub road_length: f64,
    pub free_speed: f64,
    /// Share of vehicles driving straight through the grid; the rest make one turn.
    pub straight_share: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rows: 2,
            cols: 2,
            intensity: 0.2,
            seed: 0,
            horizon: 3600,
            road_length: 300.0,
            free_speed: 10.0,
            straight_share: 0.6,
        }
    }
}

fn neighbor(rows: usize, cols: usize, r: usize, c: usize, side: Side) -> Option<usize> {
    let (nr, nc) = match side {
        Side::N => (r.checked_sub(1)?, c),
        Side::S => (r + 1, c),
        Side::E => (r, c + 1),
        Side::W => (r, c.checked_sub(1)?),
    };
    (nr < rows && nc < cols).then_some(nr * cols + nc)
}

/// Builds the grid topology. Every intersection gets one outgoing road per
/// side; sides on the grid edge also get an incoming road from the boundary.
pub fn grid_network(spec: &GridSpec) -> NetworkDocument {
    let (rows, cols) = (spec.rows, spec.cols);
    let n = rows * cols;
    let mut roads: Vec<RoadDoc> = Vec::new();
    let mut outgoing = vec![[usize::MAX; SIDES]; n];
    let mut incoming = vec![[usize::MAX; SIDES]; n];
    let road = |from: Endpoint, to: Endpoint, roads: &mut Vec<RoadDoc>| {
        let id = roads.len();
        roads.push(RoadDoc {
            id,
            from,
            to,
            length: spec.road_length,
            free_speed: spec.free_speed,
            lanes: LANES_PER_ROAD,
        });
        id
    };
    for r in 0..rows {
        for c in 0..cols {
            let x = r * cols + c;
            for side in Side::ALL {
                let to = match neighbor(rows, cols, r, c, side) {
                    Some(y) => Endpoint::Intersection(y),
                    None => Endpoint::Boundary,
                };
                let id = road(Endpoint::Intersection(x), to, &mut roads);
                outgoing[x][side.index()] = id;
                if let Some(y) = neighbor(rows, cols, r, c, side) {
                    incoming[y][side.opposite().index()] = id;
                }
            }
        }
    }
    for r in 0..rows {
        for c in 0..cols {
            let x = r * cols + c;
            for side in Side::ALL {
                if neighbor(rows, cols, r, c, side).is_none() {
                    let id = road(Endpoint::Boundary, Endpoint::Intersection(x), &mut roads);
                    incoming[x][side.index()] = id;
                }
            }
        }
    }
    NetworkDocument {
        format_version: NETWORK_FORMAT_VERSION,
        grid_shape: Some([rows, cols]),
        intersections: (0..n)
            .map(|x| IntersectionDoc {
                id: x,
                incoming: SideMap::from_array(incoming[x]),
                outgoing: SideMap::from_array(outgoing[x]),
            })
            .collect(),
        roads,
        phases: standard_phases()
            .iter()
            .map(|p| p.green.iter().map(|m| m.to_string()).collect())
            .collect(),
    }
}

/// Follows `entry` through the grid, turning once at the `turn_at`-th
/// intersection (if given) and driving straight otherwise, until a boundary.
fn trace_route(net: &RoadNetwork, entry: usize, turn_at: Option<(usize, Turn)>) -> Vec<usize> {
    let mut route = vec![entry];
    let mut current = entry;
    let mut k = 0;
    while let Endpoint::Intersection(x) = net.roads[current].to {
        let approach = net.arrival_side(current).expect("grid roads are attached");
        let turn = match turn_at {
            Some((at, t)) if at == k => t,
            _ => Turn::Straight,
        };
        current = net.intersections[x].outgoing[turn.exit_side(approach).index()];
        route.push(current);
        k += 1;
    }
    route
}

/// Entry roads (boundary to intersection) with their candidate routes and weights.
fn route_menu(net: &RoadNetwork, straight_share: f64) -> Vec<(usize, Vec<(Vec<usize>, f64)>)> {
    net.roads
        .iter()
        .filter(|r| r.from == Endpoint::Boundary)
        .map(|r| {
            let straight = trace_route(net, r.id, None);
            let crossings = straight.len() - 1;
            let mut menu = vec![(straight, straight_share)];
            let turn_weight = (1.0 - straight_share) / (2 * crossings) as f64;
            for k in 0..crossings {
                for t in [Turn::Left, Turn::Right] {
                    menu.push((trace_route(net, r.id, Some((k, t))), turn_weight));
                }
            }
            (r.id, menu)
        })
        .collect()
}

/// Network and flow documents for an R x C grid.
pub fn gen_grid(rows: usize, cols: usize, intensity: f64, seed: u64) -> (NetworkDocument, FlowDocument) {
    gen_grid_with(&GridSpec {
        rows,
        cols,
        intensity,
        seed,
        ..GridSpec::default()
    })
}

pub fn gen_grid_with(spec: &GridSpec) -> (NetworkDocument, FlowDocument) {
    assert!(spec.rows >= 1 && spec.cols >= 1, "grid needs at least one row and column");
    let doc = grid_network(spec);
    let net = RoadNetwork::from_document(doc.clone()).expect("generated grid is valid");
    let mut flows = Vec::new();
    if spec.intensity > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let gap = Exp::new(spec.intensity).expect("positive rate");
        for (_, menu) in route_menu(&net, spec.straight_share) {
            let total: f64 = menu.iter().map(|(_, w)| w).sum();
            let mut t = gap.sample(&mut rng);
            while t < spec.horizon as f64 {
                let mut pick = rng.random::<f64>() * total;
                let mut chosen = &menu[menu.len() - 1].0;
                for (route, w) in &menu {
                    if pick < *w {
                        chosen = route;
                        break;
                    }
                    pick -= w;
                }
                flows.push(FlowRule {
                    route: chosen.clone(),
                    start_time: t.floor() as u64,
                    interval: 1,
                    count: 1,
                });
                t += gap.sample(&mut rng);
            }
        }
        flows.sort_by_key(|f| f.start_time);
    }
    (doc, FlowDocument::new(flows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        for (r, c, n) in [(1, 1, 1), (2, 2, 4), (3, 4, 12), (4, 4, 16)] {
            let (doc, _) = gen_grid(r, c, 0.0, 0);
            let net = RoadNetwork::from_document(doc).unwrap();
            assert_eq!(net.num_agents(), n);
            // 4 outgoing per intersection plus one entry per boundary side
            assert_eq!(net.roads.len(), 4 * n + 2 * (r + c));
        }
    }

    #[test]
    fn zero_intensity_is_empty() {
        let (_, flow) = gen_grid(2, 2, 0.0, 7);
        assert!(flow.flows.is_empty());
    }

    #[test]
    fn routes_are_valid_and_end_at_boundary() {
        let (doc, flow) = gen_grid(3, 4, 0.05, 3);
        let net = RoadNetwork::from_document(doc).unwrap();
        flow.validate(&net).unwrap();
        assert!(!flow.flows.is_empty());
        for rule in &flow.flows {
            assert_eq!(net.roads[rule.route[0]].from, Endpoint::Boundary);
            assert_eq!(net.roads[*rule.route.last().unwrap()].to, Endpoint::Boundary);
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(gen_grid(2, 2, 0.1, 5), gen_grid(2, 2, 0.1, 5));
        assert_ne!(gen_grid(2, 2, 0.1, 5).1, gen_grid(2, 2, 0.1, 6).1);
    }
}
