//! Static road topology: intersections, roads, movements and phase tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Approaches per intersection.
pub const SIDES: usize = 4;
/// Turns per approach; lane `t` of an incoming road serves turn `t`.
pub const TURNS: usize = 3;
/// Movements (road links, signal lights) per intersection.
pub const MOVEMENTS: usize = SIDES * TURNS;
/// Phases per intersection.
pub const PHASES: usize = 8;
pub const LANES_PER_ROAD: usize = TURNS;

/// Side of an intersection a road attaches to, clockwise from north.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    N,
    E,
    S,
    W,
}

impl Side {
    pub const ALL: [Side; SIDES] = [Side::N, Side::E, Side::S, Side::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Side {
        Side::ALL[i % SIDES]
    }

    pub fn opposite(self) -> Side {
        Side::from_index(self.index() + 2)
    }

    fn letter(self) -> char {
        match self {
            Side::N => 'N',
            Side::E => 'E',
            Side::S => 'S',
            Side::W => 'W',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Turn {
    Left,
    Straight,
    Right,
}

impl Turn {
    pub const ALL: [Turn; TURNS] = [Turn::Left, Turn::Straight, Turn::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Turn taken by a vehicle arriving from `approach` and leaving toward `exit`.
    /// `None` for a U-turn.
    pub fn between(approach: Side, exit: Side) -> Option<Turn> {
        match (exit.index() + SIDES - approach.index()) % SIDES {
            1 => Some(Turn::Left),
            2 => Some(Turn::Straight),
            3 => Some(Turn::Right),
            _ => None,
        }
    }

    /// Exit side for a vehicle arriving from `approach` taking this turn.
    pub fn exit_side(self, approach: Side) -> Side {
        match self {
            Turn::Left => Side::from_index(approach.index() + 1),
            Turn::Straight => Side::from_index(approach.index() + 2),
            Turn::Right => Side::from_index(approach.index() + 3),
        }
    }
}

/// An (approach, turn) pair. Indexed `3 * approach + turn`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Movement {
    pub approach: Side,
    pub turn: Turn,
}

impl Movement {
    pub fn new(approach: Side, turn: Turn) -> Self {
        Movement { approach, turn }
    }

    pub fn index(self) -> usize {
        self.approach.index() * TURNS + self.turn.index()
    }

    pub fn from_index(i: usize) -> Movement {
        assert!(i < MOVEMENTS, "movement index {i} out of range");
        Movement {
            approach: Side::from_index(i / TURNS),
            turn: Turn::ALL[i % TURNS],
        }
    }

    pub fn all() -> impl Iterator<Item = Movement> {
        (0..MOVEMENTS).map(Movement::from_index)
    }

    pub fn is_right_turn(self) -> bool {
        self.turn == Turn::Right
    }

    /// Fixed conflict table. Right turns never conflict. Movements from the
    /// same approach never conflict. Opposing straights and opposing lefts are
    /// compatible; a straight conflicts with the opposing left; any two
    /// movements from perpendicular approaches conflict.
    pub fn conflicts_with(self, other: Movement) -> bool {
        if self.is_right_turn() || other.is_right_turn() || self.approach == other.approach {
            return false;
        }
        if self.approach.opposite() == other.approach {
            return self.turn != other.turn;
        }
        true
    }
}

impl fmt::Display for Movement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.turn {
            Turn::Left => 'L',
            Turn::Straight => 'S',
            Turn::Right => 'R',
        };
        write!(f, "{}_{}", self.approach.letter(), t)
    }
}

impl FromStr for Movement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('_');
        let (Some(a), Some(t), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("malformed movement `{s}` (expected e.g. `N_L`)"));
        };
        let approach = match a {
            "N" => Side::N,
            "E" => Side::E,
            "S" => Side::S,
            "W" => Side::W,
            _ => return Err(format!("unknown approach in movement `{s}`")),
        };
        let turn = match t {
            "L" => Turn::Left,
            "S" => Turn::Straight,
            "R" => Turn::Right,
            _ => return Err(format!("unknown turn in movement `{s}`")),
        };
        Ok(Movement { approach, turn })
    }
}

/// Bit set over the 12 movements of one intersection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LightSet(u16);

impl LightSet {
    pub const EMPTY: LightSet = LightSet(0);

    pub fn from_bits(bits: u16) -> Self {
        LightSet(bits & ((1 << MOVEMENTS) - 1))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn from_movements<I: IntoIterator<Item = Movement>>(it: I) -> Self {
        it.into_iter().fold(LightSet::EMPTY, |s, m| s.with(m.index()))
    }

    pub fn right_turns() -> Self {
        LightSet::from_movements(Side::ALL.map(|s| Movement::new(s, Turn::Right)))
    }

    pub fn with(self, light: usize) -> Self {
        LightSet(self.0 | (1 << light))
    }

    pub fn contains(self, light: usize) -> bool {
        light < MOVEMENTS && self.0 & (1 << light) != 0
    }

    pub fn intersection(self, other: LightSet) -> LightSet {
        LightSet(self.0 & other.0)
    }

    pub fn union(self, other: LightSet) -> LightSet {
        LightSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: LightSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Movement> {
        Movement::all().filter(move |m| self.contains(m.index()))
    }
}

/// One entry of a phase table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Phase {
    pub id: usize,
    pub green: LightSet,
}

/// The conventional 8-phase table: NS straight, EW straight, NS left,
/// EW left, then straight+left for each of N, S, E, W. Right turns are
/// green in every phase.
pub fn standard_phases() -> Vec<Phase> {
    use Side::*;
    use Turn::*;
    let m = Movement::new;
    let sets: [[Movement; 2]; PHASES] = [
        [m(N, Straight), m(S, Straight)],
        [m(E, Straight), m(W, Straight)],
        [m(N, Left), m(S, Left)],
        [m(E, Left), m(W, Left)],
        [m(N, Straight), m(N, Left)],
        [m(S, Straight), m(S, Left)],
        [m(E, Straight), m(E, Left)],
        [m(W, Straight), m(W, Left)],
    ];
    sets.iter()
        .enumerate()
        .map(|(id, pair)| Phase {
            id,
            green: LightSet::from_movements(pair.iter().copied()).union(LightSet::right_turns()),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Boundary,
    Intersection(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Road {
    pub id: usize,
    pub from: Endpoint,
    pub to: Endpoint,
    /// Meters.
    pub length: f64,
    /// Meters per second.
    pub free_speed: f64,
    pub lanes: usize,
}

impl Road {
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.free_speed
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Intersection {
    pub id: usize,
    /// Incoming road per approach side.
    pub incoming: [usize; SIDES],
    /// Outgoing road per exit side.
    pub outgoing: [usize; SIDES],
    pub phases: Vec<Phase>,
}

impl Intersection {
    pub fn movements(&self) -> impl Iterator<Item = Movement> {
        Movement::all()
    }

    pub fn phase_green(&self, phase: usize) -> LightSet {
        self.phases[phase].green
    }
}

/// Validated static topology.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadNetwork {
    pub intersections: Vec<Intersection>,
    pub roads: Vec<Road>,
    pub grid_shape: Option<(usize, usize)>,
    /// For each road ending at an intersection, the approach side it arrives on.
    arrival_side: Vec<Option<Side>>,
    /// For each road leaving an intersection, the side it leaves from.
    departure_side: Vec<Option<Side>>,
}

impl RoadNetwork {
    pub fn num_agents(&self) -> usize {
        self.intersections.len()
    }

    pub fn arrival_side(&self, road: usize) -> Option<Side> {
        self.arrival_side[road]
    }

    pub fn departure_side(&self, road: usize) -> Option<Side> {
        self.departure_side[road]
    }

    /// Turn a vehicle on `road` takes onto `next`, or `None` if the roads do
    /// not meet at an intersection or the move would be a U-turn.
    pub fn turn_between(&self, road: usize, next: usize) -> Option<Turn> {
        let (Endpoint::Intersection(a), Endpoint::Intersection(b)) =
            (self.roads.get(road)?.to, self.roads.get(next)?.from)
        else {
            return None;
        };
        if a != b {
            return None;
        }
        Turn::between(self.arrival_side[road]?, self.departure_side[next]?)
    }

    pub fn from_document(doc: NetworkDocument) -> Result<Self, SimError> {
        if doc.format_version != NETWORK_FORMAT_VERSION {
            return Err(SimError::Format(format!(
                "unsupported network format_version {} (expected {NETWORK_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let phases = parse_phase_table(&doc.phases)?;

        let mut roads = Vec::with_capacity(doc.roads.len());
        for (i, r) in doc.roads.iter().enumerate() {
            if r.id != i {
                return Err(SimError::Topology(format!(
                    "road at position {i} has id {} (ids must be dense and ordered)",
                    r.id
                )));
            }
            if !(r.length > 0.0 && r.length.is_finite()) {
                return Err(SimError::Topology(format!("road {i} has non-positive length")));
            }
            if !(r.free_speed > 0.0 && r.free_speed.is_finite()) {
                return Err(SimError::Topology(format!("road {i} has non-positive free_speed")));
            }
            if r.lanes != LANES_PER_ROAD {
                return Err(SimError::Topology(format!(
                    "road {i} has {} lanes (exactly {LANES_PER_ROAD} required)",
                    r.lanes
                )));
            }
            for end in [r.from, r.to] {
                if let Endpoint::Intersection(x) = end {
                    if x >= doc.intersections.len() {
                        return Err(SimError::Topology(format!(
                            "road {i} references unknown intersection {x}"
                        )));
                    }
                }
            }
            if r.from == Endpoint::Boundary && r.to == Endpoint::Boundary {
                return Err(SimError::Topology(format!("road {i} connects boundary to boundary")));
            }
            roads.push(Road {
                id: r.id,
                from: r.from,
                to: r.to,
                length: r.length,
                free_speed: r.free_speed,
                lanes: r.lanes,
            });
        }

        let mut arrival_side = vec![None; roads.len()];
        let mut departure_side = vec![None; roads.len()];
        let mut intersections = Vec::with_capacity(doc.intersections.len());
        for (i, x) in doc.intersections.iter().enumerate() {
            if x.id != i {
                return Err(SimError::Topology(format!(
                    "intersection at position {i} has id {} (ids must be dense and ordered)",
                    x.id
                )));
            }
            let incoming = x.incoming.to_array();
            let outgoing = x.outgoing.to_array();
            for side in Side::ALL {
                let r = incoming[side.index()];
                let road = roads.get(r).ok_or_else(|| {
                    SimError::Topology(format!("intersection {i} incoming {side:?} references unknown road {r}"))
                })?;
                if road.to != Endpoint::Intersection(i) {
                    return Err(SimError::Topology(format!(
                        "road {r} is listed as incoming at intersection {i} but ends at {:?}",
                        road.to
                    )));
                }
                if arrival_side[r].replace(side).is_some() {
                    return Err(SimError::Topology(format!("road {r} is incoming on more than one side")));
                }
                let r = outgoing[side.index()];
                let road = roads.get(r).ok_or_else(|| {
                    SimError::Topology(format!("intersection {i} outgoing {side:?} references unknown road {r}"))
                })?;
                if road.from != Endpoint::Intersection(i) {
                    return Err(SimError::Topology(format!(
                        "road {r} is listed as outgoing at intersection {i} but starts at {:?}",
                        road.from
                    )));
                }
                if departure_side[r].replace(side).is_some() {
                    return Err(SimError::Topology(format!("road {r} is outgoing on more than one side")));
                }
            }
            intersections.push(Intersection {
                id: i,
                incoming,
                outgoing,
                phases: phases.clone(),
            });
        }

        // Every road touching an intersection must be registered on one of its sides.
        for road in &roads {
            if matches!(road.to, Endpoint::Intersection(_)) && arrival_side[road.id].is_none() {
                return Err(SimError::Topology(format!(
                    "dangling road {}: ends at {:?} but is not listed as incoming there",
                    road.id, road.to
                )));
            }
            if matches!(road.from, Endpoint::Intersection(_)) && departure_side[road.id].is_none() {
                return Err(SimError::Topology(format!(
                    "dangling road {}: starts at {:?} but is not listed as outgoing there",
                    road.id, road.from
                )));
            }
        }

        let grid_shape = doc.grid_shape.map(|[r, c]| (r, c));
        if let Some((r, c)) = grid_shape {
            if r * c != intersections.len() {
                return Err(SimError::Topology(format!(
                    "grid_shape {r}x{c} does not match {} intersections",
                    intersections.len()
                )));
            }
        }

        Ok(RoadNetwork {
            intersections,
            roads,
            grid_shape,
            arrival_side,
            departure_side,
        })
    }

    pub fn to_document(&self) -> NetworkDocument {
        let phases = self
            .intersections
            .first()
            .map(|x| x.phases.clone())
            .unwrap_or_else(standard_phases);
        NetworkDocument {
            format_version: NETWORK_FORMAT_VERSION,
            grid_shape: self.grid_shape.map(|(r, c)| [r, c]),
            intersections: self
                .intersections
                .iter()
                .map(|x| IntersectionDoc {
                    id: x.id,
                    incoming: SideMap::from_array(x.incoming),
                    outgoing: SideMap::from_array(x.outgoing),
                })
                .collect(),
            roads: self
                .roads
                .iter()
                .map(|r| RoadDoc {
                    id: r.id,
                    from: r.from,
                    to: r.to,
                    length: r.length,
                    free_speed: r.free_speed,
                    lanes: r.lanes,
                })
                .collect(),
            phases: phases
                .iter()
                .map(|p| p.green.iter().map(|m| m.to_string()).collect())
                .collect(),
        }
    }
}

fn parse_phase_table(raw: &[Vec<String>]) -> Result<Vec<Phase>, SimError> {
    if raw.len() != PHASES {
        return Err(SimError::Topology(format!(
            "phase table has {} phases (exactly {PHASES} required)",
            raw.len()
        )));
    }
    let mut phases = Vec::with_capacity(PHASES);
    for (id, names) in raw.iter().enumerate() {
        let mut movements = Vec::with_capacity(names.len());
        for name in names {
            let m: Movement = name
                .parse()
                .map_err(|e| SimError::Topology(format!("phase {id}: {e}")))?;
            movements.push(m);
        }
        for (k, a) in movements.iter().enumerate() {
            for b in &movements[k + 1..] {
                if a.conflicts_with(*b) {
                    return Err(SimError::Topology(format!(
                        "phase {id} contains conflicting movements {a} and {b}"
                    )));
                }
            }
        }
        let green = LightSet::from_movements(movements);
        if !LightSet::right_turns().is_subset(green) {
            let missing: Vec<String> = LightSet::right_turns()
                .iter()
                .filter(|m| !green.contains(m.index()))
                .map(|m| m.to_string())
                .collect();
            return Err(SimError::Topology(format!(
                "phase {id} is missing right-turn movements {}",
                missing.join(", ")
            )));
        }
        phases.push(Phase { id, green });
    }
    Ok(phases)
}

pub fn load_network(document: &str) -> Result<RoadNetwork, SimError> {
    let doc: NetworkDocument =
        serde_json::from_str(document).map_err(|e| SimError::Parse(format!("network document: {e}")))?;
    RoadNetwork::from_document(doc)
}

/// On-disk network format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDocument {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_shape: Option<[usize; 2]>,
    pub intersections: Vec<IntersectionDoc>,
    pub roads: Vec<RoadDoc>,
    /// Phase table shared by every intersection: 8 lists of movement names.
    pub phases: Vec<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionDoc {
    pub id: usize,
    pub incoming: SideMap,
    pub outgoing: SideMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct SideMap {
    pub n: usize,
    pub e: usize,
    pub s: usize,
    pub w: usize,
}

impl SideMap {
    pub fn to_array(self) -> [usize; SIDES] {
        [self.n, self.e, self.s, self.w]
    }

    pub fn from_array(a: [usize; SIDES]) -> Self {
        SideMap {
            n: a[0],
            e: a[1],
            s: a[2],
            w: a[3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadDoc {
    pub id: usize,
    pub from: Endpoint,
    pub to: Endpoint,
    pub length: f64,
    pub free_speed: f64,
    #[serde(default = "default_lanes")]
    pub lanes: usize,
}

fn default_lanes() -> usize {
    LANES_PER_ROAD
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn movement_names_round_trip() {
        for m in Movement::all() {
            assert_eq!(m.to_string().parse::<Movement>().unwrap(), m);
            assert_eq!(Movement::from_index(m.index()), m);
        }
        assert!("X_L".parse::<Movement>().is_err());
        assert!("N".parse::<Movement>().is_err());
    }

    #[test]
    fn turn_geometry() {
        assert_eq!(Turn::between(Side::N, Side::S), Some(Turn::Straight));
        assert_eq!(Turn::between(Side::N, Side::E), Some(Turn::Left));
        assert_eq!(Turn::between(Side::N, Side::W), Some(Turn::Right));
        assert_eq!(Turn::between(Side::E, Side::E), None);
        for s in Side::ALL {
            for t in Turn::ALL {
                assert_eq!(Turn::between(s, t.exit_side(s)), Some(t));
            }
        }
    }

    #[test]
    fn conflict_table_is_symmetric() {
        for a in Movement::all() {
            for b in Movement::all() {
                assert_eq!(a.conflicts_with(b), b.conflicts_with(a), "{a} vs {b}");
            }
        }
        let ns: Movement = "N_S".parse().unwrap();
        let es: Movement = "E_S".parse().unwrap();
        let sl: Movement = "S_L".parse().unwrap();
        let ss: Movement = "S_S".parse().unwrap();
        assert!(ns.conflicts_with(es));
        assert!(ns.conflicts_with(sl));
        assert!(!ns.conflicts_with(ss));
    }

    #[test]
    fn standard_phases_are_legal() {
        let phases = standard_phases();
        assert_eq!(phases.len(), PHASES);
        for p in &phases {
            assert!(LightSet::right_turns().is_subset(p.green));
            assert_eq!(p.green.len(), 6);
            let ms: Vec<Movement> = p.green.iter().collect();
            for a in &ms {
                for b in &ms {
                    assert!(!a.conflicts_with(*b));
                }
            }
        }
        // every non-right movement is served by some phase
        let all = phases.iter().fold(LightSet::EMPTY, |s, p| s.union(p.green));
        assert_eq!(all.len(), MOVEMENTS);
    }
}
