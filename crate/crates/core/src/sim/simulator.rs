//! Point-queue traffic dynamics on a signalized network.
//!
//! Each env step advances `green_interval` one-second ticks. Within a tick:
//! scheduled vehicles spawn onto their first road (or wait in an entry backlog
//! when the lane is full), green lanes discharge queued vehicles at the
//! saturation rate, then moving vehicles travel at free speed. A vehicle that
//! reaches a stop line crosses if its movement is green, nobody is queued ahead
//! of it and discharge capacity remains; otherwise it joins the lane queue.
//! Vehicles complete when they reach the end of the last road on their route.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::flow::FlowDocument;
use super::network::{Endpoint, LightSet, Movement, RoadNetwork, Side, Turn, LANES_PER_ROAD, MOVEMENTS, PHASES};
use super::observation::Observation;
use super::SimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Seconds simulated per env step.
    pub green_interval: u32,
    /// All-red seconds applied to switching movements on a phase change.
    pub all_red: u32,
    /// Vehicles per lane per green second.
    pub saturation_flow: f64,
    /// Vehicles at or below this speed (m/s) count as waiting.
    pub waiting_speed_threshold: f64,
    pub moving_weight: f64,
    pub waiting_weight: f64,
    /// Env steps per episode.
    pub episode_length: usize,
    /// Meters of lane storage per vehicle.
    pub vehicle_spacing: f64,
    /// Upper bound (seconds) of the seeded per-vehicle spawn delay.
    pub spawn_jitter: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            green_interval: 10,
            all_red: 5,
            saturation_flow: 1.0,
            waiting_speed_threshold: 0.1,
            moving_weight: 1.0,
            waiting_weight: -1.0,
            episode_length: 360,
            vehicle_spacing: 7.5,
            spawn_jitter: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.green_interval <= self.all_red {
            return Err(SimError::Config(format!(
                "green_interval ({}) must exceed all_red ({})",
                self.green_interval, self.all_red
            )));
        }
        if !(self.saturation_flow > 0.0 && self.saturation_flow.is_finite()) {
            return Err(SimError::Config("saturation_flow must be positive".into()));
        }
        if !(self.vehicle_spacing > 0.0 && self.vehicle_spacing.is_finite()) {
            return Err(SimError::Config("vehicle_spacing must be positive".into()));
        }
        if self.episode_length == 0 {
            return Err(SimError::Config("episode_length must be at least 1".into()));
        }
        if !self.waiting_speed_threshold.is_finite() || self.waiting_speed_threshold < 0.0 {
            return Err(SimError::Config("waiting_speed_threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn episode_seconds(&self) -> u64 {
        self.episode_length as u64 * self.green_interval as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VehicleStatus {
    /// Spawned but waiting for room on its first road.
    Entering,
    Moving,
    Queued,
    Completed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    /// Index of the flow rule whose route the vehicle follows.
    pub rule: usize,
    /// Position within the route.
    pub leg: usize,
    pub lane: usize,
    /// Meters from the start of the current road.
    pub offset: f64,
    pub speed: f64,
    pub spawn_time: f64,
    pub completed_time: Option<f64>,
    pub status: VehicleStatus,
    last_moved: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletedTrip {
    pub spawn_time: f64,
    pub completed_time: f64,
    pub free_flow_time: f64,
}

impl CompletedTrip {
    pub fn delay(&self) -> f64 {
        self.completed_time - self.spawn_time - self.free_flow_time
    }
}

/// Signal controller state of one intersection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignalState {
    pub current_phase: usize,
    pub pending_phase: Option<usize>,
    pub yellow_remaining: u32,
}

impl SignalState {
    fn initial() -> Self {
        SignalState {
            current_phase: 0,
            pending_phase: None,
            yellow_remaining: 0,
        }
    }
}

/// Dynamic simulator state visible to callers.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    /// Seconds since reset.
    pub clock: u64,
    pub signals: Vec<SignalState>,
    pub completed: Vec<CompletedTrip>,
    pub spawned: usize,
    pub active: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Lane {
    moving: VecDeque<usize>,
    queue: VecDeque<usize>,
    credit: f64,
}

impl Lane {
    fn occupancy(&self) -> usize {
        self.moving.len() + self.queue.len()
    }
}

/// Per-intersection bookkeeping of one env step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    /// `(old, new)` for every intersection whose commanded phase changed.
    pub phase_changes: Vec<Option<(usize, usize)>>,
    /// Green movements at the end of the step.
    pub green: Vec<LightSet>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    /// Vehicles moving faster than the waiting threshold.
    pub moving: usize,
    /// Active vehicles at or below the waiting threshold.
    pub waiting: usize,
    pub reward: f64,
    pub info: StepInfo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub throughput: usize,
    /// Mean of actual minus free-flow travel time over completed trips.
    pub average_delay: f64,
    /// False when no trip completed; `average_delay` is then 0.
    pub delay_defined: bool,
}

#[derive(Clone, Debug)]
pub struct Simulator {
    network: Arc<RoadNetwork>,
    flow: Arc<FlowDocument>,
    config: SimConfig,
    state: SimState,
    vehicles: Vec<Vehicle>,
    lanes: Vec<[Lane; LANES_PER_ROAD]>,
    backlog: Vec<VecDeque<usize>>,
    lane_capacity: Vec<usize>,
    rule_free_flow: Vec<f64>,
    schedule: Vec<(u64, usize)>,
    next_spawn: usize,
}

impl Simulator {
    /// Builds a simulator and resets it with `seed`.
    pub fn new(
        network: Arc<RoadNetwork>,
        flow: Arc<FlowDocument>,
        config: SimConfig,
        seed: u64,
    ) -> Result<Self, SimError> {
        config.validate()?;
        flow.validate(&network)?;
        let lane_capacity = network
            .roads
            .iter()
            .map(|r| ((r.length / config.vehicle_spacing).floor() as usize).max(1))
            .collect();
        let rule_free_flow = flow
            .flows
            .iter()
            .map(|rule| rule.route.iter().map(|&r| network.roads[r].free_flow_time()).sum())
            .collect();
        let n_agents = network.num_agents();
        let n_roads = network.roads.len();
        let mut sim = Simulator {
            network,
            flow,
            config,
            state: SimState {
                clock: 0,
                signals: vec![SignalState::initial(); n_agents],
                completed: Vec::new(),
                spawned: 0,
                active: 0,
                steps: 0,
            },
            vehicles: Vec::new(),
            lanes: vec![Default::default(); n_roads],
            backlog: vec![VecDeque::new(); n_roads],
            lane_capacity,
            rule_free_flow,
            schedule: Vec::new(),
            next_spawn: 0,
        };
        sim.reset(seed);
        Ok(sim)
    }

    /// Restarts the episode: clock 0, every signal at phase 0, no vehicles.
    pub fn reset(&mut self, seed: u64) -> Vec<Observation> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let jitter = self.config.spawn_jitter;
        let mut schedule = Vec::with_capacity(self.flow.total_vehicles() as usize);
        for (i, rule) in self.flow.flows.iter().enumerate() {
            for t in rule.spawn_times() {
                let delay = if jitter > 0 { rng.random_range(0..=jitter) } else { 0 };
                schedule.push((t + delay, i));
            }
        }
        // stable: ties keep rule order
        schedule.sort_by_key(|&(t, _)| t);
        self.schedule = schedule;
        self.next_spawn = 0;
        self.vehicles.clear();
        for lanes in &mut self.lanes {
            *lanes = Default::default();
        }
        for b in &mut self.backlog {
            b.clear();
        }
        let n_agents = self.network.num_agents();
        self.state = SimState {
            clock: 0,
            signals: vec![SignalState::initial(); n_agents],
            completed: Vec::new(),
            spawned: 0,
            active: 0,
            steps: 0,
        };
        self.spawn_due();
        self.observations()
    }

    pub fn network(&self) -> &Arc<RoadNetwork> {
        &self.network
    }

    pub fn flow(&self) -> &Arc<FlowDocument> {
        &self.flow
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn num_agents(&self) -> usize {
        self.network.num_agents()
    }

    pub fn is_done(&self) -> bool {
        self.state.steps >= self.config.episode_length
    }

    /// Movements green right now at intersection `i`.
    pub fn active_green(&self, i: usize) -> LightSet {
        let sig = &self.state.signals[i];
        let x = &self.network.intersections[i];
        let current = x.phase_green(sig.current_phase);
        match sig.pending_phase {
            Some(p) if sig.yellow_remaining > 0 => current.intersection(x.phase_green(p)),
            _ => current,
        }
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<StepOutcome, SimError> {
        self.step_observed(actions, |_, _| {})
    }

    /// Like [`Simulator::step`], calling `on_tick` after every one-second
    /// tick with the green sets that applied during it.
    pub fn step_observed<F>(&mut self, actions: &[usize], mut on_tick: F) -> Result<StepOutcome, SimError>
    where
        F: FnMut(&Simulator, &[LightSet]),
    {
        let n = self.num_agents();
        if actions.len() != n {
            return Err(SimError::Action(format!("expected {n} actions, got {}", actions.len())));
        }
        if let Some((i, &a)) = actions.iter().enumerate().find(|(_, &a)| a >= PHASES) {
            return Err(SimError::Action(format!("agent {i}: phase id {a} out of range 0..{PHASES}")));
        }

        let mut phase_changes = vec![None; n];
        for (i, &a) in actions.iter().enumerate() {
            let sig = &mut self.state.signals[i];
            // a pending change can only outlive a step when T_g <= T_y, which config forbids
            let old = sig.pending_phase.take().unwrap_or(sig.current_phase);
            sig.current_phase = old;
            sig.yellow_remaining = 0;
            if a != old {
                phase_changes[i] = Some((old, a));
                if self.config.all_red == 0 {
                    sig.current_phase = a;
                } else {
                    sig.pending_phase = Some(a);
                    sig.yellow_remaining = self.config.all_red;
                }
            }
        }

        let mut green = vec![LightSet::EMPTY; n];
        for _ in 0..self.config.green_interval {
            for (i, g) in green.iter_mut().enumerate() {
                *g = self.active_green(i);
            }
            self.tick(&green);
            on_tick(self, &green);
            for sig in &mut self.state.signals {
                if let Some(p) = sig.pending_phase {
                    sig.yellow_remaining = sig.yellow_remaining.saturating_sub(1);
                    if sig.yellow_remaining == 0 {
                        sig.current_phase = p;
                        sig.pending_phase = None;
                    }
                }
            }
        }
        self.state.steps += 1;

        let (moving, waiting) = self.moving_and_waiting();
        let reward = self.config.moving_weight * moving as f64 + self.config.waiting_weight * waiting as f64;
        let green = (0..n).map(|i| self.active_green(i)).collect();
        Ok(StepOutcome {
            observations: self.observations(),
            moving,
            waiting,
            reward,
            info: StepInfo {
                phase_changes,
                green,
                done: self.is_done(),
            },
        })
    }

    fn moving_and_waiting(&self) -> (usize, usize) {
        let thr = self.config.waiting_speed_threshold;
        let mut moving = 0;
        let mut waiting = 0;
        for v in &self.vehicles {
            match v.status {
                VehicleStatus::Completed => {}
                _ if v.speed > thr => moving += 1,
                _ => waiting += 1,
            }
        }
        (moving, waiting)
    }

    fn road_of(&self, v: &Vehicle) -> usize {
        self.flow.flows[v.rule].route[v.leg]
    }

    /// Lane a vehicle uses on leg `leg` of rule `rule`: the lane of its next turn.
    fn lane_for(&self, rule: usize, leg: usize) -> usize {
        let route = &self.flow.flows[rule].route;
        match route.get(leg + 1) {
            Some(&next) => self
                .network
                .turn_between(route[leg], next)
                .expect("validated route")
                .index(),
            None => Turn::Straight.index(),
        }
    }

    fn has_room(&self, road: usize, lane: usize) -> bool {
        self.lanes[road][lane].occupancy() < self.lane_capacity[road]
    }

    fn spawn_due(&mut self) {
        let now = self.state.clock;
        while let Some(&(t, rule)) = self.schedule.get(self.next_spawn) {
            if t > now {
                break;
            }
            self.next_spawn += 1;
            let id = self.vehicles.len();
            let lane = self.lane_for(rule, 0);
            self.vehicles.push(Vehicle {
                id,
                rule,
                leg: 0,
                lane,
                offset: 0.0,
                speed: 0.0,
                spawn_time: t as f64,
                completed_time: None,
                status: VehicleStatus::Entering,
                last_moved: u64::MAX,
            });
            let road = self.flow.flows[rule].route[0];
            self.backlog[road].push_back(id);
            self.state.spawned += 1;
            self.state.active += 1;
        }
        for road in 0..self.backlog.len() {
            while let Some(&id) = self.backlog[road].front() {
                let lane = self.vehicles[id].lane;
                if !self.has_room(road, lane) {
                    break;
                }
                self.backlog[road].pop_front();
                let v = &mut self.vehicles[id];
                v.status = VehicleStatus::Moving;
                v.speed = self.network.roads[road].free_speed;
                v.offset = 0.0;
                self.lanes[road][lane].moving.push_back(id);
            }
        }
    }

    /// Moves `id` from the end of its current road onto the next road.
    fn transfer(&mut self, id: usize) {
        let (rule, leg) = (self.vehicles[id].rule, self.vehicles[id].leg);
        let next_road = self.flow.flows[rule].route[leg + 1];
        let next_lane = self.lane_for(rule, leg + 1);
        let v = &mut self.vehicles[id];
        v.leg += 1;
        v.lane = next_lane;
        v.offset = 0.0;
        v.speed = self.network.roads[next_road].free_speed;
        v.status = VehicleStatus::Moving;
        self.lanes[next_road][next_lane].moving.push_back(id);
    }

    /// Next road and lane for a vehicle at its stop line.
    fn downstream(&self, id: usize) -> (usize, usize) {
        let v = &self.vehicles[id];
        (self.flow.flows[v.rule].route[v.leg + 1], self.lane_for(v.rule, v.leg + 1))
    }

    fn tick(&mut self, green: &[LightSet]) {
        self.spawn_due();
        let now = self.state.clock;
        let sat = self.config.saturation_flow;
        let cap = sat.max(1.0);

        // Discharge queued vehicles on green movements.
        for x in 0..self.network.intersections.len() {
            for side in Side::ALL {
                let road = self.network.intersections[x].incoming[side.index()];
                for turn in Turn::ALL {
                    let m = Movement::new(side, turn).index();
                    let lane = turn.index();
                    if !green[x].contains(m) {
                        self.lanes[road][lane].credit = 0.0;
                        continue;
                    }
                    let l = &mut self.lanes[road][lane];
                    l.credit = (l.credit + sat).min(cap);
                    while self.lanes[road][lane].credit >= 1.0 {
                        let Some(&id) = self.lanes[road][lane].queue.front() else {
                            break;
                        };
                        let (nr, nl) = self.downstream(id);
                        if !self.has_room(nr, nl) {
                            break;
                        }
                        self.lanes[road][lane].queue.pop_front();
                        self.lanes[road][lane].credit -= 1.0;
                        self.transfer(id);
                    }
                }
            }
        }

        // Free-flow travel for everything moving, in a fixed order.
        let mut work = Vec::new();
        for lanes in &self.lanes {
            for lane in lanes {
                work.extend(lane.moving.iter().copied());
            }
        }
        for id in work {
            if self.vehicles[id].status != VehicleStatus::Moving || self.vehicles[id].last_moved == now {
                continue;
            }
            self.vehicles[id].last_moved = now;
            self.advance(id, 1.0, green);
        }

        self.state.clock += 1;
    }

    fn advance(&mut self, id: usize, mut budget: f64, green: &[LightSet]) {
        loop {
            let road = self.road_of(&self.vehicles[id]);
            let (length, speed) = (self.network.roads[road].length, self.network.roads[road].free_speed);
            let lane = self.vehicles[id].lane;
            let need = (length - self.vehicles[id].offset) / speed;
            if need > budget {
                let v = &mut self.vehicles[id];
                v.offset += speed * budget;
                v.speed = speed;
                return;
            }
            budget -= need;
            self.vehicles[id].offset = length;
            self.remove_moving(road, lane, id);

            let v = &self.vehicles[id];
            let last_leg = v.leg + 1 == self.flow.flows[v.rule].route.len();
            if last_leg {
                let completed = self.state.clock as f64 + (1.0 - budget);
                let trip = CompletedTrip {
                    spawn_time: v.spawn_time,
                    completed_time: completed,
                    free_flow_time: self.rule_free_flow[v.rule],
                };
                let v = &mut self.vehicles[id];
                v.status = VehicleStatus::Completed;
                v.completed_time = Some(completed);
                v.speed = 0.0;
                self.state.completed.push(trip);
                self.state.active -= 1;
                return;
            }

            let Endpoint::Intersection(x) = self.network.roads[road].to else {
                unreachable!("validated routes only continue through intersections");
            };
            let side = self.network.arrival_side(road).expect("validated incoming road");
            let m = Movement::new(side, Turn::ALL[lane]).index();
            let (nr, nl) = self.downstream(id);
            let l = &self.lanes[road][lane];
            let can_cross = green[x].contains(m) && l.queue.is_empty() && l.credit >= 1.0 && self.has_room(nr, nl);
            if can_cross {
                self.lanes[road][lane].credit -= 1.0;
                self.transfer(id);
                continue;
            }
            let v = &mut self.vehicles[id];
            v.status = VehicleStatus::Queued;
            v.speed = 0.0;
            self.lanes[road][lane].queue.push_back(id);
            return;
        }
    }

    fn remove_moving(&mut self, road: usize, lane: usize, id: usize) {
        let moving = &mut self.lanes[road][lane].moving;
        if moving.front() == Some(&id) {
            moving.pop_front();
        } else if let Some(pos) = moving.iter().position(|&v| v == id) {
            moving.remove(pos);
        }
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.network
            .intersections
            .iter()
            .map(|x| {
                let mut obs = Observation::zeros();
                for side in Side::ALL {
                    let road = x.incoming[side.index()];
                    for turn in Turn::ALL {
                        let m = Movement::new(side, turn).index();
                        let lane = &self.lanes[road][turn.index()];
                        let moving = lane.moving.len();
                        let waiting = lane.queue.len();
                        let count = moving + waiting;
                        let free = self.network.roads[road].free_speed;
                        let mean_speed = if count == 0 {
                            0.0
                        } else {
                            let total: f64 = lane
                                .moving
                                .iter()
                                .chain(lane.queue.iter())
                                .map(|&v| self.vehicles[v].speed)
                                .sum();
                            (total / count as f64 / free).clamp(0.0, 1.0)
                        };
                        obs.set_lane(m, moving, waiting, count, mean_speed);
                    }
                }
                obs.set_phase(self.state.signals[x.id].current_phase);
                obs
            })
            .collect()
    }

    pub fn episode_metrics(&self) -> EpisodeMetrics {
        let throughput = self.state.completed.len();
        if throughput == 0 {
            return EpisodeMetrics {
                throughput,
                average_delay: 0.0,
                delay_defined: false,
            };
        }
        let total: f64 = self.state.completed.iter().map(CompletedTrip::delay).sum();
        EpisodeMetrics {
            throughput,
            average_delay: total / throughput as f64,
            delay_defined: true,
        }
    }

    /// Vehicles currently queued per movement at intersection `x`.
    pub fn queue_lengths(&self, x: usize) -> [usize; MOVEMENTS] {
        let mut out = [0; MOVEMENTS];
        for m in Movement::all() {
            let road = self.network.intersections[x].incoming[m.approach.index()];
            out[m.index()] = self.lanes[road][m.turn.index()].queue.len();
        }
        out
    }
}
