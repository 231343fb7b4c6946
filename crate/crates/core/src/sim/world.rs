use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Axis, Direction, LaneRef, ObstacleSpec, WorldConfig};
use super::frame::{Frame, IntersectionBox, LightColor, LightState, ObstacleState, VehicleState};
use super::network::{LaneCrossing, Network};
use super::SimError;
use crate::geometry::Aabb;

pub const EGO_ID: u32 = 0;
/// Fraction of a lane change spent ramping lateral speed up (and down).
const LC_RAMP: f64 = 0.25;
/// Leaders further than this are ignored by the car-following rule.
const LOOKAHEAD: f64 = 150.0;
const STOP_MARGIN: f64 = 1.0;
/// Remaining distances below this are treated as zero so queues settle.
const CREEP: f64 = 0.05;

#[derive(Debug, Clone)]
struct LaneChange {
    from: usize,
    to: usize,
    elapsed: f64,
}

#[derive(Debug, Clone)]
struct Vehicle {
    id: u32,
    lane: LaneRef,
    s: f64,
    /// Continuous lane coordinate; equals `lane.lane` outside manoeuvres.
    lat: f64,
    lat_speed: f64,
    speed: f64,
    cruise: f64,
    hold_lane: bool,
    violator: bool,
    maneuver: Option<LaneChange>,
    committed: Option<u32>,
    blocked: bool,
}

impl Vehicle {
    /// Lanes the vehicle currently occupies for car-following purposes. Past
    /// the midpoint of a lane change only the target lane counts.
    fn occupied_lanes(&self, duration: f64) -> (usize, usize) {
        match &self.maneuver {
            Some(m) if self.lc_fraction(duration) < 0.5 => (m.from.min(m.to), m.from.max(m.to)),
            Some(m) => (m.to, m.to),
            None => (self.lane.lane, self.lane.lane),
        }
    }

    fn lc_fraction(&self, duration: f64) -> f64 {
        self.maneuver.as_ref().map_or(0.0, |m| (m.elapsed / duration).min(1.0))
    }
}

#[derive(Debug, Clone, Copy)]
enum OccupantKind {
    Vehicle(usize),
    Obstacle,
}

#[derive(Debug, Clone, Copy)]
struct Occupant {
    kind: OccupantKind,
    s: f64,
    lanes: (usize, usize),
    length: f64,
    speed: f64,
    /// Stationary blockage: an obstacle or a vehicle queued behind one.
    blockage: bool,
}

/// Per-intersection signal controller.
#[derive(Debug, Clone)]
struct Signal {
    offset: f64,
    green: f64,
    yellow: f64,
    cycle: f64,
}

impl Signal {
    fn color(&self, east_west: bool, t: f64) -> LightColor {
        let mut tau = (t + self.offset).rem_euclid(self.cycle);
        if !east_west {
            tau = (tau - self.green - self.yellow).rem_euclid(self.cycle);
        }
        if tau < self.green {
            LightColor::Green
        } else if tau < self.green + self.yellow {
            LightColor::Yellow
        } else {
            LightColor::Red
        }
    }
}

/// Deterministic traffic world. All randomness comes from the seeded generator
/// created in [`World::build`].
#[derive(Debug, Clone)]
pub struct World {
    config: WorldConfig,
    network: Network,
    rng: ChaCha8Rng,
    vehicles: Vec<Vehicle>,
    signals: Vec<Signal>,
    crossings: std::collections::BTreeMap<(Axis, usize, Direction), Vec<LaneCrossing>>,
    tick: u64,
}

/// Total number of vehicle slots on the lanes NPCs may be placed on:
/// `sum(floor(lane_length / (vehicle_length + min_gap)))`.
pub fn lane_capacity(config: &WorldConfig) -> usize {
    let slot = config.vehicle.slot_length();
    spawn_lanes(config)
        .iter()
        .map(|l| (config.lane_length(l.axis) / slot).floor() as usize)
        .sum()
}

fn spawn_lanes(config: &WorldConfig) -> Vec<LaneRef> {
    if let Some(lanes) = &config.spawn_lanes {
        return lanes.clone();
    }
    let mut roads = Vec::new();
    match &config.spawn_roads {
        Some(rs) => roads.extend(rs.iter().map(|r| (r.axis, r.index))),
        None => {
            roads.extend((0..config.map.blocks_y).map(|j| (Axis::Horizontal, j)));
            roads.extend((0..config.map.blocks_x).map(|i| (Axis::Vertical, i)));
        }
    }
    let mut lanes = Vec::new();
    for (axis, road) in roads {
        for direction in [Direction::Positive, Direction::Negative] {
            for lane in 0..config.map.lanes_per_direction {
                lanes.push(LaneRef { axis, road, direction, lane });
            }
        }
    }
    lanes
}

/// Signed ring distance from `from` to `to`, in `(-len/2, len/2]`.
fn ring_delta(from: f64, to: f64, len: f64) -> f64 {
    let d = (to - from).rem_euclid(len);
    if d > len / 2.0 {
        d - len
    } else {
        d
    }
}

/// Normalised lateral displacement of a trapezoidal lateral-speed profile.
fn lc_profile(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let vp = 1.0 / (1.0 - LC_RAMP);
    if u < LC_RAMP {
        vp * u * u / (2.0 * LC_RAMP)
    } else if u <= 1.0 - LC_RAMP {
        vp * (LC_RAMP / 2.0 + (u - LC_RAMP))
    } else {
        1.0 - vp * (1.0 - u) * (1.0 - u) / (2.0 * LC_RAMP)
    }
}

fn lc_profile_rate(u: f64) -> f64 {
    let vp = 1.0 / (1.0 - LC_RAMP);
    if !(0.0..=1.0).contains(&u) {
        0.0
    } else if u < LC_RAMP {
        vp * u / LC_RAMP
    } else if u <= 1.0 - LC_RAMP {
        vp
    } else {
        vp * (1.0 - u) / LC_RAMP
    }
}

impl World {
    pub fn build(config: WorldConfig) -> Result<World, SimError> {
        config.validate()?;
        let network = Network::new(&config.map);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let signals = (0..config.intersection_count())
            .map(|i| {
                let t = config.timings_for(i);
                Signal {
                    offset: rng.random_range(0.0..t.cycle()),
                    green: t.green,
                    yellow: t.yellow,
                    cycle: t.cycle(),
                }
            })
            .collect();

        let mut crossings = std::collections::BTreeMap::new();
        for axis in [Axis::Horizontal, Axis::Vertical] {
            let roads = match axis {
                Axis::Horizontal => config.map.blocks_y,
                Axis::Vertical => config.map.blocks_x,
            };
            for road in 0..roads {
                for direction in [Direction::Positive, Direction::Negative] {
                    let lane = LaneRef { axis, road, direction, lane: 0 };
                    crossings.insert(lane.carriageway(), network.crossings(&lane));
                }
            }
        }

        let p = config.vehicle.clone();
        let slot = p.slot_length();
        let ego = Vehicle {
            id: EGO_ID,
            lane: config.ego.lane,
            s: config.ego.position,
            lat: config.ego.lane.lane as f64,
            lat_speed: 0.0,
            speed: 0.0,
            cruise: config.ego.cruise_speed,
            hold_lane: config.ego.hold_lane,
            violator: false,
            maneuver: None,
            committed: None,
            blocked: false,
        };
        let mut world = World {
            config,
            network,
            rng,
            vehicles: vec![ego],
            signals,
            crossings,
            tick: 0,
        };

        let capacity = lane_capacity(&world.config);
        if world.config.npc_count > capacity {
            return Err(SimError::Capacity { requested: world.config.npc_count, capacity });
        }

        // Platoon directly ahead of the ego.
        let ego_lane = world.config.ego.lane;
        let ego_len = world.config.lane_length(ego_lane.axis);
        let mut s = world.config.ego.position;
        let mut placed = 0;
        let mut guard = 0;
        while placed < world.config.lead_vehicles {
            let gap = p.time_gap * world.config.ego.cruise_speed + p.min_gap + world.rng.random_range(0.0..4.0);
            s = (s + p.length + gap).rem_euclid(ego_len);
            guard += 1;
            if guard > 1000 {
                return Err(SimError::Capacity { requested: world.config.lead_vehicles, capacity: placed });
            }
            if !world.slot_free(&ego_lane, s, slot) {
                continue;
            }
            world.spawn_npc(ego_lane, s);
            placed += 1;
        }

        // Remaining NPCs on random free slots.
        let mut slots = Vec::new();
        for lane in spawn_lanes(&world.config) {
            let n = (world.config.lane_length(lane.axis) / slot).floor() as usize;
            for k in 0..n {
                slots.push((lane, (k as f64 + 0.5) * slot));
            }
        }
        slots.retain(|(lane, s)| world.slot_free(lane, *s, slot));
        slots.shuffle(&mut world.rng);
        let remaining = world.config.npc_count - placed;
        if slots.len() < remaining {
            return Err(SimError::Capacity { requested: world.config.npc_count, capacity: slots.len() + placed });
        }
        let mut chosen: Vec<_> = slots.into_iter().take(remaining).collect();
        chosen.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for (lane, s) in chosen {
            world.spawn_npc(lane, s);
        }

        // Start everyone at a speed the policy would accept.
        let t0 = 0.0;
        let decisions = world.decide(t0);
        for (v, d) in world.vehicles.iter_mut().zip(&decisions) {
            v.speed = d.target_speed.max(0.0);
            v.committed = d.committed;
        }
        Ok(world)
    }

    fn spawn_npc(&mut self, lane: LaneRef, s: f64) {
        let p = &self.config.vehicle;
        let cruise = p.cruise_speed * (1.0 + p.cruise_jitter * self.rng.random_range(-1.0..1.0));
        let violator = self.config.violation_rate > 0.0 && self.rng.random_bool(self.config.violation_rate);
        let id = self.vehicles.len() as u32;
        self.vehicles.push(Vehicle {
            id,
            lane,
            s,
            lat: lane.lane as f64,
            lat_speed: 0.0,
            speed: 0.0,
            cruise,
            hold_lane: false,
            violator,
            maneuver: None,
            committed: None,
            blocked: false,
        });
    }

    /// A placement slot is free when it avoids intersections, obstacles and
    /// already placed vehicles.
    fn slot_free(&self, lane: &LaneRef, s: f64, slot: f64) -> bool {
        let len = self.config.lane_length(lane.axis);
        let half = self.config.vehicle.length / 2.0;
        let margin = self.config.vehicle.min_gap;
        let in_box = self.crossings[&lane.carriageway()]
            .iter()
            .any(|c| ring_delta(c.stop_line - margin, s + half, len) > 0.0 && ring_delta(c.exit + margin, s - half, len) < 0.0);
        if in_box {
            return false;
        }
        let obstacle_clash = self.config.obstacles.iter().any(|o| {
            o.lane.carriageway() == lane.carriageway()
                && o.lane.lane == lane.lane
                && ring_delta(o.position, s, len).abs() < slot + o.kind.footprint().0
        });
        if obstacle_clash {
            return false;
        }
        !self.vehicles.iter().any(|v| {
            v.lane.carriageway() == lane.carriageway()
                && v.lane.lane == lane.lane
                && ring_delta(v.s, s, len).abs() < slot
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 / self.config.tick_rate
    }

    pub fn light_color(&self, intersection: u32, east_west: bool, t: f64) -> LightColor {
        self.signals[intersection as usize].color(east_west, t)
    }

    fn occupants(&self, t: f64) -> std::collections::BTreeMap<(Axis, usize, Direction), Vec<Occupant>> {
        let mut map: std::collections::BTreeMap<_, Vec<Occupant>> = std::collections::BTreeMap::new();
        for (i, v) in self.vehicles.iter().enumerate() {
            map.entry(v.lane.carriageway()).or_default().push(Occupant {
                kind: OccupantKind::Vehicle(i),
                s: v.s,
                lanes: v.occupied_lanes(self.config.vehicle.lane_change_duration),
                length: self.config.vehicle.length,
                speed: v.speed,
                blockage: v.blocked && v.speed < super::STOPPED_SPEED,
            });
        }
        for o in self.config.obstacles.iter().filter(|o| o.active_at(t)) {
            map.entry(o.lane.carriageway()).or_default().push(Occupant {
                kind: OccupantKind::Obstacle,
                s: o.position,
                lanes: (o.lane.lane, o.lane.lane),
                length: o.kind.footprint().0,
                speed: 0.0,
                blockage: true,
            });
        }
        map
    }

    /// Evaluates every vehicle's policy against the current state.
    fn decide(&self, t: f64) -> Vec<Decision> {
        let p = &self.config.vehicle;
        let dt = 1.0 / self.config.tick_rate;
        let comfortable = 0.75 * p.max_accel;
        let occupants = self.occupants(t);
        let mut out = Vec::with_capacity(self.vehicles.len());

        for (idx, v) in self.vehicles.iter().enumerate() {
            let len = self.config.lane_length(v.lane.axis);
            let lane_occ = &occupants[&v.lane.carriageway()];
            let frac = v.lc_fraction(p.lane_change_duration);
            let considered: Vec<usize> = match &v.maneuver {
                Some(m) if frac < 0.5 => vec![m.from, m.to],
                Some(m) => vec![m.to],
                None => vec![v.lane.lane],
            };

            // Nearest occupant ahead in any considered lane.
            let mut leader: Option<(f64, Occupant)> = None;
            for o in lane_occ {
                if let OccupantKind::Vehicle(j) = o.kind {
                    if j == idx {
                        continue;
                    }
                }
                if !considered.iter().any(|&l| l >= o.lanes.0 && l <= o.lanes.1) {
                    continue;
                }
                let ds = (o.s - v.s).rem_euclid(len);
                if ds <= 0.0 || ds > LOOKAHEAD {
                    continue;
                }
                let gap = ds - 0.5 * (p.length + o.length);
                if leader.as_ref().is_none_or(|(g, _)| gap < *g) {
                    leader = Some((gap, *o));
                }
            }

            let mut target = v.cruise;
            let mut blocked = false;
            if let Some((gap, o)) = &leader {
                let free = (gap - p.min_gap).max(0.0);
                let free = if free < CREEP { 0.0 } else { free };
                let follow = (o.speed * o.speed + 2.0 * comfortable * free)
                    .sqrt()
                    .min(free / p.time_gap);
                target = target.min(follow);
                blocked = o.blockage && *gap <= p.trigger_distance + 10.0;
            }

            // Signals.
            let mut committed = v.committed;
            let front = v.s + p.length / 2.0;
            let crossings = &self.crossings[&v.lane.carriageway()];
            let inside = crossings.iter().find(|c| {
                let d = ring_delta(c.stop_line, front, len);
                d > 0.0 && d < (c.exit - c.stop_line) + p.length
            });
            if inside.is_none() {
                let next = crossings
                    .iter()
                    .map(|c| (c, (c.stop_line - front).rem_euclid(len)))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((c, d_line)) = next {
                    if d_line < LOOKAHEAD {
                        let east_west = v.lane.axis == Axis::Horizontal;
                        let color = self.light_color(c.intersection, east_west, t);
                        if color == LightColor::Green {
                            committed = None;
                        } else if !v.violator && committed != Some(c.intersection) {
                            let room = (d_line - STOP_MARGIN).max(0.0);
                            let room = if room < CREEP { 0.0 } else { room };
                            let can_stop = v.speed * v.speed <= 2.0 * 0.8 * p.max_accel * (d_line - 0.5).max(0.0)
                                || v.speed < 0.5;
                            if can_stop {
                                let stop = (2.0 * comfortable * room).sqrt().min(room / dt);
                                target = target.min(stop);
                            } else {
                                committed = Some(c.intersection);
                            }
                        }
                    }
                }
            } else if let Some(c) = inside {
                // Keep the commitment while crossing; it is dropped on exit.
                let _ = c;
            }
            if inside.is_none() && committed.is_some() {
                let still_ahead = crossings.iter().any(|c| {
                    Some(c.intersection) == committed && (c.stop_line - front).rem_euclid(len) < LOOKAHEAD
                });
                if !still_ahead {
                    committed = None;
                }
            }

            // Lane change around a blockage.
            let mut start_change = None;
            if !v.hold_lane && v.maneuver.is_none() && inside.is_none() {
                if let Some((gap, o)) = &leader {
                    if o.blockage && *gap <= p.trigger_distance {
                        start_change = self.pick_target_lane(idx, lane_occ, len);
                    }
                }
            }

            out.push(Decision { target_speed: target, committed, blocked, start_change });
        }
        out
    }

    fn pick_target_lane(&self, idx: usize, lane_occ: &[Occupant], len: f64) -> Option<usize> {
        let v = &self.vehicles[idx];
        let p = &self.config.vehicle;
        let lanes = self.config.map.lanes_per_direction;
        let mut candidates = Vec::new();
        if v.lane.lane > 0 {
            candidates.push(v.lane.lane - 1);
        }
        if v.lane.lane + 1 < lanes {
            candidates.push(v.lane.lane + 1);
        }
        candidates.into_iter().find(|&target| {
            lane_occ.iter().all(|o| {
                if let OccupantKind::Vehicle(j) = o.kind {
                    if j == idx {
                        return true;
                    }
                }
                if target < o.lanes.0 || target > o.lanes.1 {
                    return true;
                }
                let ds = ring_delta(v.s, o.s, len);
                let half = 0.5 * (p.length + o.length);
                if ds >= 0.0 {
                    let needed = if matches!(o.kind, OccupantKind::Obstacle) {
                        p.trigger_distance
                    } else {
                        (1.0 * v.speed).max(6.0)
                    };
                    ds - half >= needed
                } else {
                    -ds - half >= (1.5 * o.speed).max(6.0)
                }
            })
        })
    }

    /// Advances the world by one tick and returns the resulting frame.
    pub fn step(&mut self) -> Frame {
        let t = self.time();
        let dt = 1.0 / self.config.tick_rate;
        let decisions = self.decide(t);
        let p = self.config.vehicle.clone();
        for (v, d) in self.vehicles.iter_mut().zip(decisions) {
            let accel = ((d.target_speed - v.speed) / dt).clamp(-p.max_accel, p.max_accel);
            v.speed = (v.speed + accel * dt).clamp(0.0, p.max_speed);
            let len = self.config.lane_length(v.lane.axis);
            v.s = (v.s + v.speed * dt).rem_euclid(len);
            v.committed = d.committed;
            v.blocked = d.blocked;
            if let Some(to) = d.start_change {
                v.maneuver = Some(LaneChange { from: v.lane.lane, to, elapsed: 0.0 });
            }
            if let Some(m) = &mut v.maneuver {
                m.elapsed += dt;
                let u = m.elapsed / p.lane_change_duration;
                let sign = if m.to > m.from { 1.0 } else { -1.0 };
                if u >= 1.0 - 1e-9 {
                    v.lat = m.to as f64;
                    v.lat_speed = 0.0;
                    v.lane = v.lane.with_lane(m.to);
                    v.maneuver = None;
                } else {
                    v.lat = m.from as f64 + sign * lc_profile(u);
                    v.lat_speed = sign * lc_profile_rate(u) / p.lane_change_duration;
                }
            }
        }
        self.tick += 1;
        self.frame()
    }

    /// Snapshot of the current state.
    pub fn frame(&self) -> Frame {
        let t = self.time();
        let p = &self.config.vehicle;
        let w = self.config.map.lane_width;
        let vehicles = self
            .vehicles
            .iter()
            .map(|v| {
                let (x, y, base) = self.network.pose(&v.lane, v.s, v.lat);
                // Lateral speed positive to the left of travel.
                let lat_left = -v.lat_speed * w;
                let (s, c) = base.sin_cos();
                let vx = v.speed * c - lat_left * s;
                let vy = v.speed * s + lat_left * c;
                let heading = crate::geometry::normalize_angle(base + lat_left.atan2(v.speed.max(1.0)));
                let lane_id = v.lane.with_lane(v.lat.round().max(0.0) as usize).id();
                VehicleState { id: v.id, x, y, heading, vx, vy, lane_id, bbox: Aabb::oriented(x, y, heading, p.length, p.width) }
            })
            .collect();
        let mut lights = Vec::with_capacity(self.signals.len() * 4);
        for g in &self.network.intersections {
            for approach in [
                super::frame::Approach::Eastbound,
                super::frame::Approach::Westbound,
                super::frame::Approach::Northbound,
                super::frame::Approach::Southbound,
            ] {
                lights.push(LightState {
                    intersection: g.id,
                    approach,
                    state: self.light_color(g.id, approach.is_east_west(), t),
                });
            }
        }
        let intersections = self
            .network
            .intersections
            .iter()
            .map(|g| IntersectionBox { id: g.id, bbox: g.bbox })
            .collect();
        let obstacles = self
            .config
            .obstacles
            .iter()
            .enumerate()
            .filter(|(_, o)| o.active_at(t))
            .map(|(i, o)| self.obstacle_state(i as u32, o))
            .collect();
        Frame { index: self.tick, time: t, vehicles, lights, intersections, obstacles, ego_id: EGO_ID }
    }

    fn obstacle_state(&self, id: u32, o: &ObstacleSpec) -> ObstacleState {
        let (x, y, heading) = self.network.pose(&o.lane, o.position, o.lane.lane as f64);
        let (l, w) = o.kind.footprint();
        ObstacleState { id, kind: o.kind, lane_id: o.lane.id(), x, y, bbox: Aabb::oriented(x, y, heading, l, w) }
    }

    /// Per-vehicle lane-coordinate state, exposed for policy tests.
    pub fn lane_states(&self) -> Vec<LaneState> {
        self.vehicles
            .iter()
            .map(|v| LaneState {
                id: v.id,
                lane: v.lane,
                s: v.s,
                lat: v.lat,
                speed: v.speed,
                changing_lanes: v.maneuver.is_some(),
                violator: v.violator,
            })
            .collect()
    }

    /// Stop-line crossings on a vehicle's carriageway.
    pub fn lane_crossings(&self, lane: &LaneRef) -> &[LaneCrossing] {
        &self.crossings[&lane.carriageway()]
    }
}

#[derive(Debug, Clone)]
struct Decision {
    target_speed: f64,
    committed: Option<u32>,
    blocked: bool,
    start_change: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneState {
    pub id: u32,
    pub lane: LaneRef,
    pub s: f64,
    pub lat: f64,
    pub speed: f64,
    pub changing_lanes: bool,
    pub violator: bool,
}
