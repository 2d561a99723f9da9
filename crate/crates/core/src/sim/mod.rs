//! Event-driven multi-UAV search over a persistent threat field.
//!
//! Each UAV flies Dubins legs between cell centres at constant speed. On
//! arrival it senses its five neighbour cells, applies the mission decision
//! rule, claims the chosen cell in the shared [`SearchMap`] and departs. UAVs
//! that decide at the same instant are served in ascending id order.

mod export;
mod replay;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::{plan, DubinsError, DubinsPath, Pose};
use crate::mission::{
    decide_next_cell, destination, neighbour_cell, Cell, CellChoice, EnvValuation, GridConfig, Heading, MissionError,
    UavState,
};

pub use export::{export_csv, export_json, CSV_HEADER};
pub use replay::{replay, ReplayOptions, ReplayResult, ThreatMarker};

/// Arrival times closer than this are treated as simultaneous.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Dubins(#[from] DubinsError),
    #[error("scenario json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("trace step {step}: {message}")]
    Trace { step: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavStart {
    /// Cell centre, metres.
    pub x: f64,
    pub y: f64,
    /// 90 or 270.
    pub heading: i64,
}

fn default_duration() -> f64 {
    600.0
}
fn default_speed() -> f64 {
    20.0
}
fn default_radius() -> f64 {
    25.0
}
fn default_dt() -> f64 {
    1.0
}

/// Simulation input; all lengths in metres, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub grid: GridConfig,
    /// Threat cell centres.
    #[serde(default)]
    pub threats: Vec<[f64; 2]>,
    #[serde(default)]
    pub targets: Vec<[f64; 2]>,
    pub uavs: Vec<UavStart>,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default = "default_radius")]
    pub turn_radius: f64,
    #[serde(default)]
    pub seed: u64,
    /// Extra threat cells drawn from the seed, away from the start cells.
    #[serde(default)]
    pub random_threats: usize,
    #[serde(default = "default_dt")]
    pub sample_dt: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Scenario with the mission defaults and the given UAV starts.
    pub fn new(grid: GridConfig, uavs: Vec<UavStart>) -> Self {
        Scenario {
            grid,
            threats: Vec::new(),
            targets: Vec::new(),
            uavs,
            duration: default_duration(),
            speed: default_speed(),
            turn_radius: default_radius(),
            seed: 0,
            random_threats: 0,
            sample_dt: default_dt(),
        }
    }
}

/// Per-cell shared knowledge.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellInfo {
    pub visited: bool,
    pub threat_known: bool,
    pub target_found: bool,
    /// UAV flying towards this cell.
    pub claim: Option<usize>,
}

/// Search map shared by all UAVs; communication is instantaneous.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchMap {
    pub cells_per_side: usize,
    /// Row-major from the south-west corner.
    pub cells: Vec<CellInfo>,
}

impl SearchMap {
    pub fn new(grid: &GridConfig) -> Self {
        SearchMap { cells_per_side: grid.cells_per_side, cells: vec![CellInfo::default(); grid.cells_per_side.pow(2)] }
    }

    fn index(&self, c: Cell) -> usize {
        c.iy as usize * self.cells_per_side + c.ix as usize
    }

    pub fn get(&self, c: Cell) -> &CellInfo {
        &self.cells[self.index(c)]
    }

    pub fn get_mut(&mut self, c: Cell) -> &mut CellInfo {
        let i = self.index(c);
        &mut self.cells[i]
    }

    pub fn visited_count(&self) -> usize {
        self.cells.iter().filter(|c| c.visited).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// One decision of a UAV: where it was, what it sensed, what it chose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub t: f64,
    pub cell: Cell,
    pub heading: Heading,
    pub env: EnvValuation,
    pub choice: CellChoice,
    /// Destination cell and arrival time, unless the choice was no_free_cell.
    pub destination: Option<Cell>,
    pub arrival: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavTrack {
    pub uav: usize,
    pub samples: Vec<TrackSample>,
    pub decisions: Vec<Decision>,
    pub deadlocked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub tracks: Vec<UavTrack>,
    pub map: SearchMap,
    /// All threat cells, including the randomly drawn ones.
    pub threats: Vec<Cell>,
}

/// A flight leg starting at `t0`.
#[derive(Debug, Clone, Copy)]
struct Leg {
    t0: f64,
    path: DubinsPath,
    duration: f64,
}

struct Uav {
    cell: Cell,
    heading: Heading,
    flight: Option<(Leg, Cell, Heading)>,
    halted: bool,
    legs: Vec<Leg>,
}

fn pose_of(grid: &GridConfig, cell: Cell, heading: Heading) -> Pose {
    let (x, y) = grid.centre_f64(cell);
    Pose::new(x, y, heading.radians())
}

/// Start poses, threat cells and target cells of a checked scenario.
type Placement = (Vec<(Cell, Heading)>, BTreeSet<Cell>, BTreeSet<Cell>);

fn validate(s: &Scenario) -> Result<Placement, SimError> {
    s.grid.validate()?;
    let bad = |m: String| Err(SimError::Invalid(m));
    if !(s.speed > 0.0 && s.speed.is_finite()) {
        return bad(format!("speed must be positive, got {}", s.speed));
    }
    if !(s.turn_radius > 0.0 && s.turn_radius.is_finite()) {
        return bad(format!("turn radius must be positive, got {}", s.turn_radius));
    }
    if !(s.duration >= 0.0 && s.duration.is_finite()) {
        return bad(format!("duration must be non-negative, got {}", s.duration));
    }
    if !(s.sample_dt > 0.0 && s.sample_dt.is_finite()) {
        return bad(format!("sample_dt must be positive, got {}", s.sample_dt));
    }
    if s.uavs.is_empty() {
        return bad("no UAVs".into());
    }
    let mut starts = Vec::new();
    for u in &s.uavs {
        let cell = s.grid.cell_at_centre(u.x, u.y)?;
        if starts.iter().any(|&(c, _)| c == cell) {
            return bad(format!("two UAVs start in cell {cell}"));
        }
        starts.push((cell, Heading::from_degrees(u.heading)?));
    }
    let mut threats = BTreeSet::new();
    for &[x, y] in &s.threats {
        let c = s.grid.cell_at_centre(x, y)?;
        if starts.iter().any(|&(sc, _)| sc == c) {
            return bad(format!("threat on start cell {c}"));
        }
        threats.insert(c);
    }
    let mut targets = BTreeSet::new();
    for &[x, y] in &s.targets {
        targets.insert(s.grid.cell_at_centre(x, y)?);
    }
    let mut free: Vec<Cell> =
        s.grid.cells().filter(|c| !threats.contains(c) && !starts.iter().any(|&(sc, _)| sc == *c)).collect();
    if s.random_threats > free.len() {
        return bad(format!("cannot place {} random threats in {} free cells", s.random_threats, free.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    free.shuffle(&mut rng);
    threats.extend(free.into_iter().take(s.random_threats));
    Ok((starts, threats, targets))
}

/// Runs a scenario to its duration.
pub fn run(s: &Scenario) -> Result<SimResult, SimError> {
    let (starts, threats, targets) = validate(s)?;
    let grid = s.grid;
    let mut map = SearchMap::new(&grid);
    let mut uavs: Vec<Uav> = starts
        .iter()
        .map(|&(cell, heading)| Uav { cell, heading, flight: None, halted: false, legs: Vec::new() })
        .collect();
    let mut decisions: Vec<Vec<Decision>> = vec![Vec::new(); uavs.len()];
    for u in &uavs {
        let info = map.get_mut(u.cell);
        info.visited = true;
        info.target_found |= targets.contains(&u.cell);
    }

    let mut now = 0.0;
    loop {
        // arrivals at `now`
        for (u, log) in uavs.iter_mut().zip(decisions.iter_mut()) {
            if let Some((leg, cell, heading)) = u.flight {
                if leg.t0 + leg.duration <= now + TIME_EPS {
                    // arrivals within the tolerance share one event time
                    if let Some(d) = log.last_mut() {
                        d.arrival = Some(now);
                    }
                    u.flight = None;
                    u.cell = cell;
                    u.heading = heading;
                    let info = map.get_mut(cell);
                    info.claim = None;
                    info.visited = true;
                    info.target_found |= targets.contains(&cell);
                }
            }
        }
        // decisions in id order
        for id in 0..uavs.len() {
            if uavs[id].halted || uavs[id].flight.is_some() {
                continue;
            }
            let (cell, heading) = (uavs[id].cell, uavs[id].heading);
            let mut env = EnvValuation::default();
            for k in 1..=5 {
                let Some(n) = neighbour_cell(&grid, cell, heading, k) else { continue };
                if threats.contains(&n) {
                    env = env.with_threat(k, true);
                    map.get_mut(n).threat_known = true;
                }
                let taken = map.get(n).claim.is_some_and(|c| c != id)
                    || uavs.iter().enumerate().any(|(j, o)| j != id && o.flight.is_none() && o.cell == n);
                if taken {
                    env = env.with_other_uav(k, true);
                }
            }
            let state = UavState { cell, heading, env };
            let choice = decide_next_cell(&state, &grid);
            let mut log = Decision { t: now, cell, heading, env, choice, destination: None, arrival: None };
            if choice == CellChoice::NoFreeCell {
                uavs[id].halted = true;
            } else {
                let (next, next_heading) = destination(&state, choice, &grid)?;
                let path = plan(pose_of(&grid, cell, heading), pose_of(&grid, next, next_heading), s.turn_radius)?;
                let leg = Leg { t0: now, path, duration: path.length() / s.speed };
                debug_assert!(map.get(next).claim.is_none());
                map.get_mut(next).claim = Some(id);
                uavs[id].flight = Some((leg, next, next_heading));
                uavs[id].legs.push(leg);
                log.destination = Some(next);
                log.arrival = Some(now + leg.duration);
            }
            decisions[id].push(log);
        }
        let next =
            uavs.iter().filter_map(|u| u.flight.map(|(l, _, _)| l.t0 + l.duration)).fold(f64::INFINITY, f64::min);
        if next > s.duration {
            break;
        }
        now = next;
    }

    let steps = (s.duration / s.sample_dt + 1e-9).floor() as u64;
    let tracks = uavs
        .iter()
        .zip(decisions)
        .enumerate()
        .map(|(id, (u, decisions))| {
            let first = pose_of(&grid, starts[id].0, starts[id].1);
            let last = match u.flight {
                Some(_) => None,
                None => Some(pose_of(&grid, u.cell, u.heading)),
            };
            let samples = (0..=steps).map(|k| sample_at(k as f64 * s.sample_dt, &u.legs, first, last)).collect();
            UavTrack { uav: id, samples, decisions, deadlocked: u.halted }
        })
        .collect();
    Ok(SimResult { tracks, map, threats: threats.into_iter().collect() })
}

/// Pose at time `t` along back-to-back legs; before the first leg the UAV is
/// at `first`, after the last one at `last` (or the last leg's end).
fn sample_at(t: f64, legs: &[Leg], first: Pose, last: Option<Pose>) -> TrackSample {
    let idx = legs.partition_point(|l| l.t0 <= t);
    let pose = if idx == 0 {
        first
    } else {
        let leg = &legs[idx - 1];
        if t <= leg.t0 + leg.duration {
            leg.path.pose_at((t - leg.t0) * leg.path.length() / leg.duration.max(f64::MIN_POSITIVE))
        } else {
            last.unwrap_or_else(|| leg.path.end_pose())
        }
    };
    TrackSample { t, x: pose.x, y: pose.y, theta: pose.theta }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_uav(n: usize) -> Scenario {
        Scenario::new(GridConfig::with_cells(n), vec![UavStart { x: 50.0, y: 50.0, heading: 90 }])
    }

    #[test]
    fn sweep_covers_small_grid() {
        let r = run(&one_uav(4)).unwrap();
        let cells: BTreeSet<_> = r.tracks[0].decisions.iter().take(16).map(|d| d.cell).collect();
        assert_eq!(cells.len(), 16);
    }

    #[test]
    fn deadlock_is_flagged() {
        let mut s = one_uav(4);
        // start at (150, 150) heading north, every neighbour a threat
        s.uavs[0] = UavStart { x: 150.0, y: 150.0, heading: 90 };
        s.threats = vec![[150.0, 250.0], [50.0, 250.0], [250.0, 250.0], [50.0, 150.0], [250.0, 150.0]];
        let r = run(&s).unwrap();
        assert!(r.tracks[0].deadlocked);
        assert_eq!(r.tracks[0].decisions.len(), 1);
        assert!(r.tracks[0].samples.iter().all(|p| (p.x, p.y) == (150.0, 150.0)));
    }

    #[test]
    fn rejects_bad_scenarios() {
        let mut s = one_uav(4);
        s.uavs.push(UavStart { x: 50.0, y: 50.0, heading: 270 });
        assert!(run(&s).is_err());
        let mut s = one_uav(4);
        s.threats.push([50.0, 50.0]);
        assert!(run(&s).is_err());
        let mut s = one_uav(4);
        s.uavs[0].heading = 0;
        assert!(run(&s).is_err());
        assert!(Scenario::from_json(r#"{"uavs": [], "colour": 1}"#).is_err());
    }

    #[test]
    fn samples_are_spaced_by_speed() {
        let mut s = one_uav(6);
        s.duration = 120.0;
        let r = run(&s).unwrap();
        let t = &r.tracks[0];
        assert_eq!(t.samples.len(), 121);
        for w in t.samples.windows(2) {
            assert!((w[1].x - w[0].x).hypot(w[1].y - w[0].y) <= 20.0 + 1e-6);
        }
    }
}
