use serde::Serialize;

use super::{pose_of, sample_at, Decision, Leg, SimError, TrackSample, UavTrack};
use crate::checker::Trace;
use crate::dubins::plan;
use crate::mission::{decide_next_cell, destination, neighbour_cell, Cell, CellChoice, MissionModel, MissionState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayOptions {
    pub speed: f64,
    pub turn_radius: f64,
    pub sample_dt: f64,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        ReplayOptions { speed: 20.0, turn_radius: 25.0, sample_dt: 1.0 }
    }
}

/// A sensed blocker around the UAV at one trace step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreatMarker {
    pub step: usize,
    /// Neighbour number 1..=5.
    pub neighbour: usize,
    pub x: f64,
    pub y: f64,
    /// `threat` or `other_uav`.
    pub kind: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayResult {
    pub track: UavTrack,
    pub markers: Vec<ThreatMarker>,
    /// Cells of the UAV states of the trace, in order.
    pub cells: Vec<Cell>,
    /// Whether the trace ends in (or enters) the deadlock sink.
    pub reaches_sink: bool,
}

/// Turns a mission trace into a flown trajectory.
pub fn replay(trace: &Trace, model: &MissionModel, opts: &ReplayOptions) -> Result<ReplayResult, SimError> {
    let grid = model.config().grid;
    trace.check_path(model.kripke()).map_err(|m| SimError::Trace { step: 0, message: m })?;
    let states: Vec<MissionState> = trace
        .states
        .iter()
        .enumerate()
        .map(|(step, &s)| {
            model
                .decode(s)
                .ok_or_else(|| SimError::Trace { step, message: format!("state {s} is not a mission state") })
        })
        .collect::<Result<_, _>>()?;
    let MissionState::Uav(first) = states[0] else {
        return Err(SimError::Trace { step: 0, message: "trace starts in the deadlock sink".into() });
    };

    let mut legs: Vec<Leg> = Vec::new();
    let mut decisions = Vec::new();
    let mut markers = Vec::new();
    let mut cells = Vec::new();
    let mut reaches_sink = false;
    let mut now = 0.0;
    let mut last = first;
    for (step, st) in states.iter().enumerate() {
        let u = match st {
            MissionState::Uav(u) => *u,
            MissionState::DeadlockSink { .. } => {
                reaches_sink = true;
                break;
            }
        };
        cells.push(u.cell);
        last = u;
        for k in 1..=5 {
            let Some(n) = neighbour_cell(&grid, u.cell, u.heading, k) else { continue };
            let (x, y) = grid.centre_f64(n);
            if u.env.threat(k) {
                markers.push(ThreatMarker { step, neighbour: k, x, y, kind: "threat" });
            }
            if u.env.other_uav(k) {
                markers.push(ThreatMarker { step, neighbour: k, x, y, kind: "other_uav" });
            }
        }
        let choice = decide_next_cell(&u, &grid);
        let mut log =
            Decision { t: now, cell: u.cell, heading: u.heading, env: u.env, choice, destination: None, arrival: None };
        if let Some(next) = states.get(step + 1) {
            if let (CellChoice::NoFreeCell, MissionState::Uav(_)) = (choice, next) {
                return Err(SimError::Trace { step, message: "UAV moves after a no_free_cell decision".into() });
            }
            if let MissionState::Uav(v) = next {
                let (cell, heading) = destination(&u, choice, &grid)?;
                if (cell, heading) != (v.cell, v.heading) {
                    return Err(SimError::Trace {
                        step,
                        message: format!("expected move to {cell}, trace has {}", v.cell),
                    });
                }
                let path =
                    plan(pose_of(&grid, u.cell, u.heading), pose_of(&grid, v.cell, v.heading), opts.turn_radius)?;
                let leg = Leg { t0: now, path, duration: path.length() / opts.speed };
                now += leg.duration;
                legs.push(leg);
                log.destination = Some(v.cell);
                log.arrival = Some(now);
            }
        }
        decisions.push(log);
    }

    let start = pose_of(&grid, first.cell, first.heading);
    let end = pose_of(&grid, last.cell, last.heading);
    let steps = (now / opts.sample_dt + 1e-9).floor() as u64;
    let mut samples: Vec<TrackSample> =
        (0..=steps).map(|k| sample_at(k as f64 * opts.sample_dt, &legs, start, Some(end))).collect();
    if samples.last().is_some_and(|s| now - s.t > 1e-9) {
        samples.push(TrackSample { t: now, x: end.x, y: end.y, theta: end.theta });
    }
    let deadlocked = reaches_sink || decisions.last().is_some_and(|d: &Decision| d.choice == CellChoice::NoFreeCell);
    let track = UavTrack { uav: 0, samples, decisions, deadlocked };
    Ok(ReplayResult { track, markers, cells, reaches_sink })
}
