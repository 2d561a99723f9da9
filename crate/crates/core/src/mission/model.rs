use super::{
    decide_next_cell, destination, Cell, CellChoice, EnvValuation, Heading, MissionConfig, MissionError, MissionState,
    UavState,
};
use crate::kripke::{ImplicitKripke, Kripke, LabelRow, PropRegistry, StateId};

pub const ENV_VALUATIONS: usize = EnvValuation::COUNT;

/// Proposition vocabulary of the mission model, in registry order.
pub const PROPOSITIONS: [&str; 21] = [
    "heading_90",
    "heading_270",
    "north_cell",
    "south_cell",
    "threat_in_cell1",
    "threat_in_cell2",
    "threat_in_cell3",
    "threat_in_cell4",
    "threat_in_cell5",
    "other_uav_selected_cell1",
    "other_uav_selected_cell2",
    "other_uav_selected_cell3",
    "other_uav_selected_cell4",
    "other_uav_selected_cell5",
    "choice_cell1",
    "choice_cell2",
    "choice_cell3",
    "choice_cell4",
    "choice_cell5",
    "choice_no_free_cell",
    "at_sink",
];

const HEADING_90: usize = 0;
const HEADING_270: usize = 1;
const NORTH: usize = 2;
const SOUTH: usize = 3;
const THREAT: usize = 4;
const OTHER: usize = 9;
const CHOICE: usize = 14;
const NO_FREE: usize = 19;
const AT_SINK: usize = 20;

/// The compiled mission model with its state encoding.
///
/// Cores are `(cell, heading)` pairs numbered `(iy * N + ix) * 2 + h`
/// followed by one deadlock sink core; the free input is the
/// [`EnvValuation`]. The sink is labelled as a UAV parked in the north-west
/// cell facing north, with `choice_no_free_cell` and `at_sink` set.
#[derive(Debug, Clone)]
pub struct MissionModel {
    config: MissionConfig,
    kripke: ImplicitKripke,
}

impl MissionModel {
    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn kripke(&self) -> &ImplicitKripke {
        &self.kripke
    }

    pub fn sink_core(&self) -> usize {
        sink_core(&self.config)
    }

    pub fn core_of(&self, cell: Cell, heading: Heading) -> usize {
        core_of(&self.config, cell, heading)
    }

    pub fn encode(&self, state: &MissionState) -> StateId {
        match state {
            MissionState::Uav(u) => self.kripke.encode(self.core_of(u.cell, u.heading), u.env.bits() as usize),
            MissionState::DeadlockSink { env } => self.kripke.encode(self.sink_core(), env.bits() as usize),
        }
    }

    /// Decodes a state code; `None` if it lies outside the model.
    pub fn decode(&self, s: StateId) -> Option<MissionState> {
        if s.index() >= self.kripke.state_count() {
            return None;
        }
        let (core, input) = self.kripke.decode(s);
        let env = EnvValuation::from_bits(input as u16);
        Some(match decode_core(&self.config, core) {
            Some((cell, heading)) => MissionState::Uav(UavState { cell, heading, env }),
            None => MissionState::DeadlockSink { env },
        })
    }
}

impl std::ops::Deref for MissionModel {
    type Target = ImplicitKripke;

    fn deref(&self) -> &ImplicitKripke {
        &self.kripke
    }
}

fn sink_core(cfg: &MissionConfig) -> usize {
    let n = cfg.grid.cells_per_side;
    n * n * 2
}

fn core_of(cfg: &MissionConfig, cell: Cell, heading: Heading) -> usize {
    let n = cfg.grid.cells_per_side;
    debug_assert!(cfg.grid.contains(cell));
    (cell.iy as usize * n + cell.ix as usize) * 2 + heading.index()
}

fn decode_core(cfg: &MissionConfig, core: usize) -> Option<(Cell, Heading)> {
    if core >= sink_core(cfg) {
        return None;
    }
    let n = cfg.grid.cells_per_side;
    let pos = core / 2;
    let heading = if core.is_multiple_of(2) { Heading::Deg90 } else { Heading::Deg270 };
    Some((Cell::new((pos % n) as i64, (pos / n) as i64), heading))
}

/// Compiles the decision rule into a factored Kripke model with
/// `2·N²·1024 + 1024` states.
pub fn build_mission_kripke(config: &MissionConfig) -> Result<MissionModel, MissionError> {
    config.validate()?;
    let cfg = *config;
    let mut props = PropRegistry::new();
    let ids: Vec<_> = PROPOSITIONS.iter().map(|p| props.intern(p)).collect();
    let sink = sink_core(&cfg);
    let init_core = core_of(&cfg, cfg.initial_cell, cfg.initial_heading);

    let step = move |core: usize, input: usize| -> usize {
        let Some((cell, heading)) = decode_core(&cfg, core) else {
            return sink;
        };
        let state = UavState { cell, heading, env: EnvValuation::from_bits(input as u16) };
        match decide_next_cell(&state, &cfg.grid) {
            CellChoice::NoFreeCell => sink,
            choice => {
                let (next, h) = destination(&state, choice, &cfg.grid).expect("decision picks an in-grid cell");
                core_of(&cfg, next, h)
            }
        }
    };

    let label = move |core: usize, input: usize, row: &mut LabelRow| {
        let env = EnvValuation::from_bits(input as u16);
        for k in 1..=5 {
            if env.threat(k) {
                row.set(ids[THREAT + k - 1]);
            }
            if env.other_uav(k) {
                row.set(ids[OTHER + k - 1]);
            }
        }
        match decode_core(&cfg, core) {
            None => {
                row.set(ids[HEADING_90]);
                row.set(ids[NORTH]);
                row.set(ids[NO_FREE]);
                row.set(ids[AT_SINK]);
            }
            Some((cell, heading)) => {
                row.set(ids[if heading == Heading::Deg90 { HEADING_90 } else { HEADING_270 }]);
                if cfg.grid.is_north_row(cell) {
                    row.set(ids[NORTH]);
                }
                if cfg.grid.is_south_row(cell) {
                    row.set(ids[SOUTH]);
                }
                let state = UavState { cell, heading, env };
                match decide_next_cell(&state, &cfg.grid).number() {
                    Some(k) => row.set(ids[CHOICE + k - 1]),
                    None => row.set(ids[NO_FREE]),
                }
            }
        }
    };

    let initial = (0..ENV_VALUATIONS).map(|i| (init_core, i));
    let kripke = ImplicitKripke::new(sink + 1, ENV_VALUATIONS, props, initial, step, label);
    Ok(MissionModel { config: cfg, kripke })
}
