//! Single-UAV cooperative search behaviour: the cell-selection rule, the
//! Kripke model it compiles to, the builtin property catalogue and an
//! SMV-dialect emitter.
//!
//! Neighbour cells are numbered in the UAV body frame: cell1 ahead, cell2
//! ahead-left, cell3 ahead-right, cell4 left, cell5 right. The UAV takes the
//! first free in-grid cell in the order cell1, cell3, cell5, cell2, cell4,
//! except that on the south-most row heading south cell4 outranks cell5.
//! Moving into cell4 or cell5 reverses the heading.

mod model;
pub mod smv;
mod specs;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{build_mission_kripke, MissionModel, ENV_VALUATIONS, PROPOSITIONS};
pub use specs::{builtin_specs, parse_catalogue, CatalogueEntry, CatalogueError};

#[derive(Debug, Error, PartialEq)]
pub enum MissionError {
    #[error("grid needs at least 2 cells per side, got {0}")]
    GridTooSmall(usize),
    #[error("cell size must be positive, got {0}")]
    BadCellSize(i64),
    #[error("cell {0} is outside the grid")]
    OutOfGrid(Cell),
    #[error("({x}, {y}) is not a cell centre")]
    NotACentre { x: f64, y: f64 },
    #[error("heading must be 90 or 270, got {0}")]
    BadHeading(i64),
    #[error("no destination for choice no_free_cell")]
    NoDestination,
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

/// Square search area discretized into `cells_per_side²` square cells.
/// Lengths are whole metres.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub cells_per_side: usize,
    pub cell_size: i64,
    /// Centre of the south-west cell.
    pub origin: [i64; 2],
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { cells_per_side: 20, cell_size: 100, origin: [50, 50] }
    }
}

impl GridConfig {
    pub fn with_cells(cells_per_side: usize) -> Self {
        GridConfig { cells_per_side, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        if self.cells_per_side < 2 {
            return Err(MissionError::GridTooSmall(self.cells_per_side));
        }
        if self.cell_size <= 0 {
            return Err(MissionError::BadCellSize(self.cell_size));
        }
        Ok(())
    }

    pub fn area_side(&self) -> i64 {
        self.cells_per_side as i64 * self.cell_size
    }

    pub fn contains(&self, cell: Cell) -> bool {
        let n = self.cells_per_side as i64;
        (0..n).contains(&cell.ix) && (0..n).contains(&cell.iy)
    }

    /// Cell centre in metres.
    pub fn centre(&self, cell: Cell) -> [i64; 2] {
        [self.origin[0] + cell.ix * self.cell_size, self.origin[1] + cell.iy * self.cell_size]
    }

    pub fn centre_f64(&self, cell: Cell) -> (f64, f64) {
        let [x, y] = self.centre(cell);
        (x as f64, y as f64)
    }

    /// Cell whose centre is exactly `(x, y)`.
    pub fn cell_at_centre(&self, x: f64, y: f64) -> Result<Cell, MissionError> {
        let fx = (x - self.origin[0] as f64) / self.cell_size as f64;
        let fy = (y - self.origin[1] as f64) / self.cell_size as f64;
        let cell = Cell::new(fx.round() as i64, fy.round() as i64);
        if (fx - fx.round()).abs() > 1e-9 || (fy - fy.round()).abs() > 1e-9 {
            return Err(MissionError::NotACentre { x, y });
        }
        if !self.contains(cell) {
            return Err(MissionError::OutOfGrid(cell));
        }
        Ok(cell)
    }

    /// Cell containing the point `(x, y)`, if any. Points on a shared edge
    /// belong to the cell on the north/east side.
    pub fn cell_containing(&self, x: f64, y: f64) -> Option<Cell> {
        let half = self.cell_size as f64 / 2.0;
        let fx = ((x - self.origin[0] as f64 + half) / self.cell_size as f64).floor();
        let fy = ((y - self.origin[1] as f64 + half) / self.cell_size as f64).floor();
        let cell = Cell::new(fx as i64, fy as i64);
        self.contains(cell).then_some(cell)
    }

    pub fn is_north_row(&self, cell: Cell) -> bool {
        cell.iy == self.cells_per_side as i64 - 1
    }

    pub fn is_south_row(&self, cell: Cell) -> bool {
        cell.iy == 0
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> {
        let n = self.cells_per_side as i64;
        (0..n).flat_map(move |iy| (0..n).map(move |ix| Cell::new(ix, iy)))
    }
}

/// Grid cell by column/row index; (0, 0) is the south-west corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub ix: i64,
    pub iy: i64,
}

impl Cell {
    pub fn new(ix: i64, iy: i64) -> Self {
        Cell { ix, iy }
    }

    pub fn offset(self, (dx, dy): (i64, i64)) -> Cell {
        Cell::new(self.ix + dx, self.iy + dy)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.ix, self.iy)
    }
}

/// Discretized heading, measured from east.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heading {
    /// Flying north.
    #[serde(rename = "90")]
    Deg90,
    /// Flying south.
    #[serde(rename = "270")]
    Deg270,
}

impl Heading {
    pub fn degrees(self) -> i64 {
        match self {
            Heading::Deg90 => 90,
            Heading::Deg270 => 270,
        }
    }

    pub fn from_degrees(deg: i64) -> Result<Self, MissionError> {
        match deg {
            90 => Ok(Heading::Deg90),
            270 => Ok(Heading::Deg270),
            other => Err(MissionError::BadHeading(other)),
        }
    }

    pub fn radians(self) -> f64 {
        match self {
            Heading::Deg90 => std::f64::consts::FRAC_PI_2,
            Heading::Deg270 => 3.0 * std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Heading::Deg90 => Heading::Deg270,
            Heading::Deg270 => Heading::Deg90,
        }
    }

    fn index(self) -> usize {
        match self {
            Heading::Deg90 => 0,
            Heading::Deg270 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellChoice {
    Cell1,
    Cell2,
    Cell3,
    Cell4,
    Cell5,
    NoFreeCell,
}

impl CellChoice {
    pub const NEIGHBOURS: [CellChoice; 5] =
        [CellChoice::Cell1, CellChoice::Cell2, CellChoice::Cell3, CellChoice::Cell4, CellChoice::Cell5];

    /// Decreasing order of preference.
    pub const PREFERENCE: [CellChoice; 5] =
        [CellChoice::Cell1, CellChoice::Cell3, CellChoice::Cell5, CellChoice::Cell2, CellChoice::Cell4];

    /// 1..=5 for neighbour cells, `None` for `NoFreeCell`.
    pub fn number(self) -> Option<usize> {
        match self {
            CellChoice::Cell1 => Some(1),
            CellChoice::Cell2 => Some(2),
            CellChoice::Cell3 => Some(3),
            CellChoice::Cell4 => Some(4),
            CellChoice::Cell5 => Some(5),
            CellChoice::NoFreeCell => None,
        }
    }

    pub fn from_number(k: usize) -> Option<Self> {
        Self::NEIGHBOURS.get(k.checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            CellChoice::Cell1 => "cell1",
            CellChoice::Cell2 => "cell2",
            CellChoice::Cell3 => "cell3",
            CellChoice::Cell4 => "cell4",
            CellChoice::Cell5 => "cell5",
            CellChoice::NoFreeCell => "no_free_cell",
        }
    }

    /// Whether taking this cell keeps the current heading.
    pub fn keeps_heading(self) -> bool {
        matches!(self, CellChoice::Cell1 | CellChoice::Cell2 | CellChoice::Cell3)
    }
}

impl fmt::Display for CellChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Threat and other-UAV bits for the five neighbour cells.
///
/// Bit `k-1` is `threat_in_cellk`, bit `4+k` is `other_uav_selected_cellk`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct EnvValuation(u16);

impl EnvValuation {
    pub const COUNT: usize = 1 << 10;

    pub fn from_bits(bits: u16) -> Self {
        assert!((bits as usize) < Self::COUNT, "env valuation has 10 bits");
        EnvValuation(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn threat(self, k: usize) -> bool {
        assert!((1..=5).contains(&k));
        self.0 >> (k - 1) & 1 == 1
    }

    pub fn other_uav(self, k: usize) -> bool {
        assert!((1..=5).contains(&k));
        self.0 >> (4 + k) & 1 == 1
    }

    pub fn blocked(self, k: usize) -> bool {
        self.threat(k) || self.other_uav(k)
    }

    pub fn with_threat(self, k: usize, on: bool) -> Self {
        self.with_bit(k - 1, on)
    }

    pub fn with_other_uav(self, k: usize, on: bool) -> Self {
        self.with_bit(4 + k, on)
    }

    fn with_bit(self, bit: usize, on: bool) -> Self {
        if on {
            EnvValuation(self.0 | 1 << bit)
        } else {
            EnvValuation(self.0 & !(1 << bit))
        }
    }

    pub fn all() -> impl Iterator<Item = EnvValuation> {
        (0..Self::COUNT as u16).map(EnvValuation)
    }
}

/// Position, heading and sensed environment of a UAV at decision time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UavState {
    pub cell: Cell,
    pub heading: Heading,
    pub env: EnvValuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MissionState {
    Uav(UavState),
    /// Absorbing state entered after a `no_free_cell` decision.
    DeadlockSink {
        env: EnvValuation,
    },
}

/// Neighbour displacement in cell units for each of the five cells.
pub fn neighbour_offsets(heading: Heading) -> [(CellChoice, (i64, i64)); 5] {
    let north = [(0, 1), (-1, 1), (1, 1), (-1, 0), (1, 0)];
    let mut out = [(CellChoice::Cell1, (0, 0)); 5];
    for (k, (dx, dy)) in north.into_iter().enumerate() {
        let off = match heading {
            Heading::Deg90 => (dx, dy),
            Heading::Deg270 => (-dx, -dy),
        };
        out[k] = (CellChoice::NEIGHBOURS[k], off);
    }
    out
}

pub fn neighbour_offset(heading: Heading, choice: CellChoice) -> Option<(i64, i64)> {
    let k = choice.number()?;
    Some(neighbour_offsets(heading)[k - 1].1)
}

/// Neighbour `k` (1..=5) of `cell` if it lies inside the grid.
pub fn neighbour_cell(grid: &GridConfig, cell: Cell, heading: Heading, k: usize) -> Option<Cell> {
    let target = cell.offset(neighbour_offsets(heading)[k - 1].1);
    grid.contains(target).then_some(target)
}

/// Preference order at `cell`. On the south-most row heading south the
/// UAV turns into cell4 ahead of cell5, so both boundary turns go the same
/// way and the sweep advances one column per leg.
pub fn preference_order(grid: &GridConfig, cell: Cell, heading: Heading) -> [CellChoice; 5] {
    if heading == Heading::Deg270 && grid.is_south_row(cell) {
        [CellChoice::Cell1, CellChoice::Cell3, CellChoice::Cell4, CellChoice::Cell2, CellChoice::Cell5]
    } else {
        CellChoice::PREFERENCE
    }
}

/// First free in-grid neighbour in preference order, or `NoFreeCell`.
pub fn decide_next_cell(state: &UavState, grid: &GridConfig) -> CellChoice {
    preference_order(grid, state.cell, state.heading)
        .into_iter()
        .find(|&choice| {
            let k = choice.number().unwrap();
            neighbour_cell(grid, state.cell, state.heading, k).is_some() && !state.env.blocked(k)
        })
        .unwrap_or(CellChoice::NoFreeCell)
}

/// Cell and heading reached by taking `choice`.
pub fn destination(state: &UavState, choice: CellChoice, grid: &GridConfig) -> Result<(Cell, Heading), MissionError> {
    let offset = neighbour_offset(state.heading, choice).ok_or(MissionError::NoDestination)?;
    let cell = state.cell.offset(offset);
    if !grid.contains(cell) {
        return Err(MissionError::OutOfGrid(cell));
    }
    let heading = if choice.keeps_heading() { state.heading } else { state.heading.reversed() };
    Ok((cell, heading))
}

/// Grid plus initial UAV placement for the Kripke model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissionConfig {
    pub grid: GridConfig,
    pub initial_cell: Cell,
    pub initial_heading: Heading,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig { grid: GridConfig::default(), initial_cell: Cell::new(0, 0), initial_heading: Heading::Deg90 }
    }
}

impl MissionConfig {
    pub fn with_cells(cells_per_side: usize) -> Self {
        MissionConfig { grid: GridConfig::with_cells(cells_per_side), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        self.grid.validate()?;
        if !self.grid.contains(self.initial_cell) {
            return Err(MissionError::OutOfGrid(self.initial_cell));
        }
        Ok(())
    }

    /// Reads `key = value` lines: `grid`, `cell_size`, `origin_x`,
    /// `origin_y`, `init_x`, `init_y` (centre metres), `init_heading`.
    pub fn from_config_text(text: &str) -> Result<Self, MissionError> {
        let mut cfg = MissionConfig::default();
        let mut init_xy: (Option<f64>, Option<f64>) = (None, None);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| MissionError::Config { line: i + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value: {line}")))?;
            let (key, value) = (key.trim(), value.trim());
            let int = || value.parse::<i64>().map_err(|_| err(format!("`{key}` needs an integer, got `{value}`")));
            let num = || value.parse::<f64>().map_err(|_| err(format!("`{key}` needs a number, got `{value}`")));
            match key {
                "grid" => {
                    let n = int()?;
                    cfg.grid.cells_per_side = usize::try_from(n).map_err(|_| err(format!("bad grid size {n}")))?;
                }
                "cell_size" => cfg.grid.cell_size = int()?,
                "origin_x" => cfg.grid.origin[0] = int()?,
                "origin_y" => cfg.grid.origin[1] = int()?,
                "init_x" => init_xy.0 = Some(num()?),
                "init_y" => init_xy.1 = Some(num()?),
                "init_heading" => cfg.initial_heading = Heading::from_degrees(int()?)?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        cfg.grid.validate()?;
        if init_xy.0.is_some() || init_xy.1.is_some() {
            let (ox, oy) = (cfg.grid.origin[0] as f64, cfg.grid.origin[1] as f64);
            cfg.initial_cell = cfg.grid.cell_at_centre(init_xy.0.unwrap_or(ox), init_xy.1.unwrap_or(oy))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(ix: i64, iy: i64, heading: Heading, env: EnvValuation) -> UavState {
        UavState { cell: Cell::new(ix, iy), heading, env }
    }

    #[test]
    fn default_grid_geometry() {
        let g = GridConfig::default();
        assert_eq!(g.area_side(), 2000);
        assert_eq!(g.centre(Cell::new(0, 0)), [50, 50]);
        assert_eq!(g.centre(Cell::new(19, 19)), [1950, 1950]);
        assert!(g.is_north_row(Cell::new(3, 19)));
        assert_eq!(g.cell_at_centre(150.0, 250.0).unwrap(), Cell::new(1, 2));
        assert!(g.cell_at_centre(10.0, 10.0).is_err());
        assert_eq!(g.cell_containing(99.0, 0.5), Some(Cell::new(0, 0)));
        assert_eq!(g.cell_containing(100.0, 0.5), Some(Cell::new(1, 0)));
        assert_eq!(g.cell_containing(-1.0, 0.5), None);
    }

    #[test]
    fn offsets() {
        assert_eq!(neighbour_offset(Heading::Deg90, CellChoice::Cell1), Some((0, 1)));
        assert_eq!(neighbour_offset(Heading::Deg270, CellChoice::Cell1), Some((0, -1)));
        assert_eq!(neighbour_offset(Heading::Deg90, CellChoice::Cell5), Some((1, 0)));
        assert_eq!(neighbour_offset(Heading::Deg270, CellChoice::Cell4), Some((1, 0)));
        assert_eq!(neighbour_offset(Heading::Deg90, CellChoice::NoFreeCell), None);
    }

    #[test]
    fn decision_examples() {
        let g = GridConfig::default();
        let clear = EnvValuation::default();
        assert_eq!(decide_next_cell(&state(3, 5, Heading::Deg90, clear), &g), CellChoice::Cell1);
        let t1 = clear.with_threat(1, true);
        assert_eq!(decide_next_cell(&state(3, 5, Heading::Deg90, t1), &g), CellChoice::Cell3);
        assert_eq!(decide_next_cell(&state(3, 19, Heading::Deg90, clear), &g), CellChoice::Cell5);
        assert_eq!(decide_next_cell(&state(3, 0, Heading::Deg270, clear), &g), CellChoice::Cell4);
        let o4 = clear.with_other_uav(4, true);
        assert_eq!(decide_next_cell(&state(3, 0, Heading::Deg270, o4), &g), CellChoice::Cell5);
        assert_eq!(decide_next_cell(&state(19, 0, Heading::Deg270, clear), &g), CellChoice::Cell5);
        let all = (1..=5).fold(clear, |e, k| e.with_threat(k, true));
        assert_eq!(decide_next_cell(&state(3, 5, Heading::Deg90, all), &g), CellChoice::NoFreeCell);
        assert_eq!(decide_next_cell(&state(19, 19, Heading::Deg90, clear), &g), CellChoice::Cell4);
        let o3 = t1.with_other_uav(3, true);
        assert_eq!(decide_next_cell(&state(3, 5, Heading::Deg90, o3), &g), CellChoice::Cell5);
    }

    #[test]
    fn destination_examples() {
        let g = GridConfig::default();
        let clear = EnvValuation::default();
        let s = state(1, 2, Heading::Deg90, clear);
        assert_eq!(destination(&s, CellChoice::Cell1, &g).unwrap(), (Cell::new(1, 3), Heading::Deg90));
        let s = state(1, 19, Heading::Deg90, clear);
        let (c, h) = destination(&s, CellChoice::Cell5, &g).unwrap();
        assert_eq!((g.centre(c), h), ([250, 1950], Heading::Deg270));
        let s = state(1, 0, Heading::Deg270, clear);
        let (c, h) = destination(&s, CellChoice::Cell4, &g).unwrap();
        assert_eq!((g.centre(c), h), ([250, 50], Heading::Deg90));
        let s = state(1, 19, Heading::Deg90, clear);
        assert_eq!(destination(&s, CellChoice::Cell1, &g), Err(MissionError::OutOfGrid(Cell::new(1, 20))));
        assert_eq!(destination(&s, CellChoice::NoFreeCell, &g), Err(MissionError::NoDestination));
    }

    #[test]
    fn env_bits() {
        let e = EnvValuation::from_bits(0b10_0000_0001);
        assert!(e.threat(1) && !e.threat(2));
        assert!(e.other_uav(5) && !e.other_uav(1));
        assert!(e.blocked(1) && e.blocked(5) && !e.blocked(3));
        assert_eq!(EnvValuation::all().count(), 1024);
    }

    #[test]
    fn config_text() {
        let cfg =
            MissionConfig::from_config_text("grid = 8\n# comment\ninit_x = 350\ninit_y = 250\ninit_heading = 270\n")
                .unwrap();
        assert_eq!(cfg.grid.cells_per_side, 8);
        assert_eq!(cfg.initial_cell, Cell::new(3, 2));
        assert_eq!(cfg.initial_heading, Heading::Deg270);
        assert!(MissionConfig::from_config_text("grid = 1").is_err());
        assert!(MissionConfig::from_config_text("colour = red").is_err());
        assert!(MissionConfig::from_config_text("grid = 4\ninit_x = 950").is_err());
    }
}
