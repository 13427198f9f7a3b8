use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::SmgRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// Grid actions. Movement uses the 4-neighbourhood; `y` grows downwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
    Stay,
    Interact,
    Refine,
}

impl GridAction {
    pub const ALL: [GridAction; 7] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
        GridAction::Stay,
        GridAction::Interact,
        GridAction::Refine,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub n_agents: usize,
    pub steps_per_episode: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 12,
            height: 8,
            n_agents: 4,
            steps_per_episode: 200,
        }
    }
}

impl GridConfig {
    pub(crate) fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub(crate) fn cell(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub(crate) fn index_of(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    /// Moves `from` one cell in the direction of `action`; walls block.
    pub(crate) fn apply_move(&self, from: Cell, action: GridAction) -> Cell {
        match action {
            GridAction::Up if from.y > 0 => Cell::new(from.x, from.y - 1),
            GridAction::Down if from.y + 1 < self.height => Cell::new(from.x, from.y + 1),
            GridAction::Left if from.x > 0 => Cell::new(from.x - 1, from.y),
            GridAction::Right if from.x + 1 < self.width => Cell::new(from.x + 1, from.y),
            _ => from,
        }
    }

    /// `count` distinct cells drawn uniformly without replacement.
    pub(crate) fn distinct_cells(&self, count: usize, rng: &mut SmgRng) -> Result<Vec<Cell>> {
        if count > self.n_cells() || self.width == 0 || self.height == 0 {
            return Err(Error::GridTooSmall {
                width: self.width,
                height: self.height,
                needed: count,
            });
        }
        Ok(sample(rng, self.n_cells(), count)
            .into_iter()
            .map(|i| self.cell(i))
            .collect())
    }

    pub(crate) fn norm_x(&self, c: Cell) -> f64 {
        if self.width > 1 {
            c.x as f64 / (self.width - 1) as f64
        } else {
            0.0
        }
    }

    /// Offset of `to` from `from` along x, mapped from `[-1, 1]` to `[0, 1]`.
    pub(crate) fn rel_x(&self, from: Cell, to: Cell) -> f64 {
        if self.width > 1 {
            0.5 + (to.x as f64 - from.x as f64) / (2 * (self.width - 1)) as f64
        } else {
            0.5
        }
    }

    pub(crate) fn rel_y(&self, from: Cell, to: Cell) -> f64 {
        if self.height > 1 {
            0.5 + (to.y as f64 - from.y as f64) / (2 * (self.height - 1)) as f64
        } else {
            0.5
        }
    }

    pub(crate) fn norm_y(&self, c: Cell) -> f64 {
        if self.height > 1 {
            c.y as f64 / (self.height - 1) as f64
        } else {
            0.0
        }
    }
}

/// Text canvas, one character per cell.
pub(crate) struct Canvas {
    width: usize,
    cells: Vec<char>,
}

impl Canvas {
    pub(crate) fn new(config: &GridConfig) -> Self {
        Self {
            width: config.width,
            cells: vec!['.'; config.n_cells()],
        }
    }

    pub(crate) fn put(&mut self, c: Cell, ch: char) {
        self.cells[c.y * self.width + c.x] = ch;
    }

    pub(crate) fn put_agents(&mut self, positions: impl Iterator<Item = Cell>) {
        let mut count = vec![0usize; self.cells.len()];
        for (i, p) in positions.enumerate() {
            let k = p.y * self.width + p.x;
            count[k] += 1;
            self.cells[k] = if count[k] > 1 {
                '*'
            } else {
                std::char::from_digit(i as u32 % 16, 16)
                    .unwrap()
                    .to_ascii_uppercase()
            };
        }
    }

    pub(crate) fn finish(self) -> String {
        self.cells
            .chunks(self.width)
            .map(|row| row.iter().collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::env_rng;

    #[test]
    fn walls_block() {
        let g = GridConfig::default();
        assert_eq!(g.apply_move(Cell::new(0, 0), GridAction::Up), Cell::new(0, 0));
        assert_eq!(g.apply_move(Cell::new(0, 0), GridAction::Left), Cell::new(0, 0));
        assert_eq!(g.apply_move(Cell::new(11, 7), GridAction::Right), Cell::new(11, 7));
        assert_eq!(g.apply_move(Cell::new(11, 7), GridAction::Down), Cell::new(11, 7));
        assert_eq!(g.apply_move(Cell::new(3, 3), GridAction::Up), Cell::new(3, 2));
        assert_eq!(g.apply_move(Cell::new(3, 3), GridAction::Interact), Cell::new(3, 3));
    }

    #[test]
    fn relative_offsets_in_unit_interval() {
        let g = GridConfig::default();
        let (a, b) = (Cell::new(0, 0), Cell::new(11, 7));
        assert_eq!(g.rel_x(a, b), 1.0);
        assert_eq!(g.rel_y(b, a), 0.0);
        assert_eq!(g.rel_x(b, b), 0.5);
    }

    #[test]
    fn distinct_placement() {
        let g = GridConfig {
            width: 3,
            height: 2,
            ..GridConfig::default()
        };
        let mut rng = env_rng(0);
        let cells = g.distinct_cells(6, &mut rng).unwrap();
        let set: std::collections::HashSet<_> = cells.iter().collect();
        assert_eq!(set.len(), 6);
        assert!(g.distinct_cells(7, &mut rng).is_err());
    }
}
