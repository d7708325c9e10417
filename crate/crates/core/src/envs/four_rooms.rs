//! 13x13 Four Rooms gridworld.
//!
//! ```text
//!    0 1 2 3 4 5 6 7 8 9 0 1 2
//!  0 . . . . . . # . . . . . G
//!  1 . . . . . . # . . . . . .
//!  2 . . . . . . . . . . . . .     doorway (2, 6)
//!  3 . . . . . . # . . . . . .
//!  4 . . . . . . # . . . . . .
//!  5 . . . . . . # . . . . . .
//!  6 # # . # # # # # # . # # #     doorways (6, 2) and (6, 9)
//!  7 . . . . . . # . . . . . .
//!  8 . . . . . . # . . . . . .
//!  9 . . . . . . . . . . . . .     doorway (9, 6)
//! 10 . . . . . . # . . . . . .
//! 11 . . . . . . # . . . . . .
//! 12 S . . . . . # . . . . . .
//! ```
//!
//! Interior walls occupy row 6 and column 6; each of the four half-walls has
//! one doorway, two cells in from its outer end. Only traversable cells are
//! states. Bumping into a wall or the border leaves the agent in place. Every
//! transition that lands on the goal pays +1, including a bounce that starts
//! there, so the goal is non-terminal and `v* <= 1 / (1 - gamma) = 10`.

use crate::error::Result;
use crate::mdp::TabularMdp;
use crate::scalar::Scalar;

pub const GRID_SIZE: usize = 13;
/// Row and column index of the interior walls.
pub const WALL_INDEX: usize = 6;
pub const DOORWAYS: [Cell; 4] = [
    Cell { row: 6, col: 2 },
    Cell { row: 6, col: 9 },
    Cell { row: 2, col: 6 },
    Cell { row: 9, col: 6 },
];
pub const START: Cell = Cell { row: 12, col: 0 };
pub const GOAL: Cell = Cell { row: 0, col: 12 };
pub const GAMMA: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum Action {
    Up = 0,
    Down = 1,
    Right = 2,
    Left = 3,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Right, Action::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Right => (0, 1),
            Action::Left => (0, -1),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FourRooms<T> {
    mdp: TabularMdp<T>,
    cells: Vec<Cell>,
    index: Vec<Option<usize>>,
}

fn is_wall(c: Cell) -> bool {
    (c.row == WALL_INDEX || c.col == WALL_INDEX) && !DOORWAYS.contains(&c)
}

impl<T: Scalar> FourRooms<T> {
    pub fn new() -> Self {
        Self::with_gamma(T::lit(GAMMA)).expect("default discount is valid")
    }

    pub fn with_gamma(gamma: T) -> Result<Self> {
        let mut cells = Vec::new();
        let mut index = vec![None; GRID_SIZE * GRID_SIZE];
        for row in 0..GRID_SIZE {
            for col in 0..GRID_SIZE {
                let c = Cell { row, col };
                if !is_wall(c) {
                    index[row * GRID_SIZE + col] = Some(cells.len());
                    cells.push(c);
                }
            }
        }
        let n = cells.len();
        let na = Action::ALL.len();
        let mut transition = vec![T::zero(); n * na * n];
        let mut reward = vec![T::zero(); n * na];
        for (s, &c) in cells.iter().enumerate() {
            for a in Action::ALL {
                let (dr, dc) = a.delta();
                let r = c.row as isize + dr;
                let k = c.col as isize + dc;
                let target = if (0..GRID_SIZE as isize).contains(&r) && (0..GRID_SIZE as isize).contains(&k) {
                    index[r as usize * GRID_SIZE + k as usize].unwrap_or(s)
                } else {
                    s
                };
                let sa = s * na + a.index();
                transition[sa * n + target] = T::one();
                if cells[target] == GOAL {
                    reward[sa] = T::one();
                }
            }
        }
        let mdp = TabularMdp::new(n, na, transition, reward, gamma)?;
        Ok(Self { mdp, cells, index })
    }

    pub fn mdp(&self) -> &TabularMdp<T> {
        &self.mdp
    }

    pub fn n_states(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, state: usize) -> Cell {
        self.cells[state]
    }

    pub fn state(&self, cell: Cell) -> Option<usize> {
        if cell.row >= GRID_SIZE || cell.col >= GRID_SIZE {
            return None;
        }
        self.index[cell.row * GRID_SIZE + cell.col]
    }

    pub fn start_state(&self) -> usize {
        self.state(START).expect("start is traversable")
    }

    pub fn goal_state(&self) -> usize {
        self.state(GOAL).expect("goal is traversable")
    }

    /// Interior cells of the upper-left room; doorways are not included.
    pub fn upper_left_room(&self) -> Vec<usize> {
        (0..self.n_states())
            .filter(|&s| {
                let c = self.cells[s];
                c.row < WALL_INDEX && c.col < WALL_INDEX
            })
            .collect()
    }

    pub fn ascii(&self) -> String {
        let mut out = String::new();
        for row in 0..GRID_SIZE {
            let line: Vec<&str> = (0..GRID_SIZE)
                .map(|col| {
                    let c = Cell { row, col };
                    if c == START {
                        "S"
                    } else if c == GOAL {
                        "G"
                    } else if is_wall(c) {
                        "#"
                    } else {
                        "."
                    }
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

impl<T: Scalar> Default for FourRooms<T> {
    fn default() -> Self {
        Self::new()
    }
}
