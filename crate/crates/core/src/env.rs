//! Episodic gridworlds: CliffWalking (4x12) and slippery FrozenLake (4x4).

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::EnvKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// The two directions at right angles, in a fixed order.
    pub fn perpendicular(self) -> [Action; 2] {
        match self {
            Action::Up | Action::Down => [Action::Left, Action::Right],
            Action::Left | Action::Right => [Action::Up, Action::Down],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Start,
    Goal,
    /// A FrozenLake hole or a CliffWalking cliff cell.
    Hazard,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvOutcome {
    pub next_state: usize,
    pub reward: f64,
    pub done: bool,
    /// True when the episode ended on a goal or hole rather than the horizon.
    pub terminal: bool,
}

/// Grid layout, agent position and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct GridEnvState {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
    pub agent_position: usize,
    pub steps_taken: usize,
    pub done: bool,
}

impl GridEnvState {
    fn row_col(&self, pos: usize) -> (usize, usize) {
        (pos / self.cols, pos % self.cols)
    }

    /// Position after moving one cell; walls clamp.
    fn moved(&self, pos: usize, action: Action) -> usize {
        let (r, c) = self.row_col(pos);
        let (r, c) = match action {
            Action::Up => (r.saturating_sub(1), c),
            Action::Down => ((r + 1).min(self.rows - 1), c),
            Action::Left => (r, c.saturating_sub(1)),
            Action::Right => (r, (c + 1).min(self.cols - 1)),
        };
        r * self.cols + c
    }
}

/// An episodic environment over discrete states and four actions.
pub trait Environment {
    fn n_states(&self) -> usize;

    fn n_actions(&self) -> usize {
        4
    }

    fn horizon(&self) -> usize;

    /// Puts the agent on the start cell and reseeds the environment rng.
    fn reset(&mut self, seed: u64) -> usize;

    fn step(&mut self, action: Action) -> Result<EnvOutcome>;

    fn state(&self) -> &GridEnvState;
}

fn start_cell(cells: &[Cell]) -> usize {
    cells.iter().position(|c| *c == Cell::Start).expect("layout has a start")
}

#[derive(Debug, Clone)]
pub struct CliffWalking {
    grid: GridEnvState,
    horizon: usize,
}

impl CliffWalking {
    pub const ROWS: usize = 4;
    pub const COLS: usize = 12;
    pub const HORIZON: usize = 200;
    pub const CLIFF_REWARD: f64 = -100.0;

    pub fn new() -> Self {
        let mut cells = vec![Cell::Floor; Self::ROWS * Self::COLS];
        let bottom = (Self::ROWS - 1) * Self::COLS;
        cells[bottom] = Cell::Start;
        cells[bottom + Self::COLS - 1] = Cell::Goal;
        for c in 1..Self::COLS - 1 {
            cells[bottom + c] = Cell::Hazard;
        }
        let agent_position = start_cell(&cells);
        Self {
            grid: GridEnvState {
                rows: Self::ROWS,
                cols: Self::COLS,
                cells,
                agent_position,
                steps_taken: 0,
                done: false,
            },
            horizon: Self::HORIZON,
        }
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }
}

impl Default for CliffWalking {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for CliffWalking {
    fn n_states(&self) -> usize {
        Self::ROWS * Self::COLS
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, _seed: u64) -> usize {
        self.grid.agent_position = start_cell(&self.grid.cells);
        self.grid.steps_taken = 0;
        self.grid.done = false;
        self.grid.agent_position
    }

    fn step(&mut self, action: Action) -> Result<EnvOutcome> {
        let g = &mut self.grid;
        if g.done {
            return Err(Error::EpisodeDone);
        }
        g.steps_taken += 1;
        let target = g.moved(g.agent_position, action);
        let (pos, reward, terminal) = match g.cells[target] {
            Cell::Hazard => (start_cell(&g.cells), Self::CLIFF_REWARD, false),
            Cell::Goal => (target, 0.0, true),
            Cell::Start | Cell::Floor => (target, 0.0, false),
        };
        g.agent_position = pos;
        g.done = terminal || g.steps_taken >= self.horizon;
        Ok(EnvOutcome {
            next_state: pos,
            reward,
            done: g.done,
            terminal,
        })
    }

    fn state(&self) -> &GridEnvState {
        &self.grid
    }
}

/// 4x4 slippery lake. Holes at (1,1), (1,3), (2,3), (3,0); goal at (3,3).
#[derive(Debug, Clone)]
pub struct FrozenLake {
    grid: GridEnvState,
    horizon: usize,
    rng: ChaCha8Rng,
}

impl FrozenLake {
    pub const SIZE: usize = 4;
    pub const HORIZON: usize = 10;
    pub const HOLES: [(usize, usize); 4] = [(1, 1), (1, 3), (2, 3), (3, 0)];

    pub fn new() -> Self {
        let n = Self::SIZE;
        let mut cells = vec![Cell::Floor; n * n];
        cells[0] = Cell::Start;
        cells[n * n - 1] = Cell::Goal;
        for (r, c) in Self::HOLES {
            cells[r * n + c] = Cell::Hazard;
        }
        Self {
            grid: GridEnvState {
                rows: n,
                cols: n,
                cells,
                agent_position: 0,
                steps_taken: 0,
                done: false,
            },
            horizon: Self::HORIZON,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// Starts a fresh episode from an arbitrary cell, e.g. to probe the
    /// dynamics. The slip rng is not reseeded.
    pub fn place_agent(&mut self, position: usize) {
        assert!(position < self.grid.cells.len());
        self.grid.agent_position = position;
        self.grid.steps_taken = 0;
        self.grid.done = false;
    }

    /// Direction actually taken: intended w.p. 1/3, each perpendicular w.p. 1/3.
    pub fn slip<R: RngCore + ?Sized>(action: Action, rng: &mut R) -> Action {
        match rng.gen_range(0..3u32) {
            0 => action,
            k => action.perpendicular()[k as usize - 1],
        }
    }

    /// Steps with an externally supplied rng in place of the internal one.
    pub fn step_with<R: RngCore + ?Sized>(&mut self, action: Action, rng: &mut R) -> Result<EnvOutcome> {
        let g = &mut self.grid;
        if g.done {
            return Err(Error::EpisodeDone);
        }
        g.steps_taken += 1;
        let actual = Self::slip(action, rng);
        let pos = g.moved(g.agent_position, actual);
        let (reward, terminal) = match g.cells[pos] {
            Cell::Goal => (1.0, true),
            Cell::Hazard => (0.0, true),
            Cell::Start | Cell::Floor => (0.0, false),
        };
        g.agent_position = pos;
        g.done = terminal || g.steps_taken >= self.horizon;
        Ok(EnvOutcome {
            next_state: pos,
            reward,
            done: g.done,
            terminal,
        })
    }
}

impl Default for FrozenLake {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for FrozenLake {
    fn n_states(&self) -> usize {
        Self::SIZE * Self::SIZE
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&mut self, seed: u64) -> usize {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.grid.agent_position = 0;
        self.grid.steps_taken = 0;
        self.grid.done = false;
        0
    }

    fn step(&mut self, action: Action) -> Result<EnvOutcome> {
        let mut rng = self.rng.clone();
        let out = self.step_with(action, &mut rng);
        self.rng = rng;
        out
    }

    fn state(&self) -> &GridEnvState {
        &self.grid
    }
}

pub fn make_env(kind: EnvKind) -> Box<dyn Environment + Send> {
    match kind {
        EnvKind::CliffWalking => Box::new(CliffWalking::new()),
        EnvKind::FrozenLake => Box::new(FrozenLake::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::mock::StepRng;

    fn rc(pos: usize, cols: usize) -> (usize, usize) {
        (pos / cols, pos % cols)
    }

    #[test]
    fn cliff_reset_and_fall() {
        let mut env = CliffWalking::new();
        let s = env.reset(0);
        assert_eq!(rc(s, 12), (3, 0));
        assert_eq!(env.state().rows * env.state().cols, 48);
        let out = env.step(Action::Right).unwrap();
        assert_eq!(out.reward, -100.0);
        assert_eq!(rc(out.next_state, 12), (3, 0));
        assert!(!out.done);
        assert_eq!(env.state().steps_taken, 1);
    }

    #[test]
    fn cliff_optimal_path_scores_zero() {
        let mut env = CliffWalking::new();
        env.reset(0);
        let mut ret = 0.0;
        let mut actions = vec![Action::Up];
        actions.extend([Action::Right; 11]);
        actions.push(Action::Down);
        let mut last = None;
        for a in actions {
            let out = env.step(a).unwrap();
            ret += out.reward;
            last = Some(out);
        }
        let last = last.unwrap();
        assert!(last.done && last.terminal);
        assert_eq!(ret, 0.0);
        assert_eq!(env.step(Action::Up), Err(Error::EpisodeDone));
    }

    #[test]
    fn cliff_horizon() {
        let mut env = CliffWalking::new();
        env.reset(0);
        for i in 0..CliffWalking::HORIZON {
            let out = env.step(Action::Left).unwrap();
            assert_eq!(out.done, i + 1 == CliffWalking::HORIZON);
            assert!(!out.terminal);
        }
    }

    #[test]
    fn lake_reset() {
        let mut env = FrozenLake::new();
        assert_eq!(env.reset(5), 0);
        assert_eq!(env.state().cells.len(), 16);
    }

    #[test]
    fn lake_forced_step_into_goal() {
        let mut env = FrozenLake::new();
        env.reset(0);
        env.place_agent(14); // (3,2)
        // gen_range(0..3) on an all-zero stream yields 0: the intended move.
        let mut rng = StepRng::new(0, 0);
        let out = env.step_with(Action::Right, &mut rng).unwrap();
        assert_eq!(out.reward, 1.0);
        assert!(out.done && out.terminal);
    }

    #[test]
    fn lake_hole_ends_with_zero() {
        let mut env = FrozenLake::new();
        env.reset(0);
        env.place_agent(1); // (0,1), hole below
        let out = env.step_with(Action::Down, &mut StepRng::new(0, 0)).unwrap();
        assert_eq!((out.reward, out.done, out.next_state), (0.0, true, 5));
    }

    #[test]
    fn lake_horizon_and_binary_returns() {
        let mut env = FrozenLake::new();
        for seed in 0..200 {
            env.reset(seed);
            let mut ret = 0.0;
            let mut n = 0;
            loop {
                let out = env.step(Action::Left).unwrap();
                ret += out.reward;
                n += 1;
                if out.done {
                    break;
                }
            }
            assert!(n <= FrozenLake::HORIZON);
            assert!(ret == 0.0 || ret == 1.0);
        }
    }

    #[test]
    fn lake_reset_is_deterministic() {
        let mut a = FrozenLake::new();
        let mut b = FrozenLake::new();
        let actions = [Action::Down, Action::Right, Action::Down, Action::Right, Action::Down];
        a.reset(99);
        b.reset(99);
        for act in actions {
            let (x, y) = (a.step(act), b.step(act));
            assert_eq!(x, y);
            if x.map(|o| o.done).unwrap_or(true) {
                break;
            }
        }
    }

    #[test]
    fn perpendiculars() {
        assert_eq!(Action::Up.perpendicular(), [Action::Left, Action::Right]);
        assert_eq!(Action::Right.perpendicular(), [Action::Up, Action::Down]);
        for a in Action::ALL {
            assert_eq!(Action::from_index(a.index()), Some(a));
        }
    }
}
