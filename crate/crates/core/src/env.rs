//! Multi-agent gridworlds with a sparse shared completion reward.
//!
//! Maps are ASCII grids: `#` is a wall, `.` a free cell, a digit marks a cell
//! of that goal area and an uppercase letter marks an agent's start (`A` is
//! agent 0). Optional `key: value` lines before the grid set the map name and
//! the goal area of each agent:
//!
//! ```text
//! name: corridor
//! goals: 0 0
//! ######
//! #AB.0#
//! ######
//! ```
//!
//! Without a `goals:` line every agent shares the single goal area. Free
//! cells are numbered in row-major order; those numbers are the agents'
//! individual states.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::EnvError;
use crate::graph::FactorGraph;
use crate::policy::TransitionModel;

pub const EPISODE_CAP: usize = 200;
pub const DISCOUNT: f64 = 0.99;
pub const COMPLETION_REWARD: f64 = 1.0;

/// Agent moves. Only the four compass moves are offered to high-level
/// learners; `Stay` is what an intra-option policy emits once its agent has
/// arrived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Move {
    pub const COMPASS: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn from_index(i: u8) -> Move {
        match i {
            0 => Move::Up,
            1 => Move::Down,
            2 => Move::Left,
            3 => Move::Right,
            _ => Move::Stay,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Move::Up => 'U',
            Move::Down => 'D',
            Move::Left => 'L',
            Move::Right => 'R',
            Move::Stay => 'S',
        }
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
            Move::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    pub name: String,
    width: usize,
    height: usize,
    wall: Vec<bool>,
    state_of_cell: Vec<Option<usize>>,
    cell_of_state: Vec<(usize, usize)>,
}

impl GridMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of free cells.
    pub fn n_free(&self) -> usize {
        self.cell_of_state.len()
    }

    pub fn is_wall(&self, row: usize, col: usize) -> bool {
        self.wall[row * self.width + col]
    }

    pub fn state_at(&self, row: usize, col: usize) -> Option<usize> {
        if row < self.height && col < self.width {
            self.state_of_cell[row * self.width + col]
        } else {
            None
        }
    }

    /// `(row, col)` of a free-cell state.
    pub fn cell(&self, state: usize) -> (usize, usize) {
        self.cell_of_state[state]
    }

    /// Result of one move; walls and the border leave the agent in place.
    pub fn apply(&self, state: usize, mv: Move) -> usize {
        let (r, c) = self.cell_of_state[state];
        let (dr, dc) = mv.delta();
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 {
            return state;
        }
        self.state_at(nr as usize, nc as usize).unwrap_or(state)
    }

    fn from_grid(name: String, rows: &[&str]) -> Result<(Self, Vec<Vec<char>>), EnvError> {
        let height = rows.len();
        if height == 0 {
            return Err(EnvError::Parse {
                line: 0,
                msg: "map has no grid rows".into(),
            });
        }
        let width = rows[0].chars().count();
        let mut wall = Vec::with_capacity(width * height);
        let mut chars = Vec::with_capacity(height);
        for (r, row) in rows.iter().enumerate() {
            let cs: Vec<char> = row.chars().collect();
            if cs.len() != width {
                return Err(EnvError::Parse {
                    line: r + 1,
                    msg: format!("row has {} cells, expected {width}", cs.len()),
                });
            }
            for &ch in &cs {
                match ch {
                    '#' => wall.push(true),
                    '.' | '0'..='9' | 'A'..='Z' => wall.push(false),
                    other => {
                        return Err(EnvError::Parse {
                            line: r + 1,
                            msg: format!("unexpected character `{other}`"),
                        })
                    }
                }
            }
            chars.push(cs);
        }
        let mut state_of_cell = vec![None; width * height];
        let mut cell_of_state = Vec::new();
        for r in 0..height {
            for c in 0..width {
                if !wall[r * width + c] {
                    state_of_cell[r * width + c] = Some(cell_of_state.len());
                    cell_of_state.push((r, c));
                }
            }
        }
        let map = Self {
            name,
            width,
            height,
            wall,
            state_of_cell,
            cell_of_state,
        };
        Ok((map, chars))
    }
}

impl TransitionModel for GridMap {
    fn n_states(&self) -> usize {
        self.n_free()
    }
    fn n_actions(&self) -> usize {
        4
    }
    fn next(&self, state: usize, action: usize) -> usize {
        self.apply(state, Move::from_index(action as u8))
    }
}

/// Free-cell graph under 4-neighborhood.
pub fn adjacency_from_map(map: &GridMap) -> Result<FactorGraph, EnvError> {
    let mut g = FactorGraph::new(map.n_free());
    for s in 0..map.n_free() {
        for mv in [Move::Down, Move::Right] {
            let t = map.apply(s, mv);
            if t != s {
                g.add_edge(s, t).expect("grid neighbors are distinct");
            }
        }
    }
    if !g.is_connected() {
        return Err(EnvError::Disconnected);
    }
    let labels = (0..map.n_free())
        .map(|s| {
            let (r, c) = map.cell(s);
            format!("r{r}c{c}")
        })
        .collect();
    Ok(g.with_labels(labels))
}

/// Free-cell graph estimated from a uniform random walk of `steps` moves
/// from `start`: every observed transition between distinct cells becomes an
/// edge. Fails unless the walk visits every free cell.
pub fn adjacency_from_random_walk(
    map: &GridMap,
    start: usize,
    steps: usize,
    seed: u64,
) -> Result<FactorGraph, EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = FactorGraph::new(map.n_free());
    let mut seen = vec![false; map.n_free()];
    seen[start] = true;
    let mut s = start;
    for _ in 0..steps {
        let t = map.apply(s, Move::COMPASS[rng.gen_range(0..4)]);
        if t != s {
            g.add_edge(s, t).expect("grid neighbors are distinct");
            seen[t] = true;
        }
        s = t;
    }
    let visited = seen.iter().filter(|&&v| v).count();
    if visited < map.n_free() {
        return Err(EnvError::InvalidTask(format!(
            "random walk of {steps} steps visited {visited} of {} cells",
            map.n_free()
        )));
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupMode {
    /// Agents sharing a goal area form a group.
    #[default]
    Subtask,
    /// Seeded shuffle, then consecutive chunks of `group_size`.
    Random,
    /// One group per agent.
    Singleton,
}

/// Partitions agents into decision groups.
pub fn make_groups(
    goal_ids: &[usize],
    mode: GroupMode,
    group_size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EnvError> {
    let n = goal_ids.len();
    match mode {
        GroupMode::Singleton => Ok((0..n).map(|i| vec![i]).collect()),
        GroupMode::Subtask => {
            let mut by_goal: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (agent, &g) in goal_ids.iter().enumerate() {
                by_goal.entry(g).or_default().push(agent);
            }
            let mut groups: Vec<Vec<usize>> = by_goal.into_values().collect();
            groups.sort_by_key(|g| g[0]);
            Ok(groups)
        }
        GroupMode::Random => {
            if group_size == 0 || !n.is_multiple_of(group_size) {
                return Err(EnvError::BadPartition(format!(
                    "group size {group_size} does not divide {n} agents"
                )));
            }
            let mut agents: Vec<usize> = (0..n).collect();
            agents.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            Ok(agents
                .chunks(group_size)
                .map(|c| {
                    let mut g = c.to_vec();
                    g.sort_unstable();
                    g
                })
                .collect())
        }
    }
}

/// A multi-agent goal-reaching task.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTask {
    pub map: GridMap,
    pub starts: Vec<usize>,
    /// Goal-area id of each agent.
    pub goal_ids: Vec<usize>,
    /// Cells of each goal area, keyed by id, ascending.
    pub goal_areas: BTreeMap<usize, Vec<usize>>,
    pub collision: bool,
    pub random_starts: bool,
    pub episode_cap: usize,
    pub discount: f64,
    pub reward: f64,
}

impl GridTask {
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut name = String::from("unnamed");
        let mut goal_line: Option<(usize, Vec<usize>)> = None;
        let mut grid = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            if grid.is_empty() {
                if let Some((key, value)) = line.split_once(':') {
                    let value = value.trim();
                    match key.trim() {
                        "name" => name = value.to_string(),
                        "goals" => {
                            let ids = value
                                .split_whitespace()
                                .map(|t| t.parse::<usize>())
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(|e| EnvError::Parse {
                                    line: i + 1,
                                    msg: e.to_string(),
                                })?;
                            goal_line = Some((i + 1, ids));
                        }
                        other => {
                            return Err(EnvError::Parse {
                                line: i + 1,
                                msg: format!("unknown header `{other}`"),
                            })
                        }
                    }
                    continue;
                }
            }
            grid.push(line);
        }
        let (map, chars) = GridMap::from_grid(name, &grid)?;

        let mut starts: BTreeMap<usize, usize> = BTreeMap::new();
        let mut goal_areas: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (r, row) in chars.iter().enumerate() {
            for (c, &ch) in row.iter().enumerate() {
                let Some(s) = map.state_at(r, c) else { continue };
                if let Some(d) = ch.to_digit(10) {
                    goal_areas.entry(d as usize).or_default().push(s);
                } else if ch.is_ascii_uppercase() {
                    let agent = (ch as u8 - b'A') as usize;
                    if starts.insert(agent, s).is_some() {
                        return Err(EnvError::Parse {
                            line: r + 1,
                            msg: format!("agent `{ch}` placed twice"),
                        });
                    }
                }
            }
        }
        let n_agents = starts.len();
        if n_agents == 0 || starts.keys().copied().ne(0..n_agents) {
            return Err(EnvError::InvalidTask(
                "agent starts must be the letters A, B, ... without gaps".into(),
            ));
        }
        let goal_ids = match goal_line {
            Some((line, ids)) => {
                if ids.len() != n_agents {
                    return Err(EnvError::Parse {
                        line,
                        msg: format!("{} goal ids for {n_agents} agents", ids.len()),
                    });
                }
                ids
            }
            None if goal_areas.len() == 1 => vec![*goal_areas.keys().next().unwrap(); n_agents],
            None => return Err(EnvError::InvalidTask("several goal areas but no `goals:` line".into())),
        };
        for g in &goal_ids {
            if !goal_areas.contains_key(g) {
                return Err(EnvError::InvalidTask(format!("goal area {g} has no cells")));
            }
        }
        adjacency_from_map(&map)?;
        Ok(Self {
            map,
            starts: starts.into_values().collect(),
            goal_ids,
            goal_areas,
            collision: false,
            random_starts: false,
            episode_cap: EPISODE_CAP,
            discount: DISCOUNT,
            reward: COMPLETION_REWARD,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn goal_set(&self, agent: usize) -> &[usize] {
        &self.goal_areas[&self.goal_ids[agent]]
    }

    pub fn in_goal(&self, agent: usize, state: usize) -> bool {
        self.goal_set(agent).binary_search(&state).is_ok()
    }

    pub fn is_complete(&self, state: &[usize]) -> bool {
        state.iter().enumerate().all(|(i, &s)| self.in_goal(i, s))
    }

    /// Exact fraction of joint states that pay the completion reward, as
    /// `(numerator, denominator)` before reduction.
    pub fn rewarding_fraction(&self) -> (u128, u128) {
        let m = self.map.n_free() as u128;
        let num = (0..self.n_agents()).map(|i| self.goal_set(i).len() as u128).product();
        let den = m.pow(self.n_agents() as u32);
        (num, den)
    }

    /// Start configuration for a new episode.
    pub fn reset(&self, rng: &mut impl rand::Rng) -> Vec<usize> {
        if !self.random_starts {
            return self.starts.clone();
        }
        let m = self.map.n_free();
        loop {
            let s: Vec<usize> = (0..self.n_agents()).map(|_| rng.gen_range(0..m)).collect();
            let distinct = {
                let mut t = s.clone();
                t.sort_unstable();
                t.windows(2).all(|w| w[0] != w[1])
            };
            if (!self.collision || distinct) && !self.is_complete(&s) {
                return s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: Vec<usize>,
    pub reward: f64,
    pub done: bool,
    /// Every agent is in its goal area.
    pub completed: bool,
}

/// One simultaneous move of every agent. `t` is the number of steps already
/// taken this episode.
///
/// Under collision rules agents move in ascending index order and a move into
/// a cell held by another agent is cancelled.
pub fn step(task: &GridTask, state: &[usize], moves: &[Move], t: usize) -> StepOutcome {
    let mut next = state.to_vec();
    for (i, &mv) in moves.iter().enumerate() {
        let target = task.map.apply(next[i], mv);
        if task.collision && target != next[i] && next.iter().enumerate().any(|(j, &p)| j != i && p == target) {
            continue;
        }
        next[i] = target;
    }
    let completed = task.is_complete(&next);
    let reward = if completed { task.reward } else { 0.0 };
    let done = completed || t + 1 >= task.episode_cap;
    StepOutcome {
        next,
        reward,
        done,
        completed,
    }
}
