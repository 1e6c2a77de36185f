//! Shortest-path intra-option policies from value iteration.
//!
//! The goal is absorbing and entering it pays 1; every other transition pays
//! 0. With deterministic moves and discount below one, acting greedily on the
//! converged values follows a shortest path.

use crate::error::PolicyError;
use crate::graph::FactorGraph;

pub const VI_DISCOUNT: f64 = 0.99;
pub const VI_TOLERANCE: f64 = 1e-6;
const VI_MAX_ITERS: usize = 100_000;
const Q_TIE: f64 = 1e-12;

/// A deterministic single-agent model with a fixed action count.
pub trait TransitionModel {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn next(&self, state: usize, action: usize) -> usize;
}

/// Moves along a [`FactorGraph`]: action `a` goes to the `a`-th neighbor in
/// ascending order, or stays put when the node has fewer neighbors.
pub struct GraphModel<'a> {
    graph: &'a FactorGraph,
    neighbors: Vec<Vec<usize>>,
    n_actions: usize,
}

impl<'a> GraphModel<'a> {
    pub fn new(graph: &'a FactorGraph) -> Self {
        let neighbors: Vec<Vec<usize>> = (0..graph.n_nodes()).map(|u| graph.neighbors(u).collect()).collect();
        let n_actions = neighbors.iter().map(Vec::len).max().unwrap_or(0);
        Self {
            graph,
            neighbors,
            n_actions,
        }
    }
}

impl TransitionModel for GraphModel<'_> {
    fn n_states(&self) -> usize {
        self.graph.n_nodes()
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn next(&self, state: usize, action: usize) -> usize {
        self.neighbors[state].get(action).copied().unwrap_or(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyStep {
    Act(u8),
    /// Emitted at the goal: the option is done.
    Stay,
    /// No path from this state.
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicPolicy {
    pub goal: usize,
    pub steps: Vec<PolicyStep>,
}

impl DeterministicPolicy {
    pub fn step(&self, state: usize) -> PolicyStep {
        self.steps[state]
    }

    /// States visited from `start` to the goal, both ends included.
    pub fn rollout(&self, model: &dyn TransitionModel, start: usize) -> Result<Vec<usize>, PolicyError> {
        let mut path = vec![start];
        let mut s = start;
        while s != self.goal {
            match self.steps[s] {
                PolicyStep::Act(a) => s = model.next(s, a as usize),
                _ => {
                    return Err(PolicyError::UnreachableTarget {
                        from: start,
                        goal: self.goal,
                    })
                }
            }
            path.push(s);
            if path.len() > model.n_states() {
                return Err(PolicyError::UnreachableTarget {
                    from: start,
                    goal: self.goal,
                });
            }
        }
        Ok(path)
    }

    pub fn path_length(&self, model: &dyn TransitionModel, start: usize) -> Result<usize, PolicyError> {
        self.rollout(model, start).map(|p| p.len() - 1)
    }

    /// Compact action table: one character per state (`0`-`9` for actions,
    /// `S` for the goal, `-` where unreachable). Grid maps use their own
    /// letters; see [`crate::env::Move`].
    pub fn table_string(&self, letter: impl Fn(u8) -> char) -> String {
        self.steps
            .iter()
            .map(|s| match s {
                PolicyStep::Act(a) => letter(*a),
                PolicyStep::Stay => 'S',
                PolicyStep::Unreachable => '-',
            })
            .collect()
    }
}

/// Greedy policy toward `goal` from converged state values. Action ties go
/// to the lowest index.
pub fn value_iteration_policy(model: &dyn TransitionModel, goal: usize) -> Result<DeterministicPolicy, PolicyError> {
    let n = model.n_states();
    if goal >= n {
        return Err(PolicyError::GoalOutOfRange { goal, n_states: n });
    }
    let n_actions = model.n_actions();
    let q = |values: &[f64], s: usize, a: usize| -> f64 {
        let next = model.next(s, a);
        if next == goal {
            1.0
        } else {
            VI_DISCOUNT * values[next]
        }
    };

    let mut values = vec![0.0; n];
    for _ in 0..VI_MAX_ITERS {
        let mut delta = 0.0_f64;
        let fresh: Vec<f64> = (0..n)
            .map(|s| {
                if s == goal {
                    0.0
                } else {
                    (0..n_actions).map(|a| q(&values, s, a)).fold(0.0, f64::max)
                }
            })
            .collect();
        for (old, new) in values.iter().zip(&fresh) {
            delta = delta.max((old - new).abs());
        }
        values = fresh;
        if delta < VI_TOLERANCE {
            break;
        }
    }

    let steps = (0..n)
        .map(|s| {
            if s == goal {
                return PolicyStep::Stay;
            }
            let best = (0..n_actions).map(|a| q(&values, s, a)).fold(0.0, f64::max);
            if best <= 0.0 {
                return PolicyStep::Unreachable;
            }
            let a = (0..n_actions)
                .find(|&a| q(&values, s, a) >= best - Q_TIE)
                .expect("some action attains the max");
            PolicyStep::Act(a as u8)
        })
        .collect();
    Ok(DeterministicPolicy { goal, steps })
}

/// Breadth-first distances to `goal` over reversed transitions.
pub fn bfs_distances(model: &dyn TransitionModel, goal: usize) -> Vec<Option<usize>> {
    let n = model.n_states();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        for a in 0..model.n_actions() {
            let t = model.next(s, a);
            if t != s {
                preds[t].push(s);
            }
        }
    }
    let mut dist = vec![None; n];
    dist[goal] = Some(0);
    let mut queue = std::collections::VecDeque::from([goal]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &p in &preds[u] {
            if dist[p].is_none() {
                dist[p] = Some(du + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}
