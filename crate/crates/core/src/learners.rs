//! High-level learners over primitive moves and options.
//!
//! A decision unit is either one agent (random, IQL, distributed Q) or one
//! group (centralized Q, with or without forced joint options). A unit picks
//! a choice, runs it until every part has terminated, then picks again.
//! Units in the same episode run asynchronously.
//!
//! Choices are numbered per unit:
//!
//! * per agent: `0..4` are the compass moves, `4 + h` is option handle `h`;
//! * tuples (centralized Q): per-agent choices in mixed radix, first agent
//!   most significant, giving `(4 + k)^n` choices;
//! * forced joint options: `0..4^n` are move tuples, `4^n + h` is joint
//!   option `h`, giving `4^n + k` choices.
//!
//! Value updates use the semi-Markov form
//! `Q(s, o) += alpha * (R + gamma^tau * max_o' Q(s', o') - Q(s, o))`, where
//! `R` is the discounted reward collected while `o` ran for `tau` steps. The
//! bootstrap term is dropped when the task completes and kept when the
//! episode is cut off by the step cap.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{adjacency_from_map, adjacency_from_random_walk, step, GridTask, Move};
use crate::error::LearnError;
use crate::graph::FactorGraph;
use crate::kron::KronConfig;
use crate::options::{
    discover_single_agent_options, discover_with, DiscoveryConfig, FiedlerSelection, KnownSet, MultiAgentOption,
    SingleAgentOption,
};
use crate::policy::{PolicyStep, TransitionModel};

const PRIMITIVES: usize = 4;
/// Largest number of choices a single unit may have.
pub const MAX_CHOICES: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Random,
    Iql,
    Distq,
    Centq,
    CentqForce,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Random => "random",
            LearnerKind::Iql => "iql",
            LearnerKind::Distq => "distq",
            LearnerKind::Centq => "centq",
            LearnerKind::CentqForce => "centq_force",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionSource {
    #[default]
    None,
    Single,
    Multi,
}

impl OptionSource {
    pub fn name(self) -> &'static str {
        match self {
            OptionSource::None => "none",
            OptionSource::Single => "single",
            OptionSource::Multi => "multi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionMode {
    Decentralized,
    CentralizedForce,
}

/// Choice layout of one decision unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpaceSpec {
    pub primitives: usize,
    /// Option handles usable by each agent individually.
    pub per_agent_options: Vec<usize>,
    /// Joint options (centralized-force only).
    pub joint_options: usize,
    pub mode: OptionMode,
}

impl ActionSpaceSpec {
    pub fn decentralized(per_agent_options: Vec<usize>) -> Self {
        Self {
            primitives: PRIMITIVES,
            per_agent_options,
            joint_options: 0,
            mode: OptionMode::Decentralized,
        }
    }

    pub fn centralized_force(n_agents: usize, joint_options: usize) -> Self {
        Self {
            primitives: PRIMITIVES,
            per_agent_options: vec![0; n_agents],
            joint_options,
            mode: OptionMode::CentralizedForce,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.per_agent_options.len()
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.mode == OptionMode::CentralizedForce && self.per_agent_options.iter().any(|&k| k > 0) {
            return Err(LearnError::ModeMismatch(
                "forced joint execution cannot take per-agent option handles".into(),
            ));
        }
        if self.mode == OptionMode::Decentralized && self.joint_options > 0 {
            return Err(LearnError::ModeMismatch(
                "joint option handles need forced joint execution".into(),
            ));
        }
        Ok(())
    }

    pub fn per_agent_choices(&self, slot: usize) -> usize {
        self.primitives + self.per_agent_options[slot]
    }

    /// `(m + k)^n` decentralized, `m^n + k` forced.
    pub fn joint_choices(&self) -> u128 {
        match self.mode {
            OptionMode::Decentralized => (0..self.n_agents())
                .map(|j| self.per_agent_choices(j) as u128)
                .product(),
            OptionMode::CentralizedForce => {
                (self.primitives as u128).pow(self.n_agents() as u32) + self.joint_options as u128
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub alpha: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the episodes over which epsilon falls linearly.
    pub eps_decay_fraction: f64,
    pub gamma: f64,
    pub episodes: usize,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_fraction: 0.5,
            gamma: 0.99,
            episodes: 1000,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: &str| Err(LearnError::InvalidConfig(m.into()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        for e in [self.eps_start, self.eps_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad("epsilon must lie in [0, 1]");
            }
        }
        if !(0.0..=1.0).contains(&self.eps_decay_fraction) {
            return bad("eps_decay_fraction must lie in [0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        let span = self.eps_decay_fraction * self.episodes as f64;
        if span <= 0.0 {
            return self.eps_end;
        }
        let frac = (episode as f64 / span).min(1.0);
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// Options and known region of one agent group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupOptions {
    /// Global agent ids; position in this list is the agent's slot.
    pub agents: Vec<usize>,
    pub multi: Vec<MultiAgentOption>,
    /// Single-agent options per slot.
    pub single: Vec<Vec<SingleAgentOption>>,
    /// Known region at the start of every run.
    pub known: KnownSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOptions {
    pub source: OptionSource,
    pub groups: Vec<GroupOptions>,
}

/// Where the per-agent state-transition graphs come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AdjacencySource {
    /// Read off the map.
    #[default]
    Map,
    /// Observed along a seeded random walk from each agent's start.
    RandomWalk { steps: usize, seed: u64 },
}

/// How options are found for each group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSetup {
    pub source: OptionSource,
    pub tot_num: usize,
    pub selection: FiedlerSelection,
    pub kron: KronConfig,
    pub known_cap: usize,
    pub adjacency: AdjacencySource,
}

impl Default for OptionSetup {
    fn default() -> Self {
        Self {
            source: OptionSource::None,
            tot_num: 4,
            selection: FiedlerSelection::NonTrivialModes,
            kron: KronConfig::default(),
            known_cap: KnownSet::DEFAULT_CAP,
            adjacency: AdjacencySource::Map,
        }
    }
}

/// Factor graphs of one group's agents and the known region they bootstrap.
pub fn group_graphs(
    task: &GridTask,
    agents: &[usize],
    setup: &OptionSetup,
) -> Result<(Vec<FactorGraph>, KnownSet), LearnError> {
    let graphs: Vec<FactorGraph> = match setup.adjacency {
        AdjacencySource::Map => vec![adjacency_from_map(&task.map)?; agents.len()],
        AdjacencySource::RandomWalk { steps, seed } => agents
            .iter()
            .map(|&a| adjacency_from_random_walk(&task.map, task.starts[a], steps, seed.wrapping_add(a as u64)))
            .collect::<Result<_, _>>()?,
    };
    let mut known = KnownSet::new(vec![task.map.n_free(); agents.len()], setup.known_cap);
    let starts: Vec<usize> = agents.iter().map(|&a| task.starts[a]).collect();
    known.seed_reachable(&graphs, &starts);
    Ok((graphs, known))
}

/// Discovers options for every group.
///
/// Single-agent options are sized to match: each agent gets as many as its
/// group has multi-agent options, rounded up to an even count.
pub fn build_task_options(
    task: &GridTask,
    groups: &[Vec<usize>],
    setup: &OptionSetup,
) -> Result<TaskOptions, LearnError> {
    let mut out = Vec::with_capacity(groups.len());
    for agents in groups {
        let n = agents.len();
        let (graphs, known) = group_graphs(task, agents, setup)?;

        let mut multi = Vec::new();
        let mut single = vec![Vec::new(); n];
        if setup.source != OptionSource::None {
            let models: Vec<&dyn TransitionModel> = vec![&task.map as &dyn TransitionModel; n];
            let cfg = DiscoveryConfig {
                tot_num: setup.tot_num,
                selection: setup.selection,
                kron: setup.kron,
            };
            let found = discover_with(&graphs, &models, &cfg, &known)?.options;
            if setup.source == OptionSource::Multi {
                multi = found;
            } else {
                let count = found.len() + found.len() % 2;
                single = (0..n)
                    .map(|slot| discover_single_agent_options(&graphs[slot], count, slot, &task.map))
                    .collect::<Result<_, _>>()?;
            }
        }
        out.push(GroupOptions {
            agents: agents.clone(),
            multi,
            single,
            known,
        });
    }
    Ok(TaskOptions {
        source: setup.source,
        groups: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Observation {
    None,
    Individual,
    Group,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UpdateRule {
    None,
    Standard,
    Optimistic,
}

#[derive(Debug, Clone)]
struct Unit {
    group: usize,
    /// Slots within the group, in choice-radix order.
    slots: Vec<usize>,
    space: ActionSpaceSpec,
    obs: Observation,
    q: HashMap<u64, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Program {
    Move(Move),
    /// One-step hold: an option invoked where it already terminates.
    Hold,
    /// Follow a group option's component for this slot.
    Multi(usize),
    Single(usize),
    Done,
}

#[derive(Debug, Clone)]
struct Active {
    choice: usize,
    obs: u64,
    r_cum: f64,
    tau: usize,
    programs: Vec<Program>,
    /// Forced joint option in progress.
    joint: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub cumulative_reward: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningRun {
    pub seed: u64,
    pub kind: LearnerKind,
    pub source: OptionSource,
    pub episodes: Vec<EpisodeRecord>,
}

impl LearningRun {
    /// Mean cumulative reward over the run.
    pub fn value(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.cumulative_reward))
    }

    pub fn mean_steps(&self) -> f64 {
        mean(self.episodes.iter().map(|e| e.steps as f64))
    }
}

fn mean(xs: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = xs.len();
    if n == 0 {
        0.0
    } else {
        xs.sum::<f64>() / n as f64
    }
}

/// One seeded training run in progress.
#[derive(Debug, Clone)]
pub struct Learner<'a> {
    task: &'a GridTask,
    options: &'a TaskOptions,
    kind: LearnerKind,
    cfg: LearnerConfig,
    units: Vec<Unit>,
    known: Vec<KnownSet>,
    rng: ChaCha8Rng,
}

impl<'a> Learner<'a> {
    pub fn new(
        task: &'a GridTask,
        options: &'a TaskOptions,
        kind: LearnerKind,
        cfg: LearnerConfig,
    ) -> Result<Self, LearnError> {
        cfg.validate()?;
        let mut seen = vec![false; task.n_agents()];
        for g in &options.groups {
            for &a in &g.agents {
                if a >= seen.len() || std::mem::replace(&mut seen[a], true) {
                    return Err(LearnError::InvalidConfig(format!(
                        "agent {a} is not in exactly one group"
                    )));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(LearnError::InvalidConfig("some agents belong to no group".into()));
        }

        let per_slot = |g: &GroupOptions, slot: usize| match options.source {
            OptionSource::None => 0,
            OptionSource::Single => g.single[slot].len(),
            OptionSource::Multi => g.multi.len(),
        };
        let mut units = Vec::new();
        for (gi, g) in options.groups.iter().enumerate() {
            let n = g.agents.len();
            match kind {
                LearnerKind::Random | LearnerKind::Iql | LearnerKind::Distq => {
                    for slot in 0..n {
                        units.push(Unit {
                            group: gi,
                            slots: vec![slot],
                            space: ActionSpaceSpec::decentralized(vec![per_slot(g, slot)]),
                            obs: match kind {
                                LearnerKind::Random => Observation::None,
                                LearnerKind::Iql => Observation::Individual,
                                _ => Observation::Group,
                            },
                            q: HashMap::new(),
                        });
                    }
                }
                LearnerKind::Centq | LearnerKind::CentqForce => {
                    let space = if kind == LearnerKind::CentqForce && options.source == OptionSource::Multi {
                        ActionSpaceSpec::centralized_force(n, g.multi.len())
                    } else {
                        ActionSpaceSpec::decentralized((0..n).map(|s| per_slot(g, s)).collect())
                    };
                    units.push(Unit {
                        group: gi,
                        slots: (0..n).collect(),
                        space,
                        obs: Observation::Group,
                        q: HashMap::new(),
                    });
                }
            }
        }
        for u in &units {
            u.space.validate()?;
            if u.space.joint_choices() > MAX_CHOICES {
                return Err(LearnError::InvalidConfig(format!(
                    "{} choices per decision exceed the limit of {MAX_CHOICES}",
                    u.space.joint_choices()
                )));
            }
        }
        Ok(Self {
            task,
            options,
            kind,
            known: options.groups.iter().map(|g| g.known.clone()).collect(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            units,
        })
    }

    /// Number of decision units.
    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn unit_space(&self, unit: usize) -> &ActionSpaceSpec {
        &self.units[unit].space
    }

    /// Stored values of `unit` at observation key `obs`, if ever updated.
    pub fn q_row(&self, unit: usize, obs: u64) -> Option<&[f64]> {
        self.units[unit].q.get(&obs).map(Vec::as_slice)
    }

    /// Total number of stored value rows.
    pub fn q_rows(&self) -> usize {
        self.units.iter().map(|u| u.q.len()).sum()
    }

    pub fn known(&self, group: usize) -> &KnownSet {
        &self.known[group]
    }

    /// Observation key of `unit` in joint state `state`.
    pub fn observation(&self, unit: usize, state: &[usize]) -> u64 {
        let u = &self.units[unit];
        let g = &self.options.groups[u.group];
        let m = self.task.map.n_free() as u64;
        match u.obs {
            Observation::None => 0,
            Observation::Individual => state[g.agents[u.slots[0]]] as u64,
            Observation::Group => g.agents.iter().fold(0u64, |acc, &a| acc * m + state[a] as u64),
        }
    }

    fn group_state(&self, group: usize, state: &[usize]) -> Vec<usize> {
        self.options.groups[group].agents.iter().map(|&a| state[a]).collect()
    }

    fn slot_option_count(&self, group: usize, slot: usize) -> usize {
        let g = &self.options.groups[group];
        match self.options.source {
            OptionSource::None => 0,
            OptionSource::Single => g.single[slot].len(),
            OptionSource::Multi => g.multi.len(),
        }
    }

    /// Availability of each per-agent choice of `slot`.
    fn slot_mask(&self, group: usize, slot: usize, state: usize) -> Vec<bool> {
        let known = &self.known[group];
        let g = &self.options.groups[group];
        let mut mask = vec![true; PRIMITIVES];
        match self.options.source {
            OptionSource::None => {}
            OptionSource::Single => mask.extend(g.single[slot].iter().map(|o| o.available(state, known, slot))),
            OptionSource::Multi => mask.extend((0..g.multi.len()).map(|_| known.contains_agent(slot, state))),
        }
        mask
    }

    fn mask(&self, unit: usize, state: &[usize]) -> Vec<bool> {
        let u = &self.units[unit];
        let gs = self.group_state(u.group, state);
        match u.space.mode {
            OptionMode::CentralizedForce => {
                let prims = PRIMITIVES.pow(u.slots.len() as u32);
                let mut mask = vec![true; prims];
                let g = &self.options.groups[u.group];
                mask.extend(g.multi.iter().map(|o| o.available(&gs, &self.known[u.group])));
                mask
            }
            OptionMode::Decentralized => {
                let slot_masks: Vec<Vec<bool>> = u.slots.iter().map(|&s| self.slot_mask(u.group, s, gs[s])).collect();
                let sizes: Vec<usize> = slot_masks.iter().map(Vec::len).collect();
                let total: usize = sizes.iter().product();
                (0..total)
                    .map(|c| decode(c, &sizes).iter().zip(&slot_masks).all(|(&x, m)| m[x]))
                    .collect()
            }
        }
    }

    fn greedy(row: Option<&Vec<f64>>, mask: &[bool]) -> (usize, f64) {
        let mut best = None;
        for (c, &ok) in mask.iter().enumerate() {
            if !ok {
                continue;
            }
            let v = row.map_or(0.0, |r| r[c]);
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((c, v)),
            }
        }
        best.expect("primitive moves are always available")
    }

    fn choose(&mut self, unit: usize, obs: u64, mask: &[bool], eps: f64) -> usize {
        let explore = self.kind == LearnerKind::Random || self.rng.gen::<f64>() < eps;
        if explore {
            let avail: Vec<usize> = (0..mask.len()).filter(|&c| mask[c]).collect();
            avail[self.rng.gen_range(0..avail.len())]
        } else {
            Self::greedy(self.units[unit].q.get(&obs), mask).0
        }
    }

    fn begin(&mut self, unit: usize, state: &[usize], eps: f64) -> Active {
        let obs = self.observation(unit, state);
        let mask = self.mask(unit, state);
        let choice = self.choose(unit, obs, &mask, eps);
        self.instantiate(unit, choice, obs, state)
    }

    /// Starts `choice` in `state`. Options that already terminate there
    /// become a one-step hold.
    fn instantiate(&self, unit: usize, choice: usize, obs: u64, state: &[usize]) -> Active {
        let u = &self.units[unit];
        let group = u.group;
        let gs = self.group_state(group, state);
        let known = &self.known[group];
        let g = &self.options.groups[group];
        let n = u.slots.len();

        let (programs, joint) = match u.space.mode {
            OptionMode::CentralizedForce => {
                let prims = PRIMITIVES.pow(n as u32);
                if choice < prims {
                    let moves = decode(choice, &vec![PRIMITIVES; n]);
                    (
                        moves
                            .iter()
                            .map(|&m| Program::Move(Move::from_index(m as u8)))
                            .collect(),
                        None,
                    )
                } else {
                    let h = choice - prims;
                    if g.multi[h].terminates(&gs, known) {
                        (vec![Program::Hold; n], None)
                    } else {
                        (vec![Program::Multi(h); n], Some(h))
                    }
                }
            }
            OptionMode::Decentralized => {
                let sizes: Vec<usize> = u
                    .slots
                    .iter()
                    .map(|&s| PRIMITIVES + self.slot_option_count(group, s))
                    .collect();
                let parts = decode(choice, &sizes);
                let programs = parts
                    .iter()
                    .zip(&u.slots)
                    .map(|(&c, &slot)| {
                        if c < PRIMITIVES {
                            return Program::Move(Move::from_index(c as u8));
                        }
                        let h = c - PRIMITIVES;
                        let s = gs[slot];
                        match self.options.source {
                            OptionSource::Single => {
                                if g.single[slot][h].terminates(s, known, slot) {
                                    Program::Hold
                                } else {
                                    Program::Single(h)
                                }
                            }
                            _ => {
                                if g.multi[h].agent_terminates(slot, s, known) {
                                    Program::Hold
                                } else {
                                    Program::Multi(h)
                                }
                            }
                        }
                    })
                    .collect();
                (programs, None)
            }
        };
        Active {
            choice,
            obs,
            r_cum: 0.0,
            tau: 0,
            programs,
            joint,
        }
    }

    fn program_move(&self, group: usize, slot: usize, program: Program, state: usize) -> Move {
        let g = &self.options.groups[group];
        let step = match program {
            Program::Move(m) => return m,
            Program::Hold | Program::Done => return Move::Stay,
            Program::Multi(h) => g.multi[h].action(slot, state),
            Program::Single(h) => g.single[slot][h].policy.step(state),
        };
        match step {
            PolicyStep::Act(a) => Move::from_index(a),
            PolicyStep::Stay | PolicyStep::Unreachable => Move::Stay,
        }
    }

    /// Marks finished parts after a step; true when the whole choice is done.
    fn advance(&self, unit: usize, act: &mut Active, state: &[usize]) -> bool {
        let u = &self.units[unit];
        let g = &self.options.groups[u.group];
        let known = &self.known[u.group];
        let gs = self.group_state(u.group, state);
        if let Some(h) = act.joint {
            if g.multi[h].terminates(&gs, known) {
                act.programs.iter_mut().for_each(|p| *p = Program::Done);
            }
            return act.programs.iter().all(|p| *p == Program::Done);
        }
        for (p, &slot) in act.programs.iter_mut().zip(&u.slots) {
            let s = gs[slot];
            let finished = match *p {
                Program::Move(_) | Program::Hold | Program::Done => true,
                Program::Multi(h) => g.multi[h].agent_terminates(slot, s, known),
                Program::Single(h) => g.single[slot][h].terminates(s, known, slot),
            };
            if finished {
                *p = Program::Done;
            }
        }
        act.programs.iter().all(|p| *p == Program::Done)
    }

    fn finish(&mut self, unit: usize, act: &Active, next: &[usize], completed: bool) {
        let rule = match self.kind {
            LearnerKind::Random => UpdateRule::None,
            LearnerKind::Distq => UpdateRule::Optimistic,
            _ => UpdateRule::Standard,
        };
        if rule == UpdateRule::None {
            return;
        }
        let bootstrap = if completed {
            0.0
        } else {
            let obs = self.observation(unit, next);
            let mask = self.mask(unit, next);
            self.cfg.gamma.powi(act.tau as i32) * Self::greedy(self.units[unit].q.get(&obs), &mask).1
        };
        let target = act.r_cum + bootstrap;
        let alpha = self.cfg.alpha;
        let u = &mut self.units[unit];
        let n = u.space.joint_choices() as usize;
        let row = u.q.entry(act.obs).or_insert_with(|| vec![0.0; n]);
        let q = &mut row[act.choice];
        match rule {
            UpdateRule::Standard => *q += alpha * (target - *q),
            UpdateRule::Optimistic => *q = q.max(target),
            UpdateRule::None => {}
        }
    }

    fn visit(&mut self, state: &[usize]) {
        for gi in 0..self.known.len() {
            let gs = self.group_state(gi, state);
            self.known[gi].visit(&gs);
        }
    }

    /// Runs one episode, learning as it goes.
    pub fn run_episode(&mut self, episode: usize) -> EpisodeRecord {
        let eps = self.cfg.epsilon(episode);
        let task = self.task;
        let mut state = task.reset(&mut self.rng);
        self.visit(&state);
        let mut active: Vec<Option<Active>> = vec![None; self.units.len()];

        for t in 0..task.episode_cap {
            for (u, slot) in active.iter_mut().enumerate() {
                if slot.is_none() {
                    *slot = Some(self.begin(u, &state, eps));
                }
            }
            let mut moves = vec![Move::Stay; task.n_agents()];
            for (u, act) in active.iter().enumerate() {
                let unit = &self.units[u];
                let g = &self.options.groups[unit.group];
                let act = act.as_ref().expect("every unit has a choice");
                for (&p, &slot) in act.programs.iter().zip(&unit.slots) {
                    let agent = g.agents[slot];
                    moves[agent] = self.program_move(unit.group, slot, p, state[agent]);
                }
            }
            let out = step(task, &state, &moves, t);
            state = out.next;
            self.visit(&state);

            for (u, slot) in active.iter_mut().enumerate() {
                let mut act = slot.take().expect("every unit has a choice");
                act.r_cum += self.cfg.gamma.powi(act.tau as i32) * out.reward;
                act.tau += 1;
                let done = self.advance(u, &mut act, &state);
                if done || out.done {
                    self.finish(u, &act, &state, out.completed);
                } else {
                    *slot = Some(act);
                }
            }
            if out.done {
                return EpisodeRecord {
                    cumulative_reward: if out.completed {
                        task.discount.powi(t as i32) * task.reward
                    } else {
                        0.0
                    },
                    steps: t + 1,
                };
            }
        }
        EpisodeRecord {
            cumulative_reward: 0.0,
            steps: task.episode_cap,
        }
    }

    pub fn run(mut self) -> LearningRun {
        let episodes = (0..self.cfg.episodes).map(|e| self.run_episode(e)).collect();
        LearningRun {
            seed: self.cfg.seed,
            kind: self.kind,
            source: self.options.source,
            episodes,
        }
    }
}

/// Mixed-radix digits of `c`, first digit most significant.
fn decode(mut c: usize, sizes: &[usize]) -> Vec<usize> {
    let mut out = vec![0; sizes.len()];
    for (slot, &s) in out.iter_mut().zip(sizes).rev() {
        *slot = c % s;
        c /= s;
    }
    out
}

/// Trains one learner for `cfg.episodes` episodes.
pub fn train(
    task: &GridTask,
    options: &TaskOptions,
    kind: LearnerKind,
    cfg: LearnerConfig,
) -> Result<LearningRun, LearnError> {
    if kind == LearnerKind::CentqForce && options.source == OptionSource::Multi {
        for g in &options.groups {
            if g.multi.iter().any(|o| o.n_agents() != g.agents.len()) {
                return Err(LearnError::ModeMismatch(
                    "forced joint options must span their whole group".into(),
                ));
            }
        }
    }
    Ok(Learner::new(task, options, kind, cfg)?.run())
}
