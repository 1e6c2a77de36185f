//! Options and their discovery.
//!
//! Multi-agent covering options come from the estimated Fiedler vector of the
//! joint state graph: the joint states at its minimum and maximum become
//! option targets, each agent gets a shortest-path policy toward its own
//! component, and the factor graphs are joined along the `(min, max)` pairs
//! before the next round. Single-agent covering options do the same on one
//! agent's graph with the exact Fiedler vector.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{KronError, OptionError, PolicyError, SpectralError};
use crate::graph::{argmin_argmax, fiedler, FactorGraph};
use crate::kron::{
    decompose_index, estimate_joint_fiedler, estimate_joint_fiedler_nontrivial, kron_extrema, FactorSpectrumSet,
    JointEigenCandidate, KronConfig,
};
use crate::policy::{value_iteration_policy, DeterministicPolicy, GraphModel, PolicyStep, TransitionModel};

/// Joint states a group has visited.
///
/// Below the cap the joint set is tracked exactly in a bitset. Above it,
/// membership is approximated by the product of the per-agent visited sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnownSet {
    dims: Vec<usize>,
    per_agent: Vec<Vec<bool>>,
    joint: Option<Vec<u64>>,
}

impl KnownSet {
    pub const DEFAULT_CAP: usize = 1 << 24;

    pub fn new(dims: Vec<usize>, cap: usize) -> Self {
        let total: u128 = dims.iter().map(|&d| d as u128).product();
        let joint = (total <= cap as u128).then(|| vec![0u64; (total as usize).div_ceil(64)]);
        Self {
            per_agent: dims.iter().map(|&d| vec![false; d]).collect(),
            dims,
            joint,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn is_exact(&self) -> bool {
        self.joint.is_some()
    }

    fn flat(&self, joint: &[usize]) -> usize {
        joint.iter().zip(&self.dims).fold(0, |acc, (&s, &d)| acc * d + s)
    }

    pub fn visit(&mut self, joint: &[usize]) {
        for (seen, &s) in self.per_agent.iter_mut().zip(joint) {
            seen[s] = true;
        }
        let f = self.flat(joint);
        if let Some(bits) = &mut self.joint {
            bits[f / 64] |= 1 << (f % 64);
        }
    }

    pub fn contains(&self, joint: &[usize]) -> bool {
        match &self.joint {
            Some(bits) => {
                let f = self.flat(joint);
                bits[f / 64] >> (f % 64) & 1 == 1
            }
            None => joint.iter().enumerate().all(|(i, &s)| self.per_agent[i][s]),
        }
    }

    pub fn contains_agent(&self, agent: usize, state: usize) -> bool {
        self.per_agent[agent][state]
    }

    pub fn agent_count(&self, agent: usize) -> usize {
        self.per_agent[agent].iter().filter(|&&b| b).count()
    }

    /// Number of known joint states (exact mode) or the product of per-agent
    /// counts (approximate mode).
    pub fn joint_count(&self) -> u128 {
        match &self.joint {
            Some(bits) => bits.iter().map(|w| w.count_ones() as u128).sum(),
            None => (0..self.dims.len()).map(|i| self.agent_count(i) as u128).product(),
        }
    }

    /// Marks every combination of the given per-agent states as known.
    pub fn seed_product(&mut self, per_agent: &[Vec<usize>]) {
        for (seen, states) in self.per_agent.iter_mut().zip(per_agent) {
            for &s in states {
                seen[s] = true;
            }
        }
        if self.joint.is_none() {
            return;
        }
        let sizes: Vec<usize> = per_agent.iter().map(Vec::len).collect();
        if sizes.contains(&0) {
            return;
        }
        let mut idx = vec![0usize; sizes.len()];
        loop {
            let joint: Vec<usize> = idx.iter().enumerate().map(|(i, &j)| per_agent[i][j]).collect();
            self.visit(&joint);
            let mut pos = sizes.len();
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < sizes[pos] {
                    break;
                }
                idx[pos] = 0;
            }
        }
    }

    /// Bootstrap: every joint state whose components lie in the component of
    /// each agent's start.
    pub fn seed_reachable(&mut self, graphs: &[FactorGraph], starts: &[usize]) {
        let per_agent: Vec<Vec<usize>> = graphs
            .iter()
            .zip(starts)
            .map(|(g, &s)| {
                let comp = g.components();
                (0..g.n_nodes()).filter(|&u| comp[u] == comp[s]).collect()
            })
            .collect();
        self.seed_product(&per_agent);
    }
}

/// A jointly executed covering option.
///
/// Available wherever the group's joint state is known. Terminates at its
/// target or on entering an unknown joint state. Agent `i` follows
/// `policies[i]` toward `target[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAgentOption {
    pub target: Vec<usize>,
    pub policies: Vec<Arc<DeterministicPolicy>>,
}

impl MultiAgentOption {
    pub fn n_agents(&self) -> usize {
        self.target.len()
    }

    pub fn available(&self, joint: &[usize], known: &KnownSet) -> bool {
        known.contains(joint)
    }

    /// `beta` for joint execution.
    pub fn terminates(&self, joint: &[usize], known: &KnownSet) -> bool {
        joint == self.target.as_slice() || !known.contains(joint)
    }

    /// `beta` when agent `agent` runs its component alone.
    pub fn agent_terminates(&self, agent: usize, state: usize, known: &KnownSet) -> bool {
        state == self.target[agent] || !known.contains_agent(agent, state)
    }

    pub fn action(&self, agent: usize, state: usize) -> PolicyStep {
        self.policies[agent].step(state)
    }
}

/// One direction of a single-agent covering option pair. Initiation is the
/// agent's known region rather than the single source state.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleAgentOption {
    pub agent: usize,
    pub source: usize,
    pub target: usize,
    pub policy: Arc<DeterministicPolicy>,
}

impl SingleAgentOption {
    pub fn available(&self, state: usize, known: &KnownSet, slot: usize) -> bool {
        known.contains_agent(slot, state)
    }

    pub fn terminates(&self, state: usize, known: &KnownSet, slot: usize) -> bool {
        state == self.target || !known.contains_agent(slot, state)
    }
}

/// Which estimated eigenvector(s) count as the joint Fiedler vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FiedlerSelection {
    /// Every candidate tied at the second-smallest estimated eigenvalue.
    #[default]
    Literal,
    /// The smallest candidate built only from factor modes strictly inside
    /// `(0, 2)`; see [`estimate_joint_fiedler_nontrivial`].
    NonTrivialModes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryConfig {
    pub tot_num: usize,
    pub selection: FiedlerSelection,
    pub kron: KronConfig,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            tot_num: 4,
            selection: FiedlerSelection::Literal,
            kron: KronConfig::default(),
        }
    }
}

/// What one round of discovery saw and produced.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryRound {
    pub candidates: Vec<JointEigenCandidate>,
    pub min_states: Vec<Vec<usize>>,
    pub max_states: Vec<Vec<usize>>,
    /// `(min, max)` pairs joined in the factor graphs.
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub new_options: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    pub options: Vec<MultiAgentOption>,
    pub rounds: Vec<DiscoveryRound>,
    /// Factor graphs after all adjacency updates.
    pub graphs: Vec<FactorGraph>,
}

/// Memoized value-iteration policies keyed by `(agent, target)`.
pub struct PolicyCache<'a> {
    models: Vec<&'a dyn TransitionModel>,
    cache: HashMap<(usize, usize), Arc<DeterministicPolicy>>,
}

impl<'a> PolicyCache<'a> {
    pub fn new(models: Vec<&'a dyn TransitionModel>) -> Self {
        Self {
            models,
            cache: HashMap::new(),
        }
    }

    pub fn get(&mut self, agent: usize, target: usize) -> Result<Arc<DeterministicPolicy>, OptionError> {
        if let Some(p) = self.cache.get(&(agent, target)) {
            return Ok(p.clone());
        }
        let model = self.models[agent];
        let policy = value_iteration_policy(model, target).map_err(|e| match e {
            PolicyError::GoalOutOfRange { goal, .. } | PolicyError::UnreachableTarget { goal, .. } => {
                OptionError::UnreachableTarget { agent, state: goal }
            }
        })?;
        let p = Arc::new(policy);
        self.cache.insert((agent, target), p.clone());
        Ok(p)
    }
}

fn check_reachable(
    policy: &DeterministicPolicy,
    agent: usize,
    states: impl Iterator<Item = usize>,
) -> Result<(), OptionError> {
    for s in states {
        if policy.step(s) == PolicyStep::Unreachable {
            return Err(OptionError::UnreachableTarget {
                agent,
                state: policy.goal,
            });
        }
    }
    Ok(())
}

/// One option per state of `MIN ∪ MAX`, in that order, skipping duplicates.
/// Every agent must be able to reach its target component from each of its
/// known states.
pub fn generate_options(
    min_states: &[Vec<usize>],
    max_states: &[Vec<usize>],
    known: &KnownSet,
    policies: &mut PolicyCache<'_>,
) -> Result<Vec<MultiAgentOption>, OptionError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for target in min_states.iter().chain(max_states) {
        if target.len() != known.dims().len() {
            return Err(OptionError::Mismatch(format!(
                "joint state has {} components, group has {} agents",
                target.len(),
                known.dims().len()
            )));
        }
        if !seen.insert(target.clone()) {
            continue;
        }
        let mut pols = Vec::with_capacity(target.len());
        for (agent, &t) in target.iter().enumerate() {
            let p = policies.get(agent, t)?;
            check_reachable(
                &p,
                agent,
                (0..known.dims()[agent]).filter(|&s| known.contains_agent(agent, s)),
            )?;
            pols.push(p);
        }
        out.push(MultiAgentOption {
            target: target.clone(),
            policies: pols,
        });
    }
    Ok(out)
}

/// Joins `s_min^i` and `s_max^i` in every factor graph for each pair.
/// Components that coincide are skipped rather than made into self-loops.
pub fn update_adjacency(graphs: &mut [FactorGraph], pairs: &[(Vec<usize>, Vec<usize>)]) -> Result<(), OptionError> {
    for (lo, hi) in pairs {
        for (i, g) in graphs.iter_mut().enumerate() {
            if lo[i] != hi[i] {
                g.add_edge(lo[i], hi[i])?;
            }
        }
    }
    Ok(())
}

fn disconnected() -> OptionError {
    OptionError::Degenerate(KronError::Spectral(SpectralError::Disconnected))
}

/// Multi-agent covering options on the given factor graphs, with policies
/// trained on the graphs themselves.
pub fn discover_multiagent_options(
    graphs: &[FactorGraph],
    tot_num: usize,
    known: &KnownSet,
) -> Result<Vec<MultiAgentOption>, OptionError> {
    let models: Vec<GraphModel> = graphs.iter().map(GraphModel::new).collect();
    let dyn_models: Vec<&dyn TransitionModel> = models.iter().map(|m| m as &dyn TransitionModel).collect();
    let cfg = DiscoveryConfig {
        tot_num,
        ..DiscoveryConfig::default()
    };
    discover_with(graphs, &dyn_models, &cfg, known).map(|d| d.options)
}

/// Full discovery loop. `models[i]` drives agent `i`'s intra-option policy;
/// `graphs[i]` is its state-transition graph (same node numbering).
///
/// Rounds run until at least `cfg.tot_num` options exist, so the last round
/// may overshoot. A round that adds no option is an error, as the loop would
/// otherwise repeat forever.
pub fn discover_with(
    graphs: &[FactorGraph],
    models: &[&dyn TransitionModel],
    cfg: &DiscoveryConfig,
    known: &KnownSet,
) -> Result<Discovery, OptionError> {
    if models.len() != graphs.len() {
        return Err(OptionError::Mismatch(format!(
            "{} graphs but {} models",
            graphs.len(),
            models.len()
        )));
    }
    for (g, m) in graphs.iter().zip(models) {
        if g.n_nodes() != m.n_states() {
            return Err(OptionError::Mismatch(format!(
                "graph has {} nodes, model has {} states",
                g.n_nodes(),
                m.n_states()
            )));
        }
    }
    let mut graphs = graphs.to_vec();
    let mut options: Vec<MultiAgentOption> = Vec::new();
    let mut rounds = Vec::new();
    if cfg.tot_num == 0 {
        return Ok(Discovery {
            options,
            rounds,
            graphs,
        });
    }
    if graphs.iter().any(|g| !g.is_connected()) {
        return Err(disconnected());
    }
    let mut policies = PolicyCache::new(models.to_vec());
    let mut targets: BTreeSet<Vec<usize>> = BTreeSet::new();

    let mut iteration = 0;
    while options.len() < cfg.tot_num {
        iteration += 1;
        let fs = FactorSpectrumSet::from_graphs(&graphs)?;
        let dims = fs.dims();
        let candidates = match cfg.selection {
            FiedlerSelection::Literal => estimate_joint_fiedler(&fs, &cfg.kron)?,
            FiedlerSelection::NonTrivialModes => estimate_joint_fiedler_nontrivial(&fs, &cfg.kron)?,
        };

        let mut min_states: Vec<Vec<usize>> = Vec::new();
        let mut max_states: Vec<Vec<usize>> = Vec::new();
        let mut pairs = Vec::new();
        for c in &candidates {
            let ex = kron_extrema(&fs, c, cfg.kron.tie_tol, cfg.kron.joint_cap)?;
            let lo: Vec<Vec<usize>> = ex
                .min
                .iter()
                .map(|&f| decompose_index(f, &dims))
                .collect::<Result<_, _>>()?;
            let hi: Vec<Vec<usize>> = ex
                .max
                .iter()
                .map(|&f| decompose_index(f, &dims))
                .collect::<Result<_, _>>()?;
            for a in &lo {
                for b in &hi {
                    pairs.push((a.clone(), b.clone()));
                }
            }
            push_unique(&mut min_states, lo);
            push_unique(&mut max_states, hi);
        }

        let fresh_min: Vec<Vec<usize>> = min_states.iter().filter(|s| !targets.contains(*s)).cloned().collect();
        let fresh_max: Vec<Vec<usize>> = max_states.iter().filter(|s| !targets.contains(*s)).cloned().collect();
        let batch = generate_options(&fresh_min, &fresh_max, known, &mut policies)?;
        update_adjacency(&mut graphs, &pairs)?;

        debug!(
            "round {iteration}: {} candidates, {} min, {} max, {} new options",
            candidates.len(),
            min_states.len(),
            max_states.len(),
            batch.len()
        );
        let new_options = batch.len();
        rounds.push(DiscoveryRound {
            candidates,
            min_states,
            max_states,
            pairs,
            new_options,
        });
        if new_options == 0 {
            return Err(OptionError::NonConvergent { iteration });
        }
        for o in batch {
            targets.insert(o.target.clone());
            options.push(o);
        }
    }
    Ok(Discovery {
        options,
        rounds,
        graphs,
    })
}

fn push_unique(into: &mut Vec<Vec<usize>>, items: Vec<Vec<usize>>) {
    for s in items {
        if !into.contains(&s) {
            into.push(s);
        }
    }
}

/// Single-agent covering options on one graph, `num / 2` symmetric pairs.
/// Policies come from `model`. A pair that repeats ends the search with
/// [`OptionError::NonConvergent`].
pub fn discover_single_agent_options(
    g: &FactorGraph,
    num: usize,
    agent: usize,
    model: &dyn TransitionModel,
) -> Result<Vec<SingleAgentOption>, OptionError> {
    if !num.is_multiple_of(2) {
        return Err(OptionError::OddCount(num));
    }
    if num == 0 {
        return Ok(Vec::new());
    }
    if !g.is_connected() {
        return Err(disconnected());
    }
    if g.n_nodes() != model.n_states() {
        return Err(OptionError::Mismatch(format!(
            "graph has {} nodes, model has {} states",
            g.n_nodes(),
            model.n_states()
        )));
    }
    let mut g = g.clone();
    let mut policies = PolicyCache::new(vec![model]);
    let mut out = Vec::with_capacity(num);
    let mut made = BTreeSet::new();
    let mut iteration = 0;
    while out.len() < num {
        iteration += 1;
        let (_, f) = fiedler(&g)?;
        let (i, j) = argmin_argmax(&f);
        if i == j || !made.insert((i.min(j), i.max(j))) {
            return Err(OptionError::NonConvergent { iteration });
        }
        g.add_edge(i, j)?;
        let to_j = policies.get(0, j)?;
        let to_i = policies.get(0, i)?;
        check_reachable(&to_j, agent, 0..g.n_nodes())?;
        check_reachable(&to_i, agent, 0..g.n_nodes())?;
        out.push(SingleAgentOption {
            agent,
            source: i,
            target: j,
            policy: to_j,
        });
        out.push(SingleAgentOption {
            agent,
            source: j,
            target: i,
            policy: to_i,
        });
    }
    Ok(out)
}

/// Option manifest, one record per option:
/// `group,option,target,actions`. `target` lists the per-agent target states
/// joined by `;`. `actions` holds one policy table per agent, joined by `|`,
/// with one character per state (see [`DeterministicPolicy::table_string`]).
pub fn manifest_csv<'a>(
    rows: impl IntoIterator<Item = (usize, &'a [usize], Vec<&'a DeterministicPolicy>)>,
    letter: impl Fn(u8) -> char + Copy,
) -> String {
    let mut out = String::from("group,option,target,actions\n");
    let mut counters: HashMap<usize, usize> = HashMap::new();
    for (group, target, pols) in rows {
        let k = counters.entry(group).or_insert(0);
        let target: Vec<String> = target.iter().map(ToString::to_string).collect();
        let tables: Vec<String> = pols.iter().map(|p| p.table_string(letter)).collect();
        writeln!(out, "{group},{k},{},{}", target.join(";"), tables.join("|")).unwrap();
        *k += 1;
    }
    out
}
