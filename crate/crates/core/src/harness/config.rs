//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [task]
//! map = "../maps/fourroom_2agent.txt"   # relative to the config file
//! collision = false
//! grouping = "subtask"
//! group_size = 2
//!
//! [learner]
//! kind = "centq_force"
//! alpha = 0.1
//!
//! [options]
//! source = "multi"
//! tot_num = 4
//!
//! [run]
//! seeds = [0, 1, 2, 3, 4]
//! episodes = 1000
//! ```
//!
//! Discovery-only configs may give `graphs = [...]` (edge-list files)
//! instead of a map.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::env::{make_groups, GridTask, GroupMode, DISCOUNT, EPISODE_CAP};
use crate::graph::FactorGraph;
use crate::kron::{KronConfig, DEFAULT_JOINT_CAP, DEFAULT_TIE_TOL};
use crate::learners::{AdjacencySource, LearnerConfig, LearnerKind, OptionSetup, OptionSource};
use crate::options::{FiedlerSelection, KnownSet};

use super::{builtin_map, HarnessError};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: TaskSection,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub options: OptionsSection,
    #[serde(default)]
    pub run: RunSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSection {
    pub map: Option<String>,
    /// Name of a map compiled into the binary.
    pub builtin: Option<String>,
    pub graphs: Option<Vec<String>>,
    pub collision: bool,
    pub random_starts: bool,
    pub grouping: GroupMode,
    pub group_size: usize,
    /// Shuffle seed for random grouping.
    pub group_seed: u64,
    pub episode_cap: usize,
    pub discount: f64,
}

impl Default for TaskSection {
    fn default() -> Self {
        Self {
            map: None,
            builtin: None,
            graphs: None,
            collision: false,
            random_starts: false,
            grouping: GroupMode::Subtask,
            group_size: 2,
            group_seed: 0,
            episode_cap: EPISODE_CAP,
            discount: DISCOUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub kind: LearnerKind,
    pub alpha: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_fraction: f64,
    pub gamma: f64,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let d = LearnerConfig::default();
        Self {
            kind: LearnerKind::CentqForce,
            alpha: d.alpha,
            eps_start: d.eps_start,
            eps_end: d.eps_end,
            eps_decay_fraction: d.eps_decay_fraction,
            gamma: d.gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyKind {
    #[default]
    Map,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptionsSection {
    pub source: OptionSource,
    pub tot_num: usize,
    pub fiedler: FiedlerSelection,
    pub adjacency: AdjacencyKind,
    pub walk_steps: usize,
    pub walk_seed: u64,
    pub tie_tol: f64,
    pub joint_cap: usize,
    pub known_cap: usize,
}

impl Default for OptionsSection {
    fn default() -> Self {
        Self {
            source: OptionSource::None,
            tot_num: 4,
            fiedler: FiedlerSelection::NonTrivialModes,
            adjacency: AdjacencyKind::Map,
            walk_steps: 100_000,
            walk_seed: 0,
            tie_tol: DEFAULT_TIE_TOL,
            joint_cap: DEFAULT_JOINT_CAP,
            known_cap: KnownSet::DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub out: Option<String>,
    /// Series name in plots and tables.
    pub label: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            episodes: 1000,
            out: None,
            label: None,
        }
    }
}

/// What the task section resolves to.
#[derive(Debug, Clone)]
pub enum LoadedTask {
    Grid(GridTask),
    Graphs(Vec<FactorGraph>),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let t = &self.task;
        let sources = [t.map.is_some(), t.builtin.is_some(), t.graphs.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(HarnessError::Config(
                "[task] needs exactly one of `map`, `builtin` or `graphs`".into(),
            ));
        }
        if let Some(name) = &t.builtin {
            if builtin_map(name).is_none() {
                return Err(HarnessError::Config(format!("no builtin map named {name:?}")));
            }
        }
        if t.group_size == 0 {
            return Err(HarnessError::Config("group_size must be positive".into()));
        }
        if t.episode_cap == 0 {
            return Err(HarnessError::Config("episode_cap must be positive".into()));
        }
        if !(t.discount > 0.0 && t.discount <= 1.0) {
            return Err(HarnessError::Config("discount must lie in (0, 1]".into()));
        }
        if self.run.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        let mut seen = self.run.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.run.seeds.len() {
            return Err(HarnessError::Config("seeds must be distinct".into()));
        }
        if self.run.episodes == 0 {
            return Err(HarnessError::Config("episodes must be positive".into()));
        }
        if self.options.tie_tol <= 0.0 {
            return Err(HarnessError::Config("tie_tol must be positive".into()));
        }
        self.learner_config(0)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn label(&self) -> String {
        self.run
            .label
            .clone()
            .unwrap_or_else(|| format!("{}+{}", self.learner.kind.name(), self.options.source.name()))
    }

    pub fn learner_config(&self, seed: u64) -> LearnerConfig {
        let l = &self.learner;
        LearnerConfig {
            alpha: l.alpha,
            eps_start: l.eps_start,
            eps_end: l.eps_end,
            eps_decay_fraction: l.eps_decay_fraction,
            gamma: l.gamma,
            episodes: self.run.episodes,
            seed,
        }
    }

    pub fn option_setup(&self) -> OptionSetup {
        let o = &self.options;
        OptionSetup {
            source: o.source,
            tot_num: o.tot_num,
            selection: o.fiedler,
            kron: KronConfig {
                tie_tol: o.tie_tol,
                joint_cap: o.joint_cap,
            },
            known_cap: o.known_cap,
            adjacency: match o.adjacency {
                AdjacencyKind::Map => AdjacencySource::Map,
                AdjacencyKind::RandomWalk => AdjacencySource::RandomWalk {
                    steps: o.walk_steps,
                    seed: o.walk_seed,
                },
            },
        }
    }

    /// Reads the map or graphs. Unreadable or malformed inputs are config
    /// errors.
    pub fn load_task(&self) -> Result<LoadedTask, HarnessError> {
        let t = &self.task;
        if let Some(files) = &t.graphs {
            let graphs = files
                .iter()
                .map(|f| {
                    let path = self.resolve(f);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
                    FactorGraph::parse_edge_list(&text)
                        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(LoadedTask::Graphs(graphs));
        }
        let (text, origin) = match (&t.map, &t.builtin) {
            (Some(m), _) => {
                let path = self.resolve(m);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
                (text, path.display().to_string())
            }
            (None, Some(b)) => (builtin_map(b).expect("validated").to_string(), b.clone()),
            _ => unreachable!("validated"),
        };
        let mut task = GridTask::parse(&text).map_err(|e| HarnessError::Config(format!("{origin}: {e}")))?;
        task.collision = t.collision;
        task.random_starts = t.random_starts;
        task.episode_cap = t.episode_cap;
        task.discount = t.discount;
        Ok(LoadedTask::Grid(task))
    }

    pub fn groups(&self, task: &GridTask) -> Result<Vec<Vec<usize>>, HarnessError> {
        make_groups(
            &task.goal_ids,
            self.task.grouping,
            self.task.group_size,
            self.task.group_seed,
        )
        .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("[task]\nbuiltin = \"fourroom-2agent\"\n", ".").unwrap();
        assert_eq!(cfg.run.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(
            cfg.learner_config(3),
            LearnerConfig {
                seed: 3,
                ..LearnerConfig::default()
            }
        );
        assert_eq!(cfg.label(), "centq_force+none");
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "[task]\n",
            "[task]\nbuiltin = \"nope\"\n",
            "[task]\nbuiltin = \"fourroom-2agent\"\nmap = \"x\"\n",
            "[task]\nbuiltin = \"fourroom-2agent\"\n[run]\nseeds = []\n",
            "[task]\nbuiltin = \"fourroom-2agent\"\n[run]\nseeds = [1, 1]\n",
            "[task]\nbuiltin = \"fourroom-2agent\"\n[learner]\nalpha = 0.0\n",
            "[task]\nbuiltin = \"fourroom-2agent\"\n[learner]\nkind = \"sarsa\"\n",
            "[task]\nbuiltin = \"fourroom-2agent\"\ntypo = 1\n",
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::from_toml(text, "."), Err(HarnessError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn missing_map_is_a_config_error() {
        let cfg = ExperimentConfig::from_toml("[task]\nmap = \"does/not/exist.txt\"\n", ".").unwrap();
        let err = cfg.load_task().unwrap_err();
        assert!(err.to_string().contains("does/not/exist.txt"));
        assert_eq!(err.exit_code(), 1);
    }
}
