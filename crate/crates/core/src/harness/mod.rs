//! Experiment orchestration: option discovery, seed-parallel training runs,
//! CSV and SVG output, and the shipped comparison tables.
//!
//! Output files of `train`:
//!
//! * `seed_<s>.csv`: `episode,seed,cumulative_reward,steps`
//! * `aggregate.csv`: `episode,mean,std`, across seeds, population std
//! * `summary.csv`: `label,seeds,episodes,value,step`

mod config;
mod plot;

use std::fmt;
use std::path::{Path, PathBuf};

use log::info;
use thiserror::Error;

use crate::env::{GridTask, Move};
use crate::error::{LearnError, OptionError};
use crate::learners::{build_task_options, group_graphs, train, LearningRun, OptionSource, TaskOptions};
use crate::options::{discover_with, manifest_csv, Discovery, DiscoveryConfig, KnownSet};
use crate::policy::{GraphModel, TransitionModel};

pub use config::{
    AdjacencyKind, ExperimentConfig, LearnerSection, LoadedTask, OptionsSection, RunSection, TaskSection,
};
pub use plot::{render_svg, Series};

pub const PER_SEED_HEADER: [&str; 4] = ["episode", "seed", "cumulative_reward", "steps"];
pub const AGGREGATE_HEADER: [&str; 3] = ["episode", "mean", "std"];
pub const SUMMARY_HEADER: [&str; 5] = ["label", "seeds", "episodes", "value", "step"];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown table {0:?} (known: {known})", known = TABLES.join(", "))]
    UnknownTable(String),
    #[error("{path}: expected header {expected:?}, found {found:?}")]
    SchemaMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{0}: no data rows")]
    EmptyCsv(PathBuf),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Options(#[from] OptionError),
    #[error("{} of {total} runs failed: {}", failures.len(), failures.iter().map(|(s, e)| format!("seed {s}: {e}")).collect::<Vec<_>>().join("; "))]
    RunsFailed {
        total: usize,
        failures: Vec<(u64, LearnError)>,
    },
}

impl HarnessError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_)
            | HarnessError::UnknownTable(_)
            | HarnessError::SchemaMismatch { .. }
            | HarnessError::EmptyCsv(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

const BUILTIN_MAPS: [(&str, &str); 4] = [
    ("fourroom-2agent", include_str!("../../maps/fourroom_2agent.txt")),
    ("fourroom-3x2", include_str!("../../maps/fourroom_3x2.txt")),
    ("fourroom-8agent", include_str!("../../maps/fourroom_8agent.txt")),
    ("maze-2agent", include_str!("../../maps/maze_2agent.txt")),
];

/// Map text compiled into the crate.
pub fn builtin_map(name: &str) -> Option<&'static str> {
    BUILTIN_MAPS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn builtin_map_names() -> impl Iterator<Item = &'static str> {
    BUILTIN_MAPS.iter().map(|(n, _)| *n)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Discovery output of one group.
#[derive(Debug, Clone)]
pub struct GroupDiscovery {
    pub agents: Vec<usize>,
    pub discovery: Discovery,
}

#[derive(Debug, Clone)]
pub struct DiscoverReport {
    pub groups: Vec<GroupDiscovery>,
    /// Option manifest, see [`manifest_csv`].
    pub manifest: String,
}

fn tuple(states: &[usize]) -> String {
    let parts: Vec<String> = states.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(","))
}

impl fmt::Display for DiscoverReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.groups {
            writeln!(f, "group {:?}", g.agents)?;
            for (r, round) in g.discovery.rounds.iter().enumerate() {
                writeln!(f, "  round {}: {} Fiedler candidate(s)", r + 1, round.candidates.len())?;
                for c in &round.candidates {
                    writeln!(f, "    mu = {:.6}  modes {}", c.mu, tuple(&c.multi_index))?;
                }
                let min: Vec<String> = round.min_states.iter().map(|s| tuple(s)).collect();
                let max: Vec<String> = round.max_states.iter().map(|s| tuple(s)).collect();
                writeln!(f, "    min targets: {}", min.join(" "))?;
                writeln!(f, "    max targets: {}", max.join(" "))?;
                writeln!(f, "    new options: {}", round.new_options)?;
            }
            writeln!(f, "  {} option(s)", g.discovery.options.len())?;
        }
        Ok(())
    }
}

/// Runs multi-agent option discovery for every group of the configured task.
/// Graph-only configs are treated as one group spanning all graphs, with
/// every joint state known.
pub fn discover(cfg: &ExperimentConfig) -> Result<DiscoverReport, HarnessError> {
    let setup = cfg.option_setup();
    let dcfg = DiscoveryConfig {
        tot_num: setup.tot_num,
        selection: setup.selection,
        kron: setup.kron,
    };
    match cfg.load_task()? {
        LoadedTask::Graphs(graphs) => {
            let models: Vec<GraphModel> = graphs.iter().map(GraphModel::new).collect();
            let dyn_models: Vec<&dyn TransitionModel> = models.iter().map(|m| m as &dyn TransitionModel).collect();
            let mut known = KnownSet::new(graphs.iter().map(|g| g.n_nodes()).collect(), setup.known_cap);
            known.seed_product(&graphs.iter().map(|g| (0..g.n_nodes()).collect()).collect::<Vec<_>>());
            let discovery = discover_with(&graphs, &dyn_models, &dcfg, &known)?;
            let manifest = manifest_csv(
                discovery
                    .options
                    .iter()
                    .map(|o| (0, o.target.as_slice(), o.policies.iter().map(|p| p.as_ref()).collect())),
                |a| char::from_digit(a as u32, 36).unwrap_or('?'),
            );
            Ok(DiscoverReport {
                groups: vec![GroupDiscovery {
                    agents: (0..graphs.len()).collect(),
                    discovery,
                }],
                manifest,
            })
        }
        LoadedTask::Grid(task) => {
            let groups = cfg.groups(&task)?;
            let mut out = Vec::with_capacity(groups.len());
            for agents in groups {
                let (graphs, known) = group_graphs(&task, &agents, &setup)?;
                let models: Vec<&dyn TransitionModel> = vec![&task.map as &dyn TransitionModel; agents.len()];
                let discovery = discover_with(&graphs, &models, &dcfg, &known)?;
                out.push(GroupDiscovery { agents, discovery });
            }
            let manifest = manifest_csv(
                out.iter().enumerate().flat_map(|(gi, g)| {
                    g.discovery
                        .options
                        .iter()
                        .map(move |o| (gi, o.target.as_slice(), o.policies.iter().map(|p| p.as_ref()).collect()))
                }),
                |a| Move::from_index(a).letter(),
            );
            Ok(DiscoverReport { groups: out, manifest })
        }
    }
}

/// [`discover`], then writes `options.csv` into `out`.
pub fn cmd_discover(cfg: &ExperimentConfig, out: &Path) -> Result<DiscoverReport, HarnessError> {
    let report = discover(cfg)?;
    write_file(&out.join("options.csv"), report.manifest.as_bytes())?;
    Ok(report)
}

/// Cross-seed statistics of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub label: String,
    pub seeds: Vec<u64>,
    /// Per-episode mean of the cumulative reward.
    pub mean: Vec<f64>,
    /// Per-episode population standard deviation (divides by the seed count).
    pub std: Vec<f64>,
    /// Mean cumulative reward over all episodes and seeds.
    pub value: f64,
    /// Mean episode length over all episodes and seeds.
    pub step: f64,
}

impl AggregateResult {
    /// Fails on an empty run list or runs of unequal length.
    pub fn from_runs(label: impl Into<String>, runs: &[LearningRun]) -> Result<Self, HarnessError> {
        let Some(first) = runs.first() else {
            return Err(HarnessError::Config("no runs to aggregate".into()));
        };
        let episodes = first.episodes.len();
        if runs.iter().any(|r| r.episodes.len() != episodes) {
            return Err(HarnessError::Config("runs differ in episode count".into()));
        }
        let k = runs.len() as f64;
        let mut mean = Vec::with_capacity(episodes);
        let mut std = Vec::with_capacity(episodes);
        for e in 0..episodes {
            let m = runs.iter().map(|r| r.episodes[e].cumulative_reward).sum::<f64>() / k;
            let var = runs
                .iter()
                .map(|r| (r.episodes[e].cumulative_reward - m).powi(2))
                .sum::<f64>()
                / k;
            mean.push(m);
            std.push(var.sqrt());
        }
        let value = runs.iter().map(LearningRun::value).sum::<f64>() / k;
        let step = runs.iter().map(LearningRun::mean_steps).sum::<f64>() / k;
        Ok(Self {
            label: label.into(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            mean,
            std,
            value,
            step,
        })
    }

    pub fn aggregate_csv(&self) -> Vec<u8> {
        csv_bytes(
            &AGGREGATE_HEADER,
            self.mean
                .iter()
                .zip(&self.std)
                .enumerate()
                .map(|(e, (m, s))| vec![e.to_string(), m.to_string(), s.to_string()]),
        )
    }

    pub fn summary_csv(&self) -> Vec<u8> {
        let seeds: Vec<String> = self.seeds.iter().map(ToString::to_string).collect();
        csv_bytes(
            &SUMMARY_HEADER,
            [vec![
                self.label.clone(),
                seeds.join(" "),
                self.mean.len().to_string(),
                format!("{:.3}", self.value),
                format!("{:.1}", self.step),
            ]],
        )
    }
}

pub fn per_seed_csv(run: &LearningRun) -> Vec<u8> {
    csv_bytes(
        &PER_SEED_HEADER,
        run.episodes.iter().enumerate().map(|(e, r)| {
            vec![
                e.to_string(),
                run.seed.to_string(),
                r.cumulative_reward.to_string(),
                r.steps.to_string(),
            ]
        }),
    )
}

/// Everything one `train` invocation produced.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub runs: Vec<LearningRun>,
    pub aggregate: AggregateResult,
}

fn map_seeds<T: Send>(seeds: &[u64], f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        seeds.par_iter().map(|&s| f(s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        seeds.iter().map(|&s| f(s)).collect()
    }
}

/// Trains one learner per seed on prebuilt options. Seeds run in parallel
/// when the `parallel` feature is on; results keep the seed order.
pub fn run_seeds(cfg: &ExperimentConfig, task: &GridTask, options: &TaskOptions) -> Result<Experiment, HarnessError> {
    let results = map_seeds(&cfg.run.seeds, |seed| {
        train(task, options, cfg.learner.kind, cfg.learner_config(seed)).map_err(|e| (seed, e))
    });
    let total = results.len();
    let mut runs = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(f) => failures.push(f),
        }
    }
    if !failures.is_empty() {
        return Err(HarnessError::RunsFailed { total, failures });
    }
    let aggregate = AggregateResult::from_runs(cfg.label(), &runs)?;
    Ok(Experiment { runs, aggregate })
}

fn grid_task(cfg: &ExperimentConfig) -> Result<GridTask, HarnessError> {
    match cfg.load_task()? {
        LoadedTask::Grid(t) => Ok(t),
        LoadedTask::Graphs(_) => Err(HarnessError::Config("training needs a map, not edge lists".into())),
    }
}

/// Builds options and trains every configured seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    let task = grid_task(cfg)?;
    let groups = cfg.groups(&task)?;
    let options = build_task_options(&task, &groups, &cfg.option_setup())?;
    info!(
        "{}: {} group(s), {} option(s) per group",
        cfg.label(),
        options.groups.len(),
        options
            .groups
            .iter()
            .map(|g| g.multi.len() + g.single.first().map_or(0, Vec::len))
            .max()
            .unwrap_or(0)
    );
    run_seeds(cfg, &task, &options)
}

/// [`run_experiment`], then writes the per-seed, aggregate and summary CSVs
/// into `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<Experiment, HarnessError> {
    let exp = run_experiment(cfg)?;
    write_experiment(&exp, out)?;
    Ok(exp)
}

pub fn write_experiment(exp: &Experiment, out: &Path) -> Result<(), HarnessError> {
    for run in &exp.runs {
        write_file(&out.join(format!("seed_{}.csv", run.seed)), &per_seed_csv(run))?;
    }
    write_file(&out.join("aggregate.csv"), &exp.aggregate.aggregate_csv())?;
    write_file(&out.join("summary.csv"), &exp.aggregate.summary_csv())
}

/// Reads an `episode,mean,std` file.
pub fn read_aggregate(path: &Path, label: impl Into<String>) -> Result<Series, HarnessError> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(AGGREGATE_HEADER) {
        return Err(HarnessError::SchemaMismatch {
            path: path.to_path_buf(),
            expected: AGGREGATE_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut mean = Vec::new();
    let mut std = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64, HarnessError> {
            rec.get(i)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| HarnessError::SchemaMismatch {
                    path: path.to_path_buf(),
                    expected: "numeric mean and std".into(),
                    found: rec.iter().collect::<Vec<_>>().join(","),
                })
        };
        mean.push(num(1)?);
        std.push(num(2)?);
    }
    if mean.is_empty() {
        return Err(HarnessError::EmptyCsv(path.to_path_buf()));
    }
    Ok(Series {
        label: label.into(),
        mean,
        std,
    })
}

/// Default legend entry: the file's directory name, or its stem.
pub fn default_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if stem == "aggregate" {
        if let Some(dir) = path.parent().and_then(Path::file_name) {
            return dir.to_string_lossy().into_owned();
        }
    }
    stem
}

/// Renders aggregate CSVs into one SVG. `labels` may be shorter than
/// `inputs`; missing entries fall back to [`default_label`].
pub fn cmd_plot(inputs: &[PathBuf], labels: &[String], out: &Path) -> Result<(), HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("plot needs at least one CSV".into()));
    }
    let series = inputs
        .iter()
        .enumerate()
        .map(|(i, p)| read_aggregate(p, labels.get(i).cloned().unwrap_or_else(|| default_label(p))))
        .collect::<Result<Vec<_>, _>>()?;
    let episodes = series[0].mean.len();
    if let Some(s) = series.iter().find(|s| s.mean.len() != episodes) {
        return Err(HarnessError::Config(format!(
            "series {:?} has {} episodes, expected {episodes}",
            s.label,
            s.mean.len()
        )));
    }
    write_file(out, render_svg(&series, "cumulative reward").as_bytes())
}

/// Ids accepted by [`cmd_reproduce`].
pub const TABLES: [&str; 2] = ["fourroom-2agent", "fourroom-3x2"];

/// Shipped configuration behind a table id.
pub fn table_config(id: &str) -> Result<ExperimentConfig, HarnessError> {
    let text = match id {
        "fourroom-2agent" => include_str!("../../configs/fourroom_2agent.toml"),
        "fourroom-3x2" => include_str!("../../configs/fourroom_3x2.toml"),
        _ => return Err(HarnessError::UnknownTable(id.to_string())),
    };
    let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    cfg.task.map = None;
    cfg.task.builtin = Some(id.to_string());
    cfg.validate()?;
    Ok(cfg)
}

/// Seed and episode overrides from the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub seeds: Option<Vec<u64>>,
    pub episodes: Option<usize>,
}

impl RunOverrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), HarnessError> {
        if let Some(s) = &self.seeds {
            cfg.run.seeds = s.clone();
        }
        if let Some(e) = self.episodes {
            cfg.run.episodes = e;
        }
        cfg.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub source: OptionSource,
    pub experiment: Experiment,
}

impl TableRow {
    pub fn name(&self) -> &'static str {
        match self.source {
            OptionSource::Multi => "Multiple",
            OptionSource::Single => "Single",
            OptionSource::None => "No options",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReproducedTable {
    pub id: String,
    pub learner: String,
    pub seeds: usize,
    pub episodes: usize,
    /// Multiple, Single, No options.
    pub rows: Vec<TableRow>,
}

impl ReproducedTable {
    pub fn row(&self, source: OptionSource) -> &TableRow {
        self.rows
            .iter()
            .find(|r| r.source == source)
            .expect("every source is run")
    }
}

impl fmt::Display for ReproducedTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} ({}, {} seeds x {} episodes)",
            self.id, self.learner, self.seeds, self.episodes
        )?;
        writeln!(f, "{:<12} {:>7} {:>7}", "", "Value", "Step")?;
        for r in &self.rows {
            let a = &r.experiment.aggregate;
            writeln!(f, "{:<12} {:>7.3} {:>7.1}", r.name(), a.value, a.step)?;
        }
        Ok(())
    }
}

/// Runs the table's bundle with multi-agent, single-agent and no options.
/// With `out`, each row's CSVs go to `out/<source>/`.
pub fn cmd_reproduce(id: &str, overrides: &RunOverrides, out: Option<&Path>) -> Result<ReproducedTable, HarnessError> {
    let mut base = table_config(id)?;
    overrides.apply(&mut base)?;
    let task = grid_task(&base)?;
    let groups = base.groups(&task)?;
    let mut rows = Vec::new();
    for source in [OptionSource::Multi, OptionSource::Single, OptionSource::None] {
        let mut cfg = base.clone();
        cfg.options.source = source;
        cfg.run.label = Some(format!("{}+{}", cfg.learner.kind.name(), source.name()));
        let options = build_task_options(&task, &groups, &cfg.option_setup())?;
        let experiment = run_seeds(&cfg, &task, &options)?;
        info!("{id} {}: value {:.3}", source.name(), experiment.aggregate.value);
        if let Some(dir) = out {
            write_experiment(&experiment, &dir.join(source.name()))?;
        }
        rows.push(TableRow { source, experiment });
    }
    Ok(ReproducedTable {
        id: id.to_string(),
        learner: base.learner.kind.name().to_string(),
        seeds: base.run.seeds.len(),
        episodes: base.run.episodes,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{EpisodeRecord, LearnerKind};

    fn run(seed: u64, rewards: &[f64]) -> LearningRun {
        LearningRun {
            seed,
            kind: LearnerKind::Random,
            source: OptionSource::None,
            episodes: rewards
                .iter()
                .map(|&r| EpisodeRecord {
                    cumulative_reward: r,
                    steps: 10,
                })
                .collect(),
        }
    }

    #[test]
    fn aggregate_uses_population_std() {
        let a = AggregateResult::from_runs("x", &[run(0, &[0.0, 1.0]), run(1, &[1.0, 1.0])]).unwrap();
        assert_eq!(a.mean, vec![0.5, 1.0]);
        assert_eq!(a.std, vec![0.5, 0.0]);
        assert_eq!(a.value, 0.75);
        assert_eq!(a.step, 10.0);
        assert_eq!(
            String::from_utf8(a.aggregate_csv()).unwrap(),
            "episode,mean,std\n0,0.5,0.5\n1,1,0\n"
        );
    }

    #[test]
    fn aggregate_refuses_ragged_or_empty_input() {
        assert!(AggregateResult::from_runs("x", &[]).is_err());
        assert!(AggregateResult::from_runs("x", &[run(0, &[0.0]), run(1, &[0.0, 1.0])]).is_err());
    }

    #[test]
    fn builtin_maps_parse() {
        for name in builtin_map_names() {
            GridTask::parse(builtin_map(name).unwrap()).unwrap();
        }
    }

    #[test]
    fn table_ids() {
        for id in TABLES {
            table_config(id).unwrap();
        }
        let err = table_config("fourroom-9agent").unwrap_err();
        assert!(matches!(err, HarnessError::UnknownTable(_)));
        assert_eq!(err.exit_code(), 1);
    }
}
