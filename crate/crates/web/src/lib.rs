// Build: wasm-pack build crates/web --target web --out-dir www/pkg
//
// Every export takes plain text and returns a JSON string, so the page needs
// no bindings beyond the generated glue.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use macov::env::{adjacency_from_map, make_groups, GridTask, GroupMode};
use macov::graph::{fiedler_with, laplacian_spectrum, LaplacianKind};
use macov::kron::FactorSpectrumSet;
use macov::learners::{group_graphs, OptionSetup, OptionSource};
use macov::options::{discover_with, DiscoveryConfig};
use macov::policy::TransitionModel;
use macov::FactorGraph;

/// Largest explicit product graph the spectrum view will diagonalize.
pub const MAX_PRODUCT_NODES: usize = 144;

#[derive(Serialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub lambda2: f64,
    /// `[row, col, value]` for every free cell.
    pub cells: Vec<(usize, usize, f64)>,
    pub argmin: (usize, usize),
    pub argmax: (usize, usize),
}

#[derive(Serialize)]
pub struct RoundView {
    pub candidates: Vec<(f64, Vec<usize>)>,
    /// Target cells per agent, `[[row, col], ...]` per joint state.
    pub min: Vec<Vec<(usize, usize)>>,
    pub max: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize)]
pub struct GroupView {
    pub agents: Vec<usize>,
    pub rounds: Vec<RoundView>,
    pub options: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize)]
pub struct SpectrumView {
    pub estimated: Vec<f64>,
    pub exact: Vec<f64>,
    pub max_abs_error: f64,
}

fn parse_map(text: &str) -> Result<GridTask, String> {
    GridTask::parse(text).map_err(|e| e.to_string())
}

pub fn heatmap(map: &str) -> Result<Heatmap, String> {
    let task = parse_map(map)?;
    let g = adjacency_from_map(&task.map).map_err(|e| e.to_string())?;
    let (lambda2, f) = fiedler_with(&g, LaplacianKind::Normalized).map_err(|e| e.to_string())?;
    let (lo, hi) = macov::graph::argmin_argmax(&f);
    Ok(Heatmap {
        width: task.map.width(),
        height: task.map.height(),
        lambda2,
        cells: f
            .iter()
            .enumerate()
            .map(|(s, &v)| {
                let (r, c) = task.map.cell(s);
                (r, c, v)
            })
            .collect(),
        argmin: task.map.cell(lo),
        argmax: task.map.cell(hi),
    })
}

pub fn discovery(map: &str, tot_num: usize) -> Result<Vec<GroupView>, String> {
    let task = parse_map(map)?;
    let groups = make_groups(&task.goal_ids, GroupMode::Subtask, 2, 0).map_err(|e| e.to_string())?;
    let setup = OptionSetup {
        source: OptionSource::Multi,
        tot_num,
        ..OptionSetup::default()
    };
    let cells = |joint: &Vec<usize>| joint.iter().map(|&s| task.map.cell(s)).collect::<Vec<_>>();
    let mut out = Vec::new();
    for agents in groups {
        let (graphs, known) = group_graphs(&task, &agents, &setup).map_err(|e| e.to_string())?;
        let models: Vec<&dyn TransitionModel> = vec![&task.map; agents.len()];
        let cfg = DiscoveryConfig {
            tot_num,
            selection: setup.selection,
            kron: setup.kron,
        };
        let d = discover_with(&graphs, &models, &cfg, &known).map_err(|e| e.to_string())?;
        out.push(GroupView {
            agents,
            rounds: d
                .rounds
                .iter()
                .map(|r| RoundView {
                    candidates: r.candidates.iter().map(|c| (c.mu, c.multi_index.clone())).collect(),
                    min: r.min_states.iter().map(cells).collect(),
                    max: r.max_states.iter().map(cells).collect(),
                })
                .collect(),
            options: d.options.iter().map(|o| cells(&o.target)).collect(),
        });
    }
    Ok(out)
}

/// Estimated product spectrum against the exact Laplacian spectrum of the
/// explicit Kronecker product graph.
pub fn spectrum(edges_a: &str, edges_b: &str) -> Result<SpectrumView, String> {
    let a = FactorGraph::parse_edge_list(edges_a).map_err(|e| format!("first graph: {e}"))?;
    let b = FactorGraph::parse_edge_list(edges_b).map_err(|e| format!("second graph: {e}"))?;
    let n = a.n_nodes() * b.n_nodes();
    if n > MAX_PRODUCT_NODES {
        return Err(format!("product has {n} nodes; the demo stops at {MAX_PRODUCT_NODES}"));
    }
    let set = FactorSpectrumSet::from_graphs(&[a.clone(), b.clone()]).map_err(|e| e.to_string())?;
    let mut estimated: Vec<f64> = (0..a.n_nodes())
        .flat_map(|i| (0..b.n_nodes()).map(move |j| (i, j)))
        .map(|(i, j)| set.mu(&[i, j]))
        .collect();
    estimated.sort_by(f64::total_cmp);
    let exact = laplacian_spectrum(&a.kron(&b), LaplacianKind::Combinatorial)
        .map_err(|e| e.to_string())?
        .values;
    let max_abs_error = estimated
        .iter()
        .zip(&exact)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(SpectrumView {
        estimated,
        exact,
        max_abs_error,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// Text of a shipped map, for seeding the editor.
#[wasm_bindgen]
pub fn builtin_map(name: &str) -> Option<String> {
    macov::harness::builtin_map(name).map(str::to_string)
}

#[wasm_bindgen]
pub fn fiedler_heatmap(map: &str) -> Result<String, JsValue> {
    to_js(heatmap(map))
}

#[wasm_bindgen]
pub fn discover(map: &str, tot_num: usize) -> Result<String, JsValue> {
    to_js(discovery(map, tot_num))
}

#[wasm_bindgen]
pub fn joint_spectrum(edges_a: &str, edges_b: &str) -> Result<String, JsValue> {
    to_js(spectrum(edges_a, edges_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROOM: &str = "#######\n#A....#\n#.....#\n#....0#\n#######\n";

    #[test]
    fn heatmap_extremes_sit_at_opposite_ends() {
        let h = heatmap(ROOM).unwrap();
        assert_eq!(h.cells.len(), 15);
        assert!(h.lambda2 > 0.0);
        let mut ends = [h.argmin.1, h.argmax.1];
        ends.sort_unstable();
        assert_eq!(ends, [1, 5]);
    }

    #[test]
    fn regular_factors_give_exact_spectrum() {
        let c4 = "n 4\n0 1\n1 2\n2 3\n0 3\n";
        let k3 = "n 3\n0 1\n1 2\n0 2\n";
        let s = spectrum(c4, k3).unwrap();
        assert_eq!(s.estimated.len(), 12);
        assert!(s.max_abs_error < 1e-8, "{}", s.max_abs_error);
    }

    #[test]
    fn oversized_product_is_refused() {
        let p13 = (0..12).map(|i| format!("{i} {}\n", i + 1)).collect::<String>();
        let text = format!("n 13\n{p13}");
        assert!(spectrum(&text, &text).is_err());
    }

    #[test]
    fn discovery_reports_rounds() {
        let groups = discovery("#######\n#AB...#\n#.....#\n#...00#\n#######\n", 4).unwrap();
        assert_eq!(groups.len(), 1);
        assert!(groups[0].options.len() >= 4);
        assert!(!groups[0].rounds.is_empty());
    }
}
