use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use macov::graph::{algebraic_connectivity, fiedler_with, laplacian, normalized_laplacian, LaplacianKind};
use macov::linalg::{sym_eig, Matrix};
use macov::FactorGraph;

fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn sym_matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0f64..5.0, n * n).prop_map(move |raw| {
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = raw[i * n + j];
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        Matrix::from_rows(&rows)
    })
}

fn random_graph() -> impl Strategy<Value = FactorGraph> {
    (2usize..10).prop_flat_map(|n| {
        prop::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let mut g = FactorGraph::new(n);
            let mut k = 0;
            for i in 0..n {
                for j in (i + 1)..n {
                    if bits[k] {
                        g.add_edge(i, j).unwrap();
                    }
                    k += 1;
                }
            }
            g
        })
    })
}

/// Union-find component count.
fn components(g: &FactorGraph) -> usize {
    let n = g.n_nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (u, v) in g.edges() {
        let (a, b) = (root(&mut parent, u), root(&mut parent, v));
        parent[a] = b;
    }
    (0..n).filter(|&x| root(&mut parent, x) == x).count()
}

proptest! {
    #[test]
    fn eigenvalues_agree_with_nalgebra(m in (1usize..9).prop_flat_map(sym_matrix)) {
        let ours = sym_eig(&m).unwrap();
        let mut theirs: Vec<f64> = SymmetricEigen::new(to_nalgebra(&m)).eigenvalues.iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.values.iter().zip(&theirs) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        for k in 0..ours.len() {
            let v = ours.vector(k);
            let mv = m.mul_vec(v);
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
            for (x, y) in mv.iter().zip(v) {
                prop_assert!((x - ours.values[k] * y).abs() < 1e-8);
            }
            let first = v.iter().find(|x| x.abs() > 1e-10).copied().unwrap_or(1.0);
            prop_assert!(first > 0.0);
        }
    }

    #[test]
    fn lambda2_detects_connectivity(g in random_graph()) {
        let connected = components(&g) == 1;
        let l2 = algebraic_connectivity(&g).unwrap();
        prop_assert_eq!(l2 > 1e-9, connected, "lambda2 = {}", l2);
        prop_assert_eq!(g.n_components(), components(&g));
    }

    #[test]
    fn laplacian_rows_sum_to_zero(g in random_graph()) {
        let l = laplacian(&g);
        for i in 0..g.n_nodes() {
            let s: f64 = l.row(i).iter().sum();
            prop_assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn normalized_spectrum_lies_in_unit_interval_doubled(g in random_graph()) {
        prop_assume!(g.degrees().iter().all(|&d| d > 0));
        let s = sym_eig(&normalized_laplacian(&g).unwrap()).unwrap();
        prop_assert!(s.values[0].abs() < 1e-9);
        for v in &s.values {
            prop_assert!(*v > -1e-9 && *v < 2.0 + 1e-9);
        }
    }
}

#[test]
fn printed_fiedler_values_for_small_graphs() {
    let (l, _) = fiedler_with(&FactorGraph::path(4), LaplacianKind::Normalized).unwrap();
    assert_abs_diff_eq!(l, 0.5, epsilon = 1e-9);
    let (l, _) = fiedler_with(&FactorGraph::cycle(6), LaplacianKind::Combinatorial).unwrap();
    assert_abs_diff_eq!(l, 1.0, epsilon = 1e-9);
    let (l, _) = fiedler_with(&FactorGraph::complete(5), LaplacianKind::Combinatorial).unwrap();
    assert_abs_diff_eq!(l, 5.0, epsilon = 1e-9);
}
