mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use vesseltree::eikonal::BacktrackParams;
use vesseltree::graph::{
    build_vessel_trees, cluster_landmarks, minimal_spanning_tree, pairwise_distances, pairwise_distances_with_maps,
    DistanceMatrix, UnionFind,
};
use vesseltree::grid::{GridSpec, LiftedField};
use vesseltree::metric::{cost_from_score, CostField};
use vesseltree::types::{LiftedLandmark, MetricParams};
use vesseltree::Error;

#[test]
fn single_node_matrix() {
    let spec = GridSpec::new(8, 8, 4).unwrap();
    let cost = CostField::uniform(spec, 1.0).unwrap();
    let p = MetricParams::new(1.0, 1.0, 1e3).unwrap();
    let m = pairwise_distances(&cost, &p, &[LiftedLandmark::at(3.0, 3.0, 0.0)]).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m.get(0, 0), 0.0);
    assert_eq!(m.to_csv(), "node,0\n0,0\n");
}

#[test]
fn flat_pair_distance() {
    let spec = GridSpec::new(20, 20, 8).unwrap();
    let cost = CostField::uniform(spec, 1.0).unwrap();
    let p = MetricParams::new(1.0, 1.0, 1e3).unwrap();
    let nodes = [LiftedLandmark::at(4.0, 4.0, 0.0), LiftedLandmark::at(7.0, 8.0, 0.0)];
    let m = pairwise_distances(&cost, &p, &nodes).unwrap();
    assert!((m.get(0, 1) - 5.0).abs() <= 0.1);
    assert_eq!(m.get(0, 1), m.get(1, 0));
}

#[test]
fn ridge_versus_barrier() {
    let spec = GridSpec::new(40, 24, 8).unwrap();
    let w = LiftedField::from_fn(spec, |_, j, _| if j == 5 { 1.0 } else { 0.0 });
    let p = MetricParams {
        epsilon: 0.1,
        ..MetricParams::defaults_for(&spec)
    };
    let cost = cost_from_score(&w, &p);
    let nodes = [
        LiftedLandmark::at(5.0, 5.0, 0.0),
        LiftedLandmark::at(35.0, 5.0, 0.0),
        LiftedLandmark::at(5.0, 18.0, 0.0),
        LiftedLandmark::at(35.0, 18.0, 0.0),
    ];
    let m = pairwise_distances(&cost, &p, &nodes).unwrap();
    let ridge = m.get(0, 1);
    let barrier = m.get(2, 3);
    assert!(ridge < 30.0 / (1.0 + p.lambda) * 1.1, "{ridge}");
    assert!(barrier >= 100.0 * ridge, "{barrier} vs {ridge}");
}

#[test]
fn matrix_csv_marks_infinite() {
    let m = DistanceMatrix::from_rows(vec![vec![0.0, f64::INFINITY], vec![f64::INFINITY, 0.0]]).unwrap();
    assert_eq!(m.to_csv(), "node,0,1\n0,0,inf\n1,inf,0\n");
    assert!(matches!(minimal_spanning_tree(&m, &[0, 1]), Err(Error::InfeasibleCluster(0, 1))));
}

fn straight_vessel() -> (CostField, MetricParams) {
    let spec = GridSpec::new(48, 24, 16).unwrap();
    // A horizontal vessel along y = 12, oriented at θ = 0 with a soft angular profile.
    let w = LiftedField::from_fn(spec, |_, j, k| {
        let dy = j as f64 - 12.0;
        let dt = vesseltree::angular_distance(spec.theta(k), 0.0);
        (-dy * dy / 4.0).exp() * (-dt * dt / 0.1).exp()
    });
    let p = MetricParams {
        epsilon: 0.1,
        ..MetricParams::defaults_for(&spec)
    };
    (cost_from_score(&w, &p), p)
}

#[test]
fn two_nodes_on_a_vessel() {
    let (cost, p) = straight_vessel();
    let nodes = [LiftedLandmark::at(4.0, 12.0, 0.0), LiftedLandmark::at(42.0, 12.0, 0.0)];
    let (m, cache) = pairwise_distances_with_maps(&cost, &p, &nodes, 2).unwrap();
    assert_eq!(cache.len(), 2);
    let c = cluster_landmarks(&m, 1.0).unwrap();
    let report = build_vessel_trees(&cost, &p, &m, &c, &cache, &BacktrackParams::default()).unwrap();
    assert_eq!(report.clusters.len(), 1);
    let edges = &report.clusters[0].edges;
    assert_eq!(edges.len(), 1);
    assert!(report.degraded.is_empty());
    let line = [[4.0, 12.0], [42.0, 12.0]];
    let xy: Vec<[f64; 2]> = edges[0].polyline.iter().map(|q| [q[0], q[1]]).collect();
    assert!(hausdorff(&xy, &line) <= 2.0);
}

#[test]
fn collinear_nodes_form_a_path() {
    let (cost, p) = straight_vessel();
    let nodes: Vec<LiftedLandmark> = [4.0, 16.0, 28.0, 40.0].iter().map(|&x| LiftedLandmark::at(x, 12.0, 0.0)).collect();
    // Shuffled order must not matter.
    let order = [2usize, 0, 3, 1];
    let shuffled: Vec<LiftedLandmark> = order.iter().map(|&i| nodes[i]).collect();
    let m = pairwise_distances(&cost, &p, &shuffled).unwrap();
    for (a, &i) in order.iter().enumerate() {
        for (b, &j) in order.iter().enumerate() {
            let gap = (i as isize - j as isize).abs();
            if gap == 1 {
                for (c, &k) in order.iter().enumerate() {
                    if (k as isize - i as isize).abs() > 1 {
                        assert!(m.get(a, b) < m.get(a, c));
                    }
                }
            }
        }
    }
    let c = cluster_landmarks(&m, 1.0).unwrap();
    let report = build_vessel_trees(&cost, &p, &m, &c, &Default::default(), &BacktrackParams::default()).unwrap();
    let pairs: BTreeSet<(usize, usize)> = report.clusters[0]
        .edges
        .iter()
        .map(|e| {
            let (x, y) = (order[e.i], order[e.j]);
            (x.min(y), x.max(y))
        })
        .collect();
    assert_eq!(pairs, BTreeSet::from([(0, 1), (1, 2), (2, 3)]));
}

#[test]
fn empty_nodes_empty_output() {
    let (cost, p) = straight_vessel();
    let (m, cache) = pairwise_distances_with_maps(&cost, &p, &[], 4).unwrap();
    assert!(m.is_empty() && cache.is_empty());
    let c = cluster_landmarks(&m, 1.0).unwrap();
    assert_eq!(c.n_clusters(), 0);
    let report = build_vessel_trees(&cost, &p, &m, &c, &cache, &BacktrackParams::default()).unwrap();
    assert!(report.clusters.is_empty());
    assert_eq!(serde_json::to_string(&report).unwrap(), r#"{"clusters":[]}"#);
}

#[test]
fn twin_crossing_nodes_stay_apart() {
    // Two perpendicular vessels meeting at the center: twins at the crossing
    // join the vessel matching their orientation.
    let spec = GridSpec::new(41, 41, 16).unwrap();
    let w = LiftedField::from_fn(spec, |i, j, k| {
        let th = spec.theta(k);
        let h = (-((j as f64 - 20.0).powi(2)) / 3.0).exp() * (-vesseltree::angular_distance(th, 0.0).powi(2) / 0.05).exp();
        let v = (-((i as f64 - 20.0).powi(2)) / 3.0).exp()
            * (-vesseltree::angular_distance(th, PI / 2.0).powi(2) / 0.05).exp();
        h.max(v)
    });
    let p = MetricParams {
        epsilon: 0.1,
        ..MetricParams::defaults_for(&spec)
    };
    let cost = cost_from_score(&w, &p);
    let nodes = [
        LiftedLandmark::at(3.0, 20.0, 0.0),
        LiftedLandmark::at(20.0, 20.0, 0.0),
        LiftedLandmark::at(20.0, 3.0, PI / 2.0),
        LiftedLandmark::at(20.0, 20.0, PI / 2.0),
    ];
    let m = pairwise_distances(&cost, &p, &nodes).unwrap();
    assert!(m.get(0, 1) < 0.2 * m.get(0, 3), "{} {}", m.get(0, 1), m.get(0, 3));
    assert!(m.get(2, 3) < 0.2 * m.get(2, 1), "{} {}", m.get(2, 3), m.get(2, 1));
}

fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..9).prop_flat_map(|n| {
        proptest::collection::vec(0.1f64..10.0, n * (n - 1) / 2).prop_map(move |upper| {
            let mut m = vec![vec![0.0; n]; n];
            let mut it = upper.into_iter();
            for i in 0..n {
                for j in i + 1..n {
                    let v = it.next().unwrap();
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            m
        })
    })
}

fn partition(labels: &[usize]) -> BTreeSet<BTreeSet<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    (0..k)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect()
}

proptest! {
    #[test]
    fn clustering_scale_invariant(m in matrix_strategy(), s in 0.5f64..8.0, alpha in 0.1f64..10.0) {
        let a = cluster_landmarks(&DistanceMatrix::from_rows(m.clone()).unwrap(), s).unwrap();
        let scaled: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v * alpha).collect()).collect();
        let b = cluster_landmarks(&DistanceMatrix::from_rows(scaled).unwrap(), s * alpha).unwrap();
        prop_assert_eq!(partition(&a.labels), partition(&b.labels));
    }

    #[test]
    fn clustering_permutation_invariant(m in matrix_strategy(), s in 0.5f64..8.0, rot in 0usize..8) {
        let n = m.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let pm: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[perm[i]][perm[j]]).collect()).collect();
        let a = cluster_landmarks(&DistanceMatrix::from_rows(m).unwrap(), s).unwrap();
        let b = cluster_landmarks(&DistanceMatrix::from_rows(pm).unwrap(), s).unwrap();
        let mapped: BTreeSet<BTreeSet<usize>> = partition(&b.labels)
            .into_iter()
            .map(|c| c.into_iter().map(|i| perm[i]).collect())
            .collect();
        prop_assert_eq!(partition(&a.labels), mapped);
        // ids are ordered by smallest member
        let firsts: Vec<usize> = (0..a.n_clusters()).map(|c| a.members(c)[0]).collect();
        prop_assert!(firsts.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn raising_threshold_never_splits(m in matrix_strategy(), s in 0.5f64..8.0, ds in 0.0f64..4.0) {
        let dm = DistanceMatrix::from_rows(m).unwrap();
        let lo = cluster_landmarks(&dm, s).unwrap();
        let hi = cluster_landmarks(&dm, s + ds).unwrap();
        prop_assert!(hi.n_clusters() <= lo.n_clusters());
    }

    #[test]
    fn mst_spans_without_cycles(m in matrix_strategy()) {
        let n = m.len();
        let dm = DistanceMatrix::from_rows(m).unwrap();
        let members: Vec<usize> = (0..n).collect();
        let tree = minimal_spanning_tree(&dm, &members).unwrap();
        prop_assert_eq!(tree.len(), n - 1);
        let mut uf = UnionFind::new(n);
        for e in &tree {
            prop_assert!(uf.union(e.i, e.j), "cycle through {}-{}", e.i, e.j);
        }
    }

    #[test]
    fn mst_weight_ignores_tie_order(m in matrix_strategy(), rot in 0usize..8) {
        let n = m.len();
        let rounded: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v.round()).collect()).collect();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let pm: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| rounded[perm[i]][perm[j]]).collect()).collect();
        let members: Vec<usize> = (0..n).collect();
        let total = |rows: Vec<Vec<f64>>| -> f64 {
            minimal_spanning_tree(&DistanceMatrix::from_rows(rows).unwrap(), &members).unwrap().iter().map(|e| e.weight).sum()
        };
        prop_assert!((total(rounded) - total(pm)).abs() < 1e-9);
    }
}
