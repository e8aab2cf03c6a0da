use serde::Serialize;

use super::dsu::UnionFind;
use super::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Kruskal over the complete graph on `members`; equal weights are taken in
/// lexicographic `(i, j)` order.
pub fn minimal_spanning_tree(matrix: &DistanceMatrix, members: &[usize]) -> Result<Vec<TreeEdge>> {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut edges = Vec::with_capacity(sorted.len() * sorted.len().saturating_sub(1) / 2);
    for (a, &i) in sorted.iter().enumerate() {
        for &j in &sorted[a + 1..] {
            let w = matrix.get(i, j);
            if !w.is_finite() {
                return Err(Error::InfeasibleCluster(i, j));
            }
            edges.push(TreeEdge { i, j, weight: w });
        }
    }
    edges.sort_by(|a, b| a.weight.total_cmp(&b.weight).then(a.i.cmp(&b.i)).then(a.j.cmp(&b.j)));

    let local = |v: usize| sorted.binary_search(&v).expect("member index");
    let mut uf = UnionFind::new(sorted.len());
    let mut tree = Vec::with_capacity(sorted.len().saturating_sub(1));
    for e in edges {
        if uf.union(local(e.i), local(e.j)) {
            tree.push(e);
            if tree.len() + 1 == sorted.len() {
                break;
            }
        }
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let m = DistanceMatrix::from_rows(vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 2.0], vec![3.0, 2.0, 0.0]]).unwrap();
        let t = minimal_spanning_tree(&m, &[0, 1, 2]).unwrap();
        let pairs: Vec<(usize, usize)> = t.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        let two = minimal_spanning_tree(&m, &[2, 0]).unwrap();
        assert_eq!(two, vec![TreeEdge { i: 0, j: 2, weight: 3.0 }]);
        assert!(minimal_spanning_tree(&m, &[1]).unwrap().is_empty());
    }

    #[test]
    fn ties_follow_index_order() {
        let m = DistanceMatrix::from_rows(vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]]).unwrap();
        let pairs: Vec<(usize, usize)> = minimal_spanning_tree(&m, &[0, 1, 2]).unwrap().iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn infinite_member_pair() {
        let inf = f64::INFINITY;
        let m = DistanceMatrix::from_rows(vec![vec![0.0, inf], vec![inf, 0.0]]).unwrap();
        assert!(matches!(minimal_spanning_tree(&m, &[0, 1]), Err(Error::InfeasibleCluster(0, 1))));
    }
}
