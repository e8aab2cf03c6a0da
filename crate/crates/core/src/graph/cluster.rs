use serde::Serialize;

use super::dsu::UnionFind;
use super::DistanceMatrix;
use crate::error::{Error, Result};

/// One agglomeration step of the single-linkage hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

/// Single-linkage merges in non-decreasing height order (n-1 entries when
/// every pair is finite).
pub fn single_linkage(matrix: &DistanceMatrix) -> Vec<Merge> {
    let n = matrix.len();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = matrix.get(i, j);
            if d.is_finite() {
                edges.push((d, i, j));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut uf = UnionFind::new(n);
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for (d, i, j) in edges {
        let (ri, rj) = (uf.find(i), uf.find(j));
        if ri != rj {
            uf.union(ri, rj);
            merges.push(Merge {
                a: ri.min(rj),
                b: ri.max(rj),
                height: d,
            });
        }
    }
    merges
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    /// Cluster id per node; ids are ordered by smallest member index.
    pub labels: Vec<usize>,
    pub threshold: f64,
}

impl Clustering {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }
}

/// Cuts the single-linkage hierarchy below `s_cluster`: nodes end up together
/// iff a chain of hops shorter than `s_cluster` links them.
pub fn cluster_landmarks(matrix: &DistanceMatrix, s_cluster: f64) -> Result<Clustering> {
    if !(s_cluster > 0.0) {
        return Err(Error::Config(format!("s_cluster must be positive, got {s_cluster}")));
    }
    let n = matrix.len();
    let mut uf = UnionFind::new(n);
    for m in single_linkage(matrix) {
        if m.height >= s_cluster {
            break;
        }
        uf.union(m.a, m.b);
    }
    let mut root_label = vec![usize::MAX; n];
    let mut labels = vec![0; n];
    let mut next = 0;
    for i in 0..n {
        let r = uf.find(i);
        if root_label[r] == usize::MAX {
            root_label[r] = next;
            next += 1;
        }
        labels[i] = root_label[r];
    }
    Ok(Clustering {
        labels,
        threshold: s_cluster,
    })
}
