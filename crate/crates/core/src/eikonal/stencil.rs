//! Triangulated box stencils for the semi-Lagrangian update.
//!
//! Shell `r` is the boundary of the box `[-r, r]² × [-1, 1]` (spatial × angular
//! offsets). Each face is split into unit squares and each square into two
//! triangles; the negative faces are point reflections of the positive ones so
//! the stencil is symmetric.

use std::collections::HashMap;

use crate::grid::GridSpec;
use crate::metric::Tensor;
use crate::types::MetricParams;

pub(crate) type Offset = [i32; 3];

#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub offsets: Vec<Offset>,
    pub edges: Vec<[usize; 2]>,
    pub tris: Vec<[usize; 3]>,
    /// Edge indices incident to each offset.
    pub edges_of: Vec<Vec<usize>>,
    pub tris_of: Vec<Vec<usize>>,
    /// Index of the opposite offset.
    pub neg: Vec<usize>,
}

/// Spatial half-width of the stencil for a given anisotropy.
pub(crate) fn radius_for(epsilon: f64) -> usize {
    let ratio = 1.0 / epsilon;
    if ratio > 6.0 {
        3
    } else if ratio > 2.0 {
        2
    } else {
        1
    }
}

impl Stencil {
    pub fn new(radius: usize) -> Stencil {
        let mut index: HashMap<Offset, usize> = HashMap::new();
        let mut offsets: Vec<Offset> = Vec::new();
        let mut tris: Vec<[usize; 3]> = Vec::new();
        let mut id = |o: Offset, offsets: &mut Vec<Offset>| -> usize {
            *index.entry(o).or_insert_with(|| {
                offsets.push(o);
                offsets.len() - 1
            })
        };
        let mut push_square = |c: [Offset; 4], offsets: &mut Vec<Offset>, tris: &mut Vec<[usize; 3]>| {
            // corners: (u,v), (u+1,v), (u,v+1), (u+1,v+1); diagonal (u,v)-(u+1,v+1)
            for sign in [1, -1] {
                let m = |o: Offset| [o[0] * sign, o[1] * sign, o[2] * sign];
                let a = id(m(c[0]), offsets);
                let b = id(m(c[1]), offsets);
                let cc = id(m(c[2]), offsets);
                let d = id(m(c[3]), offsets);
                tris.push([a, b, d]);
                tris.push([a, d, cc]);
            }
        };
        for r in 1..=radius as i32 {
            // θ = +1 face (and its reflection θ = -1)
            for u in -r..r {
                for v in -r..r {
                    push_square([[u, v, 1], [u + 1, v, 1], [u, v + 1, 1], [u + 1, v + 1, 1]], &mut offsets, &mut tris);
                }
            }
            // x = +r face
            for v in -r..r {
                for t in -1..1 {
                    push_square([[r, v, t], [r, v + 1, t], [r, v, t + 1], [r, v + 1, t + 1]], &mut offsets, &mut tris);
                }
            }
            // y = +r face
            for u in -r..r {
                for t in -1..1 {
                    push_square([[u, r, t], [u + 1, r, t], [u, r, t + 1], [u + 1, r, t + 1]], &mut offsets, &mut tris);
                }
            }
        }

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        for t in &tris {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])] {
                let key = [a.min(b), a.max(b)];
                edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
            }
        }
        let n = offsets.len();
        let mut edges_of = vec![Vec::new(); n];
        for (e, &[a, b]) in edges.iter().enumerate() {
            edges_of[a].push(e);
            edges_of[b].push(e);
        }
        let mut tris_of = vec![Vec::new(); n];
        for (t, tri) in tris.iter().enumerate() {
            for &v in tri {
                tris_of[v].push(t);
            }
        }
        let lookup: HashMap<Offset, usize> = offsets.iter().enumerate().map(|(i, &o)| (o, i)).collect();
        let neg = offsets.iter().map(|o| lookup[&[-o[0], -o[1], -o[2]]]).collect();
        Stencil {
            offsets,
            edges,
            tris,
            edges_of,
            tris_of,
            neg,
        }
    }
}

/// Physical displacement of a grid offset.
pub(crate) fn physical(o: Offset, spec: &GridSpec) -> [f64; 3] {
    [
        o[0] as f64 * spec.spacing,
        o[1] as f64 * spec.spacing,
        o[2] as f64 * spec.theta_step(),
    ]
}

/// Unit-cost solve data for one vertex, edge or triangle at one orientation bin.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct VertexData {
    pub len: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct EdgeData {
    pub inv_q: f64,
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TriData {
    /// Symmetric inverse of AᵀMA: [a, b, c] for [[a, b], [b, c]].
    pub qinv: [f64; 3],
    pub r: [f64; 2],
    pub p: f64,
}

/// Stencil geometry pre-solved against the C = 1 metric for every θ bin.
#[derive(Debug, Clone)]
pub(crate) struct StencilTables {
    pub stencil: Stencil,
    pub vertex: Vec<VertexData>,
    pub edge: Vec<EdgeData>,
    pub tri: Vec<TriData>,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn neg(a: [f64; 3]) -> [f64; 3] {
    [-a[0], -a[1], -a[2]]
}

impl StencilTables {
    pub fn new(stencil: Stencil, spec: &GridSpec, params: &MetricParams) -> Self {
        let nt = spec.n_theta;
        let h = spec.theta_step();
        let phys: Vec<[f64; 3]> = stencil.offsets.iter().map(|&o| physical(o, spec)).collect();
        let tensor = |k: usize, mean_dk: f64| Tensor::at_orientation(spec.theta(k) + 0.5 * mean_dk * h, params);

        let mut vertex = Vec::with_capacity(nt * phys.len());
        let mut edge = Vec::with_capacity(nt * stencil.edges.len());
        let mut tri = Vec::with_capacity(nt * stencil.tris.len());
        for k in 0..nt {
            for (o, p) in stencil.offsets.iter().zip(&phys) {
                let m = tensor(k, o[2] as f64);
                vertex.push(VertexData { len: m.quad(*p).sqrt() });
            }
            for &[a, b] in &stencil.edges {
                let dk = 0.5 * (stencil.offsets[a][2] + stencil.offsets[b][2]) as f64;
                let m = tensor(k, dk);
                let bv = neg(phys[a]);
                let av = sub(phys[b], phys[a]);
                let q = m.quad(av);
                let r = m.dot(av, bv);
                let p2 = (m.quad(bv) - r * r / q).max(0.0);
                edge.push(EdgeData { inv_q: 1.0 / q, r, p: p2.sqrt() });
            }
            for t in &stencil.tris {
                let dk = t.iter().map(|&v| stencil.offsets[v][2] as f64).sum::<f64>() / 3.0;
                let m = tensor(k, dk);
                let bv = neg(phys[t[0]]);
                let a1 = sub(phys[t[1]], phys[t[0]]);
                let a2 = sub(phys[t[2]], phys[t[0]]);
                let (q11, q12, q22) = (m.quad(a1), m.dot(a1, a2), m.quad(a2));
                let det = q11 * q22 - q12 * q12;
                let qinv = [q22 / det, -q12 / det, q11 / det];
                let r = [m.dot(a1, bv), m.dot(a2, bv)];
                let rqr = qinv[0] * r[0] * r[0] + 2.0 * qinv[1] * r[0] * r[1] + qinv[2] * r[1] * r[1];
                let p2 = (m.quad(bv) - rqr).max(0.0);
                tri.push(TriData { qinv, r, p: p2.sqrt() });
            }
        }
        StencilTables {
            stencil,
            vertex,
            edge,
            tri,
        }
    }

    #[inline]
    pub fn vertex(&self, k: usize, v: usize) -> &VertexData {
        &self.vertex[k * self.stencil.offsets.len() + v]
    }

    #[inline]
    pub fn edge(&self, k: usize, e: usize) -> &EdgeData {
        &self.edge[k * self.stencil.edges.len() + e]
    }

    #[inline]
    pub fn tri(&self, k: usize, t: usize) -> &TriData {
        &self.tri[k * self.stencil.tris.len() + t]
    }
}
