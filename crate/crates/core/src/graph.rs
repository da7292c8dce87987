//! ε-neighborhood graphs and their unnormalized Laplacian.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Block, LinearOperator};
use crate::rng::{fnv1a, fnv_start};
use crate::sampling::PointCloud;

/// Compactly supported, nonincreasing kernel profile on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Kernel {
    /// `1{t ≤ 1}`
    #[default]
    Boxcar,
    /// `(1 - t)_+`
    Triangular,
    /// `(1 - t^2)_+`
    TruncatedQuadratic,
}

impl Kernel {
    pub fn eval(self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        match self {
            Kernel::Boxcar => 1.0,
            Kernel::Triangular => 1.0 - t,
            Kernel::TruncatedQuadratic => 1.0 - t * t,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Boxcar => "boxcar",
            Kernel::Triangular => "triangular",
            Kernel::TruncatedQuadratic => "truncated-quadratic",
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boxcar" => Ok(Kernel::Boxcar),
            "triangular" => Ok(Kernel::Triangular),
            "truncated-quadratic" => Ok(Kernel::TruncatedQuadratic),
            other => Err(Error::invalid(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Weighted undirected graph with Laplacian
/// `(L u)_i = (1 / (n ε^{2+dim})) Σ_j (u_i - u_j) w_ij`.
#[derive(Clone, Debug)]
pub struct NeighborhoodGraph {
    n: usize,
    eps: f64,
    kernel: Kernel,
    intrinsic_dim: usize,
    /// Upper-triangle edges `(i, j, w)` with `i < j`, sorted by `(i, j)`.
    edges: Vec<(u32, u32, f64)>,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
    degree: Vec<f64>,
    fingerprint: u64,
}

impl NeighborhoodGraph {
    /// Assembles a graph from an explicit upper-triangle edge list.
    pub fn from_edges(
        n: usize,
        eps: f64,
        kernel: Kernel,
        intrinsic_dim: usize,
        mut edges: Vec<(u32, u32, f64)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("radius {eps} must be positive and finite")));
        }
        if intrinsic_dim == 0 {
            return Err(Error::invalid("intrinsic dimension must be positive"));
        }
        for &(i, j, w) in &edges {
            if i >= j || j as usize >= n {
                return Err(Error::invalid(format!(
                    "edge ({i}, {j}) is not an upper-triangle edge of an {n}-vertex graph"
                )));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("edge ({i}, {j}) has weight {w}")));
            }
        }
        edges.sort_unstable_by_key(|&(i, j, _)| (i, j));
        if edges.windows(2).any(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(Error::invalid("duplicate edge"));
        }

        let mut count = vec![0usize; n + 1];
        for &(i, j, _) in &edges {
            count[i as usize + 1] += 1;
            count[j as usize + 1] += 1;
        }
        for v in 0..n {
            count[v + 1] += count[v];
        }
        let offsets = count;
        let mut fill = offsets.clone();
        let mut neighbors = vec![0u32; 2 * edges.len()];
        let mut weights = vec![0.0; 2 * edges.len()];
        let mut degree = vec![0.0; n];
        for &(i, j, w) in &edges {
            let (iu, ju) = (i as usize, j as usize);
            neighbors[fill[iu]] = j;
            weights[fill[iu]] = w;
            fill[iu] += 1;
            neighbors[fill[ju]] = i;
            weights[fill[ju]] = w;
            fill[ju] += 1;
            degree[iu] += w;
            degree[ju] += w;
        }

        let mut h = fnv_start();
        h = fnv1a(&(n as u64).to_le_bytes(), h);
        h = fnv1a(&eps.to_bits().to_le_bytes(), h);
        h = fnv1a(&(intrinsic_dim as u64).to_le_bytes(), h);
        h = fnv1a(kernel.name().as_bytes(), h);
        for &(i, j, w) in &edges {
            h = fnv1a(&i.to_le_bytes(), h);
            h = fnv1a(&j.to_le_bytes(), h);
            h = fnv1a(&w.to_bits().to_le_bytes(), h);
        }

        Ok(Self {
            n,
            eps,
            kernel,
            intrinsic_dim,
            edges,
            offsets,
            neighbors,
            weights,
            degree,
            fingerprint: h,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Weighted degrees `Σ_j w_ij` (without the prefactor).
    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `1 / (n ε^{2+dim})`.
    pub fn prefactor(&self) -> f64 {
        1.0 / (self.n as f64 * self.eps.powi(2 + self.intrinsic_dim as i32))
    }

    /// `(neighbor, weight)` pairs of vertex `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[r.clone()]
            .iter()
            .map(|&j| j as usize)
            .zip(self.weights[r].iter().copied())
    }

    /// Gershgorin bound on `‖L‖₂`.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.degree.iter().fold(0.0f64, |a, &b| a.max(b)) * self.prefactor()
    }

    /// Same graph with every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("scale {c} must be positive")));
        }
        let edges = self.edges.iter().map(|&(i, j, w)| (i, j, c * w)).collect();
        Self::from_edges(self.n, self.eps, self.kernel, self.intrinsic_dim, edges)
    }

    /// Dense Laplacian including the prefactor.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.prefactor();
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, w) in &self.edges {
            let (i, j) = (i as usize, j as usize);
            m[(i, j)] -= p * w;
            m[(j, i)] -= p * w;
            m[(i, i)] += p * w;
            m[(j, j)] += p * w;
        }
        m
    }

    /// `L u` into `out`.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let p = self.prefactor();
        for i in 0..self.n {
            let r = self.offsets[i]..self.offsets[i + 1];
            let mut s = 0.0;
            for (&j, &w) in self.neighbors[r.clone()].iter().zip(&self.weights[r]) {
                s += w * u[j as usize];
            }
            out[i] = p * (self.degree[i] * u[i] - s);
        }
    }

    /// `L` applied to every column of `block`.
    pub fn apply_block(&self, block: &Block) -> Block {
        let mut out = Block::zeros(self.n, block.cols);
        for c in 0..block.cols {
            let (src, dst) = (block.col(c), &mut out.data[c * self.n..(c + 1) * self.n]);
            self.apply_into(src, dst);
        }
        out
    }

    /// Writes `i j w` lines, one per stored edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for &(i, j, wt) in &self.edges {
            writeln!(w, "{i} {j} {wt}")?;
        }
        Ok(())
    }
}

impl LinearOperator for NeighborhoodGraph {
    fn size(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y);
    }
}

fn cell_of(x: &[f64], eps: f64, axes: usize) -> [i64; 3] {
    let mut c = [0i64; 3];
    for a in 0..axes {
        c[a] = (x[a] / eps).floor() as i64;
    }
    c
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Builds the ε-graph with spatial binning over the first `min(d, 3)` axes.
pub fn build_graph(points: &PointCloud, eps: f64, kernel: Kernel, intrinsic_dim: usize) -> Result<NeighborhoodGraph> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("radius {eps} must be positive and finite")));
    }
    if intrinsic_dim == 0 {
        return Err(Error::invalid("intrinsic dimension must be positive"));
    }
    if let Some(i) = points.coords().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!(
            "point {} has a non-finite coordinate",
            i / points.dim()
        )));
    }
    let n = points.len();
    let axes = points.dim().min(3);
    let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (i, x) in points.rows().enumerate() {
        cells.entry(cell_of(x, eps, axes)).or_default().push(i as u32);
    }
    let eps_sq = eps * eps;
    let mut offsets: Vec<[i64; 3]> = Vec::new();
    let span = |a: usize| if a < axes { -1..=1 } else { 0..=0 };
    for a in span(0) {
        for b in span(1) {
            for c in span(2) {
                offsets.push([a, b, c]);
            }
        }
    }
    let mut edges = Vec::new();
    for (i, x) in points.rows().enumerate() {
        let home = cell_of(x, eps, axes);
        for off in &offsets {
            let key = [home[0] + off[0], home[1] + off[1], home[2] + off[2]];
            let Some(members) = cells.get(&key) else { continue };
            for &j in members {
                if (j as usize) <= i {
                    continue;
                }
                let d2 = dist_sq(x, points.row(j as usize));
                if d2 <= eps_sq {
                    let w = kernel.eval(d2.sqrt() / eps);
                    if w > 0.0 {
                        edges.push((i as u32, j, w));
                    }
                }
            }
        }
    }
    NeighborhoodGraph::from_edges(n, eps, kernel, intrinsic_dim, edges)
}

/// All-pairs reference construction.
pub fn build_graph_brute_force(
    points: &PointCloud,
    eps: f64,
    kernel: Kernel,
    intrinsic_dim: usize,
) -> Result<NeighborhoodGraph> {
    let n = points.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = dist_sq(points.row(i), points.row(j)).sqrt();
            if d <= eps {
                let w = kernel.eval(d / eps);
                if w > 0.0 {
                    edges.push((i as u32, j as u32, w));
                }
            }
        }
    }
    NeighborhoodGraph::from_edges(n, eps, kernel, intrinsic_dim, edges)
}

/// `L u`.
pub fn laplacian_apply(g: &NeighborhoodGraph, u: &[f64]) -> Result<Vec<f64>> {
    check_len(g.n(), u.len())?;
    let mut out = vec![0.0; g.n()];
    g.apply_into(u, &mut out);
    Ok(out)
}

/// `(1/n) fᵀ L^s f`, via `‖L^{s/2} f‖²` for even `s` and `gᵀ L g` with
/// `g = L^{(s-1)/2} f` for odd `s`.
pub fn sobolev_seminorm(g: &NeighborhoodGraph, f: &[f64], s: u32) -> Result<f64> {
    check_len(g.n(), f.len())?;
    if s == 0 {
        return Err(Error::invalid("seminorm order must be at least 1"));
    }
    let mut cur = f.to_vec();
    let mut next = vec![0.0; g.n()];
    for _ in 0..s / 2 {
        g.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    let q = if s.is_multiple_of(2) {
        dot(&cur, &cur)
    } else {
        g.apply_into(&cur, &mut next);
        dot(&cur, &next)
    };
    Ok(q / g.n() as f64)
}

/// Vertex partition; component ids are ordered by their smallest vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub labels: Vec<usize>,
    pub count: usize,
}

impl Components {
    /// Vertex lists, one per component, in id order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (v, &c) in self.labels.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn connected_components(g: &NeighborhoodGraph) -> Components {
    let n = g.n();
    let mut parent: Vec<usize> = (0..n).collect();
    for &(i, j, _) in g.edges() {
        let (a, b) = (find(&mut parent, i as usize), find(&mut parent, j as usize));
        if a != b {
            // Keep the smaller index as root so roots are component minima.
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            parent[hi] = lo;
        }
    }
    let mut id = vec![usize::MAX; n];
    let mut labels = vec![0; n];
    let mut count = 0;
    for v in 0..n {
        let r = find(&mut parent, v);
        if id[r] == usize::MAX {
            id[r] = count;
            count += 1;
        }
        labels[v] = id[r];
    }
    Components { labels, count }
}
