//! Bipartite BS <-> UE coupling graph.
//!
//! Indices are zero-based throughout. An edge `(k, l)` means UE `k` hears
//! BS `l`, i.e. the channel block `H_{k,l}` is nonzero. Edges are kept
//! sorted by `(k, l)`; the position in that order is the edge id used to
//! index per-edge storage everywhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TopologyMode {
    Full,
    /// Each UE attaches to its `b` nearest BSs on the unit torus.
    NearestB {
        b: usize,
    },
    /// Attach every pair within `radius` on the unit torus.
    Geometric {
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopologyParams {
    pub mode: TopologyMode,
    /// `N_l`, one entry per BS.
    pub bs_antennas: Vec<usize>,
    /// `M_k`, one entry per UE.
    pub ue_antennas: Vec<usize>,
}

impl TopologyParams {
    pub fn uniform(mode: TopologyMode, num_bs: usize, num_ue: usize, n_l: usize, m_k: usize) -> Self {
        Self {
            mode,
            bs_antennas: vec![n_l; num_bs],
            ue_antennas: vec![m_k; num_ue],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    bs_antennas: Vec<usize>,
    ue_antennas: Vec<usize>,
    edges: Vec<(usize, usize)>,
    /// `B_k` as `(l, edge id)`, ascending in `l`.
    ue_links: Vec<Vec<(usize, usize)>>,
    /// `U_l` as `(k, edge id)`, ascending in `k`.
    bs_links: Vec<Vec<(usize, usize)>>,
}

impl NetworkTopology {
    /// Builds a topology from an explicit edge list of `(k, l)` pairs.
    pub fn from_edges(
        bs_antennas: Vec<usize>,
        ue_antennas: Vec<usize>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let num_bs = bs_antennas.len();
        let num_ue = ue_antennas.len();
        if num_bs == 0 || num_ue == 0 {
            return Err(Error::EmptyNetwork);
        }
        if bs_antennas.iter().chain(&ue_antennas).any(|&n| n == 0) {
            return Err(Error::InvalidParam("antenna counts must be >= 1".into()));
        }
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        let mut ue_links = vec![Vec::new(); num_ue];
        let mut bs_links = vec![Vec::new(); num_bs];
        for (id, &(k, l)) in edges.iter().enumerate() {
            if k >= num_ue || l >= num_bs {
                return Err(Error::InvalidParam(format!("edge ({k}, {l}) out of range")));
            }
            ue_links[k].push((l, id));
            bs_links[l].push((k, id));
        }
        if let Some(k) = ue_links.iter().position(Vec::is_empty) {
            return Err(Error::InvalidParam(format!("UE {k} has no serving BS")));
        }
        Ok(Self {
            bs_antennas,
            ue_antennas,
            edges,
            ue_links,
            bs_links,
        })
    }

    pub fn num_bs(&self) -> usize {
        self.bs_antennas.len()
    }

    pub fn num_ue(&self) -> usize {
        self.ue_antennas.len()
    }

    pub fn bs_antennas(&self) -> &[usize] {
        &self.bs_antennas
    }

    pub fn ue_antennas(&self) -> &[usize] {
        &self.ue_antennas
    }

    /// `N = sum N_l`.
    pub fn total_tx(&self) -> usize {
        self.bs_antennas.iter().sum()
    }

    /// `M = sum M_k`.
    pub fn total_rx(&self) -> usize {
        self.ue_antennas.iter().sum()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `B_k` with edge ids.
    pub fn ue_links(&self, k: usize) -> &[(usize, usize)] {
        &self.ue_links[k]
    }

    /// `U_l` with edge ids.
    pub fn bs_links(&self, l: usize) -> &[(usize, usize)] {
        &self.bs_links[l]
    }

    pub fn serving_bs(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.ue_links[k].iter().map(|&(l, _)| l)
    }

    pub fn served_ue(&self, l: usize) -> impl Iterator<Item = usize> + '_ {
        self.bs_links[l].iter().map(|&(k, _)| k)
    }

    pub fn edge_id(&self, k: usize, l: usize) -> Option<usize> {
        self.edges.binary_search(&(k, l)).ok()
    }

    pub fn is_full(&self) -> bool {
        self.edges.len() == self.num_bs() * self.num_ue()
    }

    /// Row offsets of the UE blocks in the global matrix.
    pub fn ue_offsets(&self) -> Vec<usize> {
        prefix_sums(&self.ue_antennas)
    }

    /// Column offsets of the BS blocks in the global matrix.
    pub fn bs_offsets(&self) -> Vec<usize> {
        prefix_sums(&self.bs_antennas)
    }

    /// Longest shortest path (in hops) of the bipartite factor graph, or
    /// `None` if it is disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let (nb, nu) = (self.num_bs(), self.num_ue());
        // nodes: BS l -> l, UE k -> nb + k
        let neighbours = |v: usize| -> Vec<usize> {
            if v < nb {
                self.served_ue(v).map(|k| nb + k).collect()
            } else {
                self.serving_bs(v - nb).collect()
            }
        };
        let total = nb + nu;
        let mut diameter = 0;
        for start in 0..total {
            let mut dist = vec![usize::MAX; total];
            dist[start] = 0;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in neighbours(v) {
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            let far = *dist.iter().max().unwrap();
            if far == usize::MAX {
                return None;
            }
            diameter = diameter.max(far);
        }
        Some(diameter)
    }

    /// True when the factor graph has no cycles (a forest).
    pub fn is_forest(&self) -> bool {
        let total = self.num_bs() + self.num_ue();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for &(k, l) in &self.edges {
            let a = find(&mut parent, l);
            let b = find(&mut parent, self.num_bs() + k);
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }
}

fn prefix_sums(sizes: &[usize]) -> Vec<usize> {
    let mut acc = 0;
    sizes
        .iter()
        .map(|&n| {
            let start = acc;
            acc += n;
            start
        })
        .collect()
}

fn torus_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    let wrap = |d: f64| {
        let d = d.abs();
        d.min(1.0 - d)
    };
    wrap(a.0 - b.0).hypot(wrap(a.1 - b.1))
}

/// Builds the coupling graph.
///
/// Random modes draw BS positions first, then UE positions, uniformly on the
/// unit torus. Every UE ends up with at least one serving BS. A BS may end up
/// idle (no users); its block of every precoder is then identically zero.
pub fn build_topology(params: &TopologyParams, rng: &mut Rng) -> Result<NetworkTopology> {
    let num_bs = params.bs_antennas.len();
    let num_ue = params.ue_antennas.len();
    if num_bs == 0 || num_ue == 0 {
        return Err(Error::EmptyNetwork);
    }
    match params.mode {
        TopologyMode::NearestB { b } if b == 0 || b > num_bs => {
            return Err(Error::InvalidParam(format!("b = {b} must lie in [1, {num_bs}]")));
        }
        TopologyMode::Geometric { radius } if !(radius > 0.0) => {
            return Err(Error::InvalidParam(format!("radius = {radius} must be > 0")));
        }
        _ => {}
    }
    let edges: Vec<(usize, usize)> = match params.mode {
        TopologyMode::Full => (0..num_ue).flat_map(|k| (0..num_bs).map(move |l| (k, l))).collect(),
        TopologyMode::NearestB { b } => {
            let (bs_pos, ue_pos) = place(num_bs, num_ue, rng);
            let mut edges = Vec::with_capacity(num_ue * b);
            for (k, &u) in ue_pos.iter().enumerate() {
                for l in nearest_bs(&bs_pos, u).into_iter().take(b) {
                    edges.push((k, l));
                }
            }
            edges
        }
        TopologyMode::Geometric { radius } => {
            let (bs_pos, ue_pos) = place(num_bs, num_ue, rng);
            let mut edges = Vec::new();
            for (k, &u) in ue_pos.iter().enumerate() {
                let mut linked = false;
                for (l, &p) in bs_pos.iter().enumerate() {
                    if torus_distance(u, p) <= radius {
                        edges.push((k, l));
                        linked = true;
                    }
                }
                if !linked {
                    edges.push((k, nearest_bs(&bs_pos, u)[0]));
                }
            }
            edges
        }
    };
    NetworkTopology::from_edges(params.bs_antennas.clone(), params.ue_antennas.clone(), edges)
}

type Positions = Vec<(f64, f64)>;

fn place(num_bs: usize, num_ue: usize, rng: &mut Rng) -> (Positions, Positions) {
    let mut draw = |n: usize| -> Positions { (0..n).map(|_| (rng.unit(), rng.unit())).collect() };
    let bs = draw(num_bs);
    let ue = draw(num_ue);
    (bs, ue)
}

/// BS indices sorted by torus distance, ties to the lower index.
fn nearest_bs(bs_pos: &[(f64, f64)], at: (f64, f64)) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = bs_pos
        .iter()
        .enumerate()
        .map(|(l, &p)| (torus_distance(at, p), l))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(_, l)| l).collect()
}
