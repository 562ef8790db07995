//! Decomposition into negative feedback chains connected in cascade.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::cycles::{find_long_cycles, Digraph};
use super::SignedNetwork;
use crate::report::one_based;

/// One insertion step: `node` joins the chain through its pair with `parent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Step {
    #[serde(serialize_with = "one_based")]
    pub node: usize,
    #[serde(serialize_with = "one_based")]
    pub parent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chain {
    /// Nodes in insertion order: the root pair first, then one per step.
    #[serde(serialize_with = "one_based")]
    pub nodes: Vec<usize>,
    #[serde(serialize_with = "one_based")]
    pub root: (usize, usize),
    pub steps: Vec<Step>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.nodes.contains(&k)
    }

    /// Feedback pairs as `(low, high)`, root pair first.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        std::iter::once(self.root)
            .chain(self.steps.iter().map(|s| (s.node, s.parent)))
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect()
    }

    /// The same chain grown from another of its pairs, `r` taking the role
    /// of the weighted root node.
    pub fn rerooted(&self, r: usize, s: usize) -> Option<Chain> {
        let key = (r.min(s), r.max(s));
        if !self.pairs().contains(&key) {
            return None;
        }
        let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (a, b) in self.pairs() {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        Some(grow(&adj, (r, s)))
    }
}

fn grow(adj: &BTreeMap<usize, BTreeSet<usize>>, root: (usize, usize)) -> Chain {
    let mut nodes = vec![root.0, root.1];
    let mut steps = Vec::new();
    let mut queue: VecDeque<usize> = nodes.iter().copied().collect();
    while let Some(u) = queue.pop_front() {
        for &v in &adj[&u] {
            if !nodes.contains(&v) {
                nodes.push(v);
                steps.push(Step { node: v, parent: u });
                queue.push_back(v);
            }
        }
    }
    Chain { nodes, root, steps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CascadeVertex {
    Chain(usize),
    Node(#[serde(serialize_with = "one_based")] usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CascadeEdge {
    pub from: usize,
    pub to: usize,
    /// Underlying influence edges `(source, target)`.
    #[serde(serialize_with = "one_based")]
    pub links: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainDecomposition {
    pub chains: Vec<Chain>,
    #[serde(serialize_with = "one_based")]
    pub singletons: Vec<usize>,
    /// Cascade vertices ordered by their smallest node.
    pub vertices: Vec<CascadeVertex>,
    pub edges: Vec<CascadeEdge>,
    /// A topological order of `vertices`.
    pub order: Vec<usize>,
}

impl ChainDecomposition {
    /// Cascade vertex holding node `k`.
    pub fn vertex_of(&self, k: usize) -> usize {
        self.vertices
            .iter()
            .position(|v| match *v {
                CascadeVertex::Chain(c) => self.chains[c].contains(k),
                CascadeVertex::Node(m) => m == k,
            })
            .expect("every node belongs to a vertex")
    }

    pub fn pair_count(&self) -> usize {
        self.chains.iter().map(|c| c.len() - 1).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecomposeError {
    #[error("network contains a cycle of length {}: {}", .cycle.len(), fmt_cycle(.cycle))]
    LongCycle { cycle: Vec<usize> },
    #[error("one-directional edge x{} -> x{} inside a feedback chain", .from + 1, .to + 1)]
    IntraChainEdge { from: usize, to: usize },
    #[error("cascade graph between chains is cyclic")]
    CascadeCycle,
}

impl Serialize for DecomposeError {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Witness<'a> {
            message: String,
            #[serde(serialize_with = "one_based")]
            cycle: &'a [Vec<usize>],
        }
        let cycle = match self {
            DecomposeError::LongCycle { cycle } => std::slice::from_ref(cycle),
            _ => &[],
        };
        Witness { message: self.to_string(), cycle }.serialize(s)
    }
}

fn fmt_cycle(c: &[usize]) -> String {
    c.iter().map(|k| format!("x{}", k + 1)).collect::<Vec<_>>().join(" -> ")
}

pub fn decompose_chains(net: &SignedNetwork) -> Result<ChainDecomposition, DecomposeError> {
    decompose_digraph(&net.digraph())
}

/// Decomposition of an influence graph (`u -> v` when `x_u` enters `f_v`).
pub fn decompose_digraph(g: &Digraph) -> Result<ChainDecomposition, DecomposeError> {
    if let Some(cycle) = find_long_cycles(g, 1).cycles.into_iter().next() {
        return Err(DecomposeError::LongCycle { cycle });
    }
    let n = g.len();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (u, v) in g.edges() {
        if g.has_edge(v, u) {
            adj[u].insert(v);
        }
    }

    let mut vertex_of = vec![usize::MAX; n];
    let mut vertices = Vec::new();
    let mut chains = Vec::new();
    let mut singletons = Vec::new();
    for k in 0..n {
        if vertex_of[k] != usize::MAX {
            continue;
        }
        let id = vertices.len();
        if adj[k].is_empty() {
            vertex_of[k] = id;
            singletons.push(k);
            vertices.push(CascadeVertex::Node(k));
            continue;
        }
        // k is the smallest node of its component, so (k, min neighbour) is
        // the lowest pair.
        let mut comp: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        let mut stack = vec![k];
        while let Some(u) = stack.pop() {
            if comp.contains_key(&u) {
                continue;
            }
            comp.insert(u, adj[u].clone());
            stack.extend(adj[u].iter().copied());
        }
        let root = (k, *adj[k].iter().next().unwrap());
        let chain = grow(&comp, root);
        for &u in &chain.nodes {
            vertex_of[u] = id;
        }
        vertices.push(CascadeVertex::Chain(chains.len()));
        chains.push(chain);
    }

    let mut links: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (u, v) in g.edges() {
        let (a, b) = (vertex_of[u], vertex_of[v]);
        if a == b {
            if !g.has_edge(v, u) {
                return Err(DecomposeError::IntraChainEdge { from: u, to: v });
            }
        } else {
            links.entry((a, b)).or_default().push((u, v));
        }
    }
    let edges: Vec<CascadeEdge> = links
        .into_iter()
        .map(|((from, to), links)| CascadeEdge { from, to, links })
        .collect();

    let mut dag = DiGraph::<usize, ()>::new();
    let ids: Vec<_> = (0..vertices.len()).map(|v| dag.add_node(v)).collect();
    for e in &edges {
        dag.add_edge(ids[e.from], ids[e.to], ());
    }
    let order = toposort(&dag, None)
        .map_err(|_| DecomposeError::CascadeCycle)?
        .into_iter()
        .map(|ix| dag[ix])
        .collect();

    Ok(ChainDecomposition { chains, singletons, vertices, edges, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feedback(n: usize, pairs: &[(usize, usize)]) -> Digraph {
        Digraph::from_edges(n, pairs.iter().flat_map(|&(a, b)| [(a, b), (b, a)]))
    }

    #[test]
    fn example_one_is_a_single_chain() {
        let d = decompose_digraph(&feedback(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!(d.chains.len(), 1);
        let c = &d.chains[0];
        assert_eq!(c.root, (0, 1));
        assert_eq!(c.nodes, vec![0, 1, 2]);
        assert_eq!(c.steps, vec![Step { node: 2, parent: 1 }]);
        assert_eq!(c.pairs(), vec![(0, 1), (1, 2)]);
        assert!(d.edges.is_empty() && d.singletons.is_empty());
    }

    #[test]
    fn star_chain_attaches_to_the_hub() {
        let d = decompose_digraph(&feedback(4, &[(0, 1), (1, 2), (1, 3)])).unwrap();
        let c = &d.chains[0];
        assert_eq!(c.nodes, vec![0, 1, 2, 3]);
        assert_eq!(c.steps, vec![Step { node: 2, parent: 1 }, Step { node: 3, parent: 1 }]);
    }

    #[test]
    fn two_chains_in_cascade() {
        let g = feedback(4, &[(0, 1), (2, 3)]).with_edge(1, 2);
        let d = decompose_digraph(&g).unwrap();
        assert_eq!(d.chains.len(), 2);
        assert_eq!(d.edges, vec![CascadeEdge { from: 0, to: 1, links: vec![(1, 2)] }]);
        assert_eq!(d.order, vec![0, 1]);
    }

    #[test]
    fn singleton_feeding_two_chains() {
        let g = feedback(5, &[(1, 2), (3, 4)]).with_edge(0, 1).with_edge(0, 4);
        let d = decompose_digraph(&g).unwrap();
        assert_eq!(d.singletons, vec![0]);
        assert_eq!(d.vertices[0], CascadeVertex::Node(0));
        let out: Vec<_> = d.edges.iter().filter(|e| e.from == 0).map(|e| e.to).collect();
        assert_eq!(out, vec![1, 2]);
        assert_eq!(d.order[0], 0);
    }

    #[test]
    fn long_cycle_is_rejected_with_witness() {
        let g = feedback(3, &[(0, 1), (1, 2)]).with_edge(0, 2);
        assert_eq!(decompose_digraph(&g), Err(DecomposeError::LongCycle { cycle: vec![0, 2, 1] }));
    }

    #[test]
    fn rerooting_keeps_the_pair_set() {
        let d = decompose_digraph(&feedback(4, &[(0, 1), (1, 2), (2, 3)])).unwrap();
        let c = d.chains[0].rerooted(3, 2).unwrap();
        assert_eq!(c.nodes, vec![3, 2, 1, 0]);
        let mut p = c.pairs();
        p.sort();
        assert_eq!(p, d.chains[0].pairs());
        assert!(d.chains[0].rerooted(0, 3).is_none());
    }
}
