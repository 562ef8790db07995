//! Elementary cycle enumeration (Johnson's circuit algorithm).

use serde::Serialize;

use crate::report::one_based;

pub const DEFAULT_CYCLE_CAP: usize = 100;

/// Simple directed graph on nodes `0..n` with sorted, deduplicated
/// successor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    succ: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Self { succ: vec![Vec::new(); n] }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut g = Self::new(n);
        for (u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    /// Adds `u -> v`; self-loops are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        if u == v {
            return;
        }
        if let Err(pos) = self.succ[u].binary_search(&v) {
            self.succ[u].insert(pos, v);
        }
    }

    pub fn with_edge(mut self, u: usize, v: usize) -> Self {
        self.add_edge(u, v);
        self
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.succ[u].binary_search(&v).is_ok()
    }

    pub fn successors(&self, u: usize) -> &[usize] {
        &self.succ[u]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.succ.iter().enumerate().flat_map(|(u, vs)| vs.iter().map(move |&v| (u, v)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleSearch {
    /// Each cycle starts at its smallest node and follows edge direction.
    #[serde(serialize_with = "one_based")]
    pub cycles: Vec<Vec<usize>>,
    pub truncated: bool,
}

impl CycleSearch {
    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

/// Every elementary cycle of length 3 or more, up to `cap` of them.
pub fn find_long_cycles(g: &Digraph, cap: usize) -> CycleSearch {
    let n = g.len();
    let mut search = Johnson {
        g,
        start: 0,
        member: vec![false; n],
        blocked: vec![false; n],
        blist: vec![Vec::new(); n],
        stack: Vec::new(),
        found: Vec::new(),
        cap,
    };
    for s in 0..n {
        if search.found.len() > cap {
            break;
        }
        search.member = component_of(g, s);
        if !search.member.iter().any(|&m| m) {
            continue;
        }
        search.start = s;
        for v in 0..n {
            search.blocked[v] = false;
            search.blist[v].clear();
        }
        search.circuit(s);
    }
    let truncated = search.found.len() > cap;
    search.found.truncate(cap);
    CycleSearch { cycles: search.found, truncated }
}

/// Strongly connected component of `s` in the subgraph on nodes `>= s`,
/// or all-false when that component is just `{s}`.
fn component_of(g: &Digraph, s: usize) -> Vec<bool> {
    let n = g.len();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (u, v) in g.edges() {
        if u >= s && v >= s {
            pred[v].push(u);
        }
    }
    let reach = |next: &dyn Fn(usize) -> Vec<usize>| {
        let mut seen = vec![false; n];
        let mut queue = vec![s];
        seen[s] = true;
        while let Some(u) = queue.pop() {
            for v in next(u) {
                if v >= s && !seen[v] {
                    seen[v] = true;
                    queue.push(v);
                }
            }
        }
        seen
    };
    let fwd = reach(&|u| g.successors(u).to_vec());
    let bwd = reach(&|u| pred[u].clone());
    let member: Vec<bool> = fwd.iter().zip(&bwd).map(|(a, b)| *a && *b).collect();
    if member.iter().filter(|&&m| m).count() < 2 {
        vec![false; n]
    } else {
        member
    }
}

struct Johnson<'a> {
    g: &'a Digraph,
    start: usize,
    member: Vec<bool>,
    blocked: Vec<bool>,
    blist: Vec<Vec<usize>>,
    stack: Vec<usize>,
    found: Vec<Vec<usize>>,
    cap: usize,
}

impl Johnson<'_> {
    fn done(&self) -> bool {
        self.found.len() > self.cap
    }

    fn circuit(&mut self, v: usize) -> bool {
        let mut closed = false;
        self.stack.push(v);
        self.blocked[v] = true;
        for &w in self.g.successors(v) {
            if self.done() {
                break;
            }
            if !self.member[w] {
                continue;
            }
            if w == self.start {
                if self.stack.len() >= 3 {
                    self.found.push(self.stack.clone());
                }
                closed = true;
            } else if !self.blocked[w] && self.circuit(w) {
                closed = true;
            }
        }
        if closed || self.done() {
            self.unblock(v);
        } else {
            for &w in self.g.successors(v) {
                if self.member[w] && !self.blist[w].contains(&v) {
                    self.blist[w].push(v);
                }
            }
        }
        self.stack.pop();
        closed
    }

    fn unblock(&mut self, v: usize) {
        let mut work = vec![v];
        while let Some(u) = work.pop() {
            if self.blocked[u] {
                self.blocked[u] = false;
                work.append(&mut self.blist[u]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directed_ring() {
        let g = Digraph::from_edges(3, [(0, 1), (1, 2), (2, 0)]);
        let c = find_long_cycles(&g, DEFAULT_CYCLE_CAP);
        assert_eq!(c.cycles, vec![vec![0, 1, 2]]);
        assert!(!c.truncated);
    }

    #[test]
    fn two_cycles_are_not_reported() {
        let g = Digraph::from_edges(3, [(0, 1), (1, 0), (1, 2), (2, 1)]);
        assert!(find_long_cycles(&g, DEFAULT_CYCLE_CAP).is_empty());
    }

    #[test]
    fn chain_plus_forward_edge() {
        // 1 <-> 2 <-> 3 with the extra edge x1 -> x3
        let g = Digraph::from_edges(3, [(0, 1), (1, 0), (1, 2), (2, 1)]).with_edge(0, 2);
        assert_eq!(find_long_cycles(&g, DEFAULT_CYCLE_CAP).cycles, vec![vec![0, 2, 1]]);
    }

    #[test]
    fn cap_sets_truncation_flag() {
        // complete digraph on 6 nodes has far more than 5 long cycles
        let edges = (0..6).flat_map(|u| (0..6).map(move |v| (u, v)));
        let g = Digraph::from_edges(6, edges);
        let c = find_long_cycles(&g, 5);
        assert_eq!(c.cycles.len(), 5);
        assert!(c.truncated);
        let all = find_long_cycles(&g, usize::MAX - 1);
        // sum over k = 3..6 of C(6, k) (k - 1)!
        assert_eq!(all.cycles.len(), 40 + 90 + 144 + 120);
        assert!(!all.truncated);
    }

    #[test]
    fn self_loops_are_ignored() {
        let g = Digraph::from_edges(2, [(0, 0), (0, 1)]);
        assert!(!g.has_edge(0, 0));
        assert!(find_long_cycles(&g, 10).is_empty());
    }
}
