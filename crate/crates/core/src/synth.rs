//! Random linear feedback chains with known asymmetries, for property tests
//! and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::expr::DynamicsSpec;

/// Reciprocal pair `(i, j)`, `i < j`, with `a_ji = -b a_ij`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub i: usize,
    pub j: usize,
    pub a_ij: f64,
    pub b: f64,
}

impl Link {
    pub fn a_ji(&self) -> f64 {
        -self.b * self.a_ij
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticChain {
    pub dynamics: DynamicsSpec,
    pub alphas: Vec<f64>,
    pub links: Vec<Link>,
    /// Constant Jacobian, row-major.
    pub jacobian: Vec<Vec<f64>>,
}

impl SyntheticChain {
    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn link(&self, p: usize, q: usize) -> Option<&Link> {
        let (i, j) = (p.min(q), p.max(q));
        self.links.iter().find(|l| l.i == i && l.j == j)
    }
}

/// A random tree of `n` nodes (each new node joins a uniformly chosen
/// earlier one), relabelled by a random permutation, with `b` drawn from
/// `b_range`, self rates from `alpha_range` and `|a_ij|` from `[0.2, 3]`.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize, b_range: (f64, f64), alpha_range: (f64, f64)) -> SyntheticChain {
    assert!(n >= 2, "a chain needs at least two nodes");
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);

    let mut links = Vec::with_capacity(n - 1);
    for k in 1..n {
        let parent = rng.random_range(0..k);
        let (p, q) = (label[parent], label[k]);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        links.push(Link {
            i: p.min(q),
            j: p.max(q),
            a_ij: sign * rng.random_range(0.2..=3.0),
            b: rng.random_range(b_range.0..=b_range.1),
        });
    }
    let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(alpha_range.0..=alpha_range.1)).collect();

    let mut jacobian = vec![vec![0.0; n]; n];
    for (k, a) in alphas.iter().enumerate() {
        jacobian[k][k] = -a;
    }
    for l in &links {
        jacobian[l.i][l.j] = l.a_ij;
        jacobian[l.j][l.i] = l.a_ji();
    }
    let f: Vec<String> = jacobian
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| format!("{v}*x{}", j + 1))
                .collect::<Vec<_>>()
                .join(" + ")
        })
        .collect();
    let dynamics = DynamicsSpec::parse(&f).expect("generated expressions parse");
    SyntheticChain { dynamics, alphas, links, jacobian }
}
