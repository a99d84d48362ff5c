//! Finite event trees as discrete filtrations.
//!
//! Nodes are stored in topological order (every parent precedes its
//! children), so forward recursions walk the node list front to back and
//! backward inductions walk it back to front.

mod process;
mod time;

pub use process::{
    martingale_class, martingale_class_on, MartingaleClass, MartingaleReport, NodeProcess,
    DRIFT_TOL,
};
pub use time::{dual_optional_projection, RandomTime};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of nodes a spec may expand to.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Tolerance on transition probabilities summing to one.
pub const TRANSITION_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
struct Node {
    time: usize,
    parent: Option<usize>,
    /// Transition probability from the parent; 1 at the root.
    cond_prob: f64,
    prob: f64,
    children: Vec<usize>,
}

/// A finite-horizon event tree with strictly positive transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTree {
    nodes: Vec<Node>,
    depth: usize,
    leaves: Vec<usize>,
}

/// One entry of an explicit tree description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub parent: Option<usize>,
    #[serde(default = "one")]
    pub prob: f64,
}

fn one() -> f64 {
    1.0
}

/// Tree descriptions accepted in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TreeSpec {
    /// Explicit node list; node 0 is the root and parents precede children.
    Nodes(Vec<NodeSpec>),
    /// Every node branches with the same transition probabilities.
    Lattice { depth: usize, probs: Vec<f64> },
}

impl TreeSpec {
    pub fn build(&self) -> Result<EventTree> {
        self.build_with_cap(DEFAULT_NODE_CAP)
    }

    pub fn build_with_cap(&self, cap: usize) -> Result<EventTree> {
        match self {
            TreeSpec::Nodes(nodes) => {
                if nodes.len() > cap {
                    return Err(Error::InvalidTree(format!(
                        "{} nodes exceed the cap of {cap}",
                        nodes.len()
                    )));
                }
                let parents: Vec<(Option<usize>, f64)> =
                    nodes.iter().map(|n| (n.parent, n.prob)).collect();
                EventTree::from_parents(&parents)
            }
            TreeSpec::Lattice { depth, probs } => EventTree::lattice(*depth, probs, cap),
        }
    }
}

impl EventTree {
    /// Builds a tree from `(parent, transition probability)` pairs.
    pub fn from_parents(spec: &[(Option<usize>, f64)]) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::InvalidTree("tree has no nodes".into()));
        }
        let mut nodes: Vec<Node> = Vec::with_capacity(spec.len());
        for (i, &(parent, p)) in spec.iter().enumerate() {
            let (time, cond_prob, prob) = match parent {
                None if i == 0 => (0, 1.0, 1.0),
                None => {
                    return Err(Error::InvalidTree(format!("node {i} has no parent")));
                }
                Some(q) if q >= i => {
                    return Err(Error::InvalidTree(format!(
                        "node {i} refers to parent {q}, which does not precede it"
                    )));
                }
                Some(q) => {
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(Error::InvalidTree(format!(
                            "node {i} has transition probability {p}"
                        )));
                    }
                    (nodes[q].time + 1, p, nodes[q].prob * p)
                }
            };
            if let Some(q) = parent {
                nodes[q].children.push(i);
            }
            nodes.push(Node {
                time,
                parent,
                cond_prob,
                prob,
                children: Vec::new(),
            });
        }
        let leaves: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].children.is_empty())
            .collect();
        let depth = nodes[leaves[0]].time;
        if let Some(&l) = leaves.iter().find(|&&l| nodes[l].time != depth) {
            return Err(Error::InvalidTree(format!(
                "leaf {l} sits at time {} but leaf {} at time {depth}",
                nodes[l].time, leaves[0]
            )));
        }
        for (i, n) in nodes.iter().enumerate() {
            if n.children.is_empty() {
                continue;
            }
            let s: f64 = n.children.iter().map(|&c| nodes[c].cond_prob).sum();
            if (s - 1.0).abs() > TRANSITION_SUM_TOL {
                return Err(Error::InvalidTree(format!(
                    "transition probabilities out of node {i} sum to {s}"
                )));
            }
        }
        Ok(EventTree {
            nodes,
            depth,
            leaves,
        })
    }

    /// Full tree in which every node branches with `probs`.
    pub fn lattice(depth: usize, probs: &[f64], cap: usize) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidTree(
                "lattice needs at least one branch".into(),
            ));
        }
        let b = probs.len() as f64;
        let count = if probs.len() == 1 {
            depth as f64 + 1.0
        } else {
            (b.powi(depth as i32 + 1) - 1.0) / (b - 1.0)
        };
        if count > cap as f64 {
            return Err(Error::InvalidTree(format!(
                "lattice expands to {count} nodes, above the cap of {cap}"
            )));
        }
        let mut spec = vec![(None, 1.0)];
        let mut level = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(level.len() * probs.len());
            for &parent in &level {
                for &p in probs {
                    next.push(spec.len());
                    spec.push((Some(parent), p));
                }
            }
            level = next;
        }
        Self::from_parents(&spec)
    }

    /// Random tree of the given depth; every node has between one and
    /// `max_branching` children with transition probabilities bounded below.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, depth: usize, max_branching: usize) -> Self {
        assert!(max_branching >= 1);
        let mut spec = vec![(None, 1.0)];
        let mut level = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &parent in &level {
                let k = rng.random_range(1..=max_branching);
                let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
                let s: f64 = raw.iter().sum();
                for (j, r) in raw.iter().enumerate() {
                    next.push(spec.len());
                    // last branch absorbs the rounding so sums are exact enough
                    let p = if j + 1 == k {
                        1.0 - raw[..j].iter().map(|x| x / s).sum::<f64>()
                    } else {
                        r / s
                    };
                    spec.push((Some(parent), p));
                }
            }
            level = next;
        }
        Self::from_parents(&spec).expect("random tree is valid")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Horizon `T_max`.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn time(&self, node: usize) -> usize {
        self.nodes[node].time
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.nodes[node].parent
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.nodes[node].children
    }

    /// Transition probability from the parent.
    pub fn cond_prob(&self, node: usize) -> f64 {
        self.nodes[node].cond_prob
    }

    /// Unconditional probability of reaching the node.
    pub fn prob(&self, node: usize) -> f64 {
        self.nodes[node].prob
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.nodes[node].children.is_empty()
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    /// Nodes from the root down to `node`.
    pub fn path(&self, node: usize) -> Vec<usize> {
        let mut p = vec![node];
        let mut cur = node;
        while let Some(q) = self.nodes[cur].parent {
            p.push(q);
            cur = q;
        }
        p.reverse();
        p
    }

    /// Ancestor of `node` (or the node itself) at time `t`.
    pub fn ancestor_at(&self, node: usize, t: usize) -> usize {
        let mut cur = node;
        while self.nodes[cur].time > t {
            cur = self.nodes[cur].parent.expect("non-root node has a parent");
        }
        cur
    }

    /// `E[X_{T_max} | node]` for every node, by backward induction.
    pub fn terminal_expectation(&self, x: &NodeProcess) -> Result<NodeProcess> {
        self.check(x)?;
        let mut out = x.values().to_vec();
        for i in (0..self.len()).rev() {
            if !self.is_leaf(i) {
                out[i] = self.one_step_expectation_of(&out, i);
            }
        }
        Ok(NodeProcess::from_vec(out))
    }

    /// `E[X_{T_max} | node]`.
    pub fn conditional_expectation(&self, x: &NodeProcess, node: usize) -> Result<f64> {
        if node >= self.len() {
            return Err(Error::InvalidTree(format!("node {node} does not exist")));
        }
        Ok(self.terminal_expectation(x)?.values()[node])
    }

    /// `E[X_{t+1} | node]` for a non-leaf node at time `t`.
    pub fn one_step_expectation(&self, x: &NodeProcess, node: usize) -> f64 {
        self.one_step_expectation_of(x.values(), node)
    }

    fn one_step_expectation_of(&self, x: &[f64], node: usize) -> f64 {
        self.children(node)
            .iter()
            .map(|&c| self.cond_prob(c) * x[c])
            .sum()
    }

    pub(crate) fn check(&self, x: &NodeProcess) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Increments `X(node) - X(parent)`, with `X(root)` at the root.
    pub fn increments(&self, x: &NodeProcess) -> NodeProcess {
        NodeProcess::from_vec(
            (0..self.len())
                .map(|i| match self.parent(i) {
                    Some(p) => x[i] - x[p],
                    None => x[i],
                })
                .collect(),
        )
    }

    /// Inverse of [`EventTree::increments`].
    pub fn cumulate(&self, dx: &NodeProcess) -> NodeProcess {
        let mut out = dx.values().to_vec();
        for i in 1..self.len() {
            let p = self.parent(i).expect("non-root node has a parent");
            out[i] += out[p];
        }
        NodeProcess::from_vec(out)
    }

    /// `E[sum_nodes V]` weighted by node probability.
    pub fn node_sum(&self, v: &[f64]) -> f64 {
        v.iter().enumerate().map(|(i, x)| self.prob(i) * x).sum()
    }
}
