//! Discrete-time markets on event trees.
//!
//! Prices are discounted by the bank account. Portfolios are fractions of
//! wealth `pi` chosen at a node and held over the step to its children, so
//! `X(child) = X(node) (1 + <pi, r_child>)` with `r_child = S(child) / S(node) - 1`.

mod consumption;
mod numeraire;
mod sampling;

pub use consumption::{
    consumption_optimality, fraction_stream_from_wealth, optimal_consumption, rel_streams,
    utility_functional, wealth_with_consumption, OptimalConsumption, OptimalityReport, StreamGrid,
    Utility,
};
pub use numeraire::{numeraire_portfolio, NumerairePortfolio, SUPERMART_TOL};
pub use sampling::{random_time_check, RandomTimeReport};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::choice::geometry::{dot, HalfSpaces, GEOM_TOL};
use crate::error::{Error, Result};
use crate::tree::{EventTree, NodeProcess};

/// Constraint set on portfolio fractions, identical at every node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FractionSet {
    /// `{pi >= 0, sum pi <= 1}`.
    #[default]
    LongOnly,
    /// All of `R^d`; only the nonnegative-wealth constraint applies.
    Unconstrained,
    /// `{pi : A pi <= b}` with `b >= 0` so that `0` is admissible.
    Halfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

impl FractionSet {
    pub fn halfspaces(&self, d: usize) -> Result<HalfSpaces> {
        match self {
            FractionSet::LongOnly => {
                let hs = HalfSpaces::new(vec![vec![1.0; d]], vec![1.0], d)?;
                Ok(hs.with_nonnegativity())
            }
            FractionSet::Unconstrained => HalfSpaces::new(vec![], vec![], d),
            FractionSet::Halfspaces { normals, offsets } => {
                if offsets.iter().any(|b| *b < 0.0) {
                    return Err(Error::InvalidPolytope(
                        "fraction constraints must admit the zero portfolio".into(),
                    ));
                }
                HalfSpaces::new(normals.clone(), offsets.clone(), d)
            }
        }
    }
}

/// Asset prices and portfolio constraints on a tree.
#[derive(Debug, Clone)]
pub struct Market {
    tree: EventTree,
    prices: Vec<NodeProcess>,
    constraints: FractionSet,
    kset: HalfSpaces,
}

impl Market {
    pub fn new(
        tree: EventTree,
        prices: Vec<NodeProcess>,
        constraints: FractionSet,
    ) -> Result<Self> {
        for (a, s) in prices.iter().enumerate() {
            if s.len() != tree.len() {
                return Err(Error::Dimension {
                    expected: tree.len(),
                    got: s.len(),
                });
            }
            if let Some(i) = s.values().iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidProcess(format!(
                    "asset {a} has nonpositive price at node {i}"
                )));
            }
        }
        let kset = constraints.halfspaces(prices.len())?;
        Ok(Market {
            tree,
            prices,
            constraints,
            kset,
        })
    }

    /// Market with no risky assets.
    pub fn empty(tree: EventTree) -> Self {
        Self::new(tree, Vec::new(), FractionSet::LongOnly).expect("empty market is valid")
    }

    /// Random market: random tree of depth `1..=max_depth` with up to three
    /// branches per node, `1..=max_assets` assets with lognormal one-step
    /// returns, long-only constraints.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_depth: usize, max_assets: usize) -> Self {
        let depth = rng.random_range(1..=max_depth);
        let tree = EventTree::random(rng, depth, 3);
        let d = rng.random_range(1..=max_assets);
        let vol = rng.random_range(0.1..0.5);
        let prices = (0..d)
            .map(|_| {
                let mut s = vec![1.0; tree.len()];
                for i in 1..tree.len() {
                    let p = tree.parent(i).unwrap();
                    let z: f64 = StandardNormal.sample(rng);
                    s[i] = s[p] * (vol * z).exp();
                }
                NodeProcess::from_vec(s)
            })
            .collect();
        Self::new(tree, prices, FractionSet::LongOnly).expect("random market is valid")
    }

    pub fn tree(&self) -> &EventTree {
        &self.tree
    }

    pub fn prices(&self) -> &[NodeProcess] {
        &self.prices
    }

    pub fn constraints(&self) -> &FractionSet {
        &self.constraints
    }

    /// Number of risky assets.
    pub fn dim(&self) -> usize {
        self.prices.len()
    }

    /// Price relatives `S(child) / S(node) - 1` of a non-root node.
    pub fn returns(&self, child: usize) -> Vec<f64> {
        let p = self
            .tree
            .parent(child)
            .expect("returns need a non-root node");
        self.prices.iter().map(|s| s[child] / s[p] - 1.0).collect()
    }

    pub fn admissible(&self, pi: &[f64]) -> bool {
        pi.len() == self.dim() && self.kset.contains(pi, GEOM_TOL)
    }

    /// Vertices of `K ∩ {pi : 1 + <pi, r_c> >= 0 for all children c}` at a
    /// non-leaf node; sorted lexicographically.
    pub fn node_vertices(&self, node: usize) -> Result<Vec<Vec<f64>>> {
        let d = self.dim();
        if d == 0 {
            return Ok(vec![Vec::new()]);
        }
        let mut hs = self.kset.clone();
        for &c in self.tree.children(node) {
            let r = self.returns(c);
            hs.push(r.iter().map(|x| -x).collect(), 1.0);
        }
        if !hs.is_bounded()? {
            return Err(Error::NotViable {
                node,
                reason: "admissible fractions are unbounded".into(),
            });
        }
        let v = hs.vertices()?;
        if v.is_empty() {
            return Err(Error::NotViable {
                node,
                reason: "no admissible fractions".into(),
            });
        }
        Ok(v)
    }

    /// Vertex lists for every non-leaf node (empty at leaves).
    pub fn all_vertices(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        (0..self.tree.len())
            .map(|i| {
                if self.tree.is_leaf(i) {
                    Ok(Vec::new())
                } else {
                    self.node_vertices(i)
                }
            })
            .collect()
    }
}

/// Fractions per node; entries at leaves are ignored.
pub type Strategy = Vec<Vec<f64>>;

/// Wealth `X` from initial capital `x` under fractions `pi`.
pub fn wealth(market: &Market, x: f64, pi: &[Vec<f64>]) -> Result<NodeProcess> {
    let tree = market.tree();
    if pi.len() != tree.len() {
        return Err(Error::Dimension {
            expected: tree.len(),
            got: pi.len(),
        });
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain(format!("initial capital {x}")));
    }
    for (i, p) in pi.iter().enumerate() {
        if !tree.is_leaf(i) && !market.admissible(p) {
            return Err(Error::Infeasible(format!(
                "fractions {p:?} at node {i} violate the constraints"
            )));
        }
    }
    let mut out = vec![0.0; tree.len()];
    out[0] = x;
    for i in 1..tree.len() {
        let p = tree.parent(i).unwrap();
        let growth = 1.0 + dot(&pi[p], &market.returns(i));
        let v = out[p] * growth;
        if v < 0.0 {
            if v < -GEOM_TOL * out[p].max(1.0) {
                return Err(Error::Infeasible(format!(
                    "wealth turns negative ({v}) at node {i}"
                )));
            }
            out[i] = 0.0;
        } else {
            out[i] = v;
        }
    }
    Ok(NodeProcess::from_vec(out))
}

/// Strategies picking, at every node, the `k`-th admissible vertex (cyclically)
/// for `k` up to the largest vertex count.
pub fn vertex_strategies(market: &Market, vertices: &[Vec<Vec<f64>>]) -> Vec<Strategy> {
    let count = vertices.iter().map(Vec::len).max().unwrap_or(0).max(1);
    (0..count)
        .map(|k| {
            vertices
                .iter()
                .map(|v| {
                    if v.is_empty() {
                        vec![0.0; market.dim()]
                    } else {
                        v[k % v.len()].clone()
                    }
                })
                .collect()
        })
        .collect()
}

/// Random mixture of the admissible vertices at every node.
pub fn random_strategy<R: Rng + ?Sized>(
    market: &Market,
    vertices: &[Vec<Vec<f64>>],
    rng: &mut R,
) -> Strategy {
    vertices
        .iter()
        .map(|v| {
            let mut pi = vec![0.0; market.dim()];
            if v.is_empty() {
                return pi;
            }
            let w: Vec<f64> = v
                .iter()
                .map(|_| -rng.random::<f64>().max(1e-300).ln())
                .collect();
            let s: f64 = w.iter().sum();
            for (wj, vj) in w.iter().zip(v) {
                for (p, x) in pi.iter_mut().zip(vj) {
                    *p += wj / s * x;
                }
            }
            pi
        })
        .collect()
}

/// Price descriptions accepted in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PriceSpec {
    /// One price per node for each asset.
    Nodes(Vec<Vec<f64>>),
    /// For lattice trees: per asset, an initial price and one multiplicative
    /// factor per branch.
    Factors {
        s0: Vec<f64>,
        factors: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    #[serde(default)]
    pub prices: Option<PriceSpec>,
    #[serde(default)]
    pub constraints: FractionSet,
}

impl MarketSpec {
    pub fn build(&self, tree: &EventTree) -> Result<Market> {
        let prices = match &self.prices {
            None => Vec::new(),
            Some(PriceSpec::Nodes(rows)) => rows
                .iter()
                .map(|r| NodeProcess::new(tree, r.clone()))
                .collect::<Result<_>>()?,
            Some(PriceSpec::Factors { s0, factors }) => {
                if s0.len() != factors.len() {
                    return Err(Error::Dimension {
                        expected: s0.len(),
                        got: factors.len(),
                    });
                }
                s0.iter()
                    .zip(factors)
                    .map(|(&start, f)| {
                        let mut s = vec![start; tree.len()];
                        for i in 0..tree.len() {
                            let kids = tree.children(i);
                            if !kids.is_empty() && kids.len() != f.len() {
                                return Err(Error::Dimension {
                                    expected: kids.len(),
                                    got: f.len(),
                                });
                            }
                            for (j, &c) in kids.iter().enumerate() {
                                s[c] = s[i] * f[j];
                            }
                        }
                        NodeProcess::new(tree, s)
                    })
                    .collect::<Result<_>>()?
            }
        };
        Market::new(tree.clone(), prices, self.constraints.clone())
    }
}
