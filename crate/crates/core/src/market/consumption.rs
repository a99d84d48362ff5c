use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::numeraire::numeraire_with_vertices;
use super::{random_strategy, vertex_strategies, wealth, Market, NumerairePortfolio, Strategy};
use crate::choice::geometry::dot;
use crate::decomposition::{decompose, measure_to_h, CanonicalPair, OptionalMeasure};
use crate::error::{Error, Result};
use crate::space::{safe_div, RelValue};
use crate::tree::{EventTree, NodeProcess};

/// Node weights `P[node] L(node) dK(node)`, i.e. the optional measure.
fn pair_weights(tree: &EventTree, pair: &CanonicalPair) -> Vec<f64> {
    (0..tree.len())
        .map(|i| tree.prob(i) * pair.l[i] * pair.dk[i])
        .collect()
}

fn check_support(
    tree: &EventTree,
    pair: &CanonicalPair,
    dc: &NodeProcess,
    what: &str,
) -> Result<()> {
    tree.check(dc)?;
    for i in 0..tree.len() {
        if dc[i] < 0.0 || !dc[i].is_finite() {
            return Err(Error::Domain(format!(
                "{what} has increment {} at node {i}",
                dc[i]
            )));
        }
        if dc[i] > 0.0 && pair.dk[i] <= 0.0 {
            return Err(Error::Domain(format!(
                "{what} consumes at node {i} where the clock does not move"
            )));
        }
    }
    Ok(())
}

/// `rel_p(C | G) = E[sum_t (dC / dG) L dK] - 1` for streams given by their
/// increments, both supported where `dK > 0`.
pub fn rel_streams(
    tree: &EventTree,
    pair: &CanonicalPair,
    c: &NodeProcess,
    g: &NodeProcess,
) -> Result<RelValue> {
    check_support(tree, pair, c, "first stream")?;
    check_support(tree, pair, g, "second stream")?;
    let w = pair_weights(tree, pair);
    let mut s = 0.0;
    for i in 0..tree.len() {
        if w[i] > 0.0 {
            s += w[i] * safe_div(c[i], g[i])?;
        }
    }
    Ok(RelValue::new(s - 1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalConsumption {
    pub x: f64,
    pub pair: CanonicalPair,
    pub numeraire: NumerairePortfolio,
    /// Increments `x X_hat dK`.
    pub c_hat: NodeProcess,
}

/// The optimal stream for capital `x` under the optional measure `q`:
/// invest in the numeraire portfolio of `L` and consume at the pace of `K`.
pub fn optimal_consumption(
    market: &Market,
    q: &OptionalMeasure,
    x: f64,
) -> Result<OptimalConsumption> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::Domain(format!("initial capital {x}")));
    }
    let tree = market.tree();
    let pair = decompose(tree, &measure_to_h(tree, q)?)?;
    let vertices = market.all_vertices()?;
    let numeraire = numeraire_with_vertices(market, &pair.l, &vertices)?;
    let c_hat = NodeProcess::from_vec(
        (0..tree.len())
            .map(|i| x * numeraire.wealth[i] * pair.dk[i])
            .collect(),
    );
    Ok(OptimalConsumption {
        x,
        pair,
        numeraire,
        c_hat,
    })
}

/// Test set of financeable streams `C = sum X^theta dF`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StreamGrid {
    /// Fraction of remaining budget consumed at each clock node.
    pub steps: Vec<f64>,
    /// Upper bound on strategy × fraction-stream combinations.
    pub cap: usize,
    /// Additional fully random (strategy, stream) pairs.
    pub random_streams: usize,
}

impl Default for StreamGrid {
    fn default() -> Self {
        StreamGrid {
            steps: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            cap: 10_000,
            random_streams: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalityReport {
    pub streams_tested: usize,
    /// True when the whole fraction grid was enumerated for every strategy.
    pub exhaustive: bool,
    pub worst_rel: f64,
    /// `rel(C_hat | C_hat)` recomputed through the stream machinery.
    pub self_rel: f64,
    pub passed: bool,
}

/// Cumulative fraction stream from per-node shares `a` of the remaining budget.
fn fraction_stream(tree: &EventTree, clock_nodes: &[usize], shares: &[f64]) -> Vec<f64> {
    let mut share = vec![0.0; tree.len()];
    for (&n, &a) in clock_nodes.iter().zip(shares) {
        share[n] = a;
    }
    let mut f = vec![0.0; tree.len()];
    for i in 0..tree.len() {
        let prev = tree.parent(i).map_or(0.0, |p| f[p]);
        f[i] = prev + (1.0 - prev) * share[i];
    }
    f
}

/// Checks `rel(C | C_hat) <= tol` over vertex strategies crossed with a grid of
/// fraction streams, plus random pairs.
pub fn consumption_optimality(
    market: &Market,
    opt: &OptimalConsumption,
    grid: &StreamGrid,
    seed: u64,
    tol: f64,
) -> Result<OptimalityReport> {
    let tree = market.tree();
    let pair = &opt.pair;
    let w = pair_weights(tree, pair);
    let clock: Vec<usize> = (0..tree.len()).filter(|&i| pair.dk[i] > 0.0).collect();
    let vertices = market.all_vertices()?;
    let strategies = vertex_strategies(market, &vertices);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // rel for (strategy wealth X, fraction stream F)
    let eval = |x_proc: &NodeProcess, f: &[f64]| -> Result<f64> {
        let mut s = 0.0;
        for &i in &clock {
            let prev = tree.parent(i).map_or(0.0, |p| f[p]);
            let c = x_proc[i] * (f[i] - prev);
            s += w[i] * safe_div(c, opt.c_hat[i])?;
        }
        Ok(s - 1.0)
    };

    let per_strategy = (grid.cap / strategies.len()).max(1);
    let radix = grid.steps.len();
    let total = (radix as f64).powi(clock.len() as i32);
    let exhaustive = total <= per_strategy as f64;
    let mut worst = f64::NEG_INFINITY;
    let mut tested = 0;
    let mut shares = vec![0.0; clock.len()];
    for theta in &strategies {
        let x_proc = wealth(market, opt.x, theta)?;
        let count = if exhaustive {
            total as usize
        } else {
            per_strategy
        };
        for idx in 0..count {
            if exhaustive {
                let mut r = idx;
                for s in shares.iter_mut() {
                    *s = grid.steps[r % radix];
                    r /= radix;
                }
            } else {
                for s in shares.iter_mut() {
                    *s = grid.steps[rng.random_range(0..radix)];
                }
            }
            let f = fraction_stream(tree, &clock, &shares);
            worst = worst.max(eval(&x_proc, &f)?);
            tested += 1;
        }
    }
    for _ in 0..grid.random_streams {
        let theta: Strategy = random_strategy(market, &vertices, &mut rng);
        let x_proc = wealth(market, opt.x, &theta)?;
        for s in shares.iter_mut() {
            *s = rng.random::<f64>();
        }
        let f = fraction_stream(tree, &clock, &shares);
        worst = worst.max(eval(&x_proc, &f)?);
        tested += 1;
    }
    let self_rel = eval(&opt.numeraire.wealth.scaled(opt.x), pair.k.values())?;
    Ok(OptimalityReport {
        streams_tested: tested,
        exhaustive,
        worst_rel: worst,
        self_rel,
        passed: worst <= tol && self_rel.abs() <= tol,
    })
}

/// Concave utilities for [`utility_functional`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utility {
    Log,
    Identity,
    Sqrt,
}

impl Utility {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Utility::Log => x.ln(),
            Utility::Identity => x,
            Utility::Sqrt => x.sqrt(),
        }
    }
}

/// `E[sum_t U(dF / dK) L dK]` for a cumulative fraction stream `F` with
/// `0 <= F <= 1`, nondecreasing and supported where `dK > 0`.
pub fn utility_functional(
    tree: &EventTree,
    pair: &CanonicalPair,
    f: &NodeProcess,
    u: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    tree.check(f)?;
    if f.values().iter().any(|v| !(0.0..=1.0 + 1e-12).contains(v)) {
        return Err(Error::Domain("fraction stream leaves [0, 1]".into()));
    }
    if f.max_decrease(tree) > 1e-12 {
        return Err(Error::Domain("fraction stream decreases".into()));
    }
    let df = NodeProcess::from_vec(
        tree.increments(f)
            .into_inner()
            .into_iter()
            .map(|v| v.max(0.0))
            .collect(),
    );
    check_support(tree, pair, &df, "fraction stream")?;
    let w = pair_weights(tree, pair);
    let mut s = 0.0;
    for i in 0..tree.len() {
        if w[i] > 0.0 {
            let v = u(df[i] / pair.dk[i]);
            if v.is_nan() {
                return Err(Error::Domain(format!(
                    "utility undefined at density {}",
                    df[i] / pair.dk[i]
                )));
            }
            s += w[i] * v;
        }
    }
    Ok(s)
}

/// Wealth net of consumption: `W = W(parent) (1 + <pi, r>) - dC`.
pub fn wealth_with_consumption(
    market: &Market,
    x: f64,
    pi: &[Vec<f64>],
    dc: &NodeProcess,
) -> Result<NodeProcess> {
    let tree = market.tree();
    tree.check(dc)?;
    let mut w = vec![0.0; tree.len()];
    w[0] = x - dc[0];
    for i in 1..tree.len() {
        let p = tree.parent(i).unwrap();
        w[i] = w[p] * (1.0 + dot(&pi[p], &market.returns(i))) - dc[i];
    }
    Ok(NodeProcess::from_vec(w))
}

/// Recovers `F` from `W = X (1 - F)`.
pub fn fraction_stream_from_wealth(
    tree: &EventTree,
    x_proc: &NodeProcess,
    w: &NodeProcess,
) -> Result<NodeProcess> {
    tree.check(x_proc)?;
    tree.check(w)?;
    let mut f = vec![0.0; tree.len()];
    for i in 0..tree.len() {
        f[i] = if x_proc[i] > 0.0 {
            1.0 - w[i] / x_proc[i]
        } else {
            tree.parent(i).map_or(0.0, |p| f[p])
        };
    }
    Ok(NodeProcess::from_vec(f))
}
