use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::numeraire::numeraire_with_vertices;
use super::{random_strategy, vertex_strategies, wealth, Market};
use crate::decomposition::decompose;
use crate::error::Result;
use crate::space::safe_div;
use crate::tree::{dual_optional_projection, RandomTime};

#[derive(Debug, Clone, Serialize)]
pub struct RandomTimeReport {
    pub is_stopping_time: bool,
    pub strategies_tested: usize,
    /// Largest `E[X_T / X_hat^L_T]` over tested strategies with `X_0 = 1`.
    pub worst_ratio: f64,
    /// Largest plain `E[X_T]`; not covered by the inequality on trees.
    pub worst_plain: f64,
    /// Largest `E[X_T' / X_hat^L_T']` with `T'` the first time `L` peaks on
    /// each path. On trees `L` jumps down, so this is informational.
    pub argmax_ratio: f64,
    pub passed: bool,
}

/// Samples wealth at a random time `T`: builds the optional measure
/// `V -> E[V_T]`, its canonical pair and the numeraire portfolio of `L`, then
/// evaluates `E[X_T / X_hat^L_T]` exactly for vertex and random strategies.
pub fn random_time_check(
    market: &Market,
    time: &RandomTime,
    random_strategies: usize,
    seed: u64,
    tol: f64,
) -> Result<RandomTimeReport> {
    let tree = market.tree();
    let h = dual_optional_projection(tree, time)?;
    let pair = decompose(tree, &h)?;
    let vertices = market.all_vertices()?;
    let np = numeraire_with_vertices(market, &pair.l, &vertices)?;
    let peak = RandomTime::argmax(tree, &pair.l)?;
    let at_t = time.nodes(tree);
    let at_peak = peak.nodes(tree);

    let mut strategies = vertex_strategies(market, &vertices);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_strategies {
        strategies.push(random_strategy(market, &vertices, &mut rng));
    }
    let (mut worst, mut plain, mut argmax) =
        (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for theta in &strategies {
        let x = wealth(market, 1.0, theta)?;
        let (mut r, mut p, mut a) = (0.0, 0.0, 0.0);
        for ((&leaf, &n), &m) in tree.leaves().iter().zip(&at_t).zip(&at_peak) {
            let w = tree.prob(leaf);
            r += w * safe_div(x[n], np.wealth[n])?;
            p += w * x[n];
            a += w * safe_div(x[m], np.wealth[m])?;
        }
        worst = worst.max(r);
        plain = plain.max(p);
        argmax = argmax.max(a);
    }
    Ok(RandomTimeReport {
        is_stopping_time: time.is_stopping_time(tree),
        strategies_tested: strategies.len(),
        worst_ratio: worst,
        worst_plain: plain,
        argmax_ratio: argmax,
        passed: worst <= 1.0 + tol,
    })
}
