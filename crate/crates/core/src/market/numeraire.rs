use serde::Serialize;

use super::{wealth, Market, Strategy};
use crate::choice::geometry::dot;
use crate::choice::optimizer::maximize_log_over_hull;
use crate::error::{Error, Result};
use crate::tree::{martingale_class, MartingaleClass, NodeProcess};

/// Slack allowed in the one-step supermartingale certificate.
pub const SUPERMART_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct NumerairePortfolio {
    pub fractions: Strategy,
    /// Wealth from unit capital.
    pub wealth: NodeProcess,
    /// Largest `E[L (1 + <pi, r>) / (1 + <pi_hat, r>) | node] / L(node) - 1`
    /// over admissible vertices `pi` and nodes with `L > 0`.
    pub certificate: f64,
}

/// The wealth process `X_hat` making `L X / X_hat` a supermartingale for every
/// admissible `X`, computed node by node as a log-optimal choice under the
/// one-step probabilities reweighted by `L`.
pub fn numeraire_portfolio(market: &Market, l: &NodeProcess) -> Result<NumerairePortfolio> {
    let vertices = market.all_vertices()?;
    numeraire_with_vertices(market, l, &vertices)
}

pub(crate) fn numeraire_with_vertices(
    market: &Market,
    l: &NodeProcess,
    vertices: &[Vec<Vec<f64>>],
) -> Result<NumerairePortfolio> {
    let tree = market.tree();
    tree.check(l)?;
    if (l[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!("L starts at {}, not 1", l[0])));
    }
    if l.values().iter().any(|v| *v < 0.0) {
        return Err(Error::Precondition("L must be nonnegative".into()));
    }
    let class = martingale_class(tree, l)?;
    if class.class != MartingaleClass::Martingale {
        return Err(Error::Precondition(format!(
            "L is not a martingale (largest drift {:e})",
            class.max_abs_drift()
        )));
    }
    let d = market.dim();
    let mut fractions: Strategy = vec![vec![0.0; d]; tree.len()];
    let mut certificate = f64::NEG_INFINITY;
    for node in 0..tree.len() {
        if tree.is_leaf(node) || l[node] <= 0.0 || d == 0 {
            continue;
        }
        let kids = tree.children(node);
        let mut w: Vec<f64> = kids.iter().map(|&c| tree.cond_prob(c) * l[c]).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let rets: Vec<Vec<f64>> = kids.iter().map(|&c| market.returns(c)).collect();
        let growth =
            |pi: &[f64]| -> Vec<f64> { rets.iter().map(|r| (1.0 + dot(pi, r)).max(0.0)).collect() };
        let verts = &vertices[node];
        let outcomes: Vec<Vec<f64>> = verts.iter().map(|v| growth(v)).collect();
        let opt = maximize_log_over_hull(&w, &outcomes).map_err(|e| match e {
            Error::NoConvergence { .. } => Error::NotViable {
                node,
                reason: format!("one-step log-optimal problem failed: {e}"),
            },
            other => other,
        })?;
        let mut pi = vec![0.0; d];
        for (lam, v) in opt.lambda.iter().zip(verts) {
            for (p, x) in pi.iter_mut().zip(v) {
                *p += lam * x;
            }
        }
        let base = growth(&pi);
        for v in verts {
            let g = growth(v);
            let mut e = 0.0;
            for ((wc, gc), bc) in w.iter().zip(&g).zip(&base) {
                if *wc > 0.0 {
                    e += wc * crate::space::div_unchecked(*gc, *bc);
                }
            }
            certificate = certificate.max(e - 1.0);
        }
        fractions[node] = pi;
    }
    if certificate > SUPERMART_TOL {
        return Err(Error::NoConvergence {
            iterations: 0,
            certificate,
        });
    }
    let wealth = wealth(market, 1.0, &fractions)?;
    Ok(NumerairePortfolio {
        fractions,
        wealth,
        certificate: if certificate.is_finite() {
            certificate
        } else {
            0.0
        },
    })
}
