//! Optimal choice from convex sets of outcomes.

pub mod geometry;
pub mod optimizer;
mod simplex;

pub use simplex::{
    recover_probability, simplex_classify, ChoiceOracle, FullSimplex, Recovery, RelOracle,
    SimplexClass, SimplexPosition, REGEN_SIMPLICES,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::rel;
use crate::space::{FiniteSpace, Outcome};
use geometry::HalfSpaces;
use optimizer::maximize_log_over_hull;

/// A bounded polytope in the nonnegative orthant, stored by its vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr", into = "PolytopeRepr")]
pub struct Polytope {
    dim: usize,
    vertices: Vec<Vec<f64>>,
    halfspaces: Option<HalfSpaces>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum PolytopeRepr {
    Vertices(Vec<Vec<f64>>),
    Halfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

impl TryFrom<PolytopeRepr> for Polytope {
    type Error = Error;

    fn try_from(r: PolytopeRepr) -> Result<Self> {
        match r {
            PolytopeRepr::Vertices(v) => Polytope::from_vertices(v),
            PolytopeRepr::Halfspaces { normals, offsets } => {
                Polytope::from_halfspaces(normals, offsets)
            }
        }
    }
}

impl From<Polytope> for PolytopeRepr {
    fn from(p: Polytope) -> Self {
        match p.halfspaces {
            Some(hs) => {
                // drop the implicit nonnegativity rows
                let m = hs.normals.len() - hs.dim;
                PolytopeRepr::Halfspaces {
                    normals: hs.normals[..m].to_vec(),
                    offsets: hs.offsets[..m].to_vec(),
                }
            }
            None => PolytopeRepr::Vertices(p.vertices),
        }
    }
}

impl Polytope {
    pub fn from_vertices(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let dim = vertices
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Infeasible("polytope has no vertices".into()))?;
        if dim == 0 {
            return Err(Error::InvalidPolytope("zero-dimensional outcomes".into()));
        }
        for v in &vertices {
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidPolytope(
                    "vertices must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(Polytope {
            dim,
            vertices,
            halfspaces: None,
        })
    }

    /// `{f >= 0 : <a_k, f> <= b_k}`; must be nonempty and bounded.
    pub fn from_halfspaces(normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let dim = normals
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidPolytope("no constraints given".into()))?;
        let hs = HalfSpaces::new(normals, offsets, dim)?.with_nonnegativity();
        if !hs.is_bounded()? {
            return Err(Error::InvalidPolytope("constraint set is unbounded".into()));
        }
        let vertices = hs.vertices()?;
        if vertices.is_empty() {
            return Err(Error::Infeasible("constraint set is empty".into()));
        }
        Ok(Polytope {
            dim,
            vertices,
            halfspaces: Some(hs),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// Membership test; available for half-space inputs only.
    pub fn contains(&self, f: &[f64]) -> Option<bool> {
        self.halfspaces
            .as_ref()
            .map(|hs| hs.contains(f, geometry::GEOM_TOL))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LogOptimum {
    pub outcome: Outcome,
    /// `max_v rel(v | f_hat)` over the vertices of the set.
    pub certificate: f64,
    /// Mixture weights on the vertices.
    pub lambda: Vec<f64>,
    /// Positive-weight atoms forced to zero by the set.
    pub null_atoms: Vec<usize>,
}

/// The element of `set` maximizing `E[log f]`, equivalently the unique
/// `f_hat` with `f ≼ f_hat` for every `f` in the set.
pub fn log_optimal(space: &FiniteSpace, set: &Polytope) -> Result<LogOptimum> {
    space.check_len(set.dim())?;
    let opt = maximize_log_over_hull(space.weights(), set.vertices())?;
    let outcome = Outcome::new(opt.point.iter().map(|x| x.max(0.0)).collect())?;
    let mut certificate = f64::NEG_INFINITY;
    for v in set.vertices() {
        let r = rel(space, &Outcome::new(v.clone())?, &outcome)?.value();
        certificate = certificate.max(r);
    }
    if certificate > optimizer::CERT_TOL {
        return Err(Error::NoConvergence {
            iterations: opt.iterations,
            certificate,
        });
    }
    Ok(LogOptimum {
        outcome,
        certificate,
        lambda: opt.lambda,
        null_atoms: opt.null_atoms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogRelation {
    FBelowG,
    GBelowF,
    Equivalent,
}

/// Relative tolerance for declaring two expected logarithms equal.
pub const LOG_EQ_TOL: f64 = 1e-12;

/// Transitive extension: compares `E[log f]` with `E[log g]` on strictly
/// positive outcomes.
pub fn log_relation(space: &FiniteSpace, f: &Outcome, g: &Outcome) -> Result<LogRelation> {
    space.check_len(f.len())?;
    space.check_len(g.len())?;
    if !f.is_strictly_positive() || !g.is_strictly_positive() {
        return Err(Error::Domain(
            "log relation is defined for strictly positive outcomes only".into(),
        ));
    }
    let lf = space.expect(&f.values().iter().map(|x| x.ln()).collect::<Vec<_>>())?;
    let lg = space.expect(&g.values().iter().map(|x| x.ln()).collect::<Vec<_>>())?;
    let scale = 1.0 + lf.abs().max(lg.abs());
    Ok(if (lf - lg).abs() <= LOG_EQ_TOL * scale {
        LogRelation::Equivalent
    } else if lf < lg {
        LogRelation::FBelowG
    } else {
        LogRelation::GBelowF
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(v: &[f64]) -> Outcome {
        Outcome::new(v.to_vec()).unwrap()
    }

    #[test]
    fn unit_box_optimum_is_one() {
        let space = FiniteSpace::from_weights(vec![0.3, 0.7]).unwrap();
        let c = Polytope::from_halfspaces(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0])
            .unwrap();
        let opt = log_optimal(&space, &c).unwrap();
        assert!(opt.outcome.values().iter().all(|x| (x - 1.0).abs() < 1e-9));
    }

    #[test]
    fn triangle_optimum_against_grid() {
        let space = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        let c =
            Polytope::from_vertices(vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let opt = log_optimal(&space, &c).unwrap();
        // brute force over barycentric grid
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let m = 400;
        for a in 0..=m {
            for b in 0..=(m - a) {
                let (la, lb) = (a as f64 / m as f64, b as f64 / m as f64);
                let lc = 1.0 - la - lb;
                let x = 2.0 * la + lc;
                let y = 2.0 * lb + lc;
                let v = 0.5 * x.ln() + 0.5 * y.ln();
                if v > best.0 {
                    best = (v, x, y);
                }
            }
        }
        assert!((best.1 - 1.0).abs() < 1e-6 && (best.2 - 1.0).abs() < 1e-6);
        assert!((opt.outcome.values()[0] - best.1).abs() < 1e-6);
        assert!((opt.outcome.values()[1] - best.2).abs() < 1e-6);
    }

    #[test]
    fn empty_and_unbounded_sets_rejected() {
        assert!(matches!(
            Polytope::from_halfspaces(vec![vec![1.0, 1.0]], vec![-1.0]),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            Polytope::from_halfspaces(vec![vec![1.0, 0.0]], vec![1.0]),
            Err(Error::InvalidPolytope(_))
        ));
        assert!(Polytope::from_vertices(vec![]).is_err());
    }

    #[test]
    fn forced_zero_atom_gets_maximal_support() {
        let space = FiniteSpace::from_weights(vec![0.4, 0.6]).unwrap();
        let c = Polytope::from_vertices(vec![vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let opt = log_optimal(&space, &c).unwrap();
        assert_eq!(opt.null_atoms, vec![1]);
        assert!((opt.outcome.values()[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn polytope_json_forms() {
        let p: Polytope = serde_json::from_str(r#"{"vertices":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(p.vertices().len(), 2);
        let q: Polytope =
            serde_json::from_str(r#"{"halfspaces":{"normals":[[1,1]],"offsets":[1]}}"#).unwrap();
        assert_eq!(q.vertices().len(), 3);
        assert_eq!(q.contains(&[0.2, 0.2]), Some(true));
        assert_eq!(q.contains(&[0.8, 0.8]), Some(false));
        let back: Polytope = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn log_relation_cases() {
        let s = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        assert_eq!(
            log_relation(&s, &o(&[1.0, 1.0]), &o(&[2.0, 2.0])).unwrap(),
            LogRelation::FBelowG
        );
        // equal geometric means
        assert_eq!(
            log_relation(&s, &o(&[2.0, 0.5]), &o(&[1.0, 1.0])).unwrap(),
            LogRelation::Equivalent
        );
        assert!(matches!(
            log_relation(&s, &o(&[0.0, 1.0]), &o(&[1.0, 1.0])),
            Err(Error::Domain(_))
        ));
    }
}
