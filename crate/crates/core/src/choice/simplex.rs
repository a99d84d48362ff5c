use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{log_optimal, Polytope};
use crate::error::{Error, Result};
use crate::space::{FiniteSpace, Outcome};

/// Tolerance on the budget equality `sum mu_i f_i = 1`.
pub const MAXIMAL_TOL: f64 = 1e-10;

/// Number of random simplices used to confirm a recovered probability.
pub const REGEN_SIMPLICES: usize = 20;

/// Relative tolerance of the regeneration check.
pub const REGEN_TOL: f64 = 1e-7;

/// The budget set `{f >= 0 : sum_i mu_i f_i <= 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimplexRepr", into = "SimplexRepr")]
pub struct FullSimplex {
    mu: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimplexRepr {
    mu: Vec<f64>,
}

impl TryFrom<SimplexRepr> for FullSimplex {
    type Error = Error;
    fn try_from(r: SimplexRepr) -> Result<Self> {
        FullSimplex::new(r.mu)
    }
}

impl From<FullSimplex> for SimplexRepr {
    fn from(s: FullSimplex) -> Self {
        SimplexRepr { mu: s.mu }
    }
}

impl FullSimplex {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidPolytope(
                "simplex needs at least one atom".into(),
            ));
        }
        if mu.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidPolytope(
                "simplex prices must be strictly positive".into(),
            ));
        }
        Ok(FullSimplex { mu })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn budget(&self, f: &[f64]) -> f64 {
        self.mu.iter().zip(f).map(|(m, x)| m * x).sum()
    }

    /// Vertices `0` and `e_i / mu_i`.
    pub fn polytope(&self) -> Polytope {
        let n = self.mu.len();
        let mut v = vec![vec![0.0; n]];
        for (i, m) in self.mu.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[i] = 1.0 / m;
            v.push(e);
        }
        Polytope::from_vertices(v).expect("simplex vertices are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimplexClass {
    Exterior,
    Interior,
    Maximal,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimplexPosition {
    pub class: SimplexClass,
    /// `a = sum mu_i f_i`.
    pub scale: f64,
    /// `f / a`, the maximal element on the ray through `f`, when `a > 0`.
    pub maximal_element: Option<Outcome>,
}

/// Locates `f` relative to the budget set; every nonzero element is
/// `a` times a maximal element with `a = sum mu_i f_i`.
pub fn simplex_classify(
    space: &FiniteSpace,
    simplex: &FullSimplex,
    f: &Outcome,
) -> Result<SimplexPosition> {
    space.check_len(simplex.len())?;
    space.check_len(f.len())?;
    let a = simplex.budget(f.values());
    let class = if (a - 1.0).abs() <= MAXIMAL_TOL {
        SimplexClass::Maximal
    } else if a < 1.0 {
        SimplexClass::Interior
    } else {
        SimplexClass::Exterior
    };
    let maximal_element = if a > 0.0 {
        Some(f.scaled(1.0 / a)?)
    } else {
        None
    };
    Ok(SimplexPosition {
        class,
        scale: a,
        maximal_element,
    })
}

/// A choice rule answering the best element of each full simplex.
pub trait ChoiceOracle {
    fn choose(&self, simplex: &FullSimplex) -> Result<Outcome>;
}

impl<F> ChoiceOracle for F
where
    F: Fn(&FullSimplex) -> Result<Outcome>,
{
    fn choose(&self, simplex: &FullSimplex) -> Result<Outcome> {
        self(simplex)
    }
}

/// Choices generated by the relative-return preference under a probability.
#[derive(Debug, Clone)]
pub struct RelOracle {
    pub space: FiniteSpace,
}

impl ChoiceOracle for RelOracle {
    fn choose(&self, simplex: &FullSimplex) -> Result<Outcome> {
        Ok(log_optimal(&self.space, &simplex.polytope())?.outcome)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Recovery {
    pub weights: Vec<f64>,
    /// Worst relative deviation between the oracle and the recovered
    /// probability over the regeneration simplices.
    pub regeneration_error: f64,
    pub simplices_checked: usize,
}

/// Recovers the probability generating a choice rule from its answer on the
/// uniform-reference simplex, then confirms it on random simplices.
pub fn recover_probability(
    oracle: &dyn ChoiceOracle,
    n_atoms: usize,
    seed: u64,
) -> Result<Recovery> {
    if n_atoms == 0 {
        return Err(Error::Parameter("need at least one atom".into()));
    }
    let n = n_atoms as f64;
    let reference = FullSimplex::new(vec![1.0 / n; n_atoms])?;
    let g = oracle.choose(&reference)?;
    if g.len() != n_atoms {
        return Err(Error::Dimension {
            expected: n_atoms,
            got: g.len(),
        });
    }
    let budget = reference.budget(g.values());
    if (budget - 1.0).abs() > MAXIMAL_TOL {
        return Err(Error::AxiomViolation(format!(
            "choice on the reference simplex is not maximal (budget {budget})"
        )));
    }
    if !g.is_strictly_positive() {
        return Err(Error::AxiomViolation(
            "choice on the reference simplex is not strictly positive".into(),
        ));
    }
    let weights: Vec<f64> = g.values().iter().map(|x| x / n).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..REGEN_SIMPLICES {
        let mu: Vec<f64> = (0..n_atoms).map(|_| rng.random_range(0.1..10.0)).collect();
        let simplex = FullSimplex::new(mu)?;
        let chosen = oracle.choose(&simplex)?;
        for (i, (&c, (&w, &m))) in chosen
            .values()
            .iter()
            .zip(weights.iter().zip(simplex.mu()))
            .enumerate()
        {
            let predicted = w / m;
            let err = (c - predicted).abs() / predicted.max(1.0);
            worst = worst.max(err);
            if err > REGEN_TOL {
                return Err(Error::AxiomViolation(format!(
                    "simplex {k}: atom {i} chosen {c}, recovered probability predicts {predicted}"
                )));
            }
        }
    }
    Ok(Recovery {
        weights,
        regeneration_error: worst,
        simplices_checked: REGEN_SIMPLICES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        let s = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        let b = FullSimplex::new(vec![1.0, 1.0]).unwrap();
        let pos = simplex_classify(&s, &b, &Outcome::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(pos.class, SimplexClass::Maximal);

        let zero = simplex_classify(&s, &b, &Outcome::new(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(zero.class, SimplexClass::Interior);
        assert_eq!(zero.scale, 0.0);
        assert!(zero.maximal_element.is_none());

        let b2 = FullSimplex::new(vec![2.0, 1.0]).unwrap();
        let pos = simplex_classify(&s, &b2, &Outcome::new(vec![0.3, 0.4]).unwrap()).unwrap();
        assert_eq!(pos.class, SimplexClass::Maximal);

        let ext = simplex_classify(&s, &b, &Outcome::new(vec![1.0, 0.5]).unwrap()).unwrap();
        assert_eq!(ext.class, SimplexClass::Exterior);
        let m = ext.maximal_element.unwrap();
        assert!((b.budget(m.values()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_two_point_probability() {
        let space = FiniteSpace::from_weights(vec![0.2, 0.8]).unwrap();
        let rec = recover_probability(&RelOracle { space }, 2, 7).unwrap();
        assert!((rec.weights[0] - 0.2).abs() < 1e-8);
        assert!((rec.weights[1] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn uniform_oracle_recovers_uniform() {
        let space = FiniteSpace::uniform(4).unwrap();
        let rec = recover_probability(&RelOracle { space }, 4, 1).unwrap();
        for w in rec.weights {
            assert!((w - 0.25).abs() < 1e-8);
        }
    }

    #[test]
    fn equal_split_oracle_violates_axioms() {
        // answers the point of the budget line with equal coordinates
        let oracle = |b: &FullSimplex| {
            let c = 1.0 / b.mu().iter().sum::<f64>();
            Outcome::new(vec![c; b.len()])
        };
        let err = recover_probability(&oracle, 3, 3).unwrap_err();
        assert!(matches!(err, Error::AxiomViolation(ref m) if m.contains("simplex")));
    }

    #[test]
    fn barycenter_oracle_is_not_maximal() {
        // barycenter of {0, e_i / mu_i}
        let oracle = |b: &FullSimplex| {
            let k = (b.len() + 1) as f64;
            Outcome::new(b.mu().iter().map(|m| 1.0 / (k * m)).collect())
        };
        let err = recover_probability(&oracle, 3, 3).unwrap_err();
        assert!(matches!(err, Error::AxiomViolation(ref m) if m.contains("not maximal")));
    }
}
