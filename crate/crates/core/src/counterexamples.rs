//! Executable versions of the ways the relative-return preference relation
//! departs from a classical (complete, transitive, additive) order.
//!
//! All constructions live on a two-atom space `{A, A^c}` with `P[A] = p`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::preference::{insurance_level, insured_rel, rel};
use crate::space::{FiniteSpace, Outcome};

/// One `rel(numerator | denominator)` evaluation with its closed form.
#[derive(Debug, Clone, Serialize)]
pub struct RelCase {
    pub numerator: String,
    pub denominator: String,
    pub expected: f64,
    pub actual: f64,
}

impl RelCase {
    pub fn error(&self) -> f64 {
        if self.expected.is_infinite() && self.actual == self.expected {
            0.0
        } else {
            (self.expected - self.actual).abs()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Family {
    pub name: String,
    pub outcomes: Vec<(String, Outcome)>,
    pub cases: Vec<RelCase>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleSuite {
    pub p: f64,
    pub space: FiniteSpace,
    pub families: Vec<Family>,
}

impl CounterexampleSuite {
    pub fn family(&self, name: &str) -> Option<&Family> {
        self.families.iter().find(|f| f.name == name)
    }

    pub fn max_error(&self) -> f64 {
        self.families
            .iter()
            .flat_map(|f| &f.cases)
            .map(RelCase::error)
            .fold(0.0, f64::max)
    }
}

impl Family {
    pub fn case(&self, numerator: &str, denominator: &str) -> Option<&RelCase> {
        self.cases
            .iter()
            .find(|c| c.numerator == numerator && c.denominator == denominator)
    }

    fn outcome(&self, name: &str) -> &Outcome {
        &self.outcomes.iter().find(|(n, _)| n == name).unwrap().1
    }
}

fn two_point(on_a: f64, off_a: f64) -> Result<Outcome> {
    Outcome::new(vec![on_a, off_a])
}

fn build_family(
    space: &FiniteSpace,
    name: &str,
    outcomes: Vec<(&str, Outcome)>,
    expected: &[(&str, &str, f64)],
) -> Result<Family> {
    let mut fam = Family {
        name: name.to_string(),
        outcomes: outcomes
            .into_iter()
            .map(|(n, o)| (n.to_string(), o))
            .collect(),
        cases: Vec::new(),
    };
    for &(num, den, value) in expected {
        let actual = rel(space, fam.outcome(num), fam.outcome(den))?.value();
        fam.cases.push(RelCase {
            numerator: num.to_string(),
            denominator: den.to_string(),
            expected: value,
            actual,
        });
    }
    Ok(fam)
}

/// Closed form of `rel(1 + g | 1 + f)` for the addition example.
pub fn addition_flip_value(p: f64) -> f64 {
    p * (1.0 - p) * (p * p + p - 1.0) / ((1.0 + p * p) * (1.0 + (1.0 + p).powi(2)))
}

/// Builds every counterexample family for `P[A] = p`.
///
/// The addition family is only included for `p <= 1/2`, where the sign
/// flip is guaranteed.
pub fn counterexample_suite(p: f64) -> Result<CounterexampleSuite> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Parameter(format!("p must lie in (0, 1), got {p}")));
    }
    let space = FiniteSpace::new(vec!["A".into(), "not_A".into()], vec![p, 1.0 - p])?;
    let mut families = Vec::new();

    families.push(build_family(
        &space,
        "disjoint_indicators",
        vec![("f", two_point(0.0, 1.0)?), ("g", two_point(1.0, 0.0)?)],
        &[("f", "g", f64::INFINITY), ("g", "f", f64::INFINITY)],
    )?);

    families.push(build_family(
        &space,
        "incomparable",
        vec![
            ("f", two_point(1.0 / p, 1.0 - p)?),
            ("g", two_point(1.0, 1.0)?),
        ],
        &[("f", "g", (1.0 - p).powi(2)), ("g", "f", p * p)],
    )?);

    families.push(build_family(
        &space,
        "non_transitive",
        vec![
            ("f", two_point(1.0 / p, 0.0)?),
            ("g", two_point(1.0, 1.0)?),
            ("h", two_point(2.0 * p / (1.0 + p), 2.0)?),
        ],
        &[
            ("f", "g", 0.0),
            ("g", "h", 0.0),
            ("f", "h", (1.0 - p) / (2.0 * p)),
        ],
    )?);

    if p <= 0.5 {
        let g = two_point(p, 1.0 + p)?;
        let f = two_point(p * p, (1.0 + p).powi(2))?;
        let one = two_point(1.0, 1.0)?;
        families.push(build_family(
            &space,
            "addition",
            vec![
                ("one_plus_f", one.add(&f)?),
                ("one_plus_g", one.add(&g)?),
                ("f", f),
                ("g", g),
            ],
            &[
                ("f", "g", 0.0),
                ("one_plus_g", "one_plus_f", addition_flip_value(p)),
            ],
        )?);
    }

    Ok(CounterexampleSuite { p, space, families })
}

/// The insurance construction applied to the addition pair: the smallest
/// `N` with `rel(g + N g 1_{f<=g} | f + N g 1_{f<=g}) < 0`, and that value.
pub fn insurance_for_addition_pair(p: f64) -> Result<(u64, f64)> {
    let suite = counterexample_suite(p)?;
    let fam = suite
        .family("addition")
        .ok_or_else(|| Error::Parameter("addition example requires p <= 1/2".into()))?;
    let f = fam.outcome("f");
    let g = fam.outcome("g");
    let n = insurance_level(&suite.space, f, g)?;
    Ok((n, insured_rel(&suite.space, f, g, n)?.value()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_probability_values() {
        let s = counterexample_suite(0.5).unwrap();
        let nt = s.family("non_transitive").unwrap();
        assert!((nt.case("f", "h").unwrap().actual - 0.5).abs() < 1e-12);
        let inc = s.family("incomparable").unwrap();
        assert!((inc.case("f", "g").unwrap().actual - 0.25).abs() < 1e-12);
        assert!((inc.case("g", "f").unwrap().actual - 0.25).abs() < 1e-12);
        let add = s.family("addition").unwrap();
        let flip = add.case("one_plus_g", "one_plus_f").unwrap().actual;
        // 0.5 * 0.5 * (-0.25) / (1.25 * 3.25)
        assert!((flip - (-0.0625 / 4.0625)).abs() < 1e-12);
        assert!(flip < 0.0);
        assert!(s.max_error() < 1e-12);
    }

    #[test]
    fn addition_family_absent_above_half() {
        let s = counterexample_suite(0.7).unwrap();
        assert!(s.family("addition").is_none());
        assert!(s.family("non_transitive").is_some());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(counterexample_suite(0.0).is_err());
        assert!(counterexample_suite(1.0).is_err());
        assert!(counterexample_suite(f64::NAN).is_err());
    }

    #[test]
    fn insurance_flips_the_addition_pair() {
        let (n, value) = insurance_for_addition_pair(0.5).unwrap();
        assert!(value < 0.0);
        assert!(n >= 1);
    }
}
