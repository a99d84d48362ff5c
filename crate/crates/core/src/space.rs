//! Finite probability spaces, nonnegative outcomes and the division
//! conventions used throughout the crate.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Absolute tolerance for atomwise equality of outcomes.
pub const EQ_TOL: f64 = 1e-12;

/// Division on the extended nonnegative half-line.
///
/// `x / 0 = +inf` for `x > 0` and `0 / 0 = 1`.
pub fn safe_div(x: f64, y: f64) -> Result<f64> {
    if !(x >= 0.0) || !(y >= 0.0) {
        return Err(Error::Domain(format!(
            "safe_div needs nonnegative arguments, got ({x}, {y})"
        )));
    }
    Ok(div_unchecked(x, y))
}

/// [`safe_div`] for arguments already known to be nonnegative.
#[inline]
pub(crate) fn div_unchecked(x: f64, y: f64) -> f64 {
    if y > 0.0 {
        x / y
    } else if x > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// A probability on finitely many atoms, every atom carrying positive mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct FiniteSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceRepr {
    #[serde(default)]
    labels: Vec<String>,
    weights: Vec<f64>,
}

impl TryFrom<SpaceRepr> for FiniteSpace {
    type Error = Error;

    fn try_from(r: SpaceRepr) -> Result<Self> {
        if r.labels.is_empty() {
            FiniteSpace::from_weights(r.weights)
        } else {
            FiniteSpace::new(r.labels, r.weights)
        }
    }
}

impl From<FiniteSpace> for SpaceRepr {
    fn from(s: FiniteSpace) -> Self {
        SpaceRepr {
            labels: s.labels,
            weights: s.weights,
        }
    }
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidSpace("at least one atom is required".into()));
        }
        if labels.len() != weights.len() {
            return Err(Error::Dimension {
                expected: weights.len(),
                got: labels.len(),
            });
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidSpace(format!(
                "atom {i} has weight {w}; weights must be strictly positive"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidSpace(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(FiniteSpace { labels, weights })
    }

    /// Space with labels `w0, w1, ...`.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let labels = (0..weights.len()).map(|i| format!("w{i}")).collect();
        FiniteSpace::new(labels, weights)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSpace("at least one atom is required".into()));
        }
        FiniteSpace::from_weights(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Expectation of a per-atom quantity.
    pub fn expect(&self, values: &[f64]) -> Result<f64> {
        self.check_len(values.len())?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    pub(crate) fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }
}

/// A nonnegative random variable on a [`FiniteSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Outcome(pub(crate) Vec<f64>);

impl TryFrom<Vec<f64>> for Outcome {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Outcome::new(v)
    }
}

impl From<Outcome> for Vec<f64> {
    fn from(o: Outcome) -> Self {
        o.0
    }
}

impl Outcome {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Domain(format!(
                "outcome value {v} at atom {i} is not a finite nonnegative number"
            )));
        }
        Ok(Outcome(values))
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Outcome::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }

    /// Atomwise equality within [`EQ_TOL`].
    pub fn approx_eq(&self, other: &Outcome) -> bool {
        self.len() == other.len()
            && self
                .0
                .iter()
                .zip(&other.0)
                .all(|(a, b)| (a - b).abs() <= EQ_TOL)
    }

    pub fn scaled(&self, c: f64) -> Result<Outcome> {
        Outcome::new(self.0.iter().map(|v| v * c).collect())
    }

    /// `(1 - alpha) * self + alpha * other`.
    pub fn mix(&self, other: &Outcome, alpha: f64) -> Result<Outcome> {
        same_len(self, other)?;
        Outcome::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                .collect(),
        )
    }

    /// `self^(1 - alpha) * other^alpha`.
    pub fn geometric_mix(&self, other: &Outcome, alpha: f64) -> Result<Outcome> {
        same_len(self, other)?;
        Outcome::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.powf(1.0 - alpha) * b.powf(alpha))
                .collect(),
        )
    }

    pub fn add(&self, other: &Outcome) -> Result<Outcome> {
        same_len(self, other)?;
        Outcome::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Atomwise division by a strictly positive outcome.
    pub fn div(&self, other: &Outcome) -> Result<Outcome> {
        same_len(self, other)?;
        if !other.is_strictly_positive() {
            return Err(Error::Domain("divisor must be strictly positive".into()));
        }
        Outcome::new(self.0.iter().zip(&other.0).map(|(a, b)| a / b).collect())
    }
}

pub(crate) fn same_len(a: &Outcome, b: &Outcome) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// An expected relative rate of return, a value in `[-1, +inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelValue(f64);

impl RelValue {
    pub(crate) fn new(v: f64) -> Self {
        debug_assert!(v >= -1.0 - 1e-9 || v.is_nan());
        RelValue(v)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0 == f64::INFINITY
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl PartialOrd for RelValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.0.total_cmp(&other.0))
    }
}

impl PartialEq<f64> for RelValue {
    fn eq(&self, other: &f64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<f64> for RelValue {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl From<RelValue> for f64 {
    fn from(r: RelValue) -> f64 {
        r.0
    }
}

impl fmt::Display for RelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "+inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for RelValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("+inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safe_div_conventions() {
        assert_eq!(safe_div(3.0, 0.0).unwrap(), f64::INFINITY);
        assert_eq!(safe_div(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(safe_div(6.0, 3.0).unwrap(), 2.0);
        assert_eq!(safe_div(0.0, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn safe_div_rejects_negative() {
        assert!(matches!(safe_div(-1.0, 2.0), Err(Error::Domain(_))));
        assert!(matches!(safe_div(1.0, -2.0), Err(Error::Domain(_))));
        assert!(safe_div(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn space_validation() {
        assert!(FiniteSpace::from_weights(vec![0.3, 0.7]).is_ok());
        assert!(FiniteSpace::from_weights(vec![]).is_err());
        assert!(FiniteSpace::from_weights(vec![0.0, 1.0]).is_err());
        assert!(FiniteSpace::from_weights(vec![0.5, 0.4]).is_err());
        assert!(FiniteSpace::new(vec!["a".into()], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn outcome_validation() {
        assert!(Outcome::new(vec![0.0, 1.0]).is_ok());
        assert!(Outcome::new(vec![-0.1]).is_err());
        assert!(Outcome::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn space_json_roundtrip_and_validation() {
        let s: FiniteSpace = serde_json::from_str(r#"{"weights":[0.25,0.75]}"#).unwrap();
        assert_eq!(s.labels(), &["w0".to_string(), "w1".to_string()]);
        let back: FiniteSpace = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
        assert!(serde_json::from_str::<FiniteSpace>(r#"{"weights":[0.2,0.2]}"#).is_err());
        assert!(serde_json::from_str::<FiniteSpace>(r#"{"weights":[1.0],"x":1}"#).is_err());
    }

    #[test]
    fn rel_value_orders_infinity_last() {
        let a = RelValue::new(1e300);
        let b = RelValue::new(f64::INFINITY);
        assert!(a < b);
        assert_eq!(serde_json::to_string(&b).unwrap(), "\"+inf\"");
    }
}
