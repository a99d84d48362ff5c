//! The expected-relative-rate-of-return operator and the preference relation
//! it induces on nonnegative outcomes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{div_unchecked, same_len, FiniteSpace, Outcome, RelValue};

/// `E[f / g] - 1` under the weights of `space`, with the division conventions
/// of [`crate::space::safe_div`].
pub fn rel(space: &FiniteSpace, f: &Outcome, g: &Outcome) -> Result<RelValue> {
    space.check_len(f.len())?;
    space.check_len(g.len())?;
    let mut acc = 0.0;
    for ((w, &fi), &gi) in space.weights().iter().zip(f.values()).zip(g.values()) {
        let q = div_unchecked(fi, gi);
        if q == f64::INFINITY {
            return Ok(RelValue::new(f64::INFINITY));
        }
        // summing w (q - 1) keeps rel(f | f) exactly 0 whatever the rounding
        // of the weights
        acc += w * (q - 1.0);
    }
    Ok(RelValue::new(acc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    /// `rel(f | g) < 0`.
    StrictlyPreferred,
    /// `rel(f | g) == 0`.
    Preferred,
    NotPreferred,
}

impl Preference {
    /// True for both the weak and strict forms.
    pub fn holds(self) -> bool {
        !matches!(self, Preference::NotPreferred)
    }
}

/// Classifies whether `g` is at least as good as `f` (`f ≼ g`).
pub fn prefers(space: &FiniteSpace, f: &Outcome, g: &Outcome) -> Result<Preference> {
    let r = rel(space, f, g)?.value();
    Ok(if r < 0.0 {
        Preference::StrictlyPreferred
    } else if r == 0.0 {
        Preference::Preferred
    } else {
        Preference::NotPreferred
    })
}

/// `f ≼ g` with a slack for rounding: `rel(f | g) <= tol`.
pub fn weakly_below(space: &FiniteSpace, f: &Outcome, g: &Outcome, tol: f64) -> Result<bool> {
    Ok(rel(space, f, g)?.value() <= tol)
}

/// Tolerance used by [`chain_check`] when testing each link.
pub const CHAIN_LINK_TOL: f64 = 1e-12;

/// Checks a closed preference chain `f0 ≼ f1 ≼ ... ≼ fn = f0`.
///
/// Returns whether every element equals `f0` atomwise. The chain property
/// says this is always the case once the links hold, so `Ok(false)` signals
/// a numerical inconsistency. A broken link is reported as
/// [`Error::Precondition`] naming the first failing index.
pub fn chain_check(space: &FiniteSpace, outcomes: &[Outcome]) -> Result<bool> {
    if outcomes.len() < 2 {
        return Err(Error::Precondition(
            "a chain needs at least two elements".into(),
        ));
    }
    let first = &outcomes[0];
    let last = &outcomes[outcomes.len() - 1];
    same_len(first, last)?;
    if !first.approx_eq(last) {
        return Err(Error::Precondition(
            "chain is not closed: last element differs from the first".into(),
        ));
    }
    for (i, pair) in outcomes.windows(2).enumerate() {
        let r = rel(space, &pair[0], &pair[1])?;
        if r.value() > CHAIN_LINK_TOL {
            return Err(Error::Precondition(format!(
                "link {i} -> {} fails: rel = {r}",
                i + 1
            )));
        }
    }
    Ok(outcomes.iter().all(|o| o.approx_eq(first)))
}

/// Insurance payment `n * g` on `{f <= g}`.
fn insured(f: &Outcome, g: &Outcome, n: f64) -> (Outcome, Outcome) {
    let (mut a, mut b) = (Vec::with_capacity(f.len()), Vec::with_capacity(f.len()));
    for (&fi, &gi) in f.values().iter().zip(g.values()) {
        let h = if fi <= gi { n * gi } else { 0.0 };
        a.push(gi + h);
        b.push(fi + h);
    }
    // both vectors are sums of nonnegative finite numbers
    (Outcome(a), Outcome(b))
}

/// Value of `rel(g + h_n | f + h_n)` with `h_n = n g 1_{f <= g}`.
pub fn insured_rel(space: &FiniteSpace, f: &Outcome, g: &Outcome, n: u64) -> Result<RelValue> {
    let (a, b) = insured(f, g, n as f64);
    rel(space, &a, &b)
}

/// Smallest `N` for which insuring `g` on `{f <= g}` with `N g` makes
/// `f + h` strictly better than `g + h`.
///
/// The map `N -> rel(g + h_N | f + h_N)` is nonincreasing, so an exponential
/// search followed by bisection finds the threshold.
pub fn insurance_level(space: &FiniteSpace, f: &Outcome, g: &Outcome) -> Result<u64> {
    space.check_len(f.len())?;
    space.check_len(g.len())?;
    if !f.values().iter().zip(g.values()).any(|(fi, gi)| gi < fi) {
        return Err(Error::Precondition(
            "the event {g < f} is empty; no insurance level exists".into(),
        ));
    }
    let negative = |n: u64| -> Result<bool> { Ok(insured_rel(space, f, g, n)?.value() < 0.0) };
    if negative(0)? {
        return Ok(0);
    }
    let mut hi: u64 = 1;
    while !negative(hi)? {
        if hi >= 1 << 62 {
            return Err(Error::Infeasible(
                "insurance level exceeds 2^62 in floating point".into(),
            ));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    // invariant: negative(hi) && !negative(lo)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if negative(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(v: &[f64]) -> Outcome {
        Outcome::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rel_two_atom_direct_sum() {
        let s = FiniteSpace::from_weights(vec![0.3, 0.7]).unwrap();
        // 0.3 * 2 + 0.7 * 0.5 - 1
        let r = rel(&s, &o(&[2.0, 1.0]), &o(&[1.0, 2.0])).unwrap();
        assert!((r.value() - (-0.05)).abs() < 1e-12);
    }

    #[test]
    fn rel_identity_is_zero() {
        let s = FiniteSpace::from_weights(vec![0.2, 0.5, 0.3]).unwrap();
        let f = o(&[0.0, 3.0, 1.5]);
        assert_eq!(rel(&s, &f, &f).unwrap().value(), 0.0);
    }

    #[test]
    fn rel_infinite_when_support_escapes() {
        let s = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        let r = rel(&s, &o(&[1.0, 0.0]), &o(&[0.0, 1.0])).unwrap();
        assert!(r.is_infinite());
    }

    #[test]
    fn rel_dimension_mismatch() {
        let s = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            rel(&s, &o(&[1.0]), &o(&[1.0, 1.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn dominated_outcome_is_strictly_preferred() {
        let s = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        assert_eq!(
            prefers(&s, &o(&[1.0, 1.0]), &o(&[1.0, 2.0])).unwrap(),
            Preference::StrictlyPreferred
        );
        let f = o(&[0.4, 0.9]);
        assert_eq!(prefers(&s, &f, &f).unwrap(), Preference::Preferred);
    }

    #[test]
    fn chain_constant_and_broken() {
        let s = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        let f = o(&[1.0, 2.0]);
        assert!(chain_check(&s, &[f.clone(), f.clone(), f.clone()]).unwrap());
        // a strict improvement cannot be closed back to the start
        let g = o(&[2.0, 3.0]);
        let err = chain_check(&s, &[f.clone(), g, f]).unwrap_err();
        assert!(err.to_string().contains("link 1 -> 2"));
    }

    #[test]
    fn insurance_examples() {
        let s = FiniteSpace::from_weights(vec![0.5, 0.5]).unwrap();
        // no level sits exactly on rel = 0, so floating point agrees with exact
        let f = o(&[0.25, 2.0]);
        let g = o(&[0.5, 1.5]);
        let n = insurance_level(&s, &f, &g).unwrap();
        assert!(insured_rel(&s, &f, &g, n).unwrap().value() < 0.0);
        if n > 0 {
            assert!(insured_rel(&s, &f, &g, n - 1).unwrap().value() >= 0.0);
        }
        // linear scan oracle in exact integer arithmetic (values are quarters):
        // mean of a_i / b_i < 1  <=>  a_0 b_1 + a_1 b_0 < 2 b_0 b_1
        let (fq, gq) = ([1i64, 8], [2i64, 6]);
        let scan = (0i64..)
            .find(|&k| {
                let h: Vec<i64> = (0..2)
                    .map(|i| if fq[i] <= gq[i] { k * gq[i] } else { 0 })
                    .collect();
                let a: Vec<i64> = (0..2).map(|i| gq[i] + h[i]).collect();
                let b: Vec<i64> = (0..2).map(|i| fq[i] + h[i]).collect();
                a[0] * b[1] + a[1] * b[0] < 2 * b[0] * b[1]
            })
            .unwrap() as u64;
        assert_eq!(n, scan);
        assert_eq!(n, 2);

        assert_eq!(
            insurance_level(&s, &o(&[2.0, 3.0]), &o(&[1.0, 1.0])).unwrap(),
            0
        );
        assert!(matches!(
            insurance_level(&s, &f, &f),
            Err(Error::Precondition(_))
        ));
    }
}
