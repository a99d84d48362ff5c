use serde::{Deserialize, Serialize};

use super::{EventTree, NodeProcess};
use crate::error::{Error, Result};

/// A random time given by one time index per leaf path, in the order of
/// [`EventTree::leaves`]. Need not be a stopping time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RandomTime(Vec<usize>);

impl RandomTime {
    pub fn new(tree: &EventTree, times: Vec<usize>) -> Result<Self> {
        if times.len() != tree.leaves().len() {
            return Err(Error::Dimension {
                expected: tree.leaves().len(),
                got: times.len(),
            });
        }
        if let Some(t) = times.iter().find(|&&t| t > tree.depth()) {
            return Err(Error::InvalidTree(format!(
                "random time {t} beyond the horizon {}",
                tree.depth()
            )));
        }
        Ok(RandomTime(times))
    }

    pub fn constant(tree: &EventTree, t: usize) -> Result<Self> {
        Self::new(tree, vec![t; tree.leaves().len()])
    }

    pub fn times(&self) -> &[usize] {
        &self.0
    }

    /// Node visited at the random time on each leaf path.
    pub fn nodes(&self, tree: &EventTree) -> Vec<usize> {
        tree.leaves()
            .iter()
            .zip(&self.0)
            .map(|(&l, &t)| tree.ancestor_at(l, t))
            .collect()
    }

    /// First time each path attains its minimum of `x`.
    pub fn argmin(tree: &EventTree, x: &NodeProcess) -> Result<Self> {
        Self::arg_extreme(tree, x, |a, b| a < b)
    }

    /// First time each path attains its maximum of `x`.
    pub fn argmax(tree: &EventTree, x: &NodeProcess) -> Result<Self> {
        Self::arg_extreme(tree, x, |a, b| a > b)
    }

    fn arg_extreme(
        tree: &EventTree,
        x: &NodeProcess,
        better: impl Fn(f64, f64) -> bool,
    ) -> Result<Self> {
        tree.check(x)?;
        let times = tree
            .leaves()
            .iter()
            .map(|&l| {
                let path = tree.path(l);
                let mut best = 0;
                for (t, &n) in path.iter().enumerate() {
                    if better(x[n], x[path[best]]) {
                        best = t;
                    }
                }
                best
            })
            .collect();
        Ok(RandomTime(times))
    }

    /// True when `{T <= t}` is decided by the node at time `t` for every `t`.
    pub fn is_stopping_time(&self, tree: &EventTree) -> bool {
        // per node: whether some / all leaves below stop by the node's time
        let mut any = vec![false; tree.len()];
        let mut all = vec![true; tree.len()];
        for (&l, &t) in tree.leaves().iter().zip(&self.0) {
            for n in tree.path(l) {
                let stopped = t <= tree.time(n);
                any[n] |= stopped;
                all[n] &= stopped;
            }
        }
        any.iter().zip(&all).all(|(a, b)| a == b)
    }

    /// Leaf-enumeration value of `E[V_T]`.
    pub fn sample(&self, tree: &EventTree, v: &NodeProcess) -> f64 {
        tree.leaves()
            .iter()
            .zip(self.nodes(tree))
            .map(|(&l, n)| tree.prob(l) * v[n])
            .sum()
    }
}

/// The nondecreasing process `H` with `E[sum_t V_t dH_t] = E[V_T]` for every
/// adapted `V`: `dH(node) = P[T = t(node), path through node] / P[node]`.
pub fn dual_optional_projection(tree: &EventTree, time: &RandomTime) -> Result<NodeProcess> {
    if time.times().len() != tree.leaves().len() {
        return Err(Error::Dimension {
            expected: tree.leaves().len(),
            got: time.times().len(),
        });
    }
    let mut mass = vec![0.0; tree.len()];
    for (&l, n) in tree.leaves().iter().zip(time.nodes(tree)) {
        mass[n] += tree.prob(l);
    }
    let dh: Vec<f64> = mass
        .iter()
        .enumerate()
        .map(|(i, m)| m / tree.prob(i))
        .collect();
    Ok(tree.cumulate(&NodeProcess::from_vec(dh)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::DEFAULT_NODE_CAP;

    fn binary2() -> EventTree {
        EventTree::lattice(2, &[0.4, 0.6], DEFAULT_NODE_CAP).unwrap()
    }

    #[test]
    fn deterministic_time() {
        let t = binary2();
        let tau = RandomTime::constant(&t, 1).unwrap();
        assert!(tau.is_stopping_time(&t));
        let h = dual_optional_projection(&t, &tau).unwrap();
        let dh = t.increments(&h);
        assert_eq!(dh.values(), &[0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn stopping_time_jumps_once() {
        let t = binary2();
        // stop at 1 after the first branch, else at 2
        let tau = RandomTime::new(&t, vec![1, 1, 2, 2]).unwrap();
        assert!(tau.is_stopping_time(&t));
        let dh = t.increments(&dual_optional_projection(&t, &tau).unwrap());
        for v in dh.values() {
            assert!(*v == 0.0 || (*v - 1.0).abs() < 1e-15);
        }
        let peek = RandomTime::new(&t, vec![1, 2, 2, 2]).unwrap();
        assert!(!peek.is_stopping_time(&t));
    }

    #[test]
    fn argmin_projection_matches_enumeration() {
        let t = binary2();
        let x = NodeProcess::from_vec(vec![1.0, 0.5, 2.0, 0.7, 0.2, 3.0, 1.5]);
        let tau = RandomTime::argmin(&t, &x).unwrap();
        assert_eq!(tau.times(), &[1, 2, 0, 0]);
        let h = dual_optional_projection(&t, &tau).unwrap();
        let dh = t.increments(&h);
        for n in 0..t.len() {
            let mut ind = vec![0.0; t.len()];
            ind[n] = 1.0;
            let v = NodeProcess::from_vec(ind);
            let lhs: f64 = (0..t.len()).map(|i| t.prob(i) * v[i] * dh[i]).sum();
            assert!((lhs - tau.sample(&t, &v)).abs() < 1e-15);
        }
        let total: f64 = t.leaves().iter().map(|&l| t.prob(l) * h[l]).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_times() {
        let t = binary2();
        assert!(RandomTime::new(&t, vec![0, 1, 2]).is_err());
        assert!(RandomTime::new(&t, vec![0, 1, 2, 3]).is_err());
    }
}
