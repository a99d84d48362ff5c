use std::ops::Index;

use serde::{Deserialize, Serialize};

use super::EventTree;
use crate::error::{Error, Result};

/// Tolerance on one-step drifts when classifying processes.
pub const DRIFT_TOL: f64 = 1e-10;

/// One value per tree node; adapted by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeProcess(Vec<f64>);

impl NodeProcess {
    pub fn new(tree: &EventTree, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.len() {
            return Err(Error::Dimension {
                expected: tree.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidProcess("NaN value".into()));
        }
        Ok(NodeProcess(values))
    }

    pub(crate) fn from_vec(values: Vec<f64>) -> Self {
        NodeProcess(values)
    }

    pub fn constant(tree: &EventTree, c: f64) -> Self {
        NodeProcess(vec![c; tree.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, c: f64) -> NodeProcess {
        NodeProcess(self.0.iter().map(|v| v * c).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest drop `X(parent) - X(node)` over all edges; nonpositive when
    /// the process is nondecreasing.
    pub fn max_decrease(&self, tree: &EventTree) -> f64 {
        (1..tree.len())
            .map(|i| self.0[tree.parent(i).unwrap()] - self.0[i])
            .fold(0.0, f64::max)
    }

    pub fn is_nondecreasing(&self, tree: &EventTree, tol: f64) -> bool {
        self.max_decrease(tree) <= tol
    }
}

impl Index<usize> for NodeProcess {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MartingaleClass {
    Martingale,
    Supermartingale,
    Submartingale,
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleReport {
    pub class: MartingaleClass,
    /// Largest positive one-step drift `E[X_{t+1} | node] - X(node)`.
    pub max_up_drift: f64,
    /// Largest negative drift, as a positive number.
    pub max_down_drift: f64,
    pub nodes_checked: usize,
}

impl MartingaleReport {
    pub fn max_abs_drift(&self) -> f64 {
        self.max_up_drift.max(self.max_down_drift)
    }
}

/// Classifies `x` from its one-step drifts at every non-leaf node.
pub fn martingale_class(tree: &EventTree, x: &NodeProcess) -> Result<MartingaleReport> {
    martingale_class_on(tree, x, |_| true)
}

/// As [`martingale_class`], restricted to non-leaf nodes selected by `at`.
pub fn martingale_class_on<F: Fn(usize) -> bool>(
    tree: &EventTree,
    x: &NodeProcess,
    at: F,
) -> Result<MartingaleReport> {
    tree.check(x)?;
    let (mut up, mut down) = (0.0f64, 0.0f64);
    let mut nodes_checked = 0;
    for i in 0..tree.len() {
        if tree.is_leaf(i) || !at(i) {
            continue;
        }
        nodes_checked += 1;
        let d = tree.one_step_expectation(x, i) - x[i];
        let scale = 1.0 + x[i].abs();
        up = up.max(d / scale);
        down = down.max(-d / scale);
    }
    let class = match (up <= DRIFT_TOL, down <= DRIFT_TOL) {
        (true, true) => MartingaleClass::Martingale,
        (true, false) => MartingaleClass::Supermartingale,
        (false, true) => MartingaleClass::Submartingale,
        (false, false) => MartingaleClass::None,
    };
    Ok(MartingaleReport {
        class,
        max_up_drift: up,
        max_down_drift: down,
        nodes_checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::DEFAULT_NODE_CAP;

    #[test]
    fn classification() {
        let t = EventTree::lattice(2, &[0.5, 0.5], DEFAULT_NODE_CAP).unwrap();
        let leaf = NodeProcess::from_vec(vec![0.0, 0.0, 0.0, 4.0, 1.0, 2.0, 9.0]);
        let m = t.terminal_expectation(&leaf).unwrap();
        assert_eq!(
            martingale_class(&t, &m).unwrap().class,
            MartingaleClass::Martingale
        );

        let dec = NodeProcess::from_vec(vec![3.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            martingale_class(&t, &dec).unwrap().class,
            MartingaleClass::Supermartingale
        );
        let inc = NodeProcess::from_vec(vec![0.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(
            martingale_class(&t, &inc).unwrap().class,
            MartingaleClass::Submartingale
        );
        let mixed = NodeProcess::from_vec(vec![0.0, 1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
        let r = martingale_class(&t, &mixed).unwrap();
        assert_eq!(r.class, MartingaleClass::None);
        assert!(r.max_abs_drift() > 0.4);
    }

    #[test]
    fn monotonicity() {
        let t = EventTree::lattice(1, &[0.5, 0.5], DEFAULT_NODE_CAP).unwrap();
        let x = NodeProcess::from_vec(vec![1.0, 1.5, 0.75]);
        assert!(!x.is_nondecreasing(&t, 0.0));
        assert_eq!(x.max_decrease(&t), 0.25);
    }
}
