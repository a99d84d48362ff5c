//! Canonical `(L, K)` pairs of unit-mass optional measures on event trees.
//!
//! With `M = E[H_inf | node]` and `Z = M - H`, the discrete recursion is
//!
//! ```text
//! K(root) = H(root),          1 - K(node) = (1 - K(parent)) * Z / (Z + dH)
//! L(root) = 1,                L(node)     = L(parent) * (Z + dH) / Z(parent)
//! ```
//!
//! with `Z / (Z + dH) = 1` when both vanish and `L` frozen once `Z(parent) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{martingale_class_on, EventTree, NodeProcess};

/// Values of `Z` at or below this are treated as zero.
pub const ZERO_TOL: f64 = 1e-13;

/// Tolerance on total mass of an optional measure.
pub const MASS_TOL: f64 = 1e-12;

/// Tolerance used by [`verify_pair`].
pub const VERIFY_TOL: f64 = 1e-10;

/// Nonnegative mass per node with total one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OptionalMeasure(Vec<f64>);

impl OptionalMeasure {
    pub fn new(tree: &EventTree, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != tree.len() {
            return Err(Error::Dimension {
                expected: tree.len(),
                got: mass.len(),
            });
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::InvalidProcess(
                "optional measure masses must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidProcess(format!(
                "optional measure has total mass {total}"
            )));
        }
        Ok(OptionalMeasure(mass))
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    /// Random measure: each node is charged with probability `density`,
    /// masses uniform before normalization.
    pub fn random<R: rand::Rng + ?Sized>(tree: &EventTree, rng: &mut R, density: f64) -> Self {
        loop {
            let raw: Vec<f64> = (0..tree.len())
                .map(|_| {
                    if rng.random::<f64>() < density {
                        rng.random::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect();
            let s: f64 = raw.iter().sum();
            if s > 0.0 {
                return OptionalMeasure(raw.into_iter().map(|x| x / s).collect());
            }
        }
    }
}

/// `H` with `dH(node) = q(node) / P[node]`.
pub fn measure_to_h(tree: &EventTree, q: &OptionalMeasure) -> Result<NodeProcess> {
    if q.masses().len() != tree.len() {
        return Err(Error::Dimension {
            expected: tree.len(),
            got: q.masses().len(),
        });
    }
    let dh: Vec<f64> = q
        .masses()
        .iter()
        .enumerate()
        .map(|(i, m)| m / tree.prob(i))
        .collect();
    Ok(tree.cumulate(&NodeProcess::new(tree, dh)?))
}

/// Node masses `P[node] * dH(node)`.
pub fn h_to_measure(tree: &EventTree, h: &NodeProcess) -> Vec<f64> {
    let dh = tree.increments(h);
    (0..tree.len()).map(|i| tree.prob(i) * dh[i]).collect()
}

/// Checks `H >= 0`, nondecreasing, `E[H_inf] = 1`.
pub fn validate_h(tree: &EventTree, h: &NodeProcess) -> Result<()> {
    if h.len() != tree.len() {
        return Err(Error::Dimension {
            expected: tree.len(),
            got: h.len(),
        });
    }
    if h.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidProcess(
            "H must be finite and nonnegative".into(),
        ));
    }
    let drop = h.max_decrease(tree);
    if drop > 0.0 {
        return Err(Error::InvalidProcess(format!(
            "H decreases by {drop} along an edge"
        )));
    }
    let total: f64 = tree.leaves().iter().map(|&l| tree.prob(l) * h[l]).sum();
    if (total - 1.0).abs() > VERIFY_TOL {
        return Err(Error::InvalidProcess(format!("E[H_inf] = {total}, not 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalPair {
    pub l: NodeProcess,
    pub k: NodeProcess,
    pub dk: NodeProcess,
    pub h: NodeProcess,
    pub m: NodeProcess,
    pub z: NodeProcess,
}

fn clean_z(tree: &EventTree, h: &NodeProcess) -> Result<(NodeProcess, NodeProcess)> {
    let m = tree.terminal_expectation(h)?;
    let z: Vec<f64> = m
        .values()
        .iter()
        .zip(h.values())
        .enumerate()
        .map(|(i, (mi, hi))| {
            let v = mi - hi;
            if tree.is_leaf(i) || v <= ZERO_TOL {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok((m, NodeProcess::from_vec(z)))
}

/// The canonical pair of a validated `H`.
pub fn decompose(tree: &EventTree, h: &NodeProcess) -> Result<CanonicalPair> {
    validate_h(tree, h)?;
    let (m, z) = clean_z(tree, h)?;
    let n = tree.len();
    let mut k = vec![0.0; n];
    let mut l = vec![0.0; n];
    let mut dk = vec![0.0; n];
    k[0] = h[0];
    dk[0] = h[0];
    l[0] = 1.0;
    for i in 1..n {
        let p = tree.parent(i).unwrap();
        let dh = h[i] - h[p];
        let denom = z[i] + dh;
        let phi = if denom <= 0.0 { 1.0 } else { z[i] / denom };
        k[i] = 1.0 - (1.0 - k[p]) * phi;
        dk[i] = (1.0 - k[p]) * (1.0 - phi);
        l[i] = if z[p] > 0.0 {
            l[p] * denom / z[p]
        } else {
            l[p]
        };
    }
    Ok(CanonicalPair {
        l: NodeProcess::from_vec(l),
        k: NodeProcess::from_vec(k),
        dk: NodeProcess::from_vec(dk),
        h: h.clone(),
        m,
        z,
    })
}

/// Maximum violations of the defining properties of a canonical pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub l0_error: f64,
    /// `max(0, -min L)`.
    pub l_negativity: f64,
    /// Largest `|E[dL | node]|` over nodes with `Z > 0`.
    pub martingale_drift: f64,
    /// Largest decrease of `K` plus distance of `K` outside `[0, 1]`.
    pub k_violation: f64,
    /// `max |L (1 - K) - Z|`.
    pub lz_error: f64,
    /// `max |dH - L dK|`.
    pub dh_error: f64,
    /// `max |dL|` where `K(parent) = 1`.
    pub frozen_l_violation: f64,
    /// `max |dK|` where `L = 0`.
    pub dead_k_violation: f64,
    /// `max (1 - K_inf)` over leaves with `L_inf > 0`.
    pub leaf_inclusion: f64,
    /// `max |sum_t L dK - H_inf|` over leaf paths.
    pub reconstruction_error: f64,
    pub passed: bool,
}

impl PairReport {
    pub fn worst(&self) -> f64 {
        [
            self.l0_error,
            self.l_negativity,
            self.martingale_drift,
            self.k_violation,
            self.lz_error,
            self.dh_error,
            self.frozen_l_violation,
            self.dead_k_violation,
            self.leaf_inclusion,
            self.reconstruction_error,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Checks a candidate `(L, K)` against `H`; `M` and `Z` are recomputed.
pub fn verify_pair(
    tree: &EventTree,
    h: &NodeProcess,
    l: &NodeProcess,
    k: &NodeProcess,
) -> Result<PairReport> {
    tree.check(h)?;
    tree.check(l)?;
    tree.check(k)?;
    let (_, z) = clean_z(tree, h)?;
    let dh = tree.increments(h);
    let dk = tree.increments(k);
    let n = tree.len();
    let l0_error = (l[0] - 1.0).abs();
    let l_negativity = l.values().iter().fold(0.0f64, |a, v| a.max(-v));
    let drift = martingale_class_on(tree, l, |i| z[i] > 0.0)?;
    let mut k_violation = k.max_decrease(tree).max(0.0);
    let (mut lz, mut dh_err, mut frozen, mut dead) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        k_violation = k_violation.max(-k[i]).max(k[i] - 1.0);
        lz = lz.max((l[i] * (1.0 - k[i]) - z[i]).abs());
        dh_err = dh_err.max((dh[i] - l[i] * dk[i]).abs());
        if let Some(p) = tree.parent(i) {
            if (1.0 - k[p]).abs() <= ZERO_TOL {
                frozen = frozen.max((l[i] - l[p]).abs());
            }
        }
        if l[i].abs() <= ZERO_TOL {
            dead = dead.max(dk[i].abs());
        }
    }
    let mut leaf_inclusion = 0.0f64;
    let mut recon = 0.0f64;
    for &leaf in tree.leaves() {
        if l[leaf] > VERIFY_TOL {
            leaf_inclusion = leaf_inclusion.max(1.0 - k[leaf]);
        }
        let s: f64 = tree.path(leaf).iter().map(|&i| l[i] * dk[i]).sum();
        recon = recon.max((s - h[leaf]).abs());
    }
    let mut report = PairReport {
        l0_error,
        l_negativity,
        martingale_drift: drift.max_abs_drift(),
        k_violation,
        lz_error: lz,
        dh_error: dh_err,
        frozen_l_violation: frozen,
        dead_k_violation: dead,
        leaf_inclusion,
        reconstruction_error: recon,
        passed: false,
    };
    report.passed = report.worst() < VERIFY_TOL;
    Ok(report)
}

/// Node masses `P[node] L(node) dK(node)` recovered from a pair.
pub fn pair_to_measure(tree: &EventTree, pair: &CanonicalPair) -> Vec<f64> {
    (0..tree.len())
        .map(|i| tree.prob(i) * pair.l[i] * pair.dk[i])
        .collect()
}

/// Essential uniqueness: `K` agrees everywhere and `L` agrees at nodes lying
/// on some path with `K_inf > 0`.
pub fn pairs_agree(
    tree: &EventTree,
    a: (&NodeProcess, &NodeProcess),
    b: (&NodeProcess, &NodeProcess),
    tol: f64,
) -> bool {
    let (la, ka) = a;
    let (lb, kb) = b;
    if (0..tree.len()).any(|i| (ka[i] - kb[i]).abs() > tol) {
        return false;
    }
    let mut relevant = vec![false; tree.len()];
    for &leaf in tree.leaves() {
        if ka[leaf] > tol {
            for i in tree.path(leaf) {
                relevant[i] = true;
            }
        }
    }
    (0..tree.len()).all(|i| !relevant[i] || (la[i] - lb[i]).abs() <= tol)
}

/// `H^eps = (H + eps g(t)) / (1 + eps)` with `g(t) = 1 - exp(-t)` before the
/// horizon and `g = 1` at the horizon, so `E[H^eps_inf] = 1`.
pub fn perturb_h(tree: &EventTree, h: &NodeProcess, eps: f64) -> NodeProcess {
    let depth = tree.depth();
    NodeProcess::from_vec(
        (0..tree.len())
            .map(|i| {
                let t = tree.time(i);
                let g = if t == depth {
                    1.0
                } else {
                    1.0 - (-(t as f64)).exp()
                };
                (h[i] + eps * g) / (1.0 + eps)
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationRow {
    pub eps: f64,
    pub k_gap: f64,
    pub l_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationTable {
    pub rows: Vec<PerturbationRow>,
    /// Nodes on which gaps are measured.
    pub nodes_compared: usize,
    pub monotone: bool,
}

/// Decomposes `H^eps` for each `eps` and measures the distance to the pair of
/// `H` on the nodes where that pair is alive: the root and every node whose
/// parent has `Z > 0` and where `L > 0`. Once `L` has died the perturbed
/// clock keeps running at a rate set by the perturbation alone, so such
/// nodes carry no convergence information.
pub fn perturbation_convergence(
    tree: &EventTree,
    h: &NodeProcess,
    eps_list: &[f64],
) -> Result<PerturbationTable> {
    if eps_list.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::Parameter(
            "eps must be finite and nonnegative".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Parameter("eps list must be decreasing".into()));
    }
    let base = decompose(tree, h)?;
    let domain: Vec<usize> = (0..tree.len())
        .filter(|&i| match tree.parent(i) {
            None => true,
            Some(p) => base.z[p] > 0.0 && base.l[i] > 0.0,
        })
        .collect();
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let pert = decompose(tree, &perturb_h(tree, h, eps))?;
        let (mut kg, mut lg) = (0.0f64, 0.0f64);
        for &i in &domain {
            kg = kg.max((pert.k[i] - base.k[i]).abs());
            lg = lg.max((pert.l[i] - base.l[i]).abs());
        }
        rows.push(PerturbationRow {
            eps,
            k_gap: kg,
            l_gap: lg,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].k_gap <= w[0].k_gap);
    Ok(PerturbationTable {
        rows,
        nodes_compared: domain.len(),
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{MartingaleClass, DEFAULT_NODE_CAP};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain(depth: usize) -> EventTree {
        EventTree::lattice(depth, &[1.0], DEFAULT_NODE_CAP).unwrap()
    }

    #[test]
    fn measure_to_h_examples() {
        let t = EventTree::lattice(1, &[0.5, 0.5], DEFAULT_NODE_CAP).unwrap();
        let q = OptionalMeasure::new(&t, vec![0.5, 0.25, 0.25]).unwrap();
        let h = measure_to_h(&t, &q).unwrap();
        let dh = t.increments(&h);
        assert_eq!(dh.values(), &[0.5, 0.5, 0.5]);

        let root = OptionalMeasure::new(&t, vec![1.0, 0.0, 0.0]).unwrap();
        let pair = decompose(&t, &measure_to_h(&t, &root).unwrap()).unwrap();
        assert!(pair.k.values().iter().all(|k| *k == 1.0));

        assert!(OptionalMeasure::new(&t, vec![0.5, 0.25, 0.2]).is_err());
    }

    #[test]
    fn terminal_unit_h_gives_trivial_l() {
        let t = EventTree::lattice(2, &[0.3, 0.7], DEFAULT_NODE_CAP).unwrap();
        let h = NodeProcess::new(&t, vec![0.0, 0.5, 0.2, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let pair = decompose(&t, &h).unwrap();
        for i in 0..t.len() {
            assert!((pair.k[i] - h[i]).abs() < 1e-15);
            assert!((pair.l[i] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_path_hand_recursion() {
        let t = chain(2);
        let h = NodeProcess::new(&t, vec![0.0, 0.5, 1.0]).unwrap();
        let pair = decompose(&t, &h).unwrap();
        assert_eq!(pair.z.values(), &[1.0, 0.5, 0.0]);
        assert_eq!(pair.k.values(), &[0.0, 0.5, 1.0]);
        assert_eq!(pair.l.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn one_period_binary_recursion() {
        let t = EventTree::lattice(1, &[0.5, 0.5], DEFAULT_NODE_CAP).unwrap();
        let h = NodeProcess::new(&t, vec![0.0, 1.6, 0.4]).unwrap();
        let pair = decompose(&t, &h).unwrap();
        assert_eq!(pair.m[0], 1.0);
        assert_eq!(pair.z[0], 1.0);
        assert_eq!(pair.k.values(), &[0.0, 1.0, 1.0]);
        assert!((pair.l[1] - 1.6).abs() < 1e-15 && (pair.l[2] - 0.4).abs() < 1e-15);
        let r = verify_pair(&t, &h, &pair.l, &pair.k).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn random_pairs_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let depth = rng.random_range(0..=5);
            let t = EventTree::random(&mut rng, depth, 3);
            let q = OptionalMeasure::random(&t, &mut rng, 0.6);
            let h = measure_to_h(&t, &q).unwrap();
            let pair = decompose(&t, &h).unwrap();
            let r = verify_pair(&t, &h, &pair.l, &pair.k).unwrap();
            assert!(r.passed, "{r:?}");
            let back = pair_to_measure(&t, &pair);
            for (a, b) in back.iter().zip(q.masses()) {
                assert!((a - b).abs() < 1e-12);
            }
            let mc = martingale_class_on(&t, &pair.l, |i| pair.z[i] > 0.0).unwrap();
            assert_eq!(mc.class, MartingaleClass::Martingale);
        }
    }

    #[test]
    fn halved_k_fails() {
        let t = EventTree::lattice(2, &[0.5, 0.5], DEFAULT_NODE_CAP).unwrap();
        let q = OptionalMeasure::new(&t, vec![0.1, 0.1, 0.2, 0.1, 0.2, 0.2, 0.1]).unwrap();
        let h = measure_to_h(&t, &q).unwrap();
        let pair = decompose(&t, &h).unwrap();
        let half = NodeProcess::from_vec(pair.k.values().iter().map(|k| k / 2.0).collect());
        let r = verify_pair(&t, &h, &pair.l, &half).unwrap();
        assert!(!r.passed);
        assert!(r.dh_error > 1e-3);
    }

    #[test]
    fn perturbing_l_off_support_keeps_uniqueness() {
        // all mass on the up branch at time 1: the down path has K_inf = 0
        let t = EventTree::lattice(2, &[0.5, 0.5], DEFAULT_NODE_CAP).unwrap();
        let q = OptionalMeasure::new(&t, vec![0.0, 0.5, 0.0, 0.25, 0.25, 0.0, 0.0]).unwrap();
        let h = measure_to_h(&t, &q).unwrap();
        let pair = decompose(&t, &h).unwrap();
        assert_eq!(pair.k[2], 0.0);
        assert_eq!(pair.l[2], 0.0);
        let mut l2 = pair.l.clone().into_inner();
        l2[5] = 0.7;
        let l2 = NodeProcess::from_vec(l2);
        assert!(pairs_agree(&t, (&pair.l, &pair.k), (&l2, &pair.k), 1e-12));
        let mut l3 = pair.l.clone().into_inner();
        l3[1] = 1.5;
        let l3 = NodeProcess::from_vec(l3);
        assert!(!pairs_agree(&t, (&pair.l, &pair.k), (&l3, &pair.k), 1e-12));
    }

    #[test]
    fn perturbation_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = EventTree::random(&mut rng, 4, 3);
        let q = OptionalMeasure::random(&t, &mut rng, 1.0);
        let h = measure_to_h(&t, &q).unwrap();
        let tab = perturbation_convergence(&t, &h, &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(tab.monotone, "{tab:?}");
        assert!(tab.rows[2].k_gap < 1e-3);
        let zero = perturbation_convergence(&t, &h, &[0.0]).unwrap();
        assert!(zero.rows[0].k_gap < 1e-15 && zero.rows[0].l_gap < 1e-15);
    }

    #[test]
    fn invalid_h_rejected() {
        let t = chain(1);
        assert!(decompose(&t, &NodeProcess::from_vec(vec![0.6, 0.5])).is_err());
        assert!(decompose(&t, &NodeProcess::from_vec(vec![0.0, 0.5])).is_err());
    }
}
