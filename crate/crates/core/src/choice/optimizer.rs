//! Maximization of `sum_i w_i log f_i` over the convex hull of finitely many
//! nonnegative points.
//!
//! The hull is parametrized by mixture weights `lambda` on the unit simplex.
//! A log-barrier path-following Newton method drives `lambda` to the KKT
//! point; the returned certificate is
//! `max_v rel(v | f_hat) = max_v sum_i w_i v_i / f_hat_i - sum_i w_i`,
//! which is nonpositive exactly at the optimum.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Target for the first-order certificate.
pub const CERT_TOL: f64 = 1e-9;

/// Barrier weight at which the path following stops.
const MU_FLOOR: f64 = 1e-28;

/// Cap on total Newton iterations.
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct HullOptimum {
    /// Mixture weights over the input points.
    pub lambda: Vec<f64>,
    /// The maximizing point `sum_j lambda_j v_j`.
    pub point: Vec<f64>,
    /// `max_j rel(v_j | point)` restricted to the support atoms.
    pub certificate: f64,
    /// Atoms with positive weight that vanish on the whole hull.
    pub null_atoms: Vec<usize>,
    pub iterations: usize,
}

struct Problem {
    /// (atom weight, per-vertex coordinates) for support atoms only
    atoms: Vec<(f64, Vec<f64>)>,
    k: usize,
}

impl Problem {
    fn coords(&self, lambda: &[f64]) -> Vec<f64> {
        self.atoms
            .iter()
            .map(|(_, col)| col.iter().zip(lambda).map(|(a, l)| a * l).sum())
            .collect()
    }

    fn log_value(&self, f: &[f64]) -> f64 {
        self.atoms
            .iter()
            .zip(f)
            .map(|((w, _), fi)| w * fi.ln())
            .sum()
    }

    /// `g_j = sum_i w_i v_ji / f_i`.
    fn gradient(&self, f: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.k];
        for ((w, col), fi) in self.atoms.iter().zip(f) {
            let s = w / fi;
            for (gj, a) in g.iter_mut().zip(col) {
                *gj += s * a;
            }
        }
        g
    }

    fn support_mass(&self) -> f64 {
        self.atoms.iter().map(|(w, _)| w).sum()
    }
}

/// Maximizes `sum_i weights_i log x_i` over `conv(vertices)`.
///
/// Weights must be nonnegative; atoms with zero weight are ignored and atoms
/// on which every vertex vanishes are reported in `null_atoms` and excluded
/// from the objective (the maximal-support face).
pub fn maximize_log_over_hull(weights: &[f64], vertices: &[Vec<f64>]) -> Result<HullOptimum> {
    if vertices.is_empty() {
        return Err(Error::Infeasible("empty vertex set".into()));
    }
    let n = weights.len();
    if let Some(v) = vertices.iter().find(|v| v.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: v.len(),
        });
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::Domain(
            "weights must be finite and nonnegative".into(),
        ));
    }
    if vertices
        .iter()
        .flatten()
        .any(|x| !(*x >= 0.0 && x.is_finite()))
    {
        return Err(Error::Domain(
            "vertices must lie in the nonnegative orthant".into(),
        ));
    }
    let k = vertices.len();
    let mut atoms = Vec::new();
    let mut null_atoms = Vec::new();
    for i in 0..n {
        if weights[i] == 0.0 {
            continue;
        }
        let col: Vec<f64> = vertices.iter().map(|v| v[i]).collect();
        if col.iter().all(|&x| x == 0.0) {
            null_atoms.push(i);
        } else {
            atoms.push((weights[i], col));
        }
    }
    let prob = Problem { atoms, k };
    let finish = |lambda: Vec<f64>, certificate: f64, iterations: usize| {
        let mut point = vec![0.0; n];
        for (l, v) in lambda.iter().zip(vertices) {
            for (p, x) in point.iter_mut().zip(v) {
                *p += l * x;
            }
        }
        HullOptimum {
            lambda,
            point,
            certificate,
            null_atoms: null_atoms.clone(),
            iterations,
        }
    };

    if prob.atoms.is_empty() || k == 1 {
        // constant objective or a single point
        let lambda = vec![1.0 / k as f64; k];
        return Ok(finish(lambda, 0.0, 0));
    }

    let support = prob.support_mass();
    let mut lambda = vec![1.0 / k as f64; k];
    let mut mu = support;
    let mut iterations = 0;
    let certificate = |lambda: &[f64]| -> f64 {
        let f = prob.coords(lambda);
        prob.gradient(&f)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
            - support
    };

    loop {
        // centering: Newton on  log-objective + mu * sum log lambda, sum lambda = 1
        for _ in 0..200 {
            iterations += 1;
            let f = prob.coords(&lambda);
            let g = prob.gradient(&f);
            // scaled system: dir = Lambda * y
            let mut h = DMatrix::<f64>::zeros(k, k);
            for ((w, col), fi) in prob.atoms.iter().zip(&f) {
                let s = w / (fi * fi);
                for a in 0..k {
                    let ca = col[a] * lambda[a];
                    if ca == 0.0 {
                        continue;
                    }
                    for b in a..k {
                        h[(a, b)] += s * ca * col[b] * lambda[b];
                    }
                }
            }
            for a in 0..k {
                for b in 0..a {
                    h[(a, b)] = h[(b, a)];
                }
                h[(a, a)] += mu;
            }
            let rhs = DVector::from_iterator(k, (0..k).map(|j| lambda[j] * g[j] + mu));
            let lam = DVector::from_column_slice(&lambda);
            let chol = match h.cholesky() {
                Some(c) => c,
                None => {
                    return Err(Error::NoConvergence {
                        iterations,
                        certificate: certificate(&lambda),
                    })
                }
            };
            let a_rhs = chol.solve(&rhs);
            let a_lam = chol.solve(&lam);
            let nu = lam.dot(&a_rhs) / lam.dot(&a_lam);
            let y = a_rhs - a_lam * nu;
            let dir: Vec<f64> = (0..k).map(|j| lambda[j] * y[j]).collect();
            let decrement = y.dot(&rhs);
            if decrement.abs() < 1e-22 {
                break;
            }
            // fraction-to-boundary: y_j >= -0.99
            let mut t: f64 = 1.0;
            for &yj in y.iter() {
                if yj < 0.0 {
                    t = t.min(-0.99 / yj);
                }
            }
            let phi = |l: &[f64]| -> f64 {
                let f = prob.coords(l);
                prob.log_value(&f) + mu * l.iter().map(|x| x.ln()).sum::<f64>()
            };
            let phi0 = phi(&lambda);
            let mut accepted = false;
            for _ in 0..60 {
                let cand: Vec<f64> = lambda.iter().zip(&dir).map(|(l, d)| l + t * d).collect();
                if cand.iter().all(|&x| x > 0.0) {
                    let p1 = phi(&cand);
                    if p1.is_finite() && p1 >= phi0 + 1e-4 * t * decrement - 1e-15 * phi0.abs() {
                        let s: f64 = cand.iter().sum();
                        lambda = cand.into_iter().map(|x| x / s).collect();
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted || decrement < 1e-18 {
                break;
            }
            if iterations >= MAX_ITERATIONS {
                break;
            }
        }
        let cert = certificate(&lambda);
        // a vertex with zero marginal value at the optimum keeps weight of
        // order sqrt(mu), so mu is driven far below the certificate target
        if mu < MU_FLOOR || iterations >= MAX_ITERATIONS {
            if cert <= CERT_TOL {
                return Ok(finish(lambda, cert, iterations));
            }
            if iterations >= MAX_ITERATIONS || mu < MU_FLOOR * 1e-4 {
                return Err(Error::NoConvergence {
                    iterations,
                    certificate: cert,
                });
            }
        }
        mu *= 0.1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_simplex_closed_form() {
        // vertices 0 and e_i / mu_i
        let w = [0.2, 0.3, 0.5];
        let mu = [1.0, 2.0, 0.5];
        let mut verts = vec![vec![0.0; 3]];
        for i in 0..3 {
            let mut v = vec![0.0; 3];
            v[i] = 1.0 / mu[i];
            verts.push(v);
        }
        let opt = maximize_log_over_hull(&w, &verts).unwrap();
        for i in 0..3 {
            assert!(
                (opt.point[i] - w[i] / mu[i]).abs() < 1e-9,
                "{:?}",
                opt.point
            );
        }
        assert!(opt.certificate <= CERT_TOL);
    }

    #[test]
    fn interior_vertex_is_optimal() {
        let w = [0.5, 0.5];
        let verts = vec![vec![2.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]];
        let opt = maximize_log_over_hull(&w, &verts).unwrap();
        assert!((opt.point[0] - 1.0).abs() < 1e-9);
        assert!((opt.point[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn null_atom_reported() {
        let w = [0.5, 0.5];
        let verts = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        let opt = maximize_log_over_hull(&w, &verts).unwrap();
        assert_eq!(opt.null_atoms, vec![1]);
        assert!((opt.point[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(maximize_log_over_hull(&[1.0], &[]).is_err());
        assert!(maximize_log_over_hull(&[1.0], &[vec![-1.0]]).is_err());
        assert!(maximize_log_over_hull(&[1.0, 0.0], &[vec![1.0]]).is_err());
    }
}
