//! Vertex enumeration for small H-polyhedra `{x : A x <= b}`.
//!
//! Every vertex is the unique solution of `n` linearly independent active
//! constraints, so the vertices are found by solving each square subsystem
//! and keeping the feasible solutions. This is exponential in the number of
//! constraints and intended for the low-dimensional sets used here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feasibility and deduplication tolerance.
pub const GEOM_TOL: f64 = 1e-9;

/// Upper bound on the number of active sets examined.
pub const MAX_SUBSETS: usize = 2_000_000;

/// Linear inequality system `A x <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaces {
    pub normals: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub dim: usize,
}

impl HalfSpaces {
    pub fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>, dim: usize) -> Result<Self> {
        if normals.len() != offsets.len() {
            return Err(Error::Dimension {
                expected: normals.len(),
                got: offsets.len(),
            });
        }
        if let Some(row) = normals.iter().find(|r| r.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: row.len(),
            });
        }
        if normals
            .iter()
            .flatten()
            .chain(&offsets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidPolytope("non-finite coefficient".into()));
        }
        Ok(HalfSpaces {
            normals,
            offsets,
            dim,
        })
    }

    pub fn push(&mut self, normal: Vec<f64>, offset: f64) {
        debug_assert_eq!(normal.len(), self.dim);
        self.normals.push(normal);
        self.offsets.push(offset);
    }

    /// Adds `-x_i <= 0` for every coordinate.
    pub fn with_nonnegativity(mut self) -> Self {
        for i in 0..self.dim {
            let mut row = vec![0.0; self.dim];
            row[i] = -1.0;
            self.push(row, 0.0);
        }
        self
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.normals
            .iter()
            .zip(&self.offsets)
            .all(|(a, b)| dot(a, x) <= b + tol * (1.0 + b.abs()))
    }

    fn matrix(&self, rows: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.dim, |r, c| self.normals[rows[r]][c])
    }

    /// True when the recession cone `{d : A d <= 0}` is trivial.
    pub fn is_bounded(&self) -> Result<bool> {
        let n = self.dim;
        if n == 0 {
            return Ok(true);
        }
        let m = self.normals.len();
        let all: Vec<usize> = (0..m).collect();
        if m < n || rank(&self.matrix(&all)) < n {
            // a lineality direction exists
            return Ok(false);
        }
        // pointed cone: nontrivial iff some extreme ray, each defined by
        // n - 1 independent active constraints
        let mut found = false;
        for_each_subset(m, n - 1, |rows| {
            let d = if n == 1 {
                DVector::from_element(1, 1.0)
            } else {
                let a = self.matrix(rows);
                if rank(&a) < n - 1 {
                    return Ok(true);
                }
                match null_vector(&a) {
                    Some(d) => d,
                    None => return Ok(true),
                }
            };
            for sign in [1.0, -1.0] {
                let ray: Vec<f64> = d.iter().map(|v| sign * v).collect();
                let ok = self
                    .normals
                    .iter()
                    .all(|a| dot(a, &ray) <= GEOM_TOL * norm(a));
                if ok {
                    found = true;
                    return Ok(false);
                }
            }
            Ok(true)
        })?;
        Ok(!found)
    }

    /// All vertices, deduplicated and sorted lexicographically.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.dim;
        let m = self.normals.len();
        if n == 0 {
            return Ok(vec![vec![]]);
        }
        if m < n {
            return Ok(Vec::new());
        }
        let mut out: Vec<Vec<f64>> = Vec::new();
        for_each_subset(m, n, |rows| {
            let a = self.matrix(rows);
            if rank(&a) < n {
                return Ok(true);
            }
            let b = DVector::from_iterator(n, rows.iter().map(|&r| self.offsets[r]));
            let lu = a.lu();
            if let Some(x) = lu.solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                if x.iter().all(|v| v.is_finite())
                    && self.contains(&x, GEOM_TOL)
                    && !out.iter().any(|v| approx_same(v, &x))
                {
                    out.push(x);
                }
            }
            Ok(true)
        })?;
        for v in &mut out {
            for c in v.iter_mut() {
                if c.abs() < 1e-13 {
                    *c = 0.0;
                }
            }
        }
        out.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Ok(out)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt().max(1.0)
}

fn approx_same(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= GEOM_TOL * (1.0 + x.abs().max(y.abs())))
}

fn rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax.max(1.0))
        .count()
}

/// Unit vector spanning the null space of a rank-(n-1) matrix with n columns.
fn null_vector(a: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = a.ncols();
    // pad to square so the SVD exposes all right singular vectors
    let mut sq = DMatrix::zeros(n, n);
    sq.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))?;
    Some(v_t.row(idx).transpose())
}

/// Calls `f` on every k-subset of `0..m` in lexicographic order until it
/// returns `Ok(false)`.
fn for_each_subset<F>(m: usize, k: usize, mut f: F) -> Result<()>
where
    F: FnMut(&[usize]) -> Result<bool>,
{
    if k > m {
        return Ok(());
    }
    if binomial(m, k) > MAX_SUBSETS as f64 {
        return Err(Error::InvalidPolytope(format!(
            "{m} constraints in dimension {k} exceed the enumeration budget"
        )));
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx)? {
            return Ok(());
        }
        // advance to the next combination
        match (0..k).rev().find(|&i| idx[i] < i + m - k) {
            None => return Ok(()),
            Some(i) => {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
