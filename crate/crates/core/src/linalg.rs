//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver for the symmetric systems produced by P1 assembly.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in the order they were pushed, so assembly that
    /// visits elements in a fixed order yields bit-reproducible entries.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let slot = next[r];
            cols[slot] = c;
            vals[slot] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps the push order among duplicates
            scratch.sort_by_key(|&(c, _)| c);
            let mut iter = scratch.iter().peekable();
            while let Some(&(c, v)) = iter.next() {
                let mut acc = v;
                while let Some(&&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    acc += v2;
                    iter.next();
                }
                col_idx.push(c);
                values.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.get(r, r)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Quadratic form `x^T A x`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    /// Restriction to the rows and columns listed in `keep` (in that order).
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.ncols];
        for (i, &g) in keep.iter().enumerate() {
            local[g] = i;
        }
        let mut triplets = Vec::new();
        for (i, &g) in keep.iter().enumerate() {
            for (c, v) in self.row(g) {
                if local[c] != usize::MAX {
                    triplets.push((i, local[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), keep.len(), &triplets)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    /// Stop once `||b - Ax|| <= rel_tol * ||b||`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Remove the mean of every residual; used for singular systems whose
    /// kernel is the constant vector.
    pub project_constants: bool,
}

impl CgOptions {
    pub fn for_size(n: usize) -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 20 * n.max(1),
            project_constants: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Preconditioned conjugate gradients with the diagonal of `a` as
/// preconditioner, started from `x0`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: CgOptions) -> Result<CgOutcome> {
    let n = a.nrows();
    assert_eq!(b.len(), n);
    assert_eq!(x0.len(), n);
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut rhs = b.to_vec();
    if opts.project_constants {
        remove_mean(&mut rhs);
    }
    let b_norm = norm2(&rhs);
    let mut x = x0.to_vec();
    if b_norm == 0.0 {
        if opts.project_constants {
            // any constant solves the homogeneous singular system
            return Ok(CgOutcome {
                solution: x,
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        return Ok(CgOutcome {
            solution: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut r = a.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(&rhs) {
        *ri = bi - *ri;
    }
    if opts.project_constants {
        remove_mean(&mut r);
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    if opts.project_constants {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm2(&r) / b_norm;
    let mut it = 0;
    while rel > opts.rel_tol {
        if it >= opts.max_iter {
            return Err(Error::NonConvergence {
                what: "conjugate gradients",
                iterations: it,
                residual: rel,
            });
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NonConvergence {
                what: "conjugate gradients (loss of positive definiteness)",
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if opts.project_constants {
            remove_mean(&mut r);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        if opts.project_constants {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
        rel = norm2(&r) / b_norm;
    }
    Ok(CgOutcome {
        solution: x,
        iterations: it,
        relative_residual: rel,
    })
}

/// `b − A x` with every row evaluated by compensated (Dot2) summation, so
/// the result is accurate even when the row products cancel.
pub fn compensated_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), a.ncols());
    assert_eq!(b.len(), a.nrows());
    (0..a.nrows())
        .map(|r| {
            let (mut sum, mut err) = (b[r], 0.0);
            for (c, v) in a.row(r) {
                let prod = -v * x[c];
                err += (-v).mul_add(x[c], -prod);
                let t = sum + prod;
                let bp = t - sum;
                err += (sum - (t - bp)) + (prod - bp);
                sum = t;
            }
            sum + err
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn compensated_residual_survives_cancellation() {
        let a = CsrMatrix::from_triplets(1, 2, &[(0, 0, 1e8), (0, 1, -1e8)]);
        let x = [1.0 + 1e-15, 1.0];
        let r = compensated_residual(&a, &x, &[0.0]);
        let exact = -1e8 * (x[0] - x[1]);
        assert!((r[0] - exact).abs() <= 1e-12 * exact.abs(), "{} vs {exact}", r[0]);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.5), (1, 0, -1.0), (0, 1, 4.0)]);
        assert_eq!(m.get(0, 0), 3.5);
        assert_eq!(m.get(0, 1), 4.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = laplacian_1d(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let out = pcg(&a, &b, &vec![0.0; 50], CgOptions::for_size(50)).unwrap();
        for (x, y) in out.solution.iter().zip(&x_true) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_reports_iteration_cap() {
        let a = laplacian_1d(50);
        let b = vec![1.0; 50];
        let opts = CgOptions {
            max_iter: 2,
            ..CgOptions::for_size(50)
        };
        match pcg(&a, &b, &vec![0.0; 50], opts) {
            Err(Error::NonConvergence { iterations, .. }) => assert_eq!(iterations, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn restrict_keeps_requested_block() {
        let a = laplacian_1d(4);
        let r = a.restrict(&[1, 2]);
        assert_eq!(r.get(0, 0), 2.0);
        assert_eq!(r.get(0, 1), -1.0);
        assert_eq!(r.nrows(), 2);
    }
}
