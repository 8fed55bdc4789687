//! Dense LU factorization with partial pivoting on flat row-major storage.
//!
//! Pivot acceptance is scaled per column against the largest entry the
//! column held before elimination, so a structurally singular block (e.g. a
//! floating island of components) is reported even when the rest of the
//! matrix carries much larger conductances.

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    /// Combined L (below diagonal, unit diagonal implied) and U factors.
    lu: Vec<f64>,
    /// Row permutation applied before elimination.
    perm: Vec<usize>,
}

/// Column index whose pivot fell below tolerance.
#[derive(Debug, Clone, Copy)]
pub struct SingularColumn(pub usize);

impl DenseLu {
    /// Factor `a` (row-major, n x n). `rel_tol` is the minimum acceptable
    /// ratio of pivot magnitude to the column's pre-elimination scale.
    pub fn factor(a: &[f64], n: usize, rel_tol: f64) -> Result<DenseLu, SingularColumn> {
        debug_assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();

        let mut col_scale = vec![0.0_f64; n];
        for i in 0..n {
            for j in 0..n {
                col_scale[j] = col_scale[j].max(lu[i * n + j].abs());
            }
        }

        for k in 0..n {
            let mut pivot_row = k;
            let mut pivot_mag = lu[k * n + k].abs();
            for i in k + 1..n {
                let mag = lu[i * n + k].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if col_scale[k] == 0.0 || pivot_mag < rel_tol * col_scale[k] {
                return Err(SingularColumn(k));
            }
            if pivot_row != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot_row * n + j);
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let m = lu[i * n + k] / pivot;
                lu[i * n + k] = m;
                if m != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= m * lu[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    /// Solve A x = b into `x`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        // Forward substitution (unit lower triangular).
        for i in 1..n {
            let mut sum = x[i];
            for j in 0..i {
                sum -= self.lu[i * n + j] * x[j];
            }
            x[i] = sum;
        }
        // Backward substitution.
        for i in (0..n).rev() {
            let mut sum = x[i];
            for j in i + 1..n {
                sum -= self.lu[i * n + j] * x[j];
            }
            x[i] = sum / self.lu[i * n + i];
        }
    }
}

/// r = b - A x, returning the infinity norm of r.
pub fn residual_into(a: &[f64], n: usize, x: &[f64], b: &[f64], r: &mut [f64]) -> f64 {
    let mut norm = 0.0_f64;
    for i in 0..n {
        let mut acc = 0.0;
        let row = &a[i * n..(i + 1) * n];
        for (aij, xj) in row.iter().zip(x) {
            acc += aij * xj;
        }
        r[i] = b[i] - acc;
        norm = norm.max(r[i].abs());
    }
    norm
}
