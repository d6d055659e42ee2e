//! Dense LU solves for the small linear systems of tabular MDPs.
//!
//! `I - gamma * P^pi` is strictly diagonally dominant for gamma < 1, so
//! partial pivoting is already more caution than the systems require. A
//! hand-rolled factorization keeps results bit-identical across platforms,
//! which the reproducibility contract of the experiment harness relies on;
//! BLAS backends do not guarantee that.

use ndarray::{Array1, Array2};

/// Solves `a x = b` by LU factorization with partial pivoting.
///
/// Panics on a numerically singular matrix. That cannot happen for the
/// systems built from validated inputs here, so a panic signals an upstream
/// invariant violation, not a user error.
pub(crate) fn solve(a: Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    debug_assert_eq!(n, b.len());
    let mut lu = a;
    let mut perm: Vec<usize> = (0..n).collect();

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_abs = lu[[col, col]].abs();
        for row in col + 1..n {
            let cand = lu[[row, col]].abs();
            if cand > pivot_abs {
                pivot_abs = cand;
                pivot_row = row;
            }
        }
        assert!(pivot_abs > f64::EPSILON * n as f64, "singular system in LU solve");
        if pivot_row != col {
            perm.swap(col, pivot_row);
            for j in 0..n {
                let tmp = lu[[col, j]];
                lu[[col, j]] = lu[[pivot_row, j]];
                lu[[pivot_row, j]] = tmp;
            }
        }
        let pivot = lu[[col, col]];
        for row in col + 1..n {
            let factor = lu[[row, col]] / pivot;
            lu[[row, col]] = factor;
            for j in col + 1..n {
                lu[[row, j]] -= factor * lu[[col, j]];
            }
        }
    }

    // Forward substitution on the permuted right-hand side.
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut acc = b[perm[i]];
        for j in 0..i {
            acc -= lu[[i, j]] * y[j];
        }
        y[i] = acc;
    }
    // Back substitution.
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut acc = y[i];
        for j in i + 1..n {
            acc -= lu[[i, j]] * x[j];
        }
        x[i] = acc / lu[[i, i]];
    }
    x
}
