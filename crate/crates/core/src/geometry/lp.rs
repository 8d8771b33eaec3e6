//! Dense primal simplex for small problems of the form
//! `maximize c·x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The all-slack basis is feasible because `b >= 0`, so no phase one is
//! needed. Pivoting follows Bland's rule, which both guarantees termination
//! on degenerate problems and makes the chosen optimum a deterministic
//! function of the row and column order.

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Unbounded,
}

const PIVOT_EPS: f64 = 1e-12;

/// Solves the LP described in the module docs. `a` is row-major with
/// `b.len()` rows and `c.len()` columns.
///
/// Panics if the dimensions disagree or some `b[i]` is negative.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = b.len();
    assert_eq!(a.len(), m, "constraint matrix rows");
    assert!(b.iter().all(|&bi| bi >= 0.0), "initial basis must be feasible");

    // Tableau columns: n structural, m slack, then the right-hand side.
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for (i, row) in a.iter().enumerate() {
        assert_eq!(row.len(), n, "constraint matrix columns");
        t[i][..n].copy_from_slice(row);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    // Objective row holds reduced costs of the minimization of -c·x.
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Bland's rule cannot cycle, so the number of pivots is finite; the cap
    // only guards against pathological floating-point behaviour.
    for _ in 0..10_000 {
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -PIVOT_EPS) else {
            let mut x = vec![0.0; n];
            for (i, &bj) in basis.iter().enumerate() {
                if bj < n {
                    x[bj] = t[i][width - 1];
                }
            }
            let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
            return LpOutcome::Optimal { x, value };
        };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = t[i][enter];
            if coef > PIVOT_EPS {
                let ratio = t[i][width - 1] / coef;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-15 || (ratio <= lr + 1e-15 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = leave else {
            return LpOutcome::Unbounded;
        };

        let pivot = t[row][enter];
        for v in t[row].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row {
                let f = r[enter];
                if f != 0.0 {
                    for (v, p) in r.iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        basis[row] = enter;
    }
    LpOutcome::Unbounded
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let out = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        );
        match out {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 2.0).abs() < 1e-12);
                assert!((x[1] - 6.0).abs() < 1e-12);
                assert!((value - 36.0).abs() < 1e-12);
            }
            LpOutcome::Unbounded => panic!("expected optimum"),
        }
    }

    #[test]
    fn detects_unbounded() {
        let out = maximize(&[1.0, 0.0], &[vec![-1.0, 1.0]], &[1.0]);
        assert_eq!(out, LpOutcome::Unbounded);
    }
}
