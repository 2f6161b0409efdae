//! Dense linear solves for the tiny systems this crate needs: starting-weight
//! systems (a handful of unknowns, Vandermonde-like and badly scaled) and
//! Newton updates for implicit time steps (system dimension).  Scaled partial
//! pivoting keeps the Vandermonde cases honest without pulling in a LAPACK
//! binding for 8x8 matrices.

use crate::error::{Error, Result};

/// Solve `A x = b` by Gaussian elimination with scaled partial pivoting.
///
/// `a` is row-major, consumed as workspace.  Returns
/// [`Error::SingularSystem`] when a pivot is negligible relative to its row's
/// largest entry.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));

    // Implicit row scales: largest magnitude in each row.
    let mut scale = vec![0.0f64; n];
    for (i, row) in a.iter().enumerate() {
        let m = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m == 0.0 {
            return Err(Error::SingularSystem(format!("row {i} is zero")));
        }
        scale[i] = m;
    }

    for col in 0..n {
        // Pick the row with the largest scaled pivot.
        let mut best = col;
        let mut best_mag = a[col][col].abs() / scale[col];
        for row in col + 1..n {
            let mag = a[row][col].abs() / scale[row];
            if mag > best_mag {
                best = row;
                best_mag = mag;
            }
        }
        if best != col {
            a.swap(col, best);
            b.swap(col, best);
            scale.swap(col, best);
        }
        let pivot = a[col][col];
        if pivot.abs() <= 1e-14 * scale[col] {
            return Err(Error::SingularSystem(format!(
                "pivot {pivot:e} negligible in column {col}"
            )));
        }
        for row in col + 1..n {
            let factor = a[row][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[row][col] = 0.0;
            for k in col + 1..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }

    let mut x = vec![0.0f64; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_returns_rhs() {
        let a = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let x = solve(a, vec![3.0, -1.0, 0.5]).unwrap();
        assert_eq!(x, vec![3.0, -1.0, 0.5]);
    }

    #[test]
    fn random_systems_round_trip() {
        let mut rng = StdRng::seed_from_u64(0x11a7_0001);
        for n in 1..=8 {
            for _ in 0..20 {
                let a: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let b: Vec<f64> = (0..n)
                    .map(|i| (0..n).map(|j| a[i][j] * x_true[j]).sum())
                    .collect();
                match solve(a, b) {
                    Ok(x) => {
                        for (xi, ti) in x.iter().zip(&x_true) {
                            assert_relative_eq!(xi, ti, max_relative = 1e-9, epsilon = 1e-10);
                        }
                    }
                    // A random matrix can be near-singular; skip those draws.
                    Err(Error::SingularSystem(_)) => continue,
                    Err(e) => panic!("unexpected error {e}"),
                }
            }
        }
    }

    #[test]
    fn vandermonde_recovers_polynomial_coefficients() {
        // Interpolate p(t) = 2 - t + 0.5 t^3 at 4 nodes.
        let nodes = [1.0f64, 2.0, 3.0, 4.0];
        let a: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&t| (0..4).map(|k| t.powi(k as i32)).collect())
            .collect();
        let b: Vec<f64> = nodes.iter().map(|&t| 2.0 - t + 0.5 * t * t * t).collect();
        let x = solve(a, b).unwrap();
        let expect = [2.0, -1.0, 0.0, 0.5];
        for (xi, ei) in x.iter().zip(&expect) {
            assert_relative_eq!(xi, ei, max_relative = 1e-10, epsilon = 1e-10);
        }
    }

    #[test]
    fn badly_scaled_rows_still_solve() {
        // Without scaled pivoting the tiny first pivot would be chosen.
        let a = vec![vec![1.0e-12, 1.0], vec![1.0, 1.0]];
        let x = solve(a, vec![1.0, 2.0]).unwrap();
        // Exact: x1 = (2 - 1/(1 - 1e-12)) ..., to double precision x ~ (1, 1).
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-9);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(
            solve(a, vec![1.0, 2.0]),
            Err(Error::SingularSystem(_))
        ));
        let zero_row = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        assert!(matches!(
            solve(zero_row, vec![0.0, 1.0]),
            Err(Error::SingularSystem(_))
        ));
    }
}
