//! Small shared numerics.

use crate::scalar::Real;

/// Gaussian elimination with partial pivoting for small dense systems.
/// Returns None when the matrix is (numerically) singular.
pub(crate) fn solve_small<T: Real>(a: &mut [Vec<T>], b: &mut [T]) -> Option<Vec<T>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    let scale = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[pivot][col].abs() <= scale * T::epsilon() * T::c(1e3) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let upper = a[col][k];
                a[row][k] = a[row][k] - f * upper;
            }
            let rhs = b[col];
            b[row] = b[row] - f * rhs;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_3x3() {
        let mut a = vec![
            vec![2.0, 1.0, -1.0],
            vec![-3.0, -1.0, 2.0],
            vec![-2.0, 1.0, 2.0],
        ];
        let mut b = vec![8.0, -11.0, -3.0];
        let x = solve_small(&mut a, &mut b).unwrap();
        let expect = [2.0f64, 3.0, -1.0];
        for (xi, ei) in x.iter().zip(expect) {
            assert!((xi - ei).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_singular() {
        let mut a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let mut b = vec![1.0, 2.0];
        assert!(solve_small(&mut a, &mut b).is_none());
    }
}
