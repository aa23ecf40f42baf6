//! Exact rectangular linear assignment by shortest augmenting paths with
//! potentials, O(M^2 N) for an M x N cost matrix with M <= N. Handles
//! arbitrary finite costs, including negative entries.

use ndarray::Array2;

use crate::scalar::Real;

/// Optimal column for each row, minimizing the total cost.
pub(crate) fn solve_assignment<T: Real>(cost: &Array2<T>) -> Vec<usize> {
    let rows = cost.nrows();
    let cols = cost.ncols();
    assert!(rows >= 1 && rows <= cols, "assignment needs 1 <= rows <= cols");
    let owned;
    let flat: &[T] = match cost.as_slice() {
        Some(s) => s,
        None => {
            owned = cost.to_owned();
            owned.as_slice().expect("owned array is contiguous")
        }
    };

    // 1-based arrays with a virtual column 0; p[j] = row matched to column j
    let mut u = vec![T::zero(); rows + 1];
    let mut v = vec![T::zero(); cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![T::infinity(); cols + 1];
    let mut used = vec![false; cols + 1];

    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(T::infinity());
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let ui0 = u[i0];
            let row = &flat[(i0 - 1) * cols..i0 * cols];
            let mut delta = T::infinity();
            let mut j1 = 0usize;
            for j in 1..=cols {
                if !used[j] {
                    let cur = row[j - 1] - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // unwind the augmenting path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    debug_assert!(row_to_col.iter().all(|&c| c != usize::MAX));
    row_to_col
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &Array2<f64>) -> f64 {
        // enumerate every injective row -> column map
        fn go(cost: &Array2<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.nrows() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for col in 0..cost.ncols() {
                if !used[col] {
                    used[col] = true;
                    best = best.min(cost[(row, col)] + go(cost, row + 1, used));
                    used[col] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost.ncols()])
    }

    fn total(cost: &Array2<f64>, assign: &[usize]) -> f64 {
        assign.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum()
    }

    #[test]
    fn two_by_two() {
        let cost = arr2(&[[1.0, 2.0], [2.0, 1.0]]);
        let assign = solve_assignment(&cost);
        assert_eq!(assign, vec![0, 1]);
        assert_eq!(total(&cost, &assign), 2.0);
    }

    #[test]
    fn matches_brute_force_square_and_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for trial in 0..200 {
            let rows = rng.gen_range(1..=5);
            let cols = rng.gen_range(rows..=6);
            let cost = Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-10.0..10.0f64));
            let assign = solve_assignment(&cost);
            let mut seen = vec![false; cols];
            for &c in &assign {
                assert!(!seen[c], "column reused in trial {trial}");
                seen[c] = true;
            }
            let got = total(&cost, &assign);
            let want = brute_force(&cost);
            assert!((got - want).abs() < 1e-9, "trial {trial}: {got} vs {want}");
        }
    }
}
