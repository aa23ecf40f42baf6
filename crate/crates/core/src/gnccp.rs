//! Graduated non-convexity and concavity: minimize the matching energy over
//! partial permutation matrices by homotopy. The surrogate
//! F_zeta = (1 -+ zeta) F + zeta tr(X^T X) sweeps zeta from 1 (convexified)
//! to -1 (concavified); each stage is solved by Frank-Wolfe over the relaxed
//! polytope Omega (rows sum to 1, column sums <= 1), and the concave end
//! forces X into a vertex, i.e. a partial permutation.

use ndarray::Array2;

use crate::assignment::solve_assignment;
use crate::energy::{matching_energy, AdjacencyBundle, EnergyWeights};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Homotopy and inner-loop controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnccpConfig<T = f64> {
    /// Outer zeta decrement per stage.
    pub d_zeta: T,
    /// Inner stop: relative objective change below this ends the stage.
    pub inner_tol: T,
    /// Inner stop: iteration cap per stage.
    pub max_inner: usize,
    /// Line search tolerance on alpha.
    pub line_search_tol: T,
}

impl<T: Real> Default for GnccpConfig<T> {
    fn default() -> Self {
        GnccpConfig {
            d_zeta: T::c(0.05),
            inner_tol: T::c(1e-6),
            max_inner: 100,
            line_search_tol: T::c(1e-8),
        }
    }
}

impl<T: Real> GnccpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_zeta > T::zero() && self.d_zeta < T::c(2.0)) {
            return Err(Error::InvalidParameter(format!(
                "d_zeta {} outside (0, 2)",
                self.d_zeta
            )));
        }
        Ok(())
    }
}

/// A point of the relaxed assignment polytope with its surrogate objective.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentState<T = f64> {
    pub x: Array2<T>,
    pub zeta: T,
    pub objective: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnccpStatus {
    /// X reached a vertex of Omega before zeta hit -1.
    Converged,
    /// zeta ran out; the returned X is the nearest partial permutation.
    RoundedAtZetaFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnccpResult<T = f64> {
    /// Final state; `x` is an exact partial permutation.
    pub state: AssignmentState<T>,
    /// Matching energy evaluated at the final assignment.
    pub energy: T,
    pub status: GnccpStatus,
    /// Total Frank-Wolfe iterations across all stages.
    pub iterations: usize,
}

/// The zeta surrogate given the raw objective value F(X).
pub fn f_zeta<T: Real>(x: &Array2<T>, zeta: T, f_value: T) -> T {
    let tr = x.iter().map(|v| *v * *v).sum::<T>();
    let coeff = if zeta >= T::zero() {
        T::one() - zeta
    } else {
        T::one() + zeta
    };
    coeff * f_value + zeta * tr
}

/// Minimize tr(grad^T Y) over Omega: a rectangular linear assignment whose
/// solution is an extreme point (partial permutation matrix).
pub fn linear_subproblem<T: Real>(grad: &Array2<T>) -> Array2<T> {
    let assign = solve_assignment(grad);
    let mut y = Array2::zeros(grad.raw_dim());
    for (i, &j) in assign.iter().enumerate() {
        y[(i, j)] = T::one();
    }
    y
}

/// Golden-section minimization of `f` over [0, 1]. The objective along a
/// Frank-Wolfe segment is quartic in alpha, so no closed form is assumed;
/// the endpoints are always candidates, which keeps the result valid even on
/// the concave stages where the interior search may miss the minimum.
pub fn line_search<T: Real, F: Fn(T) -> T>(f: F, tol: T) -> T {
    let phi = T::c(0.618_033_988_749_894_9);
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    let mid = (lo + hi) / T::c(2.0);
    let mut best = mid;
    let mut best_f = f(mid);
    for cand in [T::zero(), T::one()] {
        let fv = f(cand);
        if fv < best_f {
            best_f = fv;
            best = cand;
        }
    }
    best
}

/// Raw objective F(X) and its (unconstrained) gradient at X for the weighted
/// QAP energy; with `zeta`, the surrogate value and gradient instead.
pub fn objective_gradient<T: Real>(
    bundle_p: &AdjacencyBundle<T>,
    bundle_q: &AdjacencyBundle<T>,
    x: &Array2<T>,
    weights: &EnergyWeights<T>,
    zeta: T,
) -> Result<(T, Array2<T>)> {
    let f = matching_energy(bundle_p, bundle_q, x, weights)?;
    let ws = [
        weights.w_local,
        weights.w_global,
        weights.w_angular,
        weights.w_stringcut,
    ];
    let mut grad: Array2<T> = Array2::zeros(x.raw_dim());
    for (w, (a, b)) in ws
        .into_iter()
        .zip(bundle_p.matrices().into_iter().zip(bundle_q.matrices()))
    {
        let xb = x.dot(b);
        let s = xb.dot(&x.t());
        // d/dX ||A - XBX^T||^2 = 4 (XBX^T - A) XB for symmetric A, B
        let mut e = s;
        e -= a;
        let g = e.dot(&xb);
        grad.zip_mut_with(&g, |acc, v| *acc += T::c(4.0) * w * *v);
    }
    let coeff = if zeta >= T::zero() {
        T::one() - zeta
    } else {
        T::one() + zeta
    };
    grad.mapv_inplace(|v| v * coeff);
    grad.zip_mut_with(x, |acc, v| *acc += T::c(2.0) * zeta * *v);
    Ok((f_zeta(x, zeta, f), grad))
}

fn is_partial_permutation<T: Real>(x: &Array2<T>, tol: T) -> bool {
    for v in x.iter() {
        if !(v.abs() <= tol || (*v - T::one()).abs() <= tol) {
            return false;
        }
    }
    for row in x.rows() {
        let s: T = row.iter().cloned().sum();
        if (s - T::one()).abs() > tol * T::from_usize(x.ncols()).unwrap() {
            return false;
        }
    }
    for col in x.columns() {
        let s: T = col.iter().cloned().sum();
        if s > T::one() + tol * T::from_usize(x.nrows()).unwrap() {
            return false;
        }
    }
    true
}

#[cfg(debug_assertions)]
fn debug_check_omega<T: Real>(x: &Array2<T>) {
    let tol = T::c(1e-9);
    for v in x.iter() {
        debug_assert!(*v >= -tol, "negative entry {v}");
    }
    for row in x.rows() {
        let s: T = row.iter().cloned().sum();
        debug_assert!((s - T::one()).abs() <= tol, "row sum {s}");
    }
    for col in x.columns() {
        let s: T = col.iter().cloned().sum();
        debug_assert!(s <= T::one() + tol, "column sum {s}");
    }
}

/// Run the full homotopy and return the best assignment found.
///
/// The occluded curve supplies `bundle_p` (the M side); M must not exceed the
/// full curve's N. X starts at the uniform matrix. Each stage runs
/// Frank-Wolfe to convergence, then zeta decreases by `d_zeta`; the loop ends
/// when X reaches a vertex or zeta passes -1, and the final X is rounded to
/// the nearest partial permutation.
pub fn gnccp_optimize<T: Real>(
    bundle_p: &AdjacencyBundle<T>,
    bundle_q: &AdjacencyBundle<T>,
    weights: &EnergyWeights<T>,
    cfg: &GnccpConfig<T>,
) -> Result<GnccpResult<T>> {
    cfg.validate()?;
    weights.validate()?;
    let m = bundle_p.n();
    let n = bundle_q.n();
    if m > n {
        return Err(Error::DimensionMismatch(format!(
            "occluded bundle ({m}) larger than full bundle ({n})"
        )));
    }
    let a_mats = bundle_p.matrices();
    let b_mats = bundle_q.matrices();

    let inv_n = T::one() / T::from_usize(n).unwrap();
    let mut x: Array2<T> = Array2::from_elem((m, n), inv_n);
    let mut zeta = T::one();
    let vertex_tol = T::c(1e-6);
    let mut iterations = 0usize;

    // The homotopy balances F against tr(X^T X) <= M, but the energy's units
    // are arbitrary (weights are a free scale). Rescale the effective
    // weights so F at the uniform start is comparable to M; otherwise the
    // concave stages never push X to a vertex. The returned energy uses the
    // caller's weights.
    // sqrt(M) sits midway between the trace term's range endpoints (1 at the
    // uniform start, M at a vertex); it gave the best optima and the fewest
    // iterations of the tested scalings
    let f0 = matching_energy(bundle_p, bundle_q, &x, weights)?;
    let target = T::from_usize(m).unwrap().sqrt();
    let norm = if f0 > T::zero() { target / f0 } else { T::one() };
    let ws = [
        weights.w_local * norm,
        weights.w_global * norm,
        weights.w_angular * norm,
        weights.w_stringcut * norm,
    ];

    let flatten = |mats: &[&Array2<T>; 4]| -> Vec<Vec<T>> {
        mats.iter().map(|mm| mm.iter().cloned().collect()).collect()
    };
    let a_flat = flatten(&a_mats);
    let b_flat = flatten(&b_mats);

    // reusable O(N^2) work buffers; the only per-iteration matrix product is
    // the stacked gradient gemm (Y being a partial permutation turns the
    // line-search matrices into gathers)
    let mm = m * m;
    let mut g_buf: Vec<Vec<T>> = (0..4).map(|_| vec![T::zero(); mm]).collect();
    let mut gt_buf: Vec<Vec<T>> = (0..4).map(|_| vec![T::zero(); mm]).collect();
    let mut estack: Array2<T> = Array2::zeros((m, 4 * m));
    let mut pstack: Array2<T> = Array2::zeros((4 * m, n));

    while zeta > -T::one() && !is_partial_permutation(&x, vertex_tol) {
        // per-stage caches: P_k = X B_k, S_k = P_k X^T
        let mut pk: Vec<Array2<T>> = b_mats.iter().map(|b| x.dot(*b)).collect();
        let mut sk: Vec<Vec<T>> = pk
            .iter()
            .map(|p| p.dot(&x.t()).iter().cloned().collect())
            .collect();
        let mut trxx: T = x.iter().map(|v| *v * *v).sum();
        let coeff = if zeta >= T::zero() {
            T::one() - zeta
        } else {
            T::one() + zeta
        };
        let raw_f = |sk: &[Vec<T>]| -> T {
            let mut acc = T::zero();
            for k in 0..4 {
                let mut t = T::zero();
                for (sv, av) in sk[k].iter().zip(&a_flat[k]) {
                    let d = *sv - *av;
                    t += d * d;
                }
                acc += ws[k] * t;
            }
            acc
        };
        let mut f_prev = coeff * raw_f(&sk) + zeta * trxx;

        for _ in 0..cfg.max_inner {
            iterations += 1;
            let t_iter = std::time::Instant::now();
            // gradient of the surrogate at X; the four energy terms collapse
            // into one stacked product [4 w_k coeff (S_k - A_k)]_k [P_k]_k
            {
                let es = estack.as_slice_mut().expect("standard layout");
                for k in 0..4 {
                    let scale = T::c(4.0) * ws[k] * coeff;
                    let s = &sk[k];
                    let a = &a_flat[k];
                    for i in 0..m {
                        let dst = &mut es[i * 4 * m + k * m..i * 4 * m + (k + 1) * m];
                        let srow = &s[i * m..(i + 1) * m];
                        let arow = &a[i * m..(i + 1) * m];
                        for j in 0..m {
                            dst[j] = (srow[j] - arow[j]) * scale;
                        }
                    }
                }
                let ps = pstack.as_slice_mut().expect("standard layout");
                for k in 0..4 {
                    let p = pk[k].as_slice().expect("standard layout");
                    ps[k * m * n..(k + 1) * m * n].copy_from_slice(p);
                }
            }
            let t_gemm = t_iter.elapsed();
            let mut grad = estack.dot(&pstack);
            let t_grad = t_iter.elapsed();
            let (gx, gy, xy);
            {
                let gs = grad.as_slice_mut().expect("standard layout");
                let xs = x.as_slice().expect("standard layout");
                let two_zeta = T::c(2.0) * zeta;
                let mut dot = T::zero();
                for (g, xv) in gs.iter_mut().zip(xs) {
                    *g += two_zeta * *xv;
                    dot += *g * *xv;
                }
                gx = dot;
            }
            let t_prelap = t_iter.elapsed();
            let assign = solve_assignment(&grad);
            let t_lap = t_iter.elapsed();
            {
                let gs = grad.as_slice().expect("standard layout");
                let xs = x.as_slice().expect("standard layout");
                let mut sy = T::zero();
                let mut sxy = T::zero();
                for (row, &j) in assign.iter().enumerate() {
                    sy += gs[row * n + j];
                    sxy += xs[row * n + j];
                }
                gy = sy;
                xy = sxy;
            }
            // Frank-Wolfe duality gap <grad, X - Y>; in the convex stages it
            // bounds the suboptimality, so a small gap means converged
            if gx - gy <= cfg.inner_tol * (T::one() + f_prev.abs()) {
                break;
            }

            // Quartic coefficients of the energy along X + alpha (Y - X):
            // S(alpha) = (1-a)^2 S + (a-a^2)(G + G^T) + a^2 H with G = P Y^T
            // and H[i][j] = B[s(i)][s(j)], both plain gathers because Y is a
            // partial permutation. U = G + G^T - 2S and V = H - U - S are
            // folded into the accumulation without being stored.
            let dd = T::from_usize(m).unwrap() - T::c(2.0) * xy + trxx;
            let xd = xy - trxx;
            let mut poly = [T::zero(); 5];
            for k in 0..4 {
                let p = pk[k].as_slice().expect("standard layout");
                let s = &sk[k];
                let a = &a_flat[k];
                let b = &b_flat[k];
                let g = &mut g_buf[k];
                let gt = &mut gt_buf[k];
                for i in 0..m {
                    let prow = &p[i * n..(i + 1) * n];
                    let grow = &mut g[i * m..(i + 1) * m];
                    for (j, &col) in assign.iter().enumerate() {
                        grow[j] = prow[col];
                    }
                }
                // tiled transpose keeps the G^T reads cache-friendly
                const TILE: usize = 32;
                for ib in (0..m).step_by(TILE) {
                    for jb in (0..m).step_by(TILE) {
                        for i in ib..(ib + TILE).min(m) {
                            for j in jb..(jb + TILE).min(m) {
                                gt[j * m + i] = g[i * m + j];
                            }
                        }
                    }
                }
                let (mut q0, mut q1, mut q2a, mut q2b, mut q3, mut q4) = (
                    T::zero(),
                    T::zero(),
                    T::zero(),
                    T::zero(),
                    T::zero(),
                    T::zero(),
                );
                let two = T::c(2.0);
                for i in 0..m {
                    let brow = &b[assign[i] * n..assign[i] * n + n];
                    let row = i * m;
                    for j in 0..m {
                        let idx = row + j;
                        let sv = s[idx];
                        let c0 = a[idx] - sv;
                        let uu = g[idx] + gt[idx] - two * sv;
                        let vv = brow[assign[j]] - uu - sv;
                        q0 += c0 * c0;
                        q1 += c0 * uu;
                        q2a += uu * uu;
                        q2b += c0 * vv;
                        q3 += uu * vv;
                        q4 += vv * vv;
                    }
                }
                let w = ws[k];
                poly[0] += w * q0;
                poly[1] -= w * two * q1;
                poly[2] += w * (q2a - two * q2b);
                poly[3] += w * two * q3;
                poly[4] += w * q4;
            }
            let surrogate = |alpha: T| -> T {
                let e = poly[0]
                    + alpha * (poly[1] + alpha * (poly[2] + alpha * (poly[3] + alpha * poly[4])));
                let tr = trxx + T::c(2.0) * alpha * xd + alpha * alpha * dd;
                coeff * e + zeta * tr
            };
            let t_poly = t_iter.elapsed();
            let alpha = line_search(surrogate, cfg.line_search_tol);
            if !(alpha > T::zero()) {
                break;
            }
            let t_ls = t_iter.elapsed();

            // X <- X + alpha (Y - X), with the caches updated in step
            let keep = T::one() - alpha;
            let a2 = alpha * alpha;
            {
                let xs = x.as_slice_mut().expect("standard layout");
                for v in xs.iter_mut() {
                    *v *= keep;
                }
                for (row, &j) in assign.iter().enumerate() {
                    xs[row * n + j] += alpha;
                }
            }
            let keep2 = keep * keep;
            let w1 = alpha - a2;
            for k in 0..4 {
                let s = &mut sk[k];
                let b = &b_flat[k];
                let g = &g_buf[k];
                let gt = &gt_buf[k];
                for i in 0..m {
                    let brow = &b[assign[i] * n..assign[i] * n + n];
                    let row = i * m;
                    for j in 0..m {
                        let idx = row + j;
                        s[idx] =
                            keep2 * s[idx] + w1 * (g[idx] + gt[idx]) + a2 * brow[assign[j]];
                    }
                }
                let p = pk[k].as_slice_mut().expect("standard layout");
                for (i, &si) in assign.iter().enumerate() {
                    let prow = &mut p[i * n..(i + 1) * n];
                    let brow = &b[si * n..(si + 1) * n];
                    for j in 0..n {
                        prow[j] = keep * prow[j] + alpha * brow[j];
                    }
                }
            }
            trxx += T::c(2.0) * alpha * xd + a2 * dd;
            #[cfg(debug_assertions)]
            debug_check_omega(&x);

            let t_upd = t_iter.elapsed();
            let f_new = coeff * raw_f(&sk) + zeta * trxx;
            if std::env::var_os("GNCCP_TIMER").is_some() && iterations % 500 == 0 {
                eprintln!(
                    "iter {iterations}: fill {:?} gemm {:?} lap {:?} poly {:?} ls {:?} upd {:?} total {:?}",
                    t_gemm, t_grad - t_gemm, t_lap - t_prelap, t_poly - t_lap, t_ls - t_poly, t_upd - t_ls, t_iter.elapsed()
                );
            }
            debug_assert!(
                f_new <= f_prev + T::c(1e-7) * (T::one() + f_prev.abs()),
                "inner objective increased: {f_prev} -> {f_new}"
            );
            let plateau = (f_prev - f_new).abs() <= cfg.inner_tol * f_prev.abs().max(T::one());
            f_prev = f_new;
            // reaching a vertex of Omega ends the whole homotopy
            if plateau || is_partial_permutation(&x, vertex_tol) {
                break;
            }
        }
        if std::env::var_os("GNCCP_TRACE").is_some() {
            eprintln!("zeta {zeta:.3}: total iters {iterations}, f {f_prev:.4}");
        }
        if is_partial_permutation(&x, vertex_tol) {
            break;
        }
        zeta -= cfg.d_zeta;
    }

    let status = if is_partial_permutation(&x, vertex_tol) {
        GnccpStatus::Converged
    } else {
        GnccpStatus::RoundedAtZetaFloor
    };
    // snap to the nearest partial permutation: maximize <X, Y> over Omega
    let neg = x.mapv(|v| -v);
    let rounded = linear_subproblem(&neg);
    let energy = matching_energy(bundle_p, bundle_q, &rounded, weights)?;
    Ok(GnccpResult {
        state: AssignmentState {
            x: rounded,
            zeta,
            objective: energy,
        },
        energy,
        status,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_bundle(seed: u64, n: usize) -> AdjacencyBundle<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mk = || {
            let mut m = Array2::zeros((n, n));
            for i in 0..n {
                for j in i + 1..n {
                    let v = rng.gen_range(0.0..1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            m
        };
        AdjacencyBundle {
            a_local: mk(),
            a_global: mk(),
            a_angular: mk(),
            a_stringcut: mk(),
        }
    }

    fn permute_bundle(b: &AdjacencyBundle<f64>, perm: &[usize]) -> AdjacencyBundle<f64> {
        let relabel = |m: &Array2<f64>| {
            let n = perm.len();
            let mut out = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    out[(perm[i], perm[j])] = m[(i, j)];
                }
            }
            out
        };
        AdjacencyBundle {
            a_local: relabel(&b.a_local),
            a_global: relabel(&b.a_global),
            a_angular: relabel(&b.a_angular),
            a_stringcut: relabel(&b.a_stringcut),
        }
    }

    fn random_perm(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            p.swap(i, rng.gen_range(0..=i));
        }
        p
    }

    #[test]
    fn f_zeta_cases() {
        let x = arr2(&[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        assert_eq!(f_zeta(&x, 0.0, 5.0), 5.0);
        assert_eq!(f_zeta(&x, 1.0, 123.0), 2.0); // coefficient of F vanishes
        assert_eq!(f_zeta(&x, -1.0, 123.0), -2.0);
    }

    #[test]
    fn f_zeta_branches_agree_at_zero() {
        let x = arr2(&[[0.3, 0.7], [0.5, 0.5]]);
        let eps = 1e-12f64;
        let above = f_zeta(&x, eps, 2.0);
        let below = f_zeta(&x, -eps, 2.0);
        assert!((above - below).abs() < 1e-9);
    }

    #[test]
    fn linear_subproblem_examples() {
        let y = linear_subproblem(&arr2(&[[1.0, 2.0], [2.0, 1.0]]));
        assert_eq!(y, arr2(&[[1.0, 0.0], [0.0, 1.0]]));
        let z = linear_subproblem(&Array2::<f64>::zeros((2, 3)));
        assert!(is_partial_permutation(&z, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let g = Array2::from_shape_fn((3, 3), |_| rng.gen_range(-9i32..9) as f64);
            let y = linear_subproblem(&g);
            let got: f64 = (&g * &y).sum();
            // brute force over all 6 permutations
            let perms = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            let want = perms
                .iter()
                .map(|p| (0..3).map(|i| g[(i, p[i])]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn line_search_quadratic_minimum() {
        let f = |a: f64| (a - 0.3) * (a - 0.3) + 1.0;
        let alpha = line_search(f, 1e-8);
        assert!((alpha - 0.3).abs() < 1e-6);
    }

    #[test]
    fn line_search_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let f = |a: f64| c[0] + a * (c[1] + a * (c[2] + a * (c[3] + a * c[4])));
            let alpha = line_search(f, 1e-8);
            assert!((0.0..=1.0).contains(&alpha));
            // never worse than both endpoints
            assert!(f(alpha) <= f(0.0) + 1e-12 && f(alpha) <= f(1.0) + 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for trial in 0..5 {
            let p = random_bundle(40 + trial, 4);
            let q = random_bundle(50 + trial, 4);
            let w = EnergyWeights::default();
            let x = Array2::from_shape_fn((4, 4), |_| rng.gen_range(0.05..0.45));
            for zeta in [0.7, 0.0, -0.4] {
                let (_, grad) = objective_gradient(&p, &q, &x, &w, zeta).unwrap();
                let h = 1e-6;
                for i in 0..4 {
                    for j in 0..4 {
                        let mut xp = x.clone();
                        xp[(i, j)] += h;
                        let mut xm = x.clone();
                        xm[(i, j)] -= h;
                        let fp = objective_gradient(&p, &q, &xp, &w, zeta).unwrap().0;
                        let fm = objective_gradient(&p, &q, &xm, &w, zeta).unwrap().0;
                        let fd = (fp - fm) / (2.0 * h);
                        let g = grad[(i, j)];
                        let denom = g.abs().max(fd.abs()).max(1e-6);
                        assert!(
                            ((g - fd) / denom).abs() < 1e-4,
                            "zeta={zeta} ({i},{j}): {g} vs {fd}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn exact_match_instance_reaches_zero() {
        let p = random_bundle(7, 6);
        let r = gnccp_optimize(&p, &p, &EnergyWeights::default(), &GnccpConfig::default()).unwrap();
        assert!(r.energy < 1e-9, "energy {}", r.energy);
        assert!(is_partial_permutation(&r.state.x, 1e-9));
    }

    #[test]
    fn planted_permutation_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut hits = 0;
        for trial in 0..10 {
            let n = 5 + (trial as usize % 4);
            let a = random_bundle(300 + trial, n);
            let perm = random_perm(&mut rng, n);
            let b = permute_bundle(&a, &perm);
            let r = gnccp_optimize(&a, &b, &EnergyWeights::default(), &GnccpConfig::default())
                .unwrap();
            assert!(is_partial_permutation(&r.state.x, 1e-9));
            if r.energy <= 1e-6 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "only {hits}/10 planted instances recovered");
    }

    #[test]
    fn beats_random_permutation_baseline() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_bundle(60, 5);
        let q = random_bundle(61, 5);
        let w = EnergyWeights::default();
        let r = gnccp_optimize(&p, &q, &w, &GnccpConfig::default()).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..50 {
            let perm = random_perm(&mut rng, 5);
            let mut x = Array2::zeros((5, 5));
            for (i, &j) in perm.iter().enumerate() {
                x[(i, j)] = 1.0;
            }
            best = best.min(matching_energy(&p, &q, &x, &w).unwrap());
        }
        assert!(
            r.energy <= best + 1e-9,
            "gnccp {} vs random baseline {}",
            r.energy,
            best
        );
    }

    #[test]
    fn rectangular_instance_gives_partial_permutation() {
        let p = random_bundle(70, 3);
        let q = random_bundle(71, 5);
        let r = gnccp_optimize(&p, &q, &EnergyWeights::default(), &GnccpConfig::default()).unwrap();
        assert_eq!(r.state.x.nrows(), 3);
        assert_eq!(r.state.x.ncols(), 5);
        assert!(is_partial_permutation(&r.state.x, 1e-9));
        let too_big = gnccp_optimize(&q, &p, &EnergyWeights::default(), &GnccpConfig::default());
        assert!(too_big.is_err());
    }

    #[test]
    fn incremental_caches_match_direct_objective() {
        // the optimizer's staged bookkeeping must agree with a direct
        // evaluation of the surrogate at the final X
        let p = random_bundle(80, 5);
        let q = random_bundle(81, 6);
        let w = EnergyWeights::default();
        let r = gnccp_optimize(&p, &q, &w, &GnccpConfig::default()).unwrap();
        let direct = matching_energy(&p, &q, &r.state.x, &w).unwrap();
        assert!((direct - r.energy).abs() < 1e-9);
    }
}
