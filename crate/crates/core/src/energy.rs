//! The matching energy: four per-curve adjacency matrices (local curvature,
//! global curvature, shape-context angular structure, StringCut geometry)
//! combined into a quadratic-assignment objective
//! E = sum_k w_k ||A_k - X B_k X^T||_F^2 over (partial) permutations X.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{curvature_profile, gather_window, Curve, Point2};
use crate::scalar::Real;

/// Term weights of the energy. All default to 0.25.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights<T = f64> {
    pub w_local: T,
    pub w_global: T,
    pub w_angular: T,
    pub w_stringcut: T,
}

impl<T: Real> Default for EnergyWeights<T> {
    fn default() -> Self {
        let q = T::c(0.25);
        EnergyWeights {
            w_local: q,
            w_global: q,
            w_angular: q,
            w_stringcut: q,
        }
    }
}

impl<T: Real> EnergyWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.w_local, self.w_global, self.w_angular, self.w_stringcut];
        if ws.iter().any(|w| !(*w >= T::zero())) {
            return Err(Error::InvalidParameter("energy weights must be >= 0".into()));
        }
        if !(ws.iter().cloned().sum::<T>() > T::zero()) {
            return Err(Error::InvalidParameter("energy weights must sum > 0".into()));
        }
        Ok(())
    }

    fn as_array(&self) -> [T; 4] {
        [self.w_local, self.w_global, self.w_angular, self.w_stringcut]
    }
}

/// Sizing knobs for bundle construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleConfig<T = f64> {
    /// Local-curvature window (points).
    pub local_window: usize,
    /// Shape-context radial bin count.
    pub n_r: usize,
    /// Shape-context angular bin count.
    pub n_theta: usize,
    /// StringCut neighbourhood size (points, rounded up to odd).
    pub stringcut_window: usize,
    /// On-the-line tolerance as a fraction of the curve length.
    pub on_line_tol: T,
}

impl<T: Real> Default for BundleConfig<T> {
    fn default() -> Self {
        BundleConfig {
            local_window: 20,
            n_r: 5,
            n_theta: 12,
            stringcut_window: 21,
            on_line_tol: T::c(1e-6),
        }
    }
}

/// Log-polar histogram of the positions of all other points relative to one
/// point, angles measured against the local tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeContextHistogram {
    pub bins: Vec<u32>,
    pub n_r: usize,
    pub n_theta: usize,
}

impl ShapeContextHistogram {
    pub fn total(&self) -> u32 {
        self.bins.iter().sum()
    }
}

/// StringCut features of one neighbourhood: how its points distribute around
/// the chord through the window endpoints, plus the arc/chord bending ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringCutFeatures<T = f64> {
    pub f_below: T,
    pub f_upper: T,
    pub f_on_line: usize,
    pub f_bending: T,
}

/// The four N x N adjacency matrices of one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyBundle<T = f64> {
    pub a_local: Array2<T>,
    pub a_global: Array2<T>,
    pub a_angular: Array2<T>,
    pub a_stringcut: Array2<T>,
}

impl<T: Real> AdjacencyBundle<T> {
    pub fn n(&self) -> usize {
        self.a_local.nrows()
    }

    pub(crate) fn matrices(&self) -> [&Array2<T>; 4] {
        [&self.a_local, &self.a_global, &self.a_angular, &self.a_stringcut]
    }
}

// ===== shape context =====

fn tangent_at<T: Real>(points: &[Point2<T>], closed: bool, i: usize) -> Point2<T> {
    let hood = gather_window(points, closed, i, 1);
    hood[2] - hood[0]
}

fn mean_pairwise_distance<T: Real>(points: &[Point2<T>]) -> T {
    let n = points.len();
    let mut acc = T::zero();
    let mut count = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            acc += points[i].distance(points[j]);
            count += 1;
        }
    }
    if count == 0 {
        T::one()
    } else {
        acc / T::from_usize(count).unwrap()
    }
}

fn shape_context_with<T: Real>(
    points: &[Point2<T>],
    closed: bool,
    i: usize,
    n_r: usize,
    n_theta: usize,
    mean_dist: T,
) -> ShapeContextHistogram {
    let mut bins = vec![0u32; n_r * n_theta];
    let tangent = tangent_at(points, closed, i);
    let base_angle = tangent.y.atan2(tangent.x);
    // logarithmic radial edges between 0.125 and 2 mean pairwise distances;
    // the innermost and outermost bins absorb anything beyond
    let r_lo = T::c(0.125) * mean_dist;
    let ratio = T::c(16.0).powf(T::one() / T::from_usize(n_r).unwrap());
    let two_pi = T::c(std::f64::consts::TAU);
    for (j, q) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let rel = *q - points[i];
        let r = rel.norm();
        let mut ri = 0usize;
        let mut edge = r_lo * ratio;
        while ri + 1 < n_r && r >= edge {
            ri += 1;
            edge = edge * ratio;
        }
        let mut ang = rel.y.atan2(rel.x) - base_angle;
        while ang < T::zero() {
            ang += two_pi;
        }
        while ang >= two_pi {
            ang -= two_pi;
        }
        let ti = ((ang / two_pi) * T::from_usize(n_theta).unwrap())
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(n_theta - 1);
        bins[ri * n_theta + ti] += 1;
    }
    ShapeContextHistogram { bins, n_r, n_theta }
}

/// Log-polar shape context of point `i`. Every other point lands in exactly
/// one bin, so the histogram total is always len-1.
pub fn shape_context<T: Real>(
    points: &[Point2<T>],
    closed: bool,
    i: usize,
    n_r: usize,
    n_theta: usize,
) -> ShapeContextHistogram {
    shape_context_with(points, closed, i, n_r, n_theta, mean_pairwise_distance(points))
}

/// Chi-squared histogram cost: half the sum of squared differences over the
/// sums, skipping empty bin pairs.
pub fn chi2_cost<T: Real>(h: &ShapeContextHistogram, g: &ShapeContextHistogram) -> Result<T> {
    if h.bins.len() != g.bins.len() {
        return Err(Error::DimensionMismatch(format!(
            "histogram sizes {} vs {}",
            h.bins.len(),
            g.bins.len()
        )));
    }
    let mut acc = T::zero();
    for (&a, &b) in h.bins.iter().zip(&g.bins) {
        let s = a + b;
        if s == 0 {
            continue;
        }
        let d = T::from_u32(a).unwrap() - T::from_u32(b).unwrap();
        acc += d * d / T::from_u32(s).unwrap();
    }
    Ok(acc / T::c(2.0))
}

// ===== StringCut =====

/// StringCut features of the `window`-point neighbourhood centered at `i`.
/// `on_line_tol` is the absolute perpendicular distance below which a point
/// counts as lying on the chord.
pub fn stringcut<T: Real>(
    points: &[Point2<T>],
    closed: bool,
    i: usize,
    window: usize,
    on_line_tol: T,
) -> Result<StringCutFeatures<T>> {
    if window < 4 {
        return Err(Error::InvalidWindow(format!("stringcut window {window} < 4")));
    }
    let w = window | 1;
    if closed && w >= points.len() {
        return Err(Error::InvalidWindow(format!(
            "stringcut window {w} covers the whole closed curve of {} points",
            points.len()
        )));
    }
    let hood = gather_window(points, closed, i, w / 2);
    let a = hood[0];
    let b = hood[w - 1];
    let chord = a.distance(b);
    if chord <= T::zero() {
        return Err(Error::DegenerateFit("coincident stringcut window endpoints".into()));
    }
    let dir = b - a;

    let mut sum_above = T::zero();
    let mut n_above = 0usize;
    let mut sum_below = T::zero();
    let mut n_below = 0usize;
    let mut on_line = 0usize;
    let mut arc = T::zero();
    for (k, p) in hood.iter().enumerate() {
        if k > 0 {
            arc += hood[k - 1].distance(*p);
        }
        let h = dir.cross(*p - a) / chord;
        if h > on_line_tol {
            sum_above += h;
            n_above += 1;
        } else if h < -on_line_tol {
            sum_below += -h;
            n_below += 1;
        } else {
            on_line += 1;
        }
    }
    let mean_above = if n_above > 0 {
        sum_above / T::from_usize(n_above).unwrap()
    } else {
        T::zero()
    };
    let mean_below = if n_below > 0 {
        sum_below / T::from_usize(n_below).unwrap()
    } else {
        T::zero()
    };
    Ok(StringCutFeatures {
        f_below: mean_above.max(mean_below),
        f_upper: mean_above.min(mean_below),
        f_on_line: on_line,
        f_bending: arc / chord,
    })
}

// ===== bundles and energy =====

/// Build the four adjacency matrices of one curve (resampled to the energy
/// resolution beforehand).
pub fn build_bundle<T: Real, C: Curve<T>>(curve: &C, cfg: &BundleConfig<T>) -> Result<AdjacencyBundle<T>> {
    let points = curve.points();
    let closed = curve.is_closed();
    let n = points.len();

    let prof = curvature_profile(curve, cfg.local_window);
    let abs_diff_matrix = |vals: &[T]| {
        Array2::from_shape_fn((n, n), |(i, j)| (vals[i] - vals[j]).abs())
    };
    let a_local = abs_diff_matrix(&prof.local);
    let a_global = abs_diff_matrix(&prof.global);

    let mean_dist = mean_pairwise_distance(points);
    let contexts: Vec<ShapeContextHistogram> = (0..n)
        .map(|i| shape_context_with(points, closed, i, cfg.n_r, cfg.n_theta, mean_dist))
        .collect();
    let mut a_angular = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let c = chi2_cost(&contexts[i], &contexts[j])?;
            a_angular[(i, j)] = c;
            a_angular[(j, i)] = c;
        }
    }

    let tol = cfg.on_line_tol * curve.total_length();
    let feats: Vec<[T; 4]> = (0..n)
        .map(|i| {
            let f = stringcut(points, closed, i, cfg.stringcut_window, tol)?;
            Ok([
                f.f_below,
                f.f_upper,
                T::from_usize(f.f_on_line).unwrap(),
                f.f_bending,
            ])
        })
        .collect::<Result<_>>()?;
    // standardize each feature over the curve so the L1 mix is unitless
    let mut zs = vec![[T::zero(); 4]; n];
    for k in 0..4 {
        let mean = feats.iter().map(|f| f[k]).sum::<T>() / T::from_usize(n).unwrap();
        let var = feats
            .iter()
            .map(|f| (f[k] - mean) * (f[k] - mean))
            .sum::<T>()
            / T::from_usize(n).unwrap();
        let sd = var.sqrt();
        if sd > T::zero() {
            for (z, f) in zs.iter_mut().zip(&feats) {
                z[k] = (f[k] - mean) / sd;
            }
        }
    }
    let a_stringcut = Array2::from_shape_fn((n, n), |(i, j)| {
        (0..4).map(|k| (zs[i][k] - zs[j][k]).abs()).sum()
    });

    Ok(AdjacencyBundle {
        a_local,
        a_global,
        a_angular,
        a_stringcut,
    })
}

/// Weighted QAP energy of an assignment: sum_k w_k ||A_k - X B_k X^T||_F^2.
/// `x` may be a relaxed (row-stochastic) matrix or a partial permutation.
pub fn matching_energy<T: Real>(
    bundle_p: &AdjacencyBundle<T>,
    bundle_q: &AdjacencyBundle<T>,
    x: &Array2<T>,
    weights: &EnergyWeights<T>,
) -> Result<T> {
    let m = bundle_p.n();
    let n = bundle_q.n();
    if x.nrows() != m || x.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "assignment is {}x{}, bundles are {m} and {n}",
            x.nrows(),
            x.ncols()
        )));
    }
    weights.validate()?;
    let mut acc = T::zero();
    for (w, (a, b)) in weights
        .as_array()
        .into_iter()
        .zip(bundle_p.matrices().into_iter().zip(bundle_q.matrices()))
    {
        let proj = x.dot(b).dot(&x.t());
        let mut term = T::zero();
        for (pa, pb) in a.iter().zip(proj.iter()) {
            let d = *pa - *pb;
            term += d * d;
        }
        acc += w * term;
    }
    Ok(acc)
}
