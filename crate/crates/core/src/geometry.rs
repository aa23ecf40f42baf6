//! Core curve types and the windowed operators everything else builds on:
//! arc-length resampling, Savitzky-Golay smoothing, curvature estimation,
//! geodesic lengths and the occlusion generator.
//!
//! Closed contours are counter-clockwise; windowed operators wrap on closed
//! curves and use endpoint reflection on open ones (Savitzky-Golay boundary
//! windows are fit-and-evaluate so polynomials survive the ends intact).

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::util::solve_small;

/// Perimeter every contour is scaled to on ingestion. Downstream length
/// thresholds (outlier penalty, nearest-neighbour rejection) assume this scale.
pub const NORMALIZED_PERIMETER: f64 = 1000.0;

// ===== points =====

/// A 2D point in contour units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, rhs: Self) -> T {
        self.x * rhs.x + self.y * rhs.y
    }

    /// z-component of the cross product.
    pub fn cross(self, rhs: Self) -> T {
        self.x * rhs.y - self.y * rhs.x
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn distance(self, rhs: Self) -> T {
        (rhs - self).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> Add for Point2<T> {
    type Output = Point2<T>;
    fn add(self, rhs: Self) -> Point2<T> {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Real> Sub for Point2<T> {
    type Output = Point2<T>;
    fn sub(self, rhs: Self) -> Point2<T> {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Real> Mul<T> for Point2<T> {
    type Output = Point2<T>;
    fn mul(self, s: T) -> Point2<T> {
        Point2::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Neg for Point2<T> {
    type Output = Point2<T>;
    fn neg(self) -> Point2<T> {
        Point2::new(-self.x, -self.y)
    }
}

// ===== curves =====

/// Common access for closed contours and open curves.
pub trait Curve<T: Real>: Sized {
    fn points(&self) -> &[Point2<T>];
    fn is_closed(&self) -> bool;
    /// Rebuild the same kind of curve from new points, re-validating.
    fn try_from_points(points: Vec<Point2<T>>) -> Result<Self>;

    fn len(&self) -> usize {
        self.points().len()
    }

    fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    fn total_length(&self) -> T {
        polyline_length(self.points(), self.is_closed())
    }
}

/// A closed counter-clockwise contour.
///
/// Validated on construction: at least 3 points, all finite, no two
/// consecutive points identical (including the wrap pair) and positive signed
/// area. The pipeline additionally requires 8+ points at ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour<T = f64> {
    points: Vec<Point2<T>>,
}

impl<T: Real> Contour<T> {
    pub fn new(points: Vec<Point2<T>>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::DegenerateCurve(format!(
                "contour needs at least 3 points, got {}",
                points.len()
            )));
        }
        validate_points(&points, true)?;
        if signed_area(&points) <= T::zero() {
            return Err(Error::DegenerateCurve(
                "contour must be counter-clockwise (signed area > 0)".into(),
            ));
        }
        Ok(Contour { points })
    }

    pub fn into_points(self) -> Vec<Point2<T>> {
        self.points
    }

    /// Area centroid of the enclosed polygon.
    pub fn centroid(&self) -> Point2<T> {
        let pts = &self.points;
        let mut area2 = T::zero();
        let mut cx = T::zero();
        let mut cy = T::zero();
        for i in 0..pts.len() {
            let a = pts[i];
            let b = pts[(i + 1) % pts.len()];
            let w = a.cross(b);
            area2 += w;
            cx += (a.x + b.x) * w;
            cy += (a.y + b.y) * w;
        }
        let three = T::c(3.0);
        Point2::new(cx / (three * area2), cy / (three * area2))
    }
}

impl<T: Real> Curve<T> for Contour<T> {
    fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    fn is_closed(&self) -> bool {
        true
    }

    fn try_from_points(points: Vec<Point2<T>>) -> Result<Self> {
        Contour::new(points)
    }
}

/// An open curve, e.g. the visible part of an occluded contour.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenCurve<T = f64> {
    points: Vec<Point2<T>>,
}

impl<T: Real> OpenCurve<T> {
    pub fn new(points: Vec<Point2<T>>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::DegenerateCurve(format!(
                "open curve needs at least 4 points, got {}",
                points.len()
            )));
        }
        validate_points(&points, false)?;
        if points[0] == points[points.len() - 1] {
            return Err(Error::DegenerateCurve("open curve endpoints coincide".into()));
        }
        Ok(OpenCurve { points })
    }

    pub fn into_points(self) -> Vec<Point2<T>> {
        self.points
    }
}

impl<T: Real> Curve<T> for OpenCurve<T> {
    fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    fn is_closed(&self) -> bool {
        false
    }

    fn try_from_points(points: Vec<Point2<T>>) -> Result<Self> {
        OpenCurve::new(points)
    }
}

fn validate_points<T: Real>(points: &[Point2<T>], closed: bool) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::DegenerateCurve(format!("non-finite point at index {i}")));
        }
    }
    let pairs = if closed { points.len() } else { points.len() - 1 };
    for i in 0..pairs {
        let a = points[i];
        let b = points[(i + 1) % points.len()];
        if a == b {
            return Err(Error::DegenerateCurve(format!(
                "consecutive identical points at index {i}"
            )));
        }
    }
    Ok(())
}

/// Twice-signed-area shoelace sum, halved. Positive for counter-clockwise.
pub fn signed_area<T: Real>(points: &[Point2<T>]) -> T {
    let mut acc = T::zero();
    for i in 0..points.len() {
        acc += points[i].cross(points[(i + 1) % points.len()]);
    }
    acc / T::c(2.0)
}

/// Polyline length; includes the closing edge when `closed`.
pub fn polyline_length<T: Real>(points: &[Point2<T>], closed: bool) -> T {
    let mut acc = T::zero();
    let edges = if closed { points.len() } else { points.len() - 1 };
    for i in 0..edges {
        acc += points[i].distance(points[(i + 1) % points.len()]);
    }
    acc
}

/// cum[i] = arc length from point 0 to point i (cum[0] = 0).
pub fn cumulative_lengths<T: Real>(points: &[Point2<T>]) -> Vec<T> {
    let mut cum = Vec::with_capacity(points.len());
    let mut acc = T::zero();
    cum.push(acc);
    for i in 1..points.len() {
        acc += points[i - 1].distance(points[i]);
        cum.push(acc);
    }
    cum
}

/// Per-point curvature magnitudes at two scales.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile<T = f64> {
    /// Small-window curvature, 1/length units.
    pub local: Vec<T>,
    /// Curvature after heavy smoothing with a window of a third of the curve.
    pub global: Vec<T>,
}

// ===== resampling =====

/// Resample a curve to `n` points equally spaced in arc length.
///
/// Output points lie on the input polyline. Open curves keep their endpoints;
/// closed curves keep point 0 as the resampling origin.
pub fn resample_uniform<T: Real, C: Curve<T>>(curve: &C, n: usize) -> Result<C> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("resample target n={n} < 4")));
    }
    let pts = resample_points(curve.points(), curve.is_closed(), n)?;
    C::try_from_points(pts)
}

pub(crate) fn resample_points<T: Real>(
    points: &[Point2<T>],
    closed: bool,
    n: usize,
) -> Result<Vec<Point2<T>>> {
    let total = polyline_length(points, closed);
    if !(total > T::zero()) {
        return Err(Error::DegenerateCurve("zero total length".into()));
    }
    let m = points.len();
    let edges = if closed { m } else { m - 1 };
    let nt = T::from_usize(n).unwrap();
    let step = if closed {
        total / nt
    } else {
        total / (nt - T::one())
    };

    let mut out = Vec::with_capacity(n);
    let mut edge = 0usize; // current edge index
    let mut edge_start = T::zero(); // arc position of edge start
    let mut edge_len = points[0].distance(points[1 % m]);
    for k in 0..n {
        let target = step * T::from_usize(k).unwrap();
        // advance to the edge containing `target`
        while edge + 1 < edges && edge_start + edge_len < target {
            edge_start += edge_len;
            edge += 1;
            edge_len = points[edge].distance(points[(edge + 1) % m]);
        }
        let t = if edge_len > T::zero() {
            ((target - edge_start) / edge_len).min(T::one()).max(T::zero())
        } else {
            T::zero()
        };
        let a = points[edge];
        let b = points[(edge + 1) % m];
        out.push(a + (b - a) * t);
    }
    if !closed {
        // guard the far endpoint against accumulated rounding
        *out.last_mut().unwrap() = points[m - 1];
    }
    Ok(out)
}

// ===== Savitzky-Golay smoothing =====

/// Second-order Savitzky-Golay smoothing of both coordinates.
///
/// `window` is the full window size (odd, 5 ≤ window ≤ len/4). Closed curves
/// wrap around; open curves use boundary windows with the quadratic fit
/// evaluated at the point's own offset, so any curve whose coordinates are
/// quadratic in the point index is reproduced exactly.
pub fn savgol_smooth<T: Real, C: Curve<T>>(curve: &C, window: usize) -> Result<C> {
    let len = curve.len();
    if window % 2 == 0 || window < 5 {
        return Err(Error::InvalidWindow(format!("window {window} must be odd and >= 5")));
    }
    if window > len / 4 {
        return Err(Error::InvalidWindow(format!(
            "window {window} too large for {len} points (max len/4)"
        )));
    }
    let pts = savgol_points(curve.points(), curve.is_closed(), window);
    C::try_from_points(pts)
}

/// Smoothing kernel without the public window cap; the global-curvature path
/// smooths with a window of len/3.
pub(crate) fn savgol_points<T: Real>(
    points: &[Point2<T>],
    closed: bool,
    window: usize,
) -> Vec<Point2<T>> {
    let len = points.len();
    let w = window.min(if closed { len - 1 } else { len }) | 1;
    let half = w / 2;
    let center = savgol_weights::<T>(w, half);
    let mut out = Vec::with_capacity(len);

    if closed {
        for i in 0..len {
            let mut acc = Point2::new(T::zero(), T::zero());
            for (j, &wj) in center.iter().enumerate() {
                let idx = (i + len + j - half) % len;
                acc = acc + points[idx] * wj;
            }
            out.push(acc);
        }
    } else {
        for i in 0..len {
            // boundary windows slide to stay inside the curve; the fit is
            // evaluated at the point's offset within the window
            let (start, eval) = if i < half {
                (0, i)
            } else if i + half >= len {
                (len - w, i - (len - w))
            } else {
                (i - half, half)
            };
            let boundary;
            let weights = if eval == half {
                &center
            } else {
                boundary = savgol_weights::<T>(w, eval);
                &boundary
            };
            let mut acc = Point2::new(T::zero(), T::zero());
            for (j, &wj) in weights.iter().enumerate() {
                acc = acc + points[start + j] * wj;
            }
            out.push(acc);
        }
    }
    out
}

/// Weights h such that sum h_j y_j is the least-squares quadratic fit of y
/// over the window, evaluated at offset `eval_at`.
fn savgol_weights<T: Real>(window: usize, eval_at: usize) -> Vec<T> {
    let mid = T::from_usize(window - 1).unwrap() / T::c(2.0);
    let t = |j: usize| T::from_usize(j).unwrap() - mid;
    // normal matrix of the centered Vandermonde [1, t, t^2]
    let mut m = [[T::zero(); 3]; 3];
    for j in 0..window {
        let tj = t(j);
        let row = [T::one(), tj, tj * tj];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += row[a] * row[b];
            }
        }
    }
    let te = t(eval_at);
    let rhs = [T::one(), te, te * te];
    let coef = solve_small(&mut m.map(|r| r.to_vec()), &mut rhs.to_vec())
        .expect("savgol normal matrix is nonsingular for window >= 3");
    (0..window)
        .map(|j| {
            let tj = t(j);
            coef[0] + coef[1] * tj + coef[2] * tj * tj
        })
        .collect()
}

// ===== curvature =====

/// Curvature magnitude at point `i` from a local circle fit over the window
/// (window/2 neighbours each side; wrap on closed curves, point reflection at
/// open ends). Exact on circular arcs of any window size; 0 for degenerate
/// (collinear) windows.
pub fn local_curvature<T: Real, C: Curve<T>>(curve: &C, i: usize, window: usize) -> T {
    let half = window.max(5) / 2;
    let pts = gather_window(curve.points(), curve.is_closed(), i, half);
    circle_fit_curvature(&pts)
}

/// Curvature at the global scale: the curve is first smoothed with a window
/// of a third of its length, then fit with the same-sized window.
pub fn global_curvature<T: Real, C: Curve<T>>(curve: &C, i: usize) -> T {
    let len = curve.len();
    let w = (len / 3).max(5) | 1;
    let smoothed = savgol_points(curve.points(), curve.is_closed(), w);
    let pts = gather_window(&smoothed, curve.is_closed(), i, w / 2);
    circle_fit_curvature(&pts)
}

/// Local and global curvature for every point, sharing the smoothing pass.
pub fn curvature_profile<T: Real, C: Curve<T>>(curve: &C, local_window: usize) -> CurvatureProfile<T> {
    let len = curve.len();
    let closed = curve.is_closed();
    let local_half = local_window.max(5) / 2;
    let local = (0..len)
        .map(|i| circle_fit_curvature(&gather_window(curve.points(), closed, i, local_half)))
        .collect();
    let w = (len / 3).max(5) | 1;
    let smoothed = savgol_points(curve.points(), closed, w);
    let global = (0..len)
        .map(|i| circle_fit_curvature(&gather_window(&smoothed, closed, i, w / 2)))
        .collect();
    CurvatureProfile { local, global }
}

/// Window of points centered at `i`, wrapping on closed curves and using
/// point reflection (2*p_end - p) past open ends.
pub(crate) fn gather_window<T: Real>(
    points: &[Point2<T>],
    closed: bool,
    i: usize,
    half: usize,
) -> Vec<Point2<T>> {
    let len = points.len() as isize;
    let c = i as isize;
    (-(half as isize)..=half as isize)
        .map(|off| reflect_index_point(points, closed, c + off, len))
        .collect()
}

fn reflect_index_point<T: Real>(
    points: &[Point2<T>],
    closed: bool,
    idx: isize,
    len: isize,
) -> Point2<T> {
    if closed {
        return points[idx.rem_euclid(len) as usize];
    }
    if idx < 0 {
        let j = (-idx).min(len - 1) as usize;
        points[0] * T::c(2.0) - points[j]
    } else if idx >= len {
        let j = (2 * (len - 1) - idx).max(0) as usize;
        points[(len - 1) as usize] * T::c(2.0) - points[j]
    } else {
        points[idx as usize]
    }
}

/// Algebraic (Kasa) circle fit; returns 1/R, or 0 when the window is
/// degenerate.
fn circle_fit_curvature<T: Real>(pts: &[Point2<T>]) -> T {
    let n = T::from_usize(pts.len()).unwrap();
    if pts.len() < 3 {
        return T::zero();
    }
    let mut mean = Point2::<T>::new(T::zero(), T::zero());
    for p in pts {
        mean = mean + *p;
    }
    mean = mean * (T::one() / n);

    let (mut suu, mut suv, mut svv) = (T::zero(), T::zero(), T::zero());
    let (mut suuu, mut suvv, mut svuu, mut svvv) = (T::zero(), T::zero(), T::zero(), T::zero());
    for p in pts {
        let u = p.x - mean.x;
        let v = p.y - mean.y;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suuu += u * u * u;
        suvv += u * v * v;
        svuu += v * u * u;
        svvv += v * v * v;
    }
    let det = suu * svv - suv * suv;
    let scale = suu + svv;
    if det <= scale * scale * T::epsilon() * T::c(1e4) {
        return T::zero();
    }
    let bx = (suuu + suvv) / T::c(2.0);
    let by = (svuu + svvv) / T::c(2.0);
    let uc = (bx * svv - by * suv) / det;
    let vc = (by * suu - bx * suv) / det;
    let r2 = uc * uc + vc * vc + scale / n;
    if r2 <= T::zero() {
        return T::zero();
    }
    T::one() / r2.sqrt()
}

// ===== geodesic length =====

/// Arc length along the curve from point `i` to point `j`.
///
/// Closed curves take the counter-clockwise arc (wrapping); open curves
/// require i <= j.
pub fn geodesic_length<T: Real, C: Curve<T>>(curve: &C, i: usize, j: usize) -> Result<T> {
    let len = curve.len();
    if i >= len {
        return Err(Error::IndexOutOfRange { index: i, len });
    }
    if j >= len {
        return Err(Error::IndexOutOfRange { index: j, len });
    }
    let cum = cumulative_lengths(curve.points());
    if curve.is_closed() {
        if j >= i {
            Ok(cum[j] - cum[i])
        } else {
            Ok(curve.total_length() - (cum[i] - cum[j]))
        }
    } else {
        if i > j {
            return Err(Error::InvalidParameter(format!(
                "open curve geodesic needs i <= j, got {i} > {j}"
            )));
        }
        Ok(cum[j] - cum[i])
    }
}

// ===== normalization =====

/// Canonicalize a contour: area centroid at the origin, perimeter scaled to
/// [`NORMALIZED_PERIMETER`].
pub fn normalize<T: Real>(contour: &Contour<T>) -> Contour<T> {
    let c = contour.centroid();
    let scale = T::c(NORMALIZED_PERIMETER) / contour.total_length();
    let pts = contour
        .points()
        .iter()
        .map(|p| (*p - c) * scale)
        .collect();
    Contour::new(pts).expect("normalization preserves contour validity")
}

// ===== occlusion =====

/// Remove a contiguous arc of `fraction` of the perimeter, starting at a
/// seed-determined random point. The survivors form the open curve, ordered
/// counter-clockwise from just after the removed arc. `fraction` may range up
/// to 0.95 for stress tests; 0 yields the full point sequence minus the
/// closing edge.
pub fn occlude<T: Real>(contour: &Contour<T>, fraction: f64, seed: u64) -> Result<OpenCurve<T>> {
    if !(0.0..=0.95).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "occlusion fraction {fraction} outside [0, 0.95]"
        )));
    }
    let pts = contour.points();
    let n = pts.len();
    if fraction == 0.0 {
        return OpenCurve::new(pts.to_vec());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.gen_range(0..n);
    let target = contour.total_length() * T::c(fraction);

    // remove points whose ccw arc distance from `start` is below `target`
    let mut removed = 1usize;
    let mut arc = T::zero();
    while removed < n {
        let a = pts[(start + removed - 1) % n];
        let b = pts[(start + removed) % n];
        arc += a.distance(b);
        if arc >= target {
            break;
        }
        removed += 1;
    }
    if n - removed < 4 {
        return Err(Error::DegenerateCurve(format!(
            "occlusion at {fraction} leaves only {} points",
            n - removed
        )));
    }
    let survivors = (0..n - removed)
        .map(|k| pts[(start + removed + k) % n])
        .collect();
    OpenCurve::new(survivors)
}
