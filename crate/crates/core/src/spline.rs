//! Beta-spline contour representation: a B-spline generalization with a
//! tension parameter. Tension 0 recovers the cubic B-spline; large tension
//! pulls the curve toward the control points, which is what lets contour
//! points double as control points without solving for phantom points.

use crate::error::{Error, Result};
use crate::geometry::{resample_points, Point2};
use crate::scalar::Real;

/// Blending parameters. Skew is pinned to 1: other values can introduce
/// discontinuities and break the symmetry and partition-of-unity properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineConfig<T = f64> {
    tension: T,
    /// Target point count for [`sample_spline`].
    pub samples: usize,
}

impl<T: Real> SplineConfig<T> {
    pub fn new(tension: T, samples: usize) -> Result<Self> {
        if !(tension >= T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tension {tension} must be >= 0"
            )));
        }
        Ok(SplineConfig { tension, samples })
    }

    pub fn tension(&self) -> T {
        self.tension
    }

    /// Skew parameter; fixed at 1.
    pub fn skew(&self) -> T {
        T::one()
    }
}

impl<T: Real> Default for SplineConfig<T> {
    fn default() -> Self {
        SplineConfig {
            tension: T::c(10.0),
            samples: 1000,
        }
    }
}

/// A beta-spline over a control polygon (the contour points themselves).
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCurve<T = f64> {
    pub control_points: Vec<Point2<T>>,
    pub config: SplineConfig<T>,
    pub closed: bool,
}

impl<T: Real> SplineCurve<T> {
    pub fn new(control_points: Vec<Point2<T>>, config: SplineConfig<T>, closed: bool) -> Result<Self> {
        if control_points.len() < 4 {
            return Err(Error::DegenerateCurve(format!(
                "spline needs at least 4 control points, got {}",
                control_points.len()
            )));
        }
        Ok(SplineCurve {
            control_points,
            config,
            closed,
        })
    }
}

/// The beta-spline blending function: a piecewise cubic bell supported on
/// (-2, 2), symmetric when skew = 1. With tension 0 and skew 1 it is the
/// cubic B-spline basis.
pub fn beta_blend<T: Real>(tau: T, tension: T, skew: T) -> T {
    let (t, s) = (tension, skew);
    let two = T::c(2.0);
    let delta = t + two * s * s * s + T::c(4.0) * s * s + T::c(4.0) * s + two;
    if tau <= -two || tau >= two {
        T::zero()
    } else if tau <= -T::one() {
        two / delta * (two + tau).powi(3)
    } else if tau <= T::zero() {
        ((t + T::c(4.0) * s + T::c(4.0) * s * s)
            - T::c(6.0) * (T::one() - s * s) * tau
            - T::c(3.0) * tau * tau * (two + t + two * s)
            - two * tau.powi(3) * (T::one() + t + s + s * s))
            / delta
    } else if tau <= T::one() {
        ((t + T::c(4.0) * s + T::c(4.0) * s * s)
            - T::c(6.0) * tau * (s - s * s * s)
            - T::c(3.0) * tau * tau * (t + two * s * s + two * s * s * s)
            + two * tau.powi(3) * (t + s + s * s + s * s * s))
            / delta
    } else {
        two / delta * s * s * s * (two - tau).powi(3)
    }
}

/// Evaluate the spline at parameter u in [0, 1].
///
/// At most four control points have non-zero blending weight; the index loop
/// touches the boundary zero-weight terms too, which contribute nothing.
/// Closed curves index control points modulo the count, open curves clamp.
pub fn eval_spline<T: Real>(curve: &SplineCurve<T>, u: T) -> Point2<T> {
    let pts = &curve.control_points;
    let count = pts.len();
    // closed splines are periodic over all `count` points; open splines span
    // count-1 intervals so the curve reaches toward both end control points
    let n = if curve.closed { count } else { count - 1 };
    let x = T::from_usize(n).unwrap() * u;
    let lo = (x - T::c(2.0)).floor().to_isize().unwrap();
    let hi = (x + T::c(2.0)).ceil().to_isize().unwrap();
    let mut acc = Point2::new(T::zero(), T::zero());
    for i in lo..=hi {
        let w = beta_blend(x - T::from_isize(i).unwrap(), curve.config.tension(), T::one());
        if w == T::zero() {
            continue;
        }
        let idx = if curve.closed {
            i.rem_euclid(count as isize) as usize
        } else {
            i.clamp(0, (count - 1) as isize) as usize
        };
        acc = acc + pts[idx] * w;
    }
    acc
}

/// Evaluate densely (at least 8n parameter samples) and resample the result
/// to `n` points equally spaced in arc length.
pub fn sample_spline<T: Real>(curve: &SplineCurve<T>, n: usize) -> Result<Vec<Point2<T>>> {
    if n < 4 {
        return Err(Error::InvalidParameter(format!("sample count {n} < 4")));
    }
    let dense_n = (8 * n).max(8 * curve.control_points.len());
    let dense: Vec<Point2<T>> = if curve.closed {
        (0..dense_n)
            .map(|k| {
                eval_spline(
                    curve,
                    T::from_usize(k).unwrap() / T::from_usize(dense_n).unwrap(),
                )
            })
            .collect()
    } else {
        (0..dense_n)
            .map(|k| {
                eval_spline(
                    curve,
                    T::from_usize(k).unwrap() / T::from_usize(dense_n - 1).unwrap(),
                )
            })
            .collect()
    };
    // drop consecutive duplicates the dense evaluation may produce on
    // degenerate control polygons
    let mut cleaned: Vec<Point2<T>> = Vec::with_capacity(dense.len());
    for p in dense {
        if cleaned.last().map_or(true, |q| *q != p) {
            cleaned.push(p);
        }
    }
    resample_points(&cleaned, curve.closed, n)
}
