//! Affine recovery between matched curves, curve overlay, and the discrete
//! Frechet distance used to prune candidates cheaply before the expensive
//! energy stage.

use crate::error::{Error, Result};
use crate::geometry::{Curve, Point2};
use crate::scalar::Real;
use crate::util::solve_small;

/// A plane affine map p -> A p + t. The solver permits shear and reflection;
/// accepted fits have nonzero determinant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTransform<T = f64> {
    /// Row-major 2x2 linear part.
    pub a: [[T; 2]; 2],
    pub t_vec: [T; 2],
    /// RMS of the fit residuals (zero for exactly constructed transforms).
    pub residual_rms: T,
}

impl<T: Real> AffineTransform<T> {
    pub fn identity() -> Self {
        AffineTransform {
            a: [[T::one(), T::zero()], [T::zero(), T::one()]],
            t_vec: [T::zero(), T::zero()],
            residual_rms: T::zero(),
        }
    }

    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(
            self.a[0][0] * p.x + self.a[0][1] * p.y + self.t_vec[0],
            self.a[1][0] * p.x + self.a[1][1] * p.y + self.t_vec[1],
        )
    }

    pub fn det(&self) -> T {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if d.abs() <= T::epsilon() * T::c(1e3) {
            return Err(Error::SingularTransform);
        }
        let inv = [
            [self.a[1][1] / d, -self.a[0][1] / d],
            [-self.a[1][0] / d, self.a[0][0] / d],
        ];
        let tx = -(inv[0][0] * self.t_vec[0] + inv[0][1] * self.t_vec[1]);
        let ty = -(inv[1][0] * self.t_vec[0] + inv[1][1] * self.t_vec[1]);
        Ok(AffineTransform {
            a: inv,
            t_vec: [tx, ty],
            residual_rms: T::zero(),
        })
    }

    /// The similarity (rotation + scale, optionally reflected) mapping the
    /// pair (s1, s2) onto (d1, d2). Fallback when fewer than 3 usable
    /// correspondences exist.
    pub fn similarity_from_pairs(
        s1: Point2<T>,
        s2: Point2<T>,
        d1: Point2<T>,
        d2: Point2<T>,
        reflect: bool,
    ) -> Result<Self> {
        let u = s2 - s1;
        let v = d2 - d1;
        let den = u.x * u.x + u.y * u.y;
        if den == T::zero() {
            return Err(Error::DegenerateFit("coincident source pair".into()));
        }
        let a;
        if !reflect {
            let c = Point2::new((v.x * u.x + v.y * u.y) / den, (v.y * u.x - v.x * u.y) / den);
            a = [[c.x, -c.y], [c.y, c.x]];
        } else {
            let c = Point2::new((v.x * u.x - v.y * u.y) / den, (v.y * u.x + v.x * u.y) / den);
            a = [[c.x, c.y], [c.y, -c.x]];
        }
        let mut out = AffineTransform {
            a,
            t_vec: [T::zero(), T::zero()],
            residual_rms: T::zero(),
        };
        let img = out.apply(s1);
        out.t_vec = [d1.x - img.x, d1.y - img.y];
        Ok(out)
    }
}

/// Least-squares affine fit: minimizes sum ||dst_i - A src_i - t||^2 in
/// closed form via the normal equations.
pub fn fit_affine<T: Real>(src: &[Point2<T>], dst: &[Point2<T>]) -> Result<AffineTransform<T>> {
    if src.len() != dst.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} source vs {} destination correspondences",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "affine fit needs >= 3 correspondences, got {}",
            src.len()
        )));
    }
    let n = T::from_usize(src.len()).unwrap();
    let mut smean = Point2::new(T::zero(), T::zero());
    let mut dmean = Point2::new(T::zero(), T::zero());
    for (s, d) in src.iter().zip(dst) {
        smean = smean + *s;
        dmean = dmean + *d;
    }
    smean = smean * (T::one() / n);
    dmean = dmean * (T::one() / n);

    // centered normal equations, one 3-var solve per output coordinate
    let mut m = [[T::zero(); 3]; 3];
    let mut rx = [T::zero(); 3];
    let mut ry = [T::zero(); 3];
    for (s, d) in src.iter().zip(dst) {
        let phi = [s.x - smean.x, s.y - smean.y, T::one()];
        let dc = *d - dmean;
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += phi[i] * phi[j];
            }
            rx[i] += dc.x * phi[i];
            ry[i] += dc.y * phi[i];
        }
    }
    let row_x = solve_small(&mut m.map(|r| r.to_vec()), &mut rx.to_vec())
        .ok_or_else(|| Error::DegenerateFit("collinear correspondences".into()))?;
    let row_y = solve_small(&mut m.map(|r| r.to_vec()), &mut ry.to_vec())
        .ok_or_else(|| Error::DegenerateFit("collinear correspondences".into()))?;

    let a = [[row_x[0], row_x[1]], [row_y[0], row_y[1]]];
    let tx = dmean.x + row_x[2] - (a[0][0] * smean.x + a[0][1] * smean.y);
    let ty = dmean.y + row_y[2] - (a[1][0] * smean.x + a[1][1] * smean.y);
    let mut xf = AffineTransform {
        a,
        t_vec: [tx, ty],
        residual_rms: T::zero(),
    };
    if xf.det().abs() <= T::epsilon() * T::c(1e3) {
        return Err(Error::DegenerateFit("degenerate linear part".into()));
    }
    let ss: T = src
        .iter()
        .zip(dst)
        .map(|(s, d)| {
            let r = xf.apply(*s).distance(*d);
            r * r
        })
        .sum();
    xf.residual_rms = (ss / n).sqrt();
    Ok(xf)
}

/// Apply the transform (or its inverse) to every point of a curve. Purely
/// global: no local deformation.
pub fn overlay<T: Real, C: Curve<T>>(curve: &C, xf: &AffineTransform<T>, invert: bool) -> Result<C> {
    let xf = if invert { xf.inverse()? } else { *xf };
    C::try_from_points(curve.points().iter().map(|p| xf.apply(*p)).collect())
}

/// Discrete Frechet distance and the DP table dimensions it was computed on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetResult<T = f64> {
    pub distance: T,
    pub table_dims: (usize, usize),
}

/// Discrete Frechet distance between two point sequences: the classic
/// dynamic program d[i][j] = max(|p_i - q_j|, min(d[i-1][j], d[i][j-1],
/// d[i-1][j-1])) with a rolling row.
pub fn frechet_distance<T: Real>(p: &[Point2<T>], q: &[Point2<T>]) -> Result<FrechetResult<T>> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyInput("frechet distance of empty sequence".into()));
    }
    let n = q.len();
    let mut prev = vec![T::zero(); n];
    let mut row = vec![T::zero(); n];
    for (i, pi) in p.iter().enumerate() {
        for (j, qj) in q.iter().enumerate() {
            let d = pi.distance(*qj);
            let reach = match (i, j) {
                (0, 0) => d,
                (0, _) => row[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(row[j - 1]).min(prev[j - 1]).max(d),
            };
            row[j] = reach;
        }
        std::mem::swap(&mut prev, &mut row);
    }
    Ok(FrechetResult {
        distance: prev[n - 1],
        table_dims: (p.len(), n),
    })
}
