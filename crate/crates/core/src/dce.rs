//! Discrete contour evolution: iteratively delete the least relevant vertex
//! until a target count remains. The survivors are convexity-salient points
//! that become graph nodes, with pairwise along-curve distances as edges.

use crate::error::{Error, Result};
use crate::geometry::{cumulative_lengths, Curve, Point2};
use crate::scalar::Real;

/// DCE vertices of a curve plus their pairwise geodesic distances.
///
/// Node indices are strictly increasing along the source curve. The geodesic
/// matrix is measured on the original (pre-evolution) curve; on closed curves
/// each entry is the shorter of the two arcs, so the matrix is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGraph<T = f64> {
    /// (index into the source curve, position), in curve order.
    pub nodes: Vec<(usize, Point2<T>)>,
    /// Pairwise along-curve distances between nodes.
    pub geodesic: Vec<Vec<T>>,
    /// Point count of the curve the graph was extracted from.
    pub source_len: usize,
    /// Total length of the source curve.
    pub total_length: T,
    pub closed: bool,
}

impl<T: Real> FeatureGraph<T> {
    /// Assemble a graph from precomputed parts, checking the invariants.
    pub fn from_parts(
        nodes: Vec<(usize, Point2<T>)>,
        geodesic: Vec<Vec<T>>,
        source_len: usize,
        total_length: T,
        closed: bool,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::EmptyInput("feature graph with no nodes".into()));
        }
        if nodes.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter(
                "feature graph node indices must strictly increase".into(),
            ));
        }
        if geodesic.len() != n || geodesic.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "geodesic matrix must be {n}x{n}"
            )));
        }
        for i in 0..n {
            if geodesic[i][i] != T::zero() {
                return Err(Error::InvalidParameter("geodesic diagonal must be zero".into()));
            }
            for j in 0..n {
                let d = geodesic[i][j];
                if !(d >= T::zero()) || (d - geodesic[j][i]).abs() > T::c(1e-9) * total_length {
                    return Err(Error::InvalidParameter(
                        "geodesic matrix must be symmetric and nonnegative".into(),
                    ));
                }
            }
        }
        Ok(FeatureGraph {
            nodes,
            geodesic,
            source_len,
            total_length,
            closed,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Relevance of vertex `v` between its polygon neighbours:
/// turn_angle * l1 * l2 / (l1 + l2) with raw arm lengths.
///
/// Comparisons across curves should divide by total curve length; a right
/// angle with unit arms on a total-length-1 curve scores pi/4. The evolution
/// loop skips that normalization because it rescales every candidate of an
/// iteration equally.
pub fn dce_relevance<T: Real>(prev: Point2<T>, v: Point2<T>, next: Point2<T>) -> T {
    let a = v - prev;
    let b = next - v;
    let l1 = a.norm();
    let l2 = b.norm();
    if l1 + l2 <= T::zero() {
        return T::zero();
    }
    let theta = a.cross(b).abs().atan2(a.dot(b)).abs();
    theta * l1 * l2 / (l1 + l2)
}

/// Evolve the curve down to `k` vertices and return the feature graph.
///
/// Open-curve endpoints are never deleted. Relevance ties (within a relative
/// 1e-9) are broken toward the lowest curve index.
pub fn extract_features<T: Real, C: Curve<T>>(curve: &C, k: usize) -> Result<FeatureGraph<T>> {
    let pts = curve.points();
    let n = pts.len();
    let closed = curve.is_closed();
    let min_k = if closed { 3 } else { 2 };
    if k < min_k {
        return Err(Error::InvalidParameter(format!(
            "k={k} below minimum {min_k}"
        )));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "k={k} exceeds curve point count {n}"
        )));
    }

    // doubly linked list over live vertices
    let mut next: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
    let mut prev: Vec<usize> = (0..n).map(|i| (i + n - 1) % n).collect();
    let mut alive = vec![true; n];
    let mut relevance: Vec<T> = vec![T::zero(); n];
    let deletable = |i: usize| closed || (i != 0 && i != n - 1);
    for i in 0..n {
        if deletable(i) {
            relevance[i] = dce_relevance(pts[prev[i]], pts[i], pts[next[i]]);
        }
    }

    let mut live = n;
    while live > k {
        // minimum relevance among deletable vertices, ties to lowest index
        let mut best = usize::MAX;
        let mut best_rel = T::infinity();
        for i in 0..n {
            if alive[i] && deletable(i) && relevance[i] < best_rel {
                best_rel = relevance[i];
                best = i;
            }
        }
        let tol = T::c(1e-9) * (T::one() + best_rel.abs());
        for i in 0..best {
            if alive[i] && deletable(i) && relevance[i] <= best_rel + tol {
                best = i;
                break;
            }
        }
        debug_assert!(best != usize::MAX);

        let (p, q) = (prev[best], next[best]);
        alive[best] = false;
        next[p] = q;
        prev[q] = p;
        live -= 1;
        for &m in &[p, q] {
            if deletable(m) {
                relevance[m] = dce_relevance(pts[prev[m]], pts[m], pts[next[m]]);
            }
        }
    }

    let node_indices: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let nodes: Vec<(usize, Point2<T>)> = node_indices.iter().map(|&i| (i, pts[i])).collect();

    let cum = cumulative_lengths(pts);
    let total = curve.total_length();
    let dist = |a: usize, b: usize| -> T {
        let d = (cum[a.max(b)] - cum[a.min(b)]).abs();
        if closed {
            d.min(total - d)
        } else {
            d
        }
    };
    let m = nodes.len();
    let mut geodesic = vec![vec![T::zero(); m]; m];
    for a in 0..m {
        for b in a + 1..m {
            let d = dist(node_indices[a], node_indices[b]);
            geodesic[a][b] = d;
            geodesic[b][a] = d;
        }
    }

    FeatureGraph::from_parts(nodes, geodesic, n, total, closed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Contour, OpenCurve};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type P = Point2<f64>;

    fn sampled_polygon(corners: &[P], per_edge: usize) -> Contour<f64> {
        let mut pts = Vec::new();
        for i in 0..corners.len() {
            let a = corners[i];
            let b = corners[(i + 1) % corners.len()];
            for k in 0..per_edge {
                let t = k as f64 / per_edge as f64;
                pts.push(a + (b - a) * t);
            }
        }
        Contour::new(pts).unwrap()
    }

    fn circle(n: usize) -> Contour<f64> {
        let pts = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                P::new(a.cos(), a.sin())
            })
            .collect();
        Contour::new(pts).unwrap()
    }

    #[test]
    fn relevance_collinear_zero() {
        let k = dce_relevance(P::new(0.0, 0.0), P::new(1.0, 0.0), P::new(2.0, 0.0));
        assert!(k.abs() < 1e-12);
    }

    #[test]
    fn relevance_right_angle_unit_arms() {
        // hand evaluation: theta = pi/2, l1 = l2 = 1 -> (pi/2) * 1/2 = pi/4
        let k = dce_relevance(P::new(-1.0, 0.0), P::new(0.0, 0.0), P::new(0.0, 1.0));
        assert!((k - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn relevance_monotone_in_angle() {
        let shallow = dce_relevance(P::new(-1.0, 0.0), P::new(0.0, 0.0), P::new(1.0, 0.3));
        let sharp = dce_relevance(P::new(-1.0, 0.0), P::new(0.0, 0.0), P::new(0.3, 1.0));
        assert!(sharp > shallow);
    }

    #[test]
    fn hexagon_reduces_to_corners() {
        let corners: Vec<P> = (0..6)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / 6.0;
                P::new(a.cos(), a.sin())
            })
            .collect();
        let hex = sampled_polygon(&corners, 15);
        let g = extract_features(&hex, 6).unwrap();
        let got: Vec<usize> = g.nodes.iter().map(|n| n.0).collect();
        assert_eq!(got, vec![0, 15, 30, 45, 60, 75]);
    }

    #[test]
    fn square_400_reduces_to_corners() {
        let corners = [
            P::new(0.0, 0.0),
            P::new(1.0, 0.0),
            P::new(1.0, 1.0),
            P::new(0.0, 1.0),
        ];
        let sq = sampled_polygon(&corners, 100);
        let g = extract_features(&sq, 4).unwrap();
        let got: Vec<usize> = g.nodes.iter().map(|n| n.0).collect();
        assert_eq!(got, vec![0, 100, 200, 300]);
    }

    #[test]
    fn circle_vertices_roughly_uniform() {
        let g = extract_features(&circle(500), 8).unwrap();
        assert_eq!(g.len(), 8);
        let idx: Vec<usize> = g.nodes.iter().map(|n| n.0).collect();
        let gaps: Vec<f64> = (0..8)
            .map(|i| {
                let a = idx[i];
                let b = idx[(i + 1) % 8];
                ((b + 500 - a) % 500) as f64
            })
            .collect();
        let mean = gaps.iter().sum::<f64>() / 8.0;
        let var = gaps.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 8.0;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.25, "spacing cv {cv} gaps {gaps:?}");
    }

    #[test]
    fn open_endpoints_survive() {
        let pts: Vec<P> = (0..50)
            .map(|i| {
                let t = i as f64 / 49.0;
                P::new(t, (3.0 * std::f64::consts::PI * t).sin() * 0.2)
            })
            .collect();
        let curve = OpenCurve::new(pts).unwrap();
        let g = extract_features(&curve, 5).unwrap();
        assert_eq!(g.nodes.first().unwrap().0, 0);
        assert_eq!(g.nodes.last().unwrap().0, 49);
    }

    #[test]
    fn k_too_large_errors() {
        assert!(extract_features(&circle(20), 21).is_err());
        assert!(extract_features(&circle(20), 2).is_err());
    }

    fn star(n: usize, seed: u64) -> Contour<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let radii: Vec<f64> = (0..16).map(|_| 1.0 + rng.gen::<f64>()).collect();
        let pts = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                let sector = (i * 16 / n).min(15);
                let frac = (i as f64 * 16.0 / n as f64) - sector as f64;
                let r = radii[sector] * (1.0 - frac) + radii[(sector + 1) % 16] * frac;
                P::new(r * a.cos(), r * a.sin())
            })
            .collect();
        Contour::new(pts).unwrap()
    }

    #[test]
    fn selected_indices_scale_invariant() {
        let base = star(320, 21);
        let ref_idx: Vec<usize> = extract_features(&base, 12)
            .unwrap()
            .nodes
            .iter()
            .map(|n| n.0)
            .collect();
        for s in [0.5, 2.0, 5.0] {
            let scaled =
                Contour::new(base.points().iter().map(|p| *p * s).collect()).unwrap();
            let idx: Vec<usize> = extract_features(&scaled, 12)
                .unwrap()
                .nodes
                .iter()
                .map(|n| n.0)
                .collect();
            assert_eq!(idx, ref_idx, "scale {s}");
        }
    }

    #[test]
    fn selected_indices_rotation_invariant() {
        let base = star(320, 22);
        let ref_idx: Vec<usize> = extract_features(&base, 12)
            .unwrap()
            .nodes
            .iter()
            .map(|n| n.0)
            .collect();
        let (sin, cos) = 1.1f64.sin_cos();
        let rotated = Contour::new(
            base.points()
                .iter()
                .map(|p| P::new(cos * p.x - sin * p.y, sin * p.x + cos * p.y))
                .collect(),
        )
        .unwrap();
        let idx: Vec<usize> = extract_features(&rotated, 12)
            .unwrap()
            .nodes
            .iter()
            .map(|n| n.0)
            .collect();
        assert_eq!(idx, ref_idx);
    }

    #[test]
    fn hierarchy_nested_vertex_sets() {
        let base = star(320, 23);
        let bigger: Vec<usize> = extract_features(&base, 12)
            .unwrap()
            .nodes
            .iter()
            .map(|n| n.0)
            .collect();
        let smaller: Vec<usize> = extract_features(&base, 11)
            .unwrap()
            .nodes
            .iter()
            .map(|n| n.0)
            .collect();
        assert!(smaller.iter().all(|i| bigger.contains(i)));
    }

    #[test]
    fn geodesic_matrix_uses_original_curve() {
        let g = extract_features(&circle(512), 8).unwrap();
        let total = g.total_length;
        for a in 0..8 {
            for b in 0..8 {
                assert!(g.geodesic[a][b] <= total / 2.0 + 1e-9);
                assert!((g.geodesic[a][b] - g.geodesic[b][a]).abs() < 1e-12);
            }
        }
    }
}
