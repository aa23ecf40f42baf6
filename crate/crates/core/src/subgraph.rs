//! Match the occluded curve's feature graph into a full curve's feature
//! graph and recover the corresponding curve section.
//!
//! The search tries every unordered reference pair in G1 against every
//! ordered node pair in G2 and both orientations. Each hypothesis fixes a
//! similarity transform; the remaining G1 nodes are greedily assigned to the
//! nearest unused G2 node near their expected position, or to null beyond the
//! rejection radius. Cost terms compare geodesic distances, with the G1 side
//! rescaled by the hypothesis' similarity scale so the match is insensitive
//! to the (unknown) scale of a query curve. A partial candidate whose cost
//! already exceeds the incumbent is abandoned.

use crate::dce::FeatureGraph;
use crate::error::{Error, Result};
use crate::geometry::{Contour, Curve, OpenCurve, Point2};
use crate::scalar::Real;

/// Penalty and rejection thresholds, both relative to the full (G2) curve's
/// total length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig<T = f64> {
    /// Cost per unmapped G1 node, as a fraction of the G2 curve length.
    pub lambda: T,
    /// Expected-position distance beyond which a node maps to null, as a
    /// fraction of the G2 curve length.
    pub nn_reject: T,
}

impl<T: Real> Default for MatchConfig<T> {
    fn default() -> Self {
        MatchConfig {
            lambda: T::c(0.1),
            nn_reject: T::c(0.1),
        }
    }
}

/// A (partial) node assignment G1 -> G2.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMapping<T = f64> {
    /// One entry per G1 node: the matched G2 node, or None.
    pub pairs: Vec<(usize, Option<usize>)>,
    /// +1 for a direct similarity, -1 for a reflected one.
    pub orientation: i8,
    /// Search cost of the winning hypothesis.
    pub cost: T,
    /// G2-frame length per G1-frame length implied by the winning reference
    /// pair.
    pub scale: T,
    /// True when the inputs were swapped internally because G1 had more nodes.
    pub swapped: bool,
}

fn cmul<T: Real>(a: Point2<T>, b: Point2<T>) -> Point2<T> {
    Point2::new(a.x * b.x - a.y * b.y, a.x * b.y + a.y * b.x)
}

fn cdiv<T: Real>(a: Point2<T>, b: Point2<T>) -> Point2<T> {
    let d = b.x * b.x + b.y * b.y;
    Point2::new((a.x * b.x + a.y * b.y) / d, (a.y * b.x - a.x * b.y) / d)
}

fn conj<T: Real>(a: Point2<T>) -> Point2<T> {
    Point2::new(a.x, -a.y)
}

/// Image of `g_i` under the similarity transform that maps the reference pair
/// (g1, g2) onto (f_g1, f_g2); `r = -1` selects the reflected similarity.
pub fn expected_position<T: Real>(
    g1: Point2<T>,
    g2: Point2<T>,
    f_g1: Point2<T>,
    f_g2: Point2<T>,
    g_i: Point2<T>,
    r: i8,
) -> Result<Point2<T>> {
    let d = g2 - g1;
    let e = f_g2 - f_g1;
    if d.norm() == T::zero() || e.norm() == T::zero() {
        return Err(Error::DegenerateFit("coincident reference pair".into()));
    }
    let z = g_i - g1;
    let w = if r >= 0 {
        cmul(cdiv(e, d), z)
    } else {
        cmul(cdiv(e, conj(d)), conj(z))
    };
    Ok(f_g1 + w)
}

/// Eq.-style mapping cost: sum over mapped node pairs of the absolute
/// geodesic-distance discrepancy, plus `lambda` (times the G2 curve length)
/// per unmapped G1 node. Distances are taken raw from the graphs' matrices.
pub fn mapping_cost<T: Real>(
    mapping: &NodeMapping<T>,
    g1: &FeatureGraph<T>,
    g2: &FeatureGraph<T>,
    cfg: &MatchConfig<T>,
) -> T {
    let lambda_abs = cfg.lambda * g2.total_length;
    let mapped: Vec<(usize, usize)> = mapping
        .pairs
        .iter()
        .filter_map(|&(a, m)| m.map(|b| (a, b)))
        .collect();
    let mut cost = T::zero();
    for x in 0..mapped.len() {
        for y in x + 1..mapped.len() {
            let (a, fa) = mapped[x];
            let (b, fb) = mapped[y];
            cost += (g1.geodesic[a][b] - g2.geodesic[fa][fb]).abs();
        }
    }
    let nulls = mapping.pairs.len() - mapped.len();
    cost + lambda_abs * T::from_usize(nulls).unwrap()
}

/// Find the minimum-cost assignment of G1's nodes into G2.
///
/// When G1 has more nodes than G2 the roles are swapped internally and the
/// returned mapping is inverted back to G1's perspective.
pub fn subgraph_match<T: Real>(
    g1: &FeatureGraph<T>,
    g2: &FeatureGraph<T>,
    cfg: &MatchConfig<T>,
) -> Result<NodeMapping<T>> {
    if g1.len() < 2 || g2.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "subgraph matching needs >= 2 nodes per graph, got {} and {}",
            g1.len(),
            g2.len()
        )));
    }
    if g1.len() > g2.len() {
        let inner = match_impl(g2, g1, cfg, true)?;
        // invert: one entry per original-G1 node
        let mut pairs: Vec<(usize, Option<usize>)> = (0..g1.len()).map(|i| (i, None)).collect();
        for &(small, big) in &inner.pairs {
            if let Some(big) = big {
                pairs[big].1 = Some(small);
            }
        }
        let scale = if inner.scale > T::zero() {
            T::one() / inner.scale
        } else {
            T::one()
        };
        return Ok(NodeMapping {
            pairs,
            orientation: inner.orientation,
            cost: inner.cost,
            scale,
            swapped: true,
        });
    }
    match_impl(g1, g2, cfg, true)
}

fn match_impl<T: Real>(
    g1: &FeatureGraph<T>,
    g2: &FeatureGraph<T>,
    cfg: &MatchConfig<T>,
    prune: bool,
) -> Result<NodeMapping<T>> {
    let n1 = g1.len();
    let n2 = g2.len();
    let lambda_abs = cfg.lambda * g2.total_length;
    let nn_reject_abs = cfg.nn_reject * g2.total_length;

    // unordered G1 reference pairs, first/last first for an early incumbent
    let mut ref_pairs: Vec<(usize, usize)> = Vec::with_capacity(n1 * (n1 - 1) / 2);
    ref_pairs.push((0, n1 - 1));
    for a in 0..n1 {
        for b in a + 1..n1 {
            if (a, b) != (0, n1 - 1) {
                ref_pairs.push((a, b));
            }
        }
    }

    let mut best_cost = T::infinity();
    let mut best: Option<NodeMapping<T>> = None;
    let mut used = vec![false; n2];
    let mut assigned: Vec<Option<usize>> = vec![None; n1];

    // a section of the full curve can never exceed the full perimeter, so
    // hypotheses whose similarity scale would map the occluded curve onto
    // more than the whole contour are infeasible
    let sigma_cap = g2.total_length / g1.total_length * T::c(1.05);

    for &(i1, i2) in &ref_pairs {
        let p1 = g1.nodes[i1].1;
        let p2 = g1.nodes[i2].1;
        let chord1 = p1.distance(p2);
        if chord1 == T::zero() {
            continue;
        }
        for j1 in 0..n2 {
            for j2 in 0..n2 {
                if j1 == j2 {
                    continue;
                }
                let q1 = g2.nodes[j1].1;
                let q2 = g2.nodes[j2].1;
                let chord2 = q1.distance(q2);
                if chord2 == T::zero() {
                    continue;
                }
                let sigma = chord2 / chord1;
                if sigma > sigma_cap {
                    continue;
                }
                for r in [1i8, -1] {
                    let mut cost =
                        (sigma * g1.geodesic[i1][i2] - g2.geodesic[j1][j2]).abs();
                    if prune && cost >= best_cost {
                        continue;
                    }
                    used.fill(false);
                    used[j1] = true;
                    used[j2] = true;
                    assigned.fill(None);
                    assigned[i1] = Some(j1);
                    assigned[i2] = Some(j2);
                    let mut abandoned = false;
                    for gi in 0..n1 {
                        if gi == i1 || gi == i2 {
                            continue;
                        }
                        let p = expected_position(p1, p2, q1, q2, g1.nodes[gi].1, r)
                            .expect("references checked non-coincident");
                        let mut nearest = usize::MAX;
                        let mut nearest_d = T::infinity();
                        for (j, node) in g2.nodes.iter().enumerate() {
                            if used[j] {
                                continue;
                            }
                            let d = p.distance(node.1);
                            if d < nearest_d {
                                nearest_d = d;
                                nearest = j;
                            }
                        }
                        if nearest == usize::MAX || nearest_d > nn_reject_abs {
                            cost += lambda_abs;
                        } else {
                            used[nearest] = true;
                            assigned[gi] = Some(nearest);
                            cost += (sigma * g1.geodesic[i1][gi]
                                - g2.geodesic[j1][nearest])
                                .abs()
                                + (sigma * g1.geodesic[i2][gi] - g2.geodesic[j2][nearest]).abs();
                        }
                        if prune && cost >= best_cost {
                            abandoned = true;
                            break;
                        }
                    }
                    if abandoned || cost >= best_cost {
                        continue;
                    }
                    best_cost = cost;
                    best = Some(NodeMapping {
                        pairs: assigned.iter().cloned().enumerate().collect(),
                        orientation: r,
                        cost,
                        scale: sigma,
                        swapped: false,
                    });
                }
            }
        }
    }

    best.ok_or_else(|| Error::DegenerateFit("no usable reference pair".into()))
}

/// The full-contour arc(s) spanned by the extreme matched nodes, best first.
///
/// On a closed contour two arcs connect the extremes; both are returned,
/// ordered by how well their length (converted to the occluded curve's frame
/// via the mapping's similarity scale) agrees with `occluded_len`. Arcs too
/// short to form an open curve are dropped.
pub fn extract_section<T: Real>(
    full: &Contour<T>,
    g2: &FeatureGraph<T>,
    mapping: &NodeMapping<T>,
    occluded_len: T,
) -> Result<Vec<OpenCurve<T>>> {
    let mut matched: Vec<usize> = mapping
        .pairs
        .iter()
        .filter_map(|&(_, m)| m)
        .map(|node| g2.nodes[node].0)
        .collect();
    matched.sort_unstable();
    matched.dedup();
    if matched.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "extract_section needs >= 2 matched nodes, got {}",
            matched.len()
        )));
    }
    let n = full.len();
    let m = matched.len();
    // the arc containing every matched node is the complement of the largest
    // cyclic gap between consecutive matched indices
    let mut widest = 0usize;
    let mut widest_gap = 0usize;
    for t in 0..m {
        let a = matched[t];
        let b = matched[(t + 1) % m];
        let gap = (b + n - a) % n;
        if gap > widest_gap {
            widest_gap = gap;
            widest = t;
        }
    }
    let start = matched[(widest + 1) % m];
    let end = matched[widest];

    let arc_points = |from: usize, to: usize| -> Vec<Point2<T>> {
        let count = (to + n - from) % n + 1;
        (0..count).map(|k| full.points()[(from + k) % n]).collect()
    };
    let mut candidates: Vec<OpenCurve<T>> = Vec::new();
    for pts in [arc_points(start, end), arc_points(end, start)] {
        if let Ok(curve) = OpenCurve::new(pts) {
            candidates.push(curve);
        }
    }
    if candidates.is_empty() {
        return Err(Error::DegenerateCurve("no usable arc between matched nodes".into()));
    }
    let scale = if mapping.scale > T::zero() {
        mapping.scale
    } else {
        T::one()
    };
    candidates.sort_by(|a, b| {
        let da = (a.total_length() / scale - occluded_len).abs();
        let db = (b.total_length() / scale - occluded_len).abs();
        da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(candidates)
}
