//! Planar convex hulls for two-user rate regions.

/// Monotone-chain convex hull; returns vertices in counter-clockwise order
/// starting from the lexicographically smallest point. Collinear points are
/// dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shoelace area of a hull (vertices in order).
pub fn hull_area(hull: &[(f64, f64)]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..hull.len() {
        let (x1, y1) = hull[i];
        let (x2, y2) = hull[(i + 1) % hull.len()];
        acc += x1 * y2 - x2 * y1;
    }
    acc.abs() / 2.0
}

/// Whether `point` lies inside (or within `slack` of) the convex hull.
pub fn hull_contains(hull: &[(f64, f64)], point: (f64, f64), slack: f64) -> bool {
    if hull.is_empty() {
        return false;
    }
    if hull.len() == 1 {
        let d = ((hull[0].0 - point.0).powi(2) + (hull[0].1 - point.1).powi(2)).sqrt();
        return d <= slack;
    }
    if hull.len() == 2 {
        return segment_distance(hull[0], hull[1], point) <= slack;
    }
    // Signed distance to every edge of the CCW polygon.
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        if len == 0.0 {
            continue;
        }
        let cross = (b.0 - a.0) * (point.1 - a.1) - (b.1 - a.1) * (point.0 - a.0);
        if cross / len < -slack {
            return false;
        }
    }
    true
}

fn segment_distance(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * abx + (p.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * abx, a.1 + t * aby);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// All turns of the polygon have one orientation (hull sanity check).
pub fn is_convex(hull: &[(f64, f64)]) -> bool {
    if hull.len() < 4 {
        return true;
    }
    let n = hull.len();
    for i in 0..n {
        let o = hull[i];
        let a = hull[(i + 1) % n];
        let b = hull[(i + 2) % n];
        let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
        if cross < -1e-12 {
            return false;
        }
    }
    true
}

/// Hull of a set of achieved rate pairs closed with the origin and the
/// single-user anchor points, i.e. the achievable region these points span.
pub fn rate_region_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut closed = points.to_vec();
    let max_x = points.iter().map(|p| p.0).fold(0.0, f64::max);
    let max_y = points.iter().map(|p| p.1).fold(0.0, f64::max);
    closed.push((0.0, 0.0));
    closed.push((max_x, 0.0));
    closed.push((0.0, max_y));
    convex_hull(&closed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_single_point_is_that_point() {
        let hull = convex_hull(&[(1.5, 2.5)]);
        assert_eq!(hull, vec![(1.5, 2.5)]);
        assert_eq!(hull_area(&hull), 0.0);
        assert!(hull_contains(&hull, (1.5, 2.5), 1e-9));
    }

    #[test]
    fn square_hull_area_and_membership() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((hull_area(&hull) - 1.0).abs() < 1e-12);
        assert!(is_convex(&hull));
        assert!(hull_contains(&hull, (0.5, 0.5), 0.0));
        assert!(hull_contains(&hull, (1.0005, 0.5), 1e-3));
        assert!(!hull_contains(&hull, (1.1, 0.5), 1e-3));
    }

    #[test]
    fn region_hull_is_closed_with_axis_anchors() {
        let hull = rate_region_hull(&[(2.0, 1.0), (1.0, 2.0)]);
        assert!(hull_contains(&hull, (0.0, 0.0), 1e-12));
        assert!(hull_contains(&hull, (2.0, 0.0), 1e-12));
        assert!(hull_contains(&hull, (0.0, 2.0), 1e-12));
        assert!(is_convex(&hull));
    }
}
