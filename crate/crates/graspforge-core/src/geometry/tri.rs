use nalgebra::Point3;

/// Which feature of the triangle the closest point lies on. Vertex/edge
/// indices are local to the triangle (`Edge(0)` spans vertices 0-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriFeature {
    Vertex(u8),
    Edge(u8),
    Face,
}

/// Closest point on triangle `(a, b, c)` to `p`, with the feature it lies on.
///
/// Region classification follows the standard Voronoi-region case analysis;
/// degenerate (near zero area) triangles fall out naturally as edge/vertex
/// cases.
pub fn closest_point_on_triangle(
    p: &Point3<f64>,
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
) -> (Point3<f64>, TriFeature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;

    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, TriFeature::Vertex(0));
    }

    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, TriFeature::Vertex(1));
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let denom = d1 - d3;
        let v = if denom.abs() > 1e-300 { d1 / denom } else { 0.0 };
        return (a + ab * v, TriFeature::Edge(0));
    }

    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, TriFeature::Vertex(2));
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let denom = d2 - d6;
        let w = if denom.abs() > 1e-300 { d2 / denom } else { 0.0 };
        return (a + ac * w, TriFeature::Edge(2));
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let denom = (d4 - d3) + (d5 - d6);
        let w = if denom.abs() > 1e-300 { (d4 - d3) / denom } else { 0.0 };
        return (b + (c - b) * w, TriFeature::Edge(1));
    }

    let denom = va + vb + vc;
    if denom.abs() < 1e-300 {
        // Fully degenerate triangle; fall back to the nearest vertex.
        let da = (p - a).norm_squared();
        let db = (p - b).norm_squared();
        let dc = (p - c).norm_squared();
        return if da <= db && da <= dc {
            (*a, TriFeature::Vertex(0))
        } else if db <= dc {
            (*b, TriFeature::Vertex(1))
        } else {
            (*c, TriFeature::Vertex(2))
        };
    }
    let v = vb / denom;
    let w = vc / denom;
    (a + ab * v + ac * w, TriFeature::Face)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> (Point3<f64>, Point3<f64>, Point3<f64>) {
        (
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        )
    }

    #[test]
    fn interior_projects_to_face() {
        let (a, b, c) = tri();
        let (q, feat) = closest_point_on_triangle(&Point3::new(0.2, 0.2, 1.0), &a, &b, &c);
        assert_eq!(feat, TriFeature::Face);
        assert!((q - Point3::new(0.2, 0.2, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn beyond_vertex_clamps_to_vertex() {
        let (a, b, c) = tri();
        let (q, feat) = closest_point_on_triangle(&Point3::new(2.0, -1.0, 0.5), &a, &b, &c);
        assert_eq!(feat, TriFeature::Vertex(1));
        assert_eq!(q, b);
    }

    #[test]
    fn beside_edge_clamps_to_edge() {
        let (a, b, c) = tri();
        let (q, feat) = closest_point_on_triangle(&Point3::new(0.5, -1.0, 0.0), &a, &b, &c);
        assert_eq!(feat, TriFeature::Edge(0));
        assert!((q - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn hypotenuse_region() {
        let (a, b, c) = tri();
        let (q, feat) = closest_point_on_triangle(&Point3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert_eq!(feat, TriFeature::Edge(1));
        assert!((q - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn brute_force_agreement_on_random_queries() {
        // Sample the triangle densely and check the routine is never worse.
        let (a, b, c) = tri();
        let mut stream = crate::rng::SeedStream::new(99);
        for _ in 0..200 {
            let p = Point3::new(
                stream.uniform_in(-2.0, 2.0),
                stream.uniform_in(-2.0, 2.0),
                stream.uniform_in(-2.0, 2.0),
            );
            let (q, _) = closest_point_on_triangle(&p, &a, &b, &c);
            let d = (p - q).norm();
            for i in 0..=60 {
                for j in 0..=(60 - i) {
                    let u = i as f64 / 60.0;
                    let v = j as f64 / 60.0;
                    let s = a + (b - a) * u + (c - a) * v;
                    assert!(d <= (p - s).norm() + 1e-9);
                }
            }
        }
    }
}
