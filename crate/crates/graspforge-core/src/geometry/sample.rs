use nalgebra::Point3;

use crate::error::CoreError;
use crate::geometry::{PointCloud, TriangleMesh};
use crate::rng::SeedStream;

/// Sample `k` points uniformly by area over the mesh surface.
///
/// Normals are inherited from the sampled faces. Deterministic given `seed`.
pub fn sample_surface(mesh: &TriangleMesh, k: usize, seed: u64) -> Result<PointCloud, CoreError> {
    if k == 0 {
        return Err(CoreError::InvalidArgument("k must be >= 1".into()));
    }
    let face_count = mesh.triangles.len();
    if face_count == 0 {
        return Err(CoreError::EmptyInput("mesh has no faces".into()));
    }

    let mut cumulative = Vec::with_capacity(face_count);
    let mut total = 0.0;
    for f in 0..face_count {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(CoreError::DegenerateGeometry(
            "mesh has zero surface area".into(),
        ));
    }

    let mut stream = SeedStream::new(seed);
    let mut points = Vec::with_capacity(k);
    let mut normals = Vec::with_capacity(k);
    for _ in 0..k {
        let target = stream.uniform() * total;
        let face = match cumulative.binary_search_by(|probe| probe.partial_cmp(&target).unwrap()) {
            Ok(i) => (i + 1).min(face_count - 1),
            Err(i) => i.min(face_count - 1),
        };
        let [a, b, c] = mesh.triangle_vertices(face);
        // Square-root trick for uniform barycentric coordinates.
        let r1 = stream.uniform().sqrt();
        let r2 = stream.uniform();
        let p = a.coords * (1.0 - r1) + b.coords * (r1 * (1.0 - r2)) + c.coords * (r1 * r2);
        points.push(Point3::from(p));
        normals.push(mesh.face_normals[face]);
    }
    PointCloud::with_normals(points, normals)
}

/// Greedy farthest-point sampling down to `k` points.
///
/// The first point is seed-chosen; each subsequent point maximizes the
/// minimum distance to the already-selected set. Normals and labels are
/// carried along. Ties break toward the lower index, so the output is a
/// deterministic function of (cloud order, seed).
pub fn farthest_point_sample(
    cloud: &PointCloud,
    k: usize,
    seed: u64,
) -> Result<PointCloud, CoreError> {
    if cloud.len() < k {
        return Err(CoreError::InsufficientPoints {
            requested: k,
            available: cloud.len(),
        });
    }
    let mut stream = SeedStream::new(seed);
    let start = stream.index(cloud.len());
    Ok(select(cloud, k, start))
}

/// Farthest-point sampling with a content-derived start point, so the
/// selected subset depends only on the point *set*, not its ordering.
///
/// The start is the lexicographically smallest point; distance ties during
/// selection also break lexicographically. Used where permutation invariance
/// is required (e.g. standardizing evaluator inputs).
pub fn farthest_point_sample_stable(cloud: &PointCloud, k: usize) -> Result<PointCloud, CoreError> {
    if cloud.len() < k {
        return Err(CoreError::InsufficientPoints {
            requested: k,
            available: cloud.len(),
        });
    }
    let start = cloud
        .points
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| lex_cmp(a, b))
        .map(|(i, _)| i)
        .unwrap();
    Ok(select_by(cloud, k, start, |best, cand, points| {
        cand.0 > best.0 || (cand.0 == best.0 && lex_cmp(&points[cand.1], &points[best.1]).is_lt())
    }))
}

fn lex_cmp(a: &Point3<f64>, b: &Point3<f64>) -> std::cmp::Ordering {
    a.x.partial_cmp(&b.x)
        .unwrap()
        .then(a.y.partial_cmp(&b.y).unwrap())
        .then(a.z.partial_cmp(&b.z).unwrap())
}

fn select(cloud: &PointCloud, k: usize, start: usize) -> PointCloud {
    select_by(cloud, k, start, |best, cand, _| cand.0 > best.0)
}

fn select_by(
    cloud: &PointCloud,
    k: usize,
    start: usize,
    better: impl Fn((f64, usize), (f64, usize), &[Point3<f64>]) -> bool,
) -> PointCloud {
    let n = cloud.len();
    let mut selected = Vec::with_capacity(k);
    let mut is_selected = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut current = start;
    for step in 0..k {
        selected.push(current);
        is_selected[current] = true;
        let cp = cloud.points[current];
        for i in 0..n {
            let d = (cloud.points[i] - cp).norm_squared();
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
        if step + 1 == k {
            break;
        }
        let mut best = usize::MAX;
        for i in 0..n {
            if is_selected[i] {
                continue;
            }
            if best == usize::MAX
                || better((min_dist[best], best), (min_dist[i], i), &cloud.points)
            {
                best = i;
            }
        }
        current = best;
    }

    PointCloud {
        points: selected.iter().map(|&i| cloud.points[i]).collect(),
        normals: cloud
            .normals
            .as_ref()
            .map(|ns| selected.iter().map(|&i| ns[i]).collect()),
        labels: cloud
            .labels
            .as_ref()
            .map(|ls| selected.iter().map(|&i| ls[i]).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;
    use nalgebra::Vector3;

    #[test]
    fn sphere_samples_lie_on_sphere() {
        let mesh = primitives::uv_sphere(1.0, 64, 128);
        let cloud = sample_surface(&mesh, 2048, 7).unwrap();
        assert_eq!(cloud.len(), 2048);
        for p in &cloud.points {
            assert!((p.coords.norm() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let mesh = primitives::uv_sphere(0.5, 16, 32);
        let a = sample_surface(&mesh, 256, 3).unwrap();
        let b = sample_surface(&mesh, 256, 3).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn cube_face_counts_are_area_weighted() {
        let mesh = primitives::box_mesh(Vector3::new(0.5, 0.5, 0.5));
        let cloud = sample_surface(&mesh, 6000, 11).unwrap();
        // Classify by dominant normal axis: 6 equal-area faces.
        let mut counts = [0usize; 6];
        for n in cloud.normals.as_ref().unwrap() {
            let axis = if n.x.abs() > 0.5 {
                0
            } else if n.y.abs() > 0.5 {
                1
            } else {
                2
            };
            let side = usize::from(n[axis] > 0.0);
            counts[axis * 2 + side] += 1;
        }
        for c in counts {
            assert!(
                (c as i64 - 1000).unsigned_abs() <= 150,
                "face count {c} outside 1000 +/- 150"
            );
        }
    }

    #[test]
    fn zero_area_mesh_is_degenerate() {
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        let mesh = TriangleMesh::from_parts(v, vec![[0, 1, 2]]).unwrap();
        assert!(matches!(
            sample_surface(&mesh, 16, 0),
            Err(CoreError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn fps_unit_square_picks_diagonal() {
        let cloud = PointCloud::from_points(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ]);
        // Find a seed whose first pick is corner 0, then expect the diagonal.
        for seed in 0..64 {
            let mut probe = SeedStream::new(seed);
            if probe.index(4) == 0 {
                let out = farthest_point_sample(&cloud, 2, seed).unwrap();
                assert_eq!(out.points[0], cloud.points[0]);
                assert_eq!(out.points[1], cloud.points[2]);
                return;
            }
        }
        panic!("no seed selecting corner 0 found in 64 tries");
    }

    #[test]
    fn fps_exhaustion_is_permutation() {
        let mesh = primitives::uv_sphere(1.0, 8, 12);
        let cloud = sample_surface(&mesh, 64, 5).unwrap();
        let out = farthest_point_sample(&cloud, 64, 9).unwrap();
        let mut orig: Vec<_> = cloud.points.iter().map(|p| format!("{p:?}")).collect();
        let mut got: Vec<_> = out.points.iter().map(|p| format!("{p:?}")).collect();
        orig.sort();
        got.sort();
        assert_eq!(orig, got);
    }

    #[test]
    fn fps_too_many_requested_errors() {
        let cloud = PointCloud::from_points(vec![Point3::origin()]);
        assert!(matches!(
            farthest_point_sample(&cloud, 2, 0),
            Err(CoreError::InsufficientPoints { .. })
        ));
    }
}
