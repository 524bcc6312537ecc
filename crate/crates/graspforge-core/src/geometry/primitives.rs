//! Procedural watertight meshes: boxes, UV spheres, capsules, cylinders.
//!
//! These back the bundled hand link geometry and the test object library, so
//! the repository needs no external mesh assets.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};

use crate::geometry::TriangleMesh;

/// Axis-aligned box centered at the origin.
pub fn box_mesh(half_extents: Vector3<f64>) -> TriangleMesh {
    let h = half_extents;
    let v = vec![
        Point3::new(-h.x, -h.y, -h.z),
        Point3::new(h.x, -h.y, -h.z),
        Point3::new(h.x, h.y, -h.z),
        Point3::new(-h.x, h.y, -h.z),
        Point3::new(-h.x, -h.y, h.z),
        Point3::new(h.x, -h.y, h.z),
        Point3::new(h.x, h.y, h.z),
        Point3::new(-h.x, h.y, h.z),
    ];
    let quads: [[u32; 4]; 6] = [
        [0, 3, 2, 1], // bottom (-z)
        [4, 5, 6, 7], // top (+z)
        [0, 1, 5, 4], // -y
        [1, 2, 6, 5], // +x
        [2, 3, 7, 6], // +y
        [3, 0, 4, 7], // -x
    ];
    let mut tris = Vec::with_capacity(12);
    for q in quads {
        tris.push([q[0], q[1], q[2]]);
        tris.push([q[0], q[2], q[3]]);
    }
    TriangleMesh::from_parts(v, tris).expect("box mesh is well formed")
}

/// UV sphere centered at the origin with pole vertices on the z axis and an
/// equator vertex at `(radius, 0, 0)`.
pub fn uv_sphere(radius: f64, rings: usize, segments: usize) -> TriangleMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut vertices = Vec::new();
    vertices.push(Point3::new(0.0, 0.0, radius)); // north pole = 0
    for ring in 1..rings {
        let theta = PI * ring as f64 / rings as f64;
        let (st, ct) = theta.sin_cos();
        for seg in 0..segments {
            let phi = 2.0 * PI * seg as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(Point3::new(radius * st * cp, radius * st * sp, radius * ct));
        }
    }
    let south = vertices.len() as u32;
    vertices.push(Point3::new(0.0, 0.0, -radius));

    let ring_start = |ring: usize| 1 + (ring - 1) * segments;
    let mut tris = Vec::new();
    // Pole caps.
    for seg in 0..segments {
        let a = (ring_start(1) + seg) as u32;
        let b = (ring_start(1) + (seg + 1) % segments) as u32;
        tris.push([0, a, b]);
        let c = (ring_start(rings - 1) + seg) as u32;
        let d = (ring_start(rings - 1) + (seg + 1) % segments) as u32;
        tris.push([south, d, c]);
    }
    // Quads between rings.
    for ring in 1..rings - 1 {
        for seg in 0..segments {
            let a = (ring_start(ring) + seg) as u32;
            let b = (ring_start(ring) + (seg + 1) % segments) as u32;
            let c = (ring_start(ring + 1) + seg) as u32;
            let d = (ring_start(ring + 1) + (seg + 1) % segments) as u32;
            tris.push([a, c, d]);
            tris.push([a, d, b]);
        }
    }
    TriangleMesh::from_parts(vertices, tris).expect("sphere mesh is well formed")
}

/// Capsule: cylinder of length `length` along +z starting at the origin,
/// capped by hemispheres of `radius` at `(0,0,0)` and `(0,0,length)`.
pub fn capsule(radius: f64, length: f64, rings: usize, segments: usize) -> TriangleMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut vertices = Vec::new();
    vertices.push(Point3::new(0.0, 0.0, length + radius)); // top apex
    let mut ring_starts = Vec::new();
    // Upper hemisphere rings, equator ring sits at z = length.
    for ring in 1..=rings {
        let theta = 0.5 * PI * ring as f64 / rings as f64;
        let (st, ct) = theta.sin_cos();
        ring_starts.push(vertices.len());
        for seg in 0..segments {
            let phi = 2.0 * PI * seg as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(Point3::new(
                radius * st * cp,
                radius * st * sp,
                length + radius * ct,
            ));
        }
    }
    // Lower hemisphere rings from its equator (z = 0) down to the apex.
    for ring in 0..rings {
        let theta = 0.5 * PI * (1.0 + ring as f64 / rings as f64);
        let (st, ct) = theta.sin_cos();
        ring_starts.push(vertices.len());
        for seg in 0..segments {
            let phi = 2.0 * PI * seg as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(Point3::new(radius * st * cp, radius * st * sp, radius * ct));
        }
    }
    let bottom = vertices.len() as u32;
    vertices.push(Point3::new(0.0, 0.0, -radius));

    let mut tris = Vec::new();
    // Top cap fan.
    for seg in 0..segments {
        let a = (ring_starts[0] + seg) as u32;
        let b = (ring_starts[0] + (seg + 1) % segments) as u32;
        tris.push([0, a, b]);
    }
    // Bands between consecutive rings (includes the cylindrical band, which
    // connects the upper equator to the lower equator).
    for r in 0..ring_starts.len() - 1 {
        for seg in 0..segments {
            let a = (ring_starts[r] + seg) as u32;
            let b = (ring_starts[r] + (seg + 1) % segments) as u32;
            let c = (ring_starts[r + 1] + seg) as u32;
            let d = (ring_starts[r + 1] + (seg + 1) % segments) as u32;
            tris.push([a, c, d]);
            tris.push([a, d, b]);
        }
    }
    // Bottom cap fan.
    let last = *ring_starts.last().unwrap();
    for seg in 0..segments {
        let a = (last + seg) as u32;
        let b = (last + (seg + 1) % segments) as u32;
        tris.push([bottom, b, a]);
    }
    TriangleMesh::from_parts(vertices, tris).expect("capsule mesh is well formed")
}

/// Closed cylinder along +z from 0 to `length`.
pub fn cylinder(radius: f64, length: f64, segments: usize) -> TriangleMesh {
    assert!(segments >= 3);
    let mut vertices = Vec::new();
    for &z in &[0.0, length] {
        for seg in 0..segments {
            let phi = 2.0 * PI * seg as f64 / segments as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(Point3::new(radius * cp, radius * sp, z));
        }
    }
    let bottom_center = vertices.len() as u32;
    vertices.push(Point3::new(0.0, 0.0, 0.0));
    let top_center = vertices.len() as u32;
    vertices.push(Point3::new(0.0, 0.0, length));

    let mut tris = Vec::new();
    for seg in 0..segments {
        let a = seg as u32;
        let b = ((seg + 1) % segments) as u32;
        let c = (segments + seg) as u32;
        let d = (segments + (seg + 1) % segments) as u32;
        tris.push([a, b, d]);
        tris.push([a, d, c]);
        tris.push([bottom_center, b, a]);
        tris.push([top_center, c, d]);
    }
    TriangleMesh::from_parts(vertices, tris).expect("cylinder mesh is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitives_are_watertight() {
        assert!(box_mesh(Vector3::new(0.5, 0.5, 0.5)).watertight);
        assert!(uv_sphere(1.0, 16, 32).watertight);
        assert!(capsule(0.01, 0.04, 4, 12).watertight);
        assert!(cylinder(0.02, 0.05, 16).watertight);
    }

    #[test]
    fn sphere_area_approaches_analytic() {
        let mesh = uv_sphere(1.0, 48, 96);
        let analytic = 4.0 * PI;
        assert!((mesh.total_area() - analytic).abs() / analytic < 5e-3);
    }

    #[test]
    fn sphere_has_pole_and_equator_vertices() {
        let mesh = uv_sphere(1.0, 48, 96);
        let has = |p: Point3<f64>| mesh.vertices.iter().any(|v| (v - p).norm() < 1e-12);
        assert!(has(Point3::new(0.0, 0.0, 1.0)));
        assert!(has(Point3::new(0.0, 0.0, -1.0)));
        assert!(has(Point3::new(1.0, 0.0, 0.0)));
    }

    #[test]
    fn capsule_extent_matches_parameters() {
        let mesh = capsule(0.01, 0.05, 6, 16);
        let max_z = mesh.vertices.iter().map(|v| v.z).fold(f64::MIN, f64::max);
        let min_z = mesh.min_z();
        assert!((max_z - 0.06).abs() < 1e-12);
        assert!((min_z + 0.01).abs() < 1e-12);
    }
}
