use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::CoreError;
use crate::geometry::RigidTransform;

/// An indexed triangle mesh with per-face unit normals.
///
/// `watertight` is set only when every undirected edge is shared by exactly
/// two faces; the signed-distance sign convention is only exact for
/// watertight meshes (see [`super::SurfaceIndex`]).
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
    pub face_normals: Vec<Vector3<f64>>,
    pub watertight: bool,
}

impl TriangleMesh {
    /// Build from vertices and triangle indices, computing face normals and
    /// the watertightness flag. Indices are validated against the vertex
    /// count.
    pub fn from_parts(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self, CoreError> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(CoreError::EmptyInput("mesh has no geometry".into()));
        }
        let n = vertices.len() as u32;
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(CoreError::InvalidArgument(format!(
                    "triangle {i} references vertex out of range"
                )));
            }
        }
        let face_normals = triangles
            .iter()
            .map(|t| {
                let a = vertices[t[0] as usize];
                let b = vertices[t[1] as usize];
                let c = vertices[t[2] as usize];
                let n = (b - a).cross(&(c - a));
                let len = n.norm();
                if len > 1e-14 {
                    n / len
                } else {
                    // Degenerate face: zero area, never sampled; placeholder
                    // normal keeps downstream invariants simple.
                    Vector3::z()
                }
            })
            .collect();
        let watertight = is_watertight(&triangles);
        Ok(TriangleMesh {
            vertices,
            triangles,
            face_normals,
            watertight,
        })
    }

    pub fn triangle_vertices(&self, face: usize) -> [Point3<f64>; 3] {
        let t = self.triangles[face];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|f| self.face_area(f)).sum()
    }

    /// Area-weighted surface centroid.
    pub fn centroid(&self) -> Point3<f64> {
        let mut acc = Vector3::zeros();
        let mut total = 0.0;
        for f in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_vertices(f);
            let area = self.face_area(f);
            acc += (a.coords + b.coords + c.coords) / 3.0 * area;
            total += area;
        }
        if total <= 0.0 {
            return Point3::origin();
        }
        Point3::from(acc / total)
    }

    /// Radius of the bounding sphere centered at the surface centroid.
    pub fn bounding_radius(&self) -> f64 {
        let c = self.centroid();
        self.vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_z(&self) -> f64 {
        self.vertices.iter().map(|v| v.z).fold(f64::INFINITY, f64::min)
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| t.transform_point(v)).collect(),
            triangles: self.triangles.clone(),
            face_normals: self
                .face_normals
                .iter()
                .map(|n| t.transform_vector(n))
                .collect(),
            watertight: self.watertight,
        }
    }
}

fn is_watertight(triangles: &[[u32; 3]]) -> bool {
    // Every undirected edge shared by exactly two faces, with consistent
    // winding (each directed edge appears once).
    let mut undirected: HashMap<(u32, u32), u32> = HashMap::new();
    let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let a = t[k];
            let b = t[(k + 1) % 3];
            *undirected.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            *directed.entry((a, b)).or_insert(0) += 1;
        }
    }
    undirected.values().all(|&c| c == 2) && directed.values().all(|&c| c == 1)
}

/// Load an ASCII OBJ file (`v`/`vn`/`f` records, 1-based indices, faces
/// triangulated by fan). Unknown record types are skipped.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, CoreError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::io(path.display().to_string(), e))?;
    parse_obj(&text, &path.display().to_string())
}

pub(crate) fn parse_obj(text: &str, path: &str) -> Result<TriangleMesh, CoreError> {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    let malformed = |line: usize, message: String| CoreError::MalformedFile {
        path: path.to_string(),
        line,
        message,
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let coords: Vec<f64> = fields
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| malformed(line_no, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(malformed(line_no, "vertex needs 3 coordinates".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut indices = Vec::new();
                for field in fields {
                    // Accept v, v/vt, v//vn, v/vt/vn; only the position index matters.
                    let first = field.split('/').next().unwrap_or("");
                    let value: i64 = first
                        .parse()
                        .map_err(|e| malformed(line_no, format!("bad face index '{field}': {e}")))?;
                    if value < 1 {
                        return Err(malformed(
                            line_no,
                            format!("face index {value} is not 1-based positive"),
                        ));
                    }
                    let zero_based = (value - 1) as usize;
                    if zero_based >= vertices.len() {
                        return Err(malformed(
                            line_no,
                            format!(
                                "face index {value} out of range (have {} vertices)",
                                vertices.len()
                            ),
                        ));
                    }
                    indices.push(zero_based as u32);
                }
                if indices.len() < 3 {
                    return Err(malformed(line_no, "face needs at least 3 vertices".into()));
                }
                for k in 1..indices.len() - 1 {
                    triangles.push([indices[0], indices[k], indices[k + 1]]);
                }
            }
            // vn/vt/o/g/s/usemtl/mtllib carry no geometry we use.
            Some(_) => {}
            None => {}
        }
    }

    if vertices.is_empty() || triangles.is_empty() {
        return Err(CoreError::EmptyInput(format!("{path}: no faces parsed")));
    }
    TriangleMesh::from_parts(vertices, triangles)
}

/// Serialize to ASCII OBJ (vertices and faces only).
pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), CoreError> {
    use std::fmt::Write as _;
    let path = path.as_ref();
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    std::fs::write(path, out).map_err(|e| CoreError::io(path.display().to_string(), e))
}
