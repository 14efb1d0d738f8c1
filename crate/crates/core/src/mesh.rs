//! Simplicial meshes of the parameter manifolds and their ASCII format.
//!
//! ```text
//! domain sphere 2          # or: domain torus <lx> <ly>   (optional line)
//! <vertex count> <coordinate dim>
//! x_0 x_1 ...              # one line per vertex
//! <simplex count> <vertices per simplex>
//! i j k                    # one line per simplex, zero-based
//! ```
//!
//! Blank lines and text after `#` are ignored.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::immersion::Domain;

#[derive(Clone, Debug, PartialEq)]
pub struct ParamMesh {
    pub domain: Domain,
    /// Chart-free parameter points: unit vectors for spheres, rectangle
    /// coordinates for tori.
    pub vertices: Vec<Vec<f64>>,
    /// Segments (`n = 1`) or triangles (`n = 2`).
    pub simplices: Vec<Vec<usize>>,
    /// Refinement level for generated meshes.
    pub level: Option<usize>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct MeshStats {
    pub vertices: usize,
    pub simplices: usize,
    pub euler_characteristic: i64,
}

/// Segments used by the circle mesh of refinement `level`.
pub fn circle_segments_for_level(level: usize) -> usize {
    8 << level
}

pub fn build_circle_mesh(segments: usize) -> Result<ParamMesh> {
    if segments < 3 {
        return Err(LabError::Mesh(format!(
            "need at least 3 segments, got {segments}"
        )));
    }
    let vertices = (0..segments)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / segments as f64;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let simplices = (0..segments).map(|k| vec![k, (k + 1) % segments]).collect();
    Ok(ParamMesh {
        domain: Domain::Sphere { n: 1 },
        vertices,
        simplices,
        level: None,
    })
}

pub fn build_icosphere_mesh(level: usize) -> ParamMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut vertices: Vec<Vec<f64>> = raw.iter().map(|v| normalize(v)).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m: Vec<f64> = verts[a].iter().zip(&verts[b]).map(|(x, y)| x + y).collect();
                verts.push(normalize(&m));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = midpoint(f[0], f[1], &mut vertices);
            let bc = midpoint(f[1], f[2], &mut vertices);
            let ca = midpoint(f[2], f[0], &mut vertices);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    ParamMesh {
        domain: Domain::Sphere { n: 2 },
        vertices,
        simplices: faces.into_iter().map(|f| f.to_vec()).collect(),
        level: Some(level),
    }
}

/// Regular `nx x ny` grid on the flat torus `[0, lx) x [0, ly)`, each cell
/// split into two triangles.
pub fn build_torus_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<ParamMesh> {
    if nx < 3 || ny < 3 {
        return Err(LabError::Mesh(
            "torus grid needs at least 3 cells per side".into(),
        ));
    }
    let mut vertices = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push(vec![lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let id = |i: usize, j: usize| (j % ny) * nx + (i % nx);
    let mut simplices = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            simplices.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            simplices.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Ok(ParamMesh {
        domain: Domain::Torus { lx, ly },
        vertices,
        simplices,
        level: None,
    })
}

/// Mesh of `domain` at refinement `level`: `8 * 2^level` circle segments,
/// an icosphere for `S^2`, a `(4 * 2^level)^2` grid for tori.
pub fn build_mesh(domain: Domain, level: usize) -> Result<ParamMesh> {
    let mut mesh = match domain {
        Domain::Sphere { n: 1 } => build_circle_mesh(circle_segments_for_level(level))?,
        Domain::Sphere { n: 2 } => build_icosphere_mesh(level),
        Domain::Sphere { n } => {
            return Err(LabError::Usage(format!(
                "meshes are available for n = 1, 2 only, got n = {n}"
            )))
        }
        Domain::Torus { lx, ly } => {
            let k = 4 << level;
            build_torus_mesh(lx, ly, k, k)?
        }
    };
    mesh.level = Some(level);
    Ok(mesh)
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / r).collect()
}

impl ParamMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn simplex_count(&self) -> usize {
        self.simplices.len()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.domain.intrinsic_dim()
    }

    pub fn stats(&self) -> MeshStats {
        MeshStats {
            vertices: self.vertex_count(),
            simplices: self.simplex_count(),
            euler_characteristic: self.euler_characteristic(),
        }
    }

    fn edges(&self) -> BTreeMap<(usize, usize), usize> {
        let mut edges = BTreeMap::new();
        for s in &self.simplices {
            for a in 0..s.len() {
                for b in a + 1..s.len() {
                    let key = (s[a].min(s[b]), s[a].max(s[b]));
                    *edges.entry(key).or_insert(0) += 1;
                }
            }
        }
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        let v = self.vertex_count() as i64;
        match self.intrinsic_dim() {
            1 => v - self.simplex_count() as i64,
            _ => v - self.edges().len() as i64 + self.simplex_count() as i64,
        }
    }

    /// Parameter point at the barycentre of simplex `e`, on the manifold.
    pub fn centroid(&self, e: usize) -> Vec<f64> {
        self.centroid_of(&self.simplices[e])
    }

    fn centroid_of(&self, s: &[usize]) -> Vec<f64> {
        let k = s.len() as f64;
        match self.domain {
            Domain::Sphere { .. } => {
                let mut c = vec![0.0; self.domain.point_dim()];
                for &v in s {
                    for (ci, x) in c.iter_mut().zip(&self.vertices[v]) {
                        *ci += x;
                    }
                }
                normalize(&c)
            }
            Domain::Torus { lx, ly } => {
                let base = &self.vertices[s[0]];
                let mut c = [0.0; 2];
                for &v in s {
                    let p = &self.vertices[v];
                    for (d, period) in [lx, ly].into_iter().enumerate() {
                        let mut x = p[d] - base[d];
                        x -= period * (x / period).round();
                        c[d] += base[d] + x;
                    }
                }
                c.iter().map(|x| x / k).collect()
            }
        }
    }

    /// Midpoint subdivision: every segment splits in two, every triangle in
    /// four. New vertices are appended after the existing ones.
    pub fn refined(&self) -> ParamMesh {
        let mut vertices = self.vertices.clone();
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let mut p = self.centroid_of(&[key.0, key.1]);
                if let Domain::Torus { lx, ly } = self.domain {
                    p[0] = p[0].rem_euclid(lx);
                    p[1] = p[1].rem_euclid(ly);
                }
                vertices.push(p);
                vertices.len() - 1
            })
        };
        let mut simplices = Vec::with_capacity(self.simplex_count() * 4);
        for s in &self.simplices {
            match s.len() {
                2 => {
                    let m = midpoint(s[0], s[1]);
                    simplices.push(vec![s[0], m]);
                    simplices.push(vec![m, s[1]]);
                }
                _ => {
                    let ab = midpoint(s[0], s[1]);
                    let bc = midpoint(s[1], s[2]);
                    let ca = midpoint(s[2], s[0]);
                    simplices.push(vec![s[0], ab, ca]);
                    simplices.push(vec![s[1], bc, ab]);
                    simplices.push(vec![s[2], ca, bc]);
                    simplices.push(vec![ab, bc, ca]);
                }
            }
        }
        ParamMesh {
            domain: self.domain,
            vertices,
            simplices,
            level: self.level.map(|l| l + 1),
        }
    }

    /// Checks vertex shape, index ranges, non-degenerate simplices, closedness
    /// and the Euler characteristic of the domain.
    pub fn validate(&self) -> Result<()> {
        let n = self.intrinsic_dim();
        if n > 2 {
            return Err(LabError::Mesh(format!(
                "unsupported intrinsic dimension {n}"
            )));
        }
        let pd = self.domain.point_dim();
        for (i, v) in self.vertices.iter().enumerate() {
            if v.len() != pd {
                return Err(LabError::Mesh(format!(
                    "vertex {i} has {} coordinates, expected {pd}",
                    v.len()
                )));
            }
            if let Domain::Sphere { .. } = self.domain {
                let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (r - 1.0).abs() > 1e-9 {
                    return Err(LabError::Mesh(format!(
                        "vertex {i} is not on the unit sphere"
                    )));
                }
            }
        }
        let nv = self.vertex_count();
        for (e, s) in self.simplices.iter().enumerate() {
            if s.len() != n + 1 {
                return Err(LabError::Mesh(format!(
                    "simplex {e} has {} vertices, expected {}",
                    s.len(),
                    n + 1
                )));
            }
            if s.iter().any(|&v| v >= nv) {
                return Err(LabError::Mesh(format!(
                    "simplex {e} references a missing vertex"
                )));
            }
            for a in 0..s.len() {
                for b in a + 1..s.len() {
                    if s[a] == s[b] {
                        return Err(LabError::Mesh(format!(
                            "simplex {e} repeats vertex {}",
                            s[a]
                        )));
                    }
                }
            }
            if n == 2 {
                if let Domain::Sphere { .. } = self.domain {
                    let (p, q, r) = (
                        &self.vertices[s[0]],
                        &self.vertices[s[1]],
                        &self.vertices[s[2]],
                    );
                    let u: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
                    let w: Vec<f64> = r.iter().zip(p).map(|(a, b)| a - b).collect();
                    let cross = [
                        u[1] * w[2] - u[2] * w[1],
                        u[2] * w[0] - u[0] * w[2],
                        u[0] * w[1] - u[1] * w[0],
                    ];
                    if cross.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-14 {
                        return Err(LabError::Mesh(format!("simplex {e} is degenerate")));
                    }
                }
            }
        }
        match n {
            1 => {
                let mut degree = vec![0usize; nv];
                for s in &self.simplices {
                    degree[s[0]] += 1;
                    degree[s[1]] += 1;
                }
                if let Some(v) = degree.iter().position(|&d| d != 2) {
                    return Err(LabError::Mesh(format!(
                        "vertex {v} has {} incident segments, expected 2",
                        degree[v]
                    )));
                }
            }
            _ => {
                if let Some((edge, count)) = self.edges().into_iter().find(|&(_, c)| c != 2) {
                    return Err(LabError::Mesh(format!(
                        "edge {edge:?} is shared by {count} triangles, expected 2"
                    )));
                }
            }
        }
        let chi = self.euler_characteristic();
        if chi != self.domain.euler_characteristic() {
            return Err(LabError::Mesh(format!(
                "Euler characteristic {chi}, expected {}",
                self.domain.euler_characteristic()
            )));
        }
        Ok(())
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        match self.domain {
            Domain::Sphere { n } => writeln!(out, "domain sphere {n}").unwrap(),
            Domain::Torus { lx, ly } => writeln!(out, "domain torus {lx:e} {ly:e}").unwrap(),
        }
        writeln!(out, "{} {}", self.vertex_count(), self.domain.point_dim()).unwrap();
        for v in &self.vertices {
            let line: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        writeln!(out, "{} {}", self.simplex_count(), self.intrinsic_dim() + 1).unwrap();
        for s in &self.simplices {
            let line: Vec<String> = s.iter().map(|i| i.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }

    /// Parses the ASCII format. Without a `domain` line the domain is
    /// inferred from the shape: segments give the circle, triangles with
    /// three coordinates give `S^2`; tori need the explicit line.
    pub fn from_ascii(text: &str) -> Result<ParamMesh> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let bad = |msg: &str| LabError::Mesh(format!("mesh file: {msg}"));
        let mut first = lines.next().ok_or_else(|| bad("empty input"))?;
        let mut domain = None;
        if let Some(rest) = first.strip_prefix("domain") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            domain = Some(match f.as_slice() {
                ["sphere", n] => Domain::Sphere {
                    n: n.parse().map_err(|_| bad("bad sphere dimension"))?,
                },
                ["torus", lx, ly] => Domain::Torus {
                    lx: lx.parse().map_err(|_| bad("bad torus width"))?,
                    ly: ly.parse().map_err(|_| bad("bad torus height"))?,
                },
                _ => return Err(bad("unrecognised domain line")),
            });
            first = lines.next().ok_or_else(|| bad("missing vertex header"))?;
        }
        let header = |line: &str| -> Result<(usize, usize)> {
            let f: Vec<usize> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| bad("bad header")))
                .collect::<Result<_>>()?;
            match f.as_slice() {
                [a, b] => Ok((*a, *b)),
                _ => Err(bad("header must hold two integers")),
            }
        };
        let (nv, dim) = header(first)?;
        let mut vertices = Vec::with_capacity(nv);
        for i in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| bad(&format!("missing vertex {i}")))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|x| {
                    x.parse()
                        .map_err(|_| bad(&format!("bad coordinate on vertex {i}")))
                })
                .collect::<Result<_>>()?;
            if v.len() != dim {
                return Err(bad(&format!("vertex {i} has {} coordinates", v.len())));
            }
            vertices.push(v);
        }
        let (ns, size) = header(lines.next().ok_or_else(|| bad("missing simplex header"))?)?;
        let mut simplices = Vec::with_capacity(ns);
        for e in 0..ns {
            let line = lines
                .next()
                .ok_or_else(|| bad(&format!("missing simplex {e}")))?;
            let s: Vec<usize> = line
                .split_whitespace()
                .map(|x| {
                    x.parse()
                        .map_err(|_| bad(&format!("bad index on simplex {e}")))
                })
                .collect::<Result<_>>()?;
            if s.len() != size {
                return Err(bad(&format!("simplex {e} has {} indices", s.len())));
            }
            simplices.push(s);
        }
        if lines.next().is_some() {
            return Err(bad("trailing content"));
        }
        let domain = match domain {
            Some(d) => d,
            None => match (size, dim) {
                (2, 2) => Domain::Sphere { n: 1 },
                (3, 3) => Domain::Sphere { n: 2 },
                _ => return Err(bad("cannot infer the domain; add a domain line")),
            },
        };
        let mesh = ParamMesh {
            domain,
            vertices,
            simplices,
            level: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn write_ascii(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ascii())?;
        Ok(())
    }

    pub fn read_ascii(path: &Path) -> Result<ParamMesh> {
        ParamMesh::from_ascii(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refinement_matches_generated_levels() {
        let ico = build_icosphere_mesh(2).refined();
        assert_eq!(ico, build_icosphere_mesh(3));
        let circle = build_mesh(Domain::Sphere { n: 1 }, 1).unwrap().refined();
        assert_eq!(circle.level, Some(2));
        assert_eq!(circle.vertex_count(), circle_segments_for_level(2));
        circle.validate().unwrap();
        let torus = build_torus_mesh(2.0, 3.0, 4, 4).unwrap().refined();
        torus.validate().unwrap();
        assert_eq!(torus.simplex_count(), 4 * 32);
        assert_eq!(torus.vertex_count(), 64);
        assert!(torus
            .vertices
            .iter()
            .all(|p| (0.0..2.0).contains(&p[0]) && (0.0..3.0).contains(&p[1])));
    }

    #[test]
    fn circle_mesh_basics() {
        let m = build_circle_mesh(4).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.simplex_count(), 4);
        m.validate().unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        let m = build_circle_mesh(12).unwrap();
        for (k, v) in m.vertices.iter().enumerate() {
            let t = crate::immersion::circle_angle(v);
            assert!((t - 2.0 * PI * k as f64 / 12.0).abs() < 1e-12);
        }
        assert!(build_circle_mesh(2).is_err());
        assert_eq!(
            circle_segments_for_level(3),
            2 * circle_segments_for_level(2)
        );
    }

    #[test]
    fn icosphere_counts() {
        let m0 = build_icosphere_mesh(0);
        assert_eq!((m0.vertex_count(), m0.simplex_count()), (12, 20));
        m0.validate().unwrap();
        for level in 1..4 {
            let m = build_icosphere_mesh(level);
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(level as u32) + 2);
            assert_eq!(m.euler_characteristic(), 2);
            m.validate().unwrap();
        }
        assert_eq!(build_icosphere_mesh(2).vertex_count(), 162);
    }

    #[test]
    fn torus_mesh_is_closed() {
        let m = build_mesh(
            Domain::Torus {
                lx: 2.0 * PI,
                ly: 2.0 * PI,
            },
            1,
        )
        .unwrap();
        m.validate().unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        let c = m.centroid(m.simplex_count() - 1);
        assert!(c[0] > 5.0 && c[1] > 5.0);
    }

    #[test]
    fn validation_catches_holes() {
        let mut m = build_icosphere_mesh(1);
        m.simplices.pop();
        assert!(matches!(m.validate(), Err(LabError::Mesh(_))));
        let mut c = build_circle_mesh(5).unwrap();
        c.simplices[0] = vec![0, 0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn ascii_round_trip() {
        for mesh in [
            build_icosphere_mesh(1),
            build_circle_mesh(7).unwrap(),
            build_torus_mesh(1.0, 2.0, 4, 5).unwrap(),
        ] {
            let text = mesh.to_ascii();
            let back = ParamMesh::from_ascii(&text).unwrap();
            assert_eq!(back.simplices, mesh.simplices);
            assert_eq!(back.domain, mesh.domain);
            for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
                for (x, y) in a.iter().zip(b) {
                    assert_eq!(x, y);
                }
            }
        }
        let plain = "4 2\n1 0\n0 1\n-1 0\n0 -1\n4 2\n0 1\n1 2\n2 3\n3 0\n";
        let m = ParamMesh::from_ascii(plain).unwrap();
        assert_eq!(m.domain, Domain::Sphere { n: 1 });
        assert!(ParamMesh::from_ascii("3 2\n1 0\n").is_err());
    }
}
