//! First-order finite elements for the Laplace-Beltrami operator of the
//! induced metric.
//!
//! Each simplex gets the Gram matrix of the Lorentz inner products of its
//! immersed edge chords. Everything below (volumes, gradients, stiffness,
//! mass) is computed from that Gram matrix alone.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::immersion::{Immersion, SharedImmersion, Translated};
use crate::mesh::ParamMesh;
use crate::minkowski::{ip, LorentzVector};
use crate::sparse::CsrMatrix;

/// Relative tolerance on the stiffness kernel and the lumped volume.
pub const TAU_ASM: f64 = 1e-10;
/// Relative tolerance on the centring of recentred immersions.
pub const TAU_CENTER: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub volume: f64,
    /// Inverse chord Gram matrix, `n x n`.
    pub gram_inv: DMatrix<f64>,
}

/// Immersed mesh: vertex positions and per-element metric data.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: ParamMesh,
    pub positions: Vec<LorentzVector>,
    pub elements: Vec<ElementGeometry>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

impl Discretization {
    pub fn new(mesh: &ParamMesh, imm: &dyn Immersion) -> Result<Self> {
        if mesh.domain != imm.domain() {
            return Err(LabError::Usage(format!(
                "mesh domain {:?} does not match immersion domain {:?}",
                mesh.domain,
                imm.domain()
            )));
        }
        let positions: Vec<LorentzVector> = mesh.vertices.par_iter().map(|p| imm.eval(p)).collect();
        let n = mesh.intrinsic_dim();
        let geoms: Vec<std::result::Result<ElementGeometry, f64>> = mesh
            .simplices
            .par_iter()
            .map(|s| {
                let base = &positions[s[0]];
                let chords: Vec<LorentzVector> =
                    s[1..].iter().map(|&v| &positions[v] - base).collect();
                let gram = DMatrix::from_fn(n, n, |i, j| ip(&chords[i], &chords[j]));
                let det = gram.determinant();
                match gram.clone().cholesky() {
                    Some(ch) if det > 0.0 => Ok(ElementGeometry {
                        volume: det.sqrt() / factorial(n),
                        gram_inv: ch.inverse(),
                    }),
                    _ => Err(det),
                }
            })
            .collect();
        let mut elements = Vec::with_capacity(geoms.len());
        for (e, g) in geoms.into_iter().enumerate() {
            match g {
                Ok(g) => elements.push(g),
                Err(det) => return Err(LabError::ElementNotSpacelike { element: e, det }),
            }
        }
        Ok(Discretization {
            mesh: mesh.clone(),
            positions,
            elements,
        })
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.mesh.intrinsic_dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.positions.first().map_or(0, |p| p.dim())
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    /// Sum of element volumes.
    pub fn volume(&self) -> f64 {
        self.elements.iter().map(|g| g.volume).sum()
    }

    /// `f(v_j) - f(v_0)` along the element's chords.
    pub fn differences(&self, e: usize, values: &[f64]) -> Vec<f64> {
        let s = &self.mesh.simplices[e];
        s[1..].iter().map(|&v| values[v] - values[s[0]]).collect()
    }

    fn gram_form(&self, e: usize, d1: &[f64], d2: &[f64]) -> f64 {
        let gi = &self.elements[e].gram_inv;
        let mut s = 0.0;
        for i in 0..d1.len() {
            for j in 0..d2.len() {
                s += d1[i] * gi[(i, j)] * d2[j];
            }
        }
        s
    }

    /// `<grad f, grad g>` of the P1 interpolants on element `e`.
    pub fn gradient_dot(&self, e: usize, f: &[f64], g: &[f64]) -> f64 {
        self.gram_form(e, &self.differences(e, f), &self.differences(e, g))
    }

    /// `sum_j eps_j |grad W_j|^2` in canonical components, which equals
    /// `sum_j <b_j,b_j> |grad <b_j, W>|^2` for every pseudo-orthonormal basis.
    pub fn signed_gradient_trace(&self, e: usize, field: &[LorentzVector]) -> f64 {
        let s = &self.mesh.simplices[e];
        let chords: Vec<LorentzVector> = s[1..].iter().map(|&v| &field[v] - &field[s[0]]).collect();
        let n = chords.len();
        let gi = &self.elements[e].gram_inv;
        let mut t = 0.0;
        for i in 0..n {
            for j in 0..n {
                t += gi[(i, j)] * ip(&chords[i], &chords[j]);
            }
        }
        t
    }

    /// Mean of vertex values over element `e`.
    pub fn element_average(&self, e: usize, values: &[f64]) -> f64 {
        let s = &self.mesh.simplices[e];
        s.iter().map(|&v| values[v]).sum::<f64>() / s.len() as f64
    }

    pub fn gradient_squared_per_element(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        Ok((0..self.elements.len())
            .into_par_iter()
            .map(|e| self.gradient_dot(e, values, values))
            .collect())
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.vertex_count() {
            return Err(LabError::Usage(format!(
                "expected {} vertex values, got {len}",
                self.vertex_count()
            )));
        }
        Ok(())
    }

    /// Standard P1 stiffness and consistent mass under the chord metric.
    pub fn assemble(&self) -> FemPencil {
        let n = self.intrinsic_dim();
        let nv = self.vertex_count();
        let mut pattern: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for s in &self.mesh.simplices {
            for &a in s {
                pattern[a].extend_from_slice(s);
            }
        }
        for row in pattern.iter_mut() {
            row.sort_unstable();
            row.dedup();
        }
        let mut stiffness = CsrMatrix::with_pattern(&pattern);
        let mut mass = CsrMatrix::with_pattern(&pattern);
        let local: Vec<(DMatrix<f64>, f64)> = self
            .elements
            .par_iter()
            .map(|g| {
                let mut d = DMatrix::zeros(n, n + 1);
                for i in 0..n {
                    d[(i, 0)] = -1.0;
                    d[(i, i + 1)] = 1.0;
                }
                let k = d.transpose() * &g.gram_inv * d * g.volume;
                (k, g.volume)
            })
            .collect();
        let mass_scale = 1.0 / ((n + 1) * (n + 2)) as f64;
        for (s, (k, vol)) in self.mesh.simplices.iter().zip(&local) {
            for (a, &va) in s.iter().enumerate() {
                for (b, &vb) in s.iter().enumerate() {
                    stiffness.add(va, vb, k[(a, b)]);
                    let w = if a == b { 2.0 } else { 1.0 };
                    mass.add(va, vb, vol * mass_scale * w);
                }
            }
        }
        let lumped = mass.row_sums();
        FemPencil {
            stiffness,
            mass,
            lumped,
        }
    }
}

/// Stiffness `K`, consistent mass `M` and lumped mass of a discretization.
#[derive(Clone, Debug)]
pub struct FemPencil {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub lumped: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PencilDiagnostics {
    pub kernel_residual: f64,
    pub asymmetry: f64,
    pub lumped_volume: f64,
}

impl FemPencil {
    pub fn order(&self) -> usize {
        self.lumped.len()
    }

    pub fn volume(&self) -> f64 {
        self.lumped.iter().sum()
    }

    /// `int f g dV` with the consistent mass.
    pub fn mass_product(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mass.quad_form(f, g)
    }

    /// `int <grad f, grad g> dV`.
    pub fn dirichlet_product(&self, f: &[f64], g: &[f64]) -> f64 {
        self.stiffness.quad_form(f, g)
    }

    /// `int <W, V> dV` (Lorentz pairing of vector fields given componentwise).
    pub fn lorentz_mass_product(&self, w: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
        w.iter()
            .zip(v)
            .enumerate()
            .map(|(j, (a, b))| if j == 0 { -1.0 } else { 1.0 } * self.mass_product(a, b))
            .sum()
    }

    /// `int |W|_E^2 dV` with the auxiliary Euclidean norm on components.
    pub fn euclid_mass_norm_sq(&self, w: &[Vec<f64>]) -> f64 {
        w.iter().map(|a| self.mass_product(a, a)).sum()
    }

    /// `int <grad W, grad V>` summed with the Lorentz signs.
    pub fn lorentz_dirichlet_product(&self, w: &[Vec<f64>], v: &[Vec<f64>]) -> f64 {
        w.iter()
            .zip(v)
            .enumerate()
            .map(|(j, (a, b))| if j == 0 { -1.0 } else { 1.0 } * self.dirichlet_product(a, b))
            .sum()
    }

    pub fn diagnostics(&self) -> PencilDiagnostics {
        let ones = vec![1.0; self.order()];
        let k1 = self.stiffness.mul_vec(&ones);
        let scale = self
            .stiffness
            .diagonal()
            .iter()
            .fold(0.0f64, |a, &b| a.max(b.abs()));
        PencilDiagnostics {
            kernel_residual: crate::sparse::norm(&k1) / scale.max(f64::MIN_POSITIVE),
            asymmetry: self.stiffness.asymmetry().max(self.mass.asymmetry()),
            lumped_volume: self.volume(),
        }
    }

    /// `-(lumped)^{-1} K values`, so that `Delta psi = n H`.
    pub fn apply_discrete_laplacian(&self, values: &[f64]) -> Vec<f64> {
        let kv = self.stiffness.mul_vec(values);
        kv.iter().zip(&self.lumped).map(|(k, l)| -k / l).collect()
    }
}

pub fn assemble_pencil(mesh: &ParamMesh, imm: &dyn Immersion) -> Result<FemPencil> {
    Ok(Discretization::new(mesh, imm)?.assemble())
}

pub fn apply_discrete_laplacian(pencil: &FemPencil, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != pencil.order() {
        return Err(LabError::Usage(
            "value count does not match pencil order".into(),
        ));
    }
    Ok(pencil.apply_discrete_laplacian(values))
}

pub fn gradient_squared_per_element(
    mesh: &ParamMesh,
    imm: &dyn Immersion,
    values: &[f64],
) -> Result<Vec<f64>> {
    Discretization::new(mesh, imm)?.gradient_squared_per_element(values)
}

/// Canonical components of a vertex field: `m` vectors of vertex values.
pub fn components(field: &[LorentzVector]) -> Vec<Vec<f64>> {
    let m = field.first().map_or(0, |v| v.dim());
    (0..m)
        .map(|j| field.iter().map(|v| v[j]).collect())
        .collect()
}

/// Vertex field from canonical components.
pub fn from_components(comps: &[Vec<f64>]) -> Vec<LorentzVector> {
    let nv = comps.first().map_or(0, |c| c.len());
    (0..nv)
        .map(|i| LorentzVector::new(comps.iter().map(|c| c[i]).collect()))
        .collect()
}

/// `psi - c / Vol` with `c = int psi dV` by lumped quadrature on `mesh`.
pub fn recenter_to_gravity_origin(imm: SharedImmersion, mesh: &ParamMesh) -> Result<Translated> {
    let disc = Discretization::new(mesh, imm.as_ref())?;
    let pencil = disc.assemble();
    let vol = pencil.volume();
    let m = imm.ambient_dim();
    let mut center = LorentzVector::zeros(m);
    for (p, w) in disc.positions.iter().zip(&pencil.lumped) {
        center.axpy(*w, p);
    }
    let offset = center.scaled(-1.0 / vol);
    let shifted = Translated::new(imm, offset);
    let mut residual = LorentzVector::zeros(m);
    for (p, w) in disc.positions.iter().zip(&pencil.lumped) {
        residual.axpy(*w, &(p + shifted.offset()));
    }
    let scale = disc
        .positions
        .iter()
        .map(|p| p.euclid_norm())
        .fold(1.0, f64::max);
    if residual
        .components()
        .iter()
        .any(|c| c.abs() > TAU_CENTER * vol * scale)
    {
        return Err(LabError::Numerical(format!(
            "recentring left residual {:?}",
            residual.components()
        )));
    }
    Ok(shifted)
}
