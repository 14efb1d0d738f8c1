//! Everything the bounds need about one immersed mesh, computed once:
//! pencil, first eigenpair, pointwise geometry at vertices and element
//! centroids, and the gravity-centre translation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::{solve_lambda1_with, EigenOptions, Spectrum};
use crate::error::{LabError, Result};
use crate::fem::{components, from_components, Discretization, FemPencil};
use crate::immersion::{shape_at, ShapeSample, SharedImmersion, Translated};
use crate::mesh::{build_mesh, ParamMesh};
use crate::minkowski::{ip, LorentzVector};
use crate::quadrature::{integrate_over_mesh, Density, IntegralResult, SampledField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureSource {
    /// The immersion's own formula.
    ClosedForm,
    /// Trace of the second fundamental form from analytic second derivatives.
    ShapeOperator,
}

#[derive(Clone, Debug, Default)]
pub struct AnalysisOptions {
    pub eigen: EigenOptions,
    /// Skip the second solve that estimates the eigenvalue error.
    pub skip_coarse_solve: bool,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct DiscretizationMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    pub vertices: usize,
    pub elements: usize,
    pub n: usize,
    pub m: usize,
}

pub struct Analysis {
    pub immersion: SharedImmersion,
    pub disc: Discretization,
    pub pencil: FemPencil,
    pub spectrum: Spectrum,
    /// `|lambda1(level) - lambda1(level - 1)|`, or four times the change
    /// under one midpoint refinement when there is no coarser level.
    pub lambda1_delta: Option<f64>,
    pub vertex_shapes: Vec<ShapeSample>,
    pub centroid_shapes: Vec<ShapeSample>,
    pub vertex_curvature: Vec<LorentzVector>,
    pub centroid_curvature: Vec<LorentzVector>,
    pub curvature_source: CurvatureSource,
    /// `-(1/Vol) int psi dV`.
    pub offset: LorentzVector,
    pub centered_positions: Vec<LorentzVector>,
    pub centroid_positions: Vec<LorentzVector>,
    pub centroid_centered_positions: Vec<LorentzVector>,
}

impl Analysis {
    pub fn new(imm: SharedImmersion, mesh: &ParamMesh) -> Result<Self> {
        Analysis::with_options(imm, mesh, &AnalysisOptions::default())
    }

    pub fn with_options(
        imm: SharedImmersion,
        mesh: &ParamMesh,
        opts: &AnalysisOptions,
    ) -> Result<Self> {
        mesh.validate()?;
        let disc = Discretization::new(mesh, imm.as_ref())?;
        let pencil = disc.assemble();
        let spectrum = solve_lambda1_with(&pencil, &opts.eigen)?;
        let lambda1_delta = match mesh.level {
            Some(level) if level >= 1 && !opts.skip_coarse_solve => {
                let coarse = build_mesh(mesh.domain, level - 1)?;
                let cp = Discretization::new(&coarse, imm.as_ref())?.assemble();
                Some((solve_lambda1_with(&cp, &opts.eigen)?.lambda1 - spectrum.lambda1).abs())
            }
            // Level 0 and meshes read from files have no coarser sibling.
            // Under second-order convergence the change from one refinement
            // is a quarter of the change from one coarsening.
            _ if !opts.skip_coarse_solve => {
                let fine = Discretization::new(&mesh.refined(), imm.as_ref())?.assemble();
                Some(
                    4.0 * (solve_lambda1_with(&fine, &opts.eigen)?.lambda1 - spectrum.lambda1)
                        .abs(),
                )
            }
            _ => None,
        };
        let shapes = |points: &[Vec<f64>]| -> Result<Vec<ShapeSample>> {
            points
                .par_iter()
                .map(|p| shape_at(imm.as_ref(), p, None))
                .collect()
        };
        let centroids: Vec<Vec<f64>> = (0..mesh.simplex_count())
            .map(|e| mesh.centroid(e))
            .collect();
        let vertex_shapes = shapes(&mesh.vertices)?;
        let centroid_shapes = shapes(&centroids)?;
        let closed = imm.mean_curvature(&mesh.vertices[0]).is_some();
        let curvature = |pts: &[Vec<f64>], sh: &[ShapeSample]| -> Vec<LorentzVector> {
            pts.iter()
                .zip(sh)
                .map(|(p, s)| {
                    imm.mean_curvature(p)
                        .unwrap_or_else(|| s.mean_curvature.clone())
                })
                .collect()
        };
        let vertex_curvature = curvature(&mesh.vertices, &vertex_shapes);
        let centroid_curvature = curvature(&centroids, &centroid_shapes);
        let vol = pencil.volume();
        let mut center = LorentzVector::zeros(imm.ambient_dim());
        for (x, w) in disc.positions.iter().zip(&pencil.lumped) {
            center.axpy(*w, x);
        }
        let offset = center.scaled(-1.0 / vol);
        let centered_positions = disc.positions.iter().map(|x| x + &offset).collect();
        let centroid_positions: Vec<LorentzVector> =
            centroid_shapes.iter().map(|s| s.position.clone()).collect();
        let centroid_centered_positions = centroid_positions.iter().map(|x| x + &offset).collect();
        Ok(Analysis {
            immersion: imm,
            disc,
            pencil,
            spectrum,
            lambda1_delta,
            vertex_shapes,
            centroid_shapes,
            vertex_curvature,
            centroid_curvature,
            curvature_source: if closed {
                CurvatureSource::ClosedForm
            } else {
                CurvatureSource::ShapeOperator
            },
            offset,
            centered_positions,
            centroid_positions,
            centroid_centered_positions,
        })
    }

    pub fn n(&self) -> usize {
        self.disc.intrinsic_dim()
    }

    pub fn m(&self) -> usize {
        self.immersion.ambient_dim()
    }

    pub fn volume(&self) -> f64 {
        self.pencil.volume()
    }

    pub fn lambda1(&self) -> f64 {
        self.spectrum.lambda1
    }

    pub fn meta(&self) -> DiscretizationMeta {
        DiscretizationMeta {
            level: self.disc.mesh.level,
            vertices: self.disc.vertex_count(),
            elements: self.disc.elements.len(),
            n: self.n(),
            m: self.m(),
        }
    }

    /// The recentred immersion `psi_hat = psi + offset`.
    pub fn centered_immersion(&self) -> Translated {
        Translated::new(self.immersion.clone(), self.offset.clone())
    }

    pub fn sampled_field(&self, centered: bool) -> SampledField<'_> {
        if centered {
            SampledField {
                vertex_positions: &self.centered_positions,
                vertex_curvature: &self.vertex_curvature,
                centroid_positions: &self.centroid_centered_positions,
                centroid_curvature: &self.centroid_curvature,
            }
        } else {
            SampledField {
                vertex_positions: &self.disc.positions,
                vertex_curvature: &self.vertex_curvature,
                centroid_positions: &self.centroid_positions,
                centroid_curvature: &self.centroid_curvature,
            }
        }
    }

    /// Componentwise `-(lumped)^{-1} K W`.
    pub fn discrete_laplacian(&self, field: &[LorentzVector]) -> Vec<LorentzVector> {
        let comps: Vec<Vec<f64>> = components(field)
            .iter()
            .map(|c| self.pencil.apply_discrete_laplacian(c))
            .collect();
        from_components(&comps)
    }

    /// `int` of a scalar known at vertices and centroids.
    pub fn integrate_sampled(&self, vertex: &[f64], centroid: &[f64]) -> Result<IntegralResult> {
        integrate_over_mesh(&self.disc, Density::VertexWithCentroid { vertex, centroid })
    }

    /// Integrates `f(shape, H)` over the mesh.
    pub fn integrate_geometry<F>(&self, f: F) -> Result<IntegralResult>
    where
        F: Fn(&ShapeSample, &LorentzVector) -> f64 + Sync,
    {
        let vertex: Vec<f64> = self
            .vertex_shapes
            .par_iter()
            .zip(&self.vertex_curvature)
            .map(|(s, h)| f(s, h))
            .collect();
        let centroid: Vec<f64> = self
            .centroid_shapes
            .par_iter()
            .zip(&self.centroid_curvature)
            .map(|(s, h)| f(s, h))
            .collect();
        self.integrate_sampled(&vertex, &centroid)
    }

    /// Integrals that are quadratic in a direction `a`:
    /// `int H H^T`, `int P_T` (tangent projector) and `int |H|^2`.
    pub fn directional_moments(&self) -> Result<DirectionalMoments> {
        let m = self.m();
        let entry = |i: usize, j: usize, tangent: bool| -> Result<f64> {
            Ok(self
                .integrate_geometry(|s, h| {
                    if tangent {
                        s.tangent.iter().map(|e| e[i] * e[j]).sum()
                    } else {
                        h[i] * h[j]
                    }
                })?
                .value)
        };
        let mut hh = DMatrix::zeros(m, m);
        let mut tt = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = entry(i, j, false)?;
                hh[(i, j)] = v;
                hh[(j, i)] = v;
                let v = entry(i, j, true)?;
                tt[(i, j)] = v;
                tt[(j, i)] = v;
            }
        }
        let h_sq = self.integrate_geometry(|_, h| ip(h, h))?;
        Ok(DirectionalMoments {
            volume: self.volume(),
            n: self.n(),
            h_sq,
            hh,
            tt,
        })
    }
}

/// Quadratic-in-`a` integrals, evaluated for many directions at once.
#[derive(Clone, Debug)]
pub struct DirectionalMoments {
    pub volume: f64,
    pub n: usize,
    pub h_sq: IntegralResult,
    /// `int H_i H_j dV` in canonical components.
    pub hh: DMatrix<f64>,
    /// `int sum_k (e_k)_i (e_k)_j dV` over the tangent frame.
    pub tt: DMatrix<f64>,
}

fn lower(a: &LorentzVector) -> Vec<f64> {
    let mut v = a.components().to_vec();
    v[0] = -v[0];
    v
}

fn quad(mat: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * mat[(i, j)] * v[j];
        }
    }
    s
}

impl DirectionalMoments {
    /// `int <H, a>^2 dV`.
    pub fn h_along(&self, a: &LorentzVector) -> f64 {
        quad(&self.hh, &lower(a))
    }

    /// `int |H_a|^2 dV = int |H|^2 + <H, a>^2 dV`.
    pub fn h_a_sq(&self, a: &LorentzVector) -> f64 {
        self.h_sq.value + self.h_along(a)
    }

    /// `int |a^T|^2 dV`.
    pub fn tangential_sq(&self, a: &LorentzVector) -> f64 {
        quad(&self.tt, &lower(a))
    }

    /// Right-hand side of the bound with the `|a^T|^2` correction.
    pub fn e_rhs(&self, a: &LorentzVector) -> f64 {
        let n = self.n as f64;
        n * self.h_a_sq(a) / (self.volume + self.tangential_sq(a) / n)
    }

    /// Right-hand side of the bound without it.
    pub fn estar_rhs(&self, a: &LorentzVector) -> f64 {
        self.n as f64 * self.h_a_sq(a) / self.volume
    }
}

/// Checks the pre-conditions shared by the test-field constructors.
pub(crate) fn require_vertex_field(an: &Analysis, field: &[LorentzVector]) -> Result<()> {
    if field.len() != an.disc.vertex_count() {
        return Err(LabError::Usage(
            "field length does not match the mesh".into(),
        ));
    }
    Ok(())
}
