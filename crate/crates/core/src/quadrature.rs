//! Integration over meshes, over `S^n` through its height function, and over
//! light-cone sections by Monte Carlo.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{LabError, Result};
use crate::fem::Discretization;
use crate::minkowski::{
    chunk_rng, ip, require_unit_timelike, sphere_volume, uniform_unit_vector, LorentzVector,
    SectionSampler, SymBilinearForm, SAMPLE_CHUNK,
};

/// Node count of the slice rule.
pub const SLICE_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    Mesh,
    Slice,
    MonteCarlo,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QuadratureParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elements: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralResult {
    pub value: f64,
    /// Non-negative error estimate. Mesh integrals of pointwise densities
    /// compare vertex averages with centroid values; vertex-only data carries
    /// only a rounding bound.
    pub error: f64,
    pub method: QuadratureMethod,
    pub params: QuadratureParams,
}

/// What to integrate over a mesh.
pub enum Density<'a> {
    PerVertex(&'a [f64]),
    PerElement(&'a [f64]),
    /// Vertex values plus values at element centroids (for the error estimate).
    VertexWithCentroid {
        vertex: &'a [f64],
        centroid: &'a [f64],
    },
    /// A function of the parameter point.
    Pointwise(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

fn mesh_result(disc: &Discretization, value: f64, error: f64) -> IntegralResult {
    IntegralResult {
        value,
        error,
        method: QuadratureMethod::Mesh,
        params: QuadratureParams {
            level: disc.mesh.level,
            elements: Some(disc.elements.len()),
            ..Default::default()
        },
    }
}

fn rounding_bound(disc: &Discretization, contributions: impl Iterator<Item = f64>) -> f64 {
    let abs: f64 = contributions.map(f64::abs).sum();
    abs * f64::EPSILON * (disc.elements.len() as f64).sqrt()
}

/// `sum_e vol_e * (element average of the density)`.
pub fn integrate_over_mesh(disc: &Discretization, density: Density<'_>) -> Result<IntegralResult> {
    let ne = disc.elements.len();
    let nv = disc.vertex_count();
    let check = |len: usize, want: usize, what: &str| {
        if len != want {
            Err(LabError::Usage(format!(
                "expected {want} {what} values, got {len}"
            )))
        } else {
            Ok(())
        }
    };
    let average = |values: &[f64]| -> Vec<f64> {
        (0..ne)
            .map(|e| disc.elements[e].volume * disc.element_average(e, values))
            .collect()
    };
    match density {
        Density::PerVertex(v) => {
            check(v.len(), nv, "vertex")?;
            let c = average(v);
            let value = c.iter().sum();
            Ok(mesh_result(
                disc,
                value,
                rounding_bound(disc, c.into_iter()),
            ))
        }
        Density::PerElement(v) => {
            check(v.len(), ne, "element")?;
            let c: Vec<f64> = v
                .iter()
                .zip(&disc.elements)
                .map(|(x, g)| x * g.volume)
                .collect();
            let value = c.iter().sum();
            Ok(mesh_result(
                disc,
                value,
                rounding_bound(disc, c.into_iter()),
            ))
        }
        Density::VertexWithCentroid { vertex, centroid } => {
            check(vertex.len(), nv, "vertex")?;
            check(centroid.len(), ne, "centroid")?;
            let value: f64 = average(vertex).iter().sum();
            let mid: f64 = centroid
                .iter()
                .zip(&disc.elements)
                .map(|(x, g)| x * g.volume)
                .sum();
            Ok(mesh_result(disc, value, (value - mid).abs()))
        }
        Density::Pointwise(f) => {
            let vertex: Vec<f64> = disc.mesh.vertices.par_iter().map(|p| f(p)).collect();
            let centroid: Vec<f64> = (0..ne)
                .into_par_iter()
                .map(|e| f(&disc.mesh.centroid(e)))
                .collect();
            integrate_over_mesh(
                disc,
                Density::VertexWithCentroid {
                    vertex: &vertex,
                    centroid: &centroid,
                },
            )
        }
    }
}

/// Nodes and weights of the Gauss-Jacobi rule for the weight
/// `(1 - t)^alpha (1 + t)^alpha` on `[-1, 1]`, by Golub-Welsch.
pub fn gauss_jacobi_symmetric(nodes: usize, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if nodes == 0 || alpha <= -1.0 {
        return Err(LabError::Usage(format!(
            "invalid Gauss-Jacobi rule ({nodes} nodes, alpha {alpha})"
        )));
    }
    let mut jm = DMatrix::zeros(nodes, nodes);
    for k in 1..nodes {
        let kf = k as f64;
        let b2 = if k == 1 && (2.0 * alpha + 1.0).abs() < 1e-14 {
            0.5
        } else {
            kf * (kf + 2.0 * alpha) / (4.0 * (kf + alpha).powi(2) - 1.0)
        };
        jm[(k - 1, k)] = b2.sqrt();
        jm[(k, k - 1)] = b2.sqrt();
    }
    let mu0 = std::f64::consts::PI.sqrt() * gamma(alpha + 1.0) / gamma(alpha + 1.5);
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..nodes)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(pairs.into_iter().unzip())
}

fn slice_sum(n: usize, nodes: usize, phi: &dyn Fn(f64) -> f64) -> Result<f64> {
    let alpha = (n as f64 - 2.0) / 2.0;
    let (t, w) = gauss_jacobi_symmetric(nodes, alpha)?;
    let mut s = 0.0;
    for (ti, wi) in t.iter().zip(&w) {
        let v = phi(*ti);
        if !v.is_finite() {
            return Err(LabError::Numerical(format!(
                "integrand is not finite at t = {ti}"
            )));
        }
        s += wi * v;
    }
    Ok(sphere_volume(n - 1) * s)
}

/// `int_{S^n} phi(t) dV = Vol(S^{n-1}) int_{-1}^{1} phi(t) (1 - t^2)^{(n-2)/2} dt`,
/// `t` being the first coordinate. The error is the gap to a rule with half
/// as many nodes.
pub fn sphere_slice_integral(n: usize, phi: &dyn Fn(f64) -> f64) -> Result<IntegralResult> {
    if n == 0 {
        return Err(LabError::Usage("slice integrals need n >= 1".into()));
    }
    let value = slice_sum(n, SLICE_NODES, phi)?;
    let coarse = slice_sum(n, SLICE_NODES / 2, phi)?;
    Ok(IntegralResult {
        value,
        error: (value - coarse).abs(),
        method: QuadratureMethod::Slice,
        params: QuadratureParams {
            nodes: Some(SLICE_NODES),
            ..Default::default()
        },
    })
}

/// Deterministic chunked mean and standard error of `f` over `samples`
/// draws; independent of the worker count.
fn chunked_mean<F>(samples: usize, seed: u64, f: F) -> Result<(f64, f64)>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    if samples < 2 {
        return Err(LabError::Usage(
            "Monte Carlo needs at least 2 samples".into(),
        ));
    }
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = SAMPLE_CHUNK.min(samples - c * SAMPLE_CHUNK);
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = partial
        .iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = samples as f64;
    let mean = s / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// `int_{S^{m-2}_a} Q(v, v) dV_a` by Monte Carlo on the section.
pub fn monte_carlo_section_integral(
    q: &SymBilinearForm,
    a: &LorentzVector,
    samples: usize,
    seed: u64,
) -> Result<IntegralResult> {
    require_unit_timelike(a)?;
    if q.dim() != a.dim() {
        return Err(LabError::Usage("form and vector dimensions differ".into()));
    }
    monte_carlo_section_mean(a, samples, seed, |v| q.eval(v, v))
}

/// `int_{S^{m-2}_a} f dV_a` by Monte Carlo on the section.
pub fn monte_carlo_section_mean<F>(
    a: &LorentzVector,
    samples: usize,
    seed: u64,
    f: F,
) -> Result<IntegralResult>
where
    F: Fn(&LorentzVector) -> f64 + Sync,
{
    let sampler = SectionSampler::new(a)?;
    let (mean, se) = chunked_mean(samples, seed, |rng| f(&sampler.sample(rng)))?;
    let vol = sphere_volume(a.dim() - 2);
    Ok(IntegralResult {
        value: vol * mean,
        error: vol * se,
        method: QuadratureMethod::MonteCarlo,
        params: QuadratureParams {
            samples: Some(samples),
            seed: Some(seed),
            ..Default::default()
        },
    })
}

/// `int_{S^{m-1}} Q(u, u) dV` over the Euclidean unit sphere of `R^m`.
pub fn monte_carlo_sphere_integral(
    q: &SymBilinearForm,
    samples: usize,
    seed: u64,
) -> Result<IntegralResult> {
    let mat = q.matrix();
    monte_carlo_sphere_mean(q.dim(), samples, seed, |u| {
        let mut s = 0.0;
        for i in 0..u.len() {
            for j in 0..u.len() {
                s += u[i] * mat[(i, j)] * u[j];
            }
        }
        s
    })
}

/// `int_{S^{m-1}} f dV` by Monte Carlo.
pub fn monte_carlo_sphere_mean<F>(
    m: usize,
    samples: usize,
    seed: u64,
    f: F,
) -> Result<IntegralResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if m < 1 {
        return Err(LabError::Usage("dimension must be positive".into()));
    }
    let (mean, se) = chunked_mean(samples, seed, |rng| f(&uniform_unit_vector(m, rng)))?;
    let vol = sphere_volume(m - 1);
    Ok(IntegralResult {
        value: vol * mean,
        error: vol * se,
        method: QuadratureMethod::MonteCarlo,
        params: QuadratureParams {
            samples: Some(samples),
            seed: Some(seed),
            ..Default::default()
        },
    })
}

/// Positions and mean curvature at vertices and element centroids.
pub struct SampledField<'a> {
    pub vertex_positions: &'a [LorentzVector],
    pub vertex_curvature: &'a [LorentzVector],
    pub centroid_positions: &'a [LorentzVector],
    pub centroid_curvature: &'a [LorentzVector],
}

fn integrate_pair<F>(
    disc: &Discretization,
    field: &SampledField<'_>,
    f: F,
) -> Result<IntegralResult>
where
    F: Fn(&LorentzVector, &LorentzVector) -> f64,
{
    let vertex: Vec<f64> = field
        .vertex_positions
        .iter()
        .zip(field.vertex_curvature)
        .map(|(x, h)| f(x, h))
        .collect();
    let centroid: Vec<f64> = field
        .centroid_positions
        .iter()
        .zip(field.centroid_curvature)
        .map(|(x, h)| f(x, h))
        .collect();
    integrate_over_mesh(
        disc,
        Density::VertexWithCentroid {
            vertex: &vertex,
            centroid: &centroid,
        },
    )
}

/// `int (1 + <psi, H>) dV`, which vanishes on closed submanifolds.
pub fn minkowski_residual(
    disc: &Discretization,
    field: &SampledField<'_>,
) -> Result<IntegralResult> {
    integrate_pair(disc, field, |x, h| 1.0 + ip(x, h))
}

/// Residuals of `int (1 + <psi_a, H_a> - <psi, a><H, a>) dV = 0` and
/// `int <psi_a, H_a> dV + Vol + (1/n) int |a^T|^2 dV = 0`. `tangential_sq`
/// holds `|a^T|^2` at the vertices followed by the centroids.
pub fn minkowski_a_identities(
    disc: &Discretization,
    field: &SampledField<'_>,
    a: &LorentzVector,
    tangential_sq: (&[f64], &[f64]),
) -> Result<(IntegralResult, IntegralResult)> {
    require_unit_timelike(a)?;
    let proj = |v: &LorentzVector| v + &a.scaled(ip(v, a));
    let first = integrate_pair(disc, field, |x, h| {
        1.0 + ip(&proj(x), &proj(h)) - ip(x, a) * ip(h, a)
    })?;
    let pair = integrate_pair(disc, field, |x, h| ip(&proj(x), &proj(h)))?;
    let at = integrate_over_mesh(
        disc,
        Density::VertexWithCentroid {
            vertex: tangential_sq.0,
            centroid: tangential_sq.1,
        },
    )?;
    let n = disc.intrinsic_dim() as f64;
    let vol = disc.volume();
    let second = IntegralResult {
        value: pair.value + vol + at.value / n,
        error: pair.error + at.error / n,
        method: QuadratureMethod::Mesh,
        params: pair.params.clone(),
    };
    Ok((first, second))
}
