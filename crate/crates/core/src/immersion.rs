//! Parametric spacelike immersions `psi: M^n -> L^m` and their pointwise
//! differential geometry.
//!
//! Parameter points are stored chart-free: unit vectors of `R^{n+1}` for
//! spheres, rectangle coordinates for flat tori. Derivatives are always taken
//! in the normal-coordinate chart centred at the evaluation point, so there
//! are no pole singularities.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::minkowski::{ip, require_unit_timelike, uniform_unit_vector, LorentzVector};

/// Pivot threshold for the normal frame construction.
pub const TAU_FRAME: f64 = 1e-8;
/// Step used by the finite-difference fallback.
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    /// Unit round sphere `S^n` in `R^{n+1}`; `n = 1` is the circle.
    Sphere { n: usize },
    /// Flat torus `[0, lx) x [0, ly)` with opposite sides identified.
    Torus { lx: f64, ly: f64 },
}

impl Domain {
    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            Domain::Sphere { n } => n,
            Domain::Torus { .. } => 2,
        }
    }

    /// Length of a stored parameter point.
    pub fn point_dim(&self) -> usize {
        match *self {
            Domain::Sphere { n } => n + 1,
            Domain::Torus { .. } => 2,
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        match *self {
            Domain::Sphere { n } => 1 + if n % 2 == 0 { 1 } else { -1 },
            Domain::Torus { .. } => 0,
        }
    }

    /// Intrinsic volume of the round/flat parameter manifold.
    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Sphere { n } => crate::minkowski::sphere_volume(n),
            Domain::Torus { lx, ly } => lx * ly,
        }
    }

    /// Orthonormal directions spanning the tangent space of the parameter
    /// manifold at `p`, expressed in point coordinates.
    pub fn tangent_frame(&self, p: &[f64]) -> Vec<Vec<f64>> {
        match *self {
            Domain::Sphere { n } => {
                let k = n + 1;
                let skip = (0..k)
                    .max_by(|&i, &j| p[i].abs().total_cmp(&p[j].abs()))
                    .unwrap_or(0);
                let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n);
                for c in (0..k).filter(|&c| c != skip) {
                    let mut w = vec![0.0; k];
                    w[c] = 1.0;
                    let d = w[c] * p[c];
                    for i in 0..k {
                        w[i] -= d * p[i];
                    }
                    for f in &frame {
                        let d: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
                        for i in 0..k {
                            w[i] -= d * f[i];
                        }
                    }
                    let r = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                    frame.push(w.into_iter().map(|x| x / r).collect());
                }
                frame
            }
            Domain::Torus { .. } => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        }
    }

    /// Point with normal coordinates `u` around `p` (exponential map).
    pub fn chart(&self, p: &[f64], frame: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
        match *self {
            Domain::Sphere { .. } => {
                let r = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                let (c, s) = if r == 0.0 {
                    (1.0, 1.0)
                } else {
                    (r.cos(), r.sin() / r)
                };
                let mut q: Vec<f64> = p.iter().map(|x| c * x).collect();
                for (ui, f) in u.iter().zip(frame) {
                    for (qk, fk) in q.iter_mut().zip(f) {
                        *qk += s * ui * fk;
                    }
                }
                q
            }
            Domain::Torus { .. } => p.iter().zip(u).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match *self {
            Domain::Sphere { n } => uniform_unit_vector(n + 1, rng),
            Domain::Torus { lx, ly } => vec![rng.random::<f64>() * lx, rng.random::<f64>() * ly],
        }
    }
}

/// A smooth map from a compact parameter manifold into `L^m` with exact
/// first and second derivatives in the normal chart at each point.
pub trait Immersion: Send + Sync {
    fn label(&self) -> String;
    fn domain(&self) -> Domain;
    fn ambient_dim(&self) -> usize;
    fn eval(&self, p: &[f64]) -> LorentzVector;
    /// `n` columns: derivative along each chart direction at `p`.
    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector>;
    /// `hessian[i][j]`: second derivative along chart directions `i, j`.
    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>>;

    /// Closed-form mean curvature vector, when the immersion knows it.
    fn mean_curvature(&self, _p: &[f64]) -> Option<LorentzVector> {
        None
    }

    fn intrinsic_dim(&self) -> usize {
        self.domain().intrinsic_dim()
    }
}

pub type SharedImmersion = Arc<dyn Immersion>;

/// Chart derivatives of `Psi|_M` given directional derivatives of an ambient
/// extension `Psi` defined on the point coordinates.
pub(crate) fn chart_derivatives<F1, F2>(
    domain: Domain,
    p: &[f64],
    first: F1,
    second: F2,
) -> (Vec<LorentzVector>, Vec<Vec<LorentzVector>>)
where
    F1: Fn(&[f64]) -> LorentzVector,
    F2: Fn(&[f64], &[f64]) -> LorentzVector,
{
    let frame = domain.tangent_frame(p);
    let n = frame.len();
    let jac: Vec<LorentzVector> = frame.iter().map(|d| first(d)).collect();
    let radial = match domain {
        Domain::Sphere { .. } => Some(first(p)),
        Domain::Torus { .. } => None,
    };
    let mut hess = vec![Vec::with_capacity(n); n];
    for i in 0..n {
        for j in 0..n {
            let mut h = second(&frame[i], &frame[j]);
            if i == j {
                if let Some(r) = &radial {
                    h -= r;
                }
            }
            hess[i].push(h);
        }
    }
    (jac, hess)
}

/// Immersion known only through point evaluation; derivatives come from
/// central differences in the normal chart with one Richardson step.
type PointMap = Arc<dyn Fn(&[f64]) -> LorentzVector + Send + Sync>;

pub struct FiniteDifferenceImmersion {
    label: String,
    domain: Domain,
    m: usize,
    map: PointMap,
}

impl FiniteDifferenceImmersion {
    pub fn new<F>(label: impl Into<String>, domain: Domain, m: usize, map: F) -> Self
    where
        F: Fn(&[f64]) -> LorentzVector + Send + Sync + 'static,
    {
        FiniteDifferenceImmersion {
            label: label.into(),
            domain,
            m,
            map: Arc::new(map),
        }
    }

    /// Wraps another immersion, discarding its analytic derivatives.
    pub fn from_immersion(imm: SharedImmersion) -> Self {
        let domain = imm.domain();
        let m = imm.ambient_dim();
        let label = format!("fd({})", imm.label());
        FiniteDifferenceImmersion::new(label, domain, m, move |p| imm.eval(p))
    }

    fn at(&self, p: &[f64], frame: &[Vec<f64>], u: &[f64]) -> LorentzVector {
        (self.map)(&self.domain.chart(p, frame, u))
    }
}

fn richardson(coarse: LorentzVector, fine: LorentzVector) -> LorentzVector {
    let mut r = fine.scaled(4.0 / 3.0);
    r.axpy(-1.0 / 3.0, &coarse);
    r
}

impl Immersion for FiniteDifferenceImmersion {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn ambient_dim(&self) -> usize {
        self.m
    }

    fn eval(&self, p: &[f64]) -> LorentzVector {
        (self.map)(p)
    }

    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector> {
        let frame = self.domain.tangent_frame(p);
        let n = frame.len();
        let central = |i: usize, h: f64| {
            let mut u = vec![0.0; n];
            u[i] = h;
            let plus = self.at(p, &frame, &u);
            u[i] = -h;
            let minus = self.at(p, &frame, &u);
            (&plus - &minus).scaled(0.5 / h)
        };
        (0..n)
            .map(|i| richardson(central(i, FD_STEP), central(i, FD_STEP / 2.0)))
            .collect()
    }

    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>> {
        let frame = self.domain.tangent_frame(p);
        let n = frame.len();
        let centre = self.eval(p);
        let second = |i: usize, j: usize, h: f64| -> LorentzVector {
            let mut u = vec![0.0; n];
            if i == j {
                u[i] = h;
                let plus = self.at(p, &frame, &u);
                u[i] = -h;
                let minus = self.at(p, &frame, &u);
                let mut d = &plus + &minus;
                d.axpy(-2.0, &centre);
                d.scaled(1.0 / (h * h))
            } else {
                let mut eval = |si: f64, sj: f64| {
                    u.iter_mut().for_each(|x| *x = 0.0);
                    u[i] = si * h;
                    u[j] = sj * h;
                    self.at(p, &frame, &u)
                };
                let pp = eval(1.0, 1.0);
                let pm = eval(1.0, -1.0);
                let mp = eval(-1.0, 1.0);
                let mm = eval(-1.0, -1.0);
                let d = &(&pp - &pm) - &(&mp - &mm);
                d.scaled(1.0 / (4.0 * h * h))
            }
        };
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| richardson(second(i, j, FD_STEP), second(i, j, FD_STEP / 2.0)))
                    .collect()
            })
            .collect()
    }
}

/// `psi + offset`.
pub struct Translated {
    inner: SharedImmersion,
    offset: LorentzVector,
}

impl Translated {
    pub fn new(inner: SharedImmersion, offset: LorentzVector) -> Self {
        Translated { inner, offset }
    }

    pub fn offset(&self) -> &LorentzVector {
        &self.offset
    }
}

impl Immersion for Translated {
    fn label(&self) -> String {
        format!("translated({})", self.inner.label())
    }
    fn domain(&self) -> Domain {
        self.inner.domain()
    }
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }
    fn eval(&self, p: &[f64]) -> LorentzVector {
        &self.inner.eval(p) + &self.offset
    }
    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector> {
        self.inner.jacobian(p)
    }
    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>> {
        self.inner.hessian(p)
    }
    fn mean_curvature(&self, p: &[f64]) -> Option<LorentzVector> {
        self.inner.mean_curvature(p)
    }
}

/// Decomposition of a unit timelike `a` along the submanifold.
#[derive(Clone, Debug)]
pub struct DirectionProjections {
    pub a: LorentzVector,
    /// `H_a = H + <H, a> a`.
    pub mean_curvature_a: LorentzVector,
    /// `a^T`, tangential part of `a`.
    pub tangential: LorentzVector,
    /// `a^N`, normal part of `a`.
    pub normal: LorentzVector,
}

/// Pointwise geometry of an immersion.
#[derive(Clone, Debug)]
pub struct ShapeSample {
    pub point: Vec<f64>,
    pub position: LorentzVector,
    /// Induced metric in the normal chart at `point`.
    pub metric: DMatrix<f64>,
    /// Orthonormal spacelike tangent frame `e_1..e_n`.
    pub tangent: Vec<LorentzVector>,
    /// Pseudo-orthonormal normal frame `e_{n+1}..e_m`.
    pub normal: Vec<LorentzVector>,
    /// `eps_j = <e_j, e_j>` for the normal frame; exactly one is `-1`.
    pub normal_signs: Vec<f64>,
    /// `II(e_a, e_b)` in the orthonormal tangent frame.
    pub second_fundamental_form: Vec<Vec<LorentzVector>>,
    pub mean_curvature: LorentzVector,
    pub projections: Option<DirectionProjections>,
}

impl ShapeSample {
    /// `sum <v,e_i> e_i + sum eps_j <v,e_j> e_j`.
    pub fn reconstruct(&self, v: &LorentzVector) -> LorentzVector {
        let mut out = self.tangential_part(v);
        out += &self.normal_part(v);
        out
    }

    pub fn tangential_part(&self, v: &LorentzVector) -> LorentzVector {
        let mut out = LorentzVector::zeros(v.dim());
        for e in &self.tangent {
            out.axpy(ip(v, e), e);
        }
        out
    }

    pub fn normal_part(&self, v: &LorentzVector) -> LorentzVector {
        let mut out = LorentzVector::zeros(v.dim());
        for (e, s) in self.normal.iter().zip(&self.normal_signs) {
            out.axpy(s * ip(v, e), e);
        }
        out
    }
}

/// Normal frame by pivoted Gram-Schmidt with the Lorentz metric on the
/// projections of the canonical basis onto the normal space.
fn normal_frame(tangent: &[LorentzVector], m: usize) -> Result<(Vec<LorentzVector>, Vec<f64>)> {
    let k = m - tangent.len();
    let mut frame: Vec<LorentzVector> = Vec::with_capacity(k);
    let mut signs: Vec<f64> = Vec::with_capacity(k);
    let mut candidates: Vec<LorentzVector> = (0..m)
        .map(|i| {
            let mut w = LorentzVector::basis(m, i);
            for e in tangent {
                let c = ip(&w, e);
                w.axpy(-c, e);
            }
            w
        })
        .collect();
    while frame.len() < k {
        let (best, s) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm_sq()))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .ok_or_else(|| LabError::Frame("ran out of candidates".into()))?;
        if s.abs() < TAU_FRAME {
            return Err(LabError::Frame(format!(
                "normal frame pivot {s:e} below threshold"
            )));
        }
        let xi = candidates.swap_remove(best).scaled(1.0 / s.abs().sqrt());
        let eps = s.signum();
        for c in candidates.iter_mut() {
            let d = eps * ip(c, &xi);
            c.axpy(-d, &xi);
        }
        frame.push(xi);
        signs.push(eps);
    }
    let negatives = signs.iter().filter(|&&s| s < 0.0).count();
    if negatives != 1 {
        return Err(LabError::Frame(format!(
            "normal bundle signature has {negatives} negative directions"
        )));
    }
    Ok((frame, signs))
}

/// Full pointwise geometry of `imm` at `p`.
pub fn shape_at(imm: &dyn Immersion, p: &[f64], a: Option<&LorentzVector>) -> Result<ShapeSample> {
    let m = imm.ambient_dim();
    let n = imm.intrinsic_dim();
    let jac = imm.jacobian(p);
    let metric = DMatrix::from_fn(n, n, |i, j| ip(&jac[i], &jac[j]));
    let chol = metric
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::NotSpacelike { point: p.to_vec() })?;
    // e = J L^{-T}, so the coefficient matrix is C = L^{-1} (rows: frame vectors)
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| LabError::NotSpacelike { point: p.to_vec() })?;
    let tangent: Vec<LorentzVector> = (0..n)
        .map(|a| {
            let mut e = LorentzVector::zeros(m);
            for i in 0..n {
                e.axpy(l_inv[(a, i)], &jac[i]);
            }
            e
        })
        .collect();
    let (normal, normal_signs) = normal_frame(&tangent, m)?;

    let hess = imm.hessian(p);
    let normal_part = |x: &LorentzVector| {
        let mut out = LorentzVector::zeros(m);
        for (e, s) in normal.iter().zip(&normal_signs) {
            out.axpy(s * ip(x, e), e);
        }
        out
    };
    let chart_ii: Vec<Vec<LorentzVector>> = hess
        .iter()
        .map(|row| row.iter().map(&normal_part).collect())
        .collect();
    let mut ii = vec![vec![LorentzVector::zeros(m); n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut acc = LorentzVector::zeros(m);
            for i in 0..n {
                for j in 0..n {
                    let c = l_inv[(a, i)] * l_inv[(b, j)];
                    if c != 0.0 {
                        acc.axpy(c, &chart_ii[i][j]);
                    }
                }
            }
            ii[a][b] = acc;
        }
    }
    let mut h = LorentzVector::zeros(m);
    for (a, row) in ii.iter().enumerate() {
        h.axpy(1.0 / n as f64, &row[a]);
    }

    let mut sample = ShapeSample {
        point: p.to_vec(),
        position: imm.eval(p),
        metric,
        tangent,
        normal,
        normal_signs,
        second_fundamental_form: ii,
        mean_curvature: h,
        projections: None,
    };
    if let Some(a) = a {
        require_unit_timelike(a)?;
        let hh = &sample.mean_curvature;
        let mut h_a = hh.clone();
        h_a.axpy(ip(hh, a), a);
        sample.projections = Some(DirectionProjections {
            a: a.clone(),
            mean_curvature_a: h_a,
            tangential: sample.tangential_part(a),
            normal: sample.normal_part(a),
        });
    }
    Ok(sample)
}

/// Worst relative disagreement between analytic derivatives and central
/// differences of `eval` at the given points.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DerivativeCheck {
    pub jacobian_rel_err: f64,
    pub hessian_rel_err: f64,
}

pub fn finite_difference_check(imm: &SharedImmersion, points: &[Vec<f64>]) -> DerivativeCheck {
    let fd = FiniteDifferenceImmersion::from_immersion(imm.clone());
    let mut jac_err: f64 = 0.0;
    let mut hess_err: f64 = 0.0;
    for p in points {
        let ja = imm.jacobian(p);
        let jf = fd.jacobian(p);
        let scale = ja
            .iter()
            .map(|v| v.euclid_norm())
            .fold(0.0, f64::max)
            .max(1e-300);
        for (x, y) in ja.iter().zip(&jf) {
            jac_err = jac_err.max((x - y).euclid_norm() / scale);
        }
        let ha = imm.hessian(p);
        let hf = fd.hessian(p);
        let scale = ha
            .iter()
            .flatten()
            .map(|v| v.euclid_norm())
            .fold(0.0, f64::max)
            .max(scale);
        for (ra, rf) in ha.iter().zip(&hf) {
            for (x, y) in ra.iter().zip(rf) {
                hess_err = hess_err.max((x - y).euclid_norm() / scale);
            }
        }
    }
    DerivativeCheck {
        jacobian_rel_err: jac_err,
        hessian_rel_err: hess_err,
    }
}

/// Angle of a circle point, in `[0, 2 pi)`.
pub fn circle_angle(p: &[f64]) -> f64 {
    let t = p[1].atan2(p[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_tangent_frame_is_orthonormal_and_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..4 {
            let d = Domain::Sphere { n };
            for _ in 0..20 {
                let p = d.random_point(&mut rng);
                let f = d.tangent_frame(&p);
                assert_eq!(f.len(), n);
                for (i, x) in f.iter().enumerate() {
                    let dp: f64 = x.iter().zip(&p).map(|(a, b)| a * b).sum();
                    assert!(dp.abs() < 1e-13);
                    for (j, y) in f.iter().enumerate() {
                        let d: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                        assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn exponential_chart_stays_on_sphere() {
        let d = Domain::Sphere { n: 2 };
        let p = vec![0.0, 0.6, 0.8];
        let f = d.tangent_frame(&p);
        let q = d.chart(&p, &f, &[0.3, -0.2]);
        let r: f64 = q.iter().map(|x| x * x).sum();
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn euler_characteristics() {
        assert_eq!(Domain::Sphere { n: 2 }.euler_characteristic(), 2);
        assert_eq!(Domain::Sphere { n: 1 }.euler_characteristic(), 0);
        assert_eq!(Domain::Torus { lx: 1.0, ly: 1.0 }.euler_characteristic(), 0);
    }

    #[test]
    fn timelike_tangent_is_rejected() {
        // (cosh, sinh) scaled so the curve is timelike: psi(t) = (2t, t, 0) on a circle chart
        let imm = FiniteDifferenceImmersion::new("timelike", Domain::Sphere { n: 1 }, 3, |p| {
            let t = circle_angle(p);
            LorentzVector::new(vec![2.0 * t.sin(), t.sin(), t.cos() * 0.1])
        });
        let err = shape_at(&imm, &[1.0, 0.0], None).unwrap_err();
        assert!(matches!(err, LabError::NotSpacelike { .. }));
    }
}
