//! Explicit immersions with closed-form derivatives and mean curvature.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::immersion::{chart_derivatives, Domain, Immersion, SharedImmersion};
use crate::minkowski::{
    ip, orthonormal_complement, require_unit_timelike, LorentzVector, TAU_UNIT,
};

/// Round `n`-sphere of radius `r` centred at `center`, inside the spacelike
/// affine hyperplane through `center` orthogonal to the unit timelike `a`.
pub struct RoundSphere {
    n: usize,
    r: f64,
    center: LorentzVector,
    a: LorentzVector,
    frame: Vec<LorentzVector>,
}

pub fn gallery_round_sphere(
    n: usize,
    r: f64,
    center: LorentzVector,
    a: LorentzVector,
) -> Result<RoundSphere> {
    require_unit_timelike(&a)?;
    if r <= 0.0 || !r.is_finite() {
        return Err(LabError::Domain(format!(
            "radius must be positive, got {r}"
        )));
    }
    if n == 0 {
        return Err(LabError::Domain(
            "intrinsic dimension must be at least 1".into(),
        ));
    }
    if center.dim() != a.dim() {
        return Err(LabError::Usage(
            "center and a have different dimensions".into(),
        ));
    }
    if a.dim() < n + 2 {
        return Err(LabError::Domain(format!(
            "a round {n}-sphere needs m >= {}, got m = {}",
            n + 2,
            a.dim()
        )));
    }
    let mut frame = orthonormal_complement(&a)?;
    frame.truncate(n + 1);
    Ok(RoundSphere {
        n,
        r,
        center,
        a,
        frame,
    })
}

impl RoundSphere {
    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn normal_direction(&self) -> &LorentzVector {
        &self.a
    }
}

impl Immersion for RoundSphere {
    fn label(&self) -> String {
        format!("round-sphere(n={}, r={})", self.n, self.r)
    }
    fn domain(&self) -> Domain {
        Domain::Sphere { n: self.n }
    }
    fn ambient_dim(&self) -> usize {
        self.a.dim()
    }
    fn eval(&self, p: &[f64]) -> LorentzVector {
        let mut x = self.center.clone();
        for (c, b) in p.iter().zip(&self.frame) {
            x.axpy(self.r * c, b);
        }
        x
    }
    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector> {
        self.derivatives(p).0
    }
    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>> {
        self.derivatives(p).1
    }
    fn mean_curvature(&self, p: &[f64]) -> Option<LorentzVector> {
        let x = &self.eval(p) - &self.center;
        Some(x.scaled(-1.0 / (self.r * self.r)))
    }
}

impl RoundSphere {
    fn derivatives(&self, p: &[f64]) -> (Vec<LorentzVector>, Vec<Vec<LorentzVector>>) {
        let m = self.a.dim();
        let lin = |d: &[f64]| {
            let mut x = LorentzVector::zeros(m);
            for (c, b) in d.iter().zip(&self.frame) {
                x.axpy(self.r * c, b);
            }
            x
        };
        chart_derivatives(self.domain(), p, lin, |_, _| LorentzVector::zeros(m))
    }
}

/// `Psi(t, y) = (cosh t, sinh t, y)` restricted to the unit sphere `S^n`;
/// an isometric embedding into `L^{n+2}`.
pub struct Counterexample {
    n: usize,
}

pub fn gallery_counterexample(n: usize) -> Result<Counterexample> {
    if n == 0 {
        return Err(LabError::Domain("n must be at least 1".into()));
    }
    Ok(Counterexample { n })
}

impl Counterexample {
    /// The normal fields `N1 = (cosh t, sinh t, 0)` and `N2 = (t sinh t, t cosh t, y)`.
    pub fn normal_fields(&self, p: &[f64]) -> (LorentzVector, LorentzVector) {
        let t = p[0];
        let m = self.n + 2;
        let mut n1 = LorentzVector::zeros(m);
        n1[0] = t.cosh();
        n1[1] = t.sinh();
        let mut n2 = LorentzVector::zeros(m);
        n2[0] = t * t.sinh();
        n2[1] = t * t.cosh();
        for (k, y) in p[1..].iter().enumerate() {
            n2[k + 2] = *y;
        }
        (n1, n2)
    }

    /// `||H||^2 = 1 - (1 - t^2)^2 / n^2`.
    pub fn mean_curvature_sq(&self, p: &[f64]) -> f64 {
        let s = 1.0 - p[0] * p[0];
        1.0 - s * s / (self.n * self.n) as f64
    }

    /// `Delta psi + n psi`, obtained from the Beltrami equation.
    pub fn eigen_defect(&self, p: &[f64]) -> LorentzVector {
        let t = p[0];
        let n = self.n as f64;
        let mut v = LorentzVector::zeros(self.n + 2);
        v[0] = (1.0 + n - t * t) * t.cosh() - n * t * t.sinh();
        v[1] = (1.0 + n - t * t) * t.sinh() - n * t * t.cosh();
        v
    }
}

impl Immersion for Counterexample {
    fn label(&self) -> String {
        format!("counterexample(n={})", self.n)
    }
    fn domain(&self) -> Domain {
        Domain::Sphere { n: self.n }
    }
    fn ambient_dim(&self) -> usize {
        self.n + 2
    }
    fn eval(&self, p: &[f64]) -> LorentzVector {
        let mut c = Vec::with_capacity(self.n + 2);
        c.push(p[0].cosh());
        c.push(p[0].sinh());
        c.extend_from_slice(&p[1..]);
        LorentzVector::new(c)
    }
    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector> {
        self.derivatives(p).0
    }
    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>> {
        self.derivatives(p).1
    }
    fn mean_curvature(&self, p: &[f64]) -> Option<LorentzVector> {
        let (n1, n2) = self.normal_fields(p);
        let mut h = n1.scaled((1.0 - p[0] * p[0]) / self.n as f64);
        h -= &n2;
        Some(h)
    }
}

impl Counterexample {
    fn derivatives(&self, p: &[f64]) -> (Vec<LorentzVector>, Vec<Vec<LorentzVector>>) {
        let t = p[0];
        let m = self.n + 2;
        let first = |d: &[f64]| {
            let mut c = Vec::with_capacity(m);
            c.push(t.sinh() * d[0]);
            c.push(t.cosh() * d[0]);
            c.extend_from_slice(&d[1..]);
            LorentzVector::new(c)
        };
        let second = |d: &[f64], e: &[f64]| {
            let mut v = LorentzVector::zeros(m);
            v[0] = t.cosh() * d[0] * e[0];
            v[1] = t.sinh() * d[0] * e[0];
            v
        };
        chart_derivatives(self.domain(), p, first, second)
    }
}

/// Plane curve `alpha: I -> L^2` used to build cylinders.
pub trait PlaneCurve: Send + Sync {
    fn label(&self) -> String;
    fn point(&self, t: f64) -> [f64; 2];
    fn velocity(&self, t: f64) -> [f64; 2];
    fn acceleration(&self, t: f64) -> [f64; 2];
}

fn ip2(u: [f64; 2], v: [f64; 2]) -> f64 {
    -u[0] * v[0] + u[1] * v[1]
}

/// `alpha(t) = (cosh(k t), sinh(k t)) / k`: unit spacelike with
/// `<alpha'', alpha''> = -k^2`. `k = 1` reproduces the counterexample.
#[derive(Clone, Copy, Debug)]
pub struct Hyperbola {
    pub curvature: f64,
}

impl PlaneCurve for Hyperbola {
    fn label(&self) -> String {
        format!("hyperbola(k={})", self.curvature)
    }
    fn point(&self, t: f64) -> [f64; 2] {
        let k = self.curvature;
        [(k * t).cosh() / k, (k * t).sinh() / k]
    }
    fn velocity(&self, t: f64) -> [f64; 2] {
        let k = self.curvature;
        [(k * t).sinh(), (k * t).cosh()]
    }
    fn acceleration(&self, t: f64) -> [f64; 2] {
        let k = self.curvature;
        [k * (k * t).cosh(), k * (k * t).sinh()]
    }
}

/// `alpha(t) = t (sinh b, cosh b)`, a spacelike geodesic of rapidity `b`.
#[derive(Clone, Copy, Debug)]
pub struct SpacelikeLine {
    pub rapidity: f64,
}

impl PlaneCurve for SpacelikeLine {
    fn label(&self) -> String {
        format!("line(b={})", self.rapidity)
    }
    fn point(&self, t: f64) -> [f64; 2] {
        [t * self.rapidity.sinh(), t * self.rapidity.cosh()]
    }
    fn velocity(&self, _t: f64) -> [f64; 2] {
        [self.rapidity.sinh(), self.rapidity.cosh()]
    }
    fn acceleration(&self, _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }
}

/// `psi_alpha(t, y) = (alpha(t), y)` restricted to `S^n`, in `L^{n+2}`.
pub struct CylinderCurve {
    n: usize,
    curve: Arc<dyn PlaneCurve>,
}

pub fn gallery_cylinder_curve(n: usize, curve: Arc<dyn PlaneCurve>) -> Result<CylinderCurve> {
    if n == 0 {
        return Err(LabError::Domain("n must be at least 1".into()));
    }
    for i in 0..=200 {
        let t = -1.0 + i as f64 / 100.0;
        let v = curve.velocity(t);
        let s = ip2(v, v);
        if (s - 1.0).abs() > TAU_UNIT.max(1e-12) * 10.0 {
            return Err(LabError::Domain(format!(
                "curve {} is not unit-speed spacelike at t = {t}: <a',a'> = {s}",
                curve.label()
            )));
        }
    }
    Ok(CylinderCurve { n, curve })
}

impl CylinderCurve {
    /// `1 + (1 - t^2)^2 / n^2 * <alpha'', alpha''>`.
    pub fn mean_curvature_sq(&self, p: &[f64]) -> f64 {
        let t = p[0];
        let acc = self.curve.acceleration(t);
        let s = 1.0 - t * t;
        1.0 + s * s / (self.n * self.n) as f64 * ip2(acc, acc)
    }

    pub fn curve(&self) -> &Arc<dyn PlaneCurve> {
        &self.curve
    }

    fn derivatives(&self, p: &[f64]) -> (Vec<LorentzVector>, Vec<Vec<LorentzVector>>) {
        let t = p[0];
        let m = self.n + 2;
        let vel = self.curve.velocity(t);
        let acc = self.curve.acceleration(t);
        let first = |d: &[f64]| {
            let mut c = Vec::with_capacity(m);
            c.push(vel[0] * d[0]);
            c.push(vel[1] * d[0]);
            c.extend_from_slice(&d[1..]);
            LorentzVector::new(c)
        };
        let second = |d: &[f64], e: &[f64]| {
            let mut v = LorentzVector::zeros(m);
            v[0] = acc[0] * d[0] * e[0];
            v[1] = acc[1] * d[0] * e[0];
            v
        };
        chart_derivatives(self.domain(), p, first, second)
    }
}

impl Immersion for CylinderCurve {
    fn label(&self) -> String {
        format!("cylinder(n={}, {})", self.n, self.curve.label())
    }
    fn domain(&self) -> Domain {
        Domain::Sphere { n: self.n }
    }
    fn ambient_dim(&self) -> usize {
        self.n + 2
    }
    fn eval(&self, p: &[f64]) -> LorentzVector {
        let a = self.curve.point(p[0]);
        let mut c = vec![a[0], a[1]];
        c.extend_from_slice(&p[1..]);
        LorentzVector::new(c)
    }
    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector> {
        self.derivatives(p).0
    }
    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>> {
        self.derivatives(p).1
    }
    fn mean_curvature(&self, p: &[f64]) -> Option<LorentzVector> {
        // H = -(t alpha', y) + (1 - t^2)/n (alpha'', 0)
        let t = p[0];
        let vel = self.curve.velocity(t);
        let acc = self.curve.acceleration(t);
        let w = (1.0 - t * t) / self.n as f64;
        let mut c = vec![-t * vel[0] + w * acc[0], -t * vel[1] + w * acc[1]];
        c.extend(p[1..].iter().map(|y| -y));
        Some(LorentzVector::new(c))
    }
}

/// Round Euclidean sphere of radius `r` lifted into the lightlike hyperplane
/// `x_1 = x_m` of `L^{n+3}`: `psi = (f, r p, f)` with
/// `f(p) = beta p_0 + gamma p_1^2`. The metric is that of the Euclidean sphere.
pub struct LightlikeLift {
    n: usize,
    r: f64,
    beta: f64,
    gamma: f64,
}

pub fn gallery_lightlike_lift(n: usize, r: f64, beta: f64, gamma: f64) -> Result<LightlikeLift> {
    if n == 0 || r <= 0.0 {
        return Err(LabError::Domain("need n >= 1 and r > 0".into()));
    }
    Ok(LightlikeLift { n, r, beta, gamma })
}

impl LightlikeLift {
    /// Lightlike normal `l = (1, 0, ..., 0, 1)` of the hyperplane `x_1 = x_m`.
    pub fn hyperplane_normal(&self) -> LorentzVector {
        let m = self.n + 3;
        let mut l = LorentzVector::zeros(m);
        l[0] = 1.0;
        l[m - 1] = 1.0;
        l
    }

    fn height(&self, p: &[f64]) -> f64 {
        self.beta * p[0] + self.gamma * p[1] * p[1]
    }

    /// Laplacian of the height function on the sphere of radius `r`.
    fn height_laplacian(&self, p: &[f64]) -> f64 {
        let n = self.n as f64;
        let lap_unit = -n * self.beta * p[0] + self.gamma * (2.0 - 2.0 * (n + 1.0) * p[1] * p[1]);
        lap_unit / (self.r * self.r)
    }

    fn derivatives(&self, p: &[f64]) -> (Vec<LorentzVector>, Vec<Vec<LorentzVector>>) {
        let m = self.n + 3;
        let first = |d: &[f64]| {
            let df = self.beta * d[0] + 2.0 * self.gamma * p[1] * d[1];
            let mut c = Vec::with_capacity(m);
            c.push(df);
            c.extend(d.iter().map(|x| self.r * x));
            c.push(df);
            LorentzVector::new(c)
        };
        let second = |d: &[f64], e: &[f64]| {
            let mut v = LorentzVector::zeros(m);
            let s = 2.0 * self.gamma * d[1] * e[1];
            v[0] = s;
            v[m - 1] = s;
            v
        };
        chart_derivatives(self.domain(), p, first, second)
    }
}

impl Immersion for LightlikeLift {
    fn label(&self) -> String {
        format!(
            "lightlike-lift(n={}, r={}, beta={}, gamma={})",
            self.n, self.r, self.beta, self.gamma
        )
    }
    fn domain(&self) -> Domain {
        Domain::Sphere { n: self.n }
    }
    fn ambient_dim(&self) -> usize {
        self.n + 3
    }
    fn eval(&self, p: &[f64]) -> LorentzVector {
        let f = self.height(p);
        let mut c = Vec::with_capacity(self.n + 3);
        c.push(f);
        c.extend(p.iter().map(|x| self.r * x));
        c.push(f);
        LorentzVector::new(c)
    }
    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector> {
        self.derivatives(p).0
    }
    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>> {
        self.derivatives(p).1
    }
    fn mean_curvature(&self, p: &[f64]) -> Option<LorentzVector> {
        let lf = self.height_laplacian(p) / self.n as f64;
        let mut c = Vec::with_capacity(self.n + 3);
        c.push(lf);
        c.extend(p.iter().map(|x| -x / self.r));
        c.push(lf);
        Some(LorentzVector::new(c))
    }
}

/// Product torus `S^1(r1) x S^1(r2)` in the spacelike hyperplane `x_1 = 0` of `L^5`.
pub struct ProductTorus {
    r1: f64,
    r2: f64,
}

pub fn gallery_product_torus(r1: f64, r2: f64) -> Result<ProductTorus> {
    if r1 <= 0.0 || r2 <= 0.0 {
        return Err(LabError::Domain("torus radii must be positive".into()));
    }
    Ok(ProductTorus { r1, r2 })
}

impl ProductTorus {
    fn derivatives(&self, p: &[f64]) -> (Vec<LorentzVector>, Vec<Vec<LorentzVector>>) {
        let (u, v) = (p[0], p[1]);
        let first = |d: &[f64]| {
            LorentzVector::new(vec![
                0.0,
                -self.r1 * u.sin() * d[0],
                self.r1 * u.cos() * d[0],
                -self.r2 * v.sin() * d[1],
                self.r2 * v.cos() * d[1],
            ])
        };
        let second = |d: &[f64], e: &[f64]| {
            LorentzVector::new(vec![
                0.0,
                -self.r1 * u.cos() * d[0] * e[0],
                -self.r1 * u.sin() * d[0] * e[0],
                -self.r2 * v.cos() * d[1] * e[1],
                -self.r2 * v.sin() * d[1] * e[1],
            ])
        };
        chart_derivatives(self.domain(), p, first, second)
    }
}

impl Immersion for ProductTorus {
    fn label(&self) -> String {
        format!("product-torus(r1={}, r2={})", self.r1, self.r2)
    }
    fn domain(&self) -> Domain {
        Domain::Torus {
            lx: 2.0 * std::f64::consts::PI,
            ly: 2.0 * std::f64::consts::PI,
        }
    }
    fn ambient_dim(&self) -> usize {
        5
    }
    fn eval(&self, p: &[f64]) -> LorentzVector {
        let (u, v) = (p[0], p[1]);
        LorentzVector::new(vec![
            0.0,
            self.r1 * u.cos(),
            self.r1 * u.sin(),
            self.r2 * v.cos(),
            self.r2 * v.sin(),
        ])
    }
    fn jacobian(&self, p: &[f64]) -> Vec<LorentzVector> {
        self.derivatives(p).0
    }
    fn hessian(&self, p: &[f64]) -> Vec<Vec<LorentzVector>> {
        self.derivatives(p).1
    }
    fn mean_curvature(&self, p: &[f64]) -> Option<LorentzVector> {
        let (u, v) = (p[0], p[1]);
        Some(LorentzVector::new(vec![
            0.0,
            -0.5 * u.cos() / self.r1,
            -0.5 * u.sin() / self.r1,
            -0.5 * v.cos() / self.r2,
            -0.5 * v.sin() / self.r2,
        ]))
    }
}

/// Declarative description of a gallery immersion, as read from a JSON file:
///
/// ```json
/// { "item": "cylinder-curve", "n": 2, "curvature": 0.5 }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "kebab-case")]
pub enum ImmersionSpec {
    RoundSphere {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
        /// Ambient dimension, defaults to `n + 2`.
        #[serde(default)]
        m: Option<usize>,
        #[serde(default)]
        center: Option<Vec<f64>>,
        /// Unit timelike normal of the hyperplane, defaults to the time axis.
        #[serde(default)]
        normal: Option<Vec<f64>>,
    },
    Counterexample {
        n: usize,
    },
    CylinderCurve {
        n: usize,
        #[serde(default = "half")]
        curvature: f64,
    },
    CylinderLine {
        n: usize,
        #[serde(default)]
        rapidity: f64,
    },
    LightlikeLift {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "half")]
        beta: f64,
        #[serde(default = "point_three")]
        gamma: f64,
    },
    ProductTorus {
        #[serde(default = "inv_sqrt2")]
        r1: f64,
        #[serde(default = "inv_sqrt2")]
        r2: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn point_three() -> f64 {
    0.3
}
fn inv_sqrt2() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

impl fmt::Display for ImmersionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            serde_json::to_string(self).map_err(|_| fmt::Error)?
        )
    }
}

impl ImmersionSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn build(&self) -> Result<SharedImmersion> {
        Ok(match self {
            ImmersionSpec::RoundSphere {
                n,
                radius,
                m,
                center,
                normal,
            } => {
                let m = m.unwrap_or(n + 2);
                let a = normal
                    .clone()
                    .map(LorentzVector::new)
                    .unwrap_or_else(|| LorentzVector::time_axis(m));
                let c = center
                    .clone()
                    .map(LorentzVector::new)
                    .unwrap_or_else(|| LorentzVector::zeros(m));
                Arc::new(gallery_round_sphere(*n, *radius, c, a)?)
            }
            ImmersionSpec::Counterexample { n } => Arc::new(gallery_counterexample(*n)?),
            ImmersionSpec::CylinderCurve { n, curvature } => {
                if *curvature <= 0.0 {
                    return Err(LabError::Domain(
                        "hyperbola curvature must be positive".into(),
                    ));
                }
                Arc::new(gallery_cylinder_curve(
                    *n,
                    Arc::new(Hyperbola {
                        curvature: *curvature,
                    }),
                )?)
            }
            ImmersionSpec::CylinderLine { n, rapidity } => Arc::new(gallery_cylinder_curve(
                *n,
                Arc::new(SpacelikeLine {
                    rapidity: *rapidity,
                }),
            )?),
            ImmersionSpec::LightlikeLift {
                n,
                radius,
                beta,
                gamma,
            } => Arc::new(gallery_lightlike_lift(*n, *radius, *beta, *gamma)?),
            ImmersionSpec::ProductTorus { r1, r2 } => Arc::new(gallery_product_torus(*r1, *r2)?),
        })
    }

    /// Exact first eigenvalue when it is known in closed form.
    pub fn exact_lambda1(&self) -> Option<f64> {
        match *self {
            ImmersionSpec::RoundSphere { n, radius, .. } => Some(n as f64 / (radius * radius)),
            ImmersionSpec::Counterexample { n }
            | ImmersionSpec::CylinderCurve { n, .. }
            | ImmersionSpec::CylinderLine { n, .. } => Some(n as f64),
            ImmersionSpec::LightlikeLift { n, radius, .. } => Some(n as f64 / (radius * radius)),
            ImmersionSpec::ProductTorus { r1, r2 } => Some((1.0 / (r1 * r1)).min(1.0 / (r2 * r2))),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match *self {
            ImmersionSpec::RoundSphere { n, .. }
            | ImmersionSpec::Counterexample { n }
            | ImmersionSpec::CylinderCurve { n, .. }
            | ImmersionSpec::CylinderLine { n, .. }
            | ImmersionSpec::LightlikeLift { n, .. } => n,
            ImmersionSpec::ProductTorus { .. } => 2,
        }
    }

    /// A distinguished unit timelike direction: the hyperplane normal for
    /// immersions in spacelike hyperplanes, the time axis otherwise.
    pub fn reference_direction(&self) -> Result<LorentzVector> {
        let imm = self.build()?;
        Ok(match self {
            ImmersionSpec::RoundSphere {
                normal: Some(a), ..
            } => LorentzVector::new(a.clone()),
            _ => LorentzVector::time_axis(imm.ambient_dim()),
        })
    }
}

/// `<alpha'', alpha''>` of a plane curve.
pub fn curve_acceleration_sq(curve: &dyn PlaneCurve, t: f64) -> f64 {
    let a = curve.acceleration(t);
    ip2(a, a)
}

/// Lorentz inner product of two full vectors; re-exported for gallery users.
pub fn lorentz(u: &LorentzVector, v: &LorentzVector) -> f64 {
    ip(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{finite_difference_check, shape_at};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn points(domain: Domain, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| domain.random_point(&mut rng)).collect()
    }

    fn all_items() -> Vec<SharedImmersion> {
        let specs = [
            ImmersionSpec::RoundSphere {
                n: 2,
                radius: 1.3,
                m: Some(5),
                center: Some(vec![0.2, 1.0, -0.5, 0.0, 0.3]),
                normal: Some(LorentzVector::boost(0.7, &[0.0, 0.6, 0.0, 0.8]).into_components()),
            },
            ImmersionSpec::Counterexample { n: 1 },
            ImmersionSpec::Counterexample { n: 2 },
            ImmersionSpec::Counterexample { n: 3 },
            ImmersionSpec::CylinderCurve {
                n: 2,
                curvature: 0.5,
            },
            ImmersionSpec::CylinderLine {
                n: 2,
                rapidity: 0.4,
            },
            ImmersionSpec::LightlikeLift {
                n: 2,
                radius: 1.0,
                beta: 0.5,
                gamma: 0.3,
            },
            ImmersionSpec::LightlikeLift {
                n: 1,
                radius: 2.0,
                beta: 0.5,
                gamma: 0.3,
            },
            ImmersionSpec::ProductTorus { r1: 0.7, r2: 1.1 },
        ];
        specs.iter().map(|s| s.build().unwrap()).collect()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for imm in all_items() {
            let pts = points(imm.domain(), 100, 9);
            let chk = finite_difference_check(&imm, &pts);
            assert!(chk.jacobian_rel_err <= 1e-6, "{}: {chk:?}", imm.label());
            assert!(chk.hessian_rel_err <= 1e-4, "{}: {chk:?}", imm.label());
        }
    }

    #[test]
    fn shape_mean_curvature_matches_closed_forms() {
        for imm in all_items() {
            for p in points(imm.domain(), 50, 4) {
                let s = shape_at(imm.as_ref(), &p, None).unwrap();
                let h = imm.mean_curvature(&p).unwrap();
                assert!(
                    (&s.mean_curvature - &h).euclid_norm() < 1e-10 * (1.0 + h.euclid_norm()),
                    "{} at {p:?}: {:?} vs {:?}",
                    imm.label(),
                    s.mean_curvature,
                    h
                );
            }
        }
    }

    #[test]
    fn frames_are_pseudo_orthonormal_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for imm in all_items() {
            let m = imm.ambient_dim();
            for p in points(imm.domain(), 30, 5) {
                let a = crate::minkowski::random_unit_timelike(m, 2.0, &mut rng);
                let s = shape_at(imm.as_ref(), &p, Some(&a)).unwrap();
                for (i, x) in s.tangent.iter().enumerate() {
                    for (j, y) in s.tangent.iter().enumerate() {
                        assert!((ip(x, y) - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                    }
                    for xi in &s.normal {
                        assert!(ip(x, xi).abs() < 1e-10);
                    }
                }
                for (i, x) in s.normal.iter().enumerate() {
                    for (j, y) in s.normal.iter().enumerate() {
                        let d = if i == j { s.normal_signs[i] } else { 0.0 };
                        assert!((ip(x, y) - d).abs() < 1e-9);
                    }
                }
                assert_eq!(s.normal_signs.iter().filter(|&&e| e < 0.0).count(), 1);
                let v = crate::minkowski::random_unit_timelike(m, 1.0, &mut rng).scaled(3.0);
                assert!((&s.reconstruct(&v) - &v).euclid_norm() < 1e-9 * v.euclid_norm());
                let pr = s.projections.as_ref().unwrap();
                assert!(
                    (&(&pr.tangential + &pr.normal) - &a).euclid_norm() < 1e-9 * a.euclid_norm()
                );
                let expected = &s.mean_curvature + &a.scaled(ip(&s.mean_curvature, &a));
                assert!((&pr.mean_curvature_a - &expected).euclid_norm() < 1e-12);
                assert!(
                    ip(&pr.mean_curvature_a, &a).abs() < 1e-9 * (1.0 + a.euclid_norm().powi(2))
                );
            }
        }
    }

    #[test]
    fn counterexample_normals_and_curvature() {
        let ce = gallery_counterexample(2).unwrap();
        for p in points(ce.domain(), 50, 2) {
            let (n1, n2) = ce.normal_fields(&p);
            assert!((ip(&n1, &n1) + 1.0).abs() < 1e-12);
            assert!((ip(&n2, &n2) - 1.0).abs() < 1e-12);
            assert!(ip(&n1, &n2).abs() < 1e-12);
            let h = ce.mean_curvature(&p).unwrap();
            assert!((ip(&h, &h) - ce.mean_curvature_sq(&p)).abs() < 1e-12);
            // isometric: chart metric is the identity
            let s = shape_at(&ce, &p, None).unwrap();
            assert!((&s.metric - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-10);
        }
        assert!((ce.mean_curvature_sq(&[0.0, 1.0, 0.0]) - 0.75).abs() < 1e-15);
        assert!((ce.mean_curvature_sq(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((ce.mean_curvature_sq(&[-1.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn round_sphere_geometry() {
        let a = LorentzVector::time_axis(4);
        let c = LorentzVector::zeros(4);
        let s = gallery_round_sphere(2, 1.0, c.clone(), a.clone()).unwrap();
        for p in points(s.domain(), 30, 8) {
            let x = s.eval(&p);
            assert!(ip(&a, &(&x - &c)).abs() < 1e-14);
            let sh = shape_at(&s, &p, None).unwrap();
            assert!((&sh.metric - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-12);
            let h = sh.mean_curvature;
            assert!((ip(&h, &h) - 1.0).abs() < 1e-10);
            assert!((&h + &x).euclid_norm() < 1e-10);
        }
        let s2 = gallery_round_sphere(2, 2.0, c, a).unwrap();
        let sh = shape_at(&s2, &[0.0, 0.0, 1.0], None).unwrap();
        assert!((&sh.metric - nalgebra::DMatrix::identity(2, 2) * 4.0).amax() < 1e-12);
        assert!((ip(&sh.mean_curvature, &sh.mean_curvature) - 0.25).abs() < 1e-12);
        assert!(
            gallery_round_sphere(2, 1.0, LorentzVector::zeros(4), LorentzVector::basis(4, 1))
                .is_err()
        );
    }

    #[test]
    fn cylinder_curvature_formula() {
        let cyl = gallery_cylinder_curve(2, Arc::new(Hyperbola { curvature: 0.5 })).unwrap();
        for p in points(cyl.domain(), 50, 3) {
            let h = shape_at(&cyl, &p, None).unwrap().mean_curvature;
            assert!((ip(&h, &h) - cyl.mean_curvature_sq(&p)).abs() < 1e-10);
            if p[0].abs() < 0.999 {
                assert!(cyl.mean_curvature_sq(&p) < 1.0);
            }
        }
        for i in 0..=20 {
            let t = -1.0 + 0.1 * i as f64;
            assert!(curve_acceleration_sq(cyl.curve().as_ref(), t) <= 0.0);
        }
        let line = gallery_cylinder_curve(2, Arc::new(SpacelikeLine { rapidity: 0.3 })).unwrap();
        for p in points(line.domain(), 20, 4) {
            assert!((line.mean_curvature_sq(&p) - 1.0).abs() < 1e-15);
            let h = shape_at(&line, &p, None).unwrap().mean_curvature;
            assert!((ip(&h, &h) - 1.0).abs() < 1e-10);
            // image lies in the spacelike hyperplane orthogonal to (cosh b, sinh b)
            let a = LorentzVector::new(vec![0.3f64.cosh(), 0.3f64.sinh(), 0.0, 0.0]);
            assert!(ip(&line.eval(&p), &a).abs() < 1e-14);
        }
        struct Timelike;
        impl PlaneCurve for Timelike {
            fn label(&self) -> String {
                "timelike".into()
            }
            fn point(&self, t: f64) -> [f64; 2] {
                [t.sinh(), t.cosh()]
            }
            fn velocity(&self, t: f64) -> [f64; 2] {
                [t.cosh(), t.sinh()]
            }
            fn acceleration(&self, t: f64) -> [f64; 2] {
                [t.sinh(), t.cosh()]
            }
        }
        assert!(matches!(
            gallery_cylinder_curve(2, Arc::new(Timelike)),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn hyperbola_of_unit_curvature_is_the_counterexample() {
        let cyl = gallery_cylinder_curve(2, Arc::new(Hyperbola { curvature: 1.0 })).unwrap();
        let ce = gallery_counterexample(2).unwrap();
        for p in points(ce.domain(), 20, 6) {
            assert!((&cyl.eval(&p) - &ce.eval(&p)).euclid_norm() < 1e-14);
            let d = &cyl.mean_curvature(&p).unwrap() - &ce.mean_curvature(&p).unwrap();
            assert!(d.euclid_norm() < 1e-14);
        }
    }

    #[test]
    fn lightlike_lift_is_isometric_with_euclidean_curvature() {
        let lift = gallery_lightlike_lift(2, 1.0, 0.5, 0.3).unwrap();
        let l = lift.hyperplane_normal();
        assert_eq!(ip(&l, &l), 0.0);
        for p in points(lift.domain(), 30, 12) {
            assert!(ip(&lift.eval(&p), &l).abs() < 1e-14);
            let s = shape_at(&lift, &p, None).unwrap();
            assert!((&s.metric - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-12);
            assert!((ip(&s.mean_curvature, &s.mean_curvature) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn spec_files_round_trip() {
        let text = r#"{ "item": "cylinder-curve", "n": 2, "curvature": 0.25 }"#;
        let spec: ImmersionSpec = serde_json::from_str(text).unwrap();
        assert_eq!(
            spec,
            ImmersionSpec::CylinderCurve {
                n: 2,
                curvature: 0.25
            }
        );
        assert_eq!(spec.exact_lambda1(), Some(2.0));
        let imm = spec.build().unwrap();
        assert_eq!(imm.ambient_dim(), 4);
        assert!(serde_json::from_str::<ImmersionSpec>(r#"{ "item": "nope" }"#).is_err());
    }
}
