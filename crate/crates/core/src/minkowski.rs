//! Lorentzian linear algebra of `L^m` with signature `(-, +, ..., +)`.
//!
//! The first canonical coordinate is time. Everything here is exact dense
//! arithmetic on short vectors; no allocation-free tricks, `m` is small.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Tolerance for "unit timelike" checks.
pub const TAU_UNIT: f64 = 1e-9;
/// Tolerance for the lightlike test in [`causal_classify`].
pub const TAU_CAUSAL: f64 = 1e-9;
/// Tolerance on the two constraints defining a spherical section.
pub const TAU_SECTION: f64 = 1e-9;

/// Samples drawn from one RNG stream. Parallel work is partitioned on these
/// boundaries so results do not depend on the thread count.
pub(crate) const SAMPLE_CHUNK: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LorentzVector(Vec<f64>);

impl LorentzVector {
    pub fn new(components: Vec<f64>) -> Self {
        LorentzVector(components)
    }

    pub fn zeros(m: usize) -> Self {
        LorentzVector(vec![0.0; m])
    }

    /// The canonical basis vector `e_i` (zero based).
    pub fn basis(m: usize, i: usize) -> Self {
        let mut v = Self::zeros(m);
        v.0[i] = 1.0;
        v
    }

    /// Unit timelike vector `(1, 0, ..., 0)`.
    pub fn time_axis(m: usize) -> Self {
        Self::basis(m, 0)
    }

    /// `(cosh s, sinh s * u)` for a Euclidean unit `u` of length `m - 1`.
    pub fn boost(s: f64, u: &[f64]) -> Self {
        let mut c = Vec::with_capacity(u.len() + 1);
        c.push(s.cosh());
        c.extend(u.iter().map(|x| s.sinh() * x));
        LorentzVector(c)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn into_components(self) -> Vec<f64> {
        self.0
    }

    /// Lorentzian square `<v, v>`; may be negative.
    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    /// Auxiliary Euclidean norm of the canonical components.
    pub fn euclid_norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        LorentzVector(self.0.iter().map(|x| x * s).collect())
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &LorentzVector) {
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += s * y;
        }
    }

    pub fn is_unit_timelike(&self) -> bool {
        (self.norm_sq() + 1.0).abs() <= TAU_UNIT * self.euclid_norm().powi(2).max(1.0)
    }
}

#[inline]
fn dot(u: &[f64], v: &[f64]) -> f64 {
    let mut s = -u[0] * v[0];
    for i in 1..u.len() {
        s += u[i] * v[i];
    }
    s
}

impl Index<usize> for LorentzVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for LorentzVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for &LorentzVector {
    type Output = LorentzVector;
    fn add(self, rhs: &LorentzVector) -> LorentzVector {
        LorentzVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LorentzVector {
    type Output = LorentzVector;
    fn sub(self, rhs: &LorentzVector) -> LorentzVector {
        LorentzVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add for LorentzVector {
    type Output = LorentzVector;
    fn add(self, rhs: LorentzVector) -> LorentzVector {
        &self + &rhs
    }
}

impl Sub for LorentzVector {
    type Output = LorentzVector;
    fn sub(self, rhs: LorentzVector) -> LorentzVector {
        &self - &rhs
    }
}

impl AddAssign<&LorentzVector> for LorentzVector {
    fn add_assign(&mut self, rhs: &LorentzVector) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&LorentzVector> for LorentzVector {
    fn sub_assign(&mut self, rhs: &LorentzVector) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<f64> for &LorentzVector {
    type Output = LorentzVector;
    fn mul(self, s: f64) -> LorentzVector {
        self.scaled(s)
    }
}

impl Mul<f64> for LorentzVector {
    type Output = LorentzVector;
    fn mul(self, s: f64) -> LorentzVector {
        self.scaled(s)
    }
}

impl Neg for &LorentzVector {
    type Output = LorentzVector;
    fn neg(self) -> LorentzVector {
        self.scaled(-1.0)
    }
}

impl From<Vec<f64>> for LorentzVector {
    fn from(v: Vec<f64>) -> Self {
        LorentzVector(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalClass {
    Spacelike,
    Timelike,
    Lightlike,
    Zero,
}

/// `<u, v> = -u1 v1 + sum_{i>=2} ui vi`.
pub fn inner(u: &LorentzVector, v: &LorentzVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(LabError::Usage(format!(
            "dimension mismatch: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    if u.dim() == 0 {
        return Ok(0.0);
    }
    Ok(dot(&u.0, &v.0))
}

/// Unchecked variant for internal hot loops where dimensions are known to agree.
#[inline]
pub(crate) fn ip(u: &LorentzVector, v: &LorentzVector) -> f64 {
    debug_assert_eq!(u.dim(), v.dim());
    dot(&u.0, &v.0)
}

pub fn causal_classify(v: &LorentzVector) -> CausalClass {
    let e2 = v.euclid_norm().powi(2);
    if e2 == 0.0 {
        return CausalClass::Zero;
    }
    let s = v.norm_sq();
    if s.abs() <= TAU_CAUSAL * e2 {
        CausalClass::Lightlike
    } else if s < 0.0 {
        CausalClass::Timelike
    } else {
        CausalClass::Spacelike
    }
}

pub(crate) fn require_unit_timelike(a: &LorentzVector) -> Result<()> {
    if a.dim() < 2 || !a.is_unit_timelike() {
        return Err(LabError::Domain(format!(
            "expected a unit timelike vector, got {:?} with <a,a> = {}",
            a.components(),
            if a.dim() > 0 { a.norm_sq() } else { f64::NAN }
        )));
    }
    Ok(())
}

/// Orthogonal projection of `v` onto the spacelike hyperplane `a^perp`:
/// `v + <v, a> a`.
pub fn project_onto_orthogonal(v: &LorentzVector, a: &LorentzVector) -> Result<LorentzVector> {
    require_unit_timelike(a)?;
    let c = inner(v, a)?;
    let mut out = v.clone();
    out.axpy(c, a);
    Ok(out)
}

/// Euclidean volume of the unit round sphere `S^k`.
pub fn sphere_volume(k: usize) -> f64 {
    let h = (k as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// Symmetric bilinear form `Q(u, v) = u^T Q v` in canonical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBilinearForm {
    matrix: DMatrix<f64>,
}

impl SymBilinearForm {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(LabError::Usage(
                "bilinear form matrix must be square".into(),
            ));
        }
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(LabError::Usage(format!(
                "bilinear form is not symmetric (max asymmetry {asym:e})"
            )));
        }
        Ok(SymBilinearForm { matrix })
    }

    /// The Lorentz metric itself.
    pub fn metric(m: usize) -> Self {
        let mut q = DMatrix::identity(m, m);
        q[(0, 0)] = -1.0;
        SymBilinearForm { matrix: q }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymBilinearForm {
            matrix: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
        }
    }

    /// `Q(u, v) = (sum_i c_i u_i)(sum_i c_i v_i)`-style rank one form `w w^T`.
    pub fn rank_one(w: &[f64]) -> Self {
        let v = nalgebra::DVector::from_column_slice(w);
        SymBilinearForm {
            matrix: &v * v.transpose(),
        }
    }

    /// Random symmetric form with standard normal entries.
    pub fn random<R: Rng>(m: usize, rng: &mut R) -> Self {
        let mut q = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let x: f64 = rng.sample(StandardNormal);
                q[(i, j)] = x;
                q[(j, i)] = x;
            }
        }
        SymBilinearForm { matrix: q }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn eval(&self, u: &LorentzVector, v: &LorentzVector) -> f64 {
        let m = self.dim();
        let mut s = 0.0;
        for i in 0..m {
            let mut r = 0.0;
            for j in 0..m {
                r += self.matrix[(i, j)] * v[j];
            }
            s += u[i] * r;
        }
        s
    }

    /// The operator `A_Q` with `<A_Q u, v> = Q(u, v)`, i.e. `eta * Q`.
    pub fn operator(&self) -> DMatrix<f64> {
        let mut a = self.matrix.clone();
        for j in 0..self.dim() {
            a[(0, j)] = -a[(0, j)];
        }
        a
    }
}

/// `trace(A_Q)` with the index raised by the Lorentz metric.
pub fn trace_aq_lorentz(q: &SymBilinearForm) -> f64 {
    let m = q.matrix();
    (1..q.dim()).map(|i| m[(i, i)]).sum::<f64>() - m[(0, 0)]
}

/// `trace(A_Q)` with the Euclidean metric.
pub fn trace_aq_euclid(q: &SymBilinearForm) -> f64 {
    q.matrix().trace()
}

/// Orthonormal (spacelike) basis of `a^perp` by Gram-Schmidt on the canonical
/// basis, spatial axes first and the time axis last.
pub fn orthonormal_complement(a: &LorentzVector) -> Result<Vec<LorentzVector>> {
    require_unit_timelike(a)?;
    let m = a.dim();
    let mut basis: Vec<LorentzVector> = Vec::with_capacity(m - 1);
    for k in (1..m).chain(std::iter::once(0)) {
        if basis.len() == m - 1 {
            break;
        }
        let mut w = LorentzVector::basis(m, k);
        let c = ip(&w, a);
        w.axpy(c, a);
        for b in &basis {
            let c = ip(&w, b);
            w.axpy(-c, b);
        }
        let s = w.norm_sq();
        if s > 1e-10 {
            basis.push(w.scaled(1.0 / s.sqrt()));
        }
    }
    if basis.len() != m - 1 {
        return Err(LabError::Frame("could not complete basis of a^perp".into()));
    }
    Ok(basis)
}

/// A pseudo-orthonormal basis `{b_j}` together with its signs `eps_j`.
#[derive(Clone, Debug)]
pub struct PseudoOrthonormalBasis {
    pub vectors: Vec<LorentzVector>,
    pub signs: Vec<f64>,
}

impl PseudoOrthonormalBasis {
    pub fn canonical(m: usize) -> Self {
        let vectors = (0..m).map(|i| LorentzVector::basis(m, i)).collect();
        let mut signs = vec![1.0; m];
        signs[0] = -1.0;
        PseudoOrthonormalBasis { vectors, signs }
    }

    /// Random basis: a boosted unit timelike vector followed by a randomly
    /// rotated orthonormal basis of its orthogonal complement.
    pub fn random<R: Rng>(m: usize, rng: &mut R) -> Self {
        let a = random_unit_timelike(m, 1.5, rng);
        let comp = orthonormal_complement(&a).expect("unit timelike by construction");
        let mut spatial: Vec<LorentzVector> = Vec::with_capacity(m - 1);
        while spatial.len() < m - 1 {
            let mut w = LorentzVector::zeros(m);
            for b in &comp {
                let g: f64 = rng.sample(StandardNormal);
                w.axpy(g, b);
            }
            for b in &spatial {
                let c = ip(&w, b);
                w.axpy(-c, b);
            }
            let s = w.norm_sq();
            if s > 1e-6 {
                spatial.push(w.scaled(1.0 / s.sqrt()));
            }
        }
        let mut vectors = vec![a];
        vectors.extend(spatial);
        let mut signs = vec![1.0; m];
        signs[0] = -1.0;
        PseudoOrthonormalBasis { vectors, signs }
    }
}

/// Uniform point on the Euclidean unit sphere `S^{k-1}` in `R^k`.
pub(crate) fn uniform_unit_vector<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let r = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-12 {
            return g.into_iter().map(|x| x / r).collect();
        }
    }
}

/// `a = (cosh s, sinh s * u)` with `s` uniform in `[0, s_max]`, `u` uniform on `S^{m-2}`.
pub fn random_unit_timelike<R: Rng>(m: usize, s_max: f64, rng: &mut R) -> LorentzVector {
    let s = rng.random::<f64>() * s_max;
    let u = uniform_unit_vector(m - 1, rng);
    LorentzVector::boost(s, &u)
}

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Points of the spherical section `S^{m-2}_a = {v : <v,v> = 0, <a,v> = -1}`,
/// generated as `v = a + u` with `u` uniform on the unit sphere of `a^perp`.
pub fn sample_spherical_section(
    a: &LorentzVector,
    rng_seed: u64,
    count: usize,
) -> Result<Vec<LorentzVector>> {
    let sampler = SectionSampler::new(a)?;
    let chunks = count.div_ceil(SAMPLE_CHUNK);
    let out: Vec<Vec<LorentzVector>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(rng_seed, c);
            let len = SAMPLE_CHUNK.min(count - c * SAMPLE_CHUNK);
            (0..len).map(|_| sampler.sample(&mut rng)).collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

pub(crate) struct SectionSampler {
    a: LorentzVector,
    complement: Vec<LorentzVector>,
}

impl SectionSampler {
    pub(crate) fn new(a: &LorentzVector) -> Result<Self> {
        Ok(SectionSampler {
            a: a.clone(),
            complement: orthonormal_complement(a)?,
        })
    }

    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> LorentzVector {
        let u = uniform_unit_vector(self.complement.len(), rng);
        let mut v = self.a.clone();
        for (c, b) in u.iter().zip(&self.complement) {
            v.axpy(*c, b);
        }
        v
    }
}

/// Closed form of `int_{S^{m-2}_a} Q(v, v) dV_a`:
/// `Vol(S^{m-2}) / (m - 1) * [m Q(a, a) + trace(A_Q)]`.
pub fn avg_lemma_rhs(q: &SymBilinearForm, a: &LorentzVector) -> Result<f64> {
    require_unit_timelike(a)?;
    let m = a.dim();
    if m < 3 {
        return Err(LabError::Domain(format!("ambient dimension {m} < 3")));
    }
    if q.dim() != m {
        return Err(LabError::Usage("form and vector dimensions differ".into()));
    }
    let mf = m as f64;
    Ok(sphere_volume(m - 2) / (mf - 1.0) * (mf * q.eval(a, a) + trace_aq_lorentz(q)))
}

/// Closed form of `int_{S^{m-1}} Q(v, v) dV = Vol(S^{m-1}) / m * trace(Q)` in `R^m`.
pub fn euclid_avg_rhs(q: &SymBilinearForm) -> f64 {
    let m = q.dim();
    sphere_volume(m - 1) / m as f64 * trace_aq_euclid(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> LorentzVector {
        LorentzVector::new(c.to_vec())
    }

    #[test]
    fn inner_examples() {
        assert_eq!(
            inner(&v(&[1., 0., 0., 0.]), &v(&[1., 0., 0., 0.])).unwrap(),
            -1.0
        );
        assert_eq!(
            inner(&v(&[0., 1., 0., 0.]), &v(&[0., 0., 1., 0.])).unwrap(),
            0.0
        );
        let l = v(&[1., 1., 0., 0.]);
        assert_eq!(inner(&l, &l).unwrap(), 0.0);
        assert!(matches!(
            inner(&v(&[1., 0.]), &v(&[1., 0., 0.])),
            Err(LabError::Usage(_))
        ));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            causal_classify(&v(&[1., 0., 0., 0.])),
            CausalClass::Timelike
        );
        assert_eq!(
            causal_classify(&v(&[1., 1., 0., 0.])),
            CausalClass::Lightlike
        );
        assert_eq!(causal_classify(&v(&[0., 0., 0., 0.])), CausalClass::Zero);
        assert_eq!(
            causal_classify(&v(&[0., 1., 0., 0.])),
            CausalClass::Spacelike
        );
    }

    #[test]
    fn projection_examples() {
        let a = LorentzVector::time_axis(4);
        let p = project_onto_orthogonal(&v(&[3., 1., 0., 0.]), &a).unwrap();
        assert_eq!(p, v(&[0., 1., 0., 0.]));
        let p = project_onto_orthogonal(&a, &a).unwrap();
        assert!(p.euclid_norm() < 1e-15);

        // a = (sqrt2, 1, 0, 0) is already unit timelike: -2 + 1 = -1.
        let b = v(&[2f64.sqrt(), 1., 0., 0.]);
        let p = project_onto_orthogonal(&v(&[1., 2., 0., 0.]), &b).unwrap();
        assert!(inner(&p, &b).unwrap().abs() < 1e-14);
        // direct arithmetic: <v,b> = -sqrt2 + 2, p = v + (2 - sqrt2) b
        let c = 2.0 - 2f64.sqrt();
        assert!((p[0] - (1.0 + c * 2f64.sqrt())).abs() < 1e-14);
        assert!((p[1] - (2.0 + c)).abs() < 1e-14);

        assert!(matches!(
            project_onto_orthogonal(&v(&[1., 2., 0., 0.]), &v(&[0., 1., 0., 0.])),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn trace_examples() {
        assert_eq!(trace_aq_lorentz(&SymBilinearForm::metric(4)), 4.0);
        assert_eq!(
            trace_aq_lorentz(&SymBilinearForm::from_diagonal(&[1., 0., 0., 0.])),
            -1.0
        );
        assert_eq!(
            trace_aq_lorentz(&SymBilinearForm::from_diagonal(&[0., 1., 1., 1.])),
            3.0
        );
        assert_eq!(
            trace_aq_euclid(&SymBilinearForm::from_diagonal(&[1., 1., 1.])),
            3.0
        );
        assert_eq!(
            trace_aq_euclid(&SymBilinearForm::from_diagonal(&[1., 0., 0.])),
            1.0
        );
        assert_eq!(
            trace_aq_euclid(&SymBilinearForm::from_diagonal(&[0., 0., 0.])),
            0.0
        );
    }

    #[test]
    fn trace_matches_pseudo_orthonormal_basis_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in 3..7 {
            for _ in 0..5 {
                let q = SymBilinearForm::random(m, &mut rng);
                let basis = PseudoOrthonormalBasis::random(m, &mut rng);
                let sum: f64 = basis
                    .vectors
                    .iter()
                    .zip(&basis.signs)
                    .map(|(b, e)| e * q.eval(b, b))
                    .sum();
                let t = trace_aq_lorentz(&q);
                assert!((sum - t).abs() <= 1e-10 * t.abs().max(1.0), "{sum} vs {t}");
            }
        }
    }

    #[test]
    fn operator_raises_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = SymBilinearForm::random(4, &mut rng);
        let a = q.operator();
        let u = v(&[0.3, -1.0, 2.0, 0.5]);
        let w = v(&[1.1, 0.2, -0.7, 0.9]);
        let au = LorentzVector::new(
            (0..4)
                .map(|i| (0..4).map(|j| a[(i, j)] * u[j]).sum())
                .collect(),
        );
        assert!((inner(&au, &w).unwrap() - q.eval(&u, &w)).abs() < 1e-12);
        assert!((a.trace() - trace_aq_lorentz(&q)).abs() < 1e-14);
    }

    #[test]
    fn section_constraints() {
        let axes = [
            LorentzVector::time_axis(4),
            v(&[2f64.sqrt(), 1., 0., 0.]),
            LorentzVector::boost(1.7, &[0.6, 0.0, 0.8]),
        ];
        for a in &axes {
            for s in sample_spherical_section(a, 5, 2000).unwrap() {
                assert!((inner(&s, a).unwrap() + 1.0).abs() <= TAU_SECTION * 10.0);
                assert!(
                    inner(&s, &s).unwrap().abs() <= TAU_SECTION * 10.0 * s.euclid_norm().powi(2)
                );
            }
        }
        assert!(sample_spherical_section(&v(&[0., 1., 0., 0.]), 1, 3).is_err());
    }

    #[test]
    fn section_sampling_is_deterministic() {
        let a = LorentzVector::boost(0.4, &[0.0, 1.0, 0.0]);
        let x = sample_spherical_section(&a, 42, 40_000).unwrap();
        let y = sample_spherical_section(&a, 42, 40_000).unwrap();
        assert_eq!(x, y);
        let z = sample_spherical_section(&a, 42, 100).unwrap();
        assert_eq!(&x[..100], &z[..]);
    }

    #[test]
    fn sphere_volumes() {
        assert!((sphere_volume(0) - 2.0).abs() < 1e-14);
        assert!((sphere_volume(1) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_volume(2) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_volume(3) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn avg_lemma_examples() {
        let a = LorentzVector::time_axis(4);
        assert!(
            avg_lemma_rhs(&SymBilinearForm::metric(4), &a)
                .unwrap()
                .abs()
                < 1e-14
        );
        let q = SymBilinearForm::from_diagonal(&[1., 0., 0., 0.]);
        assert!((avg_lemma_rhs(&q, &a).unwrap() - 4.0 * PI).abs() < 1e-12);
        let q = SymBilinearForm::from_diagonal(&[0., 1., 0., 0.]);
        assert!((avg_lemma_rhs(&q, &a).unwrap() - 4.0 * PI / 3.0).abs() < 1e-12);
        let b = LorentzVector::boost(0.5, &[1.0, 0.0, 0.0]);
        assert!(
            avg_lemma_rhs(&SymBilinearForm::metric(4), &b)
                .unwrap()
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn orthonormal_complement_is_orthonormal() {
        let a = LorentzVector::boost(1.2, &[0.0, 0.6, 0.8]);
        let c = orthonormal_complement(&a).unwrap();
        assert_eq!(c.len(), 3);
        for (i, x) in c.iter().enumerate() {
            assert!(ip(x, &a).abs() < 1e-12);
            for (j, y) in c.iter().enumerate() {
                let d = if i == j { 1.0 } else { 0.0 };
                assert!((ip(x, y) - d).abs() < 1e-12);
            }
        }
    }
}
