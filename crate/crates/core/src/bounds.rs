//! Test vector fields, the first-eigenvalue upper bounds built from them,
//! equality-case detection, and identity residuals.
//!
//! Bounds whose two sides are both discrete quadratic forms in the same
//! pencil (main lemma, position bounds, curvature quotient, Q-form) are exact
//! statements about the discrete problem and are judged with `TAU_BOUND`
//! alone. Bounds comparing the discrete `lambda1` with pointwise integrals
//! (Reilly, the `H_a` bounds) also allow the observed eigenvalue change from
//! the next coarser mesh plus the quadrature error estimate.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fem::components;
use crate::immersion::Domain;
use crate::minkowski::{
    causal_classify, ip, random_unit_timelike, require_unit_timelike, CausalClass, LorentzVector,
    PseudoOrthonormalBasis, SymBilinearForm,
};
use crate::pipeline::{require_vertex_field, Analysis, DirectionalMoments, DiscretizationMeta};
use crate::quadrature::{integrate_over_mesh, Density};

pub const TAU_BOUND: f64 = 1e-6;
/// Relative slack below which a holding bound is flagged as an equality.
pub const TAU_EQUALITY: f64 = 1e-2;
/// Equality-case threshold of the equality diagnostic.
pub const TAU_EQ: f64 = 5e-2;
/// The diagnostic calls a direction strict above `STRICT_FACTOR * TAU_EQ`.
pub const STRICT_FACTOR: f64 = 2.0;
/// Relative size of `Q(l, l)` accepted as zero.
pub const TAU_CAUSAL: f64 = 1e-3;
/// Largest boost parameter used when sampling timelike directions.
pub const BOOST_MAX: f64 = 2.0;
/// Relative tolerance on the centring of test fields.
pub const TAU_CENTER: f64 = crate::fem::TAU_CENTER;

/// Verdict thresholds; the defaults are the module constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub bound: f64,
    pub equality: f64,
    pub eq: f64,
    pub strict_factor: f64,
    pub causal: f64,
    pub eig: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            bound: TAU_BOUND,
            equality: TAU_EQUALITY,
            eq: TAU_EQ,
            strict_factor: STRICT_FACTOR,
            causal: TAU_CAUSAL,
            eig: crate::eigen::TAU_EIG,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.bound, self.equality, self.eq, self.causal, self.eig];
        if all.iter().any(|t| !(t.is_finite() && *t > 0.0))
            || self.strict_factor.is_nan()
            || self.strict_factor < 1.0
        {
            return Err(LabError::Usage(
                "tolerances must be positive and the strict factor at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    MeanCurvature,
    Position,
    ProjectedPosition,
    Custom,
}

/// A vector field along the mesh with every `<v, W>` of zero mean.
#[derive(Clone, Debug)]
pub struct TestField {
    pub values: Vec<LorentzVector>,
    pub kind: FieldKind,
    /// Largest `|int W_j dV| / Vol` before the mean was removed.
    pub center_residual: f64,
    /// Whether that residual was within `10 TAU_CENTER` (scaled by `max |W|`).
    pub centered: bool,
}

fn build_field(an: &Analysis, values: Vec<LorentzVector>, kind: FieldKind) -> Result<TestField> {
    require_vertex_field(an, &values)?;
    let vol = an.volume();
    let m = an.m();
    let mut mean = LorentzVector::zeros(m);
    for (w, l) in values.iter().zip(&an.pencil.lumped) {
        mean.axpy(*l / vol, w);
    }
    let scale = values.iter().map(|w| w.euclid_norm()).fold(1.0, f64::max);
    let residual = mean
        .components()
        .iter()
        .fold(0.0f64, |acc, c| acc.max(c.abs()));
    let values = values.iter().map(|w| w - &mean).collect();
    Ok(TestField {
        values,
        kind,
        center_residual: residual,
        centered: residual <= 10.0 * TAU_CENTER * scale,
    })
}

/// `W = H`.
pub fn make_test_field_h(an: &Analysis) -> Result<TestField> {
    build_field(an, an.vertex_curvature.clone(), FieldKind::MeanCurvature)
}

/// `W = psi_hat`, the recentred position.
pub fn make_test_field_position(an: &Analysis) -> Result<TestField> {
    build_field(an, an.centered_positions.clone(), FieldKind::Position)
}

/// `W = psi_hat_a = psi_hat + <psi_hat, a> a`.
pub fn make_test_field_projected(an: &Analysis, a: &LorentzVector) -> Result<TestField> {
    require_unit_timelike(a)?;
    let values = an
        .centered_positions
        .iter()
        .map(|x| x + &a.scaled(ip(x, a)))
        .collect();
    build_field(an, values, FieldKind::ProjectedPosition)
}

pub fn make_test_field_custom(an: &Analysis, values: Vec<LorentzVector>) -> Result<TestField> {
    build_field(an, values, FieldKind::Custom)
}

/// Per element, `sum_j eps_j |grad <b_j, W>|^2` in the canonical basis.
pub fn trace_aq1_density(an: &Analysis, w: &TestField) -> Vec<f64> {
    (0..an.disc.elements.len())
        .map(|e| an.disc.signed_gradient_trace(e, &w.values))
        .collect()
}

/// Same density through an arbitrary pseudo-orthonormal basis.
pub fn trace_aq1_density_in_basis(
    an: &Analysis,
    w: &TestField,
    basis: &PseudoOrthonormalBasis,
) -> Vec<f64> {
    let fields: Vec<Vec<f64>> = basis
        .vectors
        .iter()
        .map(|b| w.values.iter().map(|x| ip(b, x)).collect())
        .collect();
    (0..an.disc.elements.len())
        .map(|e| {
            fields
                .iter()
                .zip(&basis.signs)
                .map(|(f, s)| s * an.disc.gradient_dot(e, f, f))
                .sum()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Holds,
    Equality,
    Violated,
    Informational,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub name: String,
    /// Stable key of the inequality being evaluated.
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub relative_slack: f64,
    /// Discretization allowance: eigenvalue refinement change plus quadrature error.
    pub allowance: f64,
    /// Absolute tolerance used for `holds`, allowance included.
    pub tolerance: f64,
    pub holds: bool,
    pub equality: bool,
    pub expectation: Expectation,
    pub expectation_met: bool,
    /// Index into the run's direction list (0 is the reference direction).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    pub meta: DiscretizationMeta,
}

impl BoundReport {
    fn new(
        name: impl Into<String>,
        anchor: &str,
        lhs: f64,
        rhs: f64,
        extra_tolerance: f64,
        a: Option<&LorentzVector>,
        meta: DiscretizationMeta,
    ) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let slack = rhs - lhs;
        let mut r = BoundReport {
            name: name.into(),
            anchor: anchor.to_string(),
            lhs,
            rhs,
            slack,
            relative_slack: if scale > 0.0 { slack / scale } else { 0.0 },
            allowance: extra_tolerance,
            tolerance: 0.0,
            holds: false,
            equality: false,
            expectation: Expectation::Holds,
            expectation_met: false,
            direction: None,
            a: a.map(|v| v.components().to_vec()),
            meta,
        };
        r.rejudge(&Tolerances::default());
        r
    }

    /// Recomputes `holds`, `equality` and `expectation_met` under `tol`.
    pub fn rejudge(&mut self, tol: &Tolerances) {
        let scale = self.lhs.abs().max(self.rhs.abs());
        self.tolerance = tol.bound * scale + self.allowance;
        self.holds = self.slack >= -self.tolerance;
        self.equality = self.holds && self.slack.abs() <= tol.equality * scale + self.allowance;
        self.expectation_met = self.evaluate_expectation();
    }

    fn evaluate_expectation(&self) -> bool {
        match self.expectation {
            Expectation::Holds => self.holds,
            Expectation::Equality => self.holds && self.equality,
            Expectation::Violated => !self.holds,
            Expectation::Informational => true,
        }
    }

    pub fn expect(mut self, e: Expectation) -> Self {
        self.expectation = e;
        self.expectation_met = self.evaluate_expectation();
        self
    }
}

fn lambda_uncertainty(an: &Analysis) -> f64 {
    an.lambda1_delta.unwrap_or(0.0)
}

fn f_along(values: &[LorentzVector], a: &LorentzVector) -> Vec<f64> {
    values.iter().map(|w| ip(a, w)).collect()
}

/// `lambda1 int [m <a,W>^2 + |W|^2] <= int [m |grad <a,W>|^2 + trace A_Q1]`.
pub fn main_lemma_sides(an: &Analysis, w: &TestField, a: &LorentzVector) -> Result<BoundReport> {
    require_unit_timelike(a)?;
    let comps = components(&w.values);
    if an.pencil.euclid_mass_norm_sq(&comps) <= 0.0 {
        return Err(LabError::Domain("test field vanishes identically".into()));
    }
    let m = an.m() as f64;
    let fa = f_along(&w.values, a);
    let lhs = an.lambda1()
        * (m * an.pencil.mass_product(&fa, &fa) + an.pencil.lorentz_mass_product(&comps, &comps));
    let trace = integrate_over_mesh(&an.disc, Density::PerElement(&trace_aq1_density(an, w)))?;
    let rhs = m * an.pencil.dirichlet_product(&fa, &fa) + trace.value;
    let name = format!(
        "main-lemma[W={}]",
        match w.kind {
            FieldKind::MeanCurvature => "H",
            FieldKind::Position => "psi",
            FieldKind::ProjectedPosition => "psi_a",
            FieldKind::Custom => "custom",
        }
    );
    Ok(BoundReport::new(
        name,
        "test-field-lemma",
        lhs,
        rhs,
        trace.error,
        Some(a),
        an.meta(),
    ))
}

/// `lambda1 <= n int |H|^2 dV / Vol`.
pub fn reilly_bound(an: &Analysis) -> Result<BoundReport> {
    let n = an.n() as f64;
    let vol = an.volume();
    let h2 = an.integrate_geometry(|_, h| ip(h, h))?;
    let extra = lambda_uncertainty(an) + n * h2.error / vol;
    Ok(BoundReport::new(
        "reilly",
        "reilly-inequality",
        an.lambda1(),
        n * h2.value / vol,
        extra,
        None,
        an.meta(),
    ))
}

/// `lambda1 <= int [m |grad <a,H>|^2 + trace A_Q1(H)] / int [m <a,H>^2 + |H|^2]`.
pub fn curvature_quotient_bound(an: &Analysis, a: &LorentzVector) -> Result<BoundReport> {
    require_unit_timelike(a)?;
    let h = make_test_field_h(an)?;
    let comps = components(&h.values);
    let m = an.m() as f64;
    let fa = f_along(&h.values, a);
    let den = m * an.pencil.mass_product(&fa, &fa) + an.pencil.lorentz_mass_product(&comps, &comps);
    if den <= 0.0 {
        return Err(LabError::Numerical(
            "mean curvature quotient has a non-positive denominator".into(),
        ));
    }
    let trace = integrate_over_mesh(&an.disc, Density::PerElement(&trace_aq1_density(an, &h)))?;
    let num = m * an.pencil.dirichlet_product(&fa, &fa) + trace.value;
    Ok(BoundReport::new(
        "curvature-quotient",
        "mean-curvature-quotient-bound",
        an.lambda1(),
        num / den,
        trace.error / den,
        Some(a),
        an.meta(),
    ))
}

/// Position-field bounds:
/// `lambda1 int [m <a,psi>^2 + |psi|^2] <= n Vol + m int |a^T|^2` and
/// `lambda1 int [|psi|^2 + <a,psi>^2] <= n Vol + int |a^T|^2`,
/// with `a^T = grad <a, psi>` taken from the P1 interpolant.
pub fn position_bounds(an: &Analysis, a: &LorentzVector) -> Result<(BoundReport, BoundReport)> {
    require_unit_timelike(a)?;
    let p = &an.centered_positions;
    let comps = components(p);
    let n = an.n() as f64;
    let m = an.m() as f64;
    let vol = an.disc.volume();
    let fa = f_along(p, a);
    let mass_a = an.pencil.mass_product(&fa, &fa);
    let grad_a = an.pencil.dirichlet_product(&fa, &fa);
    let pos = an.pencil.lorentz_mass_product(&comps, &comps);
    let lam = an.lambda1();
    let plain = BoundReport::new(
        "position-bound",
        "centered-position-bound",
        lam * (m * mass_a + pos),
        n * vol + m * grad_a,
        0.0,
        Some(a),
        an.meta(),
    );
    let projected = BoundReport::new(
        "projected-position-bound",
        "projected-position-bound",
        lam * (pos + mass_a),
        n * vol + grad_a,
        0.0,
        Some(a),
        an.meta(),
    );
    Ok((plain, projected))
}

/// `lambda1 <= n int |H_a|^2 / (Vol + (1/n) int |a^T|^2)`.
pub fn e_bound(
    an: &Analysis,
    moments: &DirectionalMoments,
    a: &LorentzVector,
) -> Result<BoundReport> {
    require_unit_timelike(a)?;
    let n = an.n() as f64;
    let extra = lambda_uncertainty(an) + n * moments.h_sq.error / moments.volume;
    Ok(BoundReport::new(
        "projected-curvature-bound",
        "projected-mean-curvature-bound",
        an.lambda1(),
        moments.e_rhs(a),
        extra,
        Some(a),
        an.meta(),
    ))
}

/// `lambda1 <= n int |H_a|^2 / Vol`.
pub fn estar_bound(
    an: &Analysis,
    moments: &DirectionalMoments,
    a: &LorentzVector,
) -> Result<BoundReport> {
    require_unit_timelike(a)?;
    let n = an.n() as f64;
    let extra = lambda_uncertainty(an) + n * moments.h_sq.error / moments.volume;
    Ok(BoundReport::new(
        "projected-curvature-volume-bound",
        "projected-mean-curvature-volume-bound",
        an.lambda1(),
        moments.estar_rhs(a),
        extra,
        Some(a),
        an.meta(),
    ))
}

/// `[Q(e_i, e_j)]` with `Q(v, w) = int <grad F_v, grad F_w> - lambda1 int F_v F_w`,
/// `F_v = <v, psi_hat>`.
pub fn causal_q_matrix(an: &Analysis) -> DMatrix<f64> {
    let m = an.m();
    let f: Vec<Vec<f64>> = (0..m)
        .map(|i| f_along(&an.centered_positions, &LorentzVector::basis(m, i)))
        .collect();
    let lam = an.lambda1();
    let mut q = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = an.pencil.dirichlet_product(&f[i], &f[j])
                - lam * an.pencil.mass_product(&f[i], &f[j]);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    q
}

pub fn causal_q_form(an: &Analysis, v: &LorentzVector, w: &LorentzVector) -> f64 {
    let q = causal_q_matrix(an);
    let (v, w) = (v.components(), w.components());
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..w.len() {
            s += v[i] * q[(i, j)] * w[j];
        }
    }
    s
}

/// `lambda1 sum_i int F_{e_i}^2`, the scale against which `Q` is judged.
fn q_scale(an: &Analysis) -> f64 {
    let comps = components(&an.centered_positions);
    an.lambda1() * an.pencil.euclid_mass_norm_sq(&comps)
}

#[derive(Clone, Debug, Serialize)]
pub struct CausalCheck {
    pub ell: Vec<f64>,
    pub q_value: f64,
    pub q_relative: f64,
    pub precondition_met: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reilly: Option<BoundReport>,
    /// `int <r, r> dV` for `r = Delta psi_hat + lambda1 psi_hat` (Lorentz square).
    pub residual_lorentz: f64,
    /// `(int |r|_E^2 dV)^{1/2}` relative to `(int |psi_hat|_E^2 dV)^{1/2}`.
    pub residual_euclid: f64,
    /// Part of `r` not parallel to `ell`, same normalization.
    pub residual_off_ell: f64,
    /// `(lambda1 int |psi_hat|^2 - n Vol) / (n Vol)`.
    pub energy_gap: f64,
}

fn eigen_residual_field(an: &Analysis) -> Vec<LorentzVector> {
    let lap = an.discrete_laplacian(&an.centered_positions);
    lap.iter()
        .zip(&an.centered_positions)
        .map(|(d, x)| d + &x.scaled(an.lambda1()))
        .collect()
}

fn lumped_integral<F: Fn(usize) -> f64>(an: &Analysis, f: F) -> f64 {
    an.pencil
        .lumped
        .iter()
        .enumerate()
        .map(|(i, w)| w * f(i))
        .sum()
}

/// Reilly's inequality under a causal `ell` with `Q(ell, ell) = 0`.
pub fn causal_reilly_check(an: &Analysis, ell: &LorentzVector) -> Result<CausalCheck> {
    causal_reilly_check_with(an, ell, &Tolerances::default())
}

pub fn causal_reilly_check_with(
    an: &Analysis,
    ell: &LorentzVector,
    tol: &Tolerances,
) -> Result<CausalCheck> {
    if ell.dim() != an.m() {
        return Err(LabError::Usage("ell has the wrong dimension".into()));
    }
    if ell.euclid_norm() == 0.0 || causal_classify(ell) == CausalClass::Spacelike {
        return Err(LabError::Domain(format!(
            "{:?} is not causal",
            ell.components()
        )));
    }
    let q_value = causal_q_form(an, ell, ell);
    let q_relative = q_value / (q_scale(an) * ell.euclid_norm().powi(2));
    let precondition_met = q_relative.abs() <= tol.causal;
    let reilly = if precondition_met {
        let mut r = reilly_bound(an)?;
        r.rejudge(tol);
        Some(r)
    } else {
        None
    };
    let r = eigen_residual_field(an);
    let residual_lorentz = lumped_integral(an, |i| ip(&r[i], &r[i]));
    let re = lumped_integral(an, |i| r[i].euclid_norm().powi(2)).sqrt();
    let pe = lumped_integral(an, |i| an.centered_positions[i].euclid_norm().powi(2)).sqrt();
    let unit = ell.scaled(1.0 / ell.euclid_norm());
    let off = lumped_integral(an, |i| {
        let c: f64 = r[i]
            .components()
            .iter()
            .zip(unit.components())
            .map(|(x, y)| x * y)
            .sum();
        (&r[i] - &unit.scaled(c)).euclid_norm().powi(2)
    })
    .sqrt();
    let comps = components(&an.centered_positions);
    let nvol = an.n() as f64 * an.volume();
    Ok(CausalCheck {
        ell: ell.components().to_vec(),
        q_value,
        q_relative,
        precondition_met,
        reilly,
        residual_lorentz,
        residual_euclid: re / pe,
        residual_off_ell: off / pe,
        energy_gap: (an.lambda1() * an.pencil.lorentz_mass_product(&comps, &comps) - nvol) / nvol,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CausalKernelSearch {
    /// Dimension of the numerical kernel of `Q`.
    pub kernel_dim: usize,
    /// Smallest eigenvalue of `eta` restricted to the kernel (normalized basis).
    pub min_restricted_metric: Option<f64>,
    pub found: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    pub q_eigenvalues: Vec<f64>,
}

/// Looks for a causal vector in the numerical kernel of the positive
/// semi-definite form `Q`.
pub fn causal_kernel_search(an: &Analysis) -> CausalKernelSearch {
    causal_kernel_search_with(an, &Tolerances::default())
}

pub fn causal_kernel_search_with(an: &Analysis, tol: &Tolerances) -> CausalKernelSearch {
    let q = causal_q_matrix(an);
    let scale = q_scale(an);
    let eig = SymmetricEigen::new(q);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let q_eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i] / scale).collect();
    let kernel: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| eig.eigenvalues[i] <= tol.causal * scale)
        .collect();
    let m = an.m();
    if kernel.is_empty() {
        return CausalKernelSearch {
            kernel_dim: 0,
            min_restricted_metric: None,
            found: false,
            witness: None,
            q_eigenvalues,
        };
    }
    let k = kernel.len();
    let basis = DMatrix::from_fn(m, k, |r, c| eig.eigenvectors[(r, kernel[c])]);
    let mut eta = DMatrix::identity(m, m);
    eta[(0, 0)] = -1.0;
    let restricted = basis.transpose() * eta * &basis;
    let reig = SymmetricEigen::new(restricted);
    let (imin, min) =
        reig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
            );
    let found = min <= 1e-9;
    let witness = found.then(|| {
        let c = reig.eigenvectors.column(imin);
        let v = &basis * c;
        let mut w: Vec<f64> = v.iter().copied().collect();
        if w[0] < 0.0 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        w
    });
    CausalKernelSearch {
        kernel_dim: k,
        min_restricted_metric: Some(min),
        found,
        witness,
        q_eigenvalues,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EqualityCase,
    Strict,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct EqualityDiagnostic {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<usize>,
    pub a: Vec<f64>,
    /// `|r - mu_a a|_E` in L^2, relative to `|psi_hat|_E` in L^2.
    pub residual: f64,
    pub mu_integral: f64,
    pub mu_max: f64,
    /// `int |a^T|^2 dV / Vol`.
    pub tangential_mean: f64,
    pub radius_from_spectrum: f64,
    pub radius_from_curvature: f64,
    /// `max |lambda1 - n |H_a|^2| / lambda1` over the vertices.
    pub curvature_gap: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Verdict>,
    pub expectation_met: bool,
    #[serde(skip)]
    pub mu: Vec<f64>,
}

impl EqualityDiagnostic {
    pub fn expect(mut self, v: Verdict) -> Self {
        self.expected = Some(v);
        self.expectation_met = self.verdict == v;
        self
    }

    pub fn reclassify(&mut self, tol: &Tolerances) {
        self.verdict = classify_residual_with(self.residual, tol);
        self.expectation_met = self.expected.is_none_or(|v| v == self.verdict);
    }
}

pub fn classify_residual(residual: f64) -> Verdict {
    classify_residual_with(residual, &Tolerances::default())
}

pub fn classify_residual_with(residual: f64, tol: &Tolerances) -> Verdict {
    if residual <= tol.eq {
        Verdict::EqualityCase
    } else if residual >= tol.strict_factor * tol.eq {
        Verdict::Strict
    } else {
        Verdict::Inconclusive
    }
}

/// Tests `Delta psi_hat + lambda1 psi_hat = mu_a a` for some function `mu_a`.
pub fn equality_diagnostic(an: &Analysis, a: &LorentzVector) -> Result<EqualityDiagnostic> {
    require_unit_timelike(a)?;
    let r = eigen_residual_field(an);
    let mu: Vec<f64> = r.iter().map(|x| -ip(a, x)).collect();
    let rest = |i: usize| (&r[i] - &a.scaled(mu[i])).euclid_norm().powi(2);
    let res = lumped_integral(an, rest).sqrt();
    let pe = lumped_integral(an, |i| an.centered_positions[i].euclid_norm().powi(2)).sqrt();
    let vol = an.volume();
    let n = an.n() as f64;
    let lam = an.lambda1();
    let tangential = an.integrate_geometry(|s, _| s.tangential_part(a).norm_sq())?;
    let ha: Vec<f64> = an
        .vertex_curvature
        .iter()
        .map(|h| {
            let p = h + &a.scaled(ip(h, a));
            p.norm_sq()
        })
        .collect();
    let radius_from_curvature =
        lumped_integral(an, |i| if ha[i] > 0.0 { 1.0 / ha[i].sqrt() } else { 0.0 }) / vol;
    let curvature_gap = ha
        .iter()
        .map(|h| (lam - n * h).abs() / lam)
        .fold(0.0, f64::max);
    let residual = res / pe;
    Ok(EqualityDiagnostic {
        direction: None,
        a: a.components().to_vec(),
        residual,
        mu_integral: lumped_integral(an, |i| mu[i]),
        mu_max: mu.iter().fold(0.0f64, |acc, v| acc.max(v.abs())),
        tangential_mean: tangential.value / vol,
        radius_from_spectrum: (n / lam).sqrt(),
        radius_from_curvature,
        curvature_gap,
        verdict: classify_residual(residual),
        expected: None,
        expectation_met: true,
        mu,
    })
}

/// `count` unit timelike directions `(cosh s, sinh s u)`, `s` uniform in
/// `[0, BOOST_MAX]`; a longer list extends a shorter one with the same seed.
pub fn sample_directions(m: usize, count: usize, seed: u64) -> Vec<LorentzVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_unit_timelike(m, BOOST_MAX, &mut rng))
        .collect()
}

/// Smallest right-hand side of the `|a^T|`-corrected bound over sampled directions.
pub fn infimum_over_directions(
    an: &Analysis,
    moments: &DirectionalMoments,
    direction_samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    if direction_samples == 0 {
        return Err(LabError::Usage("need at least one direction".into()));
    }
    let dirs = sample_directions(an.m(), direction_samples, seed);
    let (best, rhs) = dirs.iter().map(|a| (a, moments.e_rhs(a))).fold(
        (&dirs[0], f64::INFINITY),
        |acc, (a, r)| if r < acc.1 { (a, r) } else { acc },
    );
    let n = an.n() as f64;
    let extra = lambda_uncertainty(an) + n * moments.h_sq.error / moments.volume;
    Ok(BoundReport::new(
        format!("infimum-over-{direction_samples}-directions"),
        "projected-mean-curvature-bound",
        an.lambda1(),
        rhs,
        extra,
        Some(best),
        an.meta(),
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub anchor: String,
    pub value: f64,
    pub error: f64,
    /// Value the residual is compared against, when the identity has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub within_tolerance: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
}

impl IdentityCheck {
    fn new(
        name: &str,
        anchor: &str,
        value: f64,
        error: f64,
        tolerance: Option<f64>,
        a: Option<&LorentzVector>,
    ) -> Self {
        IdentityCheck {
            name: name.into(),
            anchor: anchor.into(),
            value,
            error,
            tolerance,
            within_tolerance: tolerance.is_none_or(|t| value.abs() <= t),
            a: a.map(|v| v.components().to_vec()),
        }
    }
}

/// Mesh tolerance for integral identities, relative to the volume.
pub const TAU_IDENTITY: f64 = 1e-3;
/// Mesh tolerance for the L^1 trace identities, relative to the volume.
pub const TAU_TRACE_IDENTITY: f64 = 1e-2;

/// `int (1 + <psi, H>) dV`.
pub fn minkowski_check(an: &Analysis) -> Result<IdentityCheck> {
    let r = crate::quadrature::minkowski_residual(&an.disc, &an.sampled_field(false))?;
    Ok(IdentityCheck::new(
        "minkowski",
        "minkowski-formula",
        r.value,
        r.error,
        Some(TAU_IDENTITY * an.volume()),
        None,
    ))
}

/// The two `a`-projected forms of the Minkowski formula on `psi_hat`.
pub fn minkowski_a_checks(
    an: &Analysis,
    a: &LorentzVector,
) -> Result<(IdentityCheck, IdentityCheck)> {
    let tv: Vec<f64> = an
        .vertex_shapes
        .iter()
        .map(|s| s.tangential_part(a).norm_sq())
        .collect();
    let tc: Vec<f64> = an
        .centroid_shapes
        .iter()
        .map(|s| s.tangential_part(a).norm_sq())
        .collect();
    let (r1, r2) = crate::quadrature::minkowski_a_identities(
        &an.disc,
        &an.sampled_field(true),
        a,
        (&tv, &tc),
    )?;
    let tol = Some(TAU_IDENTITY * an.volume());
    Ok((
        IdentityCheck::new(
            "minkowski-a",
            "projected-minkowski-formula",
            r1.value,
            r1.error,
            tol,
            Some(a),
        ),
        IdentityCheck::new(
            "minkowski-a-tangential",
            "projected-minkowski-tangential-formula",
            r2.value,
            r2.error,
            tol,
            Some(a),
        ),
    ))
}

/// `|Delta_h psi - n H|_E` in L^2 (absolute), reported with the relative value.
pub fn beltrami_residual(an: &Analysis) -> (f64, f64) {
    let lap = an.discrete_laplacian(&an.disc.positions);
    let n = an.n() as f64;
    let diff = lumped_integral(an, |i| {
        (&lap[i] - &an.vertex_curvature[i].scaled(n))
            .euclid_norm()
            .powi(2)
    })
    .sqrt();
    let base = lumped_integral(an, |i| {
        an.vertex_curvature[i].scaled(n).euclid_norm().powi(2)
    })
    .sqrt();
    (diff, diff / base)
}

pub fn beltrami_check(an: &Analysis) -> IdentityCheck {
    let (abs, _) = beltrami_residual(an);
    IdentityCheck::new("beltrami", "beltrami-equation", abs, 0.0, None, None)
}

/// L^1 norm of `trace A_Q1(psi_hat) - n`.
pub fn position_trace_check(an: &Analysis) -> Result<IdentityCheck> {
    let w = make_test_field_position(an)?;
    let n = an.n() as f64;
    let d: Vec<f64> = trace_aq1_density(an, &w)
        .iter()
        .map(|t| (t - n).abs())
        .collect();
    let r = integrate_over_mesh(&an.disc, Density::PerElement(&d))?;
    Ok(IdentityCheck::new(
        "position-trace",
        "position-trace-identity",
        r.value,
        r.error,
        Some(TAU_TRACE_IDENTITY * an.volume()),
        None,
    ))
}

/// L^1 norm of `trace A_Q1(psi_hat_a) - (n + |a^T|^2)`.
pub fn projected_trace_check(an: &Analysis, a: &LorentzVector) -> Result<IdentityCheck> {
    let w = make_test_field_projected(an, a)?;
    let n = an.n() as f64;
    let tv: Vec<f64> = an
        .vertex_shapes
        .iter()
        .map(|s| s.tangential_part(a).norm_sq())
        .collect();
    let d: Vec<f64> = trace_aq1_density(an, &w)
        .iter()
        .enumerate()
        .map(|(e, t)| (t - n - an.disc.element_average(e, &tv)).abs())
        .collect();
    let r = integrate_over_mesh(&an.disc, Density::PerElement(&d))?;
    Ok(IdentityCheck::new(
        "projected-position-trace",
        "projected-position-trace-identity",
        r.value,
        r.error,
        Some(TAU_TRACE_IDENTITY * an.volume()),
        Some(a),
    ))
}

/// `max_j |int H_j dV| / Vol`.
pub fn curvature_center_check(an: &Analysis) -> Result<IdentityCheck> {
    let h = make_test_field_h(an)?;
    Ok(IdentityCheck::new(
        "curvature-center",
        "mean-curvature-test-field",
        h.center_residual,
        0.0,
        Some(TAU_IDENTITY),
        None,
    ))
}

/// Compares the discrete `int trace A_Q1(H)` with the pointwise
/// `int [trace(A_H^2) + |grad^perp H|^2]`, using finite differences of the
/// closed-form `H`. `None` when `H` has no closed form.
pub fn curvature_trace_cross_check(an: &Analysis) -> Result<Option<IdentityCheck>> {
    let imm = an.immersion.as_ref();
    let domain: Domain = imm.domain();
    if imm.mean_curvature(&an.disc.mesh.vertices[0]).is_none() {
        return Ok(None);
    }
    let step = 1e-5;
    let pointwise = |s: &crate::immersion::ShapeSample, h: &LorentzVector| -> f64 {
        let mut shape_part = 0.0;
        for row in &s.second_fundamental_form {
            for ii in row {
                shape_part += ip(ii, h).powi(2);
            }
        }
        let frame = domain.tangent_frame(&s.point);
        let n = frame.len();
        let d: Vec<LorentzVector> = (0..n)
            .map(|i| {
                let mut u = vec![0.0; n];
                u[i] = step;
                let plus = imm
                    .mean_curvature(&domain.chart(&s.point, &frame, &u))
                    .unwrap();
                u[i] = -step;
                let minus = imm
                    .mean_curvature(&domain.chart(&s.point, &frame, &u))
                    .unwrap();
                s.normal_part(&(&plus - &minus).scaled(0.5 / step))
            })
            .collect();
        let ginv = s
            .metric
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::zeros(n, n));
        let mut normal_part = 0.0;
        for i in 0..n {
            for j in 0..n {
                normal_part += ginv[(i, j)] * ip(&d[i], &d[j]);
            }
        }
        shape_part + normal_part
    };
    let continuous = an.integrate_geometry(pointwise)?;
    let h = make_test_field_h(an)?;
    let discrete = integrate_over_mesh(&an.disc, Density::PerElement(&trace_aq1_density(an, &h)))?;
    let value = discrete.value - continuous.value;
    Ok(Some(IdentityCheck::new(
        "curvature-trace",
        "mean-curvature-trace-formula",
        value,
        continuous.error + discrete.error,
        Some(TAU_TRACE_IDENTITY * an.volume().max(continuous.value.abs())),
        None,
    )))
}

/// Monte Carlo over the section of `v -> Q(v, v)` for the main-lemma form of
/// `W = H`, against the closed-form average.
pub fn averaging_check(
    an: &Analysis,
    a: &LorentzVector,
    samples: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    let h = make_test_field_h(an)?;
    let m = an.m();
    let f: Vec<Vec<f64>> = (0..m)
        .map(|i| f_along(&h.values, &LorentzVector::basis(m, i)))
        .collect();
    let lam = an.lambda1();
    let mat = DMatrix::from_fn(m, m, |i, j| {
        an.pencil.dirichlet_product(&f[i], &f[j]) - lam * an.pencil.mass_product(&f[i], &f[j])
    });
    let sym = 0.5 * (&mat + mat.transpose());
    let q = SymBilinearForm::new(sym)?;
    let mc = crate::quadrature::monte_carlo_section_integral(&q, a, samples, seed)?;
    let exact = crate::minkowski::avg_lemma_rhs(&q, a)?;
    Ok(IdentityCheck::new(
        "section-average",
        "section-averaging-lemma",
        mc.value - exact,
        mc.error,
        Some(4.0 * mc.error + 1e-12 * exact.abs()),
        Some(a),
    ))
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, OnceLock};

    use super::*;
    use crate::gallery::{gallery_counterexample, gallery_round_sphere};
    use crate::immersion::{SharedImmersion, Translated};
    use crate::mesh::build_icosphere_mesh;

    fn sphere() -> &'static Analysis {
        static A: OnceLock<Analysis> = OnceLock::new();
        A.get_or_init(|| {
            let imm: SharedImmersion = Arc::new(
                gallery_round_sphere(2, 1.0, LorentzVector::zeros(4), LorentzVector::time_axis(4))
                    .unwrap(),
            );
            Analysis::new(imm, &build_icosphere_mesh(3)).unwrap()
        })
    }

    fn counterexample() -> &'static Analysis {
        static A: OnceLock<Analysis> = OnceLock::new();
        A.get_or_init(|| {
            Analysis::new(
                Arc::new(gallery_counterexample(2).unwrap()),
                &build_icosphere_mesh(3),
            )
            .unwrap()
        })
    }

    fn e1() -> LorentzVector {
        LorentzVector::time_axis(4)
    }

    fn boosted() -> LorentzVector {
        LorentzVector::boost(0.7, &[0.6, 0.0, 0.8])
    }

    #[test]
    fn position_trace_density_is_n() {
        for an in [sphere(), counterexample()] {
            let w = make_test_field_position(an).unwrap();
            for t in trace_aq1_density(an, &w) {
                assert!((t - 2.0).abs() < 1e-9, "{t}");
            }
        }
    }

    #[test]
    fn scalar_times_timelike_gives_minus_gradient_square() {
        let an = counterexample();
        let a = boosted();
        let f: Vec<f64> = an
            .disc
            .positions
            .iter()
            .map(|x| x[2] + 0.3 * x[3] * x[3])
            .collect();
        let w = make_test_field_custom(an, f.iter().map(|v| a.scaled(*v)).collect()).unwrap();
        let fc: Vec<f64> = w.values.iter().map(|x| -ip(&a, x)).collect();
        for (e, t) in trace_aq1_density(an, &w).iter().enumerate() {
            let g = an.disc.gradient_dot(e, &fc, &fc);
            assert!((t + g).abs() <= 1e-9 * g.max(1.0), "{t} {g}");
        }
    }

    #[test]
    fn trace_density_is_basis_independent() {
        let an = counterexample();
        let w = make_test_field_h(an).unwrap();
        let canonical = trace_aq1_density(an, &w);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let basis = PseudoOrthonormalBasis::random(4, &mut rng);
            let other = trace_aq1_density_in_basis(an, &w, &basis);
            for (x, y) in canonical.iter().zip(&other) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} {y}");
            }
        }
    }

    #[test]
    fn projected_field_examples() {
        let s = sphere();
        let w = make_test_field_projected(s, &e1()).unwrap();
        for (x, y) in w.values.iter().zip(&s.centered_positions) {
            assert!((x - y).euclid_norm() < 1e-12);
        }
        let c = counterexample();
        let w = make_test_field_projected(c, &e1()).unwrap();
        assert!(w.values.iter().all(|x| x[0].abs() < 1e-12));
    }

    #[test]
    fn curvature_field_is_centered() {
        for an in [sphere(), counterexample()] {
            let h = make_test_field_h(an).unwrap();
            assert!(
                h.centered || h.center_residual <= 1e-3,
                "{}",
                h.center_residual
            );
            assert!(h.center_residual <= 1e-3);
        }
    }

    #[test]
    fn main_lemma_examples() {
        let s = sphere();
        let h = make_test_field_h(s).unwrap();
        let r = main_lemma_sides(s, &h, &e1()).unwrap();
        assert!(r.holds && r.relative_slack.abs() <= 1e-2, "{r:?}");
        let c = counterexample();
        let fields = [
            make_test_field_h(c).unwrap(),
            make_test_field_position(c).unwrap(),
            make_test_field_projected(c, &e1()).unwrap(),
        ];
        for w in &fields {
            for a in [e1(), boosted()] {
                let r = main_lemma_sides(c, w, &a).unwrap();
                assert!(r.holds && r.slack > 0.0, "{r:?}");
            }
        }
        let zero = make_test_field_custom(c, vec![LorentzVector::zeros(4); c.disc.vertex_count()])
            .unwrap();
        assert!(matches!(
            main_lemma_sides(c, &zero, &e1()),
            Err(LabError::Domain(_))
        ));
        let spacelike = LorentzVector::basis(4, 1);
        assert!(main_lemma_sides(c, &fields[0], &spacelike).is_err());
    }

    #[test]
    fn reilly_examples() {
        let r = reilly_bound(sphere()).unwrap();
        assert!(r.holds && r.equality);
        assert!((r.rhs - 2.0).abs() < 1e-12);
        let r = reilly_bound(counterexample()).unwrap();
        assert!(!r.holds);
        assert!(
            (r.rhs - 26.0 / 15.0).abs() / (26.0 / 15.0) < 1e-2,
            "{}",
            r.rhs
        );
        assert!(r.rhs <= 16.0 / 9.0);
    }

    #[test]
    fn curvature_quotient_examples() {
        let r = curvature_quotient_bound(sphere(), &e1()).unwrap();
        assert!(r.holds && r.relative_slack.abs() <= 1e-2, "{r:?}");
        let r = curvature_quotient_bound(counterexample(), &e1()).unwrap();
        assert!(r.holds && r.slack > 0.0);
        let cross = curvature_trace_cross_check(counterexample())
            .unwrap()
            .unwrap();
        assert!(cross.within_tolerance, "{cross:?}");
    }

    #[test]
    fn position_bounds_examples() {
        let (plain, projected) = position_bounds(sphere(), &e1()).unwrap();
        assert!(plain.equality && projected.equality);
        assert!((plain.lhs - projected.lhs).abs() < 1e-12);
        let (plain, projected) = position_bounds(sphere(), &boosted()).unwrap();
        assert!(plain.holds && projected.holds);
        let (plain, projected) = position_bounds(counterexample(), &e1()).unwrap();
        assert!(plain.slack > 0.0 && projected.slack > 0.0);
    }

    #[test]
    fn e_bounds_ordering_and_translation_invariance() {
        let c = counterexample();
        let mo = c.directional_moments().unwrap();
        let shifted: SharedImmersion = Arc::new(Translated::new(
            c.immersion.clone(),
            LorentzVector::new(vec![0.4, -1.0, 2.0, 0.5]),
        ));
        let moved = Analysis::new(shifted, &c.disc.mesh).unwrap();
        let mo2 = moved.directional_moments().unwrap();
        for a in sample_directions(4, 20, 9) {
            let e = e_bound(c, &mo, &a).unwrap();
            let es = estar_bound(c, &mo, &a).unwrap();
            assert!(e.rhs <= es.rhs);
            assert!(e.holds && e.slack > 0.0 && es.slack > 0.0);
            let e2 = e_bound(&moved, &mo2, &a).unwrap();
            assert!(
                (e.rhs - e2.rhs).abs() <= 1e-10 * e.rhs,
                "{} {}",
                e.rhs,
                e2.rhs
            );
        }
        let s = sphere();
        let es = estar_bound(s, &s.directional_moments().unwrap(), &e1()).unwrap();
        assert!(es.equality && (es.rhs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn q_form_is_symmetric_and_semidefinite() {
        for an in [sphere(), counterexample()] {
            let q = causal_q_matrix(an);
            assert!((&q - q.transpose()).amax() <= 1e-12 * q.amax());
            let min = SymmetricEigen::new(q.clone()).eigenvalues.min();
            assert!(min >= -TAU_BOUND * q.norm(), "{min}");
        }
        let s = sphere();
        assert!(causal_q_form(s, &e1(), &e1()).abs() < 1e-12);
        let x = LorentzVector::basis(4, 1);
        assert!(causal_q_form(s, &x, &x).abs() <= TAU_CAUSAL * q_scale(s));
        let v = boosted();
        let w = LorentzVector::basis(4, 2);
        assert!((causal_q_form(s, &v, &w) - causal_q_form(s, &w, &v)).abs() < 1e-12);
    }

    #[test]
    fn causal_vector_check_examples() {
        let r = causal_reilly_check(sphere(), &e1()).unwrap();
        assert!(r.precondition_met && r.reilly.as_ref().unwrap().holds);
        assert!(causal_kernel_search(sphere()).found);
        let r = causal_reilly_check(counterexample(), &e1()).unwrap();
        assert!(!r.precondition_met && r.reilly.is_none());
        assert!(!causal_kernel_search(counterexample()).found);
        assert!(matches!(
            causal_reilly_check(sphere(), &LorentzVector::basis(4, 1)),
            Err(LabError::Domain(_))
        ));
    }

    #[test]
    fn equality_diagnostic_examples() {
        let s = sphere();
        let d = equality_diagnostic(s, &e1()).unwrap();
        assert!(d.residual < STRICT_FACTOR * TAU_EQ, "{}", d.residual);
        assert!(d.tangential_mean < 1e-12);
        assert!(d.mu_integral.abs() <= TAU_CENTER * s.volume());
        assert!((d.radius_from_curvature - 1.0).abs() < 1e-12);
        let c = counterexample();
        for a in std::iter::once(e1()).chain(sample_directions(4, 10, 5)) {
            let d = equality_diagnostic(c, &a).unwrap();
            assert_eq!(d.verdict, Verdict::Strict, "{}", d.residual);
            assert!(d.mu_integral.abs() <= TAU_CENTER * c.volume());
            for (mu, r) in d.mu.iter().zip(eigen_residual_field(c)) {
                assert!((mu + ip(&a, &r)).abs() < 1e-12);
            }
        }
        assert_eq!(classify_residual(0.01), Verdict::EqualityCase);
        assert_eq!(classify_residual(0.07), Verdict::Inconclusive);
        assert_eq!(classify_residual(0.3), Verdict::Strict);
    }

    #[test]
    fn infimum_over_more_directions_is_smaller() {
        let c = counterexample();
        let mo = c.directional_moments().unwrap();
        let few = infimum_over_directions(c, &mo, 20, 4).unwrap();
        let many = infimum_over_directions(c, &mo, 200, 4).unwrap();
        assert!(many.rhs <= few.rhs);
        assert!(many.holds && many.slack > 0.0);
        assert!(infimum_over_directions(c, &mo, 0, 4).is_err());
        let s = sphere();
        let best = infimum_over_directions(s, &s.directional_moments().unwrap(), 200, 4).unwrap();
        let a = LorentzVector::new(best.a.clone().unwrap());
        assert!(
            ip(&a, &e1()) < -0.99 || (best.rhs - 2.0).abs() < 1e-2,
            "{a:?}"
        );
    }

    #[test]
    fn rejudging_with_looser_tolerance() {
        let mut r = reilly_bound(counterexample()).unwrap();
        assert!(!r.holds);
        r.rejudge(&Tolerances {
            bound: 0.5,
            ..Tolerances::default()
        });
        assert!(r.holds);
        assert!(Tolerances {
            eq: -1.0,
            ..Tolerances::default()
        }
        .validate()
        .is_err());
    }
}
