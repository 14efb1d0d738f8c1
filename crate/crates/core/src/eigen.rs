//! Smallest positive eigenpair of the pencil `K f = lambda M f`.
//!
//! Block inverse subspace iteration: each sweep solves `K Y = M X` by
//! Jacobi-preconditioned conjugate gradients on the singular but consistent
//! system, removes the constant mode, and performs Rayleigh-Ritz on the
//! `M`-orthonormalized block.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::fem::FemPencil;
use crate::sparse::{axpy, dot, norm, CsrMatrix};

pub const TAU_EIG: f64 = 1e-8;
pub const EIG_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug)]
pub struct EigenOptions {
    pub block: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub cg_tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            block: 10,
            tol: TAU_EIG,
            max_iter: EIG_MAX_ITER,
            cg_tol: 1e-12,
            seed: 0x5eed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Spectrum {
    pub lambda1: f64,
    /// `M`-normalized, `M`-orthogonal to constants.
    #[serde(skip)]
    pub eigenfunction: Vec<f64>,
    pub iterations: usize,
    pub cg_iterations: usize,
    /// `||K f - lambda M f|| / (lambda ||M f||)`.
    pub residual: f64,
    /// Ritz values within `10 tau_eig` (relative) of `lambda1`.
    pub cluster_size: usize,
    pub ritz_values: Vec<f64>,
}

pub fn solve_lambda1(pencil: &FemPencil) -> Result<Spectrum> {
    solve_lambda1_with(pencil, &EigenOptions::default())
}

struct Deflator {
    m1: Vec<f64>,
    total: f64,
}

impl Deflator {
    fn new(mass: &CsrMatrix) -> Self {
        let ones = vec![1.0; mass.order()];
        let m1 = mass.mul_vec(&ones);
        let total = m1.iter().sum();
        Deflator { m1, total }
    }

    /// `x - (1^T M x / 1^T M 1) 1`.
    fn apply(&self, x: &mut [f64]) {
        let c = dot(&self.m1, x) / self.total;
        for xi in x.iter_mut() {
            *xi -= c;
        }
    }
}

fn pcg(
    k: &CsrMatrix,
    diag_inv: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_it: usize,
) -> usize {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return 0;
    }
    let mut r = k.mul_vec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mean_free = |r: &mut [f64]| {
        let c = r.iter().sum::<f64>() / n as f64;
        r.iter_mut().for_each(|v| *v -= c);
    };
    mean_free(&mut r);
    let mut z: Vec<f64> = r.iter().zip(diag_inv).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    while it < max_it && norm(&r) > tol * bnorm {
        k.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        mean_free(&mut r);
        for i in 0..n {
            z[i] = r[i] * diag_inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        it += 1;
    }
    it
}

/// Two passes of classical Gram-Schmidt in the `M` inner product.
/// Returns false if a column collapsed.
fn m_orthonormalize(mass: &CsrMatrix, block: &mut [Vec<f64>]) -> bool {
    for j in 0..block.len() {
        for _ in 0..2 {
            let mx = mass.mul_vec(&block[j]);
            let coeffs: Vec<f64> = (0..j).map(|i| dot(&block[i], &mx)).collect();
            for (i, c) in coeffs.into_iter().enumerate() {
                let (head, tail) = block.split_at_mut(j);
                axpy(-c, &head[i], &mut tail[0]);
            }
        }
        let mx = mass.mul_vec(&block[j]);
        let nrm = dot(&block[j], &mx);
        if !(nrm.is_finite() && nrm > 0.0) {
            return false;
        }
        let s = 1.0 / nrm.sqrt();
        block[j].iter_mut().for_each(|v| *v *= s);
    }
    true
}

pub fn solve_lambda1_with(pencil: &FemPencil, opts: &EigenOptions) -> Result<Spectrum> {
    let k = &pencil.stiffness;
    let mass = &pencil.mass;
    let n = pencil.order();
    if n < 3 {
        return Err(LabError::Numerical(format!(
            "pencil of order {n} is too small"
        )));
    }
    let p = opts.block.min(n - 1).max(1);
    let deflator = Deflator::new(mass);
    let diag_inv: Vec<f64> = k
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_column = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        deflator.apply(&mut x);
        x
    };
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| random_column(&mut rng)).collect();
    if !m_orthonormalize(mass, &mut x) {
        return Err(LabError::Numerical("degenerate starting block".into()));
    }
    let mut theta: Option<Vec<f64>> = None;
    let mut cg_total = 0;
    let mut last_residual = f64::INFINITY;
    let cg_max = 20 * n;
    for iter in 1..=opts.max_iter {
        let mut y: Vec<Vec<f64>> = Vec::with_capacity(p);
        for (j, xj) in x.iter().enumerate() {
            let b = mass.mul_vec(xj);
            let mut sol = match &theta {
                Some(t) => xj.iter().map(|v| v / t[j]).collect(),
                None => vec![0.0; n],
            };
            cg_total += pcg(k, &diag_inv, &b, &mut sol, opts.cg_tol, cg_max);
            deflator.apply(&mut sol);
            y.push(sol);
        }
        let mut tries = 0;
        while !m_orthonormalize(mass, &mut y) {
            tries += 1;
            if tries > 5 {
                return Err(LabError::Numerical("subspace collapsed".into()));
            }
            let last = y.len() - 1;
            y[last] = random_column(&mut rng);
        }
        let ky: Vec<Vec<f64>> = y.iter().map(|c| k.mul_vec(c)).collect();
        let a = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        x = order
            .iter()
            .map(|&c| {
                let mut col = vec![0.0; n];
                for (r, yr) in y.iter().enumerate() {
                    axpy(eig.eigenvectors[(r, c)], yr, &mut col);
                }
                col
            })
            .collect();
        let lambda = values[0];
        if lambda.is_nan() || lambda <= 0.0 {
            return Err(LabError::Numerical(format!(
                "non-positive Ritz value {lambda:e}; is the mesh connected?"
            )));
        }
        let kx = k.mul_vec(&x[0]);
        let mx = mass.mul_vec(&x[0]);
        let res: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - lambda * b).collect();
        last_residual = norm(&res) / (lambda * norm(&mx));
        theta = Some(values.clone());
        if last_residual <= opts.tol {
            let mut f = x.swap_remove(0);
            let (imax, _) = f.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| {
                if v.abs() > acc.1 {
                    (i, v.abs())
                } else {
                    acc
                }
            });
            if f[imax] < 0.0 {
                f.iter_mut().for_each(|v| *v = -*v);
            }
            let cluster_size = values
                .iter()
                .filter(|&&t| (t - lambda).abs() <= 10.0 * opts.tol * lambda)
                .count();
            return Ok(Spectrum {
                lambda1: lambda,
                eigenfunction: f,
                iterations: iter,
                cg_iterations: cg_total,
                residual: last_residual,
                cluster_size,
                ritz_values: values,
            });
        }
    }
    Err(LabError::Numerical(format!(
        "eigensolver did not converge in {} iterations (residual {last_residual:e}, {cg_total} CG steps)",
        opts.max_iter
    )))
}
