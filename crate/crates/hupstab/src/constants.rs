//! Stability constants `C(N,k)`: closed-form bounds and the numeric
//! minimum of the sector Rayleigh quotient
//! `(lap + x2_grad − 2k·l2) / grad − (N+2)` on radial functions of `R^{N+2k}`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_algebra::PolyGaussFn;
use crate::functionals::{energies, full_space, sector_numerator};

/// Largest `N + 2k` for which the numeric pencil is attempted.
pub const MAX_PENCIL_DIM: u32 = 60;
const PIVOT_DROP: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-12;
const REFINE_TOL: f64 = 1e-6;
const SANDWICH_TOL: f64 = 1e-6;
/// Ratio exponent of the even-tempered ladder, `ρ = exp(κ/√D)`.
const LADDER_KAPPA: f64 = 0.94;

/// `√((N+2k)² − 8k) − N` in rationalized form, `4k(N+k−2)/(√((N+2k)²−8k) + N)`.
pub fn lower_bound(n: u32, k: u32) -> f64 {
    let (nf, kf) = (f64::from(n), f64::from(k));
    let d = nf + 2.0 * kf;
    4.0 * kf * (nf + kf - 2.0) / ((d * d - 8.0 * kf).sqrt() + nf)
}

/// `√((N+2k)² − 8k) − N` evaluated directly. The square root is corrected
/// with its exact residual so the subtraction keeps full precision.
pub fn lower_bound_direct(n: u32, k: u32) -> f64 {
    let (nf, kf) = (f64::from(n), f64::from(k));
    let d = nf + 2.0 * kf;
    let m = d * d - 8.0 * kf;
    let s = m.sqrt();
    if s == 0.0 {
        return -nf;
    }
    let e = (-s).mul_add(s, m);
    (s - nf) + e / (2.0 * s)
}

/// `K(N) = (4N − 4)/(√(N² + 4N − 4) + N)`, the infimum of the lower bounds
/// over `k ≥ 1`.
pub fn k_of_n(n: u32) -> f64 {
    let nf = f64::from(n);
    (4.0 * nf - 4.0) / ((nf * nf + 4.0 * nf - 4.0).sqrt() + nf)
}

/// `2k − 4k/(N+2k)` in closed form.
pub fn gaussian_quotient_closed(n: u32, k: u32) -> f64 {
    let (nf, kf) = (f64::from(n), f64::from(k));
    2.0 * kf - 4.0 * kf / (nf + 2.0 * kf)
}

/// Quotient of `e^{-r²/2}` minus `N+2`, evaluated through the energies.
pub fn gaussian_quotient(n: u32, k: u32) -> Result<f64> {
    let g = PolyGaussFn::optimizer(1.0, 1.0);
    let num = sector_numerator(&g, n, k)?;
    let grad = energies(&g, n + 2 * k)?.grad;
    Ok(num / grad - f64::from(n + 2))
}

/// `√(N² + 4N − 4) − N`, the known value of `C(N, 1)`.
pub fn reference_c1(n: u32) -> f64 {
    lower_bound(n, 1)
}

/// `(N+2k)c − c² − 2k` with `c = (2N + 2k + K)/2`.
pub fn completion_coefficient(n: u32, k: u32, big_k: f64) -> f64 {
    let (nf, kf) = (f64::from(n), f64::from(k));
    let c = (2.0 * nf + 2.0 * kf + big_k) / 2.0;
    (nf + 2.0 * kf) * c - c * c - 2.0 * kf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// `e^{-a_j r²/2}` with `a_j = ρ^{p−j}` and `ρ^p` closest to the scale.
    #[default]
    EvenTempered,
    /// `r^{2j} e^{-s r²/2}`.
    Monomial,
}

/// Basis profiles for the pencil on `R^D`.
pub fn basis(kind: BasisKind, d: u32, m: usize, scale: f64) -> Vec<PolyGaussFn> {
    match kind {
        BasisKind::Monomial => (0..m)
            .map(|j| {
                let mut c = vec![0.0; j + 1];
                c[j] = 1.0;
                PolyGaussFn::from_pairs(&[(&c, 0.5 * scale)]).expect("finite basis")
            })
            .collect(),
        BasisKind::EvenTempered => {
            let ln_rho = LADDER_KAPPA / f64::from(d.max(1)).sqrt();
            let p_top = (scale.ln() / ln_rho).round() as i64;
            (0..m as i64).map(|j| PolyGaussFn::optimizer(1.0, ((p_top - j) as f64 * ln_rho).exp())).collect()
        }
    }
}

/// Numerator and gradient Gram matrices of the sector quotient on a basis.
pub fn assemble_pencil(basis: &[PolyGaussFn], n: u32, k: u32) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = n + 2 * k;
    let m = basis.len();
    let parts = basis
        .iter()
        .map(|b| Ok((b.clone(), b.derivative(), b.radial_laplacian(d)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut a = DMatrix::zeros(m, m);
    let mut bm = DMatrix::zeros(m, m);
    let kf = f64::from(k);
    for i in 0..m {
        for j in i..m {
            let (fi, di, li) = &parts[i];
            let (fj, dj, lj) = &parts[j];
            let grad = full_space(&di.mul(dj), d)?;
            let lap = full_space(&li.mul(lj), d)?;
            let x2g = full_space(&di.mul(dj).mul_r().mul_r(), d)?;
            let l2 = full_space(&fi.mul(fj), d)?;
            let aij = lap + x2g - 2.0 * kf * l2;
            a[(i, j)] = aij;
            a[(j, i)] = aij;
            bm[(i, j)] = grad;
            bm[(j, i)] = grad;
        }
    }
    Ok((a, bm))
}

/// The pencil on the monomial basis `r^{2j}e^{-s r²/2}`, `j < m`.
pub fn assemble_rayleigh(n: u32, k: u32, m: usize, scale: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if m == 0 || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain("basis size must be positive and scale > 0".into()));
    }
    assemble_pencil(&basis(BasisKind::Monomial, n + 2 * k, m, scale), n, k)
}

#[derive(Debug, Clone)]
pub struct GenEig {
    pub lambda_min: f64,
    /// Minimizing coefficients, normalized to `xᵀBx = 1`.
    pub coeffs: DVector<f64>,
    pub sweeps: usize,
}

/// Cyclic Jacobi on a symmetric matrix. Returns eigenvalues and the
/// accumulated rotations (columns are eigenvectors).
pub fn jacobi_eigen(mut c: DMatrix<f64>, tol: f64) -> (DVector<f64>, DMatrix<f64>, usize) {
    let n = c.nrows();
    let mut v = DMatrix::identity(n, n);
    let norm = c.norm().max(f64::MIN_POSITIVE);
    let off = |c: &DMatrix<f64>| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += c[(i, j)] * c[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&c) > tol * norm && sweeps < 100 {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = c[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (c[(q, q)] - c[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for r in 0..n {
                    let (crp, crq) = (c[(r, p)], c[(r, q)]);
                    c[(r, p)] = cs * crp - sn * crq;
                    c[(r, q)] = sn * crp + cs * crq;
                }
                for r in 0..n {
                    let (cpr, cqr) = (c[(p, r)], c[(q, r)]);
                    c[(p, r)] = cs * cpr - sn * cqr;
                    c[(q, r)] = sn * cpr + cs * cqr;
                }
                for r in 0..n {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = cs * vrp - sn * vrq;
                    v[(r, q)] = sn * vrp + cs * vrq;
                }
            }
        }
    }
    (c.diagonal(), v, sweeps)
}

/// Smallest `λ` with `Ax = λBx`, by diagonal scaling, Cholesky of `B` and
/// cyclic Jacobi on `L⁻¹AL⁻ᵀ`.
pub fn min_generalized_eig(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GenEig> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n || b.shape() != (n, n) {
        return Err(Error::Domain("pencil matrices must be square and equal in size".into()));
    }
    let mut scale = DVector::zeros(n);
    for i in 0..n {
        let bii = b[(i, i)];
        if !(bii > 0.0 && bii.is_finite()) {
            return Err(Error::Conditioning(format!(
                "B has non-positive diagonal entry at {i}; try a smaller basis or another scale"
            )));
        }
        scale[i] = 1.0 / bii.sqrt();
    }
    let dm = DMatrix::from_diagonal(&scale);
    let as_ = &dm * a * &dm;
    let bs = &dm * b * &dm;
    let chol = nalgebra::Cholesky::new(bs).ok_or_else(|| {
        Error::Conditioning(
            "B is not numerically positive definite; try a smaller basis or another scale".into(),
        )
    })?;
    let l = chol.l();
    if let Some(i) = (0..n).find(|&i| l[(i, i)] * l[(i, i)] < PIVOT_DROP) {
        return Err(Error::Conditioning(format!(
            "Cholesky pivot {i} below drop tolerance {PIVOT_DROP:e}; try a smaller basis or another scale"
        )));
    }
    let y = l.solve_lower_triangular(&as_).expect("nonzero pivots");
    let c = l.solve_lower_triangular(&y.transpose()).expect("nonzero pivots");
    let c = (&c + c.transpose()) * 0.5;
    let (vals, vecs, sweeps) = jacobi_eigen(c, JACOBI_TOL);
    let imin = vals.argmin().0;
    let y = vecs.column(imin).into_owned();
    let z = l.transpose().solve_upper_triangular(&y).expect("nonzero pivots");
    let mut x = dm * z;
    let bx = (x.transpose() * b * &x)[(0, 0)];
    x /= bx.sqrt();
    if x.iter().map(|t| t.abs()).fold(0.0, f64::max) != x.max() {
        x = -x;
    }
    Ok(GenEig { lambda_min: vals[imin], coeffs: x, sweeps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOpts {
    pub basis: BasisKind,
    pub m_list: Vec<usize>,
    pub scale_list: Vec<f64>,
}

impl Default for EstimateOpts {
    fn default() -> Self {
        EstimateOpts { basis: BasisKind::EvenTempered, m_list: vec![16, 24, 32], scale_list: vec![4.0, 16.0] }
    }
}

impl EstimateOpts {
    /// Monomial basis with seven scales log-spaced in `[0.5, 2]`.
    pub fn monomial() -> Self {
        EstimateOpts {
            basis: BasisKind::Monomial,
            m_list: vec![8, 16, 24],
            scale_list: (0..7).map(|i| 0.5 * 4f64.powf(i as f64 / 6.0)).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(Error::Domain("m_list must hold positive basis sizes".into()));
        }
        if self.scale_list.is_empty() || self.scale_list.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Domain("scale_list must hold positive scales".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    #[serde(rename = "N")]
    pub n: u32,
    pub k: u32,
    pub basis_size: usize,
    pub scale: f64,
    /// `None` when `N + 2k` exceeds the numeric cap or every solve failed.
    pub value: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub gaussian_quotient: f64,
    pub reference: Option<f64>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
    /// Profile on `R^{N+2k}` attaining `value`.
    #[serde(skip)]
    pub minimizer: Option<PolyGaussFn>,
}

impl StabilityEstimate {
    pub fn sandwich_ok(&self) -> bool {
        self.value.is_some_and(|v| {
            self.lower - SANDWICH_TOL <= v && v <= self.upper.min(self.gaussian_quotient) + SANDWICH_TOL
        })
    }
}

struct Solve {
    value: f64,
    minimizer: PolyGaussFn,
}

fn solve_one(n: u32, k: u32, kind: BasisKind, m: usize, scale: f64) -> Result<Solve> {
    let fns = basis(kind, n + 2 * k, m, scale);
    let (a, b) = assemble_pencil(&fns, n, k)?;
    let ge = min_generalized_eig(&a, &b)?;
    let mut minimizer = PolyGaussFn::zero(crate::Parity::Even);
    for (f, c) in fns.iter().zip(ge.coeffs.iter()) {
        minimizer = minimizer.add_scaled(f, *c)?;
    }
    Ok(Solve { value: ge.lambda_min - f64::from(n + 2), minimizer })
}

/// Numeric `C(N,k)` as the smallest pencil eigenvalue over the scales at
/// the largest basis size, minus `N+2`.
#[allow(non_snake_case)]
pub fn estimate_C(n: u32, k: u32, opts: &EstimateOpts) -> Result<StabilityEstimate> {
    if n < 2 {
        return Err(Error::Domain("N must be at least 2".into()));
    }
    opts.validate()?;
    let gq = gaussian_quotient(n, k)?;
    let mut est = StabilityEstimate {
        n,
        k,
        basis_size: *opts.m_list.last().expect("validated"),
        scale: f64::NAN,
        value: None,
        lower: lower_bound(n, k),
        upper: 2.0 * f64::from(k),
        gaussian_quotient: gq,
        reference: (k == 1).then(|| reference_c1(n)),
        converged: false,
        diagnostics: Vec::new(),
        minimizer: None,
    };
    if n + 2 * k > MAX_PENCIL_DIM {
        est.diagnostics
            .push(format!("N + 2k = {} exceeds {MAX_PENCIL_DIM}; closed-form bounds only", n + 2 * k));
        return Ok(est);
    }
    let m_last = est.basis_size;
    let m_prev = opts.m_list.iter().rev().nth(1).copied();
    let mut best: Option<(f64, Solve, Option<f64>)> = None;
    for &s in &opts.scale_list {
        let last = match solve_one(n, k, opts.basis, m_last, s) {
            Ok(v) => v,
            Err(e) => {
                est.diagnostics.push(format!("scale {s}, m {m_last}: {e}"));
                continue;
            }
        };
        if best.as_ref().is_some_and(|b| b.1.value <= last.value) {
            continue;
        }
        let prev = m_prev.and_then(|m| match solve_one(n, k, opts.basis, m, s) {
            Ok(v) => Some(v.value),
            Err(e) => {
                est.diagnostics.push(format!("scale {s}, m {m}: {e}"));
                None
            }
        });
        best = Some((s, last, prev));
    }
    let Some((s, last, prev)) = best else {
        est.diagnostics.push("every pencil solve failed".into());
        return Ok(est);
    };
    est.scale = s;
    est.value = Some(last.value);
    est.minimizer = Some(last.minimizer);
    let refined = match (m_prev, prev) {
        (None, _) => true,
        (Some(_), Some(p)) => (p - last.value).abs() < REFINE_TOL,
        (Some(_), None) => false,
    };
    if !refined {
        est.diagnostics.push("basis refinement changed the value by more than 1e-6".into());
    }
    let sandwich = est.sandwich_ok();
    if !sandwich {
        est.diagnostics.push("value outside the closed-form bounds".into());
    }
    est.converged = refined && sandwich;
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedEstimate {
    pub estimate: StabilityEstimate,
    /// `(k, lower_bound(N,k))` for `2 ≤ k ≤ kmax`.
    pub certificate: Vec<(u32, f64)>,
    pub certified: bool,
}

/// `C(N) = C(N,1)`, with a check that every sector `2 ≤ k ≤ kmax` has a
/// lower bound above the numeric value.
#[allow(non_snake_case)]
pub fn estimate_C_N(n: u32, kmax: u32, opts: &EstimateOpts) -> Result<CertifiedEstimate> {
    if kmax < 2 {
        return Err(Error::Domain("kmax must be at least 2".into()));
    }
    let estimate = estimate_C(n, 1, opts)?;
    let certificate: Vec<(u32, f64)> = (2..=kmax).map(|k| (k, lower_bound(n, k))).collect();
    let value = estimate.value.unwrap_or(estimate.lower);
    let certified = certificate.iter().all(|&(_, lb)| lb > value);
    let mut estimate = estimate;
    if !certified {
        estimate.diagnostics.push("a higher sector bound does not exceed the k = 1 value".into());
    }
    Ok(CertifiedEstimate { estimate, certificate, certified })
}

/// Estimates on the `(N, k)` grid, in row-major order of the inputs.
pub fn sweep(dims: &[u32], ks: &[u32], opts: &EstimateOpts) -> Result<Vec<StabilityEstimate>> {
    let keys: Vec<(u32, u32)> = dims.iter().flat_map(|&n| ks.iter().map(move |&k| (n, k))).collect();
    keys.par_iter().map(|&(n, k)| estimate_C(n, k, opts)).collect()
}

pub const CSV_COLUMNS: &str = "N,k,value,lower,upper,gaussian_quotient,reference,converged";

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

pub fn csv_row(e: &StabilityEstimate) -> String {
    format!(
        "{},{},{},{:.12e},{:.12e},{:.12e},{},{}",
        e.n,
        e.k,
        opt_num(e.value),
        e.lower,
        e.upper,
        e.gaussian_quotient,
        opt_num(e.reference),
        e.converged
    )
}
