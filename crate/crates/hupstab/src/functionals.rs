//! Base energies, uncertainty deficits and the Gaussian-weighted right-hand
//! sides for radial inputs on `R^N`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exact_algebra::{Parity, PolyGaussFn};
use crate::integration::{quad_radial_fn, sphere_area, RadialProfile};

const PROFILE_NODES: usize = 300;

/// `∫_{R^d} f(|x|) dx` for an even exact-class `f`.
pub fn full_space(f: &PolyGaussFn, d: u32) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    Ok(sphere_area(d)? * f.integral_radial(d)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyVector {
    pub l2: f64,
    pub grad: f64,
    pub lap: f64,
    pub x2_l2: f64,
    pub x2_grad: f64,
    pub dim: u32,
}

impl EnergyVector {
    /// Sum of all five energies; the natural magnitude for slack terms.
    pub fn scale(&self) -> f64 {
        self.l2 + self.grad + self.lap + self.x2_l2 + self.x2_grad
    }
}

/// The five energies of `u(|x|)` on `R^N`, exactly.
pub fn energies(u: &PolyGaussFn, n: u32) -> Result<EnergyVector> {
    if u.parity() != Parity::Even {
        return Err(Error::WrongParity { expected: Parity::Even, found: u.parity() });
    }
    let du = u.derivative();
    let du2 = du.mul(&du);
    let uu = u.mul(u);
    let lap = u.radial_laplacian(n)?;
    Ok(EnergyVector {
        l2: full_space(&uu, n)?,
        grad: full_space(&du2, n)?,
        lap: full_space(&lap.mul(&lap), n)?,
        x2_l2: full_space(&uu.mul_r().mul_r(), n)?,
        x2_grad: full_space(&du2.mul_r().mul_r(), n)?,
        dim: n,
    })
}

/// The five energies of an arbitrary radial profile, by quadrature.
pub fn energies_profile(p: &RadialProfile, n: u32) -> Result<EnergyVector> {
    p.check_consistency()?;
    let s = sphere_area(n)?;
    let nf = f64::from(n);
    let quad = |g: &dyn Fn(f64) -> f64| -> Result<f64> {
        let q = quad_radial_fn(g, p.r_max(), n, PROFILE_NODES)?;
        match q.warning {
            Some(w) => Err(domain(format!("accuracy: {w}"))),
            None => Ok(s * q.value),
        }
    };
    Ok(EnergyVector {
        l2: quad(&|r| p.value(r).powi(2))?,
        grad: quad(&|r| p.d1(r).powi(2))?,
        lap: quad(&|r| (p.d2(r) + (nf - 1.0) * p.d1(r) / r).powi(2))?,
        x2_l2: quad(&|r| (r * p.value(r)).powi(2))?,
        x2_grad: quad(&|r| (r * p.d1(r)).powi(2))?,
        dim: n,
    })
}

/// `∫ ‖∇²u‖²_HS` for radial `u`: `|S|∫[u''² + (N-1)(u'/r)²] r^{N-1}`.
pub fn hessian_hs_energy(u: &PolyGaussFn, n: u32) -> Result<f64> {
    let d1 = u.derivative();
    let d2 = d1.derivative();
    let q = d1.div_r()?;
    let integrand = d2.mul(&d2).add_scaled(&q.mul(&q), f64::from(n) - 1.0)?;
    full_space(&integrand, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    #[serde(flatten)]
    pub energies: EnergyVector,
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Vector-field deficit of `U = ∇u`, built from `∫|∇U|² = ∫‖∇²u‖²_HS`.
    pub delta3: f64,
    pub lambda_first: Option<f64>,
    pub lambda_second: Option<f64>,
}

fn ratio_root4(num: f64, den: f64) -> Option<f64> {
    (den > 0.0 && num >= 0.0).then(|| (num / den).powf(0.25))
}

impl DeficitReport {
    /// All deficits from one energy vector plus the Hessian energy of the
    /// potential.
    pub fn from_parts(e: EnergyVector, hessian_hs: f64) -> Self {
        let n = f64::from(e.dim);
        let first = (e.grad * e.x2_l2).sqrt();
        let second = (e.lap * e.x2_grad).sqrt();
        DeficitReport {
            energies: e,
            theta1: first - 0.5 * n * e.l2,
            theta2: e.grad * e.x2_l2 - 0.25 * n * n * e.l2 * e.l2,
            theta3: e.grad + e.x2_l2 - n * e.l2,
            delta1: second - 0.5 * (n + 2.0) * e.grad,
            delta2: e.lap + e.x2_grad - (n + 2.0) * e.grad,
            delta3: (hessian_hs * e.x2_grad).sqrt() - 0.5 * (n + 2.0) * e.grad,
            lambda_first: ratio_root4(e.x2_l2, e.grad),
            lambda_second: ratio_root4(e.x2_grad, e.lap),
        }
    }
}

pub fn deficits(u: &PolyGaussFn, n: u32) -> Result<DeficitReport> {
    let e = energies(u, n)?;
    Ok(DeficitReport::from_parts(e, hessian_hs_energy(u, n)?))
}

/// `(λ²/2)∫|∇(u e^{|x|²/(2λ²)})|² e^{-|x|²/λ²} dx` with `λ = (x2_l2/grad)^{1/4}`.
pub fn hup_identity_rhs(u: &PolyGaussFn, n: u32) -> Result<f64> {
    let e = energies(u, n)?;
    if !(e.grad > 0.0 && e.x2_l2 > 0.0) {
        return Err(Error::UndefinedLambda("first-order λ needs grad > 0 and x2_l2 > 0"));
    }
    let lambda2 = (e.x2_l2 / e.grad).sqrt();
    let w = u.shift_beta(-0.5 / lambda2);
    let dw = w.derivative();
    let integrand = dw.mul(&dw).shift_beta(1.0 / lambda2);
    Ok(0.5 * lambda2 * full_space(&integrand, n)?)
}

/// `∫ ‖∇²v − x⊗∇v‖²_HS e^{-|x|²} dx` for radial `v`, reduced to
/// `|S|∫[(v'' − r v')² + (N−1)(v'/r)²] e^{-r²} r^{N−1} dr`.
pub fn hessian_gaussian_energy(v: &PolyGaussFn, n: u32) -> Result<f64> {
    let d1 = v.derivative();
    let d2 = d1.derivative();
    let radial = d2.sub(&d1.mul_r())?;
    let q = d1.div_r()?;
    let integrand = radial.mul(&radial).add_scaled(&q.mul(&q), f64::from(n) - 1.0)?.shift_beta(1.0);
    full_space(&integrand, n)
}

/// Numerator of the sector quotient on `R^{N+2k}`: `lap + x2_grad − 2k·l2`.
pub fn sector_numerator(f: &PolyGaussFn, n: u32, k: u32) -> Result<f64> {
    let d = n + 2 * k;
    if d < 2 {
        return Err(domain("sector dimension N + 2k must be at least 2"));
    }
    let e = energies(f, d)?;
    Ok(e.lap + e.x2_grad - 2.0 * f64::from(k) * e.l2)
}

/// `[grad + x2_l2 − N·l2] − 2[l2 − (∫v e^{-|x|²/2})² / ∫e^{-|x|²}]` on `R^N`.
pub fn radial_gaussian_poincare_gap(v: &PolyGaussFn, n: u32) -> Result<f64> {
    let e = energies(v, n)?;
    let nf = f64::from(n);
    let mean = full_space(&v.shift_beta(0.5), n)?;
    let mass = std::f64::consts::PI.powf(0.5 * nf);
    Ok((e.grad + e.x2_l2 - nf * e.l2) - 2.0 * (e.l2 - mean * mean / mass))
}
