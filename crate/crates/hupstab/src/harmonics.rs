//! Separable functions `u(x) = Σ_k v_k(r)·r^k·φ_k(σ)` and their sector-wise
//! energies on the lifted spaces `R^{N+2k}`.
//!
//! Harmonics are normalized so that `∫_{S^{N-1}} |φ_k|² dσ = |S^{N-1+2k}|`
//! with the unnormalized surface measure. Every sector energy is then a plain
//! radial integral over `R^{N+2k}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exact_algebra::{json_error, Parity, PolyGaussFn};
use crate::functionals::{energies, full_space, EnergyVector};
use crate::integration::{mc_fullspace, sphere_area, MCOracleResult};

/// `c_k = k(k+N-2)`, the eigenvalue of `-Δ_{S^{N-1}}` on degree-`k` harmonics.
pub fn eigenvalue_ck(k: u32, n: u32) -> f64 {
    let (k, n) = (f64::from(k), f64::from(n));
    k * (k + n - 2.0)
}

/// Which harmonic of degree `k` a sector carries. `Std` is `1`, `σ₁`, `σ₁σ₂`
/// for `k = 0, 1, 2` and an abstract representative beyond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HarmonicId {
    #[default]
    Std,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorComponent {
    pub k: u32,
    pub profile: PolyGaussFn,
    #[serde(default)]
    pub harmonic: HarmonicId,
}

impl SectorComponent {
    pub fn new(k: u32, profile: PolyGaussFn) -> Result<Self> {
        if profile.parity() != Parity::Even {
            return Err(Error::WrongParity { expected: Parity::Even, found: profile.parity() });
        }
        Ok(SectorComponent { k, profile, harmonic: HarmonicId::Std })
    }

    pub fn is_concrete(&self) -> bool {
        self.k <= 2
    }

    /// Squared constant `c` in `Y_k = c·(1, x₁, x₁x₂)`, chosen so that
    /// `∫|Y_k(σ)|² dσ = |S^{N-1+2k}|`. It does not depend on `N`.
    pub fn normalization_sq(&self) -> Result<f64> {
        match self.k {
            0 => Ok(1.0),
            1 => Ok(2.0 * PI),
            2 => Ok(4.0 * PI * PI),
            k => Err(Error::UnsupportedSector(format!("no concrete harmonic of degree {k}"))),
        }
    }

    /// `Y_k(x) = r^k φ_k(σ)` and its Cartesian gradient.
    fn harmonic(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let c = self.normalization_sq()?.sqrt();
        grad.iter_mut().for_each(|g| *g = 0.0);
        Ok(match self.k {
            0 => 1.0,
            1 => {
                grad[0] = c;
                c * x[0]
            }
            _ => {
                grad[0] = c * x[1];
                grad[1] = c * x[0];
                c * x[0] * x[1]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeparableSpec", into = "SeparableSpec")]
pub struct SeparableFn {
    ambient_dim: u32,
    components: Vec<SectorComponent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeparableSpec {
    dim: u32,
    sectors: Vec<SectorComponent>,
}

impl TryFrom<SeparableSpec> for SeparableFn {
    type Error = Error;

    fn try_from(s: SeparableSpec) -> Result<Self> {
        SeparableFn::new(s.dim, s.sectors)
    }
}

impl From<SeparableFn> for SeparableSpec {
    fn from(s: SeparableFn) -> Self {
        SeparableSpec { dim: s.ambient_dim, sectors: s.components }
    }
}

impl SeparableFn {
    pub fn new(ambient_dim: u32, mut components: Vec<SectorComponent>) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(domain("separable functions need ambient dimension >= 2"));
        }
        components.sort_by_key(|c| c.k);
        if components.windows(2).any(|w| w[0].k == w[1].k) {
            return Err(domain("sector degrees must be distinct"));
        }
        if let Some(c) = components.iter().find(|c| c.profile.parity() != Parity::Even) {
            return Err(Error::WrongParity { expected: Parity::Even, found: c.profile.parity() });
        }
        Ok(SeparableFn { ambient_dim, components })
    }

    pub fn single(ambient_dim: u32, k: u32, profile: PolyGaussFn) -> Result<Self> {
        Self::new(ambient_dim, vec![SectorComponent::new(k, profile)?])
    }

    pub fn ambient_dim(&self) -> u32 {
        self.ambient_dim
    }

    pub fn components(&self) -> &[SectorComponent] {
        &self.components
    }

    pub fn sector(&self, k: u32) -> Option<&SectorComponent> {
        self.components.iter().find(|c| c.k == k)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| json_error(&e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Energy {
    L2,
    Grad,
    Lap,
    X2L2,
    X2Grad,
}

impl Energy {
    pub const ALL: [Energy; 5] = [Energy::L2, Energy::Grad, Energy::Lap, Energy::X2L2, Energy::X2Grad];

    pub fn name(self) -> &'static str {
        match self {
            Energy::L2 => "l2",
            Energy::Grad => "grad",
            Energy::Lap => "lap",
            Energy::X2L2 => "x2_l2",
            Energy::X2Grad => "x2_grad",
        }
    }
}

fn sector_term(c: &SectorComponent, n: u32, which: Energy) -> Result<f64> {
    let d = n + 2 * c.k;
    let e = energies(&c.profile, d)?;
    Ok(match which {
        Energy::L2 => e.l2,
        Energy::Grad => e.grad,
        Energy::Lap => e.lap,
        Energy::X2L2 => e.x2_l2,
        Energy::X2Grad => e.x2_grad - 2.0 * f64::from(c.k) * e.l2,
    })
}

/// A full-space energy of a separable function as a sum over sectors.
pub fn sector_energies(s: &SeparableFn, which: Energy) -> Result<f64> {
    s.components.iter().map(|c| sector_term(c, s.ambient_dim, which)).sum()
}

pub fn sector_energy_vector(s: &SeparableFn) -> Result<EnergyVector> {
    Ok(EnergyVector {
        l2: sector_energies(s, Energy::L2)?,
        grad: sector_energies(s, Energy::Grad)?,
        lap: sector_energies(s, Energy::Lap)?,
        x2_l2: sector_energies(s, Energy::X2L2)?,
        x2_grad: sector_energies(s, Energy::X2Grad)?,
        dim: s.ambient_dim,
    })
}

/// Pointwise Cartesian evaluation of `u`, `∇u` and `Δu`.
pub struct CartesianEval {
    n: usize,
    parts: Vec<(SectorComponent, PolyGaussFn, PolyGaussFn)>,
}

impl CartesianEval {
    pub fn new(s: &SeparableFn) -> Result<Self> {
        let n = s.ambient_dim;
        let parts = s
            .components
            .iter()
            .map(|c| {
                if !c.is_concrete() {
                    return Err(Error::UnsupportedSector(format!(
                        "degree {} has no explicit Cartesian harmonic",
                        c.k
                    )));
                }
                let dv = c.profile.derivative();
                let lap = c.profile.radial_laplacian(n)?;
                Ok((c.clone(), dv, lap))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CartesianEval { n: n as usize, parts })
    }

    /// Returns `u(x)` and `Δu(x)`, writing `∇u(x)` into `grad`.
    pub fn eval(&self, x: &[f64], grad: &mut [f64]) -> (f64, f64) {
        let r = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        let mut gy = vec![0.0; self.n];
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (mut u, mut lap) = (0.0, 0.0);
        for (c, dv, lap_v) in &self.parts {
            let y = c.harmonic(x, &mut gy).expect("concrete harmonic");
            let v = c.profile.eval(r);
            let q = dv.eval_div_r(r).expect("odd derivative");
            u += v * y;
            let mut x_dot_gy = 0.0;
            for i in 0..self.n {
                grad[i] += q * x[i] * y + v * gy[i];
                x_dot_gy += x[i] * gy[i];
            }
            // Δ(vY) = Y·Δv + 2∇v·∇Y, harmonic Y
            lap += y * lap_v.eval(r) + 2.0 * q * x_dot_gy;
        }
        (u, lap)
    }
}

/// Monte-Carlo estimate of a full-space energy from Cartesian formulas.
pub fn direct_energies_mc(s: &SeparableFn, which: Energy, samples: u64, seed: u64) -> Result<MCOracleResult> {
    let n = s.ambient_dim as usize;
    if !(2..=3).contains(&n) {
        return Err(domain(format!("Monte-Carlo check needs N in {{2, 3}}, got {n}")));
    }
    let ev = CartesianEval::new(s)?;
    let f = move |x: &[f64]| {
        let mut g = [0.0; 3];
        let (u, lap) = ev.eval(x, &mut g[..n]);
        let g2: f64 = g.iter().map(|t| t * t).sum();
        let r2: f64 = x.iter().map(|t| t * t).sum();
        match which {
            Energy::L2 => u * u,
            Energy::Grad => g2,
            Energy::Lap => lap * lap,
            Energy::X2L2 => r2 * u * u,
            Energy::X2Grad => r2 * g2,
        }
    };
    mc_fullspace(&f, n, samples, seed)
}

/// `w = √(|S^{D-1}|/|S^{D+1}|)·v'/r` with `D = N + 2k`, so that
/// `∫_{R^D}|∇v|² = ∫_{R^{D+2}}|w|²` and `∫_{R^D}|Δv|² = ∫_{R^{D+2}}|∇w|²`.
pub fn lift_w(v: &PolyGaussFn, n: u32, k: u32) -> Result<PolyGaussFn> {
    if v.parity() != Parity::Even {
        return Err(Error::WrongParity { expected: Parity::Even, found: v.parity() });
    }
    let d = f64::from(n + 2 * k);
    Ok(v.derivative().div_r()?.scale((d / (2.0 * PI)).sqrt()))
}

/// Relative residual of
/// `∫v'²r² − 2k∫v² = ((D²−8k)/D²)∫v'²r² + ∫(2√(2k)/D·r v' + √(2k) v)²`
/// (all over `R^D`, `D = N + 2k`), normalized by the largest term.
pub fn x2grad_decomposition_check(v: &PolyGaussFn, n: u32, k: u32) -> Result<f64> {
    let dim = n + 2 * k;
    if dim < 2 {
        return Err(domain("N + 2k must be at least 2"));
    }
    let d = f64::from(dim);
    let kf = f64::from(k);
    let dv = v.derivative();
    let grad_x2 = full_space(&dv.mul(&dv).mul_r().mul_r(), dim)?;
    let l2 = full_space(&v.mul(v), dim)?;
    let lhs = grad_x2 - 2.0 * kf * l2;
    let t = (2.0 * kf).sqrt();
    let inner = dv.mul_r().scale(2.0 * t / d).add_scaled(v, t)?;
    let square = full_space(&inner.mul(&inner), dim)?;
    let first = (d * d - 8.0 * kf) / (d * d) * grad_x2;
    let rhs = first + square;
    let scale = grad_x2.abs().max((2.0 * kf * l2).abs()).max(square.abs());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((lhs - rhs).abs() / scale)
}

/// `|∇_S φ|²` on the unit sphere for the concrete harmonics, written with
/// the tangential gradient of the coordinate functions.
pub fn angular_gradient_sq(k: u32, sigma: &[f64]) -> Result<f64> {
    Ok(match k {
        0 => 0.0,
        1 => 2.0 * PI * (1.0 - sigma[0] * sigma[0]),
        2 => {
            let (a, b) = (sigma[0] * sigma[0], sigma[1] * sigma[1]);
            4.0 * PI * PI * (a + b - 4.0 * a * b)
        }
        k => return Err(Error::UnsupportedSector(format!("degree {k}"))),
    })
}

/// `∫_{S^{N-1}} |φ_k|² dσ` with the unnormalized measure.
pub fn harmonic_norm_sq(n: u32, k: u32) -> Result<f64> {
    sphere_area(n + 2 * k)
}
