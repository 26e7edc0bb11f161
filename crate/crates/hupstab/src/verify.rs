//! Check suites over seeded corpora. Every check is a residual function of a
//! single serializable witness, so a reported failure can be replayed.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{estimate_C, k_of_n, lower_bound, reference_c1, EstimateOpts};
use crate::error::{Error, Result};
use crate::exact_algebra::{Parity, PolyGaussFn};
use crate::functionals::{
    deficits, energies, energies_profile, full_space, hessian_gaussian_energy, hessian_hs_energy,
    hup_identity_rhs, radial_gaussian_poincare_gap, sector_numerator,
};
use crate::harmonics::{
    direct_energies_mc, lift_w, sector_energies, sector_energy_vector, x2grad_decomposition_check, Energy,
    SectorComponent, SeparableFn,
};
use crate::integration::RadialProfile;
use crate::manifold::{
    dist_d2_partial, dist_grad_norm_matched, dist_grad_to_shup, dist_l2_to_hup, dist_vector_cfhup,
    gaussian_grad_sq, VectorMetric,
};

pub const CSV_HEADER: &str = "# hupstab-report v1";
pub const CSV_COLUMNS: &str = "suite,N,seed,name,kind,residual,tolerance,passed,tag";
const SHARPNESS_TOL: f64 = 1e-6;
const SHARPNESS_FLOOR: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Identity,
    Inequality,
    Sharpness,
}

/// The input a check was evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Witness {
    pub dim: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<PolyGaussFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separable: Option<SeparableFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

impl Witness {
    fn radial(dim: u32, u: &PolyGaussFn) -> Self {
        Witness { dim, profile: Some(u.clone()), separable: None, k: None, constant: None }
    }

    fn sector(dim: u32, u: &PolyGaussFn, k: u32) -> Self {
        Witness { k: Some(k), ..Self::radial(dim, u) }
    }

    fn separable(s: &SeparableFn) -> Self {
        Witness { dim: s.ambient_dim(), profile: None, separable: Some(s.clone()), k: None, constant: None }
    }

    fn u(&self) -> Result<&PolyGaussFn> {
        self.profile.as_ref().ok_or_else(|| Error::Domain("witness has no radial profile".into()))
    }

    fn s(&self) -> Result<&SeparableFn> {
        self.separable.as_ref().ok_or_else(|| Error::Domain("witness has no separable input".into()))
    }

    fn k(&self) -> Result<u32> {
        self.k.ok_or_else(|| Error::Domain("witness has no sector degree".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: CheckKind,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl CheckResult {
    fn new(def: &CheckDef, residual: f64, tolerance: f64, witness: Option<Witness>) -> Self {
        CheckResult {
            name: def.name.into(),
            kind: def.kind,
            residual,
            tolerance,
            passed: residual <= tolerance,
            tag: def.tag.into(),
            witness,
            notes: BTreeMap::new(),
            diagnostic: None,
        }
    }
}

/// `|a − b|` relative to the larger of both sides and the input's scale.
fn rel_to(a: f64, b: f64, scale: f64) -> f64 {
    let den = a.abs().max(b.abs()).max(scale.abs());
    if den == 0.0 {
        0.0
    } else {
        (a - b).abs() / den
    }
}

/// Signed violation of `lhs ≥ rhs`, in units of `scale`.
fn violation(lhs: f64, rhs: f64, scale: f64) -> f64 {
    let s = scale.abs().max(f64::MIN_POSITIVE);
    (rhs - lhs) / s
}

// identities

fn id_hup(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let d = deficits(u, w.dim)?;
    Ok(rel_to(d.theta1, hup_identity_rhs(u, w.dim)?, d.energies.scale()))
}

fn id_hessian(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let d = deficits(u, w.dim)?;
    let h = hessian_gaussian_energy(&u.shift_beta(-0.5), w.dim)?;
    Ok(rel_to(d.delta2, h, d.energies.scale()))
}

fn id_sectors(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let k = w.k()?;
    let s = SeparableFn::single(w.dim, k, u.clone())?;
    let d = w.dim + 2 * k;
    let q = energies_profile(&RadialProfile::from_exact(u)?, d)?;
    let kf = f64::from(k);
    let pairs = [
        (Energy::L2, q.l2),
        (Energy::Grad, q.grad),
        (Energy::Lap, q.lap),
        (Energy::X2L2, q.x2_l2),
        (Energy::X2Grad, q.x2_grad - 2.0 * kf * q.l2),
    ];
    pairs
        .iter()
        .try_fold(0.0f64, |m, &(which, want)| Ok(m.max(rel_to(sector_energies(&s, which)?, want, q.scale()))))
}

fn id_x2grad(w: &Witness) -> Result<f64> {
    x2grad_decomposition_check(w.u()?, w.dim, w.k()?)
}

fn completion_residual(w: &Witness, big_k: f64) -> Result<f64> {
    let u = w.u()?;
    let (n, k) = (w.dim, w.k()?);
    let d = n + 2 * k;
    let (df, kf) = (f64::from(d), f64::from(k));
    let e = energies(u, d)?;
    let lhs = sector_numerator(u, n, k)? - (f64::from(n) + 2.0 + big_k) * e.grad;
    let c = (2.0 * f64::from(n) + 2.0 * kf + big_k) / 2.0;
    let du = u.derivative();
    let inner = u.radial_laplacian(d)?.add(&du.mul_r())?.add_scaled(u, c)?;
    let coeff = df * c - c * c - 2.0 * kf;
    let rhs = full_space(&inner.mul(&inner), d)? + coeff * e.l2;
    Ok(rel_to(lhs, rhs, e.scale()))
}

fn id_completion_sharp(w: &Witness) -> Result<f64> {
    completion_residual(w, lower_bound(w.dim, w.k()?))
}

fn id_completion_half(w: &Witness) -> Result<f64> {
    let (n, k) = (w.dim, w.k()?);
    let big_k = 0.5 * lower_bound(n, k);
    let (nf, kf) = (f64::from(n), f64::from(k));
    let c = (2.0 * nf + 2.0 * kf + big_k) / 2.0;
    if (nf + 2.0 * kf) * c - c * c - 2.0 * kf == 0.0 {
        return Ok(1.0);
    }
    completion_residual(w, big_k)
}

fn id_lift(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let (n, k) = (w.dim, w.k()?);
    let d = n + 2 * k;
    let e = energies(u, d)?;
    let ew = energies(&lift_w(u, n, k)?, d + 2)?;
    Ok(rel_to(e.grad, ew.l2, e.scale()).max(rel_to(e.lap, ew.grad, e.scale())))
}

fn id_curl_free(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let e = energies(u, w.dim)?;
    Ok(rel_to(hessian_hs_energy(u, w.dim)?, e.lap, e.scale()))
}

// inequalities

fn ineq_hup(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let d = deficits(u, w.dim)?;
    let dist = dist_l2_to_hup(u, w.dim)?.value_sq;
    Ok(violation(d.theta1, dist, d.energies.scale()))
}

fn ineq_shup(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let d = deficits(u, w.dim)?;
    let dist = dist_grad_to_shup(u, w.dim)?.value_sq;
    Ok(violation(d.delta1, 0.5 * k_of_n(w.dim) * dist, d.energies.scale()))
}

/// `inf_c ‖∇(u − c e^{-|x|²/2})‖²` for radial `u`.
pub fn pinned_grad_distance(u: &PolyGaussFn, n: u32) -> Result<f64> {
    let g = PolyGaussFn::optimizer(1.0, 1.0);
    let du = u.derivative();
    let gu = full_space(&du.mul(&du), n)?;
    let ip = full_space(&du.mul(&g.derivative()), n)?;
    Ok((gu - ip * ip / gaussian_grad_sq(1.0, n)).max(0.0))
}

fn ineq_linearized(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let d = deficits(u, w.dim)?;
    let dist = pinned_grad_distance(u, w.dim)?;
    Ok(violation(d.delta2, k_of_n(w.dim) * dist, d.energies.scale()))
}

fn ineq_norm_matched(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let d = deficits(u, w.dim)?;
    let dist = dist_grad_norm_matched(u, w.dim)?.value_sq;
    Ok(violation(d.delta1, 0.25 * k_of_n(w.dim) * dist, d.energies.scale()))
}

fn ineq_vector(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let n = w.dim;
    let d = deficits(u, n)?;
    let s = d.energies.scale();
    let kn = k_of_n(n);
    let full = dist_vector_cfhup(u, n, VectorMetric::L2)?.value_sq;
    let matched = dist_vector_cfhup(u, n, VectorMetric::NormMatched)?.value_sq;
    let same = (d.delta3 - d.delta1).abs() / s;
    Ok(violation(d.delta3, 0.5 * kn * full, s)
        .max(violation(d.delta3, 0.25 * kn * matched, s))
        .max(same - 1e-12))
}

/// Right side of the second-order Gaussian Poincaré inequality for radial
/// `v`: `K·inf_c ∫|∇v − (v − c)x|² e^{-|x|²}`.
fn t4_rhs(v: &PolyGaussFn, n: u32, constant: f64) -> Result<f64> {
    let a = v.derivative().sub(&v.mul_r())?;
    let aa = full_space(&a.mul(&a).shift_beta(1.0), n)?;
    let ar = full_space(&a.mul_r().shift_beta(1.0), n)?;
    let r2 = full_space(&PolyGaussFn::constant(1.0).mul_r().mul_r().shift_beta(1.0), n)?;
    Ok(constant * (aa - ar * ar / r2).max(0.0))
}

fn ineq_t4(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let n = w.dim;
    let kn = k_of_n(n);
    let scale = energies(u, n)?.scale();
    [u.clone(), u.shift_beta(-0.5)].iter().try_fold(f64::NEG_INFINITY, |m, v| {
        let lhs = hessian_gaussian_energy(v, n)?;
        let rhs = t4_rhs(v, n, kn)?;
        Ok(m.max(violation(lhs, rhs, scale + lhs.abs() + rhs.abs())))
    })
}

fn gauss_avg(f: &PolyGaussFn, n: u32) -> Result<f64> {
    Ok(full_space(&f.shift_beta(0.5), n)? * (2.0 * PI).powf(-0.5 * f64::from(n)))
}

fn sector_profile(s: &SeparableFn, k: u32) -> PolyGaussFn {
    s.sector(k).map(|c| c.profile.clone()).unwrap_or_else(|| PolyGaussFn::zero(Parity::Even))
}

/// Both links of the `λ = 1` chain for `u = v₀(r) + √(2π)·v₁(r)·x₁` under
/// the standard Gaussian measure, with every average written out in
/// Cartesian terms.
fn ineq_gaussian_chain(w: &Witness) -> Result<f64> {
    let s = w.s()?;
    if s.components().iter().any(|c| c.k > 1) {
        return Err(Error::UnsupportedSector("chain check takes sectors 0 and 1".into()));
    }
    let n = s.ambient_dim();
    let nf = f64::from(n);
    let (v0, v1) = (sector_profile(s, 0), sector_profile(s, 1));
    let c1 = (2.0 * PI).sqrt();
    let r2 = PolyGaussFn::constant(1.0).mul_r().mul_r();
    let d0 = v0.derivative();
    let d1r = v1.derivative().mul_r();

    let m0 = gauss_avg(&v0, n)?;
    let b1 = c1 / nf * gauss_avg(&v1.mul(&r2), n)?;
    let g1 = c1 * gauss_avg(&d1r.scale(1.0 / nf).add(&v1)?, n)?;
    let grad = gauss_avg(&d0.mul(&d0), n)?
        + c1 * c1
            * gauss_avg(
                &d1r.mul(&d1r).add_scaled(&v1.mul(&d1r), 2.0)?.scale(1.0 / nf).add(&v1.mul(&v1))?,
                n,
            )?;
    let second = gauss_avg(&v0.mul(&v0), n)? + c1 * c1 / nf * gauss_avg(&v1.mul(&v1).mul(&r2), n)?;
    let var = second - m0 * m0;
    let mid = 0.5 * (grad - 2.0 * b1 * g1 + b1 * b1);
    let r0 = v0.add_scaled(&PolyGaussFn::constant(1.0), -m0)?;
    let r1 = v1.scale(c1).add_scaled(&PolyGaussFn::constant(1.0), -b1)?;
    let low = gauss_avg(&r0.mul(&r0), n)? + gauss_avg(&r1.mul(&r1).mul(&r2), n)? / nf;
    let scale = grad + second;
    Ok(violation(grad - var, mid, scale).max(violation(mid, low, scale)))
}

fn ineq_radial_poincare(w: &Witness) -> Result<f64> {
    let u = w.u()?;
    let gap = radial_gaussian_poincare_gap(u, w.dim)?;
    Ok(violation(gap, 0.0, energies(u, w.dim)?.scale()))
}

fn ineq_affine(w: &Witness) -> Result<f64> {
    let s = w.s()?;
    let e = sector_energy_vector(s)?;
    let n = f64::from(s.ambient_dim());
    let theta1 = (e.grad * e.x2_l2).sqrt() - 0.5 * n * e.l2;
    let d2 = dist_d2_partial(s)?.value_sq;
    Ok(violation(theta1, d2, e.scale()))
}

fn sharp_ratio(w: &Witness) -> Result<f64> {
    let s = w.s()?;
    let c = w.constant.ok_or_else(|| Error::Domain("sharpness witness needs the constant".into()))?;
    sharpness_ratio(s, c)
}

fn sharp_residual(w: &Witness) -> Result<f64> {
    let r = sharp_ratio(w)?;
    Ok(if r >= SHARPNESS_FLOOR { r - 1.0 } else { 1.0 })
}

type Eval = fn(&Witness) -> Result<f64>;

struct CheckDef {
    name: &'static str,
    kind: CheckKind,
    tag: &'static str,
    eval: Eval,
}

const CHECKS: &[CheckDef] = &[
    CheckDef { name: "hup_identity", kind: CheckKind::Identity, tag: "hup-identity", eval: id_hup },
    CheckDef {
        name: "hessian_gaussian_identity",
        kind: CheckKind::Identity,
        tag: "hessian-identity",
        eval: id_hessian,
    },
    CheckDef {
        name: "sector_decomposition",
        kind: CheckKind::Identity,
        tag: "bochner-sectors",
        eval: id_sectors,
    },
    CheckDef {
        name: "x2grad_decomposition",
        kind: CheckKind::Identity,
        tag: "x2grad-decomposition",
        eval: id_x2grad,
    },
    CheckDef {
        name: "completion_of_squares",
        kind: CheckKind::Identity,
        tag: "completion-of-squares",
        eval: id_completion_sharp,
    },
    CheckDef {
        name: "completion_of_squares_half",
        kind: CheckKind::Identity,
        tag: "completion-of-squares",
        eval: id_completion_half,
    },
    CheckDef { name: "dimension_lift", kind: CheckKind::Identity, tag: "dimension-lift", eval: id_lift },
    CheckDef { name: "curl_free_energy", kind: CheckKind::Identity, tag: "curl-free", eval: id_curl_free },
    CheckDef { name: "hup_stability", kind: CheckKind::Inequality, tag: "hup-stability", eval: ineq_hup },
    CheckDef { name: "shup_stability", kind: CheckKind::Inequality, tag: "shup-stability", eval: ineq_shup },
    CheckDef {
        name: "linearized_stability",
        kind: CheckKind::Inequality,
        tag: "linearized-stability",
        eval: ineq_linearized,
    },
    CheckDef {
        name: "norm_matched_stability",
        kind: CheckKind::Inequality,
        tag: "norm-matched-stability",
        eval: ineq_norm_matched,
    },
    CheckDef {
        name: "curl_free_stability",
        kind: CheckKind::Inequality,
        tag: "vector-stability",
        eval: ineq_vector,
    },
    CheckDef {
        name: "second_order_gaussian_poincare",
        kind: CheckKind::Inequality,
        tag: "second-order-poincare",
        eval: ineq_t4,
    },
    CheckDef {
        name: "improved_gaussian_poincare",
        kind: CheckKind::Inequality,
        tag: "improved-poincare",
        eval: ineq_gaussian_chain,
    },
    CheckDef {
        name: "radial_gaussian_poincare",
        kind: CheckKind::Inequality,
        tag: "radial-poincare",
        eval: ineq_radial_poincare,
    },
    CheckDef {
        name: "affine_stability",
        kind: CheckKind::Inequality,
        tag: "affine-stability",
        eval: ineq_affine,
    },
    CheckDef {
        name: "sharpness_k1",
        kind: CheckKind::Sharpness,
        tag: "sharp-constant",
        eval: sharp_residual,
    },
];

fn def(name: &str) -> Result<&'static CheckDef> {
    CHECKS.iter().find(|d| d.name == name).ok_or_else(|| Error::Domain(format!("unknown check {name}")))
}

/// Recomputes a check's residual from its witness.
pub fn reevaluate(check: &CheckResult) -> Result<f64> {
    let w = check
        .witness
        .as_ref()
        .ok_or_else(|| Error::Domain(format!("check {} has no witness", check.name)))?;
    (def(&check.name)?.eval)(w)
}

/// Worst residual over the inputs; ties keep the earliest input. An
/// evaluation error counts as a failure with that input as witness.
fn run_check(name: &str, inputs: &[Witness], tol: f64) -> Result<CheckResult> {
    let d = def(name)?;
    let evals: Vec<(f64, Option<String>)> = inputs
        .par_iter()
        .map(|w| match (d.eval)(w) {
            Ok(r) if r.is_nan() => (f64::MAX, Some("residual is NaN".into())),
            Ok(r) => (r, None),
            Err(e) => (f64::MAX, Some(e.to_string())),
        })
        .collect();
    let mut best = 0;
    for (i, e) in evals.iter().enumerate() {
        if e.0 > evals[best].0 {
            best = i;
        }
    }
    let (residual, err) = evals.get(best).cloned().unwrap_or((f64::NEG_INFINITY, None));
    let mut out = CheckResult::new(d, residual, tol, inputs.get(best).cloned());
    out.diagnostic = err;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    #[default]
    Random,
    /// Only members `α e^{-β|x|²/2}` of the optimizer family.
    Gaussian,
}

/// Even polynomial of degree ≤ 6 in `r` times a Gaussian, one to three terms,
/// coefficients uniform in `[−1, 1]`, `β` log-uniform in `[0.3, 3]`.
pub fn random_profile(rng: &mut ChaCha8Rng) -> PolyGaussFn {
    let terms = rng.random_range(1..=3usize);
    let mut f = PolyGaussFn::zero(Parity::Even);
    for _ in 0..terms {
        let len = rng.random_range(1..=4usize);
        let coeffs: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let beta = rng.random_range(0.3f64.ln()..=3f64.ln()).exp();
        let t = PolyGaussFn::from_pairs(&[(&coeffs, beta)]).expect("finite draw");
        f = f.add(&t).expect("even terms");
    }
    if f.is_zero() {
        PolyGaussFn::optimizer(1.0, 1.0)
    } else {
        f
    }
}

pub fn random_member(rng: &mut ChaCha8Rng) -> PolyGaussFn {
    let mut a = rng.random_range(-2.0..=2.0);
    if a == 0.0 {
        a = 1.0;
    }
    PolyGaussFn::optimizer(a, rng.random_range(0.3f64.ln()..=3f64.ln()).exp())
}

fn corpus(kind: CorpusKind, size: usize, seed: u64) -> Vec<PolyGaussFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..size)
        .map(|_| match kind {
            CorpusKind::Random => random_profile(&mut rng),
            CorpusKind::Gaussian => random_member(&mut rng),
        })
        .collect()
}

fn separable_corpus(kind: CorpusKind, n: u32, size: usize, seed: u64) -> Vec<SeparableFn> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ec7);
    (0..size)
        .map(|_| {
            let draw = |r: &mut ChaCha8Rng| match kind {
                CorpusKind::Random => random_profile(r),
                CorpusKind::Gaussian => random_member(r),
            };
            let v0 = draw(&mut rng);
            let v1 = match kind {
                CorpusKind::Random => draw(&mut rng),
                CorpusKind::Gaussian => PolyGaussFn::zero(Parity::Even),
            };
            let mut comps = vec![SectorComponent::new(0, v0).expect("even")];
            if !v1.is_zero() {
                comps.push(SectorComponent::new(1, v1).expect("even"));
            }
            SeparableFn::new(n, comps).expect("distinct sectors")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityOpts {
    pub tol: f64,
    pub corpus_size: usize,
    pub seed: u64,
    pub corpus: CorpusKind,
    /// Samples for the Monte-Carlo cross-check of the sector energies
    /// (`N ∈ {2, 3}` only); `None` skips it.
    pub mc_samples: Option<u64>,
}

impl Default for IdentityOpts {
    fn default() -> Self {
        IdentityOpts { tol: 1e-9, corpus_size: 100, seed: 0, corpus: CorpusKind::Random, mc_samples: None }
    }
}

fn check_dim(n: u32) -> Result<()> {
    if (2..=10).contains(&n) {
        Ok(())
    } else {
        Err(Error::Domain(format!("suites run for N in 2..=10, got {n}")))
    }
}

pub fn run_identity_suite(n: u32, opts: &IdentityOpts) -> Result<Vec<CheckResult>> {
    check_dim(n)?;
    let us = corpus(opts.corpus, opts.corpus_size, opts.seed);
    let radial: Vec<Witness> = us.iter().map(|u| Witness::radial(n, u)).collect();
    let per_k = |ks: &[u32]| -> Vec<Witness> {
        us.iter().flat_map(|u| ks.iter().map(move |&k| Witness::sector(n, u, k))).collect()
    };
    let plan: Vec<(&str, Vec<Witness>)> = vec![
        ("hup_identity", radial.clone()),
        ("hessian_gaussian_identity", radial.clone()),
        ("sector_decomposition", per_k(&[0, 1, 2])),
        ("x2grad_decomposition", per_k(&[0, 1, 2, 3])),
        ("completion_of_squares", per_k(&[1, 2, 3])),
        ("completion_of_squares_half", per_k(&[1, 2, 3])),
        ("dimension_lift", per_k(&[0, 1, 2])),
        ("curl_free_energy", radial),
    ];
    let mut out =
        plan.iter().map(|(name, inputs)| run_check(name, inputs, opts.tol)).collect::<Result<Vec<_>>>()?;
    if let Some(samples) = opts.mc_samples {
        if n <= 3 {
            out.push(mc_crosscheck(n, samples, opts.seed, opts.corpus)?);
        }
    }
    Ok(out)
}

/// Sector energies against the Cartesian Monte-Carlo estimate. The residual
/// is the largest deviation in units of three standard errors.
pub fn mc_crosscheck(n: u32, samples: u64, seed: u64, kind: CorpusKind) -> Result<CheckResult> {
    let inputs = separable_corpus(kind, n, 3, seed);
    let mut worst = (f64::NEG_INFINITY, 0usize);
    for (i, s) in inputs.iter().enumerate() {
        for (j, which) in [Energy::L2, Energy::Grad, Energy::Lap, Energy::X2Grad].into_iter().enumerate() {
            let mc = direct_energies_mc(s, which, samples, seed.wrapping_add((4 * i + j) as u64))?;
            let exact = sector_energies(s, which)?;
            let z = (mc.estimate - exact).abs() / (3.0 * mc.std_error.max(f64::MIN_POSITIVE));
            if z > worst.0 {
                worst = (z, i);
            }
        }
    }
    Ok(CheckResult {
        name: "sector_mc_crosscheck".into(),
        kind: CheckKind::Identity,
        residual: worst.0,
        tolerance: 1.0,
        passed: worst.0 <= 1.0,
        tag: "bochner-sectors".into(),
        witness: None,
        notes: BTreeMap::from([("samples".into(), samples as f64)]),
        diagnostic: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityOpts {
    pub tol: f64,
    pub trials: usize,
    pub seed: u64,
    pub corpus: CorpusKind,
    /// Also check `θ₁ ≥ d₂²(u, F)` on two-sector inputs.
    pub affine: bool,
}

impl Default for InequalityOpts {
    fn default() -> Self {
        InequalityOpts { tol: 1e-9, trials: 200, seed: 0, corpus: CorpusKind::Random, affine: true }
    }
}

pub fn near_optimizer() -> PolyGaussFn {
    PolyGaussFn::from_pairs(&[(&[1.0, 1e-4], 0.5)]).expect("finite")
}

pub fn run_inequality_suite(n: u32, opts: &InequalityOpts) -> Result<Vec<CheckResult>> {
    check_dim(n)?;
    let mut us = corpus(opts.corpus, opts.trials, opts.seed);
    if opts.corpus == CorpusKind::Random {
        us.push(near_optimizer());
    }
    let radial: Vec<Witness> = us.iter().map(|u| Witness::radial(n, u)).collect();
    let sep: Vec<Witness> =
        separable_corpus(opts.corpus, n, opts.trials, opts.seed).iter().map(Witness::separable).collect();
    let mut plan: Vec<(&str, &[Witness])> = vec![
        ("hup_stability", &radial),
        ("shup_stability", &radial),
        ("linearized_stability", &radial),
        ("norm_matched_stability", &radial),
        ("curl_free_stability", &radial),
        ("second_order_gaussian_poincare", &radial),
        ("improved_gaussian_poincare", &sep),
        ("radial_gaussian_poincare", &radial),
    ];
    if opts.affine {
        plan.push(("affine_stability", &sep));
    }
    plan.iter().map(|(name, inputs)| run_check(name, inputs, opts.tol)).collect()
}

/// `δ₂(u) / (C·inf_c ‖∇(u − c e^{-|x|²/2})‖²)` for a separable `u`.
pub fn sharpness_ratio(s: &SeparableFn, c: f64) -> Result<f64> {
    let n = s.ambient_dim();
    let e = sector_energy_vector(s)?;
    let delta2 = e.lap + e.x2_grad - (f64::from(n) + 2.0) * e.grad;
    // only the radial sector sees the radial Gaussian
    let v0 = sector_profile(s, 0);
    let g = PolyGaussFn::optimizer(1.0, 1.0);
    let ip = full_space(&v0.derivative().mul(&g.derivative()), n)?;
    let dist = e.grad - ip * ip / gaussian_grad_sq(1.0, n);
    Ok(delta2 / (c * dist))
}

/// Builds the degree-one sector function from the numeric minimizer of the
/// `k = 1` quotient and checks that it saturates the linearized inequality.
pub fn sharpness_probe(n: u32, opts: &EstimateOpts) -> Result<CheckResult> {
    let d = def("sharpness_k1")?;
    let est = estimate_C(n, 1, opts)?;
    let skipped = |why: String| {
        let mut r = CheckResult::new(d, 1.0, SHARPNESS_TOL, None);
        r.diagnostic = Some(why);
        r
    };
    let (Some(c), Some(v)) = (est.value, est.minimizer.clone()) else {
        return Ok(skipped(format!("no numeric constant: {}", est.diagnostics.join("; "))));
    };
    if !est.converged {
        return Ok(skipped(format!("constant not converged: {}", est.diagnostics.join("; "))));
    }
    let s = SeparableFn::single(n, 1, v)?;
    let w = Witness { constant: Some(c), ..Witness::separable(&s) };
    let residual = sharp_residual(&w)?;
    let mut r = CheckResult::new(d, residual, SHARPNESS_TOL, Some(w));
    let reference = reference_c1(n);
    r.notes.insert("constant".into(), c);
    r.notes.insert("constant_reference".into(), reference);
    r.notes.insert("ratio".into(), residual + 1.0);
    r.notes.insert("ratio_reference".into(), sharpness_ratio(&s, reference)?);
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    #[serde(rename = "N")]
    pub n: u32,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{},{},{},{},{},{:.6e},{:.3e},{},{}",
                    self.suite,
                    self.n,
                    self.seed,
                    c.name,
                    serde_json::to_value(c.kind).expect("kind").as_str().unwrap_or(""),
                    c.residual,
                    c.tolerance,
                    c.passed,
                    c.tag
                )
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n{CSV_COLUMNS}\n");
        for row in self.csv_rows() {
            s.push_str(&row);
            s.push('\n');
        }
        s
    }
}
