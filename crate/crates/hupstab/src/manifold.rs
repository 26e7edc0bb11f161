//! Squared distances from radial and separable inputs to the Gaussian
//! optimizer families. Members are written `α·e^{-β|x|²/2}`; `beta_star` is
//! reported in that convention.
//!
//! For fixed `β` the amplitude is eliminated in closed form. The remaining
//! one-dimensional problem in `log β` is solved by a coarse grid followed by
//! golden-section refinement.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_algebra::PolyGaussFn;
use crate::functionals::full_space;
use crate::harmonics::SeparableFn;

pub const BETA_LO: f64 = 1e-3;
pub const BETA_HI: f64 = 1e3;
const GRID: usize = 61;
const LOG_WIDTH_TOL: f64 = 1e-10;
const MAX_EXPANSIONS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L2,
    GradSeminorm,
    GradSeminormNormMatched,
    VectorL2,
    D2Partial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VectorMetric {
    #[default]
    L2,
    NormMatched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value_sq: f64,
    pub alpha_star: f64,
    pub beta_star: f64,
    pub metric: Metric,
    pub converged: bool,
    pub evaluations: u64,
    /// Coefficient of `x₁` in the affine part, only for `d2_partial`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_star: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Search {
    beta: f64,
    converged: bool,
    evaluations: u64,
}

fn log_grid(lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..GRID).map(|i| a + (b - a) * i as f64 / (GRID - 1) as f64).collect()
}

/// Minimizes `obj(β)` over `β > 0`. Objective failures count as `+∞`.
fn search_log_beta(obj: impl Fn(f64) -> f64) -> Search {
    let mut evaluations = 0u64;
    let mut eval = |t: f64| {
        evaluations += 1;
        let v = obj(t.exp());
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let (mut lo, mut hi) = (BETA_LO, BETA_HI);
    let mut expansions = 0;
    let (ts, i) = loop {
        let ts = log_grid(lo, hi);
        let vals: Vec<f64> = ts.iter().map(|&t| eval(t)).collect();
        let i = vals.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
        let at_edge = i == 0 || i == GRID - 1;
        if !at_edge || expansions == MAX_EXPANSIONS {
            break (ts, i);
        }
        if i == 0 {
            lo /= 10.0;
        } else {
            hi *= 10.0;
        }
        expansions += 1;
    };
    if i == 0 || i == GRID - 1 {
        return Search { beta: ts[i].exp(), converged: false, evaluations };
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (ts[i - 1], ts[i + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (eval(c), eval(d));
    while b - a > LOG_WIDTH_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d);
        }
    }
    let t = if fc <= fd { c } else { d };
    Search { beta: t.exp(), converged: true, evaluations }
}

fn g(beta: f64) -> PolyGaussFn {
    PolyGaussFn::optimizer(1.0, beta)
}

/// `‖e^{-β|x|²/2}‖²` on `R^N`.
pub fn gaussian_l2_sq(beta: f64, n: u32) -> f64 {
    (PI / beta).powf(0.5 * f64::from(n))
}

/// `‖∇e^{-β|x|²/2}‖²` on `R^N`.
pub fn gaussian_grad_sq(beta: f64, n: u32) -> f64 {
    0.5 * f64::from(n) * beta * gaussian_l2_sq(beta, n)
}

fn l2_inner(a: &PolyGaussFn, b: &PolyGaussFn, n: u32) -> Result<f64> {
    full_space(&a.mul(b), n)
}

fn grad_inner(a: &PolyGaussFn, b: &PolyGaussFn, n: u32) -> Result<f64> {
    full_space(&a.derivative().mul(&b.derivative()), n)
}

/// `‖∇(u − α e^{-β|x|²/2})‖²`, evaluated directly.
pub fn grad_objective(u: &PolyGaussFn, n: u32, alpha: f64, beta: f64) -> Result<f64> {
    let diff = u.add_scaled(&g(beta), -alpha)?.derivative();
    Ok(full_space(&diff.mul(&diff), n)?.max(0.0))
}

/// `‖u − α e^{-β|x|²/2}‖²`, evaluated directly.
pub fn l2_objective(u: &PolyGaussFn, n: u32, alpha: f64, beta: f64) -> Result<f64> {
    let diff = u.add_scaled(&g(beta), -alpha)?;
    Ok(full_space(&diff.mul(&diff), n)?.max(0.0))
}

/// Amplitude with `‖∇(α g_β)‖ = ‖∇u‖` and the sign of `⟨∇u, ∇g_β⟩`.
pub fn norm_matched_alpha(u: &PolyGaussFn, n: u32, beta: f64) -> Result<f64> {
    let gu = grad_inner(u, u, n)?;
    let a = (gu / gaussian_grad_sq(beta, n)).sqrt();
    let ip = grad_inner(u, &g(beta), n)?;
    Ok(if ip < 0.0 { -a } else { a })
}

fn finish(
    s: Search,
    metric: Metric,
    alpha: impl Fn(f64) -> Result<f64>,
    value: impl Fn(f64, f64) -> Result<f64>,
) -> Result<DistanceResult> {
    let alpha_star = alpha(s.beta)?;
    Ok(DistanceResult {
        value_sq: value(alpha_star, s.beta)?,
        alpha_star,
        beta_star: s.beta,
        metric,
        converged: s.converged,
        evaluations: s.evaluations,
        d_star: None,
    })
}

fn degenerate(metric: Metric) -> DistanceResult {
    DistanceResult {
        value_sq: 0.0,
        alpha_star: 0.0,
        beta_star: 1.0,
        metric,
        converged: true,
        evaluations: 0,
        d_star: None,
    }
}

/// `inf_{α,β} ‖∇(u − α e^{-β|x|²/2})‖²`.
pub fn dist_grad_to_shup(u: &PolyGaussFn, n: u32) -> Result<DistanceResult> {
    let gu = grad_inner(u, u, n)?;
    if gu == 0.0 {
        return Ok(degenerate(Metric::GradSeminorm));
    }
    let s = search_log_beta(|b| match grad_inner(u, &g(b), n) {
        Ok(ip) => gu - ip * ip / gaussian_grad_sq(b, n),
        Err(_) => f64::INFINITY,
    });
    finish(
        s,
        Metric::GradSeminorm,
        |b| Ok(grad_inner(u, &g(b), n)? / gaussian_grad_sq(b, n)),
        |a, b| grad_objective(u, n, a, b),
    )
}

/// As [`dist_grad_to_shup`] with the competitor constrained to
/// `‖∇u*‖ = ‖∇u‖`.
pub fn dist_grad_norm_matched(u: &PolyGaussFn, n: u32) -> Result<DistanceResult> {
    let gu = grad_inner(u, u, n)?;
    if gu == 0.0 {
        return Err(Error::Degenerate("norm-matched distance needs a nonzero gradient".into()));
    }
    let s = search_log_beta(|b| match grad_inner(u, &g(b), n) {
        Ok(ip) => 2.0 * gu - 2.0 * (gu / gaussian_grad_sq(b, n)).sqrt() * ip.abs(),
        Err(_) => f64::INFINITY,
    });
    finish(
        s,
        Metric::GradSeminormNormMatched,
        |b| norm_matched_alpha(u, n, b),
        |a, b| grad_objective(u, n, a, b),
    )
}

/// `inf_{α,β} ‖u − α e^{-β|x|²/2}‖²`.
pub fn dist_l2_to_hup(u: &PolyGaussFn, n: u32) -> Result<DistanceResult> {
    let uu = l2_inner(u, u, n)?;
    if uu == 0.0 {
        return Ok(degenerate(Metric::L2));
    }
    let s = search_log_beta(|b| match l2_inner(u, &g(b), n) {
        Ok(ip) => uu - ip * ip / gaussian_l2_sq(b, n),
        Err(_) => f64::INFINITY,
    });
    finish(
        s,
        Metric::L2,
        |b| Ok(l2_inner(u, &g(b), n)? / gaussian_l2_sq(b, n)),
        |a, b| l2_objective(u, n, a, b),
    )
}

/// Distance from the curl-free field `∇u` to the fields `α e^{-β|x|²} x`.
/// These are exactly the gradients of Gaussians, so the problem reduces to
/// the gradient seminorm of the potential.
pub fn dist_vector_cfhup(u: &PolyGaussFn, n: u32, metric: VectorMetric) -> Result<DistanceResult> {
    match metric {
        VectorMetric::L2 => Ok(DistanceResult { metric: Metric::VectorL2, ..dist_grad_to_shup(u, n)? }),
        VectorMetric::NormMatched => dist_grad_norm_matched(u, n),
    }
}

fn d2_parts(s: &SeparableFn) -> Result<(PolyGaussFn, PolyGaussFn)> {
    if let Some(c) = s.components().iter().find(|c| c.k > 1) {
        return Err(Error::UnsupportedSector(format!(
            "d2 distance supports sectors 0 and 1 only, found k = {}",
            c.k
        )));
    }
    let pick =
        |k| s.sector(k).map(|c| c.profile.clone()).unwrap_or_else(|| PolyGaussFn::zero(crate::Parity::Even));
    Ok((pick(0), pick(1)))
}

/// `∫|u − c g|² + ∫|u − (c + d·x) g|²` for `g = e^{-β|x|²/2}` and
/// `d = d₁e₁`, evaluated sector by sector.
pub fn d2_objective(s: &SeparableFn, c: f64, d1: f64, beta: f64) -> Result<f64> {
    let (v0, v1) = d2_parts(s)?;
    let n = s.ambient_dim();
    let e = d1 / (2.0 * PI).sqrt();
    let r0 = v0.add_scaled(&g(beta), -c)?;
    let r1 = v1.add_scaled(&g(beta), -e)?;
    let a = full_space(&r0.mul(&r0), n)?.max(0.0);
    let b = full_space(&v1.mul(&v1), n + 2)?.max(0.0);
    let c1 = full_space(&r1.mul(&r1), n + 2)?.max(0.0);
    Ok(2.0 * a + b + c1)
}

/// `inf_{c,d,β} ∫|u − c e^{-β|x|²/2}|² + |u − (c + d·x) e^{-β|x|²/2}|²` for
/// inputs living in sectors 0 and 1. Only `d ∥ e₁` can help since the
/// degree-one harmonic is `√(2π)·σ₁`. The first integral never sees `d`, so
/// the degree-one part always contributes its full `L²` mass once.
pub fn dist_d2_partial(s: &SeparableFn) -> Result<DistanceResult> {
    let (v0, v1) = d2_parts(s)?;
    let n = s.ambient_dim();
    let a0 = l2_inner(&v0, &v0, n)?;
    let a1 = l2_inner(&v1, &v1, n + 2)?;
    let mut out = if a0 == 0.0 && a1 == 0.0 {
        degenerate(Metric::D2Partial)
    } else {
        let obj = |b: f64| -> Result<f64> {
            let p0 = l2_inner(&v0, &g(b), n)?;
            let p1 = l2_inner(&v1, &g(b), n + 2)?;
            Ok(2.0 * (a0 - p0 * p0 / gaussian_l2_sq(b, n)) + 2.0 * a1 - p1 * p1 / gaussian_l2_sq(b, n + 2))
        };
        let sr = search_log_beta(|b| obj(b).unwrap_or(f64::INFINITY));
        let b = sr.beta;
        let c = l2_inner(&v0, &g(b), n)? / gaussian_l2_sq(b, n);
        let e = l2_inner(&v1, &g(b), n + 2)? / gaussian_l2_sq(b, n + 2);
        let d1 = e * (2.0 * PI).sqrt();
        DistanceResult {
            value_sq: d2_objective(s, c, d1, b)?,
            alpha_star: c,
            beta_star: b,
            metric: Metric::D2Partial,
            converged: sr.converged,
            evaluations: sr.evaluations,
            d_star: Some(d1),
        }
    };
    if out.d_star.is_none() {
        out.d_star = Some(0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_algebra::tests::arb_even_fn;
    use crate::harmonics::SectorComponent;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    fn lin(lo: f64, hi: f64, m: usize) -> impl Iterator<Item = f64> {
        (0..m).map(move |i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
    }

    /// Grid over `(α, log β)` followed by repeated local zooms.
    fn brute_2d(obj: impl Fn(f64, f64) -> f64) -> f64 {
        let (mut a0, mut a1) = (-3.0, 3.0);
        let (mut t0, mut t1) = (0.05f64.ln(), 20f64.ln());
        let mut m = 400;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for _ in 0..8 {
            for a in lin(a0, a1, m) {
                for t in lin(t0, t1, m) {
                    let v = obj(a, t.exp());
                    if v < best.0 {
                        best = (v, a, t);
                    }
                }
            }
            let (da, dt) = (4.0 * (a1 - a0) / m as f64, 4.0 * (t1 - t0) / m as f64);
            (a0, a1, t0, t1) = (best.1 - da, best.1 + da, best.2 - dt, best.2 + dt);
            m = 41;
        }
        best.0
    }

    fn brute_1d(obj: impl Fn(f64) -> f64) -> f64 {
        let (mut t0, mut t1) = (0.05f64.ln(), 20f64.ln());
        let mut best = (f64::INFINITY, 0.0);
        for _ in 0..10 {
            for t in lin(t0, t1, 400) {
                let v = obj(t.exp());
                if v < best.0 {
                    best = (v, t);
                }
            }
            let dt = 4.0 * (t1 - t0) / 400.0;
            (t0, t1) = (best.1 - dt, best.1 + dt);
        }
        best.0
    }

    #[test]
    fn gaussian_norms() {
        for n in 1..7 {
            for b in [0.3, 1.0, 2.5] {
                let gb = g(b);
                assert!(rel(gaussian_l2_sq(b, n), l2_inner(&gb, &gb, n).unwrap()) < 1e-14);
                assert!(rel(gaussian_grad_sq(b, n), grad_inner(&gb, &gb, n).unwrap()) < 1e-14);
            }
        }
    }

    #[test]
    fn shup_member() {
        let u = PolyGaussFn::gaussian(5.0, 1.0);
        let d = dist_grad_to_shup(&u, 3).unwrap();
        assert!(d.converged);
        assert!(d.value_sq <= 1e-12 * grad_inner(&u, &u, 3).unwrap());
        assert!((d.alpha_star - 5.0).abs() < 1e-6 && (d.beta_star - 2.0).abs() < 1e-6, "{d:?}");
    }

    #[test]
    fn shup_competitor_bound() {
        let p = PolyGaussFn::from_pairs(&[(&[0.0, 0.01], 0.5)]).unwrap();
        let u = PolyGaussFn::optimizer(1.0, 1.0).add(&p).unwrap();
        let d = dist_grad_to_shup(&u, 3).unwrap();
        let bound = grad_inner(&p, &p, 3).unwrap();
        assert!(d.value_sq > 0.0 && d.value_sq <= bound, "{d:?} {bound}");
    }

    #[test]
    fn shup_brute_force() {
        let u = PolyGaussFn::from_pairs(&[(&[1.0, 0.2], 0.5)]).unwrap();
        let d = dist_grad_to_shup(&u, 2).unwrap();
        let b = brute_2d(|a, beta| grad_objective(&u, 2, a, beta).unwrap());
        assert!(rel(d.value_sq, b) < 1e-4, "{} vs {b}", d.value_sq);
    }

    #[test]
    fn norm_matched_cases() {
        let u = PolyGaussFn::optimizer(1.0, 1.0);
        let d = dist_grad_norm_matched(&u, 4).unwrap();
        assert!(d.value_sq <= 1e-12 * grad_inner(&u, &u, 4).unwrap());

        let u = PolyGaussFn::from_pairs(&[(&[1.0, 0.2], 0.5)]).unwrap();
        let d = dist_grad_norm_matched(&u, 2).unwrap();
        assert!(d.value_sq >= dist_grad_to_shup(&u, 2).unwrap().value_sq);
        let b = brute_1d(|beta| {
            let a = norm_matched_alpha(&u, 2, beta).unwrap().abs();
            grad_objective(&u, 2, a, beta).unwrap().min(grad_objective(&u, 2, -a, beta).unwrap())
        });
        assert!(rel(d.value_sq, b) < 1e-4, "{} vs {b}", d.value_sq);

        assert!(matches!(dist_grad_norm_matched(&PolyGaussFn::constant(0.0), 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn hup_cases() {
        let u = PolyGaussFn::optimizer(2.0, 3.0);
        let d = dist_l2_to_hup(&u, 3).unwrap();
        assert!(d.value_sq <= 1e-12 * l2_inner(&u, &u, 3).unwrap());
        assert!((d.alpha_star - 2.0).abs() < 1e-6 && (d.beta_star - 3.0).abs() < 1e-6, "{d:?}");

        let p = PolyGaussFn::gaussian(0.05, 1.0);
        let u = PolyGaussFn::optimizer(1.0, 1.0).add(&p).unwrap();
        let d = dist_l2_to_hup(&u, 2).unwrap();
        assert!(d.value_sq <= l2_inner(&p, &p, 2).unwrap());
        let b = brute_2d(|a, beta| l2_objective(&u, 2, a, beta).unwrap());
        assert!(rel(d.value_sq, b) < 1e-4, "{} vs {b}", d.value_sq);

        let z = dist_l2_to_hup(&PolyGaussFn::zero(crate::Parity::Even), 3).unwrap();
        assert_eq!(z.value_sq, 0.0);
    }

    #[test]
    fn vector_cases() {
        let u = PolyGaussFn::optimizer(1.0, 1.0);
        let d = dist_vector_cfhup(&u, 3, VectorMetric::L2).unwrap();
        assert!(d.value_sq <= 1e-12 * grad_inner(&u, &u, 3).unwrap());
        assert_eq!(d.metric, Metric::VectorL2);

        let u = PolyGaussFn::from_pairs(&[(&[1.0, -0.15], 0.5), (&[0.1], 1.3)]).unwrap();
        let v = dist_vector_cfhup(&u, 2, VectorMetric::L2).unwrap();
        assert_eq!(v.value_sq, dist_grad_to_shup(&u, 2).unwrap().value_sq);
        let b = brute_2d(|a, beta| grad_objective(&u, 2, a, beta).unwrap());
        assert!(rel(v.value_sq, b) < 1e-4, "{} vs {b}", v.value_sq);
    }

    fn two_sector(n: u32, v0: PolyGaussFn, v1: PolyGaussFn) -> SeparableFn {
        SeparableFn::new(n, vec![SectorComponent::new(0, v0).unwrap(), SectorComponent::new(1, v1).unwrap()])
            .unwrap()
    }

    #[test]
    fn d2_members() {
        // The first integral keeps the whole degree-one part, so a member of
        // the affine family sits at distance ∫|d·x e^{-|x|²}|² = (π/2)^{5/2}.
        let s = two_sector(3, PolyGaussFn::gaussian(1.0, 1.0), PolyGaussFn::gaussian(1.0, 1.0));
        let d = dist_d2_partial(&s).unwrap();
        assert!(rel(d.value_sq, (PI / 2.0).powf(2.5)) < 1e-12, "{d:?}");
        assert!((d.beta_star - 2.0).abs() < 1e-6 && (d.alpha_star - 1.0).abs() < 1e-6);
        assert!((d.d_star.unwrap() - (2.0 * PI).sqrt()).abs() < 1e-6);

        let s = SeparableFn::single(3, 0, PolyGaussFn::gaussian(1.5, 0.7)).unwrap();
        let d = dist_d2_partial(&s).unwrap();
        assert!(d.value_sq <= 1e-12);
        assert_eq!(d.d_star, Some(0.0));

        let s = SeparableFn::single(3, 2, PolyGaussFn::gaussian(1.5, 0.7)).unwrap();
        assert!(matches!(dist_d2_partial(&s), Err(Error::UnsupportedSector(_))));
    }

    #[test]
    fn d2_brute_force() {
        let v0 = PolyGaussFn::from_pairs(&[(&[1.0, 0.15], 0.6)]).unwrap();
        let v1 = PolyGaussFn::from_pairs(&[(&[0.8, -0.1], 0.45)]).unwrap();
        let s = two_sector(3, v0, v1);
        let d = dist_d2_partial(&s).unwrap();
        let (mut c0, mut c1, mut e0, mut e1) = (-3.0, 3.0, -3.0, 3.0);
        let (mut t0, mut t1) = (0.05f64.ln(), 20f64.ln());
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        let m = 60;
        for _ in 0..12 {
            for c in lin(c0, c1, m) {
                for e in lin(e0, e1, m) {
                    for t in lin(t0, t1, m) {
                        let v = d2_objective(&s, c, e, t.exp()).unwrap();
                        if v < best.0 {
                            best = (v, c, e, t);
                        }
                    }
                }
            }
            let w = |a: f64, b: f64| 3.0 * (b - a) / m as f64;
            let (dc, de, dt) = (w(c0, c1), w(e0, e1), w(t0, t1));
            (c0, c1, e0, e1, t0, t1) =
                (best.1 - dc, best.1 + dc, best.2 - de, best.2 + de, best.3 - dt, best.3 + dt);
        }
        assert!(rel(d.value_sq, best.0) < 1e-3, "{d:?} vs {best:?}");
    }

    #[test]
    fn endpoints_exceed_minimum() {
        let corpus = [
            PolyGaussFn::from_pairs(&[(&[1.0, 0.2], 0.5)]).unwrap(),
            PolyGaussFn::from_pairs(&[(&[1.0, -0.3, 0.02], 0.8)]).unwrap(),
            PolyGaussFn::from_pairs(&[(&[1.0], 0.4), (&[0.3], 2.0)]).unwrap(),
        ];
        for u in &corpus {
            for n in [2u32, 3, 5] {
                let d = dist_grad_to_shup(u, n).unwrap();
                for b in [BETA_LO, BETA_HI] {
                    let a = grad_inner(u, &g(b), n).unwrap() / gaussian_grad_sq(b, n);
                    assert!(grad_objective(u, n, a, b).unwrap() > d.value_sq);
                }
                let d = dist_l2_to_hup(u, n).unwrap();
                for b in [BETA_LO, BETA_HI] {
                    let a = l2_inner(u, &g(b), n).unwrap() / gaussian_l2_sq(b, n);
                    assert!(l2_objective(u, n, a, b).unwrap() > d.value_sq);
                }
            }
        }
    }

    #[test]
    fn members_at_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = rng.random_range(-4.0..4.0);
            let b = (rng.random_range(-2.0f64..2.0)).exp();
            let n = rng.random_range(1..6u32);
            let u = PolyGaussFn::optimizer(a, b);
            let d = dist_l2_to_hup(&u, n).unwrap();
            assert!(d.value_sq <= 1e-12 * l2_inner(&u, &u, n).unwrap(), "{a} {b} {n} {d:?}");
            let d = dist_grad_to_shup(&u, n).unwrap();
            assert!(d.value_sq <= 1e-12 * grad_inner(&u, &u, n).unwrap(), "{a} {b} {n} {d:?}");
        }
    }

    #[test]
    fn unreachable_minimum_is_flagged() {
        // A very wide Gaussian pushes the optimum below the expanded bracket.
        let u = PolyGaussFn::optimizer(1.0, 1e-7);
        let d = dist_l2_to_hup(&u, 2).unwrap();
        assert!(!d.converged);
    }

    #[test]
    fn serializes_field_names() {
        let d = dist_l2_to_hup(&PolyGaussFn::optimizer(1.0, 1.0), 2).unwrap();
        let v: serde_json::Value = serde_json::to_value(&d).unwrap();
        for k in ["value_sq", "alpha_star", "beta_star", "metric", "converged", "evaluations"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["metric"], "l2");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn competitors_and_ordering(u in arb_even_fn(), n in 1u32..6, seed in any::<u64>()) {
            let dg = dist_grad_to_shup(&u, n).unwrap();
            let dl = dist_l2_to_hup(&u, n).unwrap();
            let gu = grad_inner(&u, &u, n).unwrap();
            let uu = l2_inner(&u, &u, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10 {
                let a = rng.random_range(-3.0..3.0);
                let b = rng.random_range(-3.0f64..3.0).exp();
                prop_assert!(dg.value_sq <= grad_objective(&u, n, a, b).unwrap() + 1e-12 * gu);
                prop_assert!(dl.value_sq <= l2_objective(&u, n, a, b).unwrap() + 1e-12 * uu);
            }
            prop_assert!(dl.value_sq <= uu * (1.0 + 1e-12));
            if gu > 0.0 {
                let dm = dist_grad_norm_matched(&u, n).unwrap();
                prop_assert!(dm.value_sq >= dg.value_sq * (1.0 - 1e-9) - 1e-12 * gu);
            }
        }
    }
}
