//! Sphere areas, radial Gauss–Laguerre quadrature and a Monte-Carlo oracle
//! on low-dimensional space.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::exact_algebra::{Parity, PolyGaussFn};
use crate::special::ln_gamma;

/// `ln |S^{d-1}|`.
pub fn ln_sphere_area(d: u32) -> Result<f64> {
    if d < 1 {
        return Err(domain("sphere_area needs d >= 1"));
    }
    let h = 0.5 * f64::from(d);
    Ok(std::f64::consts::LN_2 + h * PI.ln() - ln_gamma(h))
}

/// `|S^{d-1}| = 2π^{d/2}/Γ(d/2)`, the surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: u32) -> Result<f64> {
    Ok(ln_sphere_area(d)?.exp())
}

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial profile given by closures for its value and two derivatives.
#[derive(Clone)]
pub struct RadialProfile {
    value: Scalar,
    d1: Scalar,
    d2: Scalar,
    r_max: f64,
}

impl std::fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialProfile").field("r_max", &self.r_max).finish_non_exhaustive()
    }
}

impl RadialProfile {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        r_max: f64,
    ) -> Self {
        RadialProfile { value: Arc::new(value), d1: Arc::new(d1), d2: Arc::new(d2), r_max }
    }

    /// Wraps an even exact-class function; `r_max` is where its slowest term
    /// has decayed far below double precision.
    pub fn from_exact(f: &PolyGaussFn) -> Result<Self> {
        if f.parity() != Parity::Even {
            return Err(domain("radial profiles must be even"));
        }
        let beta = match f.min_beta() {
            None => 1.0,
            Some(b) if b > 0.0 => b,
            Some(b) => return Err(domain(format!("profile does not decay (beta = {b})"))),
        };
        let deg = f.degree() as f64;
        let r_max = ((40.0 + 2.0 * deg) / beta).sqrt();
        let (v, d1) = (f.clone(), f.derivative());
        let d2 = d1.derivative();
        Ok(Self::new(move |r| v.eval(r), move |r| d1.eval(r), move |r| d2.eval(r), r_max))
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.value)(r)
    }

    pub fn d1(&self, r: f64) -> f64 {
        (self.d1)(r)
    }

    pub fn d2(&self, r: f64) -> f64 {
        (self.d2)(r)
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Central differences at ten interior probes must agree with the
    /// supplied derivatives to `1e-6` relative.
    pub fn check_consistency(&self) -> Result<()> {
        let h = 1e-5 * self.r_max.max(1.0);
        for i in 1..=10 {
            let r = 0.5 * self.r_max * f64::from(i) / 11.0;
            let fd1 = (self.value(r + h) - self.value(r - h)) / (2.0 * h);
            let fd2 = (self.d1(r + h) - self.d1(r - h)) / (2.0 * h);
            let scale = self.value(r).abs() + self.d1(r).abs() + self.d2(r).abs() + 1e-12;
            for (name, fd, exact) in [("first", fd1, self.d1(r)), ("second", fd2, self.d2(r))] {
                if (fd - exact).abs() > 1e-6 * scale.max(exact.abs()) {
                    return Err(domain(format!(
                        "{name} derivative inconsistent at r = {r}: supplied {exact}, differenced {fd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub tail_estimate: f64,
    pub warning: Option<String>,
}

struct LaguerreRule {
    nodes: Vec<f64>,
    ln_weights: Vec<f64>,
}

type RuleCache = Mutex<HashMap<(usize, u64), Arc<LaguerreRule>>>;

/// Generalized Gauss–Laguerre rule for `x^α e^{-x}`. Nodes come from the
/// Jacobi matrix; weights from the Christoffel function evaluated with a
/// rescaled orthonormal recurrence, which keeps them accurate in the far tail.
fn laguerre_rule(n: usize, alpha: f64) -> Arc<LaguerreRule> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, alpha.to_bits());
    if let Some(rule) = cache.lock().unwrap().get(&key) {
        return rule.clone();
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * i as f64 + alpha + 1.0
        } else if i.abs_diff(j) == 1 {
            let k = i.max(j) as f64;
            (k * (k + alpha)).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let ln_h0 = ln_gamma(alpha + 1.0);
    let ln_weights = nodes
        .iter()
        .map(|&x| {
            let (mut prev, mut cur) = (0.0_f64, 1.0_f64);
            let (mut sum, mut ln_scale) = (1.0_f64, 0.0_f64);
            for j in 0..n - 1 {
                let jf = j as f64;
                let a = 2.0 * jf + alpha + 1.0;
                let sb = (jf * (jf + alpha)).sqrt();
                let sb1 = ((jf + 1.0) * (jf + 1.0 + alpha)).sqrt();
                let next = ((x - a) * cur - sb * prev) / sb1;
                prev = cur;
                cur = next;
                sum += cur * cur;
                if sum > 1e200 {
                    let f = 1e-100;
                    prev *= f;
                    cur *= f;
                    sum *= f * f;
                    ln_scale += 2.0 * 100.0 * std::f64::consts::LN_10;
                }
            }
            ln_h0 - sum.ln() - ln_scale
        })
        .collect();
    let rule = Arc::new(LaguerreRule { nodes, ln_weights });
    cache.lock().unwrap().insert(key, rule.clone());
    rule
}

/// `∫₀^∞ g(r) r^{d-1} dr` by substituting `t = r² = s·x` and applying an
/// `n`-point Gauss–Laguerre rule with `α = d/2 - 1`.
pub fn quad_radial_fn(g: impl Fn(f64) -> f64, r_max: f64, d: u32, nodes: usize) -> Result<QuadResult> {
    if d < 1 {
        return Err(domain("dimension must be at least 1"));
    }
    if nodes < 2 {
        return Err(domain("need at least two quadrature nodes"));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(domain(format!("r_max must be positive and finite, got {r_max}")));
    }
    let half_d = 0.5 * f64::from(d);
    let rule = laguerre_rule(nodes, half_d - 1.0);
    let s = r_max * r_max / 25.0;
    let ln_pref = half_d * s.ln() - std::f64::consts::LN_2;
    let value: f64 = rule
        .nodes
        .iter()
        .zip(&rule.ln_weights)
        .map(|(&x, &lw)| {
            let v = g((s * x).sqrt());
            if v == 0.0 {
                0.0
            } else {
                v.signum() * (lw + x + ln_pref + v.abs().ln()).exp()
            }
        })
        .sum();
    let tail_estimate = g(r_max).abs() * r_max.powf(f64::from(d));
    let warning = (tail_estimate > 1e-6 * value.abs()).then(|| {
        format!(
            "integrand not negligible at r_max = {r_max}: tail estimate {tail_estimate:.3e} vs integral {value:.3e}"
        )
    });
    Ok(QuadResult { value, tail_estimate, warning })
}

/// `∫₀^∞ p(r) r^{d-1} dr`.
pub fn quad_radial(p: &RadialProfile, d: u32, nodes: usize) -> Result<QuadResult> {
    quad_radial_fn(|r| p.value(r), p.r_max(), d, nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCOracleResult {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

const MC_BLOCK: u64 = 4096;
const PILOT_SAMPLES: u64 = 10_000;
const PILOT_SIGMA: f64 = 1.5;

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0.0 {
            return o;
        }
        if o.n == 0.0 {
            return self;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * o.n / n,
            m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n,
        }
    }
}

fn gaussian_draw(rng: &mut ChaCha8Rng, sigma: f64, x: &mut [f64]) -> f64 {
    let mut r2 = 0.0;
    for xi in x.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *xi = sigma * z;
        r2 += *xi * *xi;
    }
    r2
}

fn ln_density(r2: f64, sigma: f64, n: usize) -> f64 {
    -0.5 * n as f64 * (2.0 * PI * sigma * sigma).ln() - 0.5 * r2 / (sigma * sigma)
}

/// Importance-sampled estimate of `∫_{R^N} f`. The proposal is a centred
/// isotropic Gaussian whose variance comes from a pilot run. Sample blocks
/// each own a ChaCha stream, so the result does not depend on thread count.
pub fn mc_fullspace(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<MCOracleResult> {
    if !(1..=3).contains(&n) {
        return Err(domain(format!("Monte-Carlo oracle supports N <= 3, got {n}")));
    }
    if samples < 2 {
        return Err(domain("need at least two samples"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let mut x = vec![0.0; n];
    let (mut mass, mut second) = (0.0, 0.0);
    for _ in 0..PILOT_SAMPLES {
        let r2 = gaussian_draw(&mut rng, PILOT_SIGMA, &mut x);
        let w = f(&x).abs() / ln_density(r2, PILOT_SIGMA, n).exp();
        mass += w;
        second += w * r2;
    }
    let sigma =
        if mass > 0.0 && second > 0.0 { (1.5 * second / mass / n as f64).sqrt() } else { PILOT_SIGMA };

    let blocks = samples.div_ceil(MC_BLOCK);
    let parts: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b + 1);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut x = vec![0.0; n];
            let mut m = Moments::default();
            for _ in 0..count {
                let r2 = gaussian_draw(&mut rng, sigma, &mut x);
                m.push(f(&x) * (-ln_density(r2, sigma, n)).exp());
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = total.m2 / (total.n - 1.0);
    Ok(MCOracleResult { estimate: total.mean, std_error: (var / total.n).sqrt(), samples, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_algebra::tests::arb_even_fn;
    use proptest::prelude::*;

    #[test]
    fn sphere_area_examples() {
        assert!((sphere_area(2).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3).unwrap() - 4.0 * PI).abs() < 1e-13);
        // Γ(5/2) = 3√π/4
        let want = 2.0 * PI.powf(2.5) / (0.75 * PI.sqrt());
        assert!((sphere_area(5).unwrap() - want).abs() < 1e-12 * want);
        assert!((want - 8.0 * PI * PI / 3.0).abs() < 1e-12 * want);
        assert!(sphere_area(0).is_err());
    }

    #[test]
    fn sphere_area_recursion() {
        for d in 1..=100u32 {
            let lhs = ln_sphere_area(d + 2).unwrap();
            let rhs = (2.0 * PI / f64::from(d)).ln() + ln_sphere_area(d).unwrap();
            assert!((lhs.exp() / rhs.exp() - 1.0).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn laguerre_rule_integrates_moments() {
        for alpha in [-0.5, 0.0, 1.5, 7.0] {
            let rule = laguerre_rule(40, alpha);
            for k in 0..10 {
                let got: f64 =
                    rule.nodes.iter().zip(&rule.ln_weights).map(|(x, lw)| lw.exp() * x.powi(k)).sum();
                let want = ln_gamma(alpha + 1.0 + f64::from(k)).exp();
                assert!((got / want - 1.0).abs() < 1e-12, "alpha={alpha} k={k}");
            }
        }
    }

    #[test]
    fn quad_examples() {
        let g = PolyGaussFn::gaussian(1.0, 1.0);
        let p = RadialProfile::from_exact(&g).unwrap();
        let q = quad_radial(&p, 2, 200).unwrap();
        assert!((q.value - 0.5).abs() < 1e-10);
        assert!(q.warning.is_none());

        let h = PolyGaussFn::gaussian(1.0, 0.5);
        let weighted = h.mul_r().mul_r();
        let p = RadialProfile::from_exact(&weighted).unwrap();
        let q = quad_radial(&p, 3, 200).unwrap();
        let exact = weighted.integral_radial(3).unwrap();
        assert!((q.value / exact - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quad_flags_slow_decay() {
        let p = RadialProfile::new(
            |r| 1.0 / (1.0 + r * r),
            |r| -2.0 * r / (1.0 + r * r).powi(2),
            |r| (6.0 * r * r - 2.0) / (1.0 + r * r).powi(3),
            50.0,
        );
        let q = quad_radial(&p, 2, 200).unwrap();
        assert!(q.warning.is_some());
    }

    #[test]
    fn profile_consistency() {
        let f = PolyGaussFn::from_pairs(&[(&[1.0, -0.4], 0.8)]).unwrap();
        assert!(RadialProfile::from_exact(&f).unwrap().check_consistency().is_ok());
        let bad = RadialProfile::new(|r| (-r * r).exp(), |r| r, |_| 0.0, 5.0);
        assert!(bad.check_consistency().is_err());
    }

    fn within(r: &MCOracleResult, want: f64, k: f64) -> bool {
        (r.estimate - want).abs() <= k * r.std_error
    }

    #[test]
    fn mc_examples() {
        let r = mc_fullspace(&|x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp(), 2, 1_000_000, 3).unwrap();
        assert!(within(&r, PI, 3.0), "{r:?}");
        assert!(r.std_error > 0.0);

        let grad_sq = |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            r2 * (-r2).exp()
        };
        let r = mc_fullspace(&grad_sq, 3, 400_000, 5).unwrap();
        assert!(within(&r, 1.5 * PI.powf(1.5), 3.0), "{r:?}");

        let r = mc_fullspace(&grad_sq, 2, 400_000, 6).unwrap();
        assert!(within(&r, PI, 3.0), "{r:?}");
    }

    #[test]
    fn mc_is_deterministic_and_shard_independent() {
        let f = |x: &[f64]| (-(x[0] * x[0] + 0.5 * x[1] * x[1])).exp() * (1.0 + x[0]);
        let a = mc_fullspace(&f, 2, 50_000, 11).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| mc_fullspace(&f, 2, 50_000, 11).unwrap());
        assert_eq!(a, b);
        let c = mc_fullspace(&f, 2, 50_000, 12).unwrap();
        let combined = (a.std_error.powi(2) + c.std_error.powi(2)).sqrt();
        assert!((a.estimate - c.estimate).abs() <= 6.0 * combined);
    }

    #[test]
    fn mc_rejects_high_dimension() {
        assert!(mc_fullspace(&|_: &[f64]| 1.0, 4, 100, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn quadrature_matches_exact(f in arb_even_fn(), d in 2u32..=30) {
            let exact = f.integral_radial(d).unwrap();
            let p = RadialProfile::from_exact(&f).unwrap();
            let q = quad_radial(&p, d, 200).unwrap();
            let abs_f = {
                let g = f.clone();
                quad_radial_fn(move |r| g.eval(r).abs(), p.r_max(), d, 200).unwrap().value
            };
            prop_assert!((q.value - exact).abs() <= 1e-8 * abs_f.max(exact.abs()),
                "q={} exact={} abs={}", q.value, exact, abs_f);
        }
    }
}
