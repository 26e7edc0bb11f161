//! Exact calculus on radial profiles `Σᵢ r^p·Pᵢ(r²)·e^{-βᵢ r²}`.
//!
//! `p` is the parity (0 for even, 1 for odd) and each `Pᵢ` is stored by its
//! coefficients in `s = r²`. Derivatives, radial Laplacians, products and
//! Gaussian reweighting all stay inside the class, and integrals against
//! `r^{d-1}` reduce to Gamma moments.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{ln_gauss_moment, SignedLogSum};

/// Betas closer than this are merged into one term.
pub const BETA_MERGE_TOL: f64 = 1e-14;
/// Coefficients smaller than this in magnitude are treated as zero.
pub const COEFF_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    #[default]
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Self {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn combine(self, other: Parity) -> Self {
        if self == other {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Power of `r` in front of the polynomial part.
    pub fn degree(self) -> i32 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

/// One `P(r²)·e^{-β r²}` block. Beta may be any finite real here;
/// integration is what requires `β > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyGaussTerm {
    coeffs: Vec<f64>,
    beta: f64,
}

impl PolyGaussTerm {
    pub fn new(coeffs: Vec<f64>, beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return Err(domain(format!("beta must be finite, got {beta}")));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(domain(format!("non-finite coefficient {c}")));
        }
        let mut t = PolyGaussTerm { coeffs, beta };
        t.trim();
        Ok(t)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn trim(&mut self) {
        for c in &mut self.coeffs {
            if c.abs() < COEFF_FLOOR {
                *c = 0.0;
            }
        }
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
    }

    fn poly(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineOp {
    Add,
    Multiply,
}

/// A finite sum of [`PolyGaussTerm`]s sharing one parity, kept in canonical
/// form: terms sorted by beta, equal betas merged, zeros trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyGaussFn {
    terms: Vec<PolyGaussTerm>,
    parity: Parity,
}

impl PolyGaussFn {
    pub fn zero(parity: Parity) -> Self {
        PolyGaussFn { terms: Vec::new(), parity }
    }

    pub fn new(terms: Vec<PolyGaussTerm>, parity: Parity) -> Self {
        let mut f = PolyGaussFn { terms, parity };
        f.canonicalize();
        f
    }

    /// Even function from `(coeffs, beta)` pairs.
    pub fn from_pairs(pairs: &[(&[f64], f64)]) -> Result<Self> {
        let terms =
            pairs.iter().map(|(c, b)| PolyGaussTerm::new(c.to_vec(), *b)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(terms, Parity::Even))
    }

    /// `α·e^{-β r²}`.
    pub fn gaussian(alpha: f64, beta: f64) -> Self {
        Self::new(vec![PolyGaussTerm { coeffs: vec![alpha], beta }], Parity::Even)
    }

    /// Optimizer profile `α·e^{-β r²/2}`.
    pub fn optimizer(alpha: f64, beta: f64) -> Self {
        Self::gaussian(alpha, 0.5 * beta)
    }

    pub fn constant(c: f64) -> Self {
        Self::gaussian(c, 0.0)
    }

    pub fn terms(&self) -> &[PolyGaussTerm] {
        &self.terms
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn min_beta(&self) -> Option<f64> {
        self.terms.iter().map(|t| t.beta).reduce(f64::min)
    }

    /// Highest power of `r` appearing in any term.
    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|t| 2 * (t.coeffs.len().saturating_sub(1)) + self.parity.degree() as usize)
            .max()
            .unwrap_or(0)
    }

    fn canonicalize(&mut self) {
        for t in &mut self.terms {
            t.trim();
        }
        self.terms.retain(|t| !t.coeffs.is_empty());
        self.terms.sort_by(|a, b| a.beta.total_cmp(&b.beta));
        let mut merged: Vec<PolyGaussTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if (t.beta - last.beta).abs() <= BETA_MERGE_TOL => {
                    if t.coeffs.len() > last.coeffs.len() {
                        last.coeffs.resize(t.coeffs.len(), 0.0);
                    }
                    for (a, b) in last.coeffs.iter_mut().zip(&t.coeffs) {
                        *a += b;
                    }
                }
                _ => merged.push(t),
            }
        }
        for t in &mut merged {
            t.trim();
        }
        merged.retain(|t| !t.coeffs.is_empty());
        self.terms = merged;
    }

    pub fn eval(&self, r: f64) -> f64 {
        let s = r * r;
        let lead = if self.parity == Parity::Odd { r } else { 1.0 };
        lead * self.terms.iter().map(|t| t.poly(s) * (-t.beta * s).exp()).sum::<f64>()
    }

    /// `f(r)/r` for odd `f`, using the exact polynomial quotient (finite at `r = 0`).
    pub fn eval_div_r(&self, r: f64) -> Result<f64> {
        self.expect(Parity::Odd)?;
        let s = r * r;
        Ok(self.terms.iter().map(|t| t.poly(s) * (-t.beta * s).exp()).sum())
    }

    fn expect(&self, parity: Parity) -> Result<()> {
        if self.parity == parity {
            Ok(())
        } else {
            Err(Error::WrongParity { expected: parity, found: self.parity })
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| PolyGaussTerm { coeffs: t.coeffs.iter().map(|x| x * c).collect(), beta: t.beta })
            .collect();
        Self::new(terms, self.parity)
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, other: &PolyGaussFn, c: f64) -> Result<Self> {
        if self.is_zero() {
            return Ok(other.scale(c));
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.parity != other.parity {
            return Err(Error::ParityMismatch(self.parity, other.parity));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.scale(c).terms);
        Ok(Self::new(terms, self.parity))
    }

    pub fn add(&self, other: &PolyGaussFn) -> Result<Self> {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &PolyGaussFn) -> Result<Self> {
        self.add_scaled(other, -1.0)
    }

    pub fn mul(&self, other: &PolyGaussFn) -> Self {
        let both_odd = self.parity == Parity::Odd && other.parity == Parity::Odd;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let shift = usize::from(both_odd);
                let mut c = vec![0.0; a.coeffs.len() + b.coeffs.len() - 1 + shift];
                for (i, x) in a.coeffs.iter().enumerate() {
                    for (j, y) in b.coeffs.iter().enumerate() {
                        c[i + j + shift] += x * y;
                    }
                }
                terms.push(PolyGaussTerm { coeffs: c, beta: a.beta + b.beta });
            }
        }
        Self::new(terms, self.parity.combine(other.parity))
    }

    /// Multiplies by `e^{-δ r²}`; `δ` may be negative.
    pub fn shift_beta(&self, delta: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| PolyGaussTerm { coeffs: t.coeffs.clone(), beta: t.beta + delta })
            .collect();
        Self::new(terms, self.parity)
    }

    /// `r ↦ f(λ r)`.
    pub fn dilate(&self, lambda: f64) -> Self {
        let l2 = lambda * lambda;
        let lead = if self.parity == Parity::Odd { lambda } else { 1.0 };
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut pw = lead;
                let coeffs = t
                    .coeffs
                    .iter()
                    .map(|c| {
                        let v = c * pw;
                        pw *= l2;
                        v
                    })
                    .collect();
                PolyGaussTerm { coeffs, beta: t.beta * l2 }
            })
            .collect();
        Self::new(terms, self.parity)
    }

    pub fn mul_r(&self) -> Self {
        match self.parity {
            Parity::Even => Self { terms: self.terms.clone(), parity: Parity::Odd },
            Parity::Odd => {
                let terms = self
                    .terms
                    .iter()
                    .map(|t| {
                        let mut c = Vec::with_capacity(t.coeffs.len() + 1);
                        c.push(0.0);
                        c.extend_from_slice(&t.coeffs);
                        PolyGaussTerm { coeffs: c, beta: t.beta }
                    })
                    .collect();
                Self::new(terms, Parity::Even)
            }
        }
    }

    /// Exact `f/r` of an odd function.
    pub fn div_r(&self) -> Result<Self> {
        self.expect(Parity::Odd)?;
        Ok(Self { terms: self.terms.clone(), parity: Parity::Even })
    }

    pub fn derivative(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let b2 = 2.0 * t.beta;
                let c = &t.coeffs;
                let coeffs: Vec<f64> = match self.parity {
                    // (P e)' = r·(2P' - 2βP)·e
                    Parity::Even => (0..c.len())
                        .map(|j| {
                            let next = c.get(j + 1).map_or(0.0, |x| 2.0 * (j + 1) as f64 * x);
                            next - b2 * c[j]
                        })
                        .collect(),
                    // (r P e)' = (P + 2sP' - 2βsP)·e
                    Parity::Odd => (0..=c.len())
                        .map(|j| {
                            let here = c.get(j).map_or(0.0, |x| (2 * j + 1) as f64 * x);
                            let prev = if j > 0 { b2 * c[j - 1] } else { 0.0 };
                            here - prev
                        })
                        .collect(),
                };
                PolyGaussTerm { coeffs, beta: t.beta }
            })
            .collect();
        Self::new(terms, self.parity.flip())
    }

    /// `f'' + (d-1) f'/r` for even `f`.
    pub fn radial_laplacian(&self, d: u32) -> Result<Self> {
        self.expect(Parity::Even)?;
        let d1 = self.derivative();
        let d2 = d1.derivative();
        d2.add_scaled(&d1.div_r()?, f64::from(d) - 1.0)
    }

    /// `∫₀^∞ f(r)·r^{d-1} dr` for even `f`.
    pub fn integral_radial(&self, d: u32) -> Result<f64> {
        if d < 1 {
            return Err(domain("dimension must be at least 1"));
        }
        self.expect(Parity::Even)?;
        self.moment(f64::from(d) - 1.0)
    }

    /// `∫₀^∞ f(r)·r^m dr` for either parity.
    pub(crate) fn moment(&self, m: f64) -> Result<f64> {
        let mut acc = SignedLogSum::new();
        for t in &self.terms {
            if t.beta <= 0.0 {
                return Err(domain(format!("integral diverges: term with beta = {} <= 0", t.beta)));
            }
            for (j, c) in t.coeffs.iter().enumerate() {
                let power = m + f64::from(self.parity.degree()) + 2.0 * j as f64;
                acc.push(*c, ln_gauss_moment(power, t.beta));
            }
        }
        Ok(acc.value())
    }

    pub fn to_spec(&self) -> FnSpec {
        FnSpec {
            terms: self.terms.iter().map(|t| TermSpec { coeffs: t.coeffs.clone(), beta: t.beta }).collect(),
            parity: self.parity,
        }
    }
}

/// `pg_combine`: `a + scale·b` or `scale·a·b`.
pub fn combine(a: &PolyGaussFn, b: &PolyGaussFn, op: CombineOp, scale: f64) -> Result<PolyGaussFn> {
    match op {
        CombineOp::Add => a.add_scaled(b, scale),
        CombineOp::Multiply => Ok(a.mul(b).scale(scale)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeffs: Vec<f64>,
    pub beta: f64,
}

/// JSON form `{"terms":[{"coeffs":[c0,c2,…],"beta":b},…]}`; parity defaults to even.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnSpec {
    pub terms: Vec<TermSpec>,
    #[serde(default, skip_serializing_if = "is_even")]
    pub parity: Parity,
}

fn is_even(p: &Parity) -> bool {
    *p == Parity::Even
}

impl TryFrom<FnSpec> for PolyGaussFn {
    type Error = Error;

    fn try_from(spec: FnSpec) -> Result<Self> {
        let terms = spec
            .terms
            .into_iter()
            .map(|t| PolyGaussTerm::new(t.coeffs, t.beta))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyGaussFn::new(terms, spec.parity))
    }
}

impl From<&PolyGaussFn> for FnSpec {
    fn from(f: &PolyGaussFn) -> Self {
        f.to_spec()
    }
}

impl Serialize for PolyGaussFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyGaussFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = FnSpec::deserialize(d)?;
        PolyGaussFn::try_from(spec).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn json_error(e: &serde_json::Error) -> Error {
    Error::Spec { line: e.line(), column: e.column(), message: e.to_string() }
}

/// Parses a user-supplied profile. Every beta must be positive so the
/// profile is integrable against any polynomial weight.
pub fn parse_fn_spec(text: &str) -> Result<PolyGaussFn> {
    let spec: FnSpec = serde_json::from_str(text).map_err(|e| json_error(&e))?;
    if let Some(t) = spec.terms.iter().find(|t| t.beta <= 0.0) {
        return Err(domain(format!("beta must be positive, got {}", t.beta)));
    }
    PolyGaussFn::try_from(spec)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Value and two derivatives of one term, expanded as a polynomial in `r`.
    fn term_jet(t: &PolyGaussTerm, parity: Parity, r: f64) -> (f64, f64, f64) {
        let p = parity.degree() as usize;
        let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for (j, c) in t.coeffs.iter().enumerate() {
            let n = (p + 2 * j) as i32;
            let nf = f64::from(n);
            g += c * r.powi(n);
            if n >= 1 {
                g1 += c * nf * r.powi(n - 1);
            }
            if n >= 2 {
                g2 += c * nf * (nf - 1.0) * r.powi(n - 2);
            }
        }
        let b = t.beta;
        let h = (-b * r * r).exp();
        let h1 = -2.0 * b * r * h;
        let h2 = (4.0 * b * b * r * r - 2.0 * b) * h;
        (g * h, g1 * h + g * h1, g2 * h + 2.0 * g1 * h1 + g * h2)
    }

    pub(crate) fn jet(f: &PolyGaussFn, r: f64) -> (f64, f64, f64) {
        f.terms.iter().fold((0.0, 0.0, 0.0), |acc, t| {
            let (a, b, c) = term_jet(t, f.parity, r);
            (acc.0 + a, acc.1 + b, acc.2 + c)
        })
    }

    /// Same sum with every coefficient replaced by its magnitude.
    fn envelope(f: &PolyGaussFn, r: f64) -> f64 {
        let s = r * r;
        let lead = if f.parity == Parity::Odd { r } else { 1.0 };
        lead * f
            .terms
            .iter()
            .map(|t| t.coeffs.iter().rev().fold(0.0, |a, c| a * s + c.abs()) * (-t.beta * s).exp())
            .sum::<f64>()
    }

    fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (a.abs().max(b.abs()).max(scale)).max(1e-300)
    }

    pub(crate) fn arb_even_fn() -> impl Strategy<Value = PolyGaussFn> {
        let term =
            (prop::collection::vec(-1.0f64..1.0, 1..=4), (0.3f64.ln()..3.0f64.ln()).prop_map(f64::exp));
        prop::collection::vec(term, 1..=3).prop_map(|ts| {
            let terms = ts.into_iter().map(|(c, b)| PolyGaussTerm::new(c, b).unwrap()).collect();
            PolyGaussFn::new(terms, Parity::Even)
        })
    }

    fn g_half() -> PolyGaussFn {
        PolyGaussFn::gaussian(1.0, 0.5)
    }

    #[test]
    fn combine_examples() {
        let g = g_half();
        let two = combine(&g, &g, CombineOp::Add, 1.0).unwrap();
        assert_eq!(two, PolyGaussFn::gaussian(2.0, 0.5));
        let sq = combine(&g, &g, CombineOp::Multiply, 1.0).unwrap();
        assert_eq!(sq, PolyGaussFn::gaussian(1.0, 1.0));
        let a = PolyGaussFn::from_pairs(&[(&[0.0, 1.0], 1.0)]).unwrap();
        let b = PolyGaussFn::from_pairs(&[(&[0.0, -1.0], 1.0)]).unwrap();
        let z = combine(&a, &b, CombineOp::Add, 1.0).unwrap();
        assert!(z.is_zero());
        assert!(z.terms().is_empty());
    }

    #[test]
    fn add_rejects_parity_mismatch() {
        let g = g_half();
        let err = g.add(&g.derivative()).unwrap_err();
        assert_eq!(err, Error::ParityMismatch(Parity::Even, Parity::Odd));
    }

    #[test]
    fn derivative_examples() {
        let d = g_half().derivative();
        assert_eq!(d.parity(), Parity::Odd);
        assert_eq!(d.terms()[0].coeffs(), &[-1.0]);
        assert_eq!(d.terms()[0].beta(), 0.5);

        let f = PolyGaussFn::from_pairs(&[(&[0.0, 1.0], 1.0)]).unwrap();
        let df = f.derivative();
        assert_eq!(df.terms()[0].coeffs(), &[2.0, -2.0]);

        let dd = g_half().derivative().derivative();
        assert_eq!(dd.parity(), Parity::Even);
        assert_eq!(dd.terms()[0].coeffs(), &[-1.0, 1.0]);
    }

    #[test]
    fn laplacian_of_gaussian() {
        for d in 1..8u32 {
            let l = g_half().radial_laplacian(d).unwrap();
            assert_eq!(l.terms()[0].coeffs(), &[-f64::from(d), 1.0]);
        }
    }

    #[test]
    fn laplacian_rejects_odd() {
        let err = g_half().derivative().radial_laplacian(3).unwrap_err();
        assert!(matches!(err, Error::WrongParity { .. }));
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let f = PolyGaussFn::from_pairs(&[(&[0.0, 1.0], 1.0)]).unwrap();
        let l = f.radial_laplacian(2).unwrap();
        let h = 1e-3;
        for r in [0.5, 1.0, 2.0] {
            let (m2, m1, p1, p2) = (f.eval(r - 2.0 * h), f.eval(r - h), f.eval(r + h), f.eval(r + 2.0 * h));
            let fd2 = (-m2 + 16.0 * m1 - 30.0 * f.eval(r) + 16.0 * p1 - p2) / (12.0 * h * h);
            let fd1 = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h);
            let fd = fd2 + fd1 / r;
            assert!((l.eval(r) - fd).abs() < 1e-8 * fd.abs().max(1.0), "r={r}");
        }
    }

    #[test]
    fn bilaplacian_of_gaussian() {
        for d in 1..10u32 {
            let df = f64::from(d);
            let l2 = g_half().radial_laplacian(d).unwrap().radial_laplacian(d).unwrap();
            let want = [df * df + 2.0 * df, -(2.0 * df + 4.0), 1.0];
            let got = l2.terms()[0].coeffs();
            for (a, b) in got.iter().zip(want) {
                assert!((a - b).abs() < 1e-12, "d={d}: {got:?}");
            }
        }
    }

    #[test]
    fn integral_examples() {
        let g = PolyGaussFn::gaussian(1.0, 1.0);
        assert!((g.integral_radial(2).unwrap() - 0.5).abs() < 1e-15);
        let f = PolyGaussFn::from_pairs(&[(&[0.0, 1.0], 1.0)]).unwrap();
        let want = std::f64::consts::PI.sqrt() / 4.0;
        assert!((f.integral_radial(1).unwrap() - want).abs() < 1e-15);
        // Γ(100)/2 from a sum of logarithms.
        let ln_fact: f64 = (1..100).map(|k| (k as f64).ln()).sum();
        let want = (ln_fact - std::f64::consts::LN_2).exp();
        let got = g.integral_radial(200).unwrap();
        assert!(got.is_finite() && got > 0.0);
        assert!(((got - want) / want).abs() < 1e-12);
    }

    #[test]
    fn integral_needs_positive_beta() {
        let c = PolyGaussFn::constant(1.0);
        assert!(matches!(c.integral_radial(3), Err(Error::Domain(_))));
        let g = PolyGaussFn::gaussian(1.0, -0.1);
        assert!(matches!(g.integral_radial(3), Err(Error::Domain(_))));
    }

    #[test]
    fn div_r_at_origin_is_exact() {
        let d = PolyGaussFn::from_pairs(&[(&[1.0, 2.0], 0.7)]).unwrap().derivative();
        let q = d.eval_div_r(0.0).unwrap();
        // f = (1 + 2s)e^{-0.7 s}: f'/r → 2(2 - 0.7) at 0
        assert!((q - 2.6).abs() < 1e-15);
        assert!(g_half().eval_div_r(0.0).is_err());
    }

    #[test]
    fn dilation_matches_pointwise() {
        let f = PolyGaussFn::from_pairs(&[(&[1.0, -0.3, 0.2], 0.6), (&[0.5], 1.4)]).unwrap();
        for lam in [0.5, 2.0, 3.3] {
            let g = f.dilate(lam);
            for r in [0.0, 0.4, 1.3, 2.5] {
                assert!(close(g.eval(r), f.eval(lam * r), envelope(&f, lam * r), 1e-13));
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        let f =
            parse_fn_spec(r#"{"terms":[{"coeffs":[1,0.5],"beta":0.7},{"coeffs":[2],"beta":0.3}]}"#).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(parse_fn_spec(&text).unwrap(), f);
        assert!(text.starts_with(r#"{"terms":[{"coeffs":[2.0],"beta":0.3}"#));
    }

    #[test]
    fn spec_errors_have_positions() {
        match parse_fn_spec("{\"terms\": [ {\"coeffs\": [1], \"beta\": }]}") {
            Err(Error::Spec { line, column, .. }) => {
                assert_eq!(line, 1);
                assert!(column > 30);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_fn_spec(r#"{"terms":[{"coeffs":[1],"beta":-1}]}"#), Err(Error::Domain(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closure_matches_pointwise(f in arb_even_fn(), g in arb_even_fn(), a in -2.0f64..2.0,
                                     rs in prop::collection::vec(0.01f64..10.0, 20)) {
            let sum = f.add_scaled(&g, a).unwrap();
            let prod = f.mul(&g);
            let dprod = prod.derivative();
            let lap = sum.radial_laplacian(3).unwrap();
            let scaled_prod = f.mul(&g.shift_beta(-0.1));
            for &r in &rs {
                let (f0, f1, f2) = jet(&f, r);
                let (g0, g1, g2) = jet(&g, r);
                let env = envelope(&f, r) + envelope(&g, r);
                prop_assert!(close(sum.eval(r), f0 + a * g0, env, 1e-10));
                prop_assert!(close(prod.eval(r), f0 * g0, env * env, 1e-10));
                // derivative envelope: polynomial degree and betas bound the growth
                let denv = env * env * (20.0 + 8.0 * r * r);
                prop_assert!(close(dprod.eval(r), f1 * g0 + f0 * g1, denv, 1e-10));
                let want_lap = (f2 + a * g2) + 2.0 * (f1 + a * g1) / r;
                let lenv = env * (100.0 + 40.0 * r * r + 10.0 * r.powi(4));
                prop_assert!(close(lap.eval(r), want_lap, lenv, 1e-10));
                let w = (0.1 * r * r).exp();
                prop_assert!(close(scaled_prod.eval(r), f0 * g0 * w, env * env * w, 1e-10));
            }
        }

        #[test]
        fn integration_is_linear(f in arb_even_fn(), g in arb_even_fn(),
                                 a in -3.0f64..3.0, b in -3.0f64..3.0, d in 1u32..30) {
            let lhs = f.scale(a).add_scaled(&g, b).unwrap().integral_radial(d).unwrap();
            let fi = f.integral_radial(d).unwrap();
            let gi = g.integral_radial(d).unwrap();
            let rhs = a * fi + b * gi;
            let scale = (a * fi).abs() + (b * gi).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn parity_rules(f in arb_even_fn(), d in 1u32..12) {
            prop_assert_eq!(f.parity(), Parity::Even);
            prop_assert_eq!(f.derivative().parity(), Parity::Odd);
            prop_assert_eq!(f.derivative().derivative().parity(), Parity::Even);
            prop_assert_eq!(f.radial_laplacian(d).unwrap().parity(), Parity::Even);
            prop_assert_eq!(f.derivative().mul(&f.derivative()).parity(), Parity::Even);
            prop_assert_eq!(f.mul(&f.derivative()).parity(), Parity::Odd);
        }

        #[test]
        fn integration_by_parts(f in arb_even_fn(), h in arb_even_fn(), d in 1u32..12) {
            // g = r·h is odd; ∫ f' g r^{d-1} = -∫ f (g' + (d-1) g/r) r^{d-1}
            let g = h.mul_r();
            let lhs = f.derivative().mul(&g).integral_radial(d).unwrap();
            let div = g.derivative().add_scaled(&h, f64::from(d) - 1.0).unwrap();
            let rhs = -f.mul(&div).integral_radial(d).unwrap();
            let scale = f.derivative().mul(&f.derivative()).integral_radial(d).unwrap().sqrt()
                * g.mul(&g).integral_radial(d).unwrap().sqrt();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(lhs.abs()));
        }
    }
}
