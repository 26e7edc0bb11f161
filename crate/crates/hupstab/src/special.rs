//! Log-space helpers shared by the moment formulas.

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln ∫₀^∞ r^m e^{-β r²} dr = ln Γ((m+1)/2) - ln 2 - ((m+1)/2) ln β`.
pub fn ln_gauss_moment(m: f64, beta: f64) -> f64 {
    let a = 0.5 * (m + 1.0);
    ln_gamma(a) - std::f64::consts::LN_2 - a * beta.ln()
}

/// Accumulates `Σ sign·exp(ln_mag)` without intermediate overflow.
#[derive(Debug, Default, Clone)]
pub struct SignedLogSum {
    parts: Vec<(f64, f64)>,
}

impl SignedLogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, coeff: f64, ln_mag: f64) {
        if coeff != 0.0 {
            self.parts.push((coeff.signum(), coeff.abs().ln() + ln_mag));
        }
    }

    pub fn value(&self) -> f64 {
        let top = self.parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return 0.0;
        }
        let s: f64 = self.parts.iter().map(|(sg, l)| sg * (l - top).exp()).sum();
        s * top.exp()
    }
}
