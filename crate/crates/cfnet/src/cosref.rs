//! Fourier-cosine expansion: reference densities and vanilla prices.

use crate::charlib::CharFn;
use crate::pricer::{Convention, OptionKind, PayoffSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CosError {
    #[error("x = {x} lies outside the expansion range [{a}, {b}]")]
    Domain { x: f64, a: f64, b: f64 },
    #[error("invalid expansion config: {0}")]
    Config(String),
    #[error("cumulant estimate is not finite")]
    Range,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosConfig {
    pub n_terms: usize,
    pub a: f64,
    pub b: f64,
}

impl CosConfig {
    pub fn new(n_terms: usize, a: f64, b: f64) -> Result<Self, CosError> {
        let c = Self { n_terms, a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CosError> {
        if self.n_terms < 2 {
            return Err(CosError::Config("n_terms must be at least 2".into()));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.a < self.b) {
            return Err(CosError::Config(format!("range [{}, {}] is empty", self.a, self.b)));
        }
        Ok(())
    }

    fn freq(&self, k: usize) -> f64 {
        k as f64 * PI / (self.b - self.a)
    }
}

/// Expansion coefficients Re{G(u_k) e^{-i u_k a}}, first one halved.
fn coefficients<F: CharFn>(cf: &F, cfg: &CosConfig) -> Vec<f64> {
    (0..cfg.n_terms)
        .map(|k| {
            let u = cfg.freq(k);
            let v = (cf.eval(u) * Complex64::from_polar(1.0, -u * cfg.a)).re;
            if k == 0 {
                0.5 * v
            } else {
                v
            }
        })
        .collect()
}

/// Precomputed cosine series for repeated density evaluation.
#[derive(Debug, Clone)]
pub struct CosDensity {
    cfg: CosConfig,
    coef: Vec<f64>,
}

impl CosDensity {
    pub fn new<F: CharFn>(cf: &F, cfg: CosConfig) -> Result<Self, CosError> {
        cfg.validate()?;
        Ok(Self { coef: coefficients(cf, &cfg), cfg })
    }

    pub fn eval(&self, x: f64) -> Result<f64, CosError> {
        let CosConfig { a, b, .. } = self.cfg;
        if !(a..=b).contains(&x) {
            return Err(CosError::Domain { x, a, b });
        }
        let s: f64 = self.coef.iter().enumerate().map(|(k, c)| c * (self.cfg.freq(k) * (x - a)).cos()).sum();
        Ok(2.0 / (b - a) * s)
    }
}

pub fn cos_density<F: CharFn>(cf: &F, x: f64, cfg: CosConfig) -> Result<f64, CosError> {
    CosDensity::new(cf, cfg)?.eval(x)
}

/// ∫_c^d e^y cos(u(y - a)) dy and ∫_c^d cos(u(y - a)) dy.
fn chi_psi(u: f64, a: f64, c: f64, d: f64) -> (f64, f64) {
    let (sd, cd) = (u * (d - a)).sin_cos();
    let (sc, cc) = (u * (c - a)).sin_cos();
    let chi = (cd * d.exp() - cc * c.exp() + u * sd * d.exp() - u * sc * c.exp()) / (1.0 + u * u);
    let psi = if u == 0.0 { d - c } else { (sd - sc) / u };
    (chi, psi)
}

/// Vanilla price from the cosine expansion with closed-form payoff coefficients.
///
/// `cf` describes ln(S_T/S_0) under [`Convention::LogReturn`] and ln S_T
/// under [`Convention::LogPrice`].
pub fn cos_price_european<F: CharFn>(cf: &F, payoff: &PayoffSpec, rate: f64, maturity: f64, cfg: CosConfig) -> Result<f64, CosError> {
    cfg.validate()?;
    let (log_strike, scale) = match payoff.convention {
        Convention::LogReturn { spot } => ((payoff.strike / spot).ln(), spot),
        Convention::LogPrice => (payoff.strike.ln(), 1.0),
    };
    let k = log_strike.clamp(cfg.a, cfg.b);
    let coef = coefficients(cf, &cfg);
    let mut s = 0.0;
    for (j, c) in coef.iter().enumerate() {
        let u = cfg.freq(j);
        let v = match payoff.kind {
            OptionKind::Call => {
                let (chi, psi) = chi_psi(u, cfg.a, k, cfg.b);
                scale * chi - payoff.strike * psi
            }
            OptionKind::Put => {
                let (chi, psi) = chi_psi(u, cfg.a, cfg.a, k);
                payoff.strike * psi - scale * chi
            }
        };
        s += c * v;
    }
    Ok((-rate * maturity).exp() * 2.0 / (cfg.b - cfg.a) * s)
}

/// First, second and fourth cumulants from finite differences of ln G at 0.
///
/// The first two use step 1e-4; the fourth uses a coarser step with one
/// Richardson extrapolation, since a fourth difference at 1e-4 is swamped
/// by rounding.
pub fn cumulants<F: CharFn>(cf: &F) -> [f64; 3] {
    let lg = |e: f64| cf.eval(e).ln();
    let h = 1e-4;
    let c1 = ((lg(h) - lg(-h)) / (2.0 * h)).im;
    let c2 = -((lg(h) - 2.0 * lg(0.0) + lg(-h)) / (h * h)).re;
    let d4 = |h: f64| ((lg(2.0 * h) - 4.0 * lg(h) + 6.0 * lg(0.0) - 4.0 * lg(-h) + lg(-2.0 * h)) / h.powi(4)).re;
    let h4 = 0.05;
    let c4 = (4.0 * d4(h4 / 2.0) - d4(h4)) / 3.0;
    [c1, c2, c4]
}

/// Truncation range c1 ± 10 √(|c2| + √|c4|).
pub fn cumulant_range<F: CharFn>(cf: &F) -> Result<(f64, f64), CosError> {
    let [c1, c2, c4] = cumulants(cf);
    let half = 10.0 * (c2.abs() + c4.abs().sqrt()).sqrt();
    if !(c1.is_finite() && half.is_finite() && half > 0.0) {
        return Err(CosError::Range);
    }
    Ok((c1 - half, c1 + half))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(e: f64) -> Complex64 {
        Complex64::new((-0.5 * e * e).exp(), 0.0)
    }

    #[test]
    fn standard_normal_cumulants() {
        let [c1, c2, c4] = cumulants(&normal);
        assert!(c1.abs() < 1e-12);
        assert!((c2 - 1.0).abs() < 1e-7);
        assert!(c4.abs() < 1e-6);
    }

    #[test]
    fn outside_range_is_domain_error() {
        let cfg = CosConfig::new(64, -5.0, 5.0).unwrap();
        assert!(matches!(cos_density(&normal, 6.0, cfg), Err(CosError::Domain { .. })));
    }

    #[test]
    fn normal_density_recovered() {
        let cfg = CosConfig::new(128, -10.0, 10.0).unwrap();
        let d = CosDensity::new(&normal, cfg).unwrap();
        for x in [-1.0f64, 0.0, 0.5, 2.0] {
            let want = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
            assert!((d.eval(x).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn degenerate_config_rejected() {
        assert!(CosConfig::new(1, 0.0, 1.0).is_err());
        assert!(CosConfig::new(8, 1.0, 1.0).is_err());
    }
}
