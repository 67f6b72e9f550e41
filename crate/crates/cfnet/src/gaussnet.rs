//! Single-layer network with Gaussian activation,
//! `g(x) = Σ β_n exp(-(w_n x + b_n)²)`, and its exact Fourier transform.
//!
//! Also holds the bivariate mixture used for two-dimensional models.

use crate::charlib::LinearTransform;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("parameter arrays have mismatched lengths")]
    Shape,
    #[error("network needs at least one neuron")]
    Empty,
    #[error("parameter `{field}` at index {index} is invalid: {reason}")]
    Invalid { field: &'static str, index: usize, reason: &'static str },
    #[error("component {index} has a singular covariance")]
    Singular { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams1D {
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl NetParams1D {
    pub fn new(beta: Vec<f64>, w: Vec<f64>, b: Vec<f64>) -> Result<Self, NetError> {
        let p = Self { beta, w, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.beta.len() != self.w.len() || self.w.len() != self.b.len() {
            return Err(NetError::Shape);
        }
        if self.beta.is_empty() {
            return Err(NetError::Empty);
        }
        for i in 0..self.len() {
            if !(self.beta[i].is_finite() && self.beta[i] != 0.0) {
                return Err(NetError::Invalid { field: "beta", index: i, reason: "must be finite and non-zero" });
            }
            if !(self.w[i].is_finite() && self.w[i] != 0.0) {
                return Err(NetError::Invalid { field: "w", index: i, reason: "must be finite and non-zero" });
            }
            if !self.b[i].is_finite() {
                return Err(NetError::Invalid { field: "b", index: i, reason: "must be finite" });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn eval_density(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for n in 0..self.len() {
            let z = self.w[n] * x + self.b[n];
            s += self.beta[n] * (-z * z).exp();
        }
        s
    }

    pub fn eval_cf(&self, eta: f64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for n in 0..self.len() {
            let iw = 1.0 / self.w[n];
            s += self.beta[n] * SQRT_PI / self.w[n] * cf_term(eta, self.b[n], iw);
        }
        s
    }

    /// Total mass Σ β_n √π / w_n, which equals `eval_cf(0).re`.
    pub fn mass(&self) -> f64 {
        (0..self.len()).map(|n| self.beta[n] * SQRT_PI / self.w[n]).sum()
    }
}

/// The network read as a Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureView {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub mass: Vec<f64>,
}

impl From<&NetParams1D> for MixtureView {
    fn from(p: &NetParams1D) -> Self {
        let n = p.len();
        let mut v = MixtureView { mean: Vec::with_capacity(n), var: Vec::with_capacity(n), mass: Vec::with_capacity(n) };
        for i in 0..n {
            v.mean.push(-p.b[i] / p.w[i]);
            v.var.push(1.0 / (2.0 * p.w[i] * p.w[i]));
            v.mass.push(p.beta[i] * SQRT_PI / p.w[i].abs());
        }
        v
    }
}

impl MixtureView {
    /// Back to network form with every w_n positive.
    pub fn to_params(&self) -> NetParams1D {
        let w: Vec<f64> = self.var.iter().map(|v| 1.0 / (2.0 * v).sqrt()).collect();
        NetParams1D { beta: self.mass.iter().zip(&w).map(|(m, w)| m * w / SQRT_PI).collect(), b: self.mean.iter().zip(&w).map(|(mu, w)| -mu * w).collect(), w }
    }

    /// (mean, sd, mass) per component.
    pub fn components(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.mean.len()).map(|i| (self.mean[i], self.var[i].sqrt(), self.mass[i]))
    }

    pub fn eval_density(&self, x: f64) -> f64 {
        self.components().map(|(mu, sd, m)| m * (-(x - mu) * (x - mu) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub mse: f64,
    pub mae: f64,
    pub total: f64,
}

impl LossParts {
    fn from_sums(sq: f64, abs: f64, n: usize) -> Self {
        let mse = sq / n as f64;
        let mae = abs / n as f64;
        Self { mse, mae, total: mse + mae }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Points per parallel work unit. Fixed so the reduction order never
/// depends on the thread count.
pub const CHUNK: usize = 128;

/// Sum per-chunk results either in index order (deterministic) or with
/// rayon's adaptive tree.
pub(crate) fn chunked_sum<T, F, A>(len: usize, deterministic: bool, zero: T, f: F, add: A) -> T
where
    T: Send + Clone + Sync,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    A: Fn(T, T) -> T + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(len);
    if deterministic {
        let parts: Vec<T> = (0..chunks).into_par_iter().map(|c| f(range(c))).collect();
        parts.into_iter().fold(zero, &add)
    } else {
        (0..chunks).into_par_iter().map(|c| f(range(c))).reduce(|| zero.clone(), &add)
    }
}

/// Mean squared complex residual plus mean absolute Re/Im residual.
pub fn loss_eval(theta: &NetParams1D, etas: &[f64], targets: &[Complex64]) -> LossParts {
    assert_eq!(etas.len(), targets.len());
    let (sq, abs) = chunked_sum(
        etas.len(),
        true,
        (0.0, 0.0),
        |r| {
            let mut sq = 0.0;
            let mut abs = 0.0;
            for p in r {
                let d = theta.eval_cf(etas[p]) - targets[p];
                sq += d.re * d.re + d.im * d.im;
                abs += d.re.abs() + d.im.abs();
            }
            (sq, abs)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    LossParts::from_sums(sq, abs, etas.len().max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grad1D {
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Grad1D {
    fn zeros(n: usize) -> Self {
        Self { beta: vec![0.0; n], w: vec![0.0; n], b: vec![0.0; n] }
    }

    fn add(mut self, o: Self) -> Self {
        for i in 0..self.beta.len() {
            self.beta[i] += o.beta[i];
            self.w[i] += o.w[i];
            self.b[i] += o.b[i];
        }
        self
    }
}

/// Loss and its exact gradient with respect to (β, w, b) over a batch.
/// The absolute-value subgradient at a zero residual is 0.
/// exp(-i eta b / w) exp(-eta² / 4w²) with `iw` = 1/w.
#[inline]
fn cf_term(eta: f64, b: f64, iw: f64) -> Complex64 {
    let dec = (-0.25 * eta * eta * iw * iw).exp();
    let (s, c) = (eta * b * iw).sin_cos();
    Complex64::new(c * dec, -s * dec)
}

pub fn loss_and_grad(theta: &NetParams1D, etas: &[f64], targets: &[Complex64], deterministic: bool) -> (LossParts, Grad1D) {
    assert_eq!(etas.len(), targets.len());
    let n = theta.len();
    let amp0: Vec<f64> = (0..n).map(|i| theta.beta[i] * SQRT_PI / theta.w[i]).collect();
    let inv_w: Vec<f64> = theta.w.iter().map(|w| 1.0 / w).collect();
    let (sq, abs, g) = chunked_sum(
        etas.len(),
        deterministic,
        (0.0, 0.0, Grad1D::zeros(n)),
        |r| {
            let mut g = Grad1D::zeros(n);
            let mut sq = 0.0;
            let mut abs = 0.0;
            let mut basis_row = vec![Complex64::new(0.0, 0.0); n];
            for p in r {
                let eta = etas[p];
                let mut pred = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    basis_row[i] = cf_term(eta, theta.b[i], inv_w[i]);
                    pred += amp0[i] * basis_row[i];
                }
                let d = pred - targets[p];
                sq += d.re * d.re + d.im * d.im;
                abs += d.re.abs() + d.im.abs();
                // dL = Re(conj(k) dG) with k the outer derivative.
                let k = Complex64::new(2.0 * d.re + sign(d.re), -(2.0 * d.im + sign(d.im)));
                for i in 0..n {
                    let iw = inv_w[i];
                    let kb = k * basis_row[i];
                    g.beta[i] += SQRT_PI * iw * kb.re;
                    let kg = kb * amp0[i];
                    // d ln G_n / d b = -i eta / w
                    g.b[i] += kg.im * eta * iw;
                    // d ln G_n / d w = -1/w + eta²/(2w³) + i eta b / w²
                    let real = -iw + 0.5 * eta * eta * iw * iw * iw;
                    let imag = eta * theta.b[i] * iw * iw;
                    g.w[i] += kg.re * real - kg.im * imag;
                }
            }
            (sq, abs, g)
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2.add(b.2)),
    );
    let m = etas.len().max(1) as f64;
    let mut g = g;
    for v in g.beta.iter_mut().chain(g.w.iter_mut()).chain(g.b.iter_mut()) {
        *v /= m;
    }
    (LossParts::from_sums(sq, abs, etas.len().max(1)), g)
}

pub fn grad_loss(theta: &NetParams1D, etas: &[f64], targets: &[Complex64]) -> Grad1D {
    loss_and_grad(theta, etas, targets, true).1
}

/// Density of X recovered from a network trained on Y = aX + c.
#[derive(Debug, Clone)]
pub struct Recovered<'a> {
    pub theta: &'a NetParams1D,
    pub transform: LinearTransform,
}

impl Recovered<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        self.transform.scale.abs() * self.theta.eval_density(self.transform.forward(x))
    }
}

pub fn recover_original(theta: &NetParams1D, transform: LinearTransform) -> Recovered<'_> {
    Recovered { theta, transform }
}

/// Bivariate Gaussian mixture. Each component carries a weight, a mean,
/// two positive spreads and a correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParams2D {
    pub beta: Vec<f64>,
    pub mean: Vec<[f64; 2]>,
    pub spread: Vec<[f64; 2]>,
    pub corr: Vec<f64>,
}

impl NetParams2D {
    pub fn validate(&self) -> Result<(), NetError> {
        let n = self.beta.len();
        if self.mean.len() != n || self.spread.len() != n || self.corr.len() != n {
            return Err(NetError::Shape);
        }
        if n == 0 {
            return Err(NetError::Empty);
        }
        for i in 0..n {
            if !self.beta[i].is_finite() || !self.mean[i].iter().all(|v| v.is_finite()) {
                return Err(NetError::Invalid { field: "beta/mean", index: i, reason: "must be finite" });
            }
            if !self.spread[i].iter().all(|s| s.is_finite() && *s > 0.0) {
                return Err(NetError::Invalid { field: "spread", index: i, reason: "must be positive" });
            }
            if !(self.corr[i].abs() < 1.0) {
                return Err(NetError::Singular { index: i });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn eval_density_2d(&self, x: [f64; 2]) -> Result<f64, NetError> {
        let mut s = 0.0;
        for i in 0..self.len() {
            let [s1, s2] = self.spread[i];
            let rho = self.corr[i];
            let det = 1.0 - rho * rho;
            if !(det > 0.0) {
                return Err(NetError::Singular { index: i });
            }
            let z1 = (x[0] - self.mean[i][0]) / s1;
            let z2 = (x[1] - self.mean[i][1]) / s2;
            let q = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / det;
            s += self.beta[i] * (-0.5 * q).exp() / (2.0 * PI * s1 * s2 * det.sqrt());
        }
        Ok(s)
    }

    pub fn eval_cf_2d(&self, eta: [f64; 2]) -> Result<Complex64, NetError> {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..self.len() {
            if !(self.corr[i].abs() < 1.0) {
                return Err(NetError::Singular { index: i });
            }
            s += self.beta[i] * component_basis(&self.mean[i], &self.spread[i], self.corr[i], eta);
        }
        Ok(s)
    }
}

fn component_basis(mean: &[f64; 2], spread: &[f64; 2], rho: f64, eta: [f64; 2]) -> Complex64 {
    let [s1, s2] = *spread;
    let a = s1 * eta[0];
    let b = s2 * eta[1];
    let quad = a * a + 2.0 * rho * a * b + b * b;
    let (sin, cos) = (eta[0] * mean[0] + eta[1] * mean[1]).sin_cos();
    let dec = (-0.5 * quad).exp();
    Complex64::new(cos * dec, sin * dec)
}

/// Gradient of the 2D loss with respect to the unconstrained coordinates
/// (β, mean, ln spread, atanh corr).
#[derive(Debug, Clone, PartialEq)]
pub struct Grad2D {
    pub beta: Vec<f64>,
    pub mean: Vec<[f64; 2]>,
    pub log_spread: Vec<[f64; 2]>,
    pub corr_raw: Vec<f64>,
}

impl Grad2D {
    fn zeros(n: usize) -> Self {
        Self { beta: vec![0.0; n], mean: vec![[0.0; 2]; n], log_spread: vec![[0.0; 2]; n], corr_raw: vec![0.0; n] }
    }

    fn add(mut self, o: Self) -> Self {
        for i in 0..self.beta.len() {
            self.beta[i] += o.beta[i];
            self.corr_raw[i] += o.corr_raw[i];
            for k in 0..2 {
                self.mean[i][k] += o.mean[i][k];
                self.log_spread[i][k] += o.log_spread[i][k];
            }
        }
        self
    }
}

pub fn loss_eval_2d(theta: &NetParams2D, etas: &[[f64; 2]], targets: &[Complex64]) -> LossParts {
    let (sq, abs) = chunked_sum(
        etas.len(),
        true,
        (0.0, 0.0),
        |r| {
            let mut sq = 0.0;
            let mut abs = 0.0;
            for p in r {
                let mut pred = Complex64::new(0.0, 0.0);
                for i in 0..theta.len() {
                    pred += theta.beta[i] * component_basis(&theta.mean[i], &theta.spread[i], theta.corr[i], etas[p]);
                }
                let d = pred - targets[p];
                sq += d.norm_sqr();
                abs += d.re.abs() + d.im.abs();
            }
            (sq, abs)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    LossParts::from_sums(sq, abs, etas.len().max(1))
}

pub fn loss_and_grad_2d(theta: &NetParams2D, etas: &[[f64; 2]], targets: &[Complex64], deterministic: bool) -> (LossParts, Grad2D) {
    let n = theta.len();
    let (sq, abs, g) = chunked_sum(
        etas.len(),
        deterministic,
        (0.0, 0.0, Grad2D::zeros(n)),
        |r| {
            let mut g = Grad2D::zeros(n);
            let mut sq = 0.0;
            let mut abs = 0.0;
            let mut basis = vec![Complex64::new(0.0, 0.0); n];
            for p in r {
                let eta = etas[p];
                let mut pred = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    basis[i] = component_basis(&theta.mean[i], &theta.spread[i], theta.corr[i], eta);
                    pred += theta.beta[i] * basis[i];
                }
                let d = pred - targets[p];
                sq += d.norm_sqr();
                abs += d.re.abs() + d.im.abs();
                let k = Complex64::new(2.0 * d.re + sign(d.re), -(2.0 * d.im + sign(d.im)));
                for i in 0..n {
                    let kb = k * basis[i];
                    g.beta[i] += kb.re;
                    let kg = kb * theta.beta[i];
                    // d ln G_n / d mean_k = i eta_k
                    g.mean[i][0] -= kg.im * eta[0];
                    g.mean[i][1] -= kg.im * eta[1];
                    let [s1, s2] = theta.spread[i];
                    let rho = theta.corr[i];
                    let a = s1 * eta[0];
                    let b = s2 * eta[1];
                    g.log_spread[i][0] -= kg.re * (a * a + rho * a * b);
                    g.log_spread[i][1] -= kg.re * (b * b + rho * a * b);
                    g.corr_raw[i] -= kg.re * a * b * (1.0 - rho * rho);
                }
            }
            (sq, abs, g)
        },
        |a, b| (a.0 + b.0, a.1 + b.1, a.2.add(b.2)),
    );
    let m = etas.len().max(1) as f64;
    let mut g = g;
    for i in 0..n {
        g.beta[i] /= m;
        g.corr_raw[i] /= m;
        for k in 0..2 {
            g.mean[i][k] /= m;
            g.log_spread[i][k] /= m;
        }
    }
    (LossParts::from_sums(sq, abs, etas.len().max(1)), g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(beta: f64, w: f64, b: f64) -> NetParams1D {
        NetParams1D::new(vec![beta], vec![w], vec![b]).unwrap()
    }

    #[test]
    fn single_neuron_peak() {
        assert_eq!(one(1.0, 1.0, 0.0).eval_density(0.0), 1.0);
    }

    #[test]
    fn even_without_bias() {
        let p = one(0.7, 1.3, 0.0);
        for x in [0.1, 0.5, 2.0] {
            assert_eq!(p.eval_density(x), p.eval_density(-x));
        }
    }

    #[test]
    fn cf_at_zero_is_mass() {
        let p = NetParams1D::new(vec![0.3, -0.1], vec![2.0, 0.5], vec![0.4, -1.0]).unwrap();
        let g = p.eval_cf(0.0);
        assert_eq!(g.im, 0.0);
        assert!((g.re - p.mass()).abs() <= 1e-15);
    }

    #[test]
    fn zero_bias_has_real_cf() {
        let p = NetParams1D::new(vec![0.3, 0.2], vec![2.0, 0.5], vec![0.0, 0.0]).unwrap();
        for eta in [-4.0, 0.3, 9.0] {
            assert_eq!(p.eval_cf(eta).im, 0.0);
        }
    }

    #[test]
    fn hand_loss() {
        let p = one(1.0, 1.0, 0.0);
        let g = p.eval_cf(0.5);
        let target = g - Complex64::new(0.3, -0.4);
        let l = loss_eval(&p, &[0.5], &[target]);
        assert!((l.mse - 0.25).abs() < 1e-15);
        assert!((l.mae - 0.7).abs() < 1e-15);
        assert!((l.total - 0.95).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let p = NetParams1D::new(vec![0.3, 0.2], vec![2.0, 0.5], vec![0.1, -0.2]).unwrap();
        let etas = [0.0, 1.0, -2.5];
        let targets: Vec<_> = etas.iter().map(|&e| p.eval_cf(e)).collect();
        let (l, g) = loss_and_grad(&p, &etas, &targets, true);
        assert_eq!(l.total, 0.0);
        assert!(g.beta.iter().chain(&g.w).chain(&g.b).all(|v| *v == 0.0));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(NetParams1D::new(vec![0.0], vec![1.0], vec![0.0]).is_err());
        assert!(NetParams1D::new(vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(NetParams1D::new(vec![1.0], vec![1.0], vec![f64::INFINITY]).is_err());
        assert!(NetParams1D::new(vec![1.0, 2.0], vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn mixture_round_trip_flips_negative_w() {
        let p = NetParams1D::new(vec![0.3, 0.2], vec![-2.0, 0.5], vec![0.1, -0.2]).unwrap();
        let q = MixtureView::from(&p).to_params();
        assert!(q.w.iter().all(|w| *w > 0.0));
        for x in [-1.0, 0.0, 0.4, 2.0] {
            assert!((p.eval_density(x) - q.eval_density(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn bivariate_independent_factorizes() {
        let t = NetParams2D { beta: vec![0.8], mean: vec![[0.1, -0.2]], spread: vec![[0.3, 0.5]], corr: vec![0.0] };
        let normal = |x: f64, m: f64, s: f64| (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt());
        let x = [0.25, 0.4];
        let want = 0.8 * normal(x[0], 0.1, 0.3) * normal(x[1], -0.2, 0.5);
        assert!((t.eval_density_2d(x).unwrap() - want).abs() < 1e-14);
        assert_eq!(t.eval_cf_2d([0.0, 0.0]).unwrap(), Complex64::new(0.8, 0.0));
    }

    #[test]
    fn singular_component_rejected() {
        let t = NetParams2D { beta: vec![1.0], mean: vec![[0.0, 0.0]], spread: vec![[1.0, 1.0]], corr: vec![1.0] };
        assert!(t.eval_density_2d([0.0, 0.0]).is_err());
        assert!(t.eval_cf_2d([1.0, 0.0]).is_err());
    }
}
